"""Sphinx configuration for the lsfield API reference."""

import os
import sys

sys.path.insert(0, os.path.abspath(".."))

project = "lsfield.py"
copyright = "2026, lsfield developers"
author = "lsfield developers"

# Google-style docstrings throughout the package
extensions = ["sphinx.ext.autodoc", "sphinx.ext.napoleon"]
napoleon_google_docstring = True
napoleon_numpy_docstring = False
autodoc_member_order = "bysource"
autodoc_typehints = "description"

exclude_patterns = ["_build"]

html_theme = "sphinx_rtd_theme"
