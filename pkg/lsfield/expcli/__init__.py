"""Experiment driver: configs, scenario runs, slope reports and the CLI."""
from __future__ import annotations

from lsfield.expcli.config import ExperimentConfig, load_config, preset_names
from lsfield.expcli.report import SlopeReport, slope_report
from lsfield.expcli.runner import RunManifest, run

__all__ = ("ExperimentConfig", "load_config", "preset_names", "SlopeReport", "slope_report", "RunManifest", "run")
