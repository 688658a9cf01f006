from __future__ import annotations

import typing as t
from pathlib import Path

import numpy as np
import pytest

from lsfield.covmodels import PowerLawBG, PurePower, Squared
from lsfield.lsmodel import LSModel
from lsfield.polybasis import MarginalDensity

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--update-fixtures", action="store_true", help="Rewrite the pinned CSV fixtures.")


@pytest.fixture(scope="session")
def pinned(request: pytest.FixtureRequest) -> t.Callable[[Path, str], bool]:
    """Compare a file byte-for-byte with its pinned copy under ``tests/fixtures``.

    A missing copy (or ``--update-fixtures``) records the file; the check then
    returns False so the caller can skip.
    """
    update = request.config.getoption("--update-fixtures")

    def check(path: Path, relative: str) -> bool:
        fixture = FIXTURES / relative
        if update or not fixture.is_file():
            fixture.parent.mkdir(parents=True, exist_ok=True)
            fixture.write_bytes(path.read_bytes())
            return False
        assert path.read_bytes() == fixture.read_bytes(), f"{path.name} differs from {relative}"
        return True

    return check


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def gaussian() -> MarginalDensity:
    return MarginalDensity.gaussian()


@pytest.fixture(scope="session")
def gamma5() -> MarginalDensity:
    return MarginalDensity.gamma(5.0, 1.0)


@pytest.fixture(scope="session")
def bg() -> PowerLawBG:
    return PowerLawBG(0.2, 0.2)


@pytest.fixture(scope="session")
def gaussian_m10(gaussian: MarginalDensity) -> LSModel:
    return LSModel(gaussian, PurePower(0.5), 10)


@pytest.fixture(scope="session")
def gaussian_m5(gaussian: MarginalDensity) -> LSModel:
    return LSModel(gaussian, PurePower(0.5), 5)


@pytest.fixture(scope="session")
def chisq_m5(gamma5: MarginalDensity, bg: PowerLawBG) -> LSModel:
    return LSModel(gamma5, Squared(bg), 5)
