"""Scenario orchestration: curve CSVs, sidecars, field exports and the run manifest."""

from __future__ import annotations

import json
import logging
import time
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

import lsfield
from lsfield.expcli.config import ExperimentConfig, load_config
from lsfield.expcli.report import sidecar_path, slope_report
from lsfield.fieldsim import (
    GaussianFieldSampler,
    chi_square_field,
    covariance_profile,
    empirical_indicator_mi,
    minkowski_m0,
    write_field,
)
from lsfield.handler import Handler
from lsfield.lsmodel import mi_curve
from lsfield.polybasis import expand, rank_of
from lsfield.schemas import CurveSidecarSchema, RunManifestSchema
from lsfield.stfunctional import mi_surface, scalar_engine

if t.TYPE_CHECKING:
    import os

    from lsfield.lsmodel import LSModel, MICurve, SlopeFit
    from lsfield.typings import STR_DICT

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"


@dataclass
class RunManifest:
    """Provenance of one run: config hash, artifacts with byte lengths, slopes and warnings."""

    name: str
    scenario: str
    config_hash: str
    version: str = lsfield.__version__
    wall_clock: float = 0.0
    artifacts: list[STR_DICT] = field(default_factory=list)
    slopes: list[STR_DICT] = field(default_factory=list)
    warnings: list[STR_DICT] = field(default_factory=list)

    def add(self, path: Path, kind: str) -> Path:
        self.artifacts.append({"path": str(path), "bytes": path.stat().st_size, "kind": kind})
        return path

    def add_slope(self, curve: str, fit: SlopeFit) -> None:
        self.slopes.append(
            {
                "curve": curve,
                "slope": fit.slope,
                "stderr": fit.stderr,
                "window": list(fit.window),
                "points": fit.points,
                "error": fit.error,
            }
        )

    def to_dict(self) -> STR_DICT:
        data: STR_DICT = RunManifestSchema().dump(self)
        return data

    def verify(self) -> list[str]:
        """Artifacts that are missing or whose size changed since they were recorded."""
        bad = []
        for artifact in self.artifacts:
            path = Path(artifact["path"])
            if not path.is_file() or path.stat().st_size != artifact["bytes"]:
                bad.append(artifact["path"])
        return bad


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """CSV with a header row, 12 significant digits and LF line endings."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_json(data: t.Any, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n")
    return path


def _q_tag(q: float) -> str:
    return f"q{q:g}".replace(".", "_")


def field_rank(model: LSModel) -> int:
    """Hermite-type rank of the identity transform in the model basis."""
    return rank_of(expand(lambda u: u, model.basis, K=1))


def curve_frame(curve: MICurve) -> pd.DataFrame:
    columns: STR_DICT = {"d": curve.distances, "mi": curve.mi_values}
    if curve.lower_bound is not None and curve.upper_bound is not None:
        columns["lower"] = curve.lower_bound
        columns["upper"] = curve.upper_bound
    return pd.DataFrame(columns)


class Runner:
    """Executes one validated config into its run directory."""

    __slots__ = ("config", "out", "manifest")

    def __init__(self, config: ExperimentConfig, output: str | os.PathLike[str] | None = None) -> None:
        self.config = config
        self.out = config.output_dir(output)
        self.manifest = RunManifest(name=config.name, scenario=config.scenario, config_hash=config.config_hash)

    def __repr__(self) -> str:
        return f"<Runner name={self.config.name} scenario={self.config.scenario} out={self.out}>"

    def run(self) -> RunManifest:
        handler = Handler()
        package_logger = logging.getLogger("lsfield")
        package_logger.addHandler(handler)
        started = time.perf_counter()
        try:
            getattr(self, f"_run_{self.config.scenario}")()
        finally:
            package_logger.removeHandler(handler)
        self.manifest.wall_clock = time.perf_counter() - started
        self.manifest.warnings = handler.records
        write_json(self.manifest.to_dict(), self.out / "manifest.json")
        return self.manifest

    # --- helpers --- #

    def _emit_curve(self, stem: str, curve: MICurve, model: LSModel, rank: int | None) -> None:
        path = self.manifest.add(write_csv(curve_frame(curve), self.out / f"{stem}.csv"), "csv")
        sidecar = CurveSidecarSchema().dump(
            {
                "curve": path.name,
                "variant": curve.variant,
                "rho": model.corr.lrd_exponent,
                "rank": rank,
                "q": curve.q,
                "model": model.describe(),
            }
        )
        self.manifest.add(write_json(sidecar, sidecar_path(path)), "json")
        self.manifest.add_slope(path.name, curve.slope_fit)
        if not curve.slope_fit.ok:
            logger.warning(
                "slope fit of %s failed: %s",
                path.name,
                curve.slope_fit.error,
                extra={"event": "fit-failed", "curve": path.name},
            )

    def _curve_kwargs(self) -> STR_DICT:
        window = self.config.data["fit_window"]
        return {"fit_window": tuple(window) if window else None, "workers": self.config.data["workers"]}

    # --- scenarios --- #

    def _run_mi_curve(self) -> None:
        model = self.config.model()
        curve = mi_curve(model, self.config.distances(), **self._curve_kwargs())
        self._emit_curve(self.config.name, curve, model, rank=field_rank(model))

    def _run_renyi_curve(self) -> None:
        model = self.config.model()
        distances = self.config.distances()
        rank = field_rank(model)
        for q in self.config.data["q"]:
            curve = mi_curve(model, distances, q=q, **self._curve_kwargs())
            self._emit_curve(f"{self.config.name}-{_q_tag(q)}", curve, model, rank=rank)

    def _run_subordinated_curve(self) -> None:
        model = self.config.model()
        spec = model.subordinate(self.config.transform())
        distances = self.config.distances()
        orders: list[float | None] = list(self.config.data.get("q") or [None])
        for q in orders:
            curve = mi_curve(model, distances, spec=spec, q=q, **self._curve_kwargs())
            stem = self.config.name if q is None else f"{self.config.name}-{_q_tag(q)}"
            self._emit_curve(stem, curve, model, rank=spec.coeffs.rank)

    def _run_field_sim(self) -> None:
        data = self.config.data
        grid = self.config.grid()
        corr = self.config.correlation()
        seed, replicates, nu = data["seed"], data["replicates"], data.get("nu")
        sampler = GaussianFieldSampler(grid, corr, data["method"])

        profile = covariance_profile(grid, corr, replicates, seed, method=sampler.method)
        self.manifest.add(write_csv(profile, self.out / f"{self.config.name}-covariance.csv"), "csv")

        if data["n_dof"]:
            fields = [chi_square_field(grid, corr, data["n_dof"], seed + i, sampler=sampler) for i in range(replicates)]
        else:
            fields = [sampler.sample(seed + i) for i in range(replicates)]
        binary, header = write_field(fields[0], self.out / f"{self.config.name}-field.bin")
        self.manifest.add(binary, "field")
        self.manifest.add(header, "header")

        if nu is not None:
            m0 = np.array([minkowski_m0(f, nu) for f in fields])
            frame = pd.DataFrame({"replicate": np.arange(replicates), "m0": m0, "fraction": m0 / grid.volume})
            self.manifest.add(write_csv(frame, self.out / f"{self.config.name}-m0.csv"), "csv")

        if data.get("empirical_distances") is not None and nu is not None:
            curve = empirical_indicator_mi(corr, nu, self.config.distances("empirical_distances"), replicates, seed)
            frame = curve_frame(curve).assign(stderr=curve.stderr, half_width=curve.half_width, degenerate=curve.degenerate)
            path = self.manifest.add(write_csv(frame, self.out / f"{self.config.name}-empirical-mi.csv"), "csv")
            self.manifest.add_slope(path.name, curve.slope_fit)

    def _run_st_surface(self) -> None:
        data = self.config.data
        gc = self.config.gneiting()
        basis = self.config.time_basis()
        truncation = data["model"]["truncation"] if "model" in data else 10
        engine = scalar_engine(truncation=truncation, dim=gc.dim)
        mesh_spec = data.get("time_mesh")
        mesh = None if mesh_spec is None else np.linspace(mesh_spec["start"], mesh_spec["stop"], mesh_spec["num"])

        rows = []
        for r in data["surface_distances"]:
            surface = mi_surface(gc, basis, r, mesh, engine=engine, workers=data["workers"])
            stem = f"{self.config.name}-r{r:g}".replace(".", "_")
            self.manifest.add(write_csv(surface.to_frame(), self.out / f"{stem}.csv"), "csv")
            self.manifest.add(write_json(surface.metadata(), self.out / f"{stem}.json"), "json")
            rows.append({"r": r, "mean_level": surface.mean_level, "entry_11": surface.entries[0, 0]})
        self.manifest.add(write_csv(pd.DataFrame(rows), self.out / f"{self.config.name}-summary.csv"), "csv")

    def _run_slope_report(self) -> None:
        data = self.config.data
        window = tuple(data["window"]) if data["window"] else None
        report = slope_report(data["curve"], window, data["tolerance"])
        stem = f"{Path(data['curve']).stem}-slope"
        self.manifest.add(write_csv(report.table, self.out / f"{stem}.csv"), "csv")
        text_path = self.out / f"{stem}.txt"
        text_path.write_text(report.text, encoding="utf-8", newline="\n")
        self.manifest.add(text_path, "text")
        self.manifest.add_slope(Path(data["curve"]).name, report.fit)


def run(
    source: str | os.PathLike[str] | STR_DICT,
    *,
    preset: bool = False,
    output: str | os.PathLike[str] | None = None,
) -> RunManifest:
    """Validate a config, execute its scenario and write the manifest.

    Args:
        source (str | PathLike | dict): Config path, preset name or raw mapping.
        preset (bool): Treat ``source`` as a preset name.
        output (str | PathLike, optional): Output root overriding config and environment.
    Returns:
        The run manifest.
    """
    return Runner(load_config(source, preset=preset), output).run()

