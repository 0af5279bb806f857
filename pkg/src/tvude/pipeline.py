"""End-to-end estimation: CSV in, window table and trajectory fits out."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, FitError
from .model import Family, ModelSpec, ParamTrajectory
from .regression import (
    GaussNewtonConfig,
    Kind,
    RegressionFamily,
    RegressionFit,
    fit,
)
from .uncertainty import TimeGrid, TimeSeries, euler_simulate
from .windows import WindowConfig, WindowEstimate, WindowFailure, sliding_estimates

log = logging.getLogger(__name__)

CURVE_SAMPLES = 200

BUNDLED = {
    "alcohol": "Blood alcohol concentration after drinking, 30 observations over 16 h.",
    "covid": "Cumulative COVID-19 cases, 35 consecutive days (Feb 13 to Mar 18, 2020).",
}


@dataclass(frozen=True)
class Dataset:
    name: str
    series: TimeSeries
    provenance: str = ""


def _parse_float(cell, what, line):
    try:
        value = float(cell)
    except (TypeError, ValueError):
        raise DataError(f"{what} value {cell!r} is not numeric", line) from None
    if not math.isfinite(value):
        raise DataError(f"{what} value {cell!r} is not finite", line)
    return value


def read_series(stream, t_column="t", x_column="x") -> TimeSeries:
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty file (no header row)", 1) from None
    try:
        ti, xi = header.index(t_column), header.index(x_column)
    except ValueError:
        raise DataError(f"header {header} lacks columns {t_column!r} and {x_column!r}", 1) from None
    times, values = [], []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) <= max(ti, xi):
            raise DataError(f"expected {len(header)} columns, got {len(row)}", line)
        t = _parse_float(row[ti], t_column, line)
        x = _parse_float(row[xi], x_column, line)
        if times and t == times[-1]:
            raise DataError(f"duplicate time {t!r}", line)
        if times and t < times[-1]:
            raise DataError(f"time {t!r} is smaller than the previous {times[-1]!r}", line)
        times.append(t)
        values.append(x)
    if len(times) < 2:
        raise DataError(f"need at least two observations, found {len(times)}")
    return TimeSeries(times, values)


def ingest_csv(path, t_column="t", x_column="x", name=None) -> Dataset:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            series = read_series(fh, t_column, x_column)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    return Dataset(name or path.stem, series, f"read from {path}")


def bundled_dataset(name: str) -> Dataset:
    if name not in BUNDLED:
        raise ConfigError(f"no bundled dataset {name!r}; choose from {sorted(BUNDLED)}")
    text = resources.files("tvude").joinpath("data", f"{name}.csv").read_text(encoding="utf-8")
    return Dataset(name, read_series(io.StringIO(text)), BUNDLED[name])


def format_float(v: float) -> str:
    return repr(float(v))


def write_series_csv(series: TimeSeries, path) -> Path:
    """Write ``t,x`` rows with round-trip float formatting."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x"])
        for t, x in zip(series.times, series.values):
            w.writerow([format_float(t), format_float(x)])
    return path


@dataclass(frozen=True)
class FitAssignment:
    """Regression family for one parameter component.

    ``constant`` is the logistic numerator; the string ``"first"`` takes the
    first window estimate of that component.
    """

    kind: Kind
    constant: float | str | None = None
    gauss_newton: GaussNewtonConfig = field(default_factory=GaussNewtonConfig)

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", Kind(self.kind))
        except ValueError:
            raise ConfigError(f"unknown regression family {self.kind!r}") from None
        if self.kind in (Kind.LOGISTIC_GROWTH, Kind.LOGISTIC_DECAY):
            if self.constant is None:
                object.__setattr__(self, "constant", "first")
            elif self.constant != "first":
                object.__setattr__(self, "constant", float(self.constant))
        elif self.constant is not None:
            raise ConfigError(f"{self.kind.value} takes no constant")

    def family_for(self, values) -> RegressionFamily:
        if self.constant is None:
            return RegressionFamily(self.kind)
        c = float(values[0]) if self.constant == "first" else self.constant
        return RegressionFamily(self.kind, constant=c)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.constant is not None:
            out["constant"] = self.constant
        out["gauss_newton"] = self.gauss_newton.to_dict()
        return out


@dataclass(frozen=True)
class PipelineConfig:
    model: ModelSpec
    window: WindowConfig
    mu_fits: tuple
    sigma_fits: tuple
    output_format: str = "csv"
    fail_soft: bool = False
    max_workers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mu_fits", tuple(self.mu_fits))
        object.__setattr__(self, "sigma_fits", tuple(self.sigma_fits))
        if len(self.mu_fits) != self.model.drift_arity:
            raise ConfigError(f"{len(self.mu_fits)} mu fits for {self.model.drift_arity} drift parameters")
        if len(self.sigma_fits) != self.model.diffusion_arity:
            raise ConfigError(
                f"{len(self.sigma_fits)} sigma fits for {self.model.diffusion_arity} diffusion parameters"
            )
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"output format must be csv or json, got {self.output_format!r}")

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "window": {"n": self.window.n, "stride": self.window.stride, "anchor": self.window.anchor},
            "mu_fits": [a.to_dict() for a in self.mu_fits],
            "sigma_fits": [a.to_dict() for a in self.sigma_fits],
            "fail_soft": self.fail_soft,
        }


def alcohol_config() -> PipelineConfig:
    gn = GaussNewtonConfig(damping=True)
    return PipelineConfig(
        model=ModelSpec.scaled_affine(0.7, 0.2),
        window=WindowConfig(10),
        mu_fits=[FitAssignment(Kind.GAUSSIAN, gauss_newton=gn)],
        sigma_fits=[FitAssignment(Kind.GAUSSIAN, gauss_newton=gn)],
    )


def covid_config() -> PipelineConfig:
    return PipelineConfig(
        model=ModelSpec.multiplicative(),
        window=WindowConfig(10),
        mu_fits=[FitAssignment(Kind.LOGISTIC_DECAY, "first")],
        sigma_fits=[FitAssignment(Kind.LOGISTIC_DECAY, "first")],
    )


PRESETS = {"alcohol": alcohol_config, "covid": covid_config}


@dataclass
class RunReport:
    dataset: Dataset
    config: PipelineConfig
    estimates: list
    mu_fits: list
    sigma_fits: list
    equation: str
    failures: list = field(default_factory=list)
    curve_times: np.ndarray | None = None

    def scatter(self, slot: str, k: int) -> np.ndarray:
        """``(t_m, estimate)`` pairs of component ``k`` of ``"mu"``/``"sigma"``."""
        return np.array([(e.anchor_time, getattr(e, slot)[k]) for e in self.estimates])

    def curve(self, slot: str, k: int) -> np.ndarray:
        fitted = (self.mu_fits if slot == "mu" else self.sigma_fits)[k]
        return np.column_stack([self.curve_times, fitted.evaluate(self.curve_times)])

    @property
    def mu_trajectory(self) -> ParamTrajectory:
        return ParamTrajectory.fitted(self.mu_fits)

    @property
    def sigma_trajectory(self) -> ParamTrajectory:
        return ParamTrajectory.fitted(self.sigma_fits)


def _fit_components(slot, assignments, estimates):
    fits = []
    for k, assignment in enumerate(assignments):
        pts = np.array([(e.anchor_time, getattr(e, slot)[k]) for e in estimates])
        label = f"{slot}_{k + 1}"
        if len(pts) == 0:
            raise FitError(f"{label}: no window estimates to fit")
        family = assignment.family_for(pts[:, 1])
        try:
            fitted = fit(family, pts, assignment.gauss_newton)
        except FitError as exc:
            raise FitError(f"{label} {family.kind.value} fit: {exc}") from exc
        log.info("%s: %s beta=%s R2=%.4f", label, family.kind.value, fitted.beta, fitted.r_squared)
        fits.append(fitted)
    return fits


def run_estimation(cfg: PipelineConfig, ds: Dataset) -> RunReport:
    """Window estimates, one regression per parameter component, rendered model."""
    failures: list[WindowFailure] = []
    estimates = sliding_estimates(cfg.model, ds.series, cfg.window, fail_soft=cfg.fail_soft,
                                  failures=failures, max_workers=cfg.max_workers)
    mu_fits = _fit_components("mu", cfg.mu_fits, estimates)
    sigma_fits = _fit_components("sigma", cfg.sigma_fits, estimates)
    t = ds.series.times
    return RunReport(
        dataset=ds,
        config=cfg,
        estimates=estimates,
        mu_fits=mu_fits,
        sigma_fits=sigma_fits,
        equation=render_equation(cfg.model, mu_fits, sigma_fits),
        failures=failures,
        curve_times=np.linspace(t[0], t[-1], CURVE_SAMPLES),
    )


def _num(v: float) -> str:
    return f"{v:.5g}"


def _expr(fitted: RegressionFit, scale: float = 1.0) -> str:
    """Readable formula of a fit, with ``scale`` folded into its amplitude."""
    fam = fitted.family
    b = fitted.beta
    k = fam.kind
    if k is Kind.LINEAR:
        s = f"{_num(scale * b[0])} + {_num(scale * b[1])}*t"
    elif k is Kind.EXPONENTIAL:
        s = f"{_num(scale * b[0])}*exp(-{_num(b[1])}*t)"
    elif k is Kind.GAUSSIAN:
        s = f"{_num(scale * b[0])}*exp(-((t - {_num(b[1])})/{_num(b[2])})^2)"
    else:
        c = b[2] if fam.free_constant else fam.constant
        inner = f"-{_num(b[1])}*t" if k is Kind.LOGISTIC_GROWTH else f"{_num(b[1])}*t"
        s = f"{_num(scale * c)}/(1 + {_num(b[0])}*exp({inner}))"
    return s.replace("+ -", "- ").replace("- -", "+ ").replace("--", "")


def render_equation(model: ModelSpec, mu_fits, sigma_fits) -> str:
    fam = model.family
    if fam is Family.MULTIPLICATIVE:
        drift = f"({_expr(mu_fits[0])})*X_t"
        diff = f"({_expr(sigma_fits[0])})*X_t"
    elif fam is Family.SCALED_AFFINE:
        k0, k1 = model.drift_constants["k0"], model.drift_constants["k1"]
        drift = f"({_expr(mu_fits[0], k0)} - {_num(k1)}*X_t)"
        diff = f"({_expr(sigma_fits[0])})"
    else:
        drift = f"(({_expr(mu_fits[0])}) + ({_expr(mu_fits[1])})*X_t)"
        if fam is Family.AFFINE_DRIFT_SPLIT_DIFF:
            diff = f"(({_expr(sigma_fits[0])}) + ({_expr(sigma_fits[1])}))*X_t"
        else:
            diff = f"({_expr(sigma_fits[0])})"
    return f"dX_t = {drift} dt + {diff} dC_t".replace("- -", "+ ")


def estimate_columns(model: ModelSpec) -> list[str]:
    return (["m", "t_m"]
            + [f"mu_{k + 1}" for k in range(model.drift_arity)]
            + [f"sigma_{k + 1}" for k in range(model.diffusion_arity)]
            + ["rss", "clamped"])


def _estimate_row(e: WindowEstimate):
    return [e.window_index, e.anchor_time, *e.mu, *e.sigma, e.rss, e.clamped]


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(c) if isinstance(c, float) else
                        str(c).lower() if isinstance(c, bool) else c for c in row])


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def emit_report(report: RunReport, out_dir, fmt: str | None = None) -> list[Path]:
    """Write the estimate table, fits, rendered model and plot data.

    Files: ``estimates.csv`` (or ``estimates.json``), ``fits.json``,
    ``equation.txt``, ``scatter_<param>.csv`` and ``curve_<param>.csv`` for
    every parameter component, and ``skipped.csv`` when windows were skipped.
    """
    if not report.estimates:
        raise DataError("report has no window estimates; nothing to emit")
    fmt = fmt or report.config.output_format
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output format must be csv or json, got {fmt!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    model = report.config.model
    written = []

    cols = estimate_columns(model)
    rows = [_estimate_row(e) for e in report.estimates]
    if fmt == "csv":
        path = out / "estimates.csv"
        _write_csv(path, cols, rows)
    else:
        path = out / "estimates.json"
        _write_json(path, [dict(zip(cols, r)) for r in rows])
    written.append(path)

    fits = {
        "dataset": report.dataset.name,
        "config": report.config.to_dict(),
        "mu": [f.to_dict() for f in report.mu_fits],
        "sigma": [f.to_dict() for f in report.sigma_fits],
        "equation": report.equation,
    }
    if model.family is Family.SCALED_AFFINE:
        fits["drift_constants"] = dict(sorted(model.drift_constants.items()))
    path = out / "fits.json"
    _write_json(path, fits)
    written.append(path)

    path = out / "equation.txt"
    path.write_text(report.equation + "\n", encoding="utf-8")
    written.append(path)

    for slot, arity in (("mu", model.drift_arity), ("sigma", model.diffusion_arity)):
        for k in range(arity):
            name = f"{slot}_{k + 1}"
            path = out / f"scatter_{name}.csv"
            _write_csv(path, ["t_m", name], [[float(a), float(b)] for a, b in report.scatter(slot, k)])
            written.append(path)
            path = out / f"curve_{name}.csv"
            _write_csv(path, ["t", name], [[float(a), float(b)] for a, b in report.curve(slot, k)])
            written.append(path)

    if report.failures:
        path = out / "skipped.csv"
        _write_csv(path, ["m", "t_m", "error"],
                   [[f.window_index, f.anchor_time, f.error] for f in report.failures])
        written.append(path)
    return written


def simulate_command(model: ModelSpec, mu, sigma, x0: float, grid: TimeGrid, seed=None,
                     alphas=None, path=None, name="simulated") -> Dataset:
    """Euler-simulate a series and optionally write it in ingest format."""
    series = euler_simulate(model, mu, sigma, x0, grid, alphas=alphas, seed=seed)
    if path is not None:
        write_series_csv(series, path)
    return Dataset(name, series, f"Euler simulation, model={model.family.value}, seed={seed}")
