"""Regression of window estimates on time.

Families (``beta`` indexed from 0):

==================  ======================================
linear              b0 + b1 t
exponential         b0 exp(-b1 t)
logistic-growth     K / (1 + b0 exp(-b1 t))
logistic-decay      A / (1 + b0 exp(b1 t))
gaussian            b0 exp(-((t - b1) / b2)^2)
==================  ======================================

``K`` and ``A`` are fixed constants by default.  With ``free_constant=True``
they become a trailing third coefficient.

Nonlinear families are fitted by Gauss-Newton: at each iterate the normal
equations ``(J^T J) delta = J^T r`` are solved with analytic partial
derivatives ``J``, and iteration stops once ``max |delta| < epsilon``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import ConfigError, DivergenceError, FitError, RankError

log = logging.getLogger(__name__)

# exp() arguments are clipped here; exp(709) is still finite in float64.
_EXP_LIMIT = 709.0

# Relative SSE change that float64 arithmetic cannot resolve.
_ROUNDOFF = 1e4 * np.finfo(float).eps


class Kind(str, Enum):
    LINEAR = "linear"
    EXPONENTIAL = "exponential"
    LOGISTIC_GROWTH = "logistic-growth"
    LOGISTIC_DECAY = "logistic-decay"
    GAUSSIAN = "gaussian"


_BASE_COUNT = {
    Kind.LINEAR: 2,
    Kind.EXPONENTIAL: 2,
    Kind.LOGISTIC_GROWTH: 2,
    Kind.LOGISTIC_DECAY: 2,
    Kind.GAUSSIAN: 3,
}

_LOGISTIC = (Kind.LOGISTIC_GROWTH, Kind.LOGISTIC_DECAY)


@dataclass(frozen=True)
class RegressionFamily:
    kind: Kind
    constant: float | None = None
    free_constant: bool = False

    def __post_init__(self):
        try:
            kind = Kind(self.kind)
        except ValueError:
            raise ConfigError(f"unknown regression family {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if kind in _LOGISTIC:
            if self.constant is None and not self.free_constant:
                raise ConfigError(f"{kind.value} needs its numerator constant")
            if self.constant is not None and not math.isfinite(self.constant):
                raise ConfigError("numerator constant must be finite")
        elif self.constant is not None or self.free_constant:
            raise ConfigError(f"{kind.value} takes no numerator constant")

    @property
    def param_count(self) -> int:
        return _BASE_COUNT[self.kind] + int(self.free_constant)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.constant is not None:
            out["constant"] = self.constant
        if self.free_constant:
            out["free_constant"] = True
        return out


@dataclass(frozen=True)
class GaussNewtonConfig:
    beta_init: tuple | None = None
    epsilon: float = 1e-8
    max_iter: int = 100
    damping: bool = False
    max_halvings: int = 20

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError("max_iter must be a positive integer")

    def to_dict(self) -> dict:
        out = {"epsilon": self.epsilon, "max_iter": self.max_iter, "damping": self.damping}
        if self.beta_init is not None:
            out["beta_init"] = list(self.beta_init)
        return out


@dataclass(frozen=True)
class RegressionFit:
    family: RegressionFamily
    beta: tuple
    r_squared: float
    r_squared_residual: float
    iterations: int = 0
    converged: bool = True
    final_max_step: float = 0.0
    sse: float = field(default=float("nan"))

    def evaluate(self, t):
        return eval_family(self.family, self.beta, t)

    def to_dict(self) -> dict:
        return {
            "family": self.family.to_dict(),
            "beta": list(self.beta),
            "r_squared": self.r_squared,
            "r_squared_residual": self.r_squared_residual,
            "converged": self.converged,
            "iterations": self.iterations,
            "final_max_step": self.final_max_step,
            "sse": self.sse,
        }


def _exp(z):
    z = np.asarray(z, dtype=float)
    return np.exp(np.clip(z, -_EXP_LIMIT, _EXP_LIMIT)), bool(np.any(np.abs(z) > _EXP_LIMIT))


def _unpack(family, beta):
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.size != family.param_count:
        raise ConfigError(f"{family.kind.value} takes {family.param_count} coefficients, got {beta.size}")
    const = beta[2] if family.free_constant else family.constant
    return beta, const


def evaluate(family: RegressionFamily, beta, t):
    """Evaluate the family, returning ``(values, saturated)``.

    ``saturated`` is true when an exponent had to be clipped to stay finite.
    Overflowing products come back as ``inf`` without a warning; the fitter
    turns them into :class:`DivergenceError`.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _evaluate(family, beta, t)


def _evaluate(family, beta, t):
    beta, const = _unpack(family, beta)
    t = np.asarray(t, dtype=float)
    k = family.kind
    if k is Kind.LINEAR:
        return beta[0] + beta[1] * t, False
    if k is Kind.EXPONENTIAL:
        e, sat = _exp(-beta[1] * t)
        return beta[0] * e, sat
    if k is Kind.LOGISTIC_GROWTH:
        e, sat = _exp(-beta[1] * t)
        return const / (1.0 + beta[0] * e), sat
    if k is Kind.LOGISTIC_DECAY:
        e, sat = _exp(beta[1] * t)
        return const / (1.0 + beta[0] * e), sat
    e, sat = _exp(-(((t - beta[1]) / beta[2]) ** 2))
    return beta[0] * e, sat


def eval_family(family: RegressionFamily, beta, t):
    values, _ = evaluate(family, beta, t)
    return float(values) if np.ndim(values) == 0 else values


def jacobian(family: RegressionFamily, beta, t) -> np.ndarray:
    """Analytic partial derivatives, shape ``(len(t), param_count)``."""
    beta, const = _unpack(family, beta)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = family.kind
    if k is Kind.LINEAR:
        return np.column_stack([np.ones_like(t), t])
    if k is Kind.EXPONENTIAL:
        e, _ = _exp(-beta[1] * t)
        return np.column_stack([e, -beta[0] * t * e])
    if k is Kind.GAUSSIAN:
        b0, b1, b2 = beta
        u = (t - b1) / b2
        e, _ = _exp(-(u**2))
        return np.column_stack([e, b0 * e * 2 * u / b2, b0 * e * 2 * u**2 / b2])
    sign = 1.0 if k is Kind.LOGISTIC_DECAY else -1.0
    e, _ = _exp(sign * beta[1] * t)
    denom = 1.0 + beta[0] * e
    cols = [-const * e / denom**2, -const * beta[0] * sign * t * e / denom**2]
    if family.free_constant:
        cols.append(1.0 / denom)
    return np.column_stack(cols)


def finite_difference_jacobian(family: RegressionFamily, beta, t, h: float = 1e-6) -> np.ndarray:
    """Central-difference approximation of :func:`jacobian`."""
    if not h > 0:
        raise ConfigError("step h must be positive")
    beta = np.asarray(beta, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    cols = []
    for i in range(beta.size):
        step = np.zeros_like(beta)
        step[i] = h
        hi, _ = evaluate(family, beta + step, t)
        lo, _ = evaluate(family, beta - step, t)
        cols.append((hi - lo) / (2 * h))
    return np.column_stack(cols)


def _as_points(points):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ConfigError("points must be a sequence of (t, y) pairs")
    if not np.all(np.isfinite(arr)):
        raise FitError("points contain non-finite values")
    return arr[:, 0], arr[:, 1]


def _sst(y):
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise FitError("R^2 is undefined for constant observations (SST = 0)")
    return sst


def r_squared(points, family: RegressionFamily, beta) -> float:
    """Coefficient of determination as ``SSR / SST``.

    ``SSR = sum (yhat - ybar)^2`` and ``SST = sum (y - ybar)^2``.  For
    nonlinear fits this ratio is not bounded by 1; see
    :func:`residual_r_squared` for the ``1 - SSE/SST`` variant.
    """
    t, y = _as_points(points)
    yhat = eval_family(family, beta, t)
    return float(np.sum((yhat - y.mean()) ** 2)) / _sst(y)


def residual_r_squared(points, family: RegressionFamily, beta) -> float:
    t, y = _as_points(points)
    yhat = eval_family(family, beta, t)
    return 1.0 - float(np.sum((y - yhat) ** 2)) / _sst(y)


def _finish(family, t, y, beta, **info):
    pts = np.column_stack([t, y])
    yhat = eval_family(family, beta, t)
    return RegressionFit(
        family=family,
        beta=tuple(float(b) for b in beta),
        r_squared=r_squared(pts, family, beta),
        r_squared_residual=residual_r_squared(pts, family, beta),
        sse=float(np.sum((y - yhat) ** 2)),
        **info,
    )


def _ols(t, y):
    n = t.size
    denom = n * np.sum(t * t) - np.sum(t) ** 2
    if np.ptp(t) == 0 or denom == 0:
        raise FitError("linear regression needs at least two distinct t values")
    slope = (n * np.sum(t * y) - np.sum(t) * np.sum(y)) / denom
    return np.array([y.mean() - slope * t.mean(), slope])


def fit_linear_ols(points) -> RegressionFit:
    """Closed-form least-squares line ``y = b0 + b1 t``."""
    t, y = _as_points(points)
    if t.size < 2:
        raise FitError("linear regression needs at least two points")
    return _finish(RegressionFamily(Kind.LINEAR), t, y, _ols(t, y))


def _linearized(t, v, mask):
    """OLS line through the points where ``mask`` holds, or ``None``."""
    if mask.sum() < 2 or np.ptp(t[mask]) == 0:
        return None
    return _ols(t[mask], v[mask])


def default_init(family: RegressionFamily, t, y) -> np.ndarray:
    """Starting coefficients derived from the data alone.

    * linear: the OLS solution.
    * exponential: OLS of ``ln y`` on ``t`` over positive ``y``.
    * logistic: OLS of ``ln(C / y - 1)`` on ``t`` where ``C / y > 1``.
    * gaussian: peak height, peak location and the half width at half
      maximum converted to the ``b2`` scale (``hwhm / sqrt(ln 2)``).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    k = family.kind
    if k is Kind.LINEAR:
        return _ols(t, y)
    if k is Kind.EXPONENTIAL:
        pos = y > 0
        line = _linearized(t, np.log(np.where(pos, y, 1.0)), pos)
        if line is None:
            return np.array([float(np.max(np.abs(y))) or 1.0, 0.0])
        return np.array([math.exp(line[0]), -line[1]])
    if k is Kind.GAUSSIAN:
        i = int(np.argmax(y))
        peak, centre = float(y[i]), float(t[i])
        half = y < 0.5 * peak
        widths = np.abs(t[half] - centre)
        hwhm = float(widths.min()) if widths.size else 0.5 * float(np.ptp(t))
        return np.array([peak, centre, max(hwhm, 1e-12) / math.sqrt(math.log(2.0))])
    const = family.constant if family.constant is not None else 1.01 * float(np.max(y))
    ratio = np.divide(const, y, out=np.full_like(y, np.nan), where=y != 0) - 1.0
    ok = np.isfinite(ratio) & (ratio > 0)
    line = _linearized(t, np.log(np.where(ok, ratio, 1.0)), ok)
    if line is None:
        b0, b1 = 1.0, 0.0
    else:
        b0 = math.exp(line[0])
        b1 = line[1] if k is Kind.LOGISTIC_DECAY else -line[1]
    init = [b0, b1]
    if family.free_constant:
        init.append(const)
    return np.array(init)


def _solve_normal(J, r, iteration):
    A = J.T @ J
    B = J.T @ r
    if np.linalg.matrix_rank(J) < J.shape[1]:
        raise RankError("normal matrix J^T J is singular", iteration)
    try:
        return scipy.linalg.solve(A, B, assume_a="sym")
    except scipy.linalg.LinAlgError as exc:
        raise RankError(f"normal matrix J^T J is singular ({exc})", iteration) from None


def gauss_newton_fit(family: RegressionFamily, points, cfg: GaussNewtonConfig | None = None
                     ) -> RegressionFit:
    """Fit ``family`` to ``points`` by Gauss-Newton iteration.

    Each iteration solves ``A delta = B`` with ``A = J^T J`` and
    ``B = J^T (y - model)``, then sets ``beta += delta``.  The loop stops once
    ``max |delta| < epsilon`` (converged) or after ``max_iter`` iterations.

    With ``cfg.damping`` the step is halved (up to ``max_halvings`` times)
    until the sum of squared residuals does not increase; if no such step
    exists the fit stops unconverged at the last accepted iterate.
    """
    cfg = cfg or GaussNewtonConfig()
    t, y = _as_points(points)
    if t.size < family.param_count + 1:
        raise FitError(
            f"{family.kind.value} fit needs at least {family.param_count + 1} points, got {t.size}"
        )
    if cfg.beta_init is None:
        beta = default_init(family, t, y)
    else:
        beta = _unpack(family, cfg.beta_init)[0].copy()
    if not np.all(np.isfinite(beta)):
        raise FitError(f"initial coefficients are not finite: {beta}")

    def residual(b, iteration):
        values, _ = evaluate(family, b, t)
        r = y - values
        if not np.all(np.isfinite(r)):
            raise DivergenceError("residuals became non-finite", iteration)
        return r

    r = residual(beta, 0)
    sse = float(r @ r)
    converged = False
    max_step = float("inf")
    iteration = 0
    while iteration < cfg.max_iter:
        iteration += 1
        J = jacobian(family, beta, t)
        delta = _solve_normal(J, r, iteration)
        max_step = float(np.max(np.abs(delta)))
        if not math.isfinite(max_step):
            raise DivergenceError("Gauss-Newton step is not finite", iteration)
        if cfg.damping:
            step = delta
            for _ in range(cfg.max_halvings + 1):
                trial = beta + step
                r_trial = residual(trial, iteration)
                sse_trial = float(r_trial @ r_trial)
                if sse_trial <= sse:
                    break
                step = 0.5 * step
            else:
                # No step lowers the SSE: either max|delta| already meets the
                # threshold or the predicted decrease is below rounding noise.
                predicted = float(np.sum((J @ delta) ** 2))
                if max_step < cfg.epsilon or predicted <= _ROUNDOFF * max(sse, 1e-300):
                    converged = True
                else:
                    log.info("%s fit: no descent step at iteration %d", family.kind.value, iteration)
                break
            beta, r, sse = trial, r_trial, sse_trial
        else:
            beta = beta + delta
            r = residual(beta, iteration)
            sse = float(r @ r)
        if max_step < cfg.epsilon:
            converged = True
            break

    if not converged:
        log.warning("%s fit did not converge (max step %.3g after %d iterations)",
                    family.kind.value, max_step, iteration)
    return _finish(family, t, y, beta, iterations=iteration, converged=converged,
                   final_max_step=max_step)


def fit(family: RegressionFamily, points, cfg: GaussNewtonConfig | None = None) -> RegressionFit:
    """Closed form for the linear family, Gauss-Newton otherwise."""
    if family.kind is Kind.LINEAR and (cfg is None or cfg.beta_init is None):
        return fit_linear_ols(points)
    return gauss_newton_fit(family, points, cfg)

