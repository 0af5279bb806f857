"""Sliding-window least-squares estimation of time-varying parameters.

Within window ``m`` (observations ``m .. m+n-1``) the parameters are frozen
and the Euler residuals

    r_i = x_{i+1} - x_i - f(t_i, x_i; mu) dt_i

are treated as noise.  The drift estimate minimizes ``sum r_i^2``; because
every supported drift is linear in ``mu`` this is an ordinary linear least
squares problem with rows ``phi(t_i, x_i) dt_i``.  The diffusion estimate
then matches the second moment of the Liu noise term,
``E[(g dC)^2] = g^2 dt^2``, to the achieved residual sum of squares:

    scale(sigma)^2 = rss / sum g0(t_i, x_i)^2 dt_i^2.

Window indices ``m`` reported in :class:`WindowEstimate` are 1-based, like
the estimate tables they reproduce; ``start`` arguments are 0-based offsets
into the series.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, DegenerateWindowError, SingularWindowError, WindowError
from .model import Family, ModelSpec, diffusion_shape, drift_basis
from .uncertainty import TimeSeries

log = logging.getLogger(__name__)

# |M| below this is attributed to rounding and silently clamped.
CLAMP_TOLERANCE = 1e-12


@dataclass(frozen=True)
class WindowConfig:
    n: int
    stride: int = 1
    anchor: str = "start"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ConfigError(f"window length must be an integer >= 3, got {self.n!r}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ConfigError(f"stride must be a positive integer, got {self.stride!r}")
        if self.anchor not in ("start", "center"):
            raise ConfigError(f"anchor must be 'start' or 'center', got {self.anchor!r}")


@dataclass(frozen=True)
class WindowEstimate:
    window_index: int
    anchor_time: float
    mu: tuple
    sigma: tuple
    rss: float
    clamped: bool = False


@dataclass(frozen=True)
class WindowFailure:
    window_index: int
    anchor_time: float
    error: str


def _window(data: TimeSeries, start: int, n: int):
    N = len(data)
    if start < 0 or start + n > N:
        raise ConfigError(f"window [{start}, {start + n - 1}] outside series of length {N}")
    t = data.times[start:start + n]
    x = data.values[start:start + n]
    return t[:-1], x[:-1], np.diff(t), np.diff(x)


def _design(model, data, start, n):
    t, x, dt, dx = _window(data, start, n)
    phi, offset = drift_basis(model, t, x)
    A = phi * dt[:, None]
    y = dx - offset * dt
    return A, y, dt, (t, x)


def drift_objective(model: ModelSpec, data: TimeSeries, start: int, n: int, mu) -> float:
    """Sum of squared Euler residuals over the window for drift parameters ``mu``."""
    A, y, _, _ = _design(model, data, start, n)
    r = y - A @ np.asarray(mu, dtype=float).reshape(-1)
    return float(r @ r)


def estimate_drift_window(model: ModelSpec, data: TimeSeries, start: int, n: int):
    """Least-squares drift estimate for one window.

    Returns ``(mu, rss)``.  The normal equations are solved with an
    LU factorization with partial pivoting; a rank-deficient design (for
    example a constant state under an affine drift) raises
    :class:`SingularWindowError`.
    """
    A, y, _, _ = _design(model, data, start, n)
    m = start + 1
    p = A.shape[1]
    if np.linalg.matrix_rank(A) < p:
        raise SingularWindowError("drift regressors are rank deficient", m)
    G = A.T @ A
    b = A.T @ y
    if p == 1:
        mu = b / G[0]
    else:
        lu, piv = scipy.linalg.lu_factor(G)
        mu = scipy.linalg.lu_solve((lu, piv), b)
    r = y - A @ mu
    return mu, float(r @ r)


def multiplicative_ratio_estimate(data: TimeSeries, start: int, n: int) -> float:
    """Closed-form drift of ``dX = mu X dt + sigma X dC``.

    ``mu = sum(dx * dt * x) / sum(x^2 dt^2)``, written out directly rather
    than through the generic design matrix.
    """
    _, x, dt, dx = _window(data, start, n)
    return float(np.sum(dx * dt * x) / np.sum(x**2 * dt**2))


def estimate_diffusion_window(model: ModelSpec, data: TimeSeries, start: int, n: int, mu):
    """Moment-matching diffusion estimate for one window.

    Returns ``(sigma, clamped)``.  For the split family the total scale
    ``sqrt(M)`` is distributed with the model's split weights.
    """
    A, y, dt, (t, x) = _design(model, data, start, n)
    m = start + 1
    r = y - A @ np.asarray(mu, dtype=float).reshape(-1)
    rss = float(r @ r)
    g0 = diffusion_shape(model, t, x)
    denom = float(np.sum((g0 * dt) ** 2))
    if denom == 0.0:
        raise DegenerateWindowError("diffusion shape vanishes on the whole window", m)
    M = rss / denom
    clamped = M < 0
    if clamped:
        if M < -CLAMP_TOLERANCE:
            log.warning("window m=%d: moment equation gave M=%g < 0", m, M)
        M = 0.0
    root = math.sqrt(M)
    if model.family is Family.AFFINE_DRIFT_SPLIT_DIFF:
        sigma = np.array([w * root for w in model.split_weights])
    else:
        sigma = np.array([root])
    return sigma, clamped


def estimate_window(model: ModelSpec, data: TimeSeries, start: int, n: int,
                    anchor: str = "start") -> WindowEstimate:
    if n < model.drift_arity + 2:
        raise ConfigError(
            f"window length {n} too short for {model.drift_arity} drift parameters "
            f"(need >= {model.drift_arity + 2})"
        )
    mu, rss = estimate_drift_window(model, data, start, n)
    if not np.all(np.isfinite(mu)):
        raise SingularWindowError("drift estimate is not finite", start + 1)
    sigma, clamped = estimate_diffusion_window(model, data, start, n, mu)
    times = data.times
    anchor_time = times[start] if anchor == "start" else 0.5 * (times[start] + times[start + n - 1])
    return WindowEstimate(
        window_index=start + 1,
        anchor_time=float(anchor_time),
        mu=tuple(float(v) for v in mu),
        sigma=tuple(float(v) for v in sigma),
        rss=rss,
        clamped=bool(clamped),
    )


def sliding_estimates(model: ModelSpec, data: TimeSeries, cfg: WindowConfig, *,
                      fail_soft: bool = False, failures: list | None = None,
                      max_workers: int | None = None) -> list[WindowEstimate]:
    """Estimate every window ``m = 1, 1 + stride, ...`` up to ``N - n + 1``.

    With ``fail_soft`` a failing window is logged, recorded in ``failures``
    (if given) as a :class:`WindowFailure`, and left out of the result.
    Windows are independent, so ``max_workers > 1`` spreads them over a thread
    pool; the output is identical to the sequential run.
    """
    N = len(data)
    if cfg.n > N:
        raise ConfigError(f"window length {cfg.n} exceeds series length {N}")
    starts = range(0, N - cfg.n + 1, cfg.stride)

    def one(start):
        try:
            return estimate_window(model, data, start, cfg.n, cfg.anchor)
        except WindowError as exc:
            if not fail_soft:
                raise
            return WindowFailure(start + 1, float(data.times[start]), str(exc))

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(one, starts))
    else:
        results = [one(s) for s in starts]

    out = []
    for res in results:
        if isinstance(res, WindowFailure):
            log.warning("skipping %s", res.error)
            if failures is not None:
                failures.append(res)
        else:
            out.append(res)
    return out
