"""Supported uncertain differential equation families.

Every family has a drift that is linear in its parameter vector,

    f(t, x; mu) = phi(t, x) . mu + offset(t, x),

and a diffusion that factors as ``g(t, x; sigma) = scale(sigma) * g0(t, x)``
with ``g0`` either 1 or ``x``.  Those two decompositions are all the window
estimator needs.

=====================  ===========================================  =====
family                 equation                                     arity
=====================  ===========================================  =====
multiplicative         dX = mu X dt + sigma X dC                    (1, 1)
affine                 dX = (mu1 + mu2 X) dt + sigma dC             (2, 1)
affine-split           dX = (mu1 + mu2 X) dt + (s1 + s2) X dC       (2, 2)
scaled-affine          dX = (k0 mu - k1 X) dt + sigma dC            (1, 1)
=====================  ===========================================  =====
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError


class Family(str, Enum):
    MULTIPLICATIVE = "multiplicative"
    AFFINE_DRIFT_CONST_DIFF = "affine"
    AFFINE_DRIFT_SPLIT_DIFF = "affine-split"
    SCALED_AFFINE = "scaled-affine"


ARITIES = {
    Family.MULTIPLICATIVE: (1, 1),
    Family.AFFINE_DRIFT_CONST_DIFF: (2, 1),
    Family.AFFINE_DRIFT_SPLIT_DIFF: (2, 2),
    Family.SCALED_AFFINE: (1, 1),
}

DEFAULT_K0 = 0.7
DEFAULT_K1 = 0.2


@dataclass(frozen=True, eq=True)
class ModelSpec:
    family: Family
    drift_constants: dict = field(default_factory=dict)
    split_weights: tuple | None = None

    def __post_init__(self):
        try:
            family = Family(self.family)
        except ValueError:
            raise ConfigError(f"unknown model family {self.family!r}") from None
        object.__setattr__(self, "family", family)

        consts = {k: float(v) for k, v in dict(self.drift_constants).items()}
        if family is Family.SCALED_AFFINE:
            consts.setdefault("k0", DEFAULT_K0)
            consts.setdefault("k1", DEFAULT_K1)
        elif consts:
            raise ConfigError(f"family {family.value} takes no drift constants")
        if not all(math.isfinite(v) for v in consts.values()):
            raise ConfigError("drift constants must be finite")
        object.__setattr__(self, "drift_constants", consts)

        weights = self.split_weights
        if family is Family.AFFINE_DRIFT_SPLIT_DIFF:
            weights = (0.5, 0.5) if weights is None else tuple(float(w) for w in weights)
            if len(weights) != 2:
                raise ConfigError("split weights need one entry per diffusion parameter")
            if any(not 0.0 <= w <= 1.0 for w in weights) or abs(sum(weights) - 1.0) > 1e-12:
                raise ConfigError(f"split weights must lie in [0, 1] and sum to 1, got {weights}")
        elif weights is not None:
            raise ConfigError("split weights only apply to the affine-split family")
        object.__setattr__(self, "split_weights", weights)

    __hash__ = None

    @classmethod
    def multiplicative(cls):
        return cls(Family.MULTIPLICATIVE)

    @classmethod
    def affine(cls):
        return cls(Family.AFFINE_DRIFT_CONST_DIFF)

    @classmethod
    def affine_split(cls, weights=(0.5, 0.5)):
        return cls(Family.AFFINE_DRIFT_SPLIT_DIFF, split_weights=weights)

    @classmethod
    def scaled_affine(cls, k0=DEFAULT_K0, k1=DEFAULT_K1):
        return cls(Family.SCALED_AFFINE, {"k0": k0, "k1": k1})

    @property
    def drift_arity(self) -> int:
        return ARITIES[self.family][0]

    @property
    def diffusion_arity(self) -> int:
        return ARITIES[self.family][1]

    def to_dict(self) -> dict:
        out = {"family": self.family.value}
        if self.drift_constants:
            out["drift_constants"] = dict(sorted(self.drift_constants.items()))
        if self.split_weights is not None:
            out["split_weights"] = list(self.split_weights)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(d["family"], d.get("drift_constants", {}), d.get("split_weights"))


def drift_basis(model: ModelSpec, t, x):
    """Regressors ``phi`` and offset with ``f = phi . mu + offset``.

    Works elementwise on arrays; ``phi`` gets a trailing axis of length
    ``drift_arity``.
    """
    x = np.asarray(x, dtype=float)
    fam = model.family
    if fam is Family.MULTIPLICATIVE:
        phi = x[..., None]
        offset = np.zeros_like(x)
    elif fam in (Family.AFFINE_DRIFT_CONST_DIFF, Family.AFFINE_DRIFT_SPLIT_DIFF):
        phi = np.stack([np.ones_like(x), x], axis=-1)
        offset = np.zeros_like(x)
    else:
        k0, k1 = model.drift_constants["k0"], model.drift_constants["k1"]
        phi = np.full(x.shape + (1,), k0)
        offset = -k1 * x
    return phi, offset


def _check_arity(values, expected, what):
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size != expected:
        raise ConfigError(f"{what} has {v.size} components, model expects {expected}")
    return v


def drift_eval(model: ModelSpec, t, x, mu) -> float:
    mu = _check_arity(mu, model.drift_arity, "mu")
    fam = model.family
    if fam is Family.MULTIPLICATIVE:
        return mu[0] * x
    if fam is Family.SCALED_AFFINE:
        return model.drift_constants["k0"] * mu[0] - model.drift_constants["k1"] * x
    return mu[0] + mu[1] * x


def diffusion_shape(model: ModelSpec, t, x):
    """The state factor ``g0(t, x)``: ``x`` or 1."""
    if model.family in (Family.MULTIPLICATIVE, Family.AFFINE_DRIFT_SPLIT_DIFF):
        return x
    return np.ones_like(x) if isinstance(x, np.ndarray) else 1.0


def diffusion_scale(model: ModelSpec, sigma) -> float:
    sigma = _check_arity(sigma, model.diffusion_arity, "sigma")
    return float(sigma.sum())


def diffusion_eval(model: ModelSpec, t, x, sigma) -> float:
    return diffusion_scale(model, sigma) * diffusion_shape(model, t, x)


class ParamTrajectory:
    """A parameter vector as a function of time.

    Either constant, or one fitted regression per component (anything with an
    ``evaluate(t)`` method, normally :class:`tvude.regression.RegressionFit`).
    """

    __slots__ = ("values", "fits")

    def __init__(self, values=None, fits=None):
        if (values is None) == (fits is None):
            raise ConfigError("give exactly one of constant values or fitted components")
        self.values = None if values is None else tuple(float(v) for v in np.atleast_1d(values))
        self.fits = None if fits is None else tuple(fits)

    @classmethod
    def constant(cls, *values):
        return cls(values=values)

    @classmethod
    def fitted(cls, fits):
        return cls(fits=fits)

    @property
    def arity(self) -> int:
        return len(self.values if self.values is not None else self.fits)

    def __call__(self, t) -> np.ndarray:
        if self.values is not None:
            return np.array(self.values)
        return np.array([float(f.evaluate(t)) for f in self.fits])

    def __repr__(self):
        if self.values is not None:
            return f"ParamTrajectory.constant{self.values}"
        return f"ParamTrajectory.fitted({list(self.fits)!r})"


def as_trajectory(obj, arity: int) -> ParamTrajectory:
    """Coerce numbers, sequences and callables to a :class:`ParamTrajectory`."""
    if isinstance(obj, ParamTrajectory):
        traj = obj
    elif callable(obj):
        traj = _CallableTrajectory(obj, arity)
    else:
        traj = ParamTrajectory(values=obj)
    if traj.arity != arity:
        raise ConfigError(f"trajectory has arity {traj.arity}, model slot needs {arity}")
    return traj


class _CallableTrajectory(ParamTrajectory):
    __slots__ = ("_fn", "_arity")

    def __init__(self, fn, arity):
        self._fn = fn
        self._arity = arity
        self.values = None
        self.fits = None

    @property
    def arity(self):
        return self._arity

    def __call__(self, t):
        return np.atleast_1d(np.asarray(self._fn(t), dtype=float))
