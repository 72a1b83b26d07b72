"""Pathwise sojourn times and cumulative Parisian passage times on grids.

The indicator is evaluated at left endpoints with a strict comparison, so a
grid value exactly at the level does not count as an exceedance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidArgumentError
from .models import ProcessModel, drift_adjust

REGIME_RULE = "regime"


@dataclass(frozen=True)
class SojournProblem:
    """Everything needed to define P{v * int_0^T 1(X(t) - c t > u) dt > x}.

    ``horizon`` may be ``math.inf``; ``scaling`` is an explicit v > 0 or the
    string ``"regime"`` (resolved by :func:`sojourn_lab.asymptotics.resolve_scaling`).
    """

    model: ProcessModel
    c: float
    u: float
    x: float
    horizon: float = math.inf
    scaling: Union[float, str] = REGIME_RULE

    def __post_init__(self):
        if not self.x >= 0:
            raise InvalidArgumentError(f"sojourn threshold x must be >= 0, got {self.x}")
        if math.isnan(self.u):
            raise InvalidArgumentError("level u is NaN")
        if not self.horizon > 0:
            raise InvalidArgumentError(f"horizon must be positive, got {self.horizon}")
        if math.isinf(self.horizon) and not self.c > 0:
            raise InvalidArgumentError("an infinite horizon requires drift c > 0")
        if self.scaling != REGIME_RULE and not (
            isinstance(self.scaling, (int, float)) and self.scaling > 0
        ):
            raise InvalidArgumentError(f"scaling must be a positive number or 'regime', got {self.scaling!r}")

    @property
    def infinite(self):
        return math.isinf(self.horizon)

    def with_(self, **changes):
        fields = dict(self.__dict__)
        fields.update(changes)
        return SojournProblem(**fields)

    def to_dict(self):
        return {
            "model": self.model.label(),
            "c": self.c,
            "u": self.u,
            "x": self.x,
            "T": self.horizon,
            "scaling": self.scaling,
        }


@dataclass(frozen=True)
class PassageSample:
    tau: float
    censored: bool = False

    @property
    def finite(self):
        return math.isfinite(self.tau)


@dataclass(frozen=True)
class PassageRegime:
    """Normalization for passage-time statistics.

    kind ``"infinite"`` uses (tau - u t_u) / A(u); kind ``"finite"`` uses
    sigma_dot(T) / sigma(T)^3 * u^2 (T - tau).
    """

    kind: str
    u: float
    t_u: float = math.nan
    A_u: float = math.nan
    T: float = math.nan
    sigma_T: float = math.nan
    sigma_dot_T: float = math.nan

    def __post_init__(self):
        if self.kind not in ("infinite", "finite"):
            raise InvalidArgumentError(f"unknown passage regime {self.kind!r}")


def _window_slice(path, window):
    times = path.grid.times
    step = path.grid.step
    a, b = (0.0, path.grid.horizon) if window is None else window
    ia, ib = round(a / step), round(b / step)
    if ia < 0 or ib > path.grid.steps or ia > ib:
        raise InvalidArgumentError(f"window [{a}, {b}] lies outside the grid [0, {times[-1]}]")
    return ia, ib


def sojourn_time(path, c, u, window=None):
    """step * #{i in [a, b): X(t_i) - c t_i > u}."""
    ia, ib = _window_slice(path, window)
    y = drift_adjust(path, c)[ia:ib]
    return path.grid.step * int(np.count_nonzero(y > u))


def sojourn_counts(y, levels):
    """Exceedance counts of the left-endpoint values ``y[:-1]`` for each level."""
    body = np.asarray(y)[:-1]
    levels = np.atleast_1d(np.asarray(levels, float))
    return (body[None, :] > levels[:, None]).sum(axis=1)


def needed_count(x, v, step):
    """Smallest integer n with v * (n * step) > x, evaluated in that order."""
    n = max(1, int(math.floor(x / (v * step))) + 1)
    while n > 1 and v * ((n - 1) * step) > x:
        n -= 1
    while not v * (n * step) > x:
        n += 1
    return n


def passage_index(above, x, v, step):
    """Index k of the step whose inclusion makes the running sojourn exceed x, or -1."""
    need = needed_count(x, v, step)
    csum = np.cumsum(above)
    if csum.size == 0 or csum[-1] < need:
        return -1
    return int(np.searchsorted(csum, need))


def first_passage(path, c, u, x, v, horizon):
    """tau_u(x) = inf{t : v int_0^t 1(X(s) - c s > u) ds > x}, to grid resolution.

    tau is reported at the right endpoint of the step during which the running
    scaled sojourn first exceeds x. If it never does on the grid, tau is inf;
    the sample is censored when ``horizon`` extends beyond the simulated grid.
    """
    if not v > 0:
        raise InvalidArgumentError(f"scaling v must be positive, got {v}")
    y = drift_adjust(path, c)
    k = passage_index(y[:-1] > u, x, v, path.grid.step)
    if k >= 0:
        return PassageSample(float(path.grid.times[k + 1]), False)
    truncated = horizon > path.grid.horizon * (1 + 1e-12)
    return PassageSample(math.inf, bool(truncated))


def normalize_passage(tau, regime):
    """Normalized passage statistic; raises for infinite tau (the atom is tracked by the caller)."""
    value = tau.tau if isinstance(tau, PassageSample) else float(tau)
    if not math.isfinite(value):
        raise InvalidArgumentError("passage time is infinite; normalization not applicable")
    if regime.kind == "infinite":
        return (value - regime.u * regime.t_u) / regime.A_u
    return regime.sigma_dot_T / regime.sigma_T**3 * regime.u**2 * (regime.T - value)
