"""Gaussian process families, their covariances, and path simulation.

Every model is a frozen dataclass. Paths are sampled on uniform grids; the
linear trend ``-c t`` is applied separately by :func:`drift_adjust`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import InvalidArgumentError, SimulationFailure
from .functions import PowerLog
from .rng import substream

# relative size of negative circulant eigenvalues tolerated as round-off
_EMBED_TOL = 1e-10
_JITTERS = (1e-12, 1e-11, 1e-10, 1e-9)


@dataclass(frozen=True)
class GridSpec:
    horizon: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise InvalidArgumentError(f"grid horizon must be a positive real, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 2:
            raise InvalidArgumentError(f"grid needs an integer steps >= 2, got {self.steps}")

    @property
    def step(self):
        return self.horizon / self.steps

    @property
    def times(self):
        return np.arange(self.steps + 1) * self.step

    def to_dict(self):
        return {"horizon": self.horizon, "steps": self.steps}


def build_grid(horizon, steps):
    return GridSpec(float(horizon), int(steps))


# ---------------------------------------------------------------------------
# models


class ProcessModel:
    """Common interface. ``sigma2`` is Var X(t) as a function of |t|."""

    stationary_increments = False
    deterministic = False

    def sigma2(self, t):
        raise NotImplementedError

    def _cov(self, s, t):
        s, t = np.asarray(s, float), np.asarray(t, float)
        return 0.5 * (self.sigma2(np.abs(s)) + self.sigma2(np.abs(t)) - self.sigma2(np.abs(t - s)))

    def label(self):
        raise NotImplementedError


@dataclass(frozen=True)
class BrownianDrift(ProcessModel):
    stationary_increments = True

    def sigma2(self, t):
        return np.abs(np.asarray(t, float))

    @property
    def sigma2_descriptor(self):
        return PowerLog(1.0, 1.0)

    def label(self):
        return "brownian"


@dataclass(frozen=True)
class FBm(ProcessModel):
    hurst: float
    stationary_increments = True

    def __post_init__(self):
        if not 0 < self.hurst <= 1:
            raise InvalidArgumentError(f"fBm Hurst index must lie in (0,1], got {self.hurst}")

    def sigma2(self, t):
        return np.abs(np.asarray(t, float)) ** (2 * self.hurst)

    @property
    def sigma2_descriptor(self):
        return PowerLog(1.0, 2 * self.hurst)

    def label(self):
        return f"fbm:{self.hurst:g}"


@dataclass(frozen=True)
class StationaryIncrements(ProcessModel):
    """Centered process with stationary increments, determined by sigma^2."""

    sigma2_descriptor: object
    stationary_increments = True

    def __post_init__(self):
        a0 = self.alpha0
        if not 0 < a0 <= 1:
            raise InvalidArgumentError(f"sigma^2 index at 0 must lie in (0,2], got {2 * a0}")
        a_inf = getattr(self.sigma2_descriptor, "index_at_infinity", None)
        if a_inf is not None and not 0 < a_inf < 2:
            raise InvalidArgumentError(f"sigma^2 index at infinity must lie in (0,2), got {a_inf}")

    @property
    def alpha0(self):
        return self.sigma2_descriptor.index_at_zero / 2

    @property
    def alpha_inf(self):
        return self.sigma2_descriptor.index_at_infinity / 2

    def sigma2(self, t):
        return np.asarray(self.sigma2_descriptor(np.abs(np.asarray(t, float))), float)

    def label(self):
        d = self.sigma2_descriptor
        if isinstance(d, PowerLog) and d.scale == 1 and d.log_power == 0:
            return f"power-sigma2:{d.power:g}"
        return f"sigma2[{d.label()}]"


@dataclass(frozen=True)
class SelfSimilar(ProcessModel):
    """Self-similar process with Var X(1) = 1.

    ``family`` picks the covariance used for simulation: ``fbm``,
    ``subfractional`` (normalized) or ``bifractional`` with parameter ``k``.
    ``rho`` is the local correlation profile at ``t0``; when omitted it is
    t^rho_index / (2 t0^rho_index), the fBm profile.
    """

    hurst: float
    rho_index: float
    rho: Optional[object] = None
    t0: Optional[float] = None
    family: str = "fbm"
    k: float = 1.0

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise InvalidArgumentError(f"self-similarity index must lie in (0,1), got {self.hurst}")
        if not 0 < self.rho_index <= 2:
            raise InvalidArgumentError(f"rho index must lie in (0,2], got {self.rho_index}")
        if self.family not in ("fbm", "subfractional", "bifractional"):
            raise InvalidArgumentError(f"unknown self-similar family {self.family!r}")
        if self.family == "bifractional" and not (0 < self.k <= 1 and self.hurst / self.k < 1):
            raise InvalidArgumentError("bifractional needs k in (0,1] and hurst/k < 1")

    def sigma2(self, t):
        return np.abs(np.asarray(t, float)) ** (2 * self.hurst)

    def _cov(self, s, t):
        s, t = np.asarray(s, float), np.asarray(t, float)
        if np.any(s < 0) or np.any(t < 0):
            raise InvalidArgumentError("self-similar models are defined for t >= 0 only")
        h2 = 2 * self.hurst
        if self.family == "fbm":
            return 0.5 * (s**h2 + t**h2 - np.abs(t - s) ** h2)
        if self.family == "subfractional":
            raw = s**h2 + t**h2 - 0.5 * ((s + t) ** h2 + np.abs(t - s) ** h2)
            return raw / (2.0 - 2.0 ** (h2 - 1))
        h0 = 2 * self.hurst / self.k
        return 2.0 ** (-self.k) * ((s**h0 + t**h0) ** self.k - np.abs(t - s) ** h2)

    def resolved_rho(self, t0=None):
        if self.rho is not None:
            return self.rho
        t0 = self.t0 if t0 is None else t0
        if t0 is None or t0 <= 0:
            raise InvalidArgumentError("rho profile needs a positive t0")
        a = self.rho_index
        if self.family == "subfractional":
            scale = 1.0 / (2 * (2.0 - 2.0 ** (2 * self.hurst - 1)) * t0**a)
        elif self.family == "bifractional":
            scale = 2.0 ** (-self.k) / t0**a
        else:
            scale = 1.0 / (2 * t0**a)
        return PowerLog(scale, a)

    def label(self):
        base = f"selfsim:{self.hurst:g},{self.rho_index:g}"
        return base if self.family == "fbm" else f"{base}[{self.family}]"


@dataclass(frozen=True)
class LineProcess(ProcessModel):
    """X(t) = t N, the degenerate alpha = 2 fBm."""

    def sigma2(self, t):
        return np.asarray(t, float) ** 2

    def _cov(self, s, t):
        return np.asarray(s, float) * np.asarray(t, float)

    def label(self):
        return "line"


@dataclass(frozen=True)
class ZeroProcess(ProcessModel):
    deterministic = True

    def sigma2(self, t):
        return np.zeros_like(np.asarray(t, float))

    def _cov(self, s, t):
        return np.zeros(np.broadcast(np.asarray(s), np.asarray(t)).shape)

    def label(self):
        return "zero"


def variance(model, t):
    return model.sigma2(t)


def covariance(model, s, t):
    """Cov(X(s), X(t)) for s, t >= 0 (vectorized)."""
    s_arr, t_arr = np.asarray(s, float), np.asarray(t, float)
    if np.any(s_arr < 0) or np.any(t_arr < 0):
        raise InvalidArgumentError("covariance is defined for non-negative times only")
    out = model._cov(s_arr, t_arr)
    return float(out) if np.ndim(out) == 0 else out


def covariance_matrix(model, times):
    times = np.asarray(times, float)
    return covariance(model, times[:, None], times[None, :])


def parse_model(text):
    """Model mini-language: brownian, fbm:H, power-sigma2:p, selfsim:H,a, line, zero."""
    text = text.strip()
    name, _, arg = text.partition(":")
    try:
        if name == "brownian" and not arg:
            return BrownianDrift()
        if name == "fbm":
            return FBm(float(arg))
        if name == "power-sigma2":
            return StationaryIncrements(PowerLog(1.0, float(arg)))
        if name == "selfsim":
            h, a = (float(v) for v in arg.split(","))
            return SelfSimilar(h, a)
        if name == "line" and not arg:
            return LineProcess()
        if name == "zero" and not arg:
            return ZeroProcess()
    except ValueError as exc:
        raise InvalidArgumentError(f"cannot parse model {text!r}: {exc}") from None
    raise InvalidArgumentError(
        f"unknown model {text!r}; expected brownian, fbm:H, power-sigma2:p, selfsim:H,a, line or zero"
    )


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SamplePath:
    grid: GridSpec
    values: np.ndarray
    seed: int
    model: ProcessModel
    replicate: int = 0

    @property
    def times(self):
        return self.grid.times


class PathSampler:
    """Precomputed sampler for one model on the uniform times ``a + i*step``.

    ``first_index`` is round(a / step); the grid must contain t = 0 when the
    model is two-sided (stationary increments, anchored at X(0) = 0).
    """

    def __init__(self, model, step, first_index, count):
        if count < 1 or step <= 0:
            raise InvalidArgumentError("sampler needs a positive step and at least one point")
        self.model = model
        self.step = float(step)
        self.first_index = int(first_index)
        self.count = int(count)
        self.times = (self.first_index + np.arange(self.count)) * self.step
        self.method = self._choose_method()
        self.diagnostic = ""
        if self.method == "circulant":
            self._setup_circulant()
        if self.method == "cholesky":
            self._setup_cholesky()

    @classmethod
    def for_grid(cls, model, grid):
        return cls(model, grid.step, 0, grid.steps + 1)

    def _choose_method(self):
        m = self.model
        if isinstance(m, ZeroProcess):
            return "zero"
        if isinstance(m, LineProcess) or (isinstance(m, FBm) and m.hurst == 1):
            return "line"
        if isinstance(m, BrownianDrift) or (isinstance(m, FBm) and m.hurst == 0.5):
            return "brownian"
        if m.stationary_increments:
            return "circulant"
        if self.first_index < 0:
            raise InvalidArgumentError(f"{m.label()} cannot be sampled at negative times")
        return "cholesky"

    # index range of increments covering the grid and the origin
    def _span(self):
        lo = min(self.first_index, 0)
        hi = max(self.first_index + self.count - 1, 0)
        return lo, hi

    def _setup_circulant(self):
        lo, hi = self._span()
        n = hi - lo
        if n == 0:
            self.method = "zero"
            return
        k = np.arange(n + 1, dtype=float) * self.step
        s2 = self.model.sigma2
        gamma = 0.5 * (s2(k + self.step) + s2(np.abs(k - self.step)) - 2 * s2(k))
        gamma[0] = s2(self.step)
        row = np.concatenate([gamma[:n], gamma[n : n + 1], gamma[1:n][::-1]])
        eig = np.fft.fft(row).real
        if eig.min() < -_EMBED_TOL * eig.max():
            self.diagnostic = f"circulant embedding has eigenvalue {eig.min():.3e}; using dense factorization"
            warnings.warn(self.diagnostic, RuntimeWarning, stacklevel=3)
            self.method = "cholesky"
            self._setup_cholesky()
            return
        self._n_incr = n
        self._sqrt_eig = np.sqrt(np.clip(eig, 0, None) / len(row))

    def _setup_cholesky(self):
        lo, hi = self._span()
        if self.model.stationary_increments and lo < 0:
            # factorize the one-sided process on [0, (hi - lo) step] and re-anchor
            pts = np.arange(1, hi - lo + 1) * self.step
        else:
            pts = self.times[self.times != 0] if self.first_index <= 0 else self.times
        cov = self.model._cov(pts[:, None], pts[None, :])
        self._chol_times = pts
        self._chol = _jittered_cholesky(cov)

    def sample(self, rng):
        method = self.method
        if method == "zero":
            return np.zeros(self.count)
        if method == "line":
            return self.times * rng.standard_normal()
        if method == "brownian":
            lo, hi = self._span()
            incr = rng.standard_normal(hi - lo) * math.sqrt(self.step)
            return self._anchor(np.concatenate([[0.0], np.cumsum(incr)]))
        if method == "circulant":
            m = len(self._sqrt_eig)
            z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            incr = np.fft.fft(self._sqrt_eig * z).real[: self._n_incr]
            return self._anchor(np.concatenate([[0.0], np.cumsum(incr)]))
        z = rng.standard_normal(len(self._chol_times))
        vals = self._chol @ z
        lo, hi = self._span()
        if self.model.stationary_increments and lo < 0:
            return self._anchor(np.concatenate([[0.0], vals]))
        if self.first_index <= 0:
            out = np.zeros(self.count)
            out[self.times != 0] = vals
            return out
        return vals

    def _anchor(self, path):
        """``path`` holds X at indices lo..hi relative to X(lo) = 0; shift so X(0) = 0."""
        lo, _ = self._span()
        path = path - path[-lo]
        start = self.first_index - lo
        return path[start : start + self.count]


def _jittered_cholesky(cov):
    n = cov.shape[0]
    scale = max(float(np.max(np.diag(cov))), 1.0)
    last = None
    for jitter in _JITTERS:
        try:
            return linalg.cholesky(cov + jitter * scale * np.eye(n), lower=True)
        except linalg.LinAlgError as exc:
            last = exc
    min_eig = float(np.linalg.eigvalsh(cov).min())
    raise SimulationFailure(
        f"covariance matrix of size {n} is not positive semidefinite after jitter "
        f"{_JITTERS[-1]:g} (min eigenvalue {min_eig:.3e}): {last}"
    )


def simulate(model, grid, seed, replicate=0):
    """Draw X on ``grid`` from substream (seed, replicate)."""
    sampler = PathSampler.for_grid(model, grid)
    values = sampler.sample(substream(seed, replicate))
    return SamplePath(grid, values, int(seed), model, int(replicate))


def drift_adjust(path, c):
    return np.asarray(path.values) - c * path.grid.times
