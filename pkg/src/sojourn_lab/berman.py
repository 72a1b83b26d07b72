"""Monte Carlo estimation of Berman-type constants.

B^h_W(x, E) = int P{mes{t in E : sqrt2 W(t) - Var W(t) - h(t) + z > 0} > x} e^{-z} dz.

On a grid the measure in z is a step function, so for each path the
z-integral equals exp of the (m+1)-th largest value of
M = sqrt2 W - Var W - h with m = floor(x / step). Estimating the constant is
then a plain average over paths.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special, stats

from .asymptotics import constant_label
from .errors import InvalidArgumentError, NumericFailure
from .models import BrownianDrift, FBm, PathSampler, parse_model
from .rng import chunk_ranges, substream
from .sojourn import needed_count

SCHEMA = "sojourn-lab/1"
DEFAULT_LADDER = (8.0, 16.0, 32.0)


# ---------------------------------------------------------------------------
# drift fields


@dataclass(frozen=True)
class ZeroField:
    def __call__(self, t):
        return np.zeros_like(np.asarray(t, float))

    def label(self):
        return None

    def to_dict(self):
        return {"kind": "zero"}


@dataclass(frozen=True)
class PowerField:
    """h(t) = gamma |t|^beta."""

    gamma: float
    beta: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.beta > 0):
            raise InvalidArgumentError(f"power field needs gamma > 0 and beta > 0, got {self.gamma}, {self.beta}")

    def __call__(self, t):
        return self.gamma * np.abs(np.asarray(t, float)) ** self.beta

    def label(self):
        return (self.gamma, self.beta)

    def to_dict(self):
        return {"kind": "power", "gamma": self.gamma, "beta": self.beta}


@dataclass(frozen=True)
class TableField:
    """Piecewise-linear h through (times, values)."""

    times: tuple
    values: tuple

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) < 2:
            raise InvalidArgumentError("table field needs matching times/values of length >= 2")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidArgumentError("table field times must increase")

    def __call__(self, t):
        return np.interp(np.asarray(t, float), self.times, self.values)

    def label(self):
        return ("table", hashlib.sha256(json.dumps(self.to_dict()).encode()).hexdigest()[:12])

    def to_dict(self):
        return {"kind": "table", "times": list(self.times), "values": list(self.values)}


def parse_field(text):
    """``zero`` or ``power:gamma,beta``."""
    text = (text or "zero").strip()
    if text == "zero":
        return ZeroField()
    name, _, arg = text.partition(":")
    if name == "power":
        try:
            g, b = (float(v) for v in arg.split(","))
        except ValueError:
            raise InvalidArgumentError(f"cannot parse field {text!r}; expected power:gamma,beta") from None
        return PowerField(g, b)
    raise InvalidArgumentError(f"unknown drift field {text!r}; expected zero or power:gamma,beta")


# ---------------------------------------------------------------------------
# per-path weight


def _order_stat_count(x, step):
    # m + 1 = smallest count n with n * step > x
    return needed_count(x, 1.0, step)


def zstar_weight(values, step, x):
    """exp(M_(m+1)): the z-integral of 1{step * #(M + z > 0) > x} e^{-z}."""
    values = np.asarray(values, float)
    k = _order_stat_count(x, step)
    if k > values.size:
        return 0.0
    top = -np.partition(-values, k - 1)[k - 1]
    return float(np.exp(top))


def z_quadrature_weight(values, step, x, zlim=40.0, dz=1e-3):
    """Direct trapezoid quadrature of the z-integral; a cross-check for :func:`zstar_weight`."""
    desc = np.sort(np.asarray(values, float))[::-1]
    z = np.arange(-zlim, zlim + dz / 2, dz)
    # number of values strictly above -z
    counts = np.searchsorted(-desc, z, side="left")
    integrand = np.where(step * counts > x, np.exp(-z), 0.0)
    return float(integrate.trapezoid(integrand, z))


# ---------------------------------------------------------------------------
# specs and estimates


@dataclass(frozen=True)
class BermanSpec:
    process: object
    field: object
    x: float
    interval: tuple
    grid_step: Optional[float] = None
    replicates: int = 10_000
    seed: int = 0

    def __post_init__(self):
        a, b = self.interval
        if not b > a:
            raise InvalidArgumentError(f"interval [{a}, {b}] is empty")
        if not self.x >= 0:
            raise InvalidArgumentError(f"x must be >= 0, got {self.x}")
        if self.grid_step is not None and not self.grid_step > 0:
            raise InvalidArgumentError(f"grid step must be positive, got {self.grid_step}")
        if int(self.replicates) < 1:
            raise InvalidArgumentError("replicates must be positive")

    @property
    def step(self):
        a, b = self.interval
        return default_step(b - a) if self.grid_step is None else float(self.grid_step)

    def to_dict(self):
        return {
            "process": self.process.label(),
            "field": self.field.to_dict(),
            "x": self.x,
            "interval": list(self.interval),
            "grid_step": self.step,
            "replicates": int(self.replicates),
            "seed": int(self.seed),
        }


@dataclass
class LadderRecord:
    S: float
    point: float
    stderr: float


@dataclass
class BermanEstimate:
    point: float
    stderr: float
    replicates: int
    normalization: str = "none"
    ladder: list = field(default_factory=list)
    trimmed_mean: float = math.nan
    flags: list = field(default_factory=list)
    label: Optional[str] = None

    def to_dict(self):
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["ladder"] = [LadderRecord(**r) for r in d.get("ladder", [])]
        return cls(**d)


def default_step(length):
    return min(2.0**-10 * length, 2.0**-7)


def _grid(interval, step):
    a, b = interval
    n = int(round((b - a) / step))
    if n < 1:
        raise InvalidArgumentError(f"grid step {step} exceeds interval length {b - a}")
    step = (b - a) / n
    first = int(round(a / step))
    if abs(first * step - a) > 1e-9 * max(1.0, abs(a)):
        raise InvalidArgumentError(f"interval start {a} is not a multiple of the grid step {step}")
    return step, first, n


def _weights_chunk(args):
    spec, lo, hi = args
    step, first, n = _grid(spec.interval, spec.step)
    sampler = PathSampler(spec.process, step, first, n)
    drift = spec.process.sigma2(np.abs(sampler.times)) + spec.field(sampler.times)
    out = np.empty(hi - lo)
    for i, r in enumerate(range(lo, hi)):
        w = sampler.sample(substream(spec.seed, r))
        out[i] = zstar_weight(_SQRT2 * w - drift, step, spec.x)
    return out


_SQRT2 = math.sqrt(2.0)


def _run_chunks(fn, payload, replicates, workers):
    ranges = chunk_ranges(replicates, workers)
    jobs = [(payload, a, b) for a, b in ranges]
    if workers <= 1 or len(jobs) == 1:
        parts = [fn(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, jobs))
    return np.concatenate(parts) if parts else np.empty(0)


def _summarize(weights, normalization="none", label=None):
    n = weights.size
    point = float(np.mean(weights))
    stderr = float(np.std(weights, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    trimmed = float(stats.trim_mean(weights, 0.1)) if n >= 10 else point
    return BermanEstimate(point, stderr, n, normalization, trimmed_mean=trimmed, label=label)


def berman_interval(spec, workers=1):
    """Crude estimate of B^h_W(x, [a, b])."""
    a, b = spec.interval
    step, _, n = _grid(spec.interval, spec.step)
    if _order_stat_count(spec.x, step) > n:
        return BermanEstimate(0.0, 0.0, int(spec.replicates), flags=["x exceeds interval length"])
    if spec.process.deterministic:
        w = _weights_chunk((spec, 0, 1))
        est = _summarize(w)
        est.stderr, est.replicates = 0.0, int(spec.replicates)
        return est
    return _summarize(_run_chunks(_weights_chunk, spec, int(spec.replicates), workers))


# ---------------------------------------------------------------------------
# S -> infinity limits


def _anchored_chunk(args):
    (process, x, ladder, step, seed), lo, hi = args
    n_max = int(round(ladder[-1] / step))
    sizes = [int(round(S / step)) for S in ladder]
    k = _order_stat_count(x, step)
    sampler = PathSampler(process, step, 0, n_max)
    lag_var = process.sigma2(np.arange(n_max) * step)
    out = np.zeros((hi - lo, len(ladder)))
    for i, r in enumerate(range(lo, hi)):
        rng = substream(seed, r)
        w = sampler.sample(rng)
        for j, n in enumerate(sizes):
            if k > n:
                continue
            J = int(rng.integers(n))
            idx = np.abs(np.arange(n) - J)
            m = _SQRT2 * (w[:n] - w[J]) - lag_var[idx]
            top = -np.partition(-m, k - 1)[k - 1]
            out[i, j] = math.exp(top - special.logsumexp(m)) / step
    return out


def _crude_ladder_chunk(args):
    (process, fld, x, ladder, step, seed), lo, hi = args
    n_max = int(round(ladder[-1] / step))
    sizes = [int(round(S / step)) for S in ladder]
    sampler = PathSampler(process, step, 0, n_max)
    drift = process.sigma2(sampler.times) + fld(sampler.times)
    out = np.zeros((hi - lo, len(ladder)))
    for i, r in enumerate(range(lo, hi)):
        m = _SQRT2 * sampler.sample(substream(seed, r)) - drift
        for j, n in enumerate(sizes):
            out[i, j] = zstar_weight(m[:n], step, x)
    return out


def _run_ladder(fn, payload, replicates, workers):
    ranges = chunk_ranges(replicates, workers)
    jobs = [(payload, a, b) for a, b in ranges]
    if workers <= 1 or len(jobs) == 1:
        parts = [fn(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, jobs))
    return np.vstack(parts)


def process_label(process):
    if isinstance(process, BrownianDrift):
        return "fbm:0.5"
    if isinstance(process, FBm):
        return f"fbm:{process.hurst:.12g}"
    return process.label()


def berman_limit(
    process,
    x,
    S_ladder: Sequence[float] = DEFAULT_LADDER,
    grid_step=2.0**-10,
    replicates=20_000,
    seed=0,
    field=None,
    method="auto",
    workers=1,
):
    """lim_S B^h_W(x, [0, S]) / S^{1(h=0)} from a ladder of S values.

    With h = 0 and stationary increments (``method="anchored"``, the default
    there) each replicate draws a uniform anchor point J and returns
    exp(M'_(m+1)) / (step * sum_i exp(M'_i)) with
    M'_i = sqrt2 (W_i - W_J) - Var W(|i - J| step). Its mean is
    B(x, [0, S]) / S exactly on the grid and it is bounded by 1/step, whereas
    the crude weight exp(M_(m+1)) is heavy tailed. The point estimate is the
    two-point Richardson extrapolation in 1/S of the last two rungs.
    """
    fld = ZeroField() if field is None else field
    ladder = sorted(float(s) for s in S_ladder)
    if len(ladder) < 3:
        raise InvalidArgumentError(f"S ladder needs at least 3 values, got {ladder}")
    if ladder[-1] <= x:
        raise InvalidArgumentError(f"every S in the ladder {ladder} is at most x = {x}")
    normalize = isinstance(fld, ZeroField)
    if method == "auto":
        method = "anchored" if normalize and process.stationary_increments else "crude"
    if method == "anchored" and not (normalize and process.stationary_increments):
        raise InvalidArgumentError("anchored estimator needs h = 0 and a stationary-increments process")
    flags = []
    usable = [S for S in ladder if S > x]
    if len(usable) < len(ladder):
        flags.append(f"S values {[S for S in ladder if S <= x]} do not exceed x and were skipped")
    if method == "anchored":
        W = _run_ladder(_anchored_chunk, (process, x, usable, grid_step, seed), int(replicates), workers)
    elif method == "crude":
        W = _run_ladder(_crude_ladder_chunk, (process, fld, x, usable, grid_step, seed), int(replicates), workers)
        if normalize:
            W = W / np.asarray(usable)[None, :]
    else:
        raise InvalidArgumentError(f"unknown estimator {method!r}; choose anchored or crude")
    n = W.shape[0]
    records = []
    for j, S in enumerate(usable):
        col = W[:, j]
        se = float(np.std(col, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        records.append(LadderRecord(S, float(col.mean()), se))
    label = constant_label(process_label(process), x, fld.label() if not normalize else None)
    if len(records) >= 2:
        r1, r2 = records[-2], records[-1]
        point = (r2.S * r2.point - r1.S * r1.point) / (r2.S - r1.S)
        # W[:, -1] and W[:, -2] come from the same paths; use the paired difference
        diff = (r2.S * W[:, -1] - r1.S * W[:, -2]) / (r2.S - r1.S)
        stderr = float(np.std(diff, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        if abs(r2.point - r1.point) > 5 * math.hypot(r1.stderr, r2.stderr):
            flags.append("not stabilized: last two rungs differ by more than 5 combined stderr")
        trimmed = float(stats.trim_mean(diff, 0.1))
    else:
        point, stderr = records[-1].point, records[-1].stderr
        trimmed = float(stats.trim_mean(W[:, -1], 0.1))
    return BermanEstimate(
        max(point, 0.0),
        stderr,
        n,
        "divide-by-S" if normalize else "none",
        records,
        trimmed,
        flags,
        label,
    )


def berman_hat(process, field, x, S, grid_step=None, replicates=10_000, seed=0, workers=1):
    """B-hat over [-S, S], compared with [-S/2, S/2] for a stabilization flag."""
    if S <= x / 2:
        warnings.warn(f"S = {S} <= x/2 = {x / 2}: interval too short, estimate is near 0", RuntimeWarning, stacklevel=2)
    step = default_step(2 * S) if grid_step is None else grid_step
    big = berman_interval(BermanSpec(process, field, x, (-S, S), step, replicates, seed), workers)
    half = berman_interval(BermanSpec(process, field, x, (-S / 2, S / 2), step, replicates, seed), workers)
    big.ladder = [LadderRecord(S / 2, half.point, half.stderr), LadderRecord(S, big.point, big.stderr)]
    tol = 5 * math.hypot(big.stderr, half.stderr) + 1e-12 * max(1.0, big.point)
    if abs(big.point - half.point) > tol:
        big.flags.append("not stabilized: estimate on [-S, S] differs from [-S/2, S/2]")
    big.label = "hat" + constant_label(process_label(process), x, field.label())
    return big


def line_process_hat_quadrature(gamma, x, S=math.inf):
    """B-hat for W(t) = tN, h = gamma t^2 on [-S, S] by 1-d quadrature over N.

    For fixed N the exceedance set of sqrt2 t N - (1 + gamma) t^2 + z is an
    interval centred at N / (sqrt2 k), k = 1 + gamma, of half-width r with
    z = k r^2 - N^2 / (2k). Clipping to [-S, S] fixes the smallest admissible r
    and hence the threshold z*(N); the constant is E exp(-z*(N)).
    """
    if not gamma > 0 or not x >= 0:
        raise InvalidArgumentError("line_process_hat_quadrature needs gamma > 0 and x >= 0")
    if 2 * S <= x:
        return 0.0
    k = 1.0 + gamma

    def log_integrand(N):
        center = abs(N) / (_SQRT2 * k)
        # smallest half-width whose window, clipped to [-S, S], still has length x
        r = x / 2 if center + x / 2 <= S else x - S + center
        zstar = k * r * r - N * N / (2 * k)
        return -zstar - N * N / 2 - 0.5 * math.log(2 * math.pi)

    pieces = [(-math.inf, math.inf)]
    if math.isfinite(S):
        # split at the kinks where clipping starts
        edge = _SQRT2 * k * (S - x / 2)
        pieces = [(-math.inf, -edge), (-edge, edge), (edge, math.inf)]
    total, err = 0.0, 0.0
    for a, b in pieces:
        v, e = integrate.quad(lambda N: math.exp(log_integrand(N)), a, b, epsabs=1e-13, epsrel=1e-12, limit=400)
        total += v
        err += e
    if err > 1e-8:
        raise NumericFailure(f"line-process quadrature error {err:.2e}")
    return total


# ---------------------------------------------------------------------------
# persistence


def spec_hash(spec_dict):
    blob = json.dumps(spec_dict, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()


class BermanStore:
    """JSON file of estimates keyed by the hash of their defining parameters."""

    def __init__(self, path):
        self.path = os.fspath(path)
        self.records = {}
        if os.path.exists(self.path):
            try:
                with open(self.path) as fh:
                    data = json.load(fh)
            except (OSError, ValueError) as exc:
                raise InvalidArgumentError(f"cannot read Berman store {self.path}: {exc}") from None
            self.records = data.get("records", {})

    def put(self, spec_dict, estimate):
        key = spec_hash(spec_dict)
        self.records[key] = {"spec": spec_dict, "estimate": estimate.to_dict()}
        return key

    def get(self, spec_dict):
        rec = self.records.get(spec_hash(spec_dict))
        return None if rec is None else BermanEstimate.from_dict(rec["estimate"])

    def by_label(self):
        """{constant label: estimate} for use as ``berman_values``."""
        out = {}
        for rec in self.records.values():
            est = BermanEstimate.from_dict(rec["estimate"])
            if est.label:
                out[est.label] = est
        return out

    def save(self):
        try:
            with open(self.path, "w") as fh:
                json.dump({"schema": SCHEMA, "records": self.records}, fh, indent=1, sort_keys=True)
        except OSError as exc:
            raise OSError(f"cannot write Berman store {self.path}: {exc}") from exc


def limit_spec_dict(process, x, ladder, step, replicates, seed, field=None, method="auto"):
    fld = ZeroField() if field is None else field
    return {
        "kind": "limit",
        "process": process.label(),
        "field": fld.to_dict(),
        "x": float(x),
        "ladder": [float(s) for s in ladder],
        "grid_step": float(step),
        "replicates": int(replicates),
        "seed": int(seed),
        "method": method,
    }


__all__ = [
    "BermanEstimate",
    "BermanSpec",
    "BermanStore",
    "LadderRecord",
    "PowerField",
    "TableField",
    "ZeroField",
    "berman_hat",
    "berman_interval",
    "berman_limit",
    "default_step",
    "limit_spec_dict",
    "line_process_hat_quadrature",
    "parse_field",
    "parse_model",
    "spec_hash",
    "z_quadrature_weight",
    "zstar_weight",
]
