"""Replicated Monte Carlo for sojourn tails and passage-time laws.

Replicate r always uses substream (seed, r); splitting the replicates over
worker processes and concatenating in replicate order reproduces the serial
result exactly. A single set of paths serves every (u, x) pair of a table, so
estimates are pathwise monotone in both arguments.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, stats

from .asymptotics import evaluate_asymptotic, passage_regime, resolve_scaling, sigma2_descriptor
from .errors import (
    DegenerateConditioningError,
    InvalidArgumentError,
    MissingScalingError,
    NumericFailure,
    SojournLabError,
    UnsupportedRegimeError,
)
from .models import BrownianDrift, FBm, GridSpec, PathSampler, SamplePath
from .rng import chunk_ranges, substream
from .sojourn import first_passage, needed_count, normalize_passage, sojourn_counts

SCHEMA = "sojourn-lab/1"
REPORT_COLUMNS = ("u", "x", "c", "T", "p_hat", "stderr", "ci_lo", "ci_hi", "reps", "seed", "censored_fraction")
MIN_REPLICATES = 100
BRIDGE_FACTOR = 64
# skip a coarse interval when the bridge crossing probability is below this
_BRIDGE_EPS = 1e-12


def wilson_interval(hits, n, level=0.95):
    ci = stats.binomtest(int(hits), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class TailEstimate:
    p_hat: float
    stderr: float
    ci_lo: float
    ci_hi: float
    replicates: int
    hits: int
    problem: dict
    seed: int
    grid: dict
    censored_fraction: float
    method: str = "dense"

    def row(self):
        p = self.problem
        return {
            "u": p["u"],
            "x": p["x"],
            "c": p["c"],
            "T": p["T"],
            "p_hat": self.p_hat,
            "stderr": self.stderr,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "reps": self.replicates,
            "seed": self.seed,
            "censored_fraction": self.censored_fraction,
        }

    def to_dict(self):
        return asdict(self)


def _tail_estimate(hits, n, problem_dict, seed, grid, censored, method):
    p = hits / n
    lo, hi = wilson_interval(hits, n)
    return TailEstimate(
        p, math.sqrt(p * (1 - p) / n), min(lo, p), max(hi, p), n, int(hits), problem_dict, int(seed), grid.to_dict(),
        censored / n, method,
    )


# ---------------------------------------------------------------------------
# path kernels


def _is_brownian(model):
    return isinstance(model, BrownianDrift) or (isinstance(model, FBm) and model.hurst == 0.5)


def bridge_counts(rng, step, steps, c, levels, factor=BRIDGE_FACTOR):
    """Exceedance counts of Brownian motion with drift -c on a fine grid, refined lazily.

    The path is drawn on a coarse grid of ``factor`` fine steps. A coarse
    interval whose endpoints lie on the same side of a level, far enough that
    the Brownian-bridge crossing probability exp(-2 d_a d_b / D) is below
    1e-12, contributes all or none of its fine points; the remaining intervals
    are filled in with exact Brownian bridges. Between fine points that both
    lie below a level, a shared uniform decides whether the continuous path
    crosses, with probability exp(-2 d_a d_b / step). Returns
    (counts, crossed, Y(T)) where ``crossed`` flags levels the continuous path
    exceeds somewhere.
    """
    if steps % factor:
        raise InvalidArgumentError(f"bridge refinement needs steps divisible by {factor}, got {steps}")
    levels = np.asarray(levels, float)
    nc = steps // factor
    D = factor * step
    coarse = np.concatenate([[0.0], np.cumsum(rng.standard_normal(nc) * math.sqrt(D) - c * D)])
    a, b = coarse[:-1], coarse[1:]
    thresh = -D * math.log(_BRIDGE_EPS) / 2
    counts = np.zeros(levels.size, dtype=np.int64)
    crossed = np.zeros(levels.size, dtype=bool)
    safe = np.empty((levels.size, nc), dtype=bool)
    for i, lev in enumerate(levels):
        da, db = a - lev, b - lev
        safe[i] = da * db > thresh
        above = np.count_nonzero(safe[i] & (da > 0))
        counts[i] += factor * above
        crossed[i] = above > 0
    refine = np.flatnonzero(~safe.all(axis=0))
    if refine.size:
        walk = np.cumsum(rng.standard_normal((refine.size, factor)) * math.sqrt(step), axis=1)
        frac = np.arange(1, factor + 1) / factor
        gap = (b[refine] - a[refine])[:, None]
        inner = a[refine][:, None] + walk - frac * (walk[:, -1:] - gap)
        # left endpoints of the fine steps: the coarse point plus factor-1 bridge points
        body = np.concatenate([a[refine][:, None], inner[:, :-1]], axis=1)
        log_uniform = np.log(rng.random((refine.size, factor)))
        for i, lev in enumerate(levels):
            rows = ~safe[i, refine]
            left, right = body[rows] - lev, inner[rows] - lev
            counts[i] += np.count_nonzero(left > 0)
            if not crossed[i]:
                below = (left <= 0) & (right <= 0)
                crossed[i] = bool(
                    np.any(left > 0) or np.any(right > 0)
                    or np.any(below & (log_uniform[rows] < -2 * left * right / step))
                )
    return counts, crossed, float(coarse[-1])


def _tail_chunk(args):
    (model, c, step, steps, levels, method, seed), lo, hi = args
    n = hi - lo
    counts = np.zeros((n, len(levels)), dtype=np.int64)
    crossed = np.zeros((n, len(levels)), dtype=bool)
    terminal = np.zeros(n)
    if method == "bridge":
        for i, r in enumerate(range(lo, hi)):
            counts[i], crossed[i], terminal[i] = bridge_counts(substream(seed, r), step, steps, c, levels)
        return counts, crossed, terminal
    sampler = PathSampler(model, step, 0, steps + 1)
    times = sampler.times
    for i, r in enumerate(range(lo, hi)):
        y = sampler.sample(substream(seed, r)) - c * times
        counts[i] = sojourn_counts(y, levels)
        crossed[i] = np.max(y) > np.asarray(levels)
        terminal[i] = y[-1]
    return counts, crossed, terminal


def _run(fn, payload, replicates, workers):
    jobs = [(payload, a, b) for a, b in chunk_ranges(replicates, workers)]
    if workers <= 1 or len(jobs) == 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# ---------------------------------------------------------------------------
# tail estimation


def _check_grid(problem, grid):
    if not problem.infinite and abs(grid.horizon - problem.horizon) > 1e-9 * problem.horizon:
        raise InvalidArgumentError(
            f"grid horizon {grid.horizon} must equal the finite horizon T = {problem.horizon}"
        )


def _scaling(problem):
    try:
        return resolve_scaling(problem)
    except SojournLabError as exc:
        raise MissingScalingError(f"cannot resolve v(u) for u={problem.u}: {exc}") from exc


def _choose_method(model, grid, method):
    if method == "auto":
        return "bridge" if _is_brownian(model) and grid.steps % BRIDGE_FACTOR == 0 else "dense"
    if method == "bridge" and not _is_brownian(model):
        raise InvalidArgumentError("bridge refinement is only available for Brownian motion")
    if method not in ("dense", "bridge"):
        raise InvalidArgumentError(f"unknown method {method!r}; choose auto, dense or bridge")
    return method


def estimate_tail_table(problem, grid, us, xs, replicates, seed, workers=1, method="auto"):
    """TailEstimates for every (u, x) from one set of paths, in row-major (u, x) order."""
    if int(replicates) < MIN_REPLICATES:
        raise InvalidArgumentError(f"replicates must be >= {MIN_REPLICATES}, got {replicates}")
    _check_grid(problem, grid)
    us, xs = [float(u) for u in us], [float(x) for x in xs]
    probs = [[problem.with_(u=u, x=x) for x in xs] for u in us]
    need = np.array([[needed_count(p.x, _scaling(p), grid.step) for p in row] for row in probs])
    method = _choose_method(problem.model, grid, method)
    payload = (problem.model, problem.c, grid.step, grid.steps, us, method, int(seed))
    parts = _run(_tail_chunk, payload, int(replicates), workers)
    counts = np.vstack([p[0] for p in parts])
    crossed = np.vstack([p[1] for p in parts])
    terminal = np.concatenate([p[2] for p in parts])
    n = counts.shape[0]
    reach = reachable_gap(problem.model, problem.c) if problem.infinite else 0.0
    out = []
    for i, u in enumerate(us):
        for j in range(len(xs)):
            # sojourn > 0 is the event that the path exceeds u somewhere
            hit = crossed[:, i] if xs[j] == 0 else counts[:, i] >= need[i, j]
            censored = 0
            if problem.infinite:
                censored = int(np.count_nonzero(~hit & (terminal > u - reach)))
            d = probs[i][j].to_dict()
            d["v"] = float(_scaling(probs[i][j]))
            out.append(_tail_estimate(int(hit.sum()), n, d, seed, grid, censored, method))
    return out


def estimate_tail(problem, grid, replicates, seed, workers=1, method="auto"):
    """Crude Monte Carlo of P{v int_0^{T or truncation} 1(X(t) - ct > u) dt > x}."""
    est = estimate_tail_table(problem, grid, [problem.u], [problem.x], replicates, seed, workers, method)[0]
    if problem.infinite and est.censored_fraction > 0.01:
        warnings.warn(
            f"{est.censored_fraction:.1%} of replicates may still accrue sojourn after the truncation horizon",
            RuntimeWarning,
            stacklevel=2,
        )
    return est


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridPolicy:
    """Grid for a problem: finite T as is; T = inf truncated at K * max(u t*, base time)."""

    step: float = 2.0**-12
    K: float = 5.0
    multiple: int = BRIDGE_FACTOR

    def horizon(self, problem):
        if not problem.infinite:
            return problem.horizon
        return truncation_horizon(problem, self.K)

    def grid_for(self, problem):
        h = self.horizon(problem)
        steps = math.ceil(h / self.step / self.multiple - 1e-9) * self.multiple
        if problem.infinite:
            return GridSpec(steps * self.step, steps)
        return GridSpec(h, steps)


def truncation_horizon(problem, K=5.0):
    """K * max(u t*, 6 c^{-1/(1-alpha_inf)}); the second term is 30 for Brownian motion, c = 1, K = 5."""
    s2 = sigma2_descriptor(problem.model)
    a = s2.index_at_infinity / 2
    if not 0 < a < 1:
        raise UnsupportedRegimeError(f"stationary-infinite: truncation needs alpha_inf in (0,1), got {a}")
    t_star = a / (problem.c * (1 - a))
    base = 6.0 * problem.c ** (-1.0 / (1 - a))
    return K * max(max(problem.u, 0.0) * t_star, base)


def reachable_gap(model, c, z=3.0):
    """Largest gap d that the continuation X(s) - cs can close with a z-sigma excursion.

    Solves min_s (d + cs) / sigma(s) = z for d. A replicate that has not hit by
    the truncation horizon G counts as censored when u - Y(G) is below this.
    """
    ratios = np.geomspace(1e-4, 1e4, 801)

    def margin(d):
        s = d * ratios
        return float(np.min((d + c * s) / np.sqrt(model.sigma2(s)))) - z

    lo, hi = 1e-12, 1.0
    while margin(hi) < 0:
        hi *= 2
        if hi > 1e12:
            raise NumericFailure("no finite reachable gap; is the drift c > 0?")
    return float(optimize.brentq(margin, lo, hi, xtol=1e-12, rtol=1e-10))


def truncation_grid(problem, step=2.0**-12, K=5.0):
    return GridPolicy(step, K).grid_for(problem)


# ---------------------------------------------------------------------------
# passage-time laws


@dataclass
class PassageLawRecord:
    """Normalized conditional passage statistics.

    ``values`` holds the statistic of every accepted replicate; replicates whose
    second passage never happens sit at +inf (infinite horizon) or -inf (finite).
    """

    kind: str
    values: np.ndarray
    replicates: int
    accepted: int
    atom: float
    atom_stderr: float
    censored: int = 0

    @property
    def acceptance_rate(self):
        return self.accepted / self.replicates

    def cdf(self, y):
        return float(np.count_nonzero(self.values <= y) / self.accepted)

    def survival(self, y):
        return 1.0 - self.cdf(y)

    def ks_distance(self, law_cdf):
        """sup_y |F_n(y) - F(y)| where F may carry the same atom outside the real line."""
        finite = np.sort(self.values[np.isfinite(self.values)])
        n = self.accepted
        below = np.count_nonzero(self.values == -np.inf)
        if finite.size == 0:
            return float(abs(below / n - law_cdf(-np.inf)))
        F = np.array([law_cdf(v) for v in finite])
        upper = (below + np.arange(1, finite.size + 1)) / n
        lower = (below + np.arange(finite.size)) / n
        d = max(np.max(np.abs(upper - F)), np.max(np.abs(lower - F)))
        d = max(d, abs(below / n - law_cdf(-np.inf)), abs(upper[-1] - law_cdf(np.inf)))
        return float(d)

    def to_dict(self):
        return {
            "kind": self.kind,
            "replicates": self.replicates,
            "accepted": self.accepted,
            "acceptance_rate": self.acceptance_rate,
            "atom": self.atom,
            "atom_stderr": self.atom_stderr,
            "censored": self.censored,
            "values": [float(v) for v in self.values],
        }


def _passage_chunk(args):
    (model, c, u, x1, x2, v, horizon, step, steps, seed), lo, hi = args
    grid = GridSpec(step * steps, steps)
    sampler = PathSampler.for_grid(model, grid)
    out = np.empty((hi - lo, 2))
    cens = np.zeros(hi - lo, dtype=bool)
    for i, r in enumerate(range(lo, hi)):
        path = SamplePath(grid, sampler.sample(substream(seed, r)), seed, model, r)
        t1 = first_passage(path, c, u, x1, v, horizon)
        t2 = first_passage(path, c, u, x2, v, horizon) if math.isfinite(t1.tau) else t1
        out[i] = t1.tau, t2.tau
        cens[i] = t2.censored
    return out, cens


def estimate_passage_law(problem, x1, x2, grid, replicates, seed, workers=1, v=None):
    """Empirical law of the normalized passage time at x2 given passage at x1."""
    if x1 > x2:
        raise InvalidArgumentError(f"need x1 <= x2, got {x1} > {x2}")
    if int(replicates) < MIN_REPLICATES:
        raise InvalidArgumentError(f"replicates must be >= {MIN_REPLICATES}, got {replicates}")
    _check_grid(problem, grid)
    scale = _scaling(problem) if v is None else float(v)
    regime = passage_regime(problem)
    payload = (problem.model, problem.c, problem.u, x1, x2, scale, problem.horizon, grid.step, grid.steps, int(seed))
    parts = _run(_passage_chunk, payload, int(replicates), workers)
    taus = np.vstack([p[0] for p in parts])
    cens = np.concatenate([p[1] for p in parts])
    accepted = np.isfinite(taus[:, 0])
    k = int(accepted.sum())
    if k == 0:
        raise DegenerateConditioningError(
            f"no replicate reached the first passage level x1={x1} at u={problem.u}; increase replicates or lower u"
        )
    t2 = taus[accepted, 1]
    missing = ~np.isfinite(t2)
    atom = float(missing.mean())
    fill = np.inf if regime.kind == "infinite" else -np.inf
    values = np.array([normalize_passage(t, regime) if math.isfinite(t) else fill for t in t2])
    return PassageLawRecord(
        regime.kind, values, int(replicates), k, atom, math.sqrt(atom * (1 - atom) / k), int(cens[accepted].sum())
    )


# ---------------------------------------------------------------------------
# convergence studies


@dataclass
class ConvergenceRow:
    u: float
    mc: TailEstimate
    asymptotic: object
    ratio: float

    def to_dict(self):
        return {"u": self.u, "mc": self.mc.to_dict(), "asymptotic": self.asymptotic.to_dict(), "ratio": self.ratio}


@dataclass
class ConvergenceStudy:
    rows: list
    trend_ok: Optional[bool]


def convergence_study(problem, u_ladder, policy=None, replicates=10_000, seed=0, berman_values=None, workers=1):
    """MC-to-asymptotic ratios along ``u_ladder``.

    ``trend_ok`` says whether |ratio - 1| is nonincreasing over the last half of
    the ladder (None for a single rung).
    """
    policy = GridPolicy() if policy is None else policy
    us = [float(u) for u in u_ladder]
    if any(b <= a for a, b in zip(us, us[1:])):
        raise InvalidArgumentError(f"u ladder must increase, got {us}")
    rows = []
    for u in us:
        p = problem.with_(u=u)
        try:
            asym = evaluate_asymptotic(p, berman_values)
        except SojournLabError as exc:
            raise type(exc)(f"u = {u}: {exc}") if not hasattr(exc, "label") else exc
        grid = policy.grid_for(p)
        mc = estimate_tail(p, grid, replicates, seed, workers)
        rows.append(ConvergenceRow(u, mc, asym, mc.p_hat / asym.value if asym.value > 0 else math.inf))
    trend = None
    if len(rows) > 1:
        tail = [abs(r.ratio - 1) for r in rows[len(rows) // 2 :]]
        if len(tail) == 1:
            tail = [abs(r.ratio - 1) for r in rows[-2:]]
        trend = all(b <= a for a, b in zip(tail, tail[1:]))
    return ConvergenceStudy(rows, trend)


# ---------------------------------------------------------------------------
# reports


def _records_as_rows(records):
    return [r.row() if hasattr(r, "row") else dict(r) for r in records]


def format_report(records, fmt="csv"):
    """Report text: CSV with a fixed column order, or JSON carrying the schema tag."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in _records_as_rows(records):
            w.writerow([_fmt(row[k]) for k in REPORT_COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        payload = {"schema": SCHEMA, "records": [r.to_dict() if hasattr(r, "to_dict") else r for r in records]}
        return json.dumps(payload, indent=1) + "\n"
    raise InvalidArgumentError(f"unknown report format {fmt!r}; choose csv or json")


def write_report(records, path, fmt="csv"):
    text = format_report(records, fmt)
    path = os.fspath(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % float(v)


def read_report(path, fmt="csv"):
    path = os.fspath(path)
    try:
        with open(path) as fh:
            if fmt == "json":
                data = json.load(fh)
                if data.get("schema") != SCHEMA:
                    raise InvalidArgumentError(f"{path}: unsupported schema {data.get('schema')!r}")
                return data["records"]
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise OSError(f"cannot read report {path}: {exc}") from exc
    ints = {"reps", "seed"}
    return [{k: int(v) if k in ints else float(v) for k, v in row.items()} for row in rows]
