"""Acceptance checks, runnable from the CLI (``validate``) and from pytest."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics as asy
from .berman import (
    BermanSpec,
    PowerField,
    ZeroField,
    berman_hat,
    berman_interval,
    berman_limit,
    line_process_hat_quadrature,
    z_quadrature_weight,
    zstar_weight,
)
from .functions import PowerLog
from .models import (
    BrownianDrift,
    FBm,
    GridSpec,
    LineProcess,
    PathSampler,
    SelfSimilar,
    StationaryIncrements,
    ZeroProcess,
    covariance,
    covariance_matrix,
    simulate,
)
from .montecarlo import estimate_tail_table, wilson_interval
from .rng import substream
from .sojourn import SojournProblem, first_passage, sojourn_time


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.title} ({self.seconds:.1f}s)"


def _close(a, b, tol):
    return abs(a - b) <= tol


# ---------------------------------------------------------------------------


def exact_brownian_law(reps=200_000, seed=20261015):
    """MC sojourn tail of Brownian motion, c=1, u=0, T=30, step 2^-12 versus the closed form."""
    prob = SojournProblem(BrownianDrift(), 1.0, 0.0, 0.0, scaling=1.0)
    grid = GridSpec(30.0, 30 * 2**12)
    checks = []
    for est in estimate_tail_table(prob, grid, [0.0], [0.0, 0.25, 1.0], reps, seed):
        x = est.problem["x"]
        exact = asy.brownian_sojourn_tail_exact(1.0, 0.0, x)
        tol = 3 * est.stderr + 0.02
        checks.append(
            CheckResult(
                f"x={x:g}",
                abs(est.p_hat - exact) <= tol,
                f"p_hat={est.p_hat:.5f} exact={exact:.5f} |diff|={abs(est.p_hat - exact):.5f} tol={tol:.5f}",
            )
        )
    return checks


def levy_factorization(reps=100_000, seed=20261016):
    """p_hat(u=1, x) / p_hat(u=0, x) against e^{-2} on common paths."""
    prob = SojournProblem(BrownianDrift(), 1.0, 0.0, 0.0, scaling=1.0)
    grid = GridSpec(30.0, 30 * 2**12)
    xs = [0.0, 0.5]
    table = estimate_tail_table(prob, grid, [0.0, 1.0], xs, reps, seed)
    checks = []
    for j, x in enumerate(xs):
        p0, p1 = table[j].p_hat, table[len(xs) + j].p_hat
        ratio = p1 / p0
        rel = abs(ratio / math.exp(-2) - 1)
        checks.append(CheckResult(f"x={x:g}", rel <= 0.10, f"ratio={ratio:.5f} e^-2={math.exp(-2):.5f} rel={rel:.4f}"))
    return checks


def special_constant_oracles(reps=20_000, seed=20261017):
    checks = []
    for gamma, beta in ((1.0, 1.0), (0.5, 2.0), (2.0, 0.5)):
        est = berman_interval(BermanSpec(ZeroProcess(), PowerField(gamma, beta), 1.0, (0.0, 4.0), 2.0**-7, 10, 0))
        target = asy.special_constant("zero_power", gamma=gamma, beta=beta, x=1.0)
        checks.append(
            CheckResult(
                f"zero process gamma={gamma:g} beta={beta:g}",
                abs(est.point - target) <= 1e-8 and est.stderr == 0,
                f"estimate={est.point:.12g} closed form={target:.12g} stderr={est.stderr}",
            )
        )
    worst = 0.0
    for gamma in (0.3, 1.0, 2.5):
        for beta in (0.5, 1.0, 2.0):
            for x in (0.5, 1.0, 3.0):
                at = asy.special_constant("zero_halfline", gamma=gamma, beta=beta, x=x, y=x / 2)
                below = asy.special_constant("zero_halfline", gamma=gamma, beta=beta, x=x, y=np.nextafter(x / 2, -1))
                worst = max(worst, abs(at - below))
    checks.append(CheckResult("half-line branch continuity", worst <= 1e-12, f"max jump={worst:.2e}"))
    gamma, x, S = 1.0, 1.0, 50.0
    target = asy.special_constant("hat_B2", gamma=gamma, x=x)
    est = berman_hat(LineProcess(), PowerField(gamma, 2.0), x, S, replicates=reps, seed=seed)
    checks.append(
        CheckResult(
            "line process hat constant",
            abs(est.point - target) <= 3 * est.stderr,
            f"estimate={est.point:.5f}+-{est.stderr:.5f} closed form={target:.5f}",
        )
    )
    quad = line_process_hat_quadrature(gamma, x, S)
    checks.append(CheckResult("line process quadrature", abs(quad - target) <= 1e-6, f"quadrature={quad:.12f} closed form={target:.12f}"))
    return checks


def brownian_berman_constant(reps=20_000, seed=20261018):
    checks = []
    for x in (0.0, 1.0):
        est = berman_limit(BrownianDrift(), x, (8.0, 16.0, 32.0), 2.0**-10, reps, seed)
        target = asy.special_constant("berman_B1", x=x)
        rel = abs(est.point / target - 1)
        rungs = ", ".join(f"S={r.S:g}:{r.point:.4f}" for r in est.ladder)
        checks.append(
            CheckResult(
                f"x={x:g}",
                rel <= 0.10,
                f"extrapolated={est.point:.5f}+-{est.stderr:.5f} closed form={target:.5f} rel={rel:.4f} [{rungs}]",
            )
        )
    return checks


def theta_and_tail_integrals():
    checks = []
    v = asy.theta_integral(1.0, 0.0, math.inf)
    checks.append(CheckResult("beta=1 on [0,inf)", abs(v - 1) <= 1e-10, f"value={v!r}"))
    v = asy.theta_integral(2.0, -math.inf, math.inf)
    checks.append(CheckResult("beta=2 on R", abs(v - math.sqrt(math.pi)) <= 1e-10, f"value={v!r}"))
    for beta, a2 in ((2.0, math.inf), (1.5, 0.3), (0.7, 2.0)):
        r = asy.rv_tail_integral(1.3, PowerLog(1.0, beta), 10.0, 1.0, a2)
        ratio = r.numeric / r.asymptotic
        checks.append(CheckResult(f"pure power beta={beta:g} a2={a2:g}", abs(ratio - 1) <= 1e-6, f"ratio={ratio!r}"))
    return checks


def infinite_horizon_vs_exact_law():
    ratios = {}
    for u in (2.0, 4.0, 6.0, 8.0):
        res = asy.evaluate_asymptotic(SojournProblem(BrownianDrift(), 1.0, u, 0.0))
        ratios[u] = asy.brownian_sojourn_tail_exact(1.0, u, 0.0) / res.value
    detail = " ".join(f"u={u:g}:{r:.5f}" for u, r in ratios.items())
    gaps = [abs(ratios[u] - 1) for u in (4.0, 6.0, 8.0)]
    return [
        CheckResult("ratio at u=8 in [0.7, 1.3]", 0.7 <= ratios[8.0] <= 1.3, detail),
        CheckResult("|ratio-1| nonincreasing on u=4..8", all(b <= a for a, b in zip(gaps, gaps[1:])), detail),
    ]


def finite_horizon_consistency():
    checks = []
    for H in (0.6, 0.7, 0.8):
        worst = 0.0
        for u, x, c, T in ((5.0, 1.0, 0.0, 1.0), (3.0, 0.5, 1.0, 2.0), (10.0, 2.0, 0.5, 0.5)):
            p = SojournProblem(FBm(H), c, u, x, T)
            a = asy.evaluate_asymptotic(p, regime="stationary-finite")
            b = asy.evaluate_asymptotic(p, regime="selfsimilar-finite")
            assert a.regime.endswith(":iii") and b.regime.endswith(":iii")
            worst = max(worst, abs(a.value / b.value - 1))
        checks.append(CheckResult(f"H={H:g}", worst <= 1e-12, f"max relative difference={worst:.2e}"))
    return checks


# ---------------------------------------------------------------------------
# property suite


def _prop_sojourn(rng_seed, n_paths):
    bad = 0
    grid = GridSpec(8.0, 2048)
    for r in range(n_paths):
        path = simulate(FBm(0.3 + 0.4 * (r % 3) / 2), grid, rng_seed, r)
        levels = np.sort(substream(rng_seed + 1, r).normal(size=5))
        times = [sojourn_time(path, 0.5, u) for u in levels]
        bad += any(b > a for a, b in zip(times, times[1:]))
        bad += sojourn_time(path, 0.5, levels[0], (0.0, 4.0)) > sojourn_time(path, 0.5, levels[0])
    return CheckResult("sojourn nonincreasing in u and monotone in the window", bad == 0, f"violations={bad}/{2 * n_paths}")


def _prop_passage(rng_seed, n_paths):
    bad_lower, bad_mono = 0, 0
    grid = GridSpec(8.0, 2048)
    for r in range(n_paths):
        path = simulate(BrownianDrift(), grid, rng_seed, r)
        v = 0.5 + r % 4
        xs = np.sort(substream(rng_seed + 2, r).uniform(0, 2, size=4))
        taus = [first_passage(path, 0.2, -0.5, x, v, grid.horizon).tau for x in xs]
        bad_lower += sum(t < x / v for t, x in zip(taus, xs))
        bad_mono += any(b < a for a, b in zip(taus, taus[1:]))
    return [
        CheckResult("tau(x) >= x/v", bad_lower == 0, f"violations={bad_lower}"),
        CheckResult("tau(x) nondecreasing in x", bad_mono == 0, f"violations={bad_mono}"),
    ]


def _property_models():
    return [
        BrownianDrift(),
        FBm(0.2),
        FBm(0.8),
        StationaryIncrements(PowerLog(1.0, 0.9, 1.0)),
        SelfSimilar(0.3, 0.6),
        SelfSimilar(0.7, 1.4, family="subfractional"),
        SelfSimilar(0.4, 0.8, family="bifractional", k=0.9),
        LineProcess(),
    ]


def _prop_covariance():
    checks = []
    times = np.linspace(0.05, 5.0, 60)
    worst_psd = 0.0
    for m in _property_models():
        cov = covariance_matrix(m, times)
        eig = np.linalg.eigvalsh(cov)
        worst_psd = min(worst_psd, eig.min() / eig.max())
    checks.append(CheckResult("covariance PSD", worst_psd >= -1e-10, f"min relative eigenvalue={worst_psd:.2e}"))
    worst = 0.0
    s, t = np.meshgrid(np.linspace(0.1, 3, 12), np.linspace(0.1, 3, 12))
    for m in _property_models()[4:7]:
        for b in (0.3, 2.0, 7.5):
            lhs = covariance(m, b * s, b * t)
            rhs = b ** (2 * m.hurst) * covariance(m, s, t)
            worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300))))
    checks.append(CheckResult("self-similar covariance scaling", worst <= 1e-10, f"max relative error={worst:.2e}"))
    worst = 0.0
    for m in _property_models()[:4]:
        var_inc = m.sigma2(t) + m.sigma2(s) - 2 * covariance(m, s, t)
        worst = max(worst, float(np.max(np.abs(var_inc - m.sigma2(np.abs(t - s))))))
    checks.append(CheckResult("stationary-increment identity", worst <= 1e-12, f"max error={worst:.2e}"))
    return checks


def _prop_zstar(rng_seed, n_paths=100):
    worst = 0.0
    step = 2.0**-6
    sampler = PathSampler(FBm(0.6), step, 0, 256)
    drift = sampler.times ** 1.2
    for r in range(n_paths):
        m = math.sqrt(2) * sampler.sample(substream(rng_seed, r)) - drift
        x = (r % 10) * 0.3
        w = zstar_weight(m, step, x)
        q = z_quadrature_weight(m, step, x)
        worst = max(worst, abs(q - w) / max(w, 1e-12))
    return CheckResult("zstar weight equals z quadrature on 100 paths", worst <= 1e-3, f"max relative error={worst:.2e}")


def _prop_berman_x(rng_seed, reps):
    xs = np.round(np.arange(0.0, 1.0001, 0.05), 10)
    ests = [berman_interval(BermanSpec(FBm(0.7), ZeroField(), x, (0.0, 4.0), 2.0**-7, reps, rng_seed)) for x in xs]
    bad_mono, bad_cont = 0, 0
    for e1, e2 in zip(ests, ests[1:]):
        comb = math.hypot(e1.stderr, e2.stderr)
        bad_mono += e2.point > e1.point + 3 * comb
        bad_cont += abs(e2.point - e1.point) > 5 * (max(e1.stderr, e2.stderr) + 0.1)
    vals = " ".join(f"{e.point:.3f}" for e in ests[::5])
    return [
        CheckResult("Berman estimate nonincreasing in x", bad_mono == 0, f"violations={bad_mono} values={vals}"),
        CheckResult("Berman estimate continuous in x", bad_cont == 0, f"jumps={bad_cont}"),
    ]


def _prop_wilson(rng_seed, runs=100, n=1000, p=0.1):
    covered = 0
    for r in range(runs):
        hits = int(substream(rng_seed, r).binomial(n, p))
        lo, hi = wilson_interval(hits, n)
        covered += lo <= p <= hi
    return CheckResult("Wilson interval coverage >= 93/100", covered >= 93, f"covered={covered}/{runs}")


def property_suite(fast=True, seed=20261019):
    n = 40 if fast else 200
    checks = [_prop_sojourn(seed, n)]
    checks += _prop_passage(seed, n)
    checks += _prop_covariance()
    checks.append(_prop_zstar(seed))
    checks += _prop_berman_x(seed, 400 if fast else 4000)
    checks.append(_prop_wilson(seed))
    return checks


# ---------------------------------------------------------------------------

CRITERIA = {
    1: ("exact Brownian sojourn law", exact_brownian_law),
    2: ("Levy factorization e^{-2u}", levy_factorization),
    3: ("closed-form Berman constants", special_constant_oracles),
    4: ("Brownian Berman constant from the S ladder", brownian_berman_constant),
    5: ("theta integral and regularly varying tail integral", theta_and_tail_integrals),
    6: ("infinite-horizon asymptotic versus exact Brownian law", infinite_horizon_vs_exact_law),
    7: ("finite-horizon stationary and self-similar case iii agree", finite_horizon_consistency),
    8: ("property suites", None),
}

SUITES = {
    "all": tuple(CRITERIA),
    "exact": (1, 2),
    "berman": (3, 4),
    "analytic": (5, 6, 7),
    "properties": (8,),
}


def run_criterion(number, fast=True):
    title, fn = CRITERIA[number]
    start = time.perf_counter()
    checks = property_suite(fast) if number == 8 else fn()
    return CriterionResult(number, title, checks, time.perf_counter() - start)


def run_suite(suite="all", fast=True, report=print):
    if suite in SUITES:
        numbers = SUITES[suite]
    else:
        try:
            numbers = tuple(int(s) for s in str(suite).split(","))
        except ValueError:
            numbers = ()
        if not numbers or any(n not in CRITERIA for n in numbers):
            raise ValueError(f"unknown suite {suite!r}; choose {sorted(SUITES)} or criterion numbers 1-8")
    results = []
    for n in numbers:
        res = run_criterion(n, fast)
        results.append(res)
        if report is not None:
            report(res.line())
            for c in res.checks:
                report(f"    {'ok ' if c.passed else 'BAD'} {c.name}: {c.detail}")
    return results
