import json
import math

import numpy as np
import pytest
from scipy.stats import norm

from sojourn_lab import asymptotics as asy
from sojourn_lab.errors import (
    DegenerateConditioningError,
    InvalidArgumentError,
    MissingScalingError,
)
from sojourn_lab.models import BrownianDrift, FBm, GridSpec
from sojourn_lab.montecarlo import (
    REPORT_COLUMNS,
    GridPolicy,
    estimate_passage_law,
    estimate_tail,
    estimate_tail_table,
    convergence_study,
    format_report,
    read_report,
    reachable_gap,
    truncation_horizon,
    wilson_interval,
    write_report,
)
from sojourn_lab.sojourn import SojournProblem

BM = BrownianDrift()


def _close(a, b, k=4.0, margin=0.0):
    return abs(a.p_hat - b.p_hat) <= k * math.hypot(a.stderr, b.stderr) + margin


def test_wilson_interval_formula():
    z = norm.ppf(0.975)
    for hits, n in ((0, 100), (50, 100), (7, 40), (40, 40)):
        p = hits / n
        centre = (p + z * z / (2 * n)) / (1 + z * z / n)
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
        lo, hi = wilson_interval(hits, n)
        assert lo == pytest.approx(max(0.0, centre - half), abs=1e-12)
        assert hi == pytest.approx(min(1.0, centre + half), abs=1e-12)


def test_wilson_coverage():
    rng = np.random.default_rng(1)
    covered = 0
    for _ in range(400):
        hits = rng.binomial(1000, 0.1)
        lo, hi = wilson_interval(hits, 1000)
        covered += lo <= 0.1 <= hi
    assert covered / 400 >= 0.93


def test_exact_law_example_small():
    problem = SojournProblem(BM, 1.0, 0.0, 0.25, scaling=1.0)
    est = estimate_tail(problem, GridSpec(30.0, 30 * 2**12), 4000, 31)
    exact = asy.brownian_sojourn_tail_exact(1, 0, 0.25)
    assert est.method == "bridge"
    assert abs(est.p_hat - exact) <= 3 * est.stderr + 0.02
    assert est.ci_lo <= est.p_hat <= est.ci_hi and est.hits <= est.replicates


def test_bridge_crossing_is_unbiased_at_x_zero():
    # with x = 0 the event is sup (W(t) - t) > u, whose probability is e^{-2u} exactly
    problem = SojournProblem(BM, 1.0, 0.0, 0.0, scaling=1.0)
    table = estimate_tail_table(problem, GridSpec(30.0, 30 * 256), [0.0, 0.5, 1.0], [0.0], 8000, 17)
    assert table[0].p_hat == 1.0
    for est in table[1:]:
        assert abs(est.p_hat - math.exp(-2 * est.problem["u"])) <= 4 * est.stderr


def test_bridge_agrees_with_dense_paths():
    problem = SojournProblem(BM, 1.0, 0.5, 0.5, 4.0, scaling=1.0)
    grid = GridSpec(4.0, 1024)
    bridge = estimate_tail(problem, grid, 4000, 2, method="bridge")
    dense = estimate_tail(problem, grid, 4000, 3, method="dense")
    assert _close(bridge, dense)
    with pytest.raises(InvalidArgumentError):
        estimate_tail(problem.with_(model=FBm(0.3)), grid, 200, 1, method="bridge")
    with pytest.raises(InvalidArgumentError):
        estimate_tail(problem, GridSpec(4.0, 1000), 200, 1, method="bridge")


def test_trivial_events():
    impossible = SojournProblem(FBm(0.3), 0.0, 0.0, 2.0, 2.0, scaling=1.0)
    assert estimate_tail(impossible, GridSpec(2.0, 256), 200, 1).p_hat == 0.0
    certain = SojournProblem(FBm(0.3), 0.0, -1e6, 1.5, 2.0, scaling=1.0)
    est = estimate_tail(certain, GridSpec(2.0, 256), 200, 1)
    assert est.p_hat == 1.0 and est.stderr == 0.0 and est.ci_hi == 1.0


def test_argument_checks():
    problem = SojournProblem(BM, 1.0, 0.0, 0.5, 2.0, scaling=1.0)
    with pytest.raises(InvalidArgumentError, match="100"):
        estimate_tail(problem, GridSpec(2.0, 128), 99, 1)
    with pytest.raises(InvalidArgumentError, match="horizon"):
        estimate_tail(problem, GridSpec(3.0, 128), 200, 1)
    with pytest.raises(InvalidArgumentError):
        estimate_tail(problem, GridSpec(2.0, 128), 200, 1, method="fancy")


def test_missing_scaling():
    problem = SojournProblem(BM, 1.0, 0.0, 0.5)
    with pytest.raises(MissingScalingError, match="u=0"):
        estimate_tail(problem, GridSpec(8.0, 512), 200, 1)


def test_determinism_and_workers():
    problem = SojournProblem(FBm(0.7), 0.5, 0.5, 0.2, 2.0, scaling=1.0)
    grid = GridSpec(2.0, 256)
    a = estimate_tail(problem, grid, 300, 5)
    b = estimate_tail(problem, grid, 300, 5)
    c = estimate_tail(problem, grid, 300, 5, workers=2)
    assert a.to_dict() == b.to_dict() == c.to_dict()
    assert estimate_tail(problem, grid, 300, 6).to_dict() != a.to_dict()


def test_table_is_pathwise_monotone():
    problem = SojournProblem(BM, 1.0, 0.0, 0.0, 4.0, scaling=1.0)
    us, xs = [0.0, 0.5, 1.0], [0.0, 0.3, 0.9]
    table = estimate_tail_table(problem, GridSpec(4.0, 512), us, xs, 500, 8)
    hits = np.array([e.hits for e in table]).reshape(3, 3)
    assert np.all(np.diff(hits, axis=0) <= 0) and np.all(np.diff(hits, axis=1) <= 0)
    assert [(e.problem["u"], e.problem["x"]) for e in table[:2]] == [(0.0, 0.0), (0.0, 0.3)]


def test_truncation_horizon_and_censoring():
    problem = SojournProblem(BM, 1.0, 1.0, 0.5, scaling=1.0)
    assert truncation_horizon(problem) == pytest.approx(30.0)
    assert truncation_horizon(problem.with_(u=20.0)) == pytest.approx(100.0)
    grid = GridPolicy(step=2.0**-8).grid_for(problem)
    assert grid.steps % 64 == 0 and grid.horizon >= 30.0
    short = estimate_tail(problem, GridPolicy(step=2.0**-8, K=5).grid_for(problem), 3000, 4)
    long = estimate_tail(problem, GridPolicy(step=2.0**-8, K=10).grid_for(problem), 3000, 5)
    assert _close(short, long, k=3.0)
    assert short.censored_fraction <= 0.01
    assert truncation_horizon(SojournProblem(FBm(0.7), 1.0, 10.0, 0.5)) == pytest.approx(5 * 10 * 7 / 3)


@pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
def test_reachable_gap_brownian(c):
    # min_s (d + cs) / sqrt(s) = 2 sqrt(cd), so a 3-sigma reach closes d = 9 / (4c)
    assert reachable_gap(BM, c) == pytest.approx(9 / (4 * c), rel=1e-4)
    assert reachable_gap(BM, c, z=2.0) == pytest.approx(1 / c, rel=1e-4)


def test_fbm_truncation_is_not_flagged_as_censored():
    problem = SojournProblem(FBm(0.7), 1.0, 1.0, 0.5, scaling=1.0)
    est = estimate_tail(problem, GridPolicy(step=2.0**-6).grid_for(problem), 500, 3)
    assert est.censored_fraction <= 0.01


def test_censoring_warning():
    problem = SojournProblem(BM, 1.0, 1.0, 0.1, scaling=1.0)
    with pytest.warns(RuntimeWarning, match="truncation"):
        est = estimate_tail(problem, GridSpec(0.5, 128), 500, 1)
    assert est.censored_fraction > 0.01


def _ig_cdf(t, u):
    # first passage of W(t) + t to level u; this is the conditional law given passage
    t = np.maximum(np.asarray(t, float), 1e-300)
    return norm.cdf((t - u) / np.sqrt(t)) + np.exp(2 * u) * norm.cdf(-(t + u) / np.sqrt(t))


def test_passage_law_against_exact_conditional_law():
    u = 1.0
    problem = SojournProblem(BM, 1.0, u, 0.0)
    grid = GridSpec(30.0, 30 * 256)
    law = estimate_passage_law(problem, 0.0, 0.0, grid, 10_000, 21)
    assert law.kind == "infinite" and law.atom == 0.0
    assert abs(law.acceptance_rate - math.exp(-2 * u)) <= 4 * math.sqrt(math.exp(-2) / 10_000) + 0.01
    regime = asy.passage_regime(problem)
    oracle = lambda y: float(_ig_cdf(u * regime.t_u + regime.A_u * y, u)) if math.isfinite(y) else float(y > 0)
    # the grid detects passages late by about one overshoot, 0.58 sqrt(step)
    assert law.ks_distance(oracle) <= 1.63 / math.sqrt(law.accepted) + 0.03


def test_exact_conditional_law_approaches_normal_limit():
    y = np.linspace(-6, 10, 40001)
    gaps = []
    for u in (2.0, 4.0, 16.0):
        law = _ig_cdf(u + math.sqrt(u) * y, u)
        gaps.append(np.max(np.abs(law - norm.cdf(y))))
    assert gaps[0] > 0.1 and gaps[1] <= 0.1 and gaps[2] < gaps[1]


def test_passage_atom_matches_constant_ratio():
    problem = SojournProblem(BM, 1.0, 0.5, 0.0)
    law = estimate_passage_law(problem, 0.0, 1.0, GridSpec(30.0, 30 * 128), 3000, 22)
    ratio = asy.special_constant("berman_B1", x=1.0) / asy.special_constant("berman_B1", x=0.0)
    assert abs(law.atom - (1 - ratio)) <= 3 * law.atom_stderr + 0.05
    assert np.sum(np.isinf(law.values)) == round(law.atom * law.accepted)


def test_finite_horizon_passage_survival_monotone():
    problem = SojournProblem(BM, 0.0, 1.0, 0.0, 1.0)
    law = estimate_passage_law(problem, 0.0, 0.05, GridSpec(1.0, 512), 2000, 23)
    assert law.kind == "finite"
    ys = np.linspace(-1, 20, 50)
    surv = [law.survival(y) for y in ys]
    assert all(b <= a for a, b in zip(surv, surv[1:]))
    assert 0 < law.acceptance_rate < 1


def test_passage_errors():
    problem = SojournProblem(BM, 1.0, 40.0, 0.0)
    with pytest.raises(DegenerateConditioningError):
        estimate_passage_law(problem, 0.0, 0.0, GridSpec(8.0, 256), 100, 1)
    with pytest.raises(InvalidArgumentError):
        estimate_passage_law(problem, 1.0, 0.5, GridSpec(8.0, 256), 100, 1)


def test_convergence_study_brownian():
    problem = SojournProblem(BM, 1.0, 0.5, 0.0)
    study = convergence_study(problem, [0.5, 1.0, 1.5], GridPolicy(step=2.0**-8), 3000, 9)
    assert [r.u for r in study.rows] == [0.5, 1.0, 1.5]
    for row in study.rows:
        assert row.ratio == pytest.approx(row.mc.p_hat / row.asymptotic.value)
        exact = math.exp(-2 * row.u)
        assert abs(row.mc.p_hat - exact) <= 4 * row.mc.stderr + 0.01
    assert study.trend_ok in (True, False)
    single = convergence_study(problem, [1.0], GridPolicy(step=2.0**-8), 200, 9)
    assert len(single.rows) == 1 and single.trend_ok is None
    with pytest.raises(InvalidArgumentError):
        convergence_study(problem, [1.0, 0.5], replicates=200)


def test_convergence_study_names_failing_u():
    problem = SojournProblem(BM, 1.0, 1.0, 0.0)
    with pytest.raises(InvalidArgumentError, match="u = 0"):
        convergence_study(problem, [0.0, 1.0], replicates=200)


def test_reports_round_trip(tmp_path):
    problem = SojournProblem(FBm(0.6), 0.5, 0.3, 0.1, 1.0, scaling=1.0)
    records = estimate_tail_table(problem, GridSpec(1.0, 128), [0.1, 0.3], [0.1], 200, 3)
    path = tmp_path / "r.csv"
    write_report(records, path, "csv")
    assert path.read_text().splitlines()[0] == ",".join(REPORT_COLUMNS)
    rows = read_report(path, "csv")
    assert rows == [r.row() for r in records]
    jpath = tmp_path / "r.json"
    write_report(records, jpath, "json")
    assert json.loads(jpath.read_text())["schema"] == "sojourn-lab/1"
    assert read_report(jpath, "json")[1]["hits"] == records[1].hits
    assert format_report([], "csv") == ",".join(REPORT_COLUMNS) + "\n"
    assert json.loads(format_report([], "json"))["records"] == []
    with pytest.raises(InvalidArgumentError):
        format_report(records, "xml")
    jpath.write_text(json.dumps({"schema": "other", "records": []}))
    with pytest.raises(InvalidArgumentError):
        read_report(jpath, "json")
