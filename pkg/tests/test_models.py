import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sojourn_lab.errors import InvalidArgumentError, SimulationFailure
from sojourn_lab.functions import CustomFunction, PowerLog, integrated_sigma2, sqrt_of
from sojourn_lab.models import (
    BrownianDrift,
    FBm,
    GridSpec,
    LineProcess,
    PathSampler,
    SelfSimilar,
    StationaryIncrements,
    ZeroProcess,
    _jittered_cholesky,
    build_grid,
    covariance,
    covariance_matrix,
    drift_adjust,
    parse_model,
    simulate,
    variance,
)
from sojourn_lab.rng import chunk_ranges, default_seed, substream

hursts = st.floats(0.05, 0.95)


def models():
    return st.one_of(
        st.just(BrownianDrift()),
        hursts.map(FBm),
        st.floats(0.1, 1.9).map(lambda p: StationaryIncrements(PowerLog(1.0, p))),
        hursts.map(lambda h: SelfSimilar(h, 2 * h)),
        hursts.map(lambda h: SelfSimilar(h, 2 * h, family="subfractional")),
        st.just(LineProcess()),
    )


def test_grid_validation():
    g = build_grid(2.0, 8)
    assert g.step == 0.25 and g.times[-1] == 2.0 and len(g.times) == 9
    for bad in ((0.0, 8), (math.inf, 8), (1.0, 1), (1.0, 2.5)):
        with pytest.raises(InvalidArgumentError):
            GridSpec(*bad)


def test_parse_model_labels_round_trip():
    for text in ("brownian", "fbm:0.3", "power-sigma2:1.4", "selfsim:0.7,1.4", "line", "zero"):
        assert parse_model(text).label() == text
    for bad in ("fbm:2", "fbm:x", "selfsim:0.5", "ou:1", "brownian:1"):
        with pytest.raises(InvalidArgumentError):
            parse_model(bad)


def test_brownian_covariance_is_min():
    s, t = np.meshgrid([0.5, 1, 3], [0.2, 2, 5])
    assert np.allclose(covariance(BrownianDrift(), s, t), np.minimum(s, t))
    assert variance(FBm(0.3), 2.0) == pytest.approx(2.0**0.6)
    with pytest.raises(InvalidArgumentError):
        covariance(BrownianDrift(), -1.0, 1.0)


@given(models())
def test_covariance_psd(model):
    cov = covariance_matrix(model, np.linspace(0.1, 4.0, 25))
    eig = np.linalg.eigvalsh(cov)
    assert eig.min() >= -1e-10 * max(eig.max(), 1.0)


@given(hursts, st.floats(0.1, 10.0), st.sampled_from(["fbm", "subfractional", "bifractional"]))
def test_self_similar_scaling(h, b, family):
    model = SelfSimilar(h, 2 * h, family=family, k=0.99 if family == "bifractional" else 1.0)
    s, t = np.meshgrid(np.linspace(0.1, 2, 6), np.linspace(0.1, 2, 6))
    assert np.allclose(covariance(model, b * s, b * t), b ** (2 * h) * covariance(model, s, t), rtol=1e-10)
    assert covariance(model, 1.0, 1.0) == pytest.approx(1.0)


@given(st.one_of(hursts.map(FBm), st.floats(0.1, 1.9).map(lambda p: StationaryIncrements(PowerLog(1.0, p, 1.0)))))
def test_stationary_increment_identity(model):
    s, t = np.meshgrid(np.linspace(0.0, 3, 7), np.linspace(0.0, 3, 7))
    inc = model.sigma2(t) + model.sigma2(s) - 2 * covariance(model, s, t)
    assert np.allclose(inc, model.sigma2(np.abs(t - s)), atol=1e-12)


def test_power_log_descriptor():
    f = PowerLog(2.0, 1.4)
    assert f(0.0) == 0.0 and f.exact_inverse(f(0.7)) == pytest.approx(0.7)
    assert f.derivative(0.5) == pytest.approx((f(0.5 + 1e-7) - f(0.5 - 1e-7)) / 2e-7, rel=1e-6)
    assert f.limit_at_zero(1.0) == 0.0 and f.limit_at_zero(2.0) == math.inf and f.limit_at_zero(1.4) == 2.0
    g = PowerLog(1.0, 1.0, 1.0)
    assert g.limit_at_zero(1.0) == math.inf and g.limit_at_infinity(1.0) == 1.0
    assert g.exact_inverse(1.0) is None
    assert g.derivative(0.3) == pytest.approx((g(0.3 + 1e-7) - g(0.3 - 1e-7)) / 2e-7, rel=1e-6)
    s = sqrt_of(PowerLog(1.0, 1.0))
    assert s.exact_inverse(0.5) == pytest.approx(0.25)


def test_custom_and_integrated_descriptors():
    f = CustomFunction(lambda t: t**1.5, 1.5, 1.5, coefficient_at_zero=1.0)
    assert f.derivative(1.0) == pytest.approx(1.5, rel=1e-6)
    assert f.limit_at_zero(1.5) == 1.0
    # X = int Z for an exponentially correlated Z: sigma^2(t) = 2(t - 1 + e^-t)
    s2 = integrated_sigma2(lambda v: math.exp(-v), 1.0, 2.0)
    assert s2(1.5) == pytest.approx(2 * (1.5 - 1 + math.exp(-1.5)), rel=1e-10)
    assert s2.index_at_zero == 2.0 and s2.limit_at_zero(2.0) == 1.0


@pytest.mark.parametrize("model", [BrownianDrift(), FBm(0.25), FBm(0.75), StationaryIncrements(PowerLog(1.0, 0.8, 1.0))])
def test_sampler_variance(model):
    grid = GridSpec(2.0, 64)
    sampler = PathSampler.for_grid(model, grid)
    paths = np.array([sampler.sample(substream(5, r)) for r in range(4000)])
    assert np.all(paths[:, 0] == 0)
    for k in (16, 64):
        assert paths[:, k].var() == pytest.approx(float(model.sigma2(grid.times[k])), rel=0.08)
    inc = paths[:, 40] - paths[:, 24]
    assert inc.var() == pytest.approx(float(model.sigma2(0.5)), rel=0.08)


def test_two_sided_window_is_anchored_at_zero():
    sampler = PathSampler(FBm(0.3), 0.125, -8, 17)
    path = sampler.sample(substream(1, 0))
    assert path[8] == 0.0
    vals = np.array([sampler.sample(substream(2, r))[0] for r in range(3000)])
    assert vals.var() == pytest.approx(1.0, rel=0.08)


def test_self_similar_uses_dense_factorization():
    sampler = PathSampler.for_grid(SelfSimilar(0.6, 1.2, family="subfractional"), GridSpec(1.0, 32))
    assert sampler.method == "cholesky"
    vals = np.array([sampler.sample(substream(3, r))[-1] for r in range(3000)])
    assert vals.var() == pytest.approx(1.0, rel=0.08)


def test_line_and_zero_processes():
    g = GridSpec(1.0, 4)
    p = simulate(LineProcess(), g, 9)
    assert np.allclose(p.values, g.times * p.values[-1])
    assert np.all(simulate(ZeroProcess(), g, 9).values == 0)
    assert np.allclose(drift_adjust(simulate(ZeroProcess(), g, 9), 2.0), -2 * g.times)


def test_simulate_is_deterministic():
    g = GridSpec(1.0, 128)
    a, b = simulate(FBm(0.7), g, 11, 3), simulate(FBm(0.7), g, 11, 3)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, simulate(FBm(0.7), g, 11, 4).values)


def test_cholesky_failure_names_min_eigenvalue():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(SimulationFailure, match="min eigenvalue"):
        _jittered_cholesky(bad)


def test_rng_helpers(monkeypatch):
    assert chunk_ranges(10, 3) == [(0, 3), (3, 6), (6, 10)]
    assert chunk_ranges(2, 5) == [(0, 1), (1, 2)]
    monkeypatch.setenv("SOJOURN_LAB_SEED", "42")
    assert default_seed() == 42
    monkeypatch.delenv("SOJOURN_LAB_SEED")
    assert default_seed(7) == 7
    assert substream(1, 2).random() == substream(1, 2).random()
