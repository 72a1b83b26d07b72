"""Closed forms and exact asymptotics for sojourn-time tails.

Regime tags used throughout:

* ``stationary-infinite``          stationary increments, T = inf, c > 0
* ``stationary-finite:{i,ii,iii}`` stationary increments, T < inf
* ``selfsimilar-infinite:{i,ii,iii}``
* ``selfsimilar-finite:{i,ii,iii}``

Cases i/ii/iii follow the local behaviour at zero of sigma^2 (or rho):
slower than linear, exactly linear, faster than linear (or, for the
infinite-horizon self-similar regime, rho versus t^2).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import integrate, optimize, special

from .errors import (
    BracketError,
    InvalidArgumentError,
    MissingConstantError,
    NoSolutionError,
    NumericFailure,
    UnsupportedRegimeError,
)
from .functions import PowerLog, sqrt_of
from .models import BrownianDrift, FBm, SelfSimilar, StationaryIncrements

# short numeric names accepted in place of the regime tags
REGIME_ALIASES = {
    "3.1": "stationary-infinite",
    "3.4": "stationary-finite",
    "3.6": "selfsimilar-infinite",
    "3.7": "selfsimilar-finite",
}
REGIMES = ("stationary-infinite", "stationary-finite", "selfsimilar-infinite", "selfsimilar-finite")

_SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# elementary pieces


def normal_tail(z):
    """Psi(z) = P(N > z)."""
    z = float(z)
    if math.isnan(z):
        raise InvalidArgumentError("normal_tail got NaN")
    return float(special.ndtr(-z))


def log_normal_tail(z):
    """log Psi(z); stays accurate where Psi(z) underflows to subnormals."""
    z = float(z)
    if math.isnan(z):
        raise InvalidArgumentError("log_normal_tail got NaN")
    return float(special.log_ndtr(-z))


def brownian_sojourn_tail_exact(c, u, x):
    """P{int_0^inf 1(B(t) - c t > u) dt > x} for standard Brownian motion."""
    if not c > 0:
        raise InvalidArgumentError(f"exact Brownian law needs c > 0, got {c}")
    if u < 0 or x < 0:
        raise InvalidArgumentError(f"exact Brownian law needs u >= 0 and x >= 0, got u={u}, x={x}")
    base = 2.0 * (1.0 + c * c * x) * normal_tail(c * math.sqrt(x)) - c * math.sqrt(
        2.0 * x / math.pi
    ) * math.exp(-c * c * x / 2.0)
    return max(base, 0.0) * math.exp(-2.0 * c * u)


@dataclass(frozen=True)
class LevyExponent:
    """Laplace exponent psi of a spectrally negative Levy process and psi'(0+)."""

    psi: Callable[[float], float]
    mean: float


def levy_alpha(exponent, c):
    """Unique positive root of psi(a) = c a, given psi'(0+) < c."""
    if not exponent.mean < c:
        raise NoSolutionError(
            f"psi(a) = c a has no positive root: psi'(0+) = {exponent.mean} is not below c = {c}"
        )

    def f(a):
        return exponent.psi(a) - c * a

    hi = 1.0
    for _ in range(2000):
        if f(hi) > 0:
            break
        hi *= 2.0
    else:
        raise NoSolutionError("could not bracket the root of psi(a) = c a")
    lo = hi
    for _ in range(2000):
        lo /= 2.0
        if f(lo) < 0:
            break
    else:
        raise NoSolutionError("could not find a point with psi(a) < c a")
    return float(optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))


def levy_factorized_tail(alpha, u, base_tail_at_zero):
    if math.isinf(u):
        return 0.0
    return math.exp(-alpha * u) * base_tail_at_zero


def special_constant(kind, *, x, gamma=None, beta=None, y=None):
    """Berman-type constants available in closed form.

    ``zero_power``     zero process, drift gamma t^beta on [0, inf)
    ``zero_halfline``  zero process, drift gamma |t|^beta on (-inf, y]
    ``hat_B2``         line process, drift gamma t^2 on the whole line
    ``berman_B1``      Brownian motion, no drift, normalized limit
    """
    if not x >= 0:
        raise InvalidArgumentError(f"x must be >= 0, got {x}")
    if kind in ("zero_power", "zero_halfline", "hat_B2") and not (gamma is not None and gamma > 0):
        raise InvalidArgumentError(f"{kind} needs gamma > 0")
    if kind in ("zero_power", "zero_halfline") and not (beta is not None and beta > 0):
        raise InvalidArgumentError(f"{kind} needs beta > 0")
    if kind == "zero_power":
        return math.exp(-gamma * x**beta)
    if kind == "zero_halfline":
        if y is None or math.isnan(y):
            raise InvalidArgumentError("zero_halfline needs the right endpoint y")
        if y < x / 2:
            return math.exp(-gamma * (x - y) ** beta)
        return math.exp(-gamma * 2.0 ** (-beta) * x**beta)
    if kind == "hat_B2":
        return math.sqrt((1.0 + gamma) / gamma) * math.exp(-(1.0 + gamma) * x * x / 4.0)
    if kind == "berman_B1":
        return (2.0 + x) * normal_tail(math.sqrt(x / 2.0)) - math.sqrt(x / math.pi) * math.exp(-x / 4.0)
    raise InvalidArgumentError(f"unknown special constant {kind!r}")


def theta_integral(beta, y1, y2):
    """beta^-1 int_{y1}^{y2} |t|^{1/beta - 1} e^{-|t|} dt.

    With s = |t|^{1/beta} each half becomes int e^{-s^beta} ds, which has no
    endpoint singularity.
    """
    if not beta > 0:
        raise InvalidArgumentError(f"beta must be positive, got {beta}")
    if y1 > y2:
        raise InvalidArgumentError(f"theta_integral needs y1 <= y2, got [{y1}, {y2}]")

    def half(y):
        if y == 0:
            return 0.0
        top = math.inf if math.isinf(y) else abs(y) ** (1.0 / beta)
        val, err = integrate.quad(lambda s: math.exp(-(s**beta)), 0.0, top, epsabs=1e-13, epsrel=1e-13, limit=200)
        if err > 1e-10:
            raise NumericFailure(f"theta_integral quadrature error {err:.2e}")
        return math.copysign(val, y)

    return half(y2) - half(y1)


def asymptotic_inverse(f, y, bracket=None):
    """t with f(t) = y for increasing f; closed form for pure powers."""
    y = float(y)
    if not y > 0:
        raise InvalidArgumentError(f"asymptotic_inverse needs y > 0, got {y}")
    exact = getattr(f, "exact_inverse", None)
    if exact is not None:
        t = exact(y)
        if t is not None:
            return float(t)

    def g(t):
        return float(f(t)) - y

    if bracket is None:
        lo, hi = 1.0, 1.0
        for _ in range(1100):
            if g(lo) <= 0:
                break
            lo /= 2.0
        for _ in range(1100):
            if g(hi) >= 0:
                break
            hi *= 2.0
    else:
        lo, hi = map(float, bracket)
    glo, ghi = g(lo), g(hi)
    if not (glo <= 0 <= ghi):
        raise BracketError(f"bracket [{lo}, {hi}] does not straddle y={y} (f-y: {glo:.3e}, {ghi:.3e})")
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    return float(optimize.brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000))


# ---------------------------------------------------------------------------
# geometry


def sigma2_descriptor(model):
    if isinstance(model, BrownianDrift):
        return PowerLog(1.0, 1.0)
    if isinstance(model, FBm):
        return PowerLog(1.0, 2 * model.hurst)
    if isinstance(model, StationaryIncrements):
        return model.sigma2_descriptor
    if isinstance(model, SelfSimilar):
        return PowerLog(1.0, 2 * model.hurst)
    raise UnsupportedRegimeError(f"{model.label()} has no variance descriptor")


def _sigma_dot(sigma2, T):
    deriv = getattr(sigma2, "derivative", None)
    sig = math.sqrt(float(sigma2(T)))
    if deriv is not None:
        return float(deriv(T)) / (2.0 * sig)
    h = 1e-6 * T
    return (math.sqrt(float(sigma2(T + h))) - math.sqrt(float(sigma2(T - h)))) / (2 * h)


@dataclass(frozen=True)
class InfiniteHorizonGeometry:
    t_star: float
    A: float
    B: float
    M_u: float
    t_u: float
    v_u: float
    phi: float
    phi_estimate: float
    alpha_inf: float


def infinite_horizon_geometry(sigma2, c, u):
    """t*, A, B, M(u) = min_t u(1+ct)/sigma(ut), its minimizer t_u and v(u)."""
    if not c > 0:
        raise InvalidArgumentError(f"infinite horizon needs c > 0, got {c}")
    if not u > 0:
        raise InvalidArgumentError(f"level u must be positive, got {u}")
    a = sigma2.index_at_infinity / 2
    if not 0 < a < 1:
        raise UnsupportedRegimeError(
            f"stationary-infinite: needs sigma^2 index at infinity 2*alpha_inf in (0,2), got {2 * a}"
        )
    t_star = a / (c * (1 - a))
    A = t_star ** (-a) / (1 - a)
    B = t_star ** (-a - 2) * a

    def objective(t):
        return u * (1 + c * t) / math.sqrt(float(sigma2(u * t)))

    grid = np.geomspace(t_star / 10, 10 * t_star, 201)
    vals = np.array([objective(t) for t in grid])
    signs = np.sign(np.diff(vals))
    signs = signs[signs != 0]
    changes = int(np.count_nonzero(np.diff(signs)))
    i = int(np.argmin(vals))
    if changes > 1 or i in (0, len(grid) - 1):
        warnings.warn(
            f"u(1+ct)/sigma(ut) is not unimodal on [t*/10, 10t*] at u={u}; using the grid minimum",
            RuntimeWarning,
            stacklevel=2,
        )
        t_u = float(grid[i])
    else:
        res = optimize.minimize_scalar(
            objective, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden", tol=1e-10
        )
        t_u = float(res.x)
    M_u = objective(t_u)
    target = _SQRT2 * float(sigma2(u * t_star)) / (u * (1 + c * t_star))
    v_u = 1.0 / asymptotic_inverse(sqrt_of(sigma2), target)
    phi = sigma2.limit_at_infinity(1.0)
    return InfiniteHorizonGeometry(t_star, A, B, M_u, t_u, v_u, phi, float(sigma2(u)) / u, a)


@dataclass(frozen=True)
class FiniteHorizonGeometry:
    m_u: float
    v_u: float
    sigma_T: float
    sigma_dot_T: float
    case: str
    theta: float
    alpha0: float


def finite_horizon_geometry(sigma2, c, T, u):
    sigma_T = math.sqrt(float(sigma2(T)))
    if not sigma_T > 0:
        raise InvalidArgumentError(f"sigma(T) must be positive, got {sigma_T}")
    if not u + c * T > 0:
        raise InvalidArgumentError(f"finite horizon needs u + cT > 0, got {u + c * T}")
    sigma_dot = _sigma_dot(sigma2, T)
    if not sigma_dot > 0:
        raise UnsupportedRegimeError(f"stationary-finite: needs sigma'(T) > 0, got {sigma_dot}")
    theta = sigma2.limit_at_zero(1.0)
    case = "i" if math.isinf(theta) else ("iii" if theta == 0 else "ii")
    m_u = (u + c * T) / sigma_T
    if case == "iii":
        v_u = m_u**2
    else:
        v_u = 1.0 / asymptotic_inverse(sqrt_of(sigma2), _SQRT2 * sigma_T**2 / (u + c * T))
    return FiniteHorizonGeometry(m_u, v_u, sigma_T, sigma_dot, case, theta, sigma2.index_at_zero / 2)


@dataclass(frozen=True)
class SelfSimilarGeometry:
    A_hat: float
    B_hat: float
    t0: float
    gamma: float


def self_similar_geometry(H, c, rho=None):
    if not 0 < H < 1:
        raise InvalidArgumentError(f"H must lie in (0,1), got {H}")
    if H > 1 - 1e-6:
        raise InvalidArgumentError(f"H = {H} too close to 1: the curvature B-hat degenerates")
    if not c > 0:
        raise InvalidArgumentError(f"self-similar infinite horizon needs c > 0, got {c}")
    t0 = H / (c * (1 - H))
    A_hat = t0 ** (-H) / (1 - H)
    B_hat = t0 ** (-H - 2) * H
    gamma = math.nan
    if rho is not None:
        lim = rho.limit_at_zero(2.0)
        gamma = math.inf if lim == 0 else (0.0 if math.isinf(lim) else 1.0 / lim)
    return SelfSimilarGeometry(A_hat, B_hat, t0, gamma)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class AsymptoticResult:
    value: float
    constant_factor: float
    algebraic_factor: float
    normal_tail_factor: float
    regime: str
    scaling: float
    berman_inputs: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "value": self.value,
            "constant": self.constant_factor,
            "algebraic": self.algebraic_factor,
            "gauss_tail": self.normal_tail_factor,
            "regime": self.regime,
            "scaling": self.scaling,
            "berman_inputs": self.berman_inputs,
        }


def _result(constant, algebraic, gauss, regime, v, inputs):
    return AsymptoticResult(constant * algebraic * gauss, constant, algebraic, gauss, regime, v, inputs)


def constant_label(process, x, drift=None):
    """Canonical name of a Berman constant, e.g. ``B[fbm:0.3](x=1)``."""
    inner = process if drift is None else f"{process}|h={drift[0]:.12g}|t|^{drift[1]:.12g}"
    return f"B[{inner}](x={x:.12g})"


def _fbm_constant(hurst, x, berman_values, regime, inputs):
    label = constant_label(f"fbm:{hurst:.12g}", x)
    if abs(hurst - 0.5) < 1e-12:
        val = special_constant("berman_B1", x=x)
        inputs[label] = {"value": val, "source": "closed-form"}
        return val
    return _lookup(label, berman_values, regime, inputs)


def _lookup(label, berman_values, regime, inputs):
    values = berman_values or {}
    key = label if label in values else ("*" if "*" in values else None)
    if key is None:
        raise MissingConstantError(label, regime)
    raw = values[key]
    val = float(getattr(raw, "point", raw))
    inputs[label] = {"value": val, "source": "supplied"}
    return val


def resolve_regime(problem, regime=None):
    if regime is not None:
        base = REGIME_ALIASES.get(str(regime), str(regime))
        if base not in REGIMES:
            raise InvalidArgumentError(f"unknown regime {regime!r}; choose from {REGIMES} or the aliases {sorted(REGIME_ALIASES)}")
        family = base.split("-")[0]
    else:
        family = "selfsimilar" if isinstance(problem.model, SelfSimilar) else "stationary"
    return f"{family}-{'infinite' if problem.infinite else 'finite'}"


def _as_self_similar(model):
    if isinstance(model, SelfSimilar):
        return model
    if isinstance(model, (BrownianDrift, FBm)):
        h = 0.5 if isinstance(model, BrownianDrift) else model.hurst
        return SelfSimilar(h, 2 * h)
    d = getattr(model, "sigma2_descriptor", None)
    if isinstance(d, PowerLog) and d.is_pure_power and d.scale == 1 and d.power < 2:
        return SelfSimilar(d.power / 2, d.power)
    raise UnsupportedRegimeError(f"self-similar regimes need a self-similar model, got {model.label()}")


def evaluate_asymptotic(problem, berman_values: Optional[Mapping] = None, regime=None):
    """Exact asymptotic of P{v(u) int 1(X - ct > u) > x} with v(u) from the regime's rule.

    Berman constants without closed form must be supplied in ``berman_values``
    keyed by :func:`constant_label` (or ``"*"``).
    """
    regime = resolve_regime(problem, regime)
    if problem.scaling != "regime":
        warnings.warn("asymptotic uses the regime's own v(u); explicit scaling ignored", RuntimeWarning, stacklevel=2)
    if not problem.u > 0:
        raise InvalidArgumentError(f"{regime}: asymptotics need u > 0, got {problem.u}")
    inputs = {}
    if regime == "stationary-infinite":
        return _stationary_infinite(problem, berman_values, inputs)
    if regime == "stationary-finite":
        return _stationary_finite(problem, berman_values, inputs)
    if regime == "selfsimilar-infinite":
        return _selfsimilar_infinite(problem, berman_values, inputs)
    return _selfsimilar_finite(problem, berman_values, inputs)


def _stationary_infinite(p, berman_values, inputs):
    regime = "stationary-infinite"
    s2 = sigma2_descriptor(p.model)
    if isinstance(p.model, SelfSimilar):
        raise UnsupportedRegimeError(f"{regime}: model {p.model.label()} lacks stationary increments")
    geo = infinite_horizon_geometry(s2, p.c, p.u)
    if geo.phi == 0:
        const = _fbm_constant(s2.index_at_zero / 2, p.x, berman_values, regime, inputs)
    elif math.isinf(geo.phi):
        const = _fbm_constant(geo.alpha_inf, p.x, berman_values, regime, inputs)
    elif isinstance(s2, PowerLog) and s2.is_pure_power and s2.power == 1:
        # X_phi is a standard Brownian motion whatever the scale of sigma^2
        const = _fbm_constant(0.5, p.x, berman_values, regime, inputs)
    else:
        label = constant_label(f"X_phi:{p.model.label()},c={p.c:.12g}", p.x)
        const = _lookup(label, berman_values, regime, inputs)
    constant = const * math.sqrt(2 * geo.A * math.pi / geo.B)
    algebraic = p.u * geo.v_u / geo.M_u
    return _result(constant, algebraic, normal_tail(geo.M_u), regime, geo.v_u, inputs)


def _stationary_finite(p, berman_values, inputs):
    s2 = sigma2_descriptor(p.model)
    T = p.horizon
    geo = finite_horizon_geometry(s2, p.c, T, p.u)
    regime = f"stationary-finite:{geo.case}"
    gauss = normal_tail(geo.m_u)
    if geo.case == "i":
        const = _fbm_constant(geo.alpha0, p.x, berman_values, regime, inputs)
        constant = const * geo.sigma_T / geo.sigma_dot_T
        algebraic = geo.v_u / geo.m_u**2
        return _result(constant, algebraic, gauss, regime, geo.v_u, inputs)
    if geo.case == "ii":
        slope = 2 * geo.sigma_T * geo.sigma_dot_T / geo.theta
        label = constant_label("fbm:0.5", p.x, drift=(slope, 1.0))
        constant = _lookup(label, berman_values, regime, inputs)
        return _result(constant, 1.0, gauss, regime, geo.v_u, inputs)
    constant = math.exp(-geo.sigma_dot_T / geo.sigma_T * p.x)
    return _result(constant, 1.0, gauss, regime, geo.v_u, inputs)


def _selfsimilar_infinite(p, berman_values, inputs):
    model = _as_self_similar(p.model)
    H = model.hurst
    t0 = H / (p.c * (1 - H))
    rho = model.resolved_rho(t0)
    geo = self_similar_geometry(H, p.c, rho)
    case = "i" if geo.gamma == 0 else ("iii" if math.isinf(geo.gamma) else "ii")
    regime = f"selfsimilar-infinite:{case}"
    level = geo.A_hat * p.u ** (1 - H)
    gauss = normal_tail(level)
    if case == "iii":
        constant = math.exp(-geo.A_hat * geo.B_hat * p.x**2 / 8)
        return _result(constant, 1.0, gauss, regime, p.u ** (-H), inputs)
    r = asymptotic_inverse(rho, level**-2)
    v = 1.0 / (p.u * r)
    if case == "ii":
        g = geo.gamma
        a2, bg = 2 * geo.A_hat + geo.B_hat * g, geo.B_hat * g
        constant = math.sqrt(a2 / bg) * math.exp(-a2 * p.x**2 / (8 * geo.A_hat))
        return _result(constant, 1.0, gauss, regime, v, inputs)
    const = _fbm_constant(rho.index_at_zero / 2, p.x, berman_values, regime, inputs)
    constant = const * math.sqrt(2 * geo.A_hat * math.pi / geo.B_hat)
    return _result(constant, 1.0 / (r * level), gauss, regime, v, inputs)


def _selfsimilar_finite(p, berman_values, inputs):
    model = _as_self_similar(p.model)
    H, T = model.hurst, p.horizon
    rho = model.resolved_rho(T)
    if not p.u + p.c * T > 0:
        raise InvalidArgumentError(f"finite horizon needs u + cT > 0, got {p.u + p.c * T}")
    theta = rho.limit_at_zero(1.0)
    case = "i" if math.isinf(theta) else ("iii" if theta == 0 else "ii")
    regime = f"selfsimilar-finite:{case}"
    level = (p.u + p.c * T) / T**H
    gauss = normal_tail(level)
    if case == "iii":
        constant = math.exp(-H / T * p.x)
        return _result(constant, 1.0, gauss, regime, level**2, inputs)
    v = 1.0 / asymptotic_inverse(rho, T ** (2 * H) / (p.u + p.c * T) ** 2)
    if case == "ii":
        label = constant_label("fbm:0.5", p.x, drift=(H / (T * theta), 1.0))
        constant = _lookup(label, berman_values, regime, inputs)
        return _result(constant, 1.0, gauss, regime, v, inputs)
    alpha = rho.index_at_zero
    const = _fbm_constant(alpha / 2, p.x, berman_values, regime, inputs)
    constant = const * T ** (2 * H + 1 - 2 * H / alpha) / H
    algebraic = 1.0 / (p.u**2 * asymptotic_inverse(rho, p.u**-2.0))
    return _result(constant, algebraic, gauss, regime, v, inputs)


def resolve_scaling(problem, regime=None):
    """v(u) for the problem: the explicit value, or the regime's rule."""
    if problem.scaling != "regime":
        return float(problem.scaling)
    regime = resolve_regime(problem, regime)
    if regime == "stationary-infinite":
        return infinite_horizon_geometry(sigma2_descriptor(problem.model), problem.c, problem.u).v_u
    if regime == "stationary-finite":
        return finite_horizon_geometry(sigma2_descriptor(problem.model), problem.c, problem.horizon, problem.u).v_u
    model = _as_self_similar(problem.model)
    H = model.hurst
    if regime == "selfsimilar-infinite":
        t0 = H / (problem.c * (1 - H))
        rho = model.resolved_rho(t0)
        geo = self_similar_geometry(H, problem.c, rho)
        if math.isinf(geo.gamma):
            return problem.u ** (-H)
        return 1.0 / (problem.u * asymptotic_inverse(rho, (geo.A_hat * problem.u ** (1 - H)) ** -2))
    T = problem.horizon
    rho = model.resolved_rho(T)
    if rho.limit_at_zero(1.0) == 0:
        return (problem.u + problem.c * T) ** 2 / T ** (2 * H)
    return 1.0 / asymptotic_inverse(rho, T ** (2 * H) / (problem.u + problem.c * T) ** 2)


def passage_regime(problem):
    """Normalization constants for passage-time statistics of a stationary-increments problem."""
    from .sojourn import PassageRegime

    s2 = sigma2_descriptor(problem.model)
    if problem.infinite:
        geo = infinite_horizon_geometry(s2, problem.c, problem.u)
        a = geo.alpha_inf
        A_u = math.sqrt(float(s2(problem.u * geo.t_star))) / problem.c * math.sqrt(a / (1 - a))
        return PassageRegime("infinite", problem.u, t_u=geo.t_u, A_u=A_u)
    T = problem.horizon
    return PassageRegime(
        "finite", problem.u, T=T, sigma_T=math.sqrt(float(s2(T))), sigma_dot_T=_sigma_dot(s2, T)
    )


# ---------------------------------------------------------------------------
# passage-time limit laws


@dataclass(frozen=True)
class PassageLaw:
    kind: str
    y: float
    cdf: float
    survival: float
    atom: float
    atom_at: float
    ratio: float


def passage_limit_law(kind, y, *, ratio=None, b1=None, b2=None, se1=0.0, se2=0.0, decay=None, x1=None, x2=None):
    """Limit law of a normalized conditional passage time.

    ``normal`` (infinite horizon): P(N <= y) = ratio * Phi(y), atom 1 - ratio at +inf.
    ``exponential`` (finite horizon): P(E > y) = ratio * e^{-y} for y >= 0,
    atom 1 - ratio at -inf.

    ``ratio`` is B(x2)/B(x1); give it directly, as constants ``b1``, ``b2``, or,
    for the exponential case with sigma^2 = o(t), via ``decay`` = sigma'(T)/sigma(T).
    """
    if x1 is not None and x2 is not None and x1 > x2:
        raise InvalidArgumentError(f"need x1 <= x2, got {x1} > {x2}")
    if ratio is None:
        if b1 is not None and b2 is not None:
            ratio = b2 / b1
            combined = math.hypot(se2 / b1, b2 * se1 / b1**2)
            if ratio > 1 + 3 * combined:
                warnings.warn(
                    f"constant ratio {ratio:.4f} exceeds 1 by more than 3 standard errors; "
                    "B must be nonincreasing in x",
                    RuntimeWarning,
                    stacklevel=2,
                )
        elif decay is not None and x1 is not None and x2 is not None:
            ratio = math.exp(decay * (x1 - x2))
        elif x1 is not None and x1 == x2:
            ratio = 1.0
        else:
            raise InvalidArgumentError("passage_limit_law needs ratio, (b1, b2) or (decay, x1, x2)")
    ratio = min(float(ratio), 1.0)
    if kind == "normal":
        cdf = ratio * float(special.ndtr(y))
        return PassageLaw(kind, y, cdf, 1.0 - cdf, 1.0 - ratio, math.inf, ratio)
    if kind == "exponential":
        surv = ratio * math.exp(-y) if y >= 0 else ratio
        return PassageLaw(kind, y, 1.0 - surv, surv, 1.0 - ratio, -math.inf, ratio)
    raise InvalidArgumentError(f"unknown passage law {kind!r}")


# ---------------------------------------------------------------------------
# regularly varying integral


@dataclass(frozen=True)
class TailIntegral:
    numeric: float
    asymptotic: float


def rv_tail_integral(c1, w, n, g, a2):
    """int_0^{g a2} exp(-c1 n^2 w(t)) dt and its regular-variation approximation."""
    if not (c1 > 0 and n > 0 and g > 0 and a2 >= 0):
        raise InvalidArgumentError("rv_tail_integral needs c1, n, g > 0 and a2 >= 0")
    upper = g * a2
    if upper == 0:
        return TailIntegral(0.0, 0.0)
    beta = w.index_at_zero
    scale = asymptotic_inverse(w, n**-2.0)

    def integrand(t):
        return math.exp(-c1 * n * n * float(w(t)))

    numeric = 0.0
    edges = [0.0] + [scale * k for k in (1.0, 10.0, 100.0) if scale * k < upper] + [upper]
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = integrate.quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=500)
        if not np.isfinite(val) or err > 1e-8 * max(abs(val), 1e-300) + 1e-14:
            raise NumericFailure(f"quadrature on [{lo}, {hi}] did not converge (err {err:.2e})")
        numeric += val
    y2 = math.inf if math.isinf(upper) else n * n * float(w(upper))
    asymptotic = c1 ** (-1.0 / beta) * scale * theta_integral(beta, 0.0, c1 * y2)
    return TailIntegral(numeric, asymptotic)
