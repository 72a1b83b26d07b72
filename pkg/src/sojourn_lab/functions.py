"""Model-function descriptors: variance functions sigma^2, local correlation
profiles rho, and similar regularly varying ingredients.

A descriptor is callable and carries the regular-variation metadata used for
case classification. Classification never inspects sampled values; it reads
the declared index and leading coefficient.
"""
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import InvalidArgumentError, UnsupportedRegimeError


def _compare_limit(index, p, coefficient, slow_sign=0):
    """lim f(t)/t^p for f = coefficient * t^index * (slowly varying part).

    ``slow_sign`` is +1 if the slowly varying part diverges, -1 if it vanishes
    and 0 if it tends to 1.
    """
    if index > p:
        return 0.0
    if index < p:
        return math.inf
    if slow_sign > 0:
        return math.inf
    if slow_sign < 0:
        return 0.0
    if coefficient is None:
        raise UnsupportedRegimeError(
            f"limit of f(t)/t^{p} is not declared for this descriptor"
        )
    return float(coefficient)


@dataclass(frozen=True)
class PowerLog:
    """f(t) = scale * t**power * log(e + 1/t)**log_power for t > 0, f(0) = 0."""

    scale: float = 1.0
    power: float = 1.0
    log_power: float = 0.0

    def __post_init__(self):
        if not (self.scale > 0 and self.power > 0):
            raise InvalidArgumentError("PowerLog needs scale > 0 and power > 0")

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.scale * t**self.power
            if self.log_power:
                out = out * np.log(math.e + 1.0 / t) ** self.log_power
        out = np.where(t > 0, out, 0.0)
        return out if out.ndim else float(out)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        f = np.asarray(self(t))
        dlog = self.power / t
        if self.log_power:
            dlog = dlog - self.log_power / (t * (math.e * t + 1.0) * np.log(math.e + 1.0 / t))
        out = f * dlog
        return out if out.ndim else float(out)

    @property
    def is_pure_power(self):
        return self.log_power == 0

    def exact_inverse(self, y):
        if not self.is_pure_power:
            return None
        return (float(y) / self.scale) ** (1.0 / self.power)

    @property
    def index_at_zero(self):
        return self.power

    @property
    def index_at_infinity(self):
        return self.power

    def limit_at_zero(self, p):
        sign = 0 if self.log_power == 0 else int(math.copysign(1, self.log_power))
        return _compare_limit(self.power, p, self.scale, sign)

    def limit_at_infinity(self, p):
        # log(e + 1/t) -> 1 at infinity
        if self.power > p:
            return math.inf
        if self.power < p:
            return 0.0
        return self.scale

    def label(self):
        core = "t" if self.power == 1 else f"t^{self.power:g}"
        if self.scale != 1:
            core = f"{self.scale:g}*{core}"
        if self.log_power:
            core += f"*log(e+1/t)^{self.log_power:g}"
        return core


@dataclass(frozen=True)
class CustomFunction:
    """Arbitrary callable with declared regular-variation metadata.

    ``coefficient_at_zero`` is lim f(t)/t^index_at_zero (may be 0 or inf when
    the slowly varying part vanishes or diverges); likewise at infinity.
    """

    func: Callable
    index_at_zero: float
    index_at_infinity: Optional[float] = None
    deriv: Optional[Callable] = None
    coefficient_at_zero: Optional[float] = None
    coefficient_at_infinity: Optional[float] = None
    name: str = "custom"

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        out = np.vectorize(self.func, otypes=[float])(t) if t.ndim else float(self.func(float(t)))
        return out

    def derivative(self, t):
        if self.deriv is not None:
            t = np.asarray(t, dtype=float)
            out = np.vectorize(self.deriv, otypes=[float])(t) if t.ndim else float(self.deriv(float(t)))
            return out
        t = np.asarray(t, dtype=float)
        h = 1e-6 * np.maximum(np.abs(t), 1e-300)
        out = (np.asarray(self(t + h)) - np.asarray(self(t - h))) / (2 * h)
        return out if out.ndim else float(out)

    def exact_inverse(self, y):
        return None

    def limit_at_zero(self, p):
        return _compare_limit(self.index_at_zero, p, self.coefficient_at_zero)

    def limit_at_infinity(self, p):
        if self.index_at_infinity is None:
            raise UnsupportedRegimeError(f"{self.name}: index at infinity not declared")
        return _compare_limit(self.index_at_infinity, p, self.coefficient_at_infinity)

    def label(self):
        return self.name


def integrated_sigma2(corr, index_at_infinity, coefficient_at_infinity=None, name="integrated"):
    """Variance function of X(t) = int_0^t Z(s) ds for stationary Z with correlation ``corr``.

    sigma^2(t) = 2 int_0^t (t - v) r(v) dv, so sigma^2 ~ t^2 at zero.
    """

    def s2(t):
        if t <= 0:
            return 0.0
        val, _ = integrate.quad(lambda v: (t - v) * corr(v), 0.0, t, limit=200)
        return 2.0 * val

    def ds2(t):
        if t <= 0:
            return 0.0
        val, _ = integrate.quad(corr, 0.0, t, limit=200)
        return 2.0 * val

    return CustomFunction(
        s2,
        index_at_zero=2.0,
        index_at_infinity=index_at_infinity,
        deriv=ds2,
        coefficient_at_zero=float(corr(0.0)),
        coefficient_at_infinity=coefficient_at_infinity,
        name=name,
    )


def sqrt_of(f):
    """sigma(t) from a sigma^2 descriptor, with its derivative."""
    return _Sqrt(f)


@dataclass(frozen=True)
class _Sqrt:
    inner: object

    def __call__(self, t):
        return np.sqrt(self.inner(t))

    def derivative(self, t):
        return np.asarray(self.inner.derivative(t)) / (2.0 * np.sqrt(self.inner(t)))

    def exact_inverse(self, y):
        inv = self.inner.exact_inverse(float(y) ** 2)
        return inv

    @property
    def index_at_zero(self):
        return self.inner.index_at_zero / 2

    @property
    def index_at_infinity(self):
        return self.inner.index_at_infinity / 2
