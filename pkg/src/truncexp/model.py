"""Closed-form model quantities for exponential lifespans under double truncation.

A latent unit has lifespan ``X ~ Exp(theta)`` and age at study begin
``T ~ Unif[-s, G - s]``.  Observable units are reduced to a triple
``(y, l, r)`` where ``l`` flags left truncation (born before the study) and
``r`` flags right censoring (alive at study end).  The support of an
observable triple is ``D = [0, s] x {(0,0), (0,1), (1,0)}``.

Every function here is pure and accepts scalar or array ``theta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

__all__ = [
    "DomainError",
    "StudyWindow",
    "ParamDomain",
    "ObservedTriple",
    "in_support",
    "alpha",
    "alpha_d1",
    "alpha_d2",
    "k_log",
    "k_d1",
    "k_d2",
    "obs_density",
    "m_value",
    "m_d1",
    "m_d2",
    "moment_left",
    "moment_uncensored",
    "h_k",
    "delta",
    "eta",
    "eta_resorted",
    "eta_split",
]

CELLS = ((0, 0), (0, 1), (1, 0))

# Below this value of theta*G the alpha derivatives switch to a power series.
_SERIES_CUTOFF = 1.0
_SERIES_TERMS = 32


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a model function."""


@dataclass(frozen=True)
class StudyWindow:
    """Study length ``s`` and total cohort span ``G`` in years, ``0 < s < G``."""

    s: float
    G: float

    def __post_init__(self):
        s, G = float(self.s), float(self.G)
        if not (np.isfinite(s) and np.isfinite(G)):
            raise DomainError(f"study window must be finite, got s={self.s}, G={self.G}")
        if not 0.0 < s < G:
            raise DomainError(f"study window requires 0 < s < G, got s={self.s}, G={self.G}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "G", G)

    @property
    def born_in_study(self) -> float:
        """Probability ``s/G`` that a latent unit is born during the study."""
        return self.s / self.G


@dataclass(frozen=True)
class ParamDomain:
    """Compact parameter interval ``[eps, 1/eps]``."""

    eps: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise DomainError(f"eps must lie in (0, 1), got {self.eps}")

    @property
    def lo(self) -> float:
        return self.eps

    @property
    def hi(self) -> float:
        return 1.0 / self.eps

    def contains(self, theta: float) -> bool:
        return self.lo <= theta <= self.hi


@dataclass(frozen=True)
class ObservedTriple:
    y: float
    l: int
    r: int


def in_support(y, l, r, s):
    """Indicator of ``(y, l, r)`` in ``D``.

    The uncensored cell excludes ``y = s`` because its density factor
    ``theta * (s - y)`` vanishes there.
    """
    y = np.asarray(y, dtype=float)
    l = np.asarray(l)
    r = np.asarray(r)
    cell_ok = ((l == 0) | (l == 1)) & ((r == 0) | (r == 1)) & ~((l == 1) & (r == 1))
    uncensored = (l == 0) & (r == 0)
    y_ok = (y >= 0.0) & np.where(uncensored, y < s, y <= s)
    out = cell_ok & y_ok
    return bool(out) if out.ndim == 0 else out


def _theta(theta):
    th = np.asarray(theta, dtype=float)
    if np.any(~(th > 0.0)) or np.any(~np.isfinite(th)):
        raise DomainError(f"theta must be positive and finite, got {theta!r}")
    return th


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _one_minus_exp(x):
    # 1 - exp(-x) without cancellation for small x
    return -np.expm1(-x)


def alpha(theta, w: StudyWindow):
    """Probability that a latent unit yields an observable triple."""
    th = _theta(theta)
    s, G = w.s, w.G
    val = s / G + _one_minus_exp(th * s) * _one_minus_exp(th * (G - s)) / (G * th)
    return _out(val)


def _series_power_sums(w: StudyWindow):
    # sum_k c_k a_k^j for the four exponents (0, s, G-s, G) with signs (+, -, -, +)
    s, G = w.s, w.G
    return np.array([G**j - s**j - (G - s) ** j for j in range(_SERIES_TERMS)])


def _profile_derivs(th, w: StudyWindow):
    """First and second theta-derivatives of ``P = (1 - e^{-th s})(1 - e^{-th (G-s)}) / th``."""
    s, G = w.s, w.G
    es = np.exp(-th * s)
    eg = np.exp(-th * (G - s))
    A = _one_minus_exp(th * s)
    B = _one_minus_exp(th * (G - s))
    Ad, Add = s * es, -(s**2) * es
    Bd, Bdd = (G - s) * eg, -((G - s) ** 2) * eg
    Q = A * B
    Qd = Ad * B + A * Bd
    Qdd = Add * B + 2.0 * Ad * Bd + A * Bdd
    Pd = Qd / th - Q / th**2
    Pdd = Qdd / th - 2.0 * Qd / th**2 + 2.0 * Q / th**3

    small = th * G < _SERIES_CUTOFF
    if np.any(small):
        # P = sum_{j>=2} (-1)^j S_j th^(j-1) / j!, differentiated termwise
        S = _series_power_sums(w)
        ts = np.where(small, th, 0.0)
        sd1 = np.zeros_like(ts)
        sd2 = np.zeros_like(ts)
        for j in range(_SERIES_TERMS - 1, 1, -1):
            c = (-1) ** j * S[j] / factorial(j)
            sd1 = sd1 + c * (j - 1) * ts ** (j - 2)
            if j >= 3:
                sd2 = sd2 + c * (j - 1) * (j - 2) * ts ** (j - 3)
        Pd = np.where(small, sd1, Pd)
        Pdd = np.where(small, sd2, Pdd)
    return Pd, Pdd


def alpha_d1(theta, w: StudyWindow):
    th = _theta(theta)
    return _out(_profile_derivs(th, w)[0] / w.G)


def alpha_d2(theta, w: StudyWindow):
    th = _theta(theta)
    return _out(_profile_derivs(th, w)[1] / w.G)


def k_log(theta, w: StudyWindow):
    """``K(theta) = log(1 - exp(-theta (G - s)))``."""
    th = _theta(theta)
    x = th * (w.G - w.s)
    # log(-expm1(-x)) keeps precision for small x, log1p(-exp(-x)) for large x
    with np.errstate(divide="ignore"):
        val = np.where(x < np.log(2.0), np.log(_one_minus_exp(x)), np.log1p(-np.exp(-x)))
    return _out(val)


def k_d1(theta, w: StudyWindow):
    th = _theta(theta)
    d = w.G - w.s
    x = th * d
    return _out(d * np.exp(-x) / _one_minus_exp(x))


def k_d2(theta, w: StudyWindow):
    # -(d^2)/(e^x - 1) - (d^2)/(e^x - 1)^2 == -(d^2) e^{-x} / (1 - e^{-x})^2
    th = _theta(theta)
    d = w.G - w.s
    x = th * d
    return _out(-(d**2) * np.exp(-x) / _one_minus_exp(x) ** 2)


def obs_density(t: ObservedTriple, theta, w: StudyWindow):
    """Density of an observed triple w.r.t. Lebesgue x counting measure on ``D``."""
    th = _theta(theta)
    if not in_support(t.y, t.l, t.r, w.s):
        return _out(np.zeros_like(th))
    val = np.exp(-th * t.y) / (alpha(th, w) * w.G)
    if t.l == 1:
        val = val * _one_minus_exp(th * (w.G - w.s))
    if t.l == 0 and t.r == 0:
        val = val * th * (w.s - t.y)
    return _out(val)


def _unc(t: ObservedTriple) -> int:
    return (1 - t.l) * (1 - t.r)


def m_value(t: ObservedTriple, theta, w: StudyWindow):
    """Criterion integrand: log-density with the theta-free part removed, zero off ``D``."""
    th = _theta(theta)
    if not in_support(t.y, t.l, t.r, w.s):
        return _out(np.zeros_like(th))
    val = -np.log(alpha(th, w)) - th * t.y + k_log(th, w) * t.l + np.log(th) * _unc(t)
    return _out(val)


def m_d1(t: ObservedTriple, theta, w: StudyWindow):
    th = _theta(theta)
    if not in_support(t.y, t.l, t.r, w.s):
        return _out(np.zeros_like(th))
    val = -alpha_d1(th, w) / alpha(th, w) - t.y + k_d1(th, w) * t.l + _unc(t) / th
    return _out(val)


def m_d2(t: ObservedTriple, theta, w: StudyWindow):
    th = _theta(theta)
    if not in_support(t.y, t.l, t.r, w.s):
        return _out(np.zeros_like(th))
    a = alpha(th, w)
    ad = alpha_d1(th, w)
    val = -alpha_d2(th, w) / a + (ad / a) ** 2 + k_d2(th, w) * t.l - _unc(t) / th**2
    return _out(val)


def moment_left(theta, w: StudyWindow):
    """Latent-measure mean of ``chi_D * L``."""
    return _out(alpha(theta, w) - w.born_in_study)


def moment_uncensored(theta, w: StudyWindow):
    """Latent-measure mean of ``chi_D * (1 - L)(1 - R)``."""
    th = _theta(theta)
    return _out(w.born_in_study - _one_minus_exp(th * w.s) / (w.G * th))


def h_k(theta, s: float, k: int):
    """``H_k(theta) = s^k e^{-theta s} / (1 - e^{-theta s})^k - theta^{-k}`` for k in 1..3."""
    if k not in (1, 2, 3):
        raise DomainError(f"order k must be 1, 2 or 3, got {k}")
    if not s > 0:
        raise DomainError(f"s must be positive, got {s}")
    th = _theta(theta)
    return _out(s**k * np.exp(-th * s) / _one_minus_exp(th * s) ** k - th ** (-k))


def delta(theta, w: StudyWindow):
    """Sum of the two H-terms of eta, in the factored form whose sign is evident."""
    th = _theta(theta)
    s, G = w.s, w.G
    h1 = h_k(th, s, 1)
    first = s / (G * th) * _one_minus_exp(th * (G - s)) * h1
    second = s / (G * th**2) * _one_minus_exp(th * s) * np.exp(-th * (G - s)) * (h1 / s + 1.0)
    return _out(first - second)


def eta(theta, w: StudyWindow):
    """Expected second derivative of the criterion under the same theta.

    Strictly negative for every ``theta > 0`` and ``0 < s < G``; at the true
    parameter it equals the curvature of the population criterion.
    """
    th = _theta(theta)
    a = alpha(th, w)
    ad = alpha_d1(th, w)
    add = alpha_d2(th, w)
    val = (-add + ad**2 / a) + k_d2(th, w) * moment_left(th, w) - moment_uncensored(th, w) / th**2
    return _out(val)


def eta_resorted(theta, w: StudyWindow):
    """``eta`` with the ``K''`` term rewritten through the log of ``alpha - s/G``."""
    th = _theta(theta)
    s = w.s
    a = alpha(th, w)
    ad = alpha_d1(th, w)
    add = alpha_d2(th, w)
    ex = a - w.born_in_study
    middle = add - ad**2 / ex - ex / th**2 + s**2 * np.exp(-th * s) / _one_minus_exp(th * s) ** 2 * ex
    val = (-add + ad**2 / a) + middle - moment_uncensored(th, w) / th**2
    return _out(val)


def eta_split(theta, w: StudyWindow):
    """``eta`` as a non-positive alpha-ratio term plus :func:`delta`."""
    th = _theta(theta)
    a = alpha(th, w)
    ad = alpha_d1(th, w)
    first = ad**2 / a - ad**2 / (a - w.born_in_study)
    return _out(first + delta(th, w))
