"""Brute-force and quadrature oracles, plus the registry behind ``truncexp verify``.

Nothing here reuses the closed forms it is meant to check: argmaxes come
from grids, masses and moments from adaptive quadrature, derivatives from
central differences, and indicator means from latent-space Monte Carlo that
classifies units by region rather than through :func:`simulator.reduce`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from . import model
from .model import CELLS, ObservedTriple, StudyWindow

__all__ = [
    "OracleError",
    "GridSpec",
    "grid_argmax",
    "quad_density_mass",
    "quad_observed_moments",
    "quad_M",
    "quad_alpha_latent",
    "finite_diff",
    "MCMoments",
    "mc_indicator_moments",
    "CheckResult",
    "register",
    "registered_checks",
    "run_checks",
    "format_report",
]

QUAD_EPSABS = 1e-10


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    points: int
    log: bool = False

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError(f"grid needs 0 < lo < hi, got [{self.lo}, {self.hi}]")
        if self.points < 3:
            raise ValueError("grid needs at least 3 points")

    def values(self) -> np.ndarray:
        if self.log:
            return np.geomspace(self.lo, self.hi, self.points)
        return np.linspace(self.lo, self.hi, self.points)

    @property
    def step(self) -> float:
        """Spacing of a linear grid (ratio minus one for a log grid)."""
        if self.log:
            return (self.hi / self.lo) ** (1.0 / (self.points - 1)) - 1.0
        return (self.hi - self.lo) / (self.points - 1)


def grid_argmax(stats, w: StudyWindow, grid: GridSpec) -> float:
    """Grid point maximizing the profiled criterion; exact ties go to the smallest theta."""
    from .estimator import profiled_objective

    thetas = grid.values()
    vals = profiled_objective(stats, thetas, w)
    return float(thetas[int(np.argmax(vals))])


def _quad(fn, a, b):
    val, err, info = integrate.quad(fn, a, b, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=200, full_output=True)[:3]
    if err > 10 * QUAD_EPSABS or not math.isfinite(val):
        raise OracleError(f"quadrature did not converge on [{a}, {b}] (error estimate {err:.3g})")
    return val


def quad_density_mass(theta: float, w: StudyWindow) -> float:
    """Total mass of the observed density over the three cells."""
    return math.fsum(
        _quad(lambda y, l=l, r=r: model.obs_density(ObservedTriple(y, l, r), theta, w), 0.0, w.s) for l, r in CELLS
    )


@lru_cache(maxsize=64)
def _moments(theta0: float, s: float, G: float):
    w = StudyWindow(s, G)

    def f(y, l, r):
        return model.obs_density(ObservedTriple(y, l, r), theta0, w)

    ey = math.fsum(_quad(lambda y, l=l, r=r: y * f(y, l, r), 0.0, s) for l, r in CELLS)
    el = _quad(lambda y: f(y, 1, 0), 0.0, s)
    eu = _quad(lambda y: f(y, 0, 0), 0.0, s)
    return ey, el, eu


def quad_observed_moments(theta0: float, w: StudyWindow) -> tuple[float, float, float]:
    """Observed-population means of ``Y``, ``L`` and ``(1-L)(1-R)`` by quadrature."""
    return _moments(float(theta0), w.s, w.G)


def quad_M(theta0: float, theta, w: StudyWindow):
    """Population criterion ``M(theta)`` when the data come from ``theta0``."""
    ey, el, eu = quad_observed_moments(theta0, w)
    th = np.asarray(theta, dtype=float)
    a0 = model.alpha(theta0, w)
    val = a0 * (-np.log(model.alpha(th, w)) - th * ey + model.k_log(th, w) * el + np.log(th) * eu)
    return float(val) if val.ndim == 0 else val


def quad_alpha_latent(theta: float, w: StudyWindow) -> float:
    """Observation probability as a 2-D integral of the latent density over the observable region."""
    s, G = w.s, w.G

    def dens(x, t):
        return theta * math.exp(-theta * x) / G

    # born in study: every lifespan is observable (dead in study or censored)
    born_in, err1 = integrate.dblquad(dens, -s, 0.0, 0.0, math.inf, epsabs=QUAD_EPSABS, epsrel=1e-12)
    # born before: observable iff death falls in [t, t + s]
    born_before, err2 = integrate.dblquad(
        dens, 0.0, G - s, lambda t: t, lambda t: t + s, epsabs=QUAD_EPSABS, epsrel=1e-12
    )
    if max(err1, err2) > 10 * QUAD_EPSABS:
        raise OracleError("2-D quadrature for alpha did not converge")
    return born_in + born_before


def finite_diff(fn: Callable[[float], float], x: float, order: int = 1, step: float | None = None) -> float:
    """Three-point central difference of order 1 or 2."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    h = step if step is not None else max(1e-5, 1e-7 * abs(x))
    fp, fm = fn(x + h), fn(x - h)
    f0 = fn(x) if order == 2 else 0.0
    if not all(math.isfinite(v) for v in (fp, fm, f0)):
        raise ValueError(f"function is not finite near x={x}")
    if order == 1:
        return (fp - fm) / (2.0 * h)
    return (fp - 2.0 * f0 + fm) / (h * h)


class MCMoments(NamedTuple):
    """Latent-space means of ``chi_D L``, ``chi_D (1-L)(1-R)``, ``chi_D (1-L) R`` and their standard errors."""

    e_l: float
    e_unc: float
    e_cens: float
    se_l: float
    se_unc: float
    se_cens: float
    e_obs: float
    se_obs: float


def mc_indicator_moments(theta: float, w: StudyWindow, n: int, seed: int) -> MCMoments:
    """Monte Carlo over latent ``(x, t)``, classifying units by observable region."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    x = rng.exponential(1.0 / theta, n)
    t = rng.uniform(-w.s, w.G - w.s, n)
    before = t > 0
    left = before & (t <= x) & (x <= t + w.s)
    unc = ~before & (x <= t + w.s)
    cens = ~before & (x > t + w.s)
    obs = left | unc | cens

    def mean_se(ind):
        p = ind.mean()
        return float(p), float(math.sqrt(p * (1 - p) / n))

    (el, sl), (eu, su), (ec, sc), (eo, so) = map(mean_se, (left, unc, cens, obs))
    return MCMoments(el, eu, ec, sl, su, sc, eo, so)


# --------------------------------------------------------------------------
# verification registry


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    observed: float
    expected: float
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{mark}  {self.name:<38s} observed={self.observed:.12g}  expected={self.expected:.12g}{extra}"


_REGISTRY: dict[str, Callable[[], CheckResult]] = {}


def register(name: str):
    def deco(fn):
        if name in _REGISTRY:
            raise ValueError(f"duplicate check {name}")

        def run() -> CheckResult:
            ok, observed, expected, *rest = fn()
            return CheckResult(name, bool(ok), float(observed), float(expected), rest[0] if rest else "")

        _REGISTRY[name] = run
        return fn

    return deco


def registered_checks() -> list[str]:
    return list(_REGISTRY)


def run_checks(names=None) -> list[CheckResult]:
    out = []
    for name in names or _REGISTRY:
        try:
            out.append(_REGISTRY[name]())
        except Exception as exc:  # a crashing check is a failing check
            out.append(CheckResult(name, False, math.nan, math.nan, f"{type(exc).__name__}: {exc}"))
    return out


def format_report(results: list[CheckResult]) -> str:
    lines = [r.line() for r in results]
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines)


def _rel(a, b):
    return abs(a - b) / abs(b)


# Derivative checks: first differences use the default step, second differences
# SECOND_STEP (roundoff of a 1e-5 second difference is ~eps*|f|/1e-10).
SECOND_STEP = 1e-4
DERIV_THETAS = (0.05, 0.1, 0.3, 1.0, 3.0)
DERIV_WINDOWS = ((2.0, 5.0), (2.0, 10.0), (1.0, 3.0))
ETA_WINDOWS = ((2.0, 5.0), (2.0, 10.0), (2.0, 50.0), (1.0, 3.0), (5.0, 100.0))
ETA_THETAS = tuple(np.geomspace(0.01, 10.0, 61))


def _worst_rel(pairs):
    worst = max(pairs, key=lambda p: _rel(p[0], p[1]))
    return _rel(*worst), worst


def _deriv_check(parent, child, order, tol, thetas=DERIV_THETAS, windows=DERIV_WINDOWS):
    step = SECOND_STEP if order == 2 else None
    pairs = []
    for s, G in windows:
        w = StudyWindow(s, G)
        for th in thetas:
            pairs.append((finite_diff(lambda x: parent(x, w), th, order, step), child(th, w)))
    err, (fd, exact) = _worst_rel(pairs)
    return err < tol, fd, exact, f"max rel err {err:.2e} < {tol:g}"


@register("alpha/latent-2d-quadrature")
def _():
    w = StudyWindow(2, 10)
    q, a = quad_alpha_latent(0.5, w), model.alpha(0.5, w)
    return abs(q - a) < 1e-8, q, a


@register("alpha/small-theta-limit")
def _():
    w = StudyWindow(2, 10)
    a = model.alpha(1e-9, w)
    return abs(a - 0.2) < 1e-6, a, 0.2


@register("alpha_d1/finite-difference")
def _():
    return _deriv_check(model.alpha, model.alpha_d1, 1, 1e-6)


@register("alpha_d2/finite-difference")
def _():
    return _deriv_check(model.alpha_d1, model.alpha_d2, 1, 1e-6)


@register("alpha_d2/second-difference")
def _():
    return _deriv_check(model.alpha, model.alpha_d2, 2, 1e-5)


@register("k_d1/finite-difference")
def _():
    return _deriv_check(model.k_log, model.k_d1, 1, 1e-6)


@register("k_d2/second-difference")
def _():
    return _deriv_check(model.k_log, model.k_d2, 2, 1e-5)


_M_TRIPLES = (ObservedTriple(0.5, 1, 0), ObservedTriple(1.5, 1, 0), ObservedTriple(0.5, 0, 0), ObservedTriple(1.2, 0, 1))


@register("m_d1/finite-difference")
def _():
    pairs = []
    for tr in _M_TRIPLES:
        for th in DERIV_THETAS:
            w = StudyWindow(2, 10)
            pairs.append((finite_diff(lambda x: model.m_value(tr, x, w), th, 1), model.m_d1(tr, th, w)))
    err, (fd, exact) = _worst_rel(pairs)
    return err < 1e-6, fd, exact, f"max rel err {err:.2e} < 1e-06"


@register("m_d2/second-difference")
def _():
    pairs = []
    for tr in _M_TRIPLES:
        for th in DERIV_THETAS:
            w = StudyWindow(2, 10)
            pairs.append((finite_diff(lambda x: model.m_value(tr, x, w), th, 2, SECOND_STEP), model.m_d2(tr, th, w)))
    err, (fd, exact) = _worst_rel(pairs)
    return err < 1e-5, fd, exact, f"max rel err {err:.2e} < 1e-05"


@register("density/total-mass")
def _():
    worst = 0.0
    for th in (0.05, 0.2, 0.7, 2.0, 8.0):
        for s, G in ((2, 5), (2, 10), (1, 3), (2, 50), (5, 100)):
            worst = max(worst, abs(quad_density_mass(th, StudyWindow(s, G)) - 1.0))
    return worst < 1e-8, 1.0 + worst, 1.0, f"max |mass - 1| {worst:.2e}"


@register("density/cell-moments-vs-closed-form")
def _():
    w = StudyWindow(2, 10)
    th = 0.3
    _, el, eu = quad_observed_moments(th, w)
    a = model.alpha(th, w)
    err = max(abs(el * a - model.moment_left(th, w)), abs(eu * a - model.moment_uncensored(th, w)))
    return err < 1e-9, el * a, model.moment_left(th, w), f"max abs err {err:.2e}"


@register("eta/negative-on-grid")
def _():
    worst = max(model.eta(th, StudyWindow(s, G)) for s, G in ETA_WINDOWS for th in ETA_THETAS)
    return worst < 0, worst, 0.0, "largest eta on grid"


@register("eta/representations-agree")
def _():
    worst = 0.0
    for s, G in ETA_WINDOWS:
        w = StudyWindow(s, G)
        for th in ETA_THETAS:
            e = model.eta(th, w)
            scale = max(1.0, abs(e))
            worst = max(worst, abs(model.eta_resorted(th, w) - e) / scale, abs(model.eta_split(th, w) - e) / scale)
    return worst < 1e-10, worst, 0.0, "max |diff| / max(1, |eta|)"


@register("eta/quadrature-M-curvature")
def _():
    worst = 0.0
    for th0, (s, G) in ((0.3, (2, 10)), (0.7, (2, 10)), (0.2, (2, 5)), (0.1, (5, 100))):
        w = StudyWindow(s, G)
        fd = finite_diff(lambda x: quad_M(th0, x, w), th0, 2, step=1e-3)
        worst = max(worst, _rel(fd, model.eta(th0, w)))
    w = StudyWindow(2, 10)
    return worst < 1e-4, finite_diff(lambda x: quad_M(0.3, x, w), 0.3, 2, step=1e-3), model.eta(0.3, w), f"max rel err {worst:.2e}"


@register("M/argmax-at-truth")
def _():
    w = StudyWindow(2, 10)
    grid = np.linspace(0.2, 0.4, 20001)
    best = float(grid[int(np.argmax(quad_M(0.3, grid, w)))])
    return abs(best - 0.3) <= 1e-5, best, 0.3, "grid step 1e-5"


@register("h_k/recurrences")
def _():
    worst = 0.0
    for s in (0.5, 2.0, 5.0):
        for th in (0.05, 0.3, 1.0, 4.0):
            a = s / -math.expm1(-th * s)
            b = 1.0 / th
            h1, h2, h3 = (model.h_k(th, s, k) for k in (1, 2, 3))
            # residuals scaled by the largest power a^k entering H_k
            worst = max(
                worst,
                abs(h2 - (h1 * (a + b) + a * b * -math.expm1(-th * s))) / max(1.0, a**2),
                abs(h3 - (h2 * (a + b) - a * b * h1)) / max(1.0, a**3),
            )
    return worst < 1e-12, worst, 0.0, "max recurrence residual / max(1, a^k)"


@register("h_1/sign-conditions")
def _():
    vals = [(model.h_k(th, s, 1), s) for s in (0.5, 2.0, 5.0) for th in np.geomspace(0.01, 10, 50)]
    ok = all(h < 0 and h / s + 1 > 0 for h, s in vals)
    return ok, max(h for h, _ in vals), 0.0, "H1 < 0 and H1/s + 1 > 0"


@register("delta/matches-H-form")
def _():
    worst = 0.0
    for s, G in ETA_WINDOWS:
        w = StudyWindow(s, G)
        for th in (0.05, 0.3, 1.0):
            h_form = model.alpha(th, w) * model.h_k(th, s, 2) - (-math.expm1(-th * s)) / G * model.h_k(th, s, 3)
            d = model.delta(th, w)
            worst = max(worst, abs(h_form - d) / max(1.0, abs(d)))
    return worst < 1e-10, worst, 0.0


@register("indicator-moments/monte-carlo")
def _():
    worst = 0.0
    for i, (th, s, G) in enumerate(((0.3, 2, 10), (0.1, 2, 5), (1.0, 1, 3))):
        w = StudyWindow(s, G)
        mc = mc_indicator_moments(th, w, 1_000_000, seed=1000 + i)
        zs = (
            (mc.e_l - model.moment_left(th, w)) / mc.se_l,
            (mc.e_unc - model.moment_uncensored(th, w)) / mc.se_unc,
            (mc.e_obs - model.alpha(th, w)) / mc.se_obs,
        )
        worst = max(worst, *map(abs, zs))
    return worst < 4, worst, 0.0, "max |z| < 4"


@register("objective/expansion-sum")
def _():
    from .dataio import enterprise_records
    from .estimator import profiled_objective, summarize

    w = StudyWindow(2, 10)
    recs = enterprise_records(10)
    stats = summarize(recs, w)
    direct = math.fsum(rec.weight * model.m_value(rec.triple, 0.3, w) for rec in recs) / stats.m
    obj = profiled_objective(stats, 0.3, w)
    return abs(direct - obj) < 1e-10, obj, direct


@register("estimator/grid-oracle")
def _():
    from .dataio import enterprise_records
    from .estimator import fit_mle, summarize

    w = StudyWindow(2, 5)
    stats = summarize(enterprise_records(5), w)
    g = GridSpec(0.01, 2.0, 200_000)
    best = grid_argmax(stats, w, g)
    fit = fit_mle(stats, w).theta_hat
    return abs(best - fit) <= g.step, fit, best, f"grid step {g.step:.2e}"
