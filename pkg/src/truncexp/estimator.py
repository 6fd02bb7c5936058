"""Profile-likelihood estimation of the exponential rate from observed triples."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize, stats as sps

from .model import (
    CELLS,
    ObservedTriple,
    ParamDomain,
    StudyWindow,
    alpha,
    alpha_d1,
    alpha_d2,
    in_support,
    k_d1,
    k_d2,
    k_log,
)

__all__ = [
    "FitError",
    "ObservedRecord",
    "SufficientStats",
    "FitResult",
    "summarize",
    "summarize_arrays",
    "profiled_objective",
    "profiled_score",
    "fit_mle",
    "standard_error",
    "population_size_estimate",
    "confidence_interval",
]

PRESCAN_POINTS = 64


class FitError(RuntimeError):
    """Raised when the criterion cannot be maximized or its curvature is unusable."""


@dataclass(frozen=True)
class ObservedRecord:
    """An observed triple carrying an aggregation weight (a count)."""

    triple: ObservedTriple
    weight: float = 1.0

    def __post_init__(self):
        t = self.triple
        if t.l not in (0, 1) or t.r not in (0, 1):
            raise ValueError(f"indicators must be 0 or 1, got l={t.l}, r={t.r}")
        if (t.l, t.r) == (1, 1):
            raise ValueError("(l, r) = (1, 1) is never observable")
        if not math.isfinite(t.y):
            raise ValueError(f"y must be finite, got {t.y}")
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise ValueError(f"weight must be a finite non-negative number, got {self.weight}")

    @classmethod
    def of(cls, y: float, l: int, r: int, weight: float = 1.0) -> "ObservedRecord":
        return cls(ObservedTriple(float(y), int(l), int(r)), float(weight))

    @property
    def y(self) -> float:
        return self.triple.y

    @property
    def l(self) -> int:
        return self.triple.l

    @property
    def r(self) -> int:
        return self.triple.r


@dataclass(frozen=True)
class SufficientStats:
    """Total weight and weighted means that determine the profiled criterion.

    ``cell_w``, ``cell_y`` and ``cell_y2`` hold per-cell sums of ``w``,
    ``w*y`` and ``w*y**2`` in the order ``(0,0), (0,1), (1,0)``; they are
    needed for the standard error and are ``None`` when the stats were
    built from means alone.
    """

    m: float
    mean_y: float
    mean_l: float
    mean_unc: float
    cell_w: tuple[float, float, float] | None = None
    cell_y: tuple[float, float, float] | None = None
    cell_y2: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"total weight must be positive, got {self.m}")
        if not (0.0 <= self.mean_l <= 1.0 and 0.0 <= self.mean_unc <= 1.0):
            raise ValueError("mean_l and mean_unc must lie in [0, 1]")
        if self.mean_l + self.mean_unc > 1.0 + 1e-12:
            raise ValueError("mean_l + mean_unc must not exceed 1")
        if self.mean_y < 0:
            raise ValueError(f"mean_y must be non-negative, got {self.mean_y}")

    @classmethod
    def from_means(cls, m: float, mean_y: float, mean_l: float, mean_unc: float) -> "SufficientStats":
        return cls(float(m), float(mean_y), float(mean_l), float(mean_unc))

    @property
    def has_cells(self) -> bool:
        return self.cell_w is not None


def summarize_arrays(y, l, r, weight, w: StudyWindow) -> SufficientStats:
    """Reduce parallel arrays of triples and weights to :class:`SufficientStats`.

    Sums use :func:`math.fsum`, so the result does not depend on record order.
    """
    y = np.asarray(y, dtype=float)
    l = np.asarray(l, dtype=int)
    r = np.asarray(r, dtype=int)
    weight = np.broadcast_to(np.asarray(weight, dtype=float), y.shape)
    if not (y.shape == l.shape == r.shape):
        raise ValueError("y, l and r must have the same shape")
    if np.any(~np.isfinite(weight)) or np.any(weight < 0):
        bad = int(np.flatnonzero(~np.isfinite(weight) | (weight < 0))[0])
        raise ValueError(f"record {bad}: weight must be finite and non-negative, got {weight[bad]}")
    keep = weight > 0
    inside = in_support(y, l, r, w.s)
    bad = np.flatnonzero(keep & ~np.asarray(inside))
    if bad.size:
        j = int(bad[0])
        raise ValueError(
            f"record {j}: triple (y={y[j]}, l={l[j]}, r={r[j]}) lies outside the support for s={w.s}"
        )

    cw, cy, cy2 = [], [], []
    for cl, cr in CELLS:
        sel = keep & (l == cl) & (r == cr)
        ws, ys = weight[sel], y[sel]
        cw.append(math.fsum(ws))
        cy.append(math.fsum(ws * ys))
        cy2.append(math.fsum(ws * ys * ys))
    m = math.fsum(cw)
    if not m > 0:
        raise ValueError("no positive-weight records to summarize")
    return SufficientStats(
        m=m,
        mean_y=math.fsum(cy) / m,
        mean_l=cw[2] / m,
        mean_unc=cw[0] / m,
        cell_w=tuple(cw),
        cell_y=tuple(cy),
        cell_y2=tuple(cy2),
    )


def summarize(records: Iterable[ObservedRecord], w: StudyWindow) -> SufficientStats:
    records = list(records)
    if not records:
        raise ValueError("no records to summarize")
    return summarize_arrays(
        [rec.y for rec in records],
        [rec.l for rec in records],
        [rec.r for rec in records],
        [rec.weight for rec in records],
        w,
    )


def profiled_objective(stats: SufficientStats, theta, w: StudyWindow):
    """Average profiled log-likelihood per observation, up to theta-free constants."""
    th = np.asarray(theta, dtype=float)
    val = (
        -np.log(alpha(th, w))
        - th * stats.mean_y
        + k_log(th, w) * stats.mean_l
        + np.log(th) * stats.mean_unc
    )
    return float(val) if val.ndim == 0 else val


def profiled_score(stats: SufficientStats, theta, w: StudyWindow):
    """Analytic theta-derivative of :func:`profiled_objective`."""
    th = np.asarray(theta, dtype=float)
    val = (
        -alpha_d1(th, w) / alpha(th, w)
        - stats.mean_y
        + k_d1(th, w) * stats.mean_l
        + stats.mean_unc / th
    )
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class FitResult:
    theta_hat: float
    se: float
    alpha_hat: float
    n_hat: float
    life_expectancy: float
    ci_low: float
    ci_high: float
    level: float
    objective_at_max: float
    converged: bool
    iterations: int
    at_boundary: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _cell_derivs(theta: float, w: StudyWindow):
    """Per-cell ``(c, d2)`` with ``m_d1 = c - y`` and ``m_d2 = d2`` inside the cell."""
    a = alpha(theta, w)
    ad = alpha_d1(theta, w)
    add = alpha_d2(theta, w)
    base1 = -ad / a
    base2 = -add / a + (ad / a) ** 2
    out = []
    for l, r in CELLS:
        unc = (1 - l) * (1 - r)
        c = base1 + k_d1(theta, w) * l + unc / theta
        d2 = base2 + k_d2(theta, w) * l - unc / theta**2
        out.append((c, d2))
    return out


def standard_error(data: SufficientStats | Sequence[ObservedRecord], theta_hat: float, w: StudyWindow) -> float:
    """Observable standard error of the rate estimate.

    ``sqrt(sum w m'(y)^2) / |sum w m''(y)|`` over observed records; the latent
    sample size cancels.
    """
    stats = data if isinstance(data, SufficientStats) else summarize(data, w)
    if not stats.has_cells:
        raise ValueError("standard error needs per-cell sums; build the stats with summarize()")
    num_terms, den_terms = [], []
    for (c, d2), W, WY, WY2 in zip(_cell_derivs(theta_hat, w), stats.cell_w, stats.cell_y, stats.cell_y2):
        # sum w (c - y)^2 = c^2 W - 2 c WY + WY2
        num_terms += [c * c * W, -2.0 * c * WY, WY2]
        den_terms.append(d2 * W)
    num = math.fsum(num_terms)
    den = math.fsum(den_terms)
    if den == 0.0 or not math.isfinite(den):
        raise FitError("summed curvature is zero at theta_hat; the information is singular")
    if den > 0.0:
        raise FitError(f"summed curvature {den:.6g} is positive at theta_hat; not a maximum")
    return math.sqrt(max(num, 0.0)) / abs(den)


def population_size_estimate(stats: SufficientStats, theta_hat: float, w: StudyWindow) -> float:
    return stats.m / alpha(theta_hat, w)


def confidence_interval(theta_hat: float, se: float, level: float = 0.95) -> tuple[float, float]:
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    z = float(sps.norm.ppf(0.5 * (1.0 + level)))
    return max(theta_hat - z * se, 0.0), theta_hat + z * se


def _prescan(stats: SufficientStats, w: StudyWindow, dom: ParamDomain):
    grid = np.geomspace(dom.lo, dom.hi, PRESCAN_POINTS)
    with np.errstate(all="ignore"):
        vals = profiled_objective(stats, grid, w)
    if not np.all(np.isfinite(vals)):
        bad = grid[~np.isfinite(vals)][0]
        raise FitError(f"objective is not finite at theta={bad:.6g} during the pre-scan")
    vmax = vals.max()
    # leftmost grid point tied with the maximum
    i = int(np.flatnonzero(vals >= vmax - 1e-14 * max(1.0, abs(vmax)))[0])
    return grid, i


def fit_mle(
    stats: SufficientStats,
    w: StudyWindow,
    dom: ParamDomain | None = None,
    tol: float = 1e-10,
    level: float = 0.95,
) -> FitResult:
    """Maximize the profiled criterion over ``[eps, 1/eps]``.

    A 64-point log-grid pre-scan picks the bracket around the best grid
    point, a bounded Brent search maximizes inside it, and the analytic
    score is root-polished in the bracket so ``theta_hat`` meets ``tol``.
    """
    dom = dom or ParamDomain()
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    grid, i = _prescan(stats, w, dom)
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]

    def neg(th):
        return -profiled_objective(stats, th, w)

    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": tol, "maxiter": 1000})
    theta = float(res.x)
    iterations = int(res.nfev)
    converged = bool(res.success)

    s_lo = profiled_score(stats, lo, w)
    s_hi = profiled_score(stats, hi, w)
    at_boundary = False
    if s_lo > 0 > s_hi:
        root, info = optimize.brentq(
            lambda th: profiled_score(stats, th, w), lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, full_output=True
        )
        if -neg(root) >= -neg(theta) - 1e-15 * max(1.0, abs(neg(theta))):
            theta = float(root)
        iterations += info.iterations
        converged = converged or info.converged
    elif i == 0 and s_lo <= 0:
        theta, at_boundary, converged = float(dom.lo), True, True
    elif i == len(grid) - 1 and s_hi >= 0:
        theta, at_boundary, converged = float(dom.hi), True, True

    a_hat = alpha(theta, w)
    if stats.has_cells:
        try:
            se = standard_error(stats, theta, w)
        except FitError:
            if not at_boundary:
                raise
            se = math.nan
    else:
        se = math.nan
    if math.isfinite(se):
        ci_low, ci_high = confidence_interval(theta, se, level)
    else:
        ci_low = ci_high = math.nan
    return FitResult(
        theta_hat=theta,
        se=se,
        alpha_hat=a_hat,
        n_hat=stats.m / a_hat,
        life_expectancy=1.0 / theta,
        ci_low=ci_low,
        ci_high=ci_high,
        level=level,
        objective_at_max=profiled_objective(stats, theta, w),
        converged=converged,
        iterations=iterations,
        at_boundary=at_boundary,
    )
