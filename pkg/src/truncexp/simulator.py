"""Latent-data simulation and Monte Carlo studies of the rate estimator.

Replication ``k`` of a study seeded with ``seed`` draws from
``numpy.random.default_rng(SeedSequence(seed, spawn_key=(k,)))``; this is
the same stream ``SeedSequence(seed).spawn(...)[k]`` would produce, so
replications can be run in any order or in parallel.  A single sample
drawn by :func:`simulate_sample` uses ``SeedSequence(seed)`` directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .estimator import FitError, ObservedRecord, fit_mle, summarize_arrays
from .model import ObservedTriple, ParamDomain, StudyWindow

__all__ = [
    "LatentUnit",
    "LatentSample",
    "SimConfig",
    "SimulatedSample",
    "StudyReport",
    "DegenerateSampleError",
    "replication_rng",
    "draw_latent",
    "reduce",
    "reduce_arrays",
    "simulate_sample",
    "mc_study",
]


class DegenerateSampleError(RuntimeError):
    """No latent unit was observable."""


@dataclass(frozen=True)
class LatentUnit:
    x: float
    t: float


@dataclass(frozen=True)
class SimConfig:
    theta0: float
    w: StudyWindow
    n: int
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.theta0) and self.theta0 > 0):
            raise ValueError(f"theta0 must be positive, got {self.theta0}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class LatentSample:
    """Column view of ``n`` latent units."""

    x: np.ndarray
    t: np.ndarray

    def __len__(self):
        return len(self.x)

    def __getitem__(self, i) -> LatentUnit:
        return LatentUnit(float(self.x[i]), float(self.t[i]))

    def __iter__(self):
        return (LatentUnit(float(a), float(b)) for a, b in zip(self.x, self.t))


def replication_rng(seed: int, k: int | None = None) -> np.random.Generator:
    if k is None:
        return np.random.default_rng(np.random.SeedSequence(seed))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))


def draw_latent(cfg: SimConfig, rng: np.random.Generator | None = None) -> LatentSample:
    """Draw ``n`` independent ``(X, T)`` pairs.

    Lifespans use inverse-CDF sampling ``-log(1 - U) / theta0``; ages at
    study begin are uniform on ``[-s, G - s]``.
    """
    rng = rng if rng is not None else replication_rng(cfg.seed)
    u = rng.random(cfg.n)
    v = rng.random(cfg.n)
    x = -np.log1p(-u) / cfg.theta0
    t = -cfg.w.s + cfg.w.G * v
    return LatentSample(x, t)


def reduce_arrays(x, t, w: StudyWindow):
    """Vectorized reduction of latent pairs.

    Returns ``(y, l, r, observed)``; ``observed`` masks units that survive
    the truncation rules.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    s = w.s
    l = (t > 0).astype(np.int8)
    r = (t + s < x).astype(np.int8)
    y = np.where(t > 0, x - t, np.where(x <= t + s, x, t + s))
    observed = ~((l == 1) & (r == 1)) & ~((l == 1) & (r == 0) & (y < 0))
    return y, l, r, observed


def reduce(u: LatentUnit, w: StudyWindow) -> ObservedTriple | None:
    """Observable triple of one latent unit, or ``None`` if it is truncated."""
    y, l, r, obs = reduce_arrays(u.x, u.t, w)
    if not obs:
        return None
    return ObservedTriple(float(y), int(l), int(r))


@dataclass(frozen=True)
class SimulatedSample:
    y: np.ndarray
    l: np.ndarray
    r: np.ndarray
    n_latent: int

    @property
    def m_observed(self) -> int:
        return len(self.y)

    def records(self) -> list[ObservedRecord]:
        return [ObservedRecord.of(a, b, c) for a, b, c in zip(self.y.tolist(), self.l.tolist(), self.r.tolist())]

    def stats(self, w: StudyWindow):
        return summarize_arrays(self.y, self.l, self.r, 1.0, w)


def simulate_sample(cfg: SimConfig, rng: np.random.Generator | None = None) -> SimulatedSample:
    latent = draw_latent(cfg, rng)
    y, l, r, obs = reduce_arrays(latent.x, latent.t, cfg.w)
    if not obs.any():
        raise DegenerateSampleError(f"none of the {cfg.n} latent units is observable")
    return SimulatedSample(y[obs], l[obs], r[obs], cfg.n)


@dataclass
class StudyReport:
    theta0: float
    n: int
    level: float
    replications: int
    failures: int
    mean_theta: float
    sd_theta: float
    mean_se: float
    coverage: float
    mean_observed: float
    standardized: np.ndarray = field(repr=False)
    theta_hats: np.ndarray = field(repr=False)
    ses: np.ndarray = field(repr=False)

    JSON_KEYS = (
        "theta0",
        "n",
        "level",
        "replications",
        "failures",
        "mean_theta",
        "sd_theta",
        "mean_se",
        "coverage",
        "mean_observed",
    )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.JSON_KEYS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _one_replication(cfg: SimConfig, k: int, dom: ParamDomain, level: float):
    sample = simulate_sample(cfg, replication_rng(cfg.seed, k))
    fit = fit_mle(sample.stats(cfg.w), cfg.w, dom, level=level)
    if not (fit.converged and math.isfinite(fit.se) and fit.se > 0):
        raise FitError(f"replication {k} did not produce a usable fit")
    return fit.theta_hat, fit.se, fit.ci_low, fit.ci_high, sample.m_observed


def mc_study(
    cfg: SimConfig,
    replications: int,
    level: float = 0.95,
    dom: ParamDomain | None = None,
) -> StudyReport:
    """Repeat simulate-and-fit ``replications`` times and summarize the estimates.

    Failed replications are counted in ``failures`` and left out of the
    summaries.
    """
    if replications < 2:
        raise ValueError("need at least 2 replications")
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    dom = dom or ParamDomain()
    rows = []
    failures = 0
    for k in range(replications):
        try:
            rows.append(_one_replication(cfg, k, dom, level))
        except (FitError, DegenerateSampleError, ValueError):
            failures += 1
    if len(rows) < 2:
        raise RuntimeError(f"only {len(rows)} of {replications} replications succeeded")
    arr = np.array(rows)
    th, se, lo, hi, mobs = arr.T
    return StudyReport(
        theta0=cfg.theta0,
        n=cfg.n,
        level=level,
        replications=replications,
        failures=failures,
        mean_theta=float(th.mean()),
        sd_theta=float(th.std(ddof=1)),
        mean_se=float(se.mean()),
        coverage=float(np.mean((lo <= cfg.theta0) & (cfg.theta0 <= hi))),
        mean_observed=float(mobs.mean()),
        standardized=(th - cfg.theta0) / se,
        theta_hats=th,
        ses=se,
    )
