"""Seeded Monte Carlo engine: sampling, Hill curves, and verification tables.

Samples heavy-tailed vectors with normal dependence by the exact inverse-cdf
construction X_j = (1 - Phi(Z_j))^{-1/alpha}, Z ~ N(0, Sigma). Randomness is
counter-based: every fixed 8192-row block derives its own substream from
(seed, block index), so output is bit-identical for a given seed no matter
how generation is chunked or threaded.

On top of the sampler: derived per-row series (minima over subsets, order
statistics), the Hill tail-index estimator, empirical survival curves, the
conditional exceedance curves P(V1 > t | V2 > kappa t), and the
empirical-versus-asymptotic verification table with its log-log slope
diagnostic.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import ndtr

from .asymptotics import (
    PARETO_EXACT,
    AsymptoticEstimate,
    AtLeastI,
    ComplementBox,
    MarginalSpec,
    Rectangular,
    TailSetSpec,
    asymptotic_estimate,
)
from .linalg import CorrelationMatrix, IndexSubset, spd_factorize

# Substreams are derived per logical block of this many rows. The block size
# is part of the determinism contract: changing it changes every sample.
BLOCK_ROWS = 8192

# Below this many exceedances an empirical/asymptotic ratio is noise.
LOW_HIT_THRESHOLD = 50

DEFAULT_HILL_POINTS = 40

THREAD_ENV_VAR = "ARTIFACT_THREADS"


def _thread_count() -> int:
    raw = os.environ.get(THREAD_ENV_VAR, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{THREAD_ENV_VAR} must be an integer, got {raw!r}") from None
    return max(1, value)


@dataclass(frozen=True)
class SimulationConfig:
    """Sampling plan: matrix, marginal, sample count, seed, chunk granularity.

    chunk only groups blocks into parallel tasks; it never changes values.
    """

    sigma: CorrelationMatrix
    marg: MarginalSpec
    n: int
    seed: int
    chunk: int = 1 << 18

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not (isinstance(self.chunk, int) and self.chunk >= 1):
            raise ValueError(f"chunk must be a positive integer, got {self.chunk!r}")
        if self.marg.family != PARETO_EXACT:
            raise ValueError("simulation requires the pareto-exact marginal family")


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(block,)))
    )


def _gaussian_sample(cfg: SimulationConfig) -> np.ndarray:
    """n x d correlated standard normal rows, bit-reproducible per seed."""
    lower = spd_factorize(cfg.sigma).lower
    d = cfg.sigma.dim
    n_blocks = -(-cfg.n // BLOCK_ROWS)

    def build_block(block: int) -> np.ndarray:
        rows = min(BLOCK_ROWS, cfg.n - block * BLOCK_ROWS)
        eta = _block_rng(cfg.seed, block).standard_normal((rows, d))
        return eta @ lower.T

    blocks_per_task = max(1, cfg.chunk // BLOCK_ROWS)
    tasks = [
        range(start, min(start + blocks_per_task, n_blocks))
        for start in range(0, n_blocks, blocks_per_task)
    ]

    def build_task(block_range: range) -> np.ndarray:
        parts = [build_block(b) for b in block_range]
        return parts[0] if len(parts) == 1 else np.concatenate(parts, axis=0)

    threads = _thread_count()
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(build_task, tasks))
    else:
        chunks = [build_task(task) for task in tasks]
    return chunks[0] if len(chunks) == 1 else np.concatenate(chunks, axis=0)


def sample_rvgc(cfg: SimulationConfig) -> np.ndarray:
    """n x d sample of the heavy-tailed vector: X_j = survival(Z_j)^{-1/alpha}."""
    z = _gaussian_sample(cfg)
    return np.power(ndtr(-z), -1.0 / cfg.marg.alpha)


@dataclass(frozen=True)
class MinOverSet:
    """Rowwise minimum over a coordinate subset."""

    subset: IndexSubset


@dataclass(frozen=True)
class OrderStatistic:
    """Rowwise rank-th largest coordinate (rank 1 is the maximum)."""

    rank: int

    def __post_init__(self):
        if not (isinstance(self.rank, int) and self.rank >= 1):
            raise ValueError(f"rank must be a positive integer, got {self.rank!r}")


@dataclass(frozen=True)
class MaxAll:
    """Rowwise maximum over all coordinates."""


@dataclass(frozen=True)
class Coordinate:
    """One raw coordinate, 1-based label."""

    label: int

    def __post_init__(self):
        if not (isinstance(self.label, int) and self.label >= 1):
            raise ValueError(f"label must be a positive integer, got {self.label!r}")


SeriesSelector = Union[MinOverSet, OrderStatistic, MaxAll, Coordinate]


def derived_series(samples: np.ndarray, selector: SeriesSelector) -> np.ndarray:
    """Reduce each sample row to the scalar the selector describes."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise ValueError(f"samples must be an n x d matrix, got shape {samples.shape}")
    d = samples.shape[1]
    if isinstance(selector, MinOverSet):
        selector.subset.validate_within(d)
        return np.min(samples[:, selector.subset.as_indices()], axis=1)
    if isinstance(selector, OrderStatistic):
        if selector.rank > d:
            raise ValueError(f"rank {selector.rank} exceeds dimension {d}")
        kth = d - selector.rank
        return np.partition(samples, kth, axis=1)[:, kth]
    if isinstance(selector, MaxAll):
        return np.max(samples, axis=1)
    if isinstance(selector, Coordinate):
        if selector.label > d:
            raise ValueError(f"label {selector.label} exceeds dimension {d}")
        return samples[:, selector.label - 1]
    raise TypeError(f"unsupported series selector: {selector!r}")


@dataclass(frozen=True)
class HillCurve:
    """Tail-index estimates along the number of order statistics used.

    excluded_k lists grid points whose Hill mean was 0 (constant upper tail),
    where the estimate is undefined.
    """

    k_values: tuple[int, ...]
    alpha_hat: tuple[float, ...]
    series_label: str
    excluded_k: tuple[int, ...] = ()


def default_k_grid(n: int) -> tuple[int, ...]:
    """40 log-spaced order-statistic counts in [10, n/4], deduplicated."""
    if n < 41:
        raise ValueError(f"default grid needs n >= 41 observations, got {n}")
    ks = np.unique(
        np.round(np.geomspace(10, max(10, n // 4), DEFAULT_HILL_POINTS)).astype(int)
    )
    return tuple(int(k) for k in ks)


def hill_estimator(
    data, k_grid: Optional[Sequence[int]] = None, series_label: str = "series"
) -> HillCurve:
    """Hill tail-index curve: alpha_hat(k) = k / sum log(X_(i)/X_(k+1)), i <= k."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"data must be one-dimensional, got shape {x.shape}")
    if x.size == 0 or not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("hill estimator needs strictly positive finite data")
    n = x.size
    if k_grid is None:
        ks = default_k_grid(n)
    else:
        ks = tuple(int(k) for k in k_grid)
        if len(ks) == 0:
            raise ValueError("k_grid must be nonempty")
        if any(ks[i] >= ks[i + 1] for i in range(len(ks) - 1)):
            raise ValueError("k_grid must be strictly increasing")
        if ks[0] < 1 or ks[-1] > n - 1:
            raise ValueError(f"k_grid must lie in [1, {n - 1}], got [{ks[0]}, {ks[-1]}]")

    top_logs = np.log(np.sort(x)[::-1][: ks[-1] + 1])
    csum = np.cumsum(top_logs)
    kept, alphas, excluded = [], [], []
    for k in ks:
        mean_excess = csum[k - 1] / k - top_logs[k]
        if mean_excess <= 0.0:
            excluded.append(k)
            continue
        kept.append(k)
        alphas.append(1.0 / mean_excess)
    return HillCurve(tuple(kept), tuple(alphas), series_label, tuple(excluded))


@dataclass(frozen=True)
class EmpiricalTail:
    """Survival estimates over a threshold grid with binomial standard errors."""

    t_values: tuple[float, ...]
    probability: tuple[float, ...]
    se: tuple[float, ...]
    hits: tuple[int, ...]


def _increasing_grid(t_grid) -> tuple[float, ...]:
    ts = tuple(float(t) for t in t_grid)
    if len(ts) == 0:
        raise ValueError("t_grid must be nonempty")
    if any(not math.isfinite(t) or t <= 0 for t in ts):
        raise ValueError("t_grid must be strictly positive finite reals")
    if any(ts[i] >= ts[i + 1] for i in range(len(ts) - 1)):
        raise ValueError("t_grid must be strictly increasing")
    return ts


def empirical_tail(data, t_grid) -> EmpiricalTail:
    """Fraction of data above each threshold, with sqrt(p(1-p)/n) errors."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"data must be one-dimensional, got shape {x.shape}")
    ts = _increasing_grid(t_grid)
    n = x.size
    if n == 0:
        raise ValueError("data must be nonempty")
    probs, ses, hits = [], [], []
    for t in ts:
        count = int(np.count_nonzero(x > t))
        p = count / n
        probs.append(p)
        ses.append(math.sqrt(p * (1.0 - p) / n))
        hits.append(count)
    return EmpiricalTail(ts, tuple(probs), tuple(ses), tuple(hits))


def _scaling_statistic(samples: np.ndarray, tail_set: TailSetSpec) -> np.ndarray:
    """Per-row scale at which the row enters the tail set: the event
    {row in t * set} is exactly {statistic > t}."""
    d = samples.shape[1]
    if isinstance(tail_set, Rectangular):
        tail_set.subset.validate_within(d)
        scaled = samples[:, tail_set.subset.as_indices()] / np.asarray(tail_set.thresholds)
        return np.min(scaled, axis=1)
    if isinstance(tail_set, ComplementBox):
        if len(tail_set.thresholds) != d:
            raise ValueError(f"need {d} thresholds, got {len(tail_set.thresholds)}")
        return np.max(samples / np.asarray(tail_set.thresholds), axis=1)
    if isinstance(tail_set, AtLeastI):
        if len(tail_set.thresholds) != d:
            raise ValueError(f"need {d} thresholds, got {len(tail_set.thresholds)}")
        scaled = samples / np.asarray(tail_set.thresholds)
        kth = d - tail_set.level
        return np.partition(scaled, kth, axis=1)[:, kth]
    raise TypeError(f"unsupported tail set specification: {tail_set!r}")


@dataclass(frozen=True)
class VerificationRow:
    t: float
    empirical: float
    se: float
    asymptotic: float
    ratio: float
    flag: str
    hits: int


@dataclass(frozen=True)
class VerificationTable:
    """Empirical versus asymptotic tail probabilities plus a slope diagnostic.

    slope is the least-squares slope of log empirical against log t over the
    rows with enough hits (nan when fewer than two qualify); slope_target is
    -a from the estimate.
    """

    rows: tuple[VerificationRow, ...]
    slope: float
    slope_target: float
    estimate: AsymptoticEstimate


def verify_asymptotics(
    cfg: SimulationConfig,
    tail_set: TailSetSpec,
    t_grid,
    samples: Optional[np.ndarray] = None,
) -> VerificationTable:
    """Compare empirical tail frequencies with the asymptotic law on a t grid.

    Rows with fewer than LOW_HIT_THRESHOLD exceedances are flagged
    "low-hits" and excluded from the slope fit. Pass precomputed samples to
    amortize one draw across several sets.
    """
    ts = _increasing_grid(t_grid)
    est = asymptotic_estimate(cfg.sigma, cfg.marg, tail_set)
    if samples is None:
        samples = sample_rvgc(cfg)
    stat = _scaling_statistic(np.asarray(samples, dtype=float), tail_set)
    n = stat.size

    rows = []
    fit_points = []
    for t in ts:
        hits = int(np.count_nonzero(stat > t))
        p = hits / n
        se = math.sqrt(p * (1.0 - p) / n)
        asym = math.exp(est.evaluate_log(t))
        ratio = p / asym if asym > 0.0 else math.nan
        flag = "ok" if hits >= LOW_HIT_THRESHOLD else "low-hits"
        rows.append(VerificationRow(t, p, se, asym, ratio, flag, hits))
        if hits >= LOW_HIT_THRESHOLD:
            fit_points.append((math.log(t), math.log(p)))

    if len(fit_points) >= 2:
        slope = float(
            np.polyfit([a for a, _ in fit_points], [b for _, b in fit_points], 1)[0]
        )
    else:
        slope = math.nan
    return VerificationTable(tuple(rows), slope, -est.power_exponent, est)


@dataclass(frozen=True)
class ConditionalCurve:
    """Empirical P(V1 > t | V2 > kappa t) along t, with conditioning counts."""

    kappa: float
    t_values: tuple[float, ...]
    probability: tuple[float, ...]
    conditioning_count: tuple[int, ...]


def conditional_exceedance_curves(
    cfg: SimulationConfig,
    kappas,
    t_grid,
    side: str = "pareto",
    samples: Optional[np.ndarray] = None,
) -> list[ConditionalCurve]:
    """Conditional exceedance of coordinate 1 given coordinate 2, per kappa.

    side "gaussian" conditions the underlying correlated normal pair, side
    "pareto" the heavy-tailed output. Grid values may be small: these are
    purely empirical curves. Cells with an empty conditioning event are nan.
    """
    if cfg.sigma.dim < 2:
        raise ValueError("conditional curves need at least two coordinates")
    ts = _increasing_grid(t_grid)
    if side == "gaussian":
        data = _gaussian_sample(cfg) if samples is None else np.asarray(samples)
    elif side == "pareto":
        data = sample_rvgc(cfg) if samples is None else np.asarray(samples)
    else:
        raise ValueError(f"side must be 'gaussian' or 'pareto', got {side!r}")
    v1, v2 = data[:, 0], data[:, 1]

    curves = []
    for kappa in kappas:
        kappa = float(kappa)
        if not (math.isfinite(kappa) and kappa > 0):
            raise ValueError(f"kappa must be a positive real, got {kappa!r}")
        probs, counts = [], []
        for t in ts:
            cond = v2 > kappa * t
            denom = int(np.count_nonzero(cond))
            joint = int(np.count_nonzero(cond & (v1 > t)))
            probs.append(joint / denom if denom else math.nan)
            counts.append(denom)
        curves.append(ConditionalCurve(kappa, ts, tuple(probs), tuple(counts)))
    return curves


def write_hill_csv(path, curves: Sequence[HillCurve]) -> None:
    """CSV schema: series,k,alpha_hat (floats via repr for byte stability)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series", "k", "alpha_hat"])
        for curve in curves:
            for k, a in zip(curve.k_values, curve.alpha_hat):
                writer.writerow([curve.series_label, k, repr(float(a))])


def write_verification_csv(path, table: VerificationTable) -> None:
    """CSV schema: t,empirical,se,asymptotic,ratio,flag."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "empirical", "se", "asymptotic", "ratio", "flag"])
        for row in table.rows:
            writer.writerow(
                [
                    repr(float(row.t)),
                    repr(float(row.empirical)),
                    repr(float(row.se)),
                    repr(float(row.asymptotic)),
                    repr(float(row.ratio)),
                    row.flag,
                ]
            )


def write_conditional_csv(path, curves_by_side: dict[str, Sequence[ConditionalCurve]]) -> None:
    """CSV schema: side,kappa,t,probability,conditioning_count."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["side", "kappa", "t", "probability", "conditioning_count"])
        for side in sorted(curves_by_side):
            for curve in curves_by_side[side]:
                for t, p, c in zip(
                    curve.t_values, curve.probability, curve.conditioning_count
                ):
                    writer.writerow(
                        [side, repr(float(curve.kappa)), repr(float(t)), repr(float(p)), c]
                    )
