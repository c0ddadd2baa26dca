"""Semi-synthetic bid reconstruction from aggregate auction statistics.

Public permit-auction datasets publish only summary statistics per
auction: minimum, maximum, average, and median bid plus the number of
submitted bid-quantity pairs. This module rebuilds plausible individual
bids from those aggregates. Each auction is classified by where its
mass sits (low shoulder, high shoulder, or flat), a fraction f of the
bids is sampled in the concentrated interval and the rest in the tail,
and the reconstruction is kept only when the aggregates recomputed
from the samples land within a relative tolerance of the published
ones. A grid search picks the f that maximizes the number of auctions
kept.

The accepted per-auction bid values feed to_competing_bids, which turns
them into top-K competing profiles for the learning and richness-ratio
experiments.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Callable, Optional, Sequence

import numpy as np

from .auction import CompetingBids

__all__ = [
    "DEFAULT_TOLERANCE",
    "F_GRID",
    "ShapeClass",
    "AuctionAggregates",
    "ReconstructionReport",
    "classify_shape",
    "reconstruct",
    "aggregate_errors",
    "reconstruct_corpus",
    "grid_search_f",
    "to_competing_bids",
    "read_aggregates_csv",
    "write_aggregates_csv",
    "write_report_csv",
    "load_bundled_corpus",
]

DEFAULT_TOLERANCE = 0.05

# grid for the concentration fraction, matching the published methodology
F_GRID = tuple(round(0.50 + 0.01 * i, 2) for i in range(50))

_STATS = ("min", "max", "avg", "med")


class ShapeClass(Enum):
    TYPE_I = "type_i"  # mass on the low shoulder, thin expensive tail
    TYPE_II = "type_ii"  # mass on the high shoulder, thin cheap tail
    UNIFORM = "uniform"  # shoulders inconsistent; treat as flat


@dataclass(frozen=True)
class AuctionAggregates:
    """Published per-auction summary statistics, prices normalized to [0, 1]."""

    auction_id: str
    b_min: float
    b_max: float
    b_avg: float
    b_med: float
    n_sub: int
    K: int

    def __post_init__(self):
        stats = (self.b_min, self.b_max, self.b_avg, self.b_med)
        if not all(math.isfinite(s) for s in stats):
            raise ValueError(f"{self.auction_id}: aggregates must be finite")
        if not 0.0 <= self.b_min <= self.b_max <= 1.0:
            raise ValueError(
                f"{self.auction_id}: need 0 <= b_min <= b_max <= 1, got "
                f"[{self.b_min}, {self.b_max}]"
            )
        for name, s in (("b_avg", self.b_avg), ("b_med", self.b_med)):
            if not self.b_min <= s <= self.b_max:
                raise ValueError(
                    f"{self.auction_id}: {name}={s} outside [b_min, b_max]"
                )
        if self.n_sub < 1:
            raise ValueError(f"{self.auction_id}: n_sub must be >= 1")
        if self.K < 1:
            raise ValueError(f"{self.auction_id}: K must be >= 1")


def classify_shape(agg: AuctionAggregates) -> ShapeClass:
    """Which side of the price range holds the mass.

    The median picks the candidate side (it is the robust location
    signal); the average then has to agree that the concentrated
    interval fits inside the price range, i.e. 2*b_avg - b_min <= b_max
    for a low-shoulder auction and mirrored for a high-shoulder one.
    When median and average disagree the shoulder model is inconsistent
    with the published numbers and the auction is treated as flat.
    """
    low_candidate = 2.0 * agg.b_med <= agg.b_min + agg.b_max
    if low_candidate:
        if 2.0 * agg.b_avg <= agg.b_min + agg.b_max:
            return ShapeClass.TYPE_I
        return ShapeClass.UNIFORM
    if 2.0 * agg.b_avg >= agg.b_min + agg.b_max:
        return ShapeClass.TYPE_II
    return ShapeClass.UNIFORM


def _lower_median(sorted_ascending: np.ndarray) -> float:
    # lower median for even counts: deterministic, no interpolation
    return float(sorted_ascending[(sorted_ascending.size - 1) // 2])


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def reconstruct(agg: AuctionAggregates, f: float, rng) -> np.ndarray:
    """Sample n_sub bid values consistent with the aggregates.

    round(f * n_sub) values land in the concentrated interval and the
    rest in the tail, each uniformly. One value is pinned at b_min and
    one at b_max (inside whichever interval owns that endpoint) so the
    published extremes are reproduced exactly whenever both intervals
    are populated; interior statistics still carry the sampling noise
    the acceptance test is about.

    Returns the values in descending order.
    """
    if not 0.0 < f < 1.0:
        raise ValueError(f"f must lie in (0, 1), got {f}")
    n = agg.n_sub
    shape = classify_shape(agg)
    if shape is ShapeClass.UNIFORM:
        pins = [agg.b_min] + ([agg.b_max] if n >= 2 else [])
        body = rng.uniform(agg.b_min, agg.b_max, n - len(pins))
        values = np.concatenate((pins, body))
    else:
        n_conc = min(_round_half_up(f * n), n)
        n_tail = n - n_conc
        if shape is ShapeClass.TYPE_I:
            split = 2.0 * agg.b_avg - agg.b_min
            conc_lo, conc_hi, conc_pin = agg.b_min, split, agg.b_min
            tail_lo, tail_hi, tail_pin = split, agg.b_max, agg.b_max
        else:
            split = 2.0 * agg.b_avg - agg.b_max
            conc_lo, conc_hi, conc_pin = split, agg.b_max, agg.b_max
            tail_lo, tail_hi, tail_pin = agg.b_min, split, agg.b_min
        parts = []
        if n_conc:
            parts.append([conc_pin])
            parts.append(rng.uniform(conc_lo, conc_hi, n_conc - 1))
        if n_tail:
            parts.append([tail_pin])
            parts.append(rng.uniform(tail_lo, tail_hi, n_tail - 1))
        values = np.concatenate(parts)
    return np.sort(values)[::-1]


def aggregate_errors(agg: AuctionAggregates, values) -> dict:
    """Relative error of each recomputed aggregate against the published one."""
    v = np.sort(np.asarray(values, dtype=float))
    recomputed = {
        "min": float(v[0]),
        "max": float(v[-1]),
        "avg": float(v.mean()),
        "med": _lower_median(v),
    }
    published = {
        "min": agg.b_min,
        "max": agg.b_max,
        "avg": agg.b_avg,
        "med": agg.b_med,
    }
    return {
        k: abs(recomputed[k] - published[k]) / max(abs(published[k]), 1e-12)
        for k in _STATS
    }


@dataclass(frozen=True)
class ReconstructionReport:
    """Outcome of reconstructing a corpus at one concentration fraction."""

    f: float
    tolerance: float
    accepted: tuple
    rejected: tuple
    errors: dict  # auction_id -> {min/max/avg/med: relative error}

    @property
    def acceptance_rate(self) -> float:
        total = len(self.accepted) + len(self.rejected)
        return len(self.accepted) / total if total else 0.0


def _substreams(seed: int, n: int):
    return [np.random.default_rng(c) for c in np.random.SeedSequence(seed).spawn(n)]


def reconstruct_corpus(
    aggs: Sequence[AuctionAggregates],
    f: float,
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
    max_workers: Optional[int] = None,
):
    """Reconstruct every auction; keep those within tolerance.

    Each auction gets its own RNG substream keyed by (seed, position),
    so results are reproducible and independent of evaluation order;
    max_workers > 1 fans the auctions across a thread pool.

    Returns (report, values) where values maps accepted auction ids to
    their reconstructed bid arrays.
    """
    rngs = _substreams(seed, len(aggs))

    def one(i: int) -> np.ndarray:
        return reconstruct(aggs[i], f, rngs[i])

    if max_workers is not None and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            drawn = list(pool.map(one, range(len(aggs))))
    else:
        drawn = [one(i) for i in range(len(aggs))]

    accepted, rejected, errors, values = [], [], {}, {}
    for agg, vals in zip(aggs, drawn):
        errs = aggregate_errors(agg, vals)
        errors[agg.auction_id] = errs
        if max(errs.values()) < tolerance:
            accepted.append(agg.auction_id)
            values[agg.auction_id] = vals
        else:
            rejected.append(agg.auction_id)
    report = ReconstructionReport(
        f=f,
        tolerance=tolerance,
        accepted=tuple(accepted),
        rejected=tuple(rejected),
        errors=errors,
    )
    return report, values


def grid_search_f(
    aggs: Sequence[AuctionAggregates],
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
    grid: Sequence[float] = F_GRID,
    max_workers: Optional[int] = None,
):
    """Pick the concentration fraction keeping the most auctions.

    Every candidate f reuses the same per-auction substreams, so the
    comparison across the grid is not confounded by fresh randomness.
    Ties go to the smallest maximizing f.

    Returns (best_f, report_at_best_f).
    """
    best = None
    for f in grid:
        report, _ = reconstruct_corpus(
            aggs, f, seed=seed, tolerance=tolerance, max_workers=max_workers
        )
        if best is None or len(report.accepted) > len(best.accepted):
            best = report
    return best.f, best


def to_competing_bids(
    values,
    K: int,
    quantity_policy: Optional[Callable] = None,
) -> CompetingBids:
    """Expand reconstructed bid values into a top-K competing profile.

    The aggregates say nothing about per-pair quantities, so a policy
    maps (values, K) to per-value unit counts; the default gives every
    value ceil(1.5 * K / n_sub) units, oversubscribing the supply by
    half so the K-th highest combined bid is set by real competition
    rather than padding.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("need at least one reconstructed value")
    if K < 1:
        raise ValueError("K must be >= 1")
    if quantity_policy is None:
        per = math.ceil(1.5 * K / v.size)
        quantities = np.full(v.size, per, dtype=int)
    else:
        quantities = np.asarray(quantity_policy(v, K), dtype=int)
        if quantities.shape != v.shape or np.any(quantities < 0):
            raise ValueError("quantity_policy must give one count >= 0 per value")
    return CompetingBids.from_profile(K, np.repeat(v, quantities))


# -- corpus io ---------------------------------------------------------------

_COLUMNS = ("auction_id", "b_min", "b_max", "b_avg", "b_med", "n_sub", "K")


def read_aggregates_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [
            AuctionAggregates(
                auction_id=row["auction_id"],
                b_min=float(row["b_min"]),
                b_max=float(row["b_max"]),
                b_avg=float(row["b_avg"]),
                b_med=float(row["b_med"]),
                n_sub=int(row["n_sub"]),
                K=int(row["K"]),
            )
            for row in reader
        ]


def write_aggregates_csv(aggs: Sequence[AuctionAggregates], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for a in aggs:
            writer.writerow(
                [a.auction_id, a.b_min, a.b_max, a.b_avg, a.b_med, a.n_sub, a.K]
            )


def write_report_csv(report: ReconstructionReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["auction_id", "accepted", "err_min", "err_max", "err_avg", "err_med", "f"]
        )
        accepted = set(report.accepted)
        for auction_id, errs in report.errors.items():
            writer.writerow(
                [
                    auction_id,
                    int(auction_id in accepted),
                    errs["min"],
                    errs["max"],
                    errs["avg"],
                    errs["med"],
                    report.f,
                ]
            )


def load_bundled_corpus() -> list:
    """The synthetic 50-auction aggregates file shipped with the package."""
    ref = resources.files("bidlab") / "_data" / "ets_aggregates_synthetic.csv"
    with resources.as_file(ref) as path:
        return read_aggregates_csv(path)
