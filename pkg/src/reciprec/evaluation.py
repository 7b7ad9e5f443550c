"""Test-period ground truth and precision/recall at K.

Two aggregations are reported.  City level pools hits over all service
users before dividing; individual level averages each user's own ratio and
attaches a normal-approximation 95% confidence interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .contact_log import ContactEvent, DyadRecord, ServiceUserSet, UserTable, aggregate_dyads
from .recommender import RecommendationList

DEFAULT_KS = (1, 5, 10, 20, 50, 100)
CI_Z = 1.96
RC_ANY = "any"
RC_INITIATOR = "initiator"
METRICS = ("ic_precision", "ic_recall", "rc_precision", "rc_recall")


@dataclass(frozen=True)
class GroundTruth:
    ic: dict[int, frozenset]
    rc: dict[int, frozenset]
    rc_mode: str = RC_ANY

    @property
    def users(self) -> list[int]:
        return sorted(self.ic)


def ground_truth(
    test_events: Sequence[ContactEvent],
    train_dyads: Iterable[DyadRecord],
    service: ServiceUserSet,
    users: UserTable,
    rc_mode: str = RC_ANY,
) -> GroundTruth:
    """Relevant sets built from dyads that start in the test window.

    Pairs that already had a training dyad are ignored even when they keep
    messaging during the test period.
    """
    if rc_mode not in (RC_ANY, RC_INITIATOR):
        raise ValueError(f"rc_mode must be {RC_ANY!r} or {RC_INITIATOR!r}")
    members = {int(u) for u in service.indices}
    known = set()
    for d in train_dyads:
        known.add((d.initiator, d.responder))
        known.add((d.responder, d.initiator))
    ic = {u: set() for u in members}
    rc = {u: set() for u in members}
    for d in aggregate_dyads(test_events):
        if (d.initiator, d.responder) in known:
            continue
        if d.initiator in members:
            ic[d.initiator].add(d.responder)
            if d.reciprocal:
                rc[d.initiator].add(d.responder)
        if d.responder in members and d.reciprocal and rc_mode == RC_ANY:
            rc[d.responder].add(d.initiator)
    return GroundTruth(
        {u: frozenset(s) for u, s in ic.items()},
        {u: frozenset(s) for u, s in rc.items()},
        rc_mode,
    )


@dataclass(frozen=True)
class UserMetrics:
    user: int
    K: int
    ic_hits: int
    ic_set_size: int
    rc_hits: int
    rc_set_size: int

    @property
    def ic_precision(self) -> float:
        return self.ic_hits / self.K

    @property
    def rc_precision(self) -> float:
        return self.rc_hits / self.K

    @property
    def ic_recall(self) -> Optional[float]:
        return self.ic_hits / self.ic_set_size if self.ic_set_size else None

    @property
    def rc_recall(self) -> Optional[float]:
        return self.rc_hits / self.rc_set_size if self.rc_set_size else None


def precision_recall_at_k(recs: RecommendationList, truth: GroundTruth, Ks: Sequence[int]) -> list[UserMetrics]:
    """Per-user hit counts for every K, ordered by user then K."""
    table = []
    for u in truth.users:
        ranked = [c for c, _ in recs.lists.get(u, [])]
        ic, rc = truth.ic[u], truth.rc[u]
        for K in sorted(Ks):
            top = ranked[:K]
            table.append(UserMetrics(
                u, K,
                sum(1 for c in top if c in ic), len(ic),
                sum(1 for c in top if c in rc), len(rc),
            ))
    return table


def _by_k(table: Iterable[UserMetrics], Ks: Sequence[int]) -> dict[int, list[UserMetrics]]:
    grouped = {K: [] for K in Ks}
    for row in table:
        if row.K in grouped:
            grouped[row.K].append(row)
    for rows in grouped.values():
        rows.sort(key=lambda r: r.user)
    return grouped


def aggregate_city(table: Iterable[UserMetrics], Ks: Sequence[int]) -> dict[int, dict]:
    """Pooled ratios: total hits over total relevant (recall) or K x users (precision)."""
    out = {}
    for K, rows in _by_k(table, Ks).items():
        n = len(rows)
        ic_hits = sum(r.ic_hits for r in rows)
        rc_hits = sum(r.rc_hits for r in rows)
        ic_size = sum(r.ic_set_size for r in rows)
        rc_size = sum(r.rc_set_size for r in rows)
        out[K] = {
            "ic_precision": ic_hits / (K * n) if n else None,
            "ic_recall": ic_hits / ic_size if ic_size else None,
            "rc_precision": rc_hits / (K * n) if n else None,
            "rc_recall": rc_hits / rc_size if rc_size else None,
            "n_users": n,
        }
    return out


def mean_ci(values: Sequence[float], z: float = CI_Z) -> dict:
    """Mean with a ``z * sd / sqrt(n)`` half-width; no CI below two values."""
    n = len(values)
    if n == 0:
        return {"mean": None, "ci_half_width": None, "n": 0}
    arr = np.asarray(values, dtype=np.float64)
    if np.all(arr == arr[0]):
        return {"mean": float(arr[0]), "ci_half_width": 0.0 if n > 1 else None, "n": n}
    mean = math.fsum(arr) / n
    sd = math.sqrt(math.fsum((arr - mean) ** 2) / (n - 1))
    return {"mean": mean, "ci_half_width": z * sd / math.sqrt(n), "n": n}


def aggregate_individual(table: Iterable[UserMetrics], Ks: Sequence[int]) -> dict[int, dict]:
    """Per-user means; users with an empty relevant set drop out of recall."""
    out = {}
    for K, rows in _by_k(table, Ks).items():
        entry = {}
        for name in METRICS:
            vals = [getattr(r, name) for r in rows]
            entry[name] = mean_ci([v for v in vals if v is not None])
        out[K] = entry
    return out
