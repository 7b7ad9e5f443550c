"""Who benefits from the hybrid recommender.

Service users are split into a successful group (at least one reciprocal
contact recovered in the top K) and an unsuccessful group, then compared on
activity (Welch's t-test) and on profile attributes (distance between the
groups' mean category distributions).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .contact_log import Gender, UserTable
from .evaluation import UserMetrics

log = logging.getLogger(__name__)

ALPHA = 0.05


@dataclass(frozen=True)
class Cohorts:
    sr: tuple[int, ...]
    ur: tuple[int, ...]


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_value: float
    significant: bool


def sr_ur_split(table: Iterable[UserMetrics], K_star: int) -> Cohorts:
    sr, ur = [], []
    for row in sorted((r for r in table if r.K == K_star), key=lambda r: r.user):
        (sr if row.rc_hits >= 1 else ur).append(row.user)
    return Cohorts(tuple(sr), tuple(ur))


def welch_t_test(sample_a: Sequence[float], sample_b: Sequence[float], alpha: float = ALPHA) -> WelchResult:
    """Two-sided unequal-variance t-test.

    Raises ``ValueError`` when either sample has fewer than two values or
    both variances are zero.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError(f"each sample needs at least 2 values, got {len(a)} and {len(b)}")
    va = a.var(ddof=1) / len(a)
    vb = b.var(ddof=1) / len(b)
    se2 = va + vb
    if se2 == 0:
        raise ValueError("both samples have zero variance")
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    p = 2.0 * stats.t.sf(abs(t), df)
    return WelchResult(float(t), float(df), float(p), bool(p < alpha))


def attribute_distance(
    users: UserTable,
    cohorts: Cohorts,
    attribute_names: Sequence[str] | None = None,
) -> dict[str, list[tuple[str, float]]]:
    """Per gender, attributes ranked by descending distance between cohorts.

    Each cohort is summarised by the mean one-hot vector of an attribute's
    categories; the distance is Euclidean.  Genders with an empty cohort are
    skipped with a warning.
    """
    names = list(users.attribute_names if attribute_names is None else attribute_names)
    out = {}
    if not names:
        log.warning("no user attributes available; skipping attribute distances")
        return out
    positions = {n: i for i, n in enumerate(users.attribute_names)}
    missing = [n for n in names if n not in positions]
    if missing:
        log.warning("unknown attributes ignored: %s", ", ".join(missing))
        names = [n for n in names if n in positions]
    for g in Gender:
        sr = [u for u in cohorts.sr if users.gender_of(u) is g]
        ur = [u for u in cohorts.ur if users.gender_of(u) is g]
        if not sr or not ur:
            log.warning("empty %s cohort for gender %s; skipping attribute distances",
                        "SR" if not sr else "UR", g.value)
            continue
        ranked = []
        for name in names:
            col = positions[name]
            labels_sr = [users[u].attributes[col][1] for u in sr]
            labels_ur = [users[u].attributes[col][1] for u in ur]
            cats = sorted(set(labels_sr) | set(labels_ur))
            ranked.append((name, float(np.linalg.norm(_distribution(labels_sr, cats) - _distribution(labels_ur, cats)))))
        ranked.sort(key=lambda item: (-item[1], item[0]))
        out[g.value] = ranked
    return out


def _distribution(labels: list[str], cats: list[str]) -> np.ndarray:
    pos = {c: i for i, c in enumerate(cats)}
    vec = np.zeros(len(cats))
    for lab in labels:
        vec[pos[lab]] += 1
    return vec / len(labels)
