"""Success scores and top-K candidate lists."""
from __future__ import annotations

import csv
import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO, Union

import numpy as np
import scipy.sparse as sp

from .contact_log import DyadRecord, UserTable
from .matrices import EMPTY_CELL, MODEL_KINDS, BinaryContactMatrix, DyadCell, DyadContactMatrix
from .similarity import SimilarityMatrix

ContactData = Union[BinaryContactMatrix, DyadContactMatrix]

DEFAULT_PENALTY = 0.6
ROW_CHUNK = 256


@dataclass(frozen=True)
class RecommenderConfig:
    model_kind: str
    penalty: float = DEFAULT_PENALTY
    list_length: int = 100

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.model_kind!r}")
        if not 0.0 < self.penalty < 1.0:
            raise ValueError(f"penalty must lie in (0, 1), got {self.penalty}")
        if self.list_length < 1:
            raise ValueError(f"list_length must be >= 1, got {self.list_length}")


@dataclass
class RecommendationList:
    model_kind: str
    lists: dict[int, list[tuple[int, float]]] = field(default_factory=dict)

    def __getitem__(self, user: int) -> list[tuple[int, float]]:
        return self.lists[user]

    def __len__(self) -> int:
        return len(self.lists)

    def top(self, user: int, K: int) -> list[int]:
        return [c for c, _ in self.lists[user][:K]]


def g_penalty(cell: Optional[DyadCell], penalty: float) -> float:
    """Full weight for a two-sided cell, ``1 - penalty`` for one-sided, else 0."""
    c = EMPTY_CELL if cell is None else cell
    if c.sent and c.received:
        return 1.0
    if c.sent or c.received:
        return 1.0 - penalty
    return 0.0


def weight_matrix(contact: ContactData, penalty: float = DEFAULT_PENALTY) -> sp.csr_matrix:
    """Per-cell weights ``c[k, t]`` (binary) or ``g(c[k, t])`` (hybrid)."""
    if isinstance(contact, DyadContactMatrix):
        sent_only, recv_only, both = contact.layers()
        W = (1.0 - penalty) * sp.csr_matrix(sent_only + recv_only, dtype=np.float64) + sp.csr_matrix(both, dtype=np.float64)
    else:
        W = sp.csr_matrix(contact.csr, dtype=np.float64)
    W = sp.csr_matrix(W)
    W.sort_indices()
    return W


def candidate_set(p: int, train_dyads: Iterable[DyadRecord], users: UserTable) -> set[int]:
    """Opposite-gender users with no training dyad with ``p``."""
    touched = {d.partner_of(p) for d in train_dyads if p in (d.initiator, d.responder)}
    male = users.is_male
    return {t for t in range(users.M) if male[t] != male[p] and t not in touched}


def _check_kinds(similarity: SimilarityMatrix, contact: ContactData) -> None:
    if similarity.model_kind != contact.model_kind:
        raise ValueError(
            f"similarity built for {similarity.model_kind!r} but contact matrix is {contact.model_kind!r}"
        )


def score_candidates(
    p: int,
    similarity: SimilarityMatrix,
    contact_data: ContactData,
    config: RecommenderConfig,
    candidates: Iterable[int],
) -> list[tuple[int, float]]:
    """Scores ``E[p, t]`` for each candidate ``t``, ascending by ``t``."""
    _check_kinds(similarity, contact_data)
    r = similarity.service.row_of(p)
    W = weight_matrix(contact_data, config.penalty)
    row = sp.csr_matrix(similarity.csr[r] @ W)
    row.sort_indices()
    lookup = dict(zip(row.indices.tolist(), row.data.tolist()))
    return [(t, lookup.get(t, 0.0)) for t in sorted(candidates)]


def top_k(scored: Iterable[tuple[int, float]], K: int) -> list[tuple[int, float]]:
    """Highest scores first, ties to the smaller user index."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return heapq.nsmallest(K, scored, key=lambda item: (-item[1], item[0]))


def _select(cols: np.ndarray, vals: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Array version of :func:`top_k` using a partial partition."""
    if len(cols) > K:
        kth = np.partition(-vals, K - 1)[K - 1]
        keep = -vals <= kth
        cols, vals = cols[keep], vals[keep]
    order = np.lexsort((cols, -vals))[:K]
    return cols[order], vals[order]


class _Ranker:
    def __init__(self, similarity, W, neighbours, users, K):
        self.S = similarity.csr
        self.W = W
        self.nb = neighbours
        self.service = similarity.service
        self.K = K
        male = users.is_male
        self.male = np.asarray(male)
        self.pool = {True: np.flatnonzero(~self.male), False: np.flatnonzero(self.male)}

    def chunk(self, lo: int, hi: int) -> list[tuple[int, list[tuple[int, float]]]]:
        scores = sp.csr_matrix(self.S[lo:hi] @ self.W)
        scores.sort_indices()
        out = []
        for i, r in enumerate(range(lo, hi)):
            p = int(self.service.indices[r])
            cols = scores.indices[scores.indptr[i]:scores.indptr[i + 1]]
            vals = scores.data[scores.indptr[i]:scores.indptr[i + 1]]
            banned = self.nb.indices[self.nb.indptr[r]:self.nb.indptr[r + 1]]
            ok = (vals > 0) & (self.male[cols] != self.male[p]) & (cols != p) & ~np.isin(cols, banned)
            cols, vals = _select(cols[ok], vals[ok], self.K)
            picked = list(zip(cols.tolist(), vals.tolist()))
            need = self.K - len(picked)
            if need > 0:
                # zero-score candidates, ascending index
                pool = self.pool[bool(self.male[p])]
                skip = np.concatenate([banned, cols])
                head = pool[: need + len(skip)]
                head = head[~np.isin(head, skip)][:need]
                picked.extend((int(t), 0.0) for t in head)
            out.append((p, picked))
        return out


def recommend_all(
    similarity: SimilarityMatrix,
    contact_data: ContactData,
    neighbours: sp.csr_matrix,
    users: UserTable,
    config: RecommenderConfig,
    workers: int = 1,
) -> RecommendationList:
    """Top ``config.list_length`` candidates for every service user.

    ``neighbours`` is the service-row x user pattern of training partners;
    those users are never recommended.  Rows are scored in fixed-size
    chunks, so the output does not depend on ``workers``.
    """
    _check_kinds(similarity, contact_data)
    W = weight_matrix(contact_data, config.penalty)
    ranker = _Ranker(similarity, W, neighbours, users, config.list_length)
    N = len(similarity.service)
    spans = [(lo, min(lo + ROW_CHUNK, N)) for lo in range(0, N, ROW_CHUNK)]
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda span: ranker.chunk(*span), spans))
    else:
        parts = [ranker.chunk(*span) for span in spans]
    recs = RecommendationList(config.model_kind)
    for part in parts:
        for p, picked in part:
            recs.lists[p] = picked
    return recs


def dump_recommendations(recs: RecommendationList, users: UserTable, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("service_user", "rank", "candidate", "score"))
    for p in sorted(recs.lists):
        for rank, (t, score) in enumerate(recs.lists[p], start=1):
            w.writerow((users.id_of(p), rank, users.id_of(t), f"{score:.12g}"))
