"""Similarity between service users.

Binary models use cosine similarity between contact rows.  The hybrid model
scores each shared column by how many of the two cell components agree
(taste bit and attractiveness bit), gated on both users having interacted
with that column, and normalises by the sum of the two users' degrees.

Both kernels are sparse: they reduce to integer sparse products of the
contact layers, so numerators are exact and the result does not depend on
how the column range is sharded across workers.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np
import scipy.sparse as sp

from .contact_log import ServiceUserSet, UserTable
from .matrices import EMPTY_CELL, BinaryContactMatrix, DyadCell, DyadContactMatrix


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric N x N similarities over service-user rows, zero diagonal."""

    model_kind: str
    service: ServiceUserSet
    csr: sp.csr_matrix

    def get(self, r: int, q: int) -> float:
        if r == q:
            return 0.0
        row = slice(self.csr.indptr[r], self.csr.indptr[r + 1])
        idx = self.csr.indices[row]
        pos = np.searchsorted(idx, q)
        if pos < len(idx) and idx[pos] == q:
            return float(self.csr.data[row][pos])
        return 0.0

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    @property
    def nnz(self) -> int:
        return self.csr.nnz


def _gram(left: sp.csr_matrix, right: Optional[sp.csr_matrix] = None, workers: int = 1) -> sp.csr_matrix:
    """Integer ``left @ right.T`` accumulated over column shards."""
    right = left if right is None else right
    M = left.shape[1]
    if workers <= 1 or M < 2 * workers:
        return sp.csr_matrix(left @ right.T, dtype=np.int64)
    left_c, right_c = left.tocsc(), right.tocsc()
    bounds = np.linspace(0, M, workers + 1).astype(int)

    def shard(i):
        lo, hi = bounds[i], bounds[i + 1]
        return sp.csr_matrix(left_c[:, lo:hi] @ right_c[:, lo:hi].T, dtype=np.int64)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(shard, range(workers)))
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    return sp.csr_matrix(total, dtype=np.int64)


def _finish(numer: sp.csr_matrix, denom_fn) -> sp.csr_matrix:
    coo = sp.coo_matrix(numer)
    keep = (coo.row != coo.col) & (coo.data != 0)
    rows, cols, num = coo.row[keep], coo.col[keep], coo.data[keep]
    vals = num / denom_fn(rows, cols)
    out = sp.csr_matrix((vals, (rows, cols)), shape=numer.shape, dtype=np.float64)
    out.sort_indices()
    return out


def cosine_similarity(matrix: BinaryContactMatrix, workers: int = 1) -> SimilarityMatrix:
    """Cosine between binary rows; an empty row gives 0 against everything."""
    C = sp.csr_matrix(matrix.csr, dtype=np.int64)
    overlap = _gram(C, workers=workers)
    size = np.diff(C.indptr).astype(np.int64)
    csr = _finish(overlap, lambda r, c: np.sqrt((size[r] * size[c]).astype(np.float64)))
    return SimilarityMatrix(matrix.model_kind, matrix.service, csr)


def f_agreement(cell_p: Optional[DyadCell], cell_q: Optional[DyadCell]) -> int:
    """Number of agreeing components, or 0 if either user never touched k."""
    p = EMPTY_CELL if cell_p is None else cell_p
    q = EMPTY_CELL if cell_q is None else cell_q
    if not (p.sent or p.received) or not (q.sent or q.received):
        return 0
    return int(p.sent == q.sent) + int(p.received == q.received)


def hybrid_numerator(matrix: DyadContactMatrix, workers: int = 1) -> sp.csr_matrix:
    """Sum of per-column agreement scores for every service-user pair.

    With one-hot layers A (sent only), B (received only) and D (both), a
    shared column scores 2 for same type, 1 for D against A or B, 0 for A
    against B.
    """
    A, B, D = (sp.csr_matrix(x, dtype=np.int64) for x in matrix.layers())
    same = _gram(A, workers=workers) + _gram(B, workers=workers) + _gram(D, workers=workers)
    partial = _gram(A + B, D, workers=workers)
    return sp.csr_matrix(2 * same + partial + partial.T, dtype=np.int64)


def hybrid_similarity(matrix: DyadContactMatrix, degrees: np.ndarray, workers: int = 1) -> SimilarityMatrix:
    numer = hybrid_numerator(matrix, workers=workers)
    deg = np.asarray(degrees, dtype=np.int64)[matrix.service.indices]

    # zero numerators are dropped first, so 0/0 never reaches the division
    csr = _finish(numer, lambda r, c: (deg[r] + deg[c]).astype(np.float64))
    return SimilarityMatrix(matrix.model_kind, matrix.service, csr)


def compute_similarity(matrix, degrees: Optional[np.ndarray] = None, workers: int = 1) -> SimilarityMatrix:
    if isinstance(matrix, DyadContactMatrix):
        if degrees is None:
            raise ValueError("hybrid similarity needs the degree map")
        return hybrid_similarity(matrix, degrees, workers=workers)
    return cosine_similarity(matrix, workers=workers)


def dump_similarity(sim: SimilarityMatrix, users: UserTable, out: TextIO) -> None:
    """Write ``user_p,user_q,score`` once per unordered pair."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("user_p", "user_q", "score"))
    coo = sp.triu(sim.csr, k=1).tocsr()
    idx = sim.service.indices
    for r in range(coo.shape[0]):
        for c, v in zip(coo.indices[coo.indptr[r]:coo.indptr[r + 1]], coo.data[coo.indptr[r]:coo.indptr[r + 1]]):
            w.writerow((users.id_of(int(idx[r])), users.id_of(int(idx[c])), f"{v:.12g}"))
