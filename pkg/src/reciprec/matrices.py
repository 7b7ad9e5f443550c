"""Contact matrices for the three models plus the degree map.

All matrices have one row per service user (ascending user position) and
one column per user in the table.  They are stored as canonical CSR so
column indices within a row are always ascending.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .contact_log import DyadRecord, ServiceUserSet, UserTable
from .errors import ValidationError

BASELINE = "baseline"
RECIPROCITY_ONLY = "reciprocity_only"
HYBRID = "hybrid"
MODEL_KINDS = (BASELINE, RECIPROCITY_ONLY, HYBRID)


class DyadCell(NamedTuple):
    sent: int
    received: int


EMPTY_CELL = DyadCell(0, 0)


@dataclass(frozen=True)
class BinaryContactMatrix:
    model_kind: str
    service: ServiceUserSet
    csr: sp.csr_matrix

    @property
    def shape(self):
        return self.csr.shape

    def row(self, r: int) -> np.ndarray:
        """Ascending column indices holding a 1 in row ``r``."""
        return self.csr.indices[self.csr.indptr[r]:self.csr.indptr[r + 1]]

    def value(self, r: int, col: int) -> int:
        return int(col in set(self.row(r).tolist()))

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()


@dataclass(frozen=True)
class DyadContactMatrix:
    """Hybrid matrix stored as two aligned binary layers.

    ``sent[r, t] == 1`` when service user ``r`` messaged ``t``;
    ``received[r, t] == 1`` when ``t`` messaged ``r``.  ``pattern`` is their
    union, i.e. the stored cells.
    """

    service: ServiceUserSet
    sent: sp.csr_matrix
    received: sp.csr_matrix
    model_kind: str = HYBRID

    @property
    def shape(self):
        return self.sent.shape

    @cached_property
    def pattern(self) -> sp.csr_matrix:
        return _binary(self.sent + self.received)

    def cell(self, r: int, col: int) -> DyadCell:
        return DyadCell(int(self.sent[r, col]), int(self.received[r, col]))

    def row(self, r: int) -> list[tuple[int, DyadCell]]:
        """Stored cells of row ``r`` in ascending column order."""
        pat = self.pattern
        cols = pat.indices[pat.indptr[r]:pat.indptr[r + 1]]
        sent = np.isin(cols, self.sent.indices[self.sent.indptr[r]:self.sent.indptr[r + 1]])
        recv = np.isin(cols, self.received.indices[self.received.indptr[r]:self.received.indptr[r + 1]])
        return [(int(c), DyadCell(int(a), int(b))) for c, a, b in zip(cols, sent, recv)]

    def layers(self) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
        """One-hot layers for cell types <1,0>, <0,1>, <1,1>."""
        both = _binary(self.sent.multiply(self.received))
        sent_only = _binary(self.sent - both)
        recv_only = _binary(self.received - both)
        return sent_only, recv_only, both


def _binary(m) -> sp.csr_matrix:
    m = sp.csr_matrix(m, dtype=np.int32)
    m.data = (m.data != 0).astype(np.int32)
    m.eliminate_zeros()
    m.sum_duplicates()
    m.sort_indices()
    return m


def _check_service(service: ServiceUserSet, users: UserTable) -> None:
    if len(service) and (service.indices.min() < 0 or service.indices.max() >= users.M):
        raise ValidationError("service user absent from the user table")


def _from_pairs(rows: list[int], cols: list[int], shape) -> sp.csr_matrix:
    data = np.ones(len(rows), dtype=np.int32)
    return _binary(sp.coo_matrix((data, (rows, cols)), shape=shape))


def _service_rows(service: ServiceUserSet, M: int) -> np.ndarray:
    lookup = np.full(M, -1, dtype=np.int64)
    lookup[service.indices] = np.arange(len(service))
    return lookup


def build_baseline(train_dyads: Iterable[DyadRecord], service: ServiceUserSet, users: UserTable) -> BinaryContactMatrix:
    """1 where the service user initiated the training dyad."""
    _check_service(service, users)
    lookup = _service_rows(service, users.M)
    rows, cols = [], []
    for d in train_dyads:
        r = lookup[d.initiator]
        if r >= 0:
            rows.append(r)
            cols.append(d.responder)
    return BinaryContactMatrix(BASELINE, service, _from_pairs(rows, cols, (len(service), users.M)))


def build_reciprocity_only(train_dyads: Iterable[DyadRecord], service: ServiceUserSet, users: UserTable) -> BinaryContactMatrix:
    """1 where the training dyad is reciprocal, whoever started it."""
    _check_service(service, users)
    lookup = _service_rows(service, users.M)
    rows, cols = [], []
    for d in train_dyads:
        if not d.reciprocal:
            continue
        for a, b in ((d.initiator, d.responder), (d.responder, d.initiator)):
            if lookup[a] >= 0:
                rows.append(lookup[a])
                cols.append(b)
    return BinaryContactMatrix(RECIPROCITY_ONLY, service, _from_pairs(rows, cols, (len(service), users.M)))


def build_hybrid(train_dyads: Iterable[DyadRecord], service: ServiceUserSet, users: UserTable) -> DyadContactMatrix:
    _check_service(service, users)
    lookup = _service_rows(service, users.M)
    s_rows, s_cols, r_rows, r_cols = [], [], [], []
    for d in train_dyads:
        answered = d.msgs_responder_to_initiator >= 1
        r = lookup[d.initiator]
        if r >= 0:
            s_rows.append(r)
            s_cols.append(d.responder)
            if answered:
                r_rows.append(r)
                r_cols.append(d.responder)
        r = lookup[d.responder]
        if r >= 0:
            r_rows.append(r)
            r_cols.append(d.initiator)
            if answered:
                s_rows.append(r)
                s_cols.append(d.initiator)
    shape = (len(service), users.M)
    return DyadContactMatrix(service, _from_pairs(s_rows, s_cols, shape), _from_pairs(r_rows, r_cols, shape))


def build_matrix(kind: str, train_dyads: Sequence[DyadRecord], service: ServiceUserSet, users: UserTable):
    builders = {BASELINE: build_baseline, RECIPROCITY_ONLY: build_reciprocity_only, HYBRID: build_hybrid}
    try:
        return builders[kind](train_dyads, service, users)
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}") from None


def compute_degrees(train_dyads: Iterable[DyadRecord], users: UserTable) -> np.ndarray:
    """Distinct training partners per user in the undirected contact network."""
    deg = np.zeros(users.M, dtype=np.int64)
    for d in train_dyads:
        deg[d.initiator] += 1
        deg[d.responder] += 1
    return deg


def neighbour_matrix(train_dyads: Iterable[DyadRecord], service: ServiceUserSet, M: int) -> sp.csr_matrix:
    """Service-row x user pattern of training partners, either direction."""
    lookup = _service_rows(service, M)
    rows, cols = [], []
    for d in train_dyads:
        for a, b in ((d.initiator, d.responder), (d.responder, d.initiator)):
            if lookup[a] >= 0:
                rows.append(lookup[a])
                cols.append(b)
    return _from_pairs(rows, cols, (len(service), M))


def dump_matrix(matrix, users: UserTable, out: TextIO) -> None:
    """Debug dump ``row_user,col_user,sent,received``.

    Binary matrices leave ``received`` empty.
    """
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("row_user", "col_user", "sent", "received"))
    service = matrix.service
    if isinstance(matrix, DyadContactMatrix):
        for r, u in enumerate(service.indices):
            for col, cell in matrix.row(r):
                w.writerow((users.id_of(int(u)), users.id_of(col), cell.sent, cell.received))
    else:
        for r, u in enumerate(service.indices):
            for col in matrix.row(r):
                w.writerow((users.id_of(int(u)), users.id_of(int(col)), 1, ""))
