"""Brute-force dense reference for small instances.

Everything here is rebuilt straight from the dyad list with explicit loops
and shares no code with the sparse kernels, so it can be used to check
them.  Cost is O(N^2 M); keep inputs small.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .contact_log import DyadRecord, ServiceUserSet, UserTable


def dense_contacts(kind: str, dyads: Sequence[DyadRecord], service: ServiceUserSet, M: int) -> np.ndarray:
    """``(N, M)`` for binary kinds, ``(N, M, 2)`` sent/received for hybrid."""
    rows = {int(u): r for r, u in enumerate(service.indices)}
    N = len(rows)
    if kind == "hybrid":
        C = np.zeros((N, M, 2), dtype=np.int64)
    else:
        C = np.zeros((N, M), dtype=np.int64)
    for d in dyads:
        a, b = d.initiator, d.responder
        back = d.msgs_responder_to_initiator > 0
        if kind == "baseline":
            if a in rows:
                C[rows[a], b] = 1
        elif kind == "reciprocity_only":
            if back:
                if a in rows:
                    C[rows[a], b] = 1
                if b in rows:
                    C[rows[b], a] = 1
        elif kind == "hybrid":
            if a in rows:
                C[rows[a], b, 0] = 1
                C[rows[a], b, 1] = 1 if back else 0
            if b in rows:
                C[rows[b], a, 0] = 1 if back else 0
                C[rows[b], a, 1] = 1
        else:
            raise ValueError(kind)
    return C


def dense_degrees(dyads: Sequence[DyadRecord], M: int) -> np.ndarray:
    partners = [set() for _ in range(M)]
    for d in dyads:
        partners[d.initiator].add(d.responder)
        partners[d.responder].add(d.initiator)
    return np.array([len(p) for p in partners], dtype=np.int64)


def dense_cosine(C: np.ndarray) -> np.ndarray:
    N, M = C.shape
    S = np.zeros((N, N))
    for p in range(N):
        for q in range(N):
            if p == q:
                continue
            dot = sum(int(C[p, k]) * int(C[q, k]) for k in range(M))
            np_, nq = int(C[p].sum()), int(C[q].sum())
            S[p, q] = dot / math.sqrt(np_ * nq) if np_ and nq else 0.0
    return S


def eq1_term(x1: int, y1: int, x2: int, y2: int) -> int:
    """Unnormalised per-column agreement term, agreement (not XOR) reading."""
    agree = (1 - (x1 ^ x2)) + (1 - (y1 ^ y2))
    gate = min(int(x1 + y1 > 0), int(x2 + y2 > 0))
    return agree * gate


def dense_hybrid_similarity(H: np.ndarray, degrees: np.ndarray, service: ServiceUserSet) -> np.ndarray:
    N, M, _ = H.shape
    deg = [int(degrees[int(u)]) for u in service.indices]
    S = np.zeros((N, N))
    for p in range(N):
        for q in range(N):
            if p == q:
                continue
            total = sum(eq1_term(H[p, k, 0], H[p, k, 1], H[q, k, 0], H[q, k, 1]) for k in range(M))
            denom = deg[p] + deg[q]
            S[p, q] = total / denom if denom else 0.0
    return S


def dense_weights(kind: str, C: np.ndarray, penalty: float) -> np.ndarray:
    if kind != "hybrid":
        return C.astype(np.float64)
    N, M, _ = C.shape
    W = np.zeros((N, M))
    for k in range(N):
        for t in range(M):
            s, r = C[k, t]
            if s and r:
                W[k, t] = 1.0
            elif s or r:
                W[k, t] = 1.0 - penalty
    return W


def dense_scores(S: np.ndarray, W: np.ndarray, self_similarity: np.ndarray | None = None) -> np.ndarray:
    """``E[p, t] = sum_{k != p} S[p, k] * W[k, t]`` accumulated in ascending k.

    With ``self_similarity`` the ``k == p`` term is added using that value
    in place of the (zero) diagonal.
    """
    N, M = W.shape
    E = np.zeros((N, M))
    for p in range(N):
        for t in range(M):
            acc = 0.0
            for k in range(N):
                if k == p:
                    if self_similarity is not None:
                        acc += self_similarity[p] * W[p, t]
                    continue
                acc += S[p, k] * W[k, t]
            E[p, t] = acc
    return E


def reference_model(kind: str, dyads: Sequence[DyadRecord], service: ServiceUserSet, users: UserTable,
                    penalty: float = 0.6) -> tuple[np.ndarray, np.ndarray]:
    """Dense similarity and full score matrix for one model."""
    C = dense_contacts(kind, dyads, service, users.M)
    if kind == "hybrid":
        S = dense_hybrid_similarity(C, dense_degrees(dyads, users.M), service)
    else:
        S = dense_cosine(C)
    return S, dense_scores(S, dense_weights(kind, C, penalty))
