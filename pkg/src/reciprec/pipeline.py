"""End-to-end runs: split, build, score, evaluate and write reports."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import oracle
from .cohort import attribute_distance, sr_ur_split, welch_t_test
from .contact_log import (
    ContactEvent, DyadRecord, Gender, ServiceUserSet, UserTable,
    aggregate_dyads, messages_sent, select_service_users, split_by_day,
)
from .errors import ConfigError, DataError, InvariantError
from .evaluation import (
    DEFAULT_KS, METRICS, RC_ANY, GroundTruth, UserMetrics,
    aggregate_city, aggregate_individual, ground_truth, precision_recall_at_k,
)
from .matrices import HYBRID, MODEL_KINDS, build_matrix, compute_degrees, neighbour_matrix
from .recommender import DEFAULT_PENALTY, RecommendationList, RecommenderConfig, recommend_all, weight_matrix
from .similarity import SimilarityMatrix, compute_similarity

log = logging.getLogger(__name__)

DEFAULT_SPLIT_DAY = 98
DEFAULT_THRESHOLD = 5
DEFAULT_SWEEP = (0.2, 0.4, 0.6, 0.8)
ORACLE_BUDGET = 5_000_000


class NoServiceUsers(DataError):
    pass


@dataclass
class Prepared:
    users: UserTable
    events: list[ContactEvent]
    train: list[ContactEvent]
    test: list[ContactEvent]
    train_dyads: list[DyadRecord]
    service: ServiceUserSet
    degrees: np.ndarray
    neighbours: object
    truth: GroundTruth
    split_day: int
    threshold: int


@dataclass
class ModelRun:
    kind: str
    matrix: object
    similarity: SimilarityMatrix
    recs: RecommendationList
    table: list[UserMetrics]
    penalty: Optional[float] = None


def prepare(
    users: UserTable,
    events: Sequence[ContactEvent],
    split_day: int = DEFAULT_SPLIT_DAY,
    threshold: int = DEFAULT_THRESHOLD,
    rc_mode: str = RC_ANY,
) -> Prepared:
    train, test = split_by_day(events, split_day)
    service = select_service_users(train, test, users, threshold)
    if len(service) == 0:
        raise NoServiceUsers(
            f"no service users: nobody sent >= {threshold} messages in both periods (threshold={threshold})"
        )
    train_dyads = aggregate_dyads(train)
    return Prepared(
        users=users,
        events=list(events),
        train=train,
        test=test,
        train_dyads=train_dyads,
        service=service,
        degrees=compute_degrees(train_dyads, users),
        neighbours=neighbour_matrix(train_dyads, service, users.M),
        truth=ground_truth(test, train_dyads, service, users, rc_mode),
        split_day=split_day,
        threshold=threshold,
    )


def fit_model(prep: Prepared, kind: str, workers: int = 1):
    matrix = build_matrix(kind, prep.train_dyads, prep.service, prep.users)
    sim = compute_similarity(matrix, prep.degrees if kind == HYBRID else None, workers=workers)
    return matrix, sim


def rank_and_score(prep: Prepared, kind: str, matrix, sim: SimilarityMatrix, penalty: float,
                   Ks: Sequence[int], workers: int = 1) -> ModelRun:
    config = RecommenderConfig(kind, penalty, max(Ks))
    recs = recommend_all(sim, matrix, prep.neighbours, prep.users, config, workers=workers)
    table = precision_recall_at_k(recs, prep.truth, Ks)
    return ModelRun(kind, matrix, sim, recs, table, penalty if kind == HYBRID else None)


def run_model(prep: Prepared, kind: str, penalty: float = DEFAULT_PENALTY,
              Ks: Sequence[int] = DEFAULT_KS, workers: int = 1) -> ModelRun:
    matrix, sim = fit_model(prep, kind, workers)
    return rank_and_score(prep, kind, matrix, sim, penalty, Ks, workers)


def evaluate_models(prep: Prepared, models: Iterable[str] = MODEL_KINDS, penalty: float = DEFAULT_PENALTY,
                    Ks: Sequence[int] = DEFAULT_KS, workers: int = 1) -> dict[str, ModelRun]:
    runs = {}
    for kind in models:
        if kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model {kind!r}; choose from {', '.join(MODEL_KINDS)}")
        runs[kind] = run_model(prep, kind, penalty, Ks, workers)
    return runs


def metrics_report(runs: dict[str, ModelRun], Ks: Sequence[int]) -> dict:
    report = {}
    for kind, run in runs.items():
        city = aggregate_city(run.table, Ks)
        indiv = aggregate_individual(run.table, Ks)
        report[kind] = {str(K): {"city": city[K], "individual": indiv[K]} for K in sorted(Ks)}
    return report


def sweep(prep: Prepared, penalties: Sequence[float], Ks: Sequence[int] = DEFAULT_KS,
          workers: int = 1) -> list[dict]:
    """Hybrid metrics for each penalty; similarity is fitted once."""
    if not penalties:
        raise ConfigError("penalty grid is empty")
    matrix, sim = fit_model(prep, HYBRID, workers)
    rows = []
    for s in penalties:
        run = rank_and_score(prep, HYBRID, matrix, sim, s, Ks, workers)
        city = aggregate_city(run.table, Ks)
        indiv = aggregate_individual(run.table, Ks)
        for K in sorted(Ks):
            row = {"penalty": s, "K": K}
            row.update({f"city_{m}": city[K][m] for m in METRICS})
            row.update({f"ind_{m}": indiv[K][m]["mean"] for m in METRICS})
            rows.append(row)
    return rows


def cohort_report(prep: Prepared, hybrid: ModelRun, K_star: int) -> dict:
    """SR/UR split of the hybrid run with activity and attribute comparisons."""
    cohorts = sr_ur_split(hybrid.table, K_star)
    sent = messages_sent(prep.events, prep.users.M)
    warnings_ = []
    by_gender = {}
    for g in Gender:
        sr = [u for u in cohorts.sr if prep.users.gender_of(u) is g]
        ur = [u for u in cohorts.ur if prep.users.gender_of(u) is g]
        entry = {
            "sr_size": len(sr),
            "ur_size": len(ur),
            "mean_messages_sr": float(np.mean(sent[sr])) if sr else None,
            "mean_messages_ur": float(np.mean(sent[ur])) if ur else None,
            "t_test": None,
        }
        try:
            res = welch_t_test(sent[sr], sent[ur])
            entry["t_test"] = {"t": res.t, "df": res.df, "p_value": res.p_value, "significant": res.significant}
        except ValueError as exc:
            warnings_.append(f"t-test skipped for {g.value}: {exc}")
        by_gender[g.value] = entry
    if not prep.users.attribute_names:
        warnings_.append("users have no attributes; attribute distances skipped")
        distances = {}
    else:
        distances = attribute_distance(prep.users, cohorts)
        for g in Gender:
            if g.value not in distances:
                warnings_.append(f"attribute distances skipped for {g.value}: empty cohort")
    return {
        "k_star": K_star,
        "sr_size": len(cohorts.sr),
        "ur_size": len(cohorts.ur),
        "by_gender": by_gender,
        "attribute_distances": {g: [[a, d] for a, d in ranked] for g, ranked in distances.items()},
        "warnings": warnings_,
    }


def oracle_check(prep: Prepared, runs: dict[str, ModelRun], tol: float = 1e-12) -> None:
    """Diff the sparse results against the dense brute-force path."""
    N, M = len(prep.service), prep.users.M
    if N * N * M > ORACLE_BUDGET:
        raise ConfigError(f"dense oracle refused: N^2*M = {N * N * M} exceeds {ORACLE_BUDGET}")
    for kind, run in runs.items():
        S_ref, E_ref = oracle.reference_model(kind, prep.train_dyads, prep.service, prep.users,
                                              run.penalty if run.penalty is not None else DEFAULT_PENALTY)
        S = run.similarity.to_dense()
        if np.max(np.abs(S - S_ref), initial=0.0) > tol:
            raise InvariantError(f"{kind}: sparse similarity deviates from dense oracle")
        for p, items in run.recs.lists.items():
            r = prep.service.row_of(p)
            for t, score in items:
                if abs(score - E_ref[r, t]) > tol:
                    raise InvariantError(f"{kind}: score for ({p}, {t}) deviates from dense oracle")
        E = (run.similarity.csr @ weight_matrix(run.matrix, run.penalty or DEFAULT_PENALTY)).toarray()
        if np.max(np.abs(E - E_ref), initial=0.0) > tol:
            raise InvariantError(f"{kind}: sparse scores deviate from dense oracle")


# -- report writing ---------------------------------------------------------

def round_sig(obj, digits: int = 12):
    """Recursively round floats to ``digits`` significant digits."""
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, (np.floating,)):
        return float(f"{float(obj):.{digits}g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: round_sig(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v, digits) for v in obj]
    return obj


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, obj) -> None:
    atomic_write(path, json.dumps(round_sig(obj), indent=2, sort_keys=False) + "\n")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    atomic_write(path, buf.getvalue())


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.12g}"
    return v


def per_user_rows(prep: Prepared, runs: dict[str, ModelRun]):
    for kind, run in runs.items():
        for row in run.table:
            yield (prep.users.id_of(row.user), kind, row.K, row.ic_hits, row.ic_set_size, row.rc_hits, row.rc_set_size)


PER_USER_HEADER = ("user_id", "model", "K", "ic_hits", "ic_set_size", "rc_hits", "rc_set_size")
SWEEP_HEADER = ("penalty", "K") + tuple(f"city_{m}" for m in METRICS) + tuple(f"ind_{m}" for m in METRICS)
