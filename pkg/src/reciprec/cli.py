"""Command-line entry point: ``reciprec {synth,eval,sweep,cohort}``.

Settings come from built-in defaults, then an optional flat ``key = value``
file given with ``--config``, then command-line flags (flags win).

Exit codes: 0 success, 1 usage error, 2 data validation error, 3 internal
invariant failure.
"""
from __future__ import annotations

import argparse
import io
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline
from .contact_log import parse_contacts, parse_users, write_contacts, write_users
from .errors import CalibrationError, ConfigError, DataError, InvariantError
from .evaluation import DEFAULT_KS, RC_ANY, RC_INITIATOR
from .matrices import HYBRID, MODEL_KINDS, dump_matrix
from .recommender import DEFAULT_PENALTY, dump_recommendations
from .similarity import dump_similarity
from .synthgen import SynthConfig, generate_log, summarize

log = logging.getLogger("reciprec")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config(path: Path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _floats(s):
    return tuple(float(x) for x in str(s).split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in str(s).split(",") if x.strip())


def _names(s):
    return tuple(x.strip() for x in str(s).split(",") if x.strip())


# key -> (converter for config-file strings, default)
SYNTH_KEYS = {
    "num_users": (int, 2000),
    "male_fraction": (float, 0.60),
    "total_days": (int, 196),
    "target_initial_contacts": (int, None),
    "male_initiation_share": (float, 0.798),
    "target_reciprocity_rate": (float, 0.258),
    "latent_dim": (int, 2),
    "seed": (int, 42),
}
RUN_KEYS = {
    "users": (Path, None),
    "contacts": (Path, None),
    "data": (Path, None),
    "out": (Path, Path("out")),
    "split_day": (int, pipeline.DEFAULT_SPLIT_DAY),
    "threshold": (int, pipeline.DEFAULT_THRESHOLD),
    "models": (_names, MODEL_KINDS),
    "penalty": (float, DEFAULT_PENALTY),
    "penalties": (_floats, pipeline.DEFAULT_SWEEP),
    "ks": (_ints, DEFAULT_KS),
    "k_star": (int, None),
    "rc_mode": (str, RC_ANY),
    "workers": (int, 1),
    "seed": (int, 42),
    "dump": (lambda s: str(s).lower() in ("1", "true", "yes"), False),
    "dense_oracle": (lambda s: str(s).lower() in ("1", "true", "yes"), False),
}


def resolve(args: argparse.Namespace, keys: dict) -> dict:
    file_values = read_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(file_values) - set(keys) - set(RUN_KEYS) - set(SYNTH_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    out = {}
    for key, (conv, default) in keys.items():
        flag = getattr(args, key, None)
        try:
            if flag is not None:
                out[key] = flag
            elif key in file_values:
                out[key] = conv(file_values[key])
            else:
                out[key] = default
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key=value settings file")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--workers", type=int, help="worker threads")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_run(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", type=Path, help="directory holding users.csv and contacts.csv")
    p.add_argument("--users", type=Path, help="users CSV")
    p.add_argument("--contacts", type=Path, help="contacts CSV")
    p.add_argument("--split-day", dest="split_day", type=int)
    p.add_argument("--threshold", type=int, help="min messages sent in each period")
    p.add_argument("--models", type=_names, help="comma list of " + ",".join(MODEL_KINDS))
    p.add_argument("--penalty", type=float)
    p.add_argument("--ks", type=_ints, help="comma list of K values")
    p.add_argument("--k-star", dest="k_star", type=int, help="K for the SR/UR split")
    p.add_argument("--rc-mode", dest="rc_mode", choices=(RC_ANY, RC_INITIATOR))
    p.add_argument("--dump", action="store_true", default=None, help="also dump matrices, similarities, lists")
    p.add_argument("--dense-oracle", dest="dense_oracle", action="store_true", default=None,
                   help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reciprec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic contact log")
    _add_common(p)
    p.add_argument("--users", dest="num_users", type=int, help="number of users")
    p.add_argument("--male-fraction", dest="male_fraction", type=float)
    p.add_argument("--days", dest="total_days", type=int)
    p.add_argument("--contacts", dest="target_initial_contacts", type=int, help="initial contacts to plant")
    p.add_argument("--male-share", dest="male_initiation_share", type=float)
    p.add_argument("--reciprocity", dest="target_reciprocity_rate", type=float)
    p.add_argument("--latent-dim", dest="latent_dim", type=int)

    for name, text in (("eval", "evaluate the recommenders"),
                       ("sweep", "hybrid metrics over a penalty grid"),
                       ("cohort", "SR/UR cohort analysis of the hybrid model")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        _add_run(p)
        if name == "sweep":
            p.add_argument("--penalties", type=_floats, help="comma list of penalty values")
    return parser


def cmd_synth(args) -> int:
    cfg = resolve(args, {**SYNTH_KEYS, "out": RUN_KEYS["out"]})
    out = cfg.pop("out")
    synth = SynthConfig(**cfg)
    result = generate_log(synth)
    stats = summarize(result.users, result.events)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    write_users(result.users, buf)
    pipeline.atomic_write(out / "users.csv", buf.getvalue())
    buf = io.StringIO()
    write_contacts(result.events, result.users, buf)
    pipeline.atomic_write(out / "contacts.csv", buf.getvalue())
    pipeline.write_json(out / "stats.json", {"stats": stats.to_dict(), "metadata": result.metadata})
    log.info("wrote %d users and %d events to %s", len(result.users), len(result.events), out)
    return EXIT_OK


def _load(cfg: dict):
    users_path, contacts_path = cfg["users"], cfg["contacts"]
    if cfg["data"] is not None:
        users_path = users_path or cfg["data"] / "users.csv"
        contacts_path = contacts_path or cfg["data"] / "contacts.csv"
    if users_path is None or contacts_path is None:
        raise ConfigError("need --data DIR or both --users and --contacts")
    for p in (users_path, contacts_path):
        if not Path(p).is_file():
            raise ConfigError(f"no such file: {p}")
    with open(users_path, encoding="utf-8", newline="") as fh:
        users = parse_users(fh)
    with open(contacts_path, encoding="utf-8", newline="") as fh:
        events = parse_contacts(fh, users)
    return users, events


def _validate_run(cfg: dict) -> None:
    if not 0 < cfg["penalty"] < 1:
        raise ConfigError(f"penalty must lie in (0, 1), got {cfg['penalty']}")
    if any(not 0 < s < 1 for s in cfg["penalties"]):
        raise ConfigError("every sweep penalty must lie in (0, 1)")
    if not cfg["ks"] or any(k < 1 for k in cfg["ks"]):
        raise ConfigError("K values must be positive integers")
    bad = [m for m in cfg["models"] if m not in MODEL_KINDS]
    if bad or not cfg["models"]:
        raise ConfigError(f"unknown models {bad}; choose from {', '.join(MODEL_KINDS)}")
    if cfg["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    if cfg["split_day"] < 1:
        raise ConfigError("split_day must be >= 1")
    if cfg["threshold"] < 1:
        raise ConfigError("threshold must be >= 1")
    if cfg["rc_mode"] not in (RC_ANY, RC_INITIATOR):
        raise ConfigError(f"rc_mode must be {RC_ANY} or {RC_INITIATOR}")
    if cfg["k_star"] is None:
        cfg["k_star"] = max(cfg["ks"])
    if cfg["k_star"] < 1:
        raise ConfigError("k_star must be >= 1")


def _prepare(args):
    cfg = resolve(args, RUN_KEYS)
    _validate_run(cfg)
    users, events = _load(cfg)
    prep = pipeline.prepare(users, events, cfg["split_day"], cfg["threshold"], cfg["rc_mode"])
    log.info("%d users, %d events, %d service users", users.M, len(events), len(prep.service))
    return cfg, prep


def _dump(out: Path, prep, runs) -> None:
    for kind, run in runs.items():
        for name, fn, obj in (("matrix", dump_matrix, run.matrix),
                              ("similarity", dump_similarity, run.similarity),
                              ("recommendations", dump_recommendations, run.recs)):
            buf = io.StringIO()
            fn(obj, prep.users, buf)
            pipeline.atomic_write(out / f"{name}_{kind}.csv", buf.getvalue())


def _eval_runs(cfg, prep, models):
    ks_eval = tuple(sorted(set(cfg["ks"]) | {cfg["k_star"]}))
    runs = pipeline.evaluate_models(prep, models, cfg["penalty"], ks_eval, cfg["workers"])
    if cfg["dense_oracle"]:
        pipeline.oracle_check(prep, runs)
        log.info("dense oracle agrees with sparse path")
    return runs


def cmd_eval(args) -> int:
    cfg, prep = _prepare(args)
    runs = _eval_runs(cfg, prep, cfg["models"])
    out = cfg["out"]
    ks = tuple(sorted(set(cfg["ks"])))
    pipeline.write_json(out / "metrics.json", pipeline.metrics_report(runs, ks))
    pipeline.write_csv(out / "per_user_metrics.csv", pipeline.PER_USER_HEADER,
                       (r for r in pipeline.per_user_rows(prep, runs) if r[2] in ks))
    if HYBRID in runs:
        pipeline.write_json(out / "cohort.json", pipeline.cohort_report(prep, runs[HYBRID], cfg["k_star"]))
    else:
        log.warning("hybrid model not run; cohort.json not written")
    if cfg["dump"]:
        _dump(out, prep, runs)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, prep = _prepare(args)
    rows = pipeline.sweep(prep, cfg["penalties"], tuple(sorted(set(cfg["ks"]))), cfg["workers"])
    pipeline.write_csv(cfg["out"] / "sweep.csv", pipeline.SWEEP_HEADER,
                       ([row[h] for h in pipeline.SWEEP_HEADER] for row in rows))
    return EXIT_OK


def cmd_cohort(args) -> int:
    cfg, prep = _prepare(args)
    runs = _eval_runs(cfg, prep, (HYBRID,))
    report = pipeline.cohort_report(prep, runs[HYBRID], cfg["k_star"])
    for w in report["warnings"]:
        log.warning(w)
    pipeline.write_json(cfg["out"] / "cohort.json", report)
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "eval": cmd_eval, "sweep": cmd_sweep, "cohort": cmd_cohort}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CalibrationError) as exc:
        print(f"reciprec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"reciprec: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantError as exc:
        print(f"reciprec: internal check failed: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
