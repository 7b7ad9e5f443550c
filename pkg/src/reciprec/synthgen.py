"""Seeded synthetic dating logs with latent taste and attractiveness.

Every user gets a taste direction and an attractiveness direction in a
small latent space.  Initiators pick targets whose attractiveness lines up
with their taste; targets answer when the initiator's attractiveness lines
up with *their* taste.  A global reply bias is solved for so the expected
share of reciprocated initial contacts hits the configured rate.

All draws come from one ``numpy.random.PCG64`` stream in a fixed order, so
a seed reproduces the same files on any platform running the same numpy.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .contact_log import ContactEvent, Gender, UserRecord, UserTable, aggregate_dyads, messages_sent
from .errors import CalibrationError, ConfigError

RNG_ALGORITHM = "numpy.random.PCG64"
# initial contacts per user in the reference dataset (474,931 over 47,000 users)
CONTACTS_PER_USER = 474_931 / 47_000


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    categories: tuple[str, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.categories) != len(self.weights) or not self.categories:
            raise ConfigError(f"attribute {self.name!r}: categories and weights must align")


DEFAULT_ATTRIBUTES = (
    AttributeSpec("body_type", ("athletic", "fit", "average", "thin", "curvy"), (0.8, 0.5, -0.4, -0.2, -0.3)),
    AttributeSpec("children", ("want_many", "want_some", "want_none", "undecided"), (0.3, 0.1, -0.3, 0.0)),
    AttributeSpec("photos", ("none", "few", "many"), (-0.6, 0.0, 0.5)),
)


@dataclass(frozen=True)
class SynthConfig:
    num_users: int = 2000
    male_fraction: float = 0.60
    total_days: int = 196
    target_initial_contacts: Optional[int] = None
    male_initiation_share: float = 0.798
    target_reciprocity_rate: float = 0.258
    latent_dim: int = 2
    taste_attractiveness_corr: float = 0.8
    popularity_sigma: float = 1.0
    popularity_selectivity: float = 2.0
    activity_mean: float = 0.0
    activity_sigma: float = 1.0
    choice_temperature: float = 0.25
    reply_noise: float = 0.2
    female_reply_boost: float = 0.965
    reply_delay_max: int = 14
    extra_messages_mean: float = 1.5
    attribute_schema: tuple[AttributeSpec, ...] = DEFAULT_ATTRIBUTES
    seed: int = 0

    def __post_init__(self):
        for name in ("male_fraction", "male_initiation_share", "target_reciprocity_rate"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if self.num_users < 2:
            raise ConfigError("num_users must be at least 2")
        n_male = self.n_male
        if n_male < 1 or n_male > self.num_users - 1:
            raise ConfigError("both genders must be present")
        if not -1.0 <= self.taste_attractiveness_corr <= 1.0:
            raise ConfigError("taste_attractiveness_corr must lie in [-1, 1]")
        if self.latent_dim < 1:
            raise ConfigError("latent_dim must be >= 1")
        if self.total_days < 2:
            raise ConfigError("total_days must be >= 2")
        if self.choice_temperature <= 0 or self.reply_noise <= 0:
            raise ConfigError("temperatures must be positive")
        if self.activity_sigma < 0 or self.extra_messages_mean < 0 or self.reply_delay_max < 1:
            raise ConfigError("activity_sigma, extra_messages_mean must be >= 0 and reply_delay_max >= 1")
        if self.target_initial_contacts is not None and self.target_initial_contacts < 0:
            raise ConfigError("target_initial_contacts must be >= 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def n_male(self) -> int:
        return int(round(self.num_users * self.male_fraction))

    @property
    def initial_contacts(self) -> int:
        if self.target_initial_contacts is not None:
            return self.target_initial_contacts
        return int(round(self.num_users * CONTACTS_PER_USER))

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d["attribute_schema"] = [dataclasses.asdict(a) for a in self.attribute_schema]
        for a in d["attribute_schema"]:
            a["categories"] = list(a["categories"])
            a["weights"] = list(a["weights"])
        return d


@dataclass
class SyntheticLog:
    users: UserTable
    events: list[ContactEvent]
    taste: np.ndarray
    attractiveness: np.ndarray
    activity: np.ndarray
    reply_bias: float
    expected_reciprocity: float
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DatasetStats:
    n_male: int
    n_female: int
    initial_contacts: int
    male_initiation_share: Optional[float]
    reciprocity_rate: Optional[float]
    mean_messages_sent: dict
    reply_rate: dict

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    v = rng.normal(size=(n, d))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return v / norms


def _allocate(rng, total: int, weights: np.ndarray, cap: int) -> np.ndarray:
    """Multinomial split of ``total`` with a per-user cap, re-drawing overflow."""
    counts = np.zeros(len(weights), dtype=np.int64)
    if len(weights) == 0 or total == 0:
        return counts
    total = min(total, cap * len(weights))
    remaining = total
    while remaining > 0:
        open_ = counts < cap
        w = np.where(open_, weights, 0.0)
        counts += rng.multinomial(remaining, w / w.sum())
        over = np.maximum(counts - cap, 0)
        counts -= over
        remaining = int(over.sum())
    return counts


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _calibrate_bias(logit: np.ndarray, window: np.ndarray, target: float) -> tuple[float, float]:
    def rate(b):
        return float(np.mean(_sigmoid(logit + b) * window))

    lo, hi = -40.0, 40.0
    if not rate(lo) <= target <= rate(hi):
        raise CalibrationError(
            f"reciprocity target {target} outside attainable range [{rate(lo):.4f}, {rate(hi):.4f}]"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rate(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    b = 0.5 * (lo + hi)
    return b, rate(b)


def _sample_attributes(rng, schema: Sequence[AttributeSpec], appeal: np.ndarray) -> list[tuple[str, ...]]:
    n = len(appeal)
    columns = []
    for spec in schema:
        logits = np.outer(appeal, np.asarray(spec.weights))
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        cdf = np.cumsum(p / p.sum(axis=1, keepdims=True), axis=1)
        u = rng.random(n)
        pick = np.minimum((u[:, None] > cdf).sum(axis=1), len(spec.categories) - 1)
        columns.append([spec.categories[i] for i in pick])
    return list(zip(*columns)) if columns else [() for _ in range(n)]


def generate_log(config: SynthConfig) -> SyntheticLog:
    rng = np.random.Generator(np.random.PCG64(config.seed))
    n, d, days = config.num_users, config.latent_dim, config.total_days

    male = np.zeros(n, dtype=bool)
    male[rng.permutation(n)[: config.n_male]] = True
    taste = _unit_rows(rng, n, d)
    rho = config.taste_attractiveness_corr
    attract = rho * taste + np.sqrt(1.0 - rho * rho) * _unit_rows(rng, n, d)
    attract /= np.maximum(np.linalg.norm(attract, axis=1, keepdims=True), 1e-12)
    activity = rng.lognormal(config.activity_mean, config.activity_sigma, size=n)
    popularity = rng.normal(0.0, 1.0, size=n) * config.popularity_sigma

    males, females = np.flatnonzero(male), np.flatnonzero(~male)
    total = config.initial_contacts
    n_male_ic = int(round(total * config.male_initiation_share))
    quota = np.zeros(n, dtype=np.int64)
    quota[males] = _allocate(rng, n_male_ic, activity[males], len(females))
    quota[females] = _allocate(rng, total - n_male_ic, activity[females], len(males))

    partners: list[set] = [set() for _ in range(n)]
    init_list, resp_list = [], []
    for i in rng.permutation(n):
        k = int(quota[i])
        if k == 0:
            continue
        pool = females if male[i] else males
        keys = attract[pool] @ taste[i] / config.choice_temperature + popularity[pool] + rng.gumbel(size=len(pool))
        if partners[i]:
            keys[np.isin(pool, np.fromiter(partners[i], dtype=np.int64))] = -np.inf
        k = min(k, int(np.isfinite(keys).sum()))
        if k == 0:
            continue
        top = np.argpartition(-keys, k - 1)[:k]
        top = top[np.argsort(-keys[top], kind="stable")]
        for j in pool[top]:
            j = int(j)
            partners[i].add(j)
            partners[j].add(int(i))
            init_list.append(int(i))
            resp_list.append(j)

    init = np.asarray(init_list, dtype=np.int64)
    resp = np.asarray(resp_list, dtype=np.int64)
    n_ic = len(init)
    ic_day = rng.integers(0, days, size=n_ic)

    D = config.reply_delay_max
    window = np.clip(days - 1 - ic_day, 0, D) / D
    compat = np.einsum("ij,ij->i", taste[resp], attract[init]) if n_ic else np.zeros(0)
    logit = (compat / config.reply_noise + config.female_reply_boost * (~male[init])
             - config.popularity_selectivity * popularity[resp])
    if n_ic:
        bias, expected = _calibrate_bias(logit, window, config.target_reciprocity_rate)
    else:
        bias, expected = 0.0, 0.0
    wants = rng.random(n_ic) < _sigmoid(logit + bias)
    delay = rng.integers(1, D + 1, size=n_ic)
    replied = wants & (ic_day + delay < days)
    n_extra = rng.geometric(1.0 / (1.0 + config.extra_messages_mean), size=n_ic) - 1

    snd, rcv, day = [], [], []
    for x in range(n_ic):
        a, b, t = int(init[x]), int(resp[x]), int(ic_day[x])
        snd.append(a), rcv.append(b), day.append(t)
        if not replied[x]:
            continue
        t += int(delay[x])
        snd.append(b), rcv.append(a), day.append(t)
        for _ in range(int(n_extra[x])):
            t += int(rng.integers(0, 4))
            if t >= days:
                break
            if rng.random() < 0.5:
                snd.append(a), rcv.append(b)
            else:
                snd.append(b), rcv.append(a)
            day.append(t)
    order = np.argsort(np.asarray(day, dtype=np.int64), kind="stable")
    events = [ContactEvent(snd[o], rcv[o], day[o]) for o in order.tolist()]

    appeal = attract[:, 0] * np.sqrt(d)
    attrs = _sample_attributes(rng, config.attribute_schema, appeal)
    names = [a.name for a in config.attribute_schema]
    width = len(str(n))
    records = [
        UserRecord(f"u{i:0{width}d}", Gender.MALE if male[i] else Gender.FEMALE, tuple(zip(names, attrs[i])))
        for i in range(n)
    ]
    meta = {
        "generator": "reciprec.synthgen",
        "rng_algorithm": RNG_ALGORITHM,
        "numpy_version": np.__version__,
        "seed": config.seed,
        "config": config.echo(),
        "calibrated_reply_bias": bias,
        "expected_reciprocity_rate": expected,
    }
    return SyntheticLog(UserTable(records), events, taste, attract, activity, bias, expected, meta)


def generate(config: SynthConfig) -> tuple[UserTable, list[ContactEvent]]:
    log = generate_log(config)
    return log.users, log.events


def summarize(users: UserTable, events: Sequence[ContactEvent]) -> DatasetStats:
    """Dataset statistics recomputed from the log alone."""
    male = users.is_male
    dyads = aggregate_dyads(events)
    n_dyads = len(dyads)
    by_male = [0, 0]       # dyads initiated, indexed by is-male
    recip_by_male = [0, 0]
    for dy in dyads:
        g = int(male[dy.initiator])
        by_male[g] += 1
        recip_by_male[g] += dy.reciprocal
    sent = messages_sent(events, users.M)
    n_m = int(male.sum())
    n_f = users.M - n_m

    def ratio(a, b):
        return a / b if b else None

    return DatasetStats(
        n_male=n_m,
        n_female=n_f,
        initial_contacts=n_dyads,
        male_initiation_share=ratio(by_male[1], n_dyads),
        reciprocity_rate=ratio(sum(recip_by_male), n_dyads),
        mean_messages_sent={
            "M": ratio(int(sent[male].sum()), n_m),
            "F": ratio(int(sent[~male].sum()), n_f),
        },
        reply_rate={"M": ratio(recip_by_male[1], by_male[1]), "F": ratio(recip_by_male[0], by_male[0])},
    )
