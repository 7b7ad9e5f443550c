import io

import numpy as np
import pytest
from hypothesis import strategies as st

from reciprec.contact_log import (
    ContactEvent, Gender, UserRecord, UserTable, aggregate_dyads, split_by_day,
)


def make_users(genders: str, attrs=None) -> UserTable:
    """``make_users("MMF")`` -> users m0, m1, f2 (id letter follows gender)."""
    recs = []
    for i, g in enumerate(genders):
        a = tuple(attrs[i]) if attrs else ()
        recs.append(UserRecord(f"{g.lower()}{i}", Gender(g), a))
    return UserTable(recs)


def table_from_csv(text: str):
    from reciprec.contact_log import parse_users
    return parse_users(io.StringIO(text))


def random_log(rng: np.random.Generator, M: int, n_events: int, days: int = 20, male_frac: float = 0.5):
    """Random bipartite log over ``M`` users; both genders always present."""
    n_male = min(max(1, int(round(M * male_frac))), M - 1)
    genders = "".join("M" if i < n_male else "F" for i in range(M))
    genders = "".join(rng.permutation(list(genders)))
    users = make_users(genders)
    male = users.is_male
    males, females = np.flatnonzero(male), np.flatnonzero(~male)
    events = []
    for _ in range(n_events):
        if rng.random() < 0.5:
            s, r = rng.choice(males), rng.choice(females)
        else:
            s, r = rng.choice(females), rng.choice(males)
        events.append(ContactEvent(int(s), int(r), int(rng.integers(0, days))))
    return users, events


def random_instance(seed: int, M_max: int = 50, split_day: int = 10):
    """Random small instance with its training dyads and a service set.

    Service users are a random subset rather than the threshold rule, so
    that small instances still have several rows.
    """
    rng = np.random.default_rng(seed)
    M = int(rng.integers(4, M_max + 1))
    users, events = random_log(rng, M, int(rng.integers(M, 6 * M)), days=2 * split_day)
    train, test = split_by_day(events, split_day)
    dyads = aggregate_dyads(train)
    N = int(rng.integers(1, min(20, M) + 1))
    from reciprec.contact_log import ServiceUserSet
    idx = np.sort(rng.choice(M, size=N, replace=False)).astype(np.int64)
    service = ServiceUserSet(idx, tuple(users.gender_of(int(u)) for u in idx))
    return users, events, train, test, dyads, service


@st.composite
def bipartite_logs(draw, max_users=12, max_events=40, max_day=30):
    M = draw(st.integers(2, max_users))
    n_male = draw(st.integers(1, M - 1))
    genders = "M" * n_male + "F" * (M - n_male)
    users = make_users(genders)
    males = list(range(n_male))
    females = list(range(n_male, M))
    ev = st.tuples(st.booleans(), st.sampled_from(males), st.sampled_from(females), st.integers(0, max_day))
    raw = draw(st.lists(ev, max_size=max_events))
    events = [ContactEvent(m, f, d) if male_sends else ContactEvent(f, m, d) for male_sends, m, f, d in raw]
    return users, events


@pytest.fixture
def tiny_network():
    """Six users: m0, m1, m2 and f3, f4, f5, with a hand-written log."""
    users = make_users("MMMFFF")
    events = [
        ContactEvent(0, 3, 0),   # m0 -> f3, answered
        ContactEvent(3, 0, 1),
        ContactEvent(0, 4, 2),   # m0 -> f4, ignored
        ContactEvent(1, 3, 3),   # m1 -> f3, answered
        ContactEvent(3, 1, 4),
        ContactEvent(5, 2, 5),   # f5 -> m2, ignored
    ]
    return users, events


def service_of(users: UserTable, members=None):
    """Service set over ``members`` (default: every user)."""
    from reciprec.contact_log import ServiceUserSet
    idx = np.arange(users.M) if members is None else np.array(sorted(members))
    idx = idx.astype(np.int64)
    return ServiceUserSet(idx, tuple(users.gender_of(int(u)) for u in idx))


def dyad(initiator, responder, back=0, day=0, fwd=1):
    from reciprec.contact_log import DyadRecord
    return DyadRecord(initiator, responder, day, fwd, back)
