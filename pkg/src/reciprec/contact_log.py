"""Ingestion of user tables and contact logs.

Users and contacts arrive as two CSV files.  Internally every user is
addressed by its row position in the :class:`UserTable`; contact events and
dyads store those integer positions rather than the raw id tokens.
"""
from __future__ import annotations

import csv
import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, TextIO

import numpy as np

from .errors import ParseError, ValidationError

USERS_HEADER = ("user_id", "gender")
CONTACTS_HEADER = ("sender_id", "receiver_id", "day")


class Gender(enum.Enum):
    MALE = "M"
    FEMALE = "F"

    @property
    def opposite(self) -> "Gender":
        return Gender.FEMALE if self is Gender.MALE else Gender.MALE


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    gender: Gender
    attributes: tuple[tuple[str, str], ...] = ()


@dataclass
class UserTable:
    records: list[UserRecord]
    _index: dict[str, int] = field(init=False, repr=False)
    _male: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {}
        for pos, rec in enumerate(self.records):
            if rec.user_id in self._index:
                raise ValidationError(f"duplicate user_id {rec.user_id!r}")
            self._index[rec.user_id] = pos
        names = {tuple(name for name, _ in rec.attributes) for rec in self.records}
        if len(names) > 1:
            raise ValidationError("attribute names differ between users")
        self._male = np.fromiter(
            (rec.gender is Gender.MALE for rec in self.records), dtype=bool, count=len(self.records)
        )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, pos: int) -> UserRecord:
        return self.records[pos]

    @property
    def M(self) -> int:
        return len(self.records)

    @property
    def is_male(self) -> np.ndarray:
        """Boolean mask over user positions; read-only view."""
        view = self._male.view()
        view.flags.writeable = False
        return view

    @property
    def attribute_names(self) -> tuple[str, ...]:
        if not self.records:
            return ()
        return tuple(name for name, _ in self.records[0].attributes)

    def index_of(self, user_id: str) -> int:
        try:
            return self._index[user_id]
        except KeyError:
            raise ValidationError(f"unknown user_id {user_id!r}") from None

    def id_of(self, pos: int) -> str:
        return self.records[pos].user_id

    def gender_of(self, pos: int) -> Gender:
        return self.records[pos].gender


class ContactEvent(NamedTuple):
    """One message; ``sender`` and ``receiver`` are user-table positions."""

    sender: int
    receiver: int
    day: int


@dataclass(frozen=True)
class DyadRecord:
    initiator: int
    responder: int
    first_day: int
    msgs_initiator_to_responder: int
    msgs_responder_to_initiator: int = 0

    @property
    def reciprocal(self) -> bool:
        return self.msgs_initiator_to_responder >= 1 and self.msgs_responder_to_initiator >= 1

    def partner_of(self, user: int) -> int:
        return self.responder if user == self.initiator else self.initiator


@dataclass(frozen=True)
class ServiceUserSet:
    """Service users as ascending user-table positions.

    Row ``r`` of every contact matrix belongs to ``indices[r]``.
    """

    indices: np.ndarray
    genders: tuple[Gender, ...]

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def N(self) -> int:
        return len(self.indices)

    def row_of(self, user: int) -> int:
        r = int(np.searchsorted(self.indices, user))
        if r >= len(self.indices) or self.indices[r] != user:
            raise KeyError(user)
        return r

    def __contains__(self, user) -> bool:
        try:
            self.row_of(int(user))
        except KeyError:
            return False
        return True


def _rows(source: TextIO):
    reader = csv.reader(source)
    for row in reader:
        yield reader.line_num, row


def parse_users(source: TextIO) -> UserTable:
    rows = _rows(source)
    try:
        _, header = next(rows)
    except StopIteration:
        raise ParseError("missing header row", line=1) from None
    header = [h.strip() for h in header]
    if len(header) < 2 or header[1].lower() != "gender":
        raise ParseError(f"expected header '{','.join(USERS_HEADER)}[,attr...]'", line=1)
    attr_names = header[2:]
    records = []
    seen: dict[str, int] = {}
    for line, row in rows:
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=line)
        uid, gender = row[0].strip(), row[1].strip()
        if not uid:
            raise ParseError("empty user_id", line=line)
        try:
            g = Gender(gender)
        except ValueError:
            raise ParseError(f"gender must be M or F, got {gender!r}", line=line) from None
        if uid in seen:
            raise ValidationError(f"line {line}: duplicate user_id {uid!r} (first at line {seen[uid]})")
        seen[uid] = line
        attrs = tuple(zip(attr_names, (v.strip() for v in row[2:])))
        records.append(UserRecord(uid, g, attrs))
    return UserTable(records)


def parse_contacts(source: TextIO, users: UserTable) -> list[ContactEvent]:
    rows = _rows(source)
    try:
        _, header = next(rows)
    except StopIteration:
        return []
    if len(header) != 3:
        raise ParseError(f"expected header '{','.join(CONTACTS_HEADER)}'", line=1)
    male = users.is_male
    events = []
    for line, row in rows:
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line=line)
        try:
            day = int(row[2])
        except ValueError:
            raise ParseError(f"day must be an integer, got {row[2]!r}", line=line) from None
        if day < 0:
            raise ValidationError(f"line {line}: negative day {day}")
        try:
            s = users.index_of(row[0].strip())
            r = users.index_of(row[1].strip())
        except ValidationError as exc:
            raise ValidationError(f"line {line}: {exc}") from None
        if s == r:
            raise ValidationError(f"line {line}: self-directed contact by {row[0]!r}")
        if male[s] == male[r]:
            raise ValidationError(f"line {line}: same-gender contact {row[0]!r} -> {row[1]!r}")
        events.append(ContactEvent(s, r, day))
    return events


def write_users(users: UserTable, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(list(USERS_HEADER) + list(users.attribute_names))
    for rec in users:
        w.writerow([rec.user_id, rec.gender.value] + [v for _, v in rec.attributes])


def write_contacts(events: Iterable[ContactEvent], users: UserTable, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CONTACTS_HEADER)
    ids = [rec.user_id for rec in users]
    for e in events:
        w.writerow((ids[e.sender], ids[e.receiver], e.day))


def split_by_day(events: Sequence[ContactEvent], split_day: int) -> tuple[list[ContactEvent], list[ContactEvent]]:
    """Partition events into ``day < split_day`` and the rest, keeping order."""
    if split_day <= 0:
        raise ValueError(f"split_day must be positive, got {split_day}")
    train, test = [], []
    for e in events:
        (train if e.day < split_day else test).append(e)
    return train, test


def aggregate_dyads(events: Iterable[ContactEvent]) -> list[DyadRecord]:
    """Collapse events into one record per unordered pair.

    The initiator is the sender of the earliest event; same-day ties go to
    the event that appears first.  Records come out in order of their
    earliest event.
    """
    first: dict[tuple[int, int], tuple[int, int, int]] = {}
    counts: dict[tuple[int, int], list[int]] = {}
    for pos, (s, r, day) in enumerate(events):
        key = (s, r) if s < r else (r, s)
        cur = first.get(key)
        if cur is None or day < cur[0]:
            first[key] = (day, pos, s)
        c = counts.get(key)
        if c is None:
            c = counts[key] = [0, 0]
        c[0 if s == key[0] else 1] += 1
    out = []
    for key, (day, pos, init) in sorted(first.items(), key=lambda kv: (kv[1][0], kv[1][1])):
        low_to_high, high_to_low = counts[key]
        if init == key[0]:
            fwd, back, resp = low_to_high, high_to_low, key[1]
        else:
            fwd, back, resp = high_to_low, low_to_high, key[0]
        out.append(DyadRecord(init, resp, day, fwd, back))
    return out


def messages_sent(events: Iterable[ContactEvent], M: int) -> np.ndarray:
    """Per-user count of sent message events."""
    tally = Counter(e.sender for e in events)
    out = np.zeros(M, dtype=np.int64)
    for u, n in tally.items():
        out[u] = n
    return out


def select_service_users(
    train: Sequence[ContactEvent],
    test: Sequence[ContactEvent],
    users: UserTable,
    threshold: int = 5,
) -> ServiceUserSet:
    """Users who sent at least ``threshold`` messages in both periods."""
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    sent_train = messages_sent(train, users.M)
    sent_test = messages_sent(test, users.M)
    idx = np.flatnonzero((sent_train >= threshold) & (sent_test >= threshold))
    return ServiceUserSet(idx.astype(np.int64), tuple(users.gender_of(int(u)) for u in idx))
