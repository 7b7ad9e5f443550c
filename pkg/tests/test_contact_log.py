import io
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reciprec.contact_log import (
    ContactEvent, Gender, aggregate_dyads, parse_contacts, parse_users, select_service_users, split_by_day,
    write_contacts, write_users,
)
from reciprec.errors import ParseError, ValidationError

from conftest import bipartite_logs, make_users


def users_csv(text):
    return parse_users(io.StringIO(text))


class TestParseUsers:
    def test_minimal(self):
        table = users_csv("id,gender\nu1,M\nu2,F")
        assert table.M == 2
        assert [r.user_id for r in table] == ["u1", "u2"]
        assert table.gender_of(1) is Gender.FEMALE

    def test_duplicate_id_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            users_csv("id,gender\nu1,M\nu1,F")

    def test_reference_population_size(self):
        # 47,000 users, 60% male
        rows = ["user_id,gender"] + [f"u{i},{'M' if i < 28_200 else 'F'}" for i in range(47_000)]
        table = users_csv("\n".join(rows))
        assert table.M == 47_000
        assert table.is_male.mean() == pytest.approx(0.60)

    def test_attributes_kept_in_order(self):
        table = users_csv("user_id,gender,body_type,photos\na,M,fit,many\nb,F,thin,none\n")
        assert table.attribute_names == ("body_type", "photos")
        assert table[1].attributes == (("body_type", "thin"), ("photos", "none"))

    @pytest.mark.parametrize("text,line", [
        ("user_id,gender\nu1,X\n", 2),
        ("user_id,gender\nu1,M\nu2\n", 3),
        ("user_id,gender\nu1,M\n,F\n", 3),
    ])
    def test_malformed_rows_report_line(self, text, line):
        with pytest.raises(ParseError) as exc:
            users_csv(text)
        assert exc.value.line == line

    def test_missing_header(self):
        with pytest.raises(ParseError):
            users_csv("")
        with pytest.raises(ParseError):
            users_csv("u1,M\nu2,F\n")

    def test_index_is_file_order(self):
        table = users_csv("user_id,gender\nz,F\na,M\nm,M\n")
        assert [table.index_of(u) for u in "zam"] == [0, 1, 2]


class TestParseContacts:
    table = make_users("MFM")  # m0, f1, m2

    def parse(self, body):
        return parse_contacts(io.StringIO("sender_id,receiver_id,day\n" + body), self.table)

    def test_one_event(self):
        assert self.parse("m0,f1,0\n") == [ContactEvent(0, 1, 0)]

    def test_same_gender_rejected(self):
        with pytest.raises(ValidationError, match="same-gender"):
            self.parse("m0,m2,0\n")

    def test_empty_body(self):
        assert self.parse("") == []

    def test_unknown_id(self):
        with pytest.raises(ValidationError, match="unknown"):
            self.parse("m0,nobody,1\n")

    def test_negative_day(self):
        with pytest.raises(ValidationError, match="negative"):
            self.parse("m0,f1,-1\n")

    def test_bad_day(self):
        with pytest.raises(ParseError) as exc:
            self.parse("m0,f1,0\nm0,f1,x\n")
        assert exc.value.line == 3

    def test_self_contact(self):
        with pytest.raises(ValidationError):
            self.parse("m0,m0,1\n")

    def test_file_order_preserved(self):
        ev = self.parse("f1,m2,5\nm0,f1,1\n")
        assert ev == [ContactEvent(1, 2, 5), ContactEvent(0, 1, 1)]


def test_round_trip_files():
    users = make_users("MFF", attrs=[[("a", "x")], [("a", "y")], [("a", "x")]])
    events = [ContactEvent(0, 1, 3), ContactEvent(2, 0, 4)]
    ubuf, cbuf = io.StringIO(), io.StringIO()
    write_users(users, ubuf)
    write_contacts(events, users, cbuf)
    again = parse_users(io.StringIO(ubuf.getvalue()))
    assert [(r.user_id, r.gender, r.attributes) for r in again] == [(r.user_id, r.gender, r.attributes) for r in users]
    assert parse_contacts(io.StringIO(cbuf.getvalue()), again) == events


class TestSplit:
    def test_reference_split(self):
        ev = [ContactEvent(0, 1, d) for d in (0, 97, 98, 195)]
        train, test = split_by_day(ev, 98)
        assert [e.day for e in train] == [0, 97]
        assert [e.day for e in test] == [98, 195]

    def test_split_at_end(self):
        ev = [ContactEvent(0, 1, d) for d in (0, 5, 9)]
        train, test = split_by_day(ev, 10)
        assert test == [] and train == ev

    def test_empty(self):
        assert split_by_day([], 98) == ([], [])

    def test_rejects_nonpositive_split(self):
        with pytest.raises(ValueError):
            split_by_day([], 0)

    @given(bipartite_logs(), st.integers(1, 31))
    def test_partition(self, log, split):
        _, events = log
        train, test = split_by_day(events, split)
        assert len(train) + len(test) == len(events)
        assert all(e.day < split for e in train) and all(e.day >= split for e in test)
        assert Counter(train) + Counter(test) == Counter(events)


class TestAggregate:
    def test_single_message(self):
        (d,) = aggregate_dyads([ContactEvent(0, 1, 3)])
        assert (d.initiator, d.responder, d.first_day) == (0, 1, 3)
        assert (d.msgs_initiator_to_responder, d.msgs_responder_to_initiator) == (1, 0)
        assert not d.reciprocal

    def test_reply_makes_reciprocal(self):
        (d,) = aggregate_dyads([ContactEvent(0, 1, 3), ContactEvent(1, 0, 5)])
        assert d.initiator == 0
        assert (d.msgs_initiator_to_responder, d.msgs_responder_to_initiator) == (1, 1)
        assert d.reciprocal

    def test_repeat_without_reply(self):
        (d,) = aggregate_dyads([ContactEvent(0, 1, 3), ContactEvent(0, 1, 4)])
        assert (d.msgs_initiator_to_responder, d.msgs_responder_to_initiator) == (2, 0)
        assert not d.reciprocal

    def test_initiator_is_earliest_not_first_listed(self):
        (d,) = aggregate_dyads([ContactEvent(1, 0, 7), ContactEvent(0, 1, 2)])
        assert d.initiator == 0 and d.first_day == 2

    def test_same_day_tie_goes_to_file_order(self):
        (d,) = aggregate_dyads([ContactEvent(1, 0, 2), ContactEvent(0, 1, 2)])
        assert d.initiator == 1

    @given(bipartite_logs())
    def test_matches_brute_force_tally(self, log):
        _, events = log
        dyads = aggregate_dyads(events)
        pairs = {frozenset((e.sender, e.receiver)) for e in events}
        assert len(dyads) == len(pairs)
        for d in dyads:
            fwd = sum(1 for e in events if (e.sender, e.receiver) == (d.initiator, d.responder))
            back = sum(1 for e in events if (e.sender, e.receiver) == (d.responder, d.initiator))
            assert (d.msgs_initiator_to_responder, d.msgs_responder_to_initiator) == (fwd, back)
            assert d.msgs_initiator_to_responder >= 1
            assert d.reciprocal == (min(fwd, back) >= 1)
            first = min((e.day, i) for i, e in enumerate(events) if {e.sender, e.receiver} == {d.initiator, d.responder})
            assert events[first[1]].sender == d.initiator

    @given(bipartite_logs(max_events=25), st.randoms(use_true_random=False))
    def test_permutation_insensitive_with_distinct_days(self, log, rnd):
        _, events = log
        seen, distinct = set(), []
        for e in events:
            if e.day not in seen:
                seen.add(e.day)
                distinct.append(e)
        shuffled = list(distinct)
        rnd.shuffle(shuffled)
        assert set(aggregate_dyads(distinct)) == set(aggregate_dyads(shuffled))


class TestServiceUsers:
    def test_threshold_met_in_both_periods(self):
        users = make_users("MF")
        train = [ContactEvent(0, 1, d) for d in range(5)]
        test = [ContactEvent(0, 1, 100 + d) for d in range(5)]
        s = select_service_users(train, test, users, 5)
        assert list(s.indices) == [0]

    def test_needs_both_periods(self):
        users = make_users("MF")
        train = [ContactEvent(0, 1, d) for d in range(4)]
        test = [ContactEvent(0, 1, 100) for _ in range(100)]
        assert len(select_service_users(train, test, users, 5)) == 0

    def test_replies_count_as_messages(self):
        users = make_users("MF")
        train = [ContactEvent(1, 0, 1)] * 2
        test = [ContactEvent(1, 0, 100)] * 2
        assert list(select_service_users(train, test, users, 2).indices) == [1]

    def test_three_of_six_pass(self):
        rng = random.Random(7)
        users = make_users("MMMFFF")
        plan = {0: (5, 6), 1: (9, 5), 4: (5, 5), 2: (4, 9), 3: (7, 2), 5: (0, 0)}
        train, test = [], []
        for u, (a, b) in plan.items():
            for _ in range(a):
                train.append(ContactEvent(u, rng.choice([3, 4, 5] if u < 3 else [0, 1, 2]), rng.randrange(98)))
            for _ in range(b):
                test.append(ContactEvent(u, rng.choice([3, 4, 5] if u < 3 else [0, 1, 2]), 98 + rng.randrange(98)))
        rng.shuffle(train)
        rng.shuffle(test)
        expected = [u for u in range(6)
                    if sum(e.sender == u for e in train) >= 5 and sum(e.sender == u for e in test) >= 5]
        assert len(expected) == 3
        s = select_service_users(train, test, users, 5)
        assert s.N == 3 and list(s.indices) == expected

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValueError):
            select_service_users([], [], make_users("MF"), 0)

    @settings(max_examples=60)
    @given(bipartite_logs(max_events=60), st.integers(1, 30), st.integers(1, 4))
    def test_members_reverify(self, log, split, threshold):
        users, events = log
        train, test = split_by_day(events, split)
        s = select_service_users(train, test, users, threshold)
        for u in range(users.M):
            ok = (sum(e.sender == u for e in train) >= threshold and sum(e.sender == u for e in test) >= threshold)
            assert (u in s) == ok
        assert s.genders == tuple(users.gender_of(int(u)) for u in s.indices)
