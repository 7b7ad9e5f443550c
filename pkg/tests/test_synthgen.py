import io

import numpy as np
import pytest

from reciprec.contact_log import ContactEvent, aggregate_dyads, write_contacts, write_users
from reciprec.errors import CalibrationError, ConfigError
from reciprec.synthgen import RNG_ALGORITHM, SynthConfig, generate, generate_log, summarize

from conftest import make_users

SMALL = dict(num_users=600)


def _bytes(users, events):
    u, c = io.StringIO(), io.StringIO()
    write_users(users, u)
    write_contacts(events, users, c)
    return u.getvalue(), c.getvalue()


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(male_fraction=0.0), dict(male_fraction=1.2), dict(target_reciprocity_rate=1.0),
        dict(male_initiation_share=-0.1), dict(num_users=1), dict(num_users=2, male_fraction=0.9),
        dict(latent_dim=0), dict(reply_noise=0.0), dict(seed=-1), dict(target_initial_contacts=-5),
    ])
    def test_rejected(self, kw):
        with pytest.raises(ConfigError):
            SynthConfig(**kw)

    def test_contact_volume_scales_with_users(self):
        assert SynthConfig(num_users=47_000).initial_contacts == 474_931
        assert SynthConfig(num_users=1000, target_initial_contacts=12).initial_contacts == 12


def test_deterministic_per_seed():
    a = _bytes(*generate(SynthConfig(seed=5, **SMALL)))
    b = _bytes(*generate(SynthConfig(seed=5, **SMALL)))
    c = _bytes(*generate(SynthConfig(seed=6, **SMALL)))
    assert a == b
    assert a != c


def test_metadata_names_generator():
    log = generate_log(SynthConfig(seed=3, **SMALL))
    assert log.metadata["rng_algorithm"] == RNG_ALGORITHM == "numpy.random.PCG64"
    assert log.metadata["seed"] == 3
    assert log.metadata["config"]["num_users"] == 600


def test_log_shape_invariants():
    cfg = SynthConfig(seed=11, **SMALL)
    log = generate_log(cfg)
    male = log.users.is_male
    assert male.sum() == 360
    days = [e.day for e in log.events]
    assert days == sorted(days)
    assert min(days) >= 0 and max(days) < cfg.total_days
    for e in log.events:
        assert e.sender != e.receiver and male[e.sender] != male[e.receiver]
    first_back = {}
    for e in log.events:
        first_back.setdefault((e.sender, e.receiver), e.day)
    for d in aggregate_dyads(log.events):
        if d.reciprocal:
            # a reply comes at least a day after the approach
            assert first_back[(d.responder, d.initiator)] >= d.first_day + 1


def test_attributes_follow_schema():
    log = generate_log(SynthConfig(seed=2, **SMALL))
    assert log.users.attribute_names == ("body_type", "children", "photos")
    cats = {"athletic", "fit", "average", "thin", "curvy"}
    assert {r.attributes[0][1] for r in log.users} <= cats


def test_calibration_at_reference_size():
    stats = summarize(*generate(SynthConfig(num_users=2000, seed=42)))
    assert 0.248 <= stats.reciprocity_rate <= 0.268
    assert abs(stats.male_initiation_share - 0.798) <= 0.01
    assert stats.n_male == 1200 and stats.n_female == 800


def test_infeasible_calibration():
    with pytest.raises(CalibrationError):
        generate(SynthConfig(num_users=100, total_days=2, target_reciprocity_rate=0.9))


def test_planted_signal_over_seeds():
    # reciprocal dyads have higher latent compatibility than ignored ones
    for seed in range(10):
        log = generate_log(SynthConfig(seed=seed, **SMALL))
        recip, ignored = [], []
        for d in aggregate_dyads(log.events):
            c = float(log.taste[d.responder] @ log.attractiveness[d.initiator])
            (recip if d.reciprocal else ignored).append(c)
        assert np.mean(recip) > np.mean(ignored), seed


class TestSummarize:
    def test_empty(self):
        s = summarize(make_users("MF"), [])
        assert s.initial_contacts == 0
        assert s.reciprocity_rate is None and s.male_initiation_share is None
        assert s.reply_rate == {"M": None, "F": None}
        assert s.mean_messages_sent == {"M": 0.0, "F": 0.0}

    def test_one_reciprocal_dyad(self):
        s = summarize(make_users("MF"), [ContactEvent(0, 1, 0), ContactEvent(1, 0, 1)])
        assert s.reciprocity_rate == 1.0
        assert s.male_initiation_share == 1.0
        assert s.reply_rate == {"M": 1.0, "F": None}

    def test_counts_by_hand(self):
        users = make_users("MMFF")
        events = [ContactEvent(0, 2, 0), ContactEvent(0, 3, 1), ContactEvent(3, 0, 2), ContactEvent(2, 1, 3),
                  ContactEvent(0, 3, 4)]
        s = summarize(users, events)
        assert s.initial_contacts == 3
        assert s.male_initiation_share == pytest.approx(2 / 3)
        assert s.reciprocity_rate == pytest.approx(1 / 3)
        assert s.mean_messages_sent == {"M": 1.5, "F": 1.0}
        assert s.reply_rate == {"M": 0.5, "F": 0.0}

    def test_recomputes_generated_targets(self):
        log = generate_log(SynthConfig(num_users=2000, seed=7))
        s = summarize(log.users, log.events)
        assert abs(s.reciprocity_rate - 0.258) <= 0.01
        assert abs(s.male_initiation_share - 0.798) <= 0.01
        assert s.to_dict()["n_male"] == 1200
