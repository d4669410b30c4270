import numpy as np
import pytest

from pkt.data import load_interactions, preprocess
from pkt.synthetic import SynthConfig, generate_dataset, write_csv


def test_records_are_well_formed():
    config = SynthConfig(num_students=5, num_skills=3, mean_length=6,
                         length_spread=2, seed=1)
    records = generate_dataset(config)
    by_user = {}
    for r in records:
        assert len(r.skill_ids) == 1
        assert 0 <= r.skill_ids[0] < 3
        assert r.response in (0, 1)
        by_user.setdefault(r.user_id, []).append(r.timestamp)
    assert len(by_user) == 5
    for stamps in by_user.values():
        assert stamps == list(range(len(stamps)))  # per-student step counter
        assert len(stamps) >= 3


def test_deterministic_under_seed():
    config = SynthConfig(num_students=8, num_skills=4, seed=42)
    a = generate_dataset(config)
    b = generate_dataset(config)
    assert a == b
    c = generate_dataset(SynthConfig(num_students=8, num_skills=4, seed=43))
    assert a != c


def test_all_correct_when_mastered_and_no_slip():
    config = SynthConfig(num_students=4, num_skills=2, initial_mastery=1.0,
                         slip=0.0, guess=0.0, seed=0)
    records = generate_dataset(config)
    assert all(r.response == 1 for r in records)


def test_all_wrong_when_unmastered_and_no_guessing():
    config = SynthConfig(num_students=4, num_skills=2, initial_mastery=0.0,
                         mastery_increment=0.0, slip=0.0, guess=0.0, seed=0)
    records = generate_dataset(config)
    assert all(r.response == 0 for r in records)


def test_practice_improves_late_answers():
    config = SynthConfig(num_students=300, num_skills=2, mean_length=20,
                         length_spread=0, initial_mastery=0.1,
                         mastery_increment=0.15, slip=0.05, guess=0.2, seed=7)
    records = generate_dataset(config)
    early = [r.response for r in records if r.timestamp < 3]
    late = [r.response for r in records if r.timestamp >= 15]
    assert np.mean(late) > np.mean(early) + 0.2


def test_ratio_calibration_hits_target():
    config = SynthConfig(num_students=1200, num_skills=5, mean_length=20,
                         length_spread=4, slip=0.1, guess=0.15,
                         mastery_increment=0.05, target_ratio=2.0, seed=3)
    records = generate_dataset(config)
    assert len(records) >= 20000
    ones = sum(r.response for r in records)
    ratio = ones / (len(records) - ones)
    assert 1.95 <= ratio <= 2.05


def test_ratio_calibration_other_direction():
    # minority-correct data: a quarter as many right answers as wrong ones
    config = SynthConfig(num_students=1200, num_skills=5, mean_length=20,
                         slip=0.2, guess=0.05, mastery_increment=0.02,
                         target_ratio=0.25, seed=4)
    records = generate_dataset(config)
    ones = sum(r.response for r in records)
    ratio = ones / (len(records) - ones)
    assert 0.23 <= ratio <= 0.27


def test_unreachable_target_ratio_rejected():
    # slip 0.4 / guess 0.4 pins the correct fraction inside [0.4, 0.6]
    config = SynthConfig(num_students=50, num_skills=3, slip=0.4, guess=0.4,
                         target_ratio=3.0, seed=0)
    with pytest.raises(ValueError, match="unreachable"):
        generate_dataset(config)


def test_config_validation_errors():
    with pytest.raises(ValueError):
        SynthConfig(num_students=0)
    with pytest.raises(ValueError):
        SynthConfig(slip=1.5)
    with pytest.raises(ValueError):
        SynthConfig(target_ratio=-1.0)
    with pytest.raises(ValueError):
        SynthConfig(slip=0.6, guess=0.5, target_ratio=2.0)
    with pytest.raises(ValueError, match="unknown fields"):
        SynthConfig.from_dict({"num_students": 5, "min_length": 2})


def test_round_trip_through_csv_and_preprocess(tmp_path):
    config = SynthConfig(num_students=10, num_skills=3, mean_length=8, seed=5)
    records = generate_dataset(config)
    path = tmp_path / "synth.csv"
    write_csv(records, path)
    loaded = load_interactions(path)
    assert len(loaded) == len(records)
    assert [(r.user_id, r.skill_ids, r.response) for r in loaded] == \
           [(r.user_id, r.skill_ids, r.response) for r in records]
    result = preprocess(loaded)
    assert result.stats.num_users <= 10
    assert result.stats.num_skills <= 3
