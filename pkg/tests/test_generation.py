"""Observation and prediction stimulus generation."""

import pytest

from genstudies import random_study
from mma.dsl import parse_study_or_raise
from mma.generation import (
    CoverageUnsatisfiable,
    PredictionBatch,
    domain_size,
    enumerate_profiles,
    generate_observations,
    generate_prediction_items,
    profile_key,
)
from mma.rules import RuleStatus, classify, rule_status, validate_profile


def _status_counts(study, observations, rule_id):
    rule = study.truth.by_id(rule_id)
    out = {status: 0 for status in RuleStatus}
    for obs in observations:
        out[rule_status(rule, obs.profile)] += 1
    return out


def _set_sizes(study, rule_id):
    """Independent relevance/fulfilled counts by full enumeration."""
    rule = study.truth.by_id(rule_id)
    relevance = fulfilled = 0
    for profile in enumerate_profiles(study.features):
        status = rule_status(rule, profile)
        if status != RuleStatus.INAPPLICABLE:
            relevance += 1
        if status == RuleStatus.FULFILLED:
            fulfilled += 1
    return relevance, fulfilled


def test_fixture_count_and_coverage(study):
    obs = generate_observations(study)
    assert len(obs) == 12
    for rule_id in ("R1", "R2"):
        counts = _status_counts(study, obs, rule_id)
        assert counts[RuleStatus.FULFILLED] >= 3
        assert counts[RuleStatus.TRIGGERED] >= 1  # triggered-but-unmet exists for both


def test_profiles_are_domain_valid(study):
    for obs in generate_observations(study):
        validate_profile(study.features, obs.profile)


def test_labels_match_fresh_classification(study):
    base = study.base_scores()
    for obs in generate_observations(study):
        fresh = classify(study.truth, base, obs.profile, study.classes)
        assert obs.classification == fresh
        assert obs.label == fresh.label


def test_determinism_and_seed_sensitivity(study):
    first = generate_observations(study)
    assert generate_observations(study) == first
    assert generate_observations(study, seed=43) != first


def test_zero_count_zero_coverage():
    text = """
study "z" {
  classes { a, b }
  feature x: boolean
  rule R1 { when x == true check x == true then a more by 1 }
  observations { count 4, demonstrate_each 0, seed 5 }
}
"""
    study = parse_study_or_raise(text)
    assert generate_observations(study, count=0) == []
    assert len(generate_observations(study)) == 4


def test_unfulfillable_rule_raises():
    text = """
study "u" {
  classes { a, b }
  feature glucose: numeric(60..300, step 5)
  rule R1 { when glucose > 300 check glucose >= 60 then a more by 1 }
  observations { count 10, demonstrate_each 1, seed 5 }
}
"""
    study = parse_study_or_raise(text)
    with pytest.raises(CoverageUnsatisfiable):
        generate_observations(study)
    # harmless when coverage is off
    assert len(generate_observations(study, demonstrate_each=0)) == 10


def test_unmeetable_satisfaction_raises():
    text = """
study "u2" {
  classes { a, b }
  feature glucose: numeric(60..300, step 5)
  rule R1 { when glucose >= 130 check glucose < 60 then a more by 1 }
  observations { count 10, demonstrate_each 1, seed 5 }
}
"""
    with pytest.raises(CoverageUnsatisfiable):
        generate_observations(parse_study_or_raise(text))


def test_coverage_exceeding_count_raises(study):
    with pytest.raises(CoverageUnsatisfiable, match="count"):
        generate_observations(study, count=5, demonstrate_each=3)


def test_no_triggered_slot_when_relevance_implies_satisfaction():
    text = """
study "implied" {
  classes { a, b }
  feature x: boolean
  rule R1 { when x == true check x == true then a more by 1 }
  observations { count 2, demonstrate_each 2, seed 9 }
}
"""
    study = parse_study_or_raise(text)
    obs = generate_observations(study)  # both slots go to fulfilled draws
    assert len(obs) == 2
    assert all(o.profile["x"] is True for o in obs)


@pytest.mark.parametrize("seed", range(10))
def test_coverage_invariant_random_studies(seed):
    study = random_study(seed)
    de = study.observation_params.demonstrate_each
    obs = generate_observations(study)
    assert len(obs) == study.observation_params.count
    for rule in study.truth:
        counts = _status_counts(study, obs, rule.id)
        assert counts[RuleStatus.FULFILLED] >= de
        relevance_n, fulfilled_n = _set_sizes(study, rule.id)
        if relevance_n > fulfilled_n:
            assert counts[RuleStatus.TRIGGERED] >= 1


# -- predictions


def test_prediction_batch_shape(study):
    batch = generate_prediction_items(study)
    assert isinstance(batch, PredictionBatch)
    assert len(batch) == 6
    assert batch.disjoint_from_observations
    assert not batch.with_replacement
    observed = {profile_key(study.features, o.profile) for o in generate_observations(study)}
    for item in batch:
        assert profile_key(study.features, item.profile) not in observed
        validate_profile(study.features, item.profile)
        fresh = classify(study.truth, study.base_scores(), item.profile, study.classes)
        assert item.classification == fresh


def test_prediction_determinism(study):
    assert generate_prediction_items(study) == generate_prediction_items(study)
    assert generate_prediction_items(study, seed=1) != generate_prediction_items(study, seed=2)


def test_prediction_prefix_property(study):
    """A longer batch starts with exactly the shorter batch's items."""
    short = generate_prediction_items(study, count=6)
    long = generate_prediction_items(study, count=12)
    assert long.items[:6] == short.items


def test_prediction_full_domain_permutation(study):
    total = domain_size(study.features)
    assert total == 588
    batch = generate_prediction_items(study, count=total)
    keys = [profile_key(study.features, p.profile) for p in batch]
    assert len(set(keys)) == total
    assert not batch.with_replacement
    assert not batch.disjoint_from_observations  # must reuse observed profiles


def test_prediction_replacement_past_domain(study):
    total = domain_size(study.features)
    batch = generate_prediction_items(study, count=total + 3)
    assert len(batch) == total + 3
    assert batch.with_replacement


def test_prediction_respects_explicit_avoid(study):
    avoid = [dict(p) for p in enumerate_profiles(study.features)][:20]
    keys = {profile_key(study.features, p) for p in avoid}
    batch = generate_prediction_items(study, count=6, avoid=avoid)
    assert all(profile_key(study.features, item.profile) not in keys for item in batch)
