"""Scoring elicited rule sets against ground truth."""

import itertools
import random

import pytest

from genstudies import random_study
from mma.congruence import (
    CongruenceDelta,
    EmptyTruth,
    TruthMismatch,
    canonical_elements,
    congruence_delta,
    congruence_report,
    match_rules,
    rule_similarity,
    ruleset_fingerprint,
)
from mma.rules import CanonicalAtom, ConstraintRule, atoms_equivalent

APPROX = pytest.approx


def _rule(rule_id, relevance, satisfaction, effect_class, direction="more", weight=1.0):
    return ConstraintRule(
        id=rule_id,
        relevance=tuple(relevance),
        satisfaction=tuple(satisfaction),
        effect_class=effect_class,
        direction=direction,
        weight=weight,
    )


def _swap_roles(rule):
    return _rule(
        rule.id, rule.satisfaction, rule.relevance, rule.effect_class, rule.direction, rule.weight
    )


def _flip_direction(rule):
    other = "less" if rule.direction == "more" else "more"
    return _rule(rule.id, rule.relevance, rule.satisfaction, rule.effect_class, other, rule.weight)


# -- canonical elements


def test_fixture_truth_elements(study):
    elements = canonical_elements(study.truth, study.features)
    assert len(elements) == 4
    expected = [
        CanonicalAtom("glucose", ">=", 130.0),
        CanonicalAtom("fatigue", "==", True),
        CanonicalAtom("heart_disease", "==", True),
        CanonicalAtom("glucose", ">=", 185.0),
    ]
    for want in expected:
        assert any(atoms_equivalent(want, got, study.features) for got in elements)


def test_elements_empty_and_shared(study):
    assert canonical_elements([], study.features) == []
    r1 = study.truth.by_id("R1")
    twice = [r1, _rule("X", r1.satisfaction, r1.relevance, "healthy", "less")]
    assert len(canonical_elements(twice, study.features)) == 2  # shared atoms counted once


def test_elements_are_role_agnostic(study):
    r1 = study.truth.by_id("R1")
    a = canonical_elements([r1], study.features)
    b = canonical_elements([_swap_roles(r1)], study.features)
    assert len(a) == len(b) == 2
    for atom in a:
        assert any(atoms_equivalent(atom, other, study.features) for other in b)


# -- rule similarity


def test_similarity_worked_values(study):
    r1, r2 = study.truth.by_id("R1"), study.truth.by_id("R2")
    assert rule_similarity(r1, r1, study.features) == APPROX(1.0)
    assert rule_similarity(r1, _flip_direction(r1), study.features) == APPROX(0.75)
    assert rule_similarity(r1, r2, study.features) == APPROX(0.5)  # disjoint atoms, same effect


def test_similarity_symmetric_and_bounded(study):
    rules = list(study.truth) + [_flip_direction(r) for r in study.truth]
    for a in rules:
        for b in rules:
            s = rule_similarity(a, b, study.features)
            assert 0.0 <= s <= 1.0
            assert s == APPROX(rule_similarity(b, a, study.features))


# -- matching


def _brute_force_total(elicited, truth, features):
    """Max total similarity over every injective elicited->truth assignment."""
    best = 0.0
    t_ids = list(range(len(truth)))
    for k in range(0, min(len(elicited), len(truth)) + 1):
        for e_pick in itertools.combinations(range(len(elicited)), k):
            for t_perm in itertools.permutations(t_ids, k):
                total = sum(
                    rule_similarity(elicited[e], truth[t], features)
                    for e, t in zip(e_pick, t_perm)
                )
                best = max(best, total)
    return best


def _assert_valid_matching(matching, elicited, truth, features):
    e_used = [m.elicited_index for m in matching]
    t_used = [m.truth_rule_id for m in matching]
    assert len(set(e_used)) == len(e_used)
    assert len(set(t_used)) == len(t_used)
    truth_by_id = {r.id: r for r in truth}
    for m in matching:
        assert m.similarity > 0.0
        expect = rule_similarity(elicited[m.elicited_index], truth_by_id[m.truth_rule_id], features)
        assert m.similarity == APPROX(expect)


def test_match_identity(study):
    truth = list(study.truth)
    matching = match_rules(truth, study.truth, study.features)
    assert [(m.elicited_index, m.truth_rule_id) for m in matching] == [(0, "R1"), (1, "R2")]
    assert sum(m.similarity for m in matching) == APPROX(2.0)


def test_match_single_rule(study):
    matching = match_rules([study.truth.by_id("R1")], study.truth, study.features)
    assert [(m.elicited_index, m.truth_rule_id) for m in matching] == [(0, "R1")]


def test_match_prefers_exact_copy_over_variant(study):
    r1 = study.truth.by_id("R1")
    elicited = [_flip_direction(r1), r1]
    matching = match_rules(elicited, [r1], study.features)
    assert [(m.elicited_index, m.truth_rule_id) for m in matching] == [(1, "R1")]
    assert matching[0].similarity == APPROX(1.0)


def test_zero_similarity_pairs_stay_unmatched(study):
    r1 = study.truth.by_id("R1")
    stranger = _rule("S", r1.relevance, r1.satisfaction, "healthy", "less")
    # distinct atoms, different class, different direction -> similarity 0 against this truth
    lone = _rule(
        "T",
        [CanonicalAtom("heart_disease", "==", True)],
        [CanonicalAtom("glucose", ">=", 185.0)],
        "diabetes",
        "more",
    )
    matching = match_rules([stranger], [lone], study.features)
    assert matching == ()


def _random_instance(rng, study):
    """A plausible elicited set: mutated/dropped/duplicated truth rules."""
    pool = []
    for rule in study.truth:
        roll = rng.random()
        if roll < 0.2:
            continue
        variant = rule
        if roll < 0.4:
            variant = _flip_direction(variant)
        if rng.random() < 0.3:
            variant = _swap_roles(variant)
        if rng.random() < 0.3:
            variant = _rule(
                variant.id,
                variant.relevance,
                variant.satisfaction,
                rng.choice(study.classes),
                variant.direction,
            )
        pool.append(variant)
        if rng.random() < 0.2:
            pool.append(variant)
    rng.shuffle(pool)
    return [
        _rule(f"E{i + 1}", r.relevance, r.satisfaction, r.effect_class, r.direction)
        for i, r in enumerate(pool[:5])
    ]


@pytest.mark.parametrize("case", range(40))
def test_match_total_equals_brute_force(case):
    rng = random.Random(9_000 + case)
    study = random_study(case % 12)
    truth = list(study.truth)[:5]
    elicited = _random_instance(rng, study)
    matching = match_rules(elicited, truth, study.features)
    _assert_valid_matching(matching, elicited, truth, study.features)
    got = sum(m.similarity for m in matching)
    assert got == APPROX(_brute_force_total(elicited, truth, study.features))


# -- congruence report


def test_report_identity_case(study):
    report = congruence_report(list(study.truth), study.truth, study.features)
    assert report.missing_elements == ()
    assert report.extra_elements == ()
    assert report.relation_errors == ()
    assert report.element_recall == APPROX(1.0)
    assert report.element_precision == APPROX(1.0)
    assert report.relation_accuracy == APPROX(1.0)
    assert report.composite == APPROX(1.0)


def test_report_r1_only_worked_numbers(study):
    report = congruence_report([study.truth.by_id("R1")], study.truth, study.features)
    assert report.element_recall == APPROX(0.5)
    assert report.element_precision == APPROX(1.0)
    assert report.relation_accuracy == APPROX(0.5)
    assert report.composite == APPROX(2.0 / 3.0, abs=1e-4)
    missing = {(a.feature, a.op, a.value) for a in report.missing_elements}
    assert missing == {("heart_disease", "==", True), ("glucose", ">=", 185.0)}
    assert report.extra_elements == ()
    assert report.relation_errors == (("R2", frozenset({"unmatched"})),)
    assert len(report.matched_truth_elements) == 2


def test_report_empty_elicitation(study):
    report = congruence_report([], study.truth, study.features)
    assert report.element_recall == APPROX(0.0)
    assert report.element_precision == APPROX(1.0)  # no false positives
    assert report.relation_accuracy == APPROX(0.0)
    assert report.composite == APPROX(1.0 / 3.0, abs=1e-4)
    assert {rid for rid, _ in report.relation_errors} == {"R1", "R2"}
    assert all(kinds == frozenset({"unmatched"}) for _, kinds in report.relation_errors)


def test_report_empty_truth_rejected(study):
    with pytest.raises(EmptyTruth):
        congruence_report([], [], study.features)


def test_role_swap_flags_both_clauses(study):
    r1 = study.truth.by_id("R1")
    elicited = [_swap_roles(r1), study.truth.by_id("R2")]
    report = congruence_report(elicited, study.truth, study.features)
    assert report.element_recall == APPROX(1.0)  # elements are role-agnostic
    assert report.element_precision == APPROX(1.0)
    assert report.relation_accuracy == APPROX(0.5)
    errors = dict(report.relation_errors)
    assert errors == {"R1": frozenset({"relevance", "satisfaction"})}


def test_direction_and_class_errors_reported(study):
    r1, r2 = study.truth.by_id("R1"), study.truth.by_id("R2")
    wrong_dir = _flip_direction(r1)
    wrong_class = _rule("W", r2.relevance, r2.satisfaction, "healthy", r2.direction)
    report = congruence_report([wrong_dir, wrong_class], study.truth, study.features)
    errors = dict(report.relation_errors)
    assert errors["R1"] == frozenset({"direction"})
    assert errors["R2"] == frozenset({"class"})
    assert report.relation_accuracy == APPROX(0.0)


def test_distractor_rule_strictly_lowers_precision(study):
    baseline = congruence_report(list(study.truth), study.truth, study.features)
    noise = _rule(
        "N",
        [CanonicalAtom("time", "in", values=("morning",))],
        [CanonicalAtom("glucose", "<", 100.0)],
        "healthy",
        "less",
    )
    noisy = congruence_report(list(study.truth) + [noise], study.truth, study.features)
    assert noisy.element_recall == APPROX(baseline.element_recall)
    assert noisy.relation_accuracy == APPROX(baseline.relation_accuracy)
    assert noisy.element_precision < baseline.element_precision
    assert noisy.element_precision == APPROX(4.0 / 6.0)
    extra = {(a.feature, a.op) for a in noisy.extra_elements}
    assert extra == {("time", "in"), ("glucose", "<")}


def test_removing_unique_match_drops_recall_and_relations(study):
    full = congruence_report(list(study.truth), study.truth, study.features)
    without_r2 = congruence_report([study.truth.by_id("R1")], study.truth, study.features)
    # R2 contributes 2 of the 4 truth elements and 1 of the 2 relations
    assert full.element_recall - without_r2.element_recall == APPROX(0.5)
    assert full.relation_accuracy - without_r2.relation_accuracy == APPROX(0.5)


@pytest.mark.parametrize("seed", range(12))
def test_self_report_is_perfect_on_random_studies(seed):
    study = random_study(seed)
    report = congruence_report(list(study.truth), study.truth, study.features)
    assert report.composite == APPROX(1.0)
    assert report.missing_elements == () and report.extra_elements == ()
    assert report.relation_errors == ()


@pytest.mark.parametrize("case", range(20))
def test_report_metrics_bounded(case):
    rng = random.Random(31_000 + case)
    study = random_study(case % 12)
    elicited = _random_instance(rng, study)
    report = congruence_report(elicited, study.truth, study.features)
    for value in (
        report.element_recall,
        report.element_precision,
        report.relation_accuracy,
        report.composite,
    ):
        assert 0.0 <= value <= 1.0
    assert report.composite == APPROX(
        (report.element_recall + report.element_precision + report.relation_accuracy) / 3.0
    )
    assert len(report.missing_elements) + len(report.matched_truth_elements) == len(
        report.truth_elements
    )
    kinds = {k for _, ks in report.relation_errors for k in ks}
    assert kinds <= {"relevance", "satisfaction", "class", "direction", "unmatched"}


def test_report_invariant_to_elicited_order(study):
    r1, r2 = study.truth.by_id("R1"), study.truth.by_id("R2")
    a = congruence_report([r1, r2], study.truth, study.features)
    b = congruence_report([r2, r1], study.truth, study.features)
    for field in ("element_recall", "element_precision", "relation_accuracy", "composite"):
        assert getattr(a, field) == APPROX(getattr(b, field))
    assert a.relation_errors == b.relation_errors


# -- deltas


def test_delta_worked_example(study):
    before = congruence_report([study.truth.by_id("R1")], study.truth, study.features)
    after = congruence_report(list(study.truth), study.truth, study.features)
    delta = congruence_delta(before, after)
    assert isinstance(delta, CongruenceDelta)
    assert delta.composite == APPROX(1.0 / 3.0, abs=1e-4)
    assert delta.element_recall == APPROX(0.5)
    acquired = {(a.feature, a.op, a.value) for a in delta.acquired_elements}
    assert acquired == {("heart_disease", "==", True), ("glucose", ">=", 185.0)}
    assert delta.lost_elements == ()


def test_delta_to_empty_loses_elements(study):
    before = congruence_report([study.truth.by_id("R1")], study.truth, study.features)
    after = congruence_report([], study.truth, study.features)
    delta = congruence_delta(before, after)
    assert delta.element_recall == APPROX(-0.5)
    lost = {(a.feature, a.op, a.value) for a in delta.lost_elements}
    assert lost == {("glucose", ">=", 130.0), ("fatigue", "==", True)}


def test_delta_requires_same_truth(study):
    report = congruence_report([], study.truth, study.features)
    other_study = random_study(0)
    other = congruence_report([], other_study.truth, other_study.features)
    with pytest.raises(TruthMismatch):
        congruence_delta(report, other)


def test_fingerprint_tracks_truth_identity(study):
    same = ruleset_fingerprint(study.truth, study.features)
    assert same == ruleset_fingerprint(list(study.truth), study.features)
    assert same != ruleset_fingerprint(list(study.truth)[:1], study.features)
