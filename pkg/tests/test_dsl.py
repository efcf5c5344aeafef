"""Parser diagnostics, canonical printing, menus, and explanation text."""

import pytest

from genstudies import random_study_text
from mma.dsl import (
    ClauseMenu,
    MenuExhausted,
    ParseResult,
    build_menu,
    menu_contains,
    parse_study,
    parse_study_or_raise,
    print_study,
    render_rule_text,
    truth_atoms,
)
from mma.rules import CanonicalAtom, atoms_equivalent


def _issues(result: ParseResult, code=None):
    return [i for i in result.issues if code is None or i.code == code]


# -- happy path


def test_fixture_parses_clean(fixture_source, study):
    result = parse_study(fixture_source)
    assert result.ok and not result.issues
    assert study.classes == ("healthy", "diabetes")
    assert [f.name for f in study.features] == ["glucose", "fatigue", "heart_disease", "time"]
    assert len(study.truth) == 2
    assert study.observation_params.count == 12
    assert study.prediction_params.count == 6
    assert study.menu_params.distractors_per_feature == 1
    assert study.menu_params.seed == 7


def test_fixture_atoms_are_canonicalized(study):
    r1 = study.truth.by_id("R1")
    assert r1.relevance == (CanonicalAtom("glucose", ">=", 130.0),)
    r2 = study.truth.by_id("R2")
    assert r2.satisfaction == (CanonicalAtom("glucose", ">=", 185.0),)


def test_base_scores_default_zero_and_parse(study):
    assert study.base == (0.0, 0.0)
    text = """
study "b" {
  classes { a, b }
  feature x: boolean
  base b = 1.5
  rule R1 { when x == true check x == true then a more by 1 }
  observations { count 3, demonstrate_each 0, seed 1 }
}
"""
    parsed = parse_study_or_raise(text)
    assert parsed.base_scores() == {"a": 0.0, "b": 1.5}


def test_comments_and_whitespace_ignored():
    text = """
# heading comment
study "c" {  # trailing
  classes { a, b }
  feature x: boolean
  rule R1 { when x == true check x == false then b less by 0.5 }
  observations { count 2, demonstrate_each 0, seed 3 }
}
"""
    assert parse_study(text).ok


def test_defaults_for_optional_blocks():
    text = """
study "d" {
  classes { a, b }
  feature x: boolean
  rule R1 { when x == true check x == true then a more by 1 }
  observations { count 2, demonstrate_each 0, seed 99 }
}
"""
    parsed = parse_study_or_raise(text)
    assert parsed.prediction_params.count == 5
    assert parsed.menu_params.distractors_per_feature == 2
    assert parsed.menu_params.seed == 99  # falls back to the observation seed


# -- round trip


def test_roundtrip_fixture(study):
    assert parse_study_or_raise(print_study(study)) == study
    assert parse_study_or_raise(print_study(study)).fingerprint() == study.fingerprint()


@pytest.mark.parametrize("seed", range(25))
def test_roundtrip_random_studies(seed):
    parsed = parse_study_or_raise(random_study_text(seed))
    assert parse_study_or_raise(print_study(parsed)) == parsed


def test_equivalent_source_same_fingerprint(fixture_source, study):
    reworded = fixture_source.replace("glucose > 125", "glucose >= 130")
    assert parse_study_or_raise(reworded).fingerprint() == study.fingerprint()


# -- diagnostics carry positions


def _single_issue(text, code):
    result = parse_study(text)
    assert not result.ok
    matching = _issues(result, code)
    assert matching, f"no issue with code {code!r}; got {result.issues}"
    return matching[0]


BODY = """study "x" {{
  classes {{ a, b }}
{features}
{rules}
  observations {{ count {count}, demonstrate_each 0, seed {seed} }}
}}
"""


def _study_text(features="  feature x: boolean", rules=None, count=3, seed=1):
    if rules is None:
        rules = "  rule R1 { when x == true check x == true then a more by 1 }"
    return BODY.format(features=features, rules=rules, count=count, seed=seed)


def test_duplicate_feature_issue_position():
    issue = _single_issue(
        _study_text(features="  feature x: boolean\n  feature x: boolean"),
        "duplicate_feature",
    )
    assert (issue.line, issue.column) == (4, 11)


def test_unknown_feature_in_rule():
    issue = _single_issue(
        _study_text(rules="  rule R1 { when y == true check x == true then a more by 1 }"),
        "unknown_feature",
    )
    assert issue.line == 4
    assert "y" in issue.message


def test_comparator_kind_mismatch():
    issue = _single_issue(
        _study_text(rules="  rule R1 { when x > true check x == true then a more by 1 }"),
        "illegal_comparator",
    )
    assert issue.severity == "error"


def test_unknown_categorical_value():
    text = _study_text(
        features="  feature t: categorical { m, n }",
        rules="  rule R1 { when t == q check t == m then a more by 1 }",
    )
    issue = _single_issue(text, "invalid_value")
    assert issue.line == 4


def test_undeclared_class_in_rule():
    issue = _single_issue(
        _study_text(rules="  rule R1 { when x == true check x == true then c more by 1 }"),
        "undeclared_class",
    )
    assert "c" in issue.message


def test_nonpositive_weight():
    issue = _single_issue(
        _study_text(rules="  rule R1 { when x == true check x == true then a more by 0 }"),
        "invalid_weight",
    )
    assert issue.line == 4


def test_too_many_atoms_per_clause():
    rule = (
        "  rule R1 { when x == true and x == true and x == true and x == true "
        "check x == true then a more by 1 }"
    )
    _single_issue(_study_text(rules=rule), "too_many_atoms")


def test_empty_rule_set_issue():
    result = parse_study(_study_text(rules=""))
    assert not result.ok
    assert _issues(result, "empty_rule_set")


def test_duplicate_rule_id():
    rules = (
        "  rule R1 { when x == true check x == true then a more by 1 }\n"
        "  rule R1 { when x == false check x == true then b more by 1 }"
    )
    _single_issue(_study_text(rules=rules), "duplicate_rule_id")


def test_bad_counts_and_seeds():
    assert _issues(parse_study(_study_text(count=0)), "invalid_params")
    big = (1 << 64) + 5
    assert _issues(parse_study(_study_text(seed=big)), "invalid_params")


def test_step_divisibility_issue():
    _single_issue(_study_text(features="  feature x: numeric(0..10, step 3)"), "invalid_feature")


def test_single_class_rejected():
    text = """study "x" {
  classes { a }
  feature x: boolean
  rule R1 { when x == true check x == true then a more by 1 }
  observations { count 3, demonstrate_each 0, seed 1 }
}
"""
    _single_issue(text, "too_few_classes")


def test_syntax_error_flags_position_and_does_not_crash():
    result = parse_study('study "x" { classes { a, b }')
    assert not result.ok
    assert all(i.line >= 1 and i.column >= 1 for i in result.issues)


def test_unterminated_string():
    result = parse_study('study "x { classes { a, b } }')
    assert not result.ok


def test_issue_positions_deduplicated():
    result = parse_study(_study_text(rules="  rule R1 { when x ?? true }"))
    keyed = {(i.line, i.column, i.code) for i in result.issues}
    assert len(keyed) == len(result.issues)


# -- menus


def test_menu_contains_truth_atoms_plus_distractors(study):
    menu = build_menu(study)
    wanted = truth_atoms(study)
    assert len(wanted) == 4
    for atom in wanted:
        assert menu_contains(menu, atom, study.features)
    # 4 truth atoms + 1 distractor per feature
    assert len(menu.atoms) == 4 + 4
    assert menu.warnings == ()
    assert menu.classifications == (
        ("healthy", "more"),
        ("healthy", "less"),
        ("diabetes", "more"),
        ("diabetes", "less"),
    )


def test_menu_atoms_pairwise_inequivalent(study):
    menu = build_menu(study)
    for i, a in enumerate(menu.atoms):
        for b in menu.atoms[i + 1 :]:
            assert not atoms_equivalent(a, b, study.features)


def test_menu_deterministic_and_seed_sensitive(study):
    assert build_menu(study, seed=7) == build_menu(study, seed=7)
    assert build_menu(study, seed=7) != build_menu(study, seed=8)


def test_menu_relevance_and_satisfaction_share_the_pool(study):
    menu = build_menu(study)
    assert menu.relevance_atoms == menu.atoms
    assert menu.satisfaction_atoms == menu.atoms


def test_menu_exhaustion_clamps_with_warning_or_raises():
    text = """
study "tiny" {
  classes { a, b }
  feature x: boolean
  rule R1 { when x == true check x == false then a more by 1 }
  observations { count 2, demonstrate_each 0, seed 1 }
  menu { distractors_per_feature 3, seed 1 }
}
"""
    study = parse_study_or_raise(text)
    menu = build_menu(study)
    assert menu.warnings  # both boolean atoms are truth atoms; none left over
    assert isinstance(menu, ClauseMenu)
    with pytest.raises(MenuExhausted):
        build_menu(study, strict=True)


def test_distractors_never_equal_truth_atoms(study):
    menu = build_menu(study)
    truths = truth_atoms(study)
    seen = 0
    for atom in menu.atoms:
        if any(atoms_equivalent(atom, t, study.features) for t in truths):
            seen += 1
    assert seen == len(truths)


# -- explanation text


def test_render_rule_text_fixture(study):
    r1, r2 = study.truth.by_id("R1"), study.truth.by_id("R2")
    assert render_rule_text(r1, study.features) == (
        "IF glucose ≥ 130 mg/dL, THE AI CHECKS fatigue is present; "
        "IF MET, 'diabetes' BECOMES MORE LIKELY (strength 1.0)."
    )
    assert render_rule_text(r2, study.features) == (
        "IF heart_disease is present, THE AI CHECKS glucose ≥ 185 mg/dL; "
        "IF MET, 'diabetes' BECOMES MORE LIKELY (strength 0.5)."
    )


def test_render_rule_text_covers_all_atom_shapes():
    text = """
study "shapes" {
  classes { a, b }
  feature x: boolean
  feature t: categorical { m, n, p }
  rule R1 { when x == false and t in { m, n } check t == p then b less by 2 }
  observations { count 2, demonstrate_each 0, seed 1 }
}
"""
    study = parse_study_or_raise(text)
    rendered = render_rule_text(study.truth.by_id("R1"), study.features)
    assert rendered == (
        "IF x is absent AND t is one of m, n, THE AI CHECKS t is p; "
        "IF MET, 'b' BECOMES LESS LIKELY (strength 2.0)."
    )
