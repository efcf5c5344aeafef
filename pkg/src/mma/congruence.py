"""Scoring an elicited rule set against the ground truth.

Elements are deduplicated canonical atoms (role-agnostic); relations are
the full rule linkage.  The three error kinds map onto that split:
elements someone failed to mention, elements that do not belong, and
rules whose wiring (clause roles, class, or direction) is wrong.  Metrics
are element recall, element precision, relation accuracy, and their
unweighted mean as the composite score.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .rules import (
    CanonicalAtom,
    ConstraintRule,
    FeatureDef,
    RuleSet,
    atoms_equivalent,
)

MISMATCH_KINDS = ("relevance", "satisfaction", "class", "direction", "unmatched")

_TOLERANCE = 1e-9


class EmptyTruth(Exception):
    """Scoring against an empty rule set means the study itself is invalid."""


class TruthMismatch(Exception):
    """The two reports were not computed against the same ground truth."""


@dataclass(frozen=True)
class Match:
    elicited_index: int
    truth_rule_id: str
    similarity: float


@dataclass(frozen=True)
class CongruenceReport:
    missing_elements: Tuple[CanonicalAtom, ...]
    extra_elements: Tuple[CanonicalAtom, ...]
    relation_errors: Tuple[Tuple[str, FrozenSet[str]], ...]
    element_recall: float
    element_precision: float
    relation_accuracy: float
    composite: float
    matching: Tuple[Match, ...]
    truth_fingerprint: str
    truth_elements: Tuple[CanonicalAtom, ...]
    elicited_elements: Tuple[CanonicalAtom, ...]

    @property
    def matched_truth_elements(self) -> Tuple[CanonicalAtom, ...]:
        return tuple(e for e in self.truth_elements if e not in self.missing_elements)


@dataclass(frozen=True)
class CongruenceDelta:
    element_recall: float
    element_precision: float
    relation_accuracy: float
    composite: float
    acquired_elements: Tuple[CanonicalAtom, ...]
    lost_elements: Tuple[CanonicalAtom, ...]


def canonical_elements(
    rules: Sequence[ConstraintRule], features: Sequence[FeatureDef]
) -> List[CanonicalAtom]:
    """Distinct atoms across all clauses, first occurrence order.

    Role-agnostic: an atom used in a relevance clause and again in a
    satisfaction clause is one knowledge element.
    """
    out: List[CanonicalAtom] = []
    for rule in rules:
        for atom in rule.atoms():
            if not any(atoms_equivalent(atom, kept, features) for kept in out):
                out.append(atom)
    return out


def _dedup(atoms: Sequence[CanonicalAtom], features) -> List[CanonicalAtom]:
    out: List[CanonicalAtom] = []
    for atom in atoms:
        if not any(atoms_equivalent(atom, kept, features) for kept in out):
            out.append(atom)
    return out


def _atom_sets_equal(a: Sequence[CanonicalAtom], b: Sequence[CanonicalAtom], features) -> bool:
    da, db = _dedup(a, features), _dedup(b, features)
    if len(da) != len(db):
        return False
    return all(any(atoms_equivalent(x, y, features) for y in db) for x in da)


def rule_similarity(a: ConstraintRule, b: ConstraintRule, features: Sequence[FeatureDef]) -> float:
    """0.5 x atom Jaccard + 0.25 x same class + 0.25 x same direction."""
    ea = _dedup(a.atoms(), features)
    eb = _dedup(b.atoms(), features)
    inter = sum(1 for x in ea if any(atoms_equivalent(x, y, features) for y in eb))
    union = len(ea) + len(eb) - inter
    jaccard = 1.0 if union == 0 else inter / union
    return (
        0.5 * jaccard
        + 0.25 * (1.0 if a.effect_class == b.effect_class else 0.0)
        + 0.25 * (1.0 if a.direction == b.direction else 0.0)
    )


def _optimal_total(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    return float(matrix[rows, cols].sum())


def match_rules(
    elicited: Sequence[ConstraintRule],
    truth: Sequence[ConstraintRule] | RuleSet,
    features: Sequence[FeatureDef],
) -> Tuple[Match, ...]:
    """Optimal one-to-one assignment of elicited rules to truth rules.

    Maximizes total similarity; zero-similarity pairs stay unmatched.
    Equal-total ties are broken deterministically: walk truth rules in
    declaration order and keep the earliest-submitted elicited rule that
    still permits an optimal completion.
    """
    truth_rules = list(truth)
    elicited_rules = list(elicited)
    if not truth_rules or not elicited_rules:
        return ()

    sim = np.array(
        [[rule_similarity(e, t, features) for t in truth_rules] for e in elicited_rules],
        dtype=float,
    )
    best_total = _optimal_total(sim)

    chosen: List[Tuple[int, int]] = []  # (elicited index, truth index)
    used_e: set = set()
    fixed_sum = 0.0
    for t_index in range(len(truth_rules)):
        remaining_t = [j for j in range(t_index + 1, len(truth_rules))]
        for e_index in range(len(elicited_rules)):
            if e_index in used_e or sim[e_index, t_index] <= 0.0:
                continue
            rest_e = [i for i in range(len(elicited_rules)) if i not in used_e and i != e_index]
            sub = sim[np.ix_(rest_e, remaining_t)] if rest_e and remaining_t else np.empty((0, 0))
            total = fixed_sum + sim[e_index, t_index] + _optimal_total(sub)
            if total >= best_total - _TOLERANCE:
                chosen.append((e_index, t_index))
                used_e.add(e_index)
                fixed_sum += sim[e_index, t_index]
                break

    return tuple(
        Match(e, truth_rules[t].id, float(sim[e, t]))
        for e, t in sorted(chosen)
    )


def ruleset_fingerprint(truth: Sequence[ConstraintRule] | RuleSet, features) -> str:
    """Stable hash identifying a ground truth (rules plus feature domains)."""
    h = hashlib.sha256()
    for f in features:
        h.update(repr((f.name, f.kind, f.domain)).encode("utf-8"))
    for rule in truth:
        h.update(
            repr(
                (rule.id, rule.relevance, rule.satisfaction, rule.effect_class, rule.direction, rule.weight)
            ).encode("utf-8")
        )
    return h.hexdigest()


def congruence_report(
    elicited: Sequence[ConstraintRule] | RuleSet,
    truth: Sequence[ConstraintRule] | RuleSet,
    features: Sequence[FeatureDef],
) -> CongruenceReport:
    """Full scoring of one elicitation snapshot against the ground truth."""
    truth_rules = list(truth)
    elicited_rules = list(elicited)
    if not truth_rules:
        raise EmptyTruth("ground truth has no rules")

    truth_elems = canonical_elements(truth_rules, features)
    elicited_elems = canonical_elements(elicited_rules, features)
    matched = [
        e for e in truth_elems if any(atoms_equivalent(e, x, features) for x in elicited_elems)
    ]
    missing = tuple(e for e in truth_elems if e not in matched)
    extra = tuple(
        x for x in elicited_elems if not any(atoms_equivalent(x, e, features) for e in truth_elems)
    )

    recall = len(matched) / len(truth_elems)
    precision = 1.0 if not elicited_elems else len(matched) / len(elicited_elems)

    matching = match_rules(elicited_rules, truth_rules, features)
    by_truth_id = {m.truth_rule_id: m for m in matching}
    errors: List[Tuple[str, FrozenSet[str]]] = []
    perfect = 0
    for rule in truth_rules:
        m = by_truth_id.get(rule.id)
        if m is None:
            errors.append((rule.id, frozenset({"unmatched"})))
            continue
        partner = elicited_rules[m.elicited_index]
        kinds = set()
        if not _atom_sets_equal(rule.relevance, partner.relevance, features):
            kinds.add("relevance")
        if not _atom_sets_equal(rule.satisfaction, partner.satisfaction, features):
            kinds.add("satisfaction")
        if rule.effect_class != partner.effect_class:
            kinds.add("class")
        if rule.direction != partner.direction:
            kinds.add("direction")
        if kinds:
            errors.append((rule.id, frozenset(kinds)))
        else:
            perfect += 1
    relation_accuracy = perfect / len(truth_rules)
    composite = (recall + precision + relation_accuracy) / 3.0

    return CongruenceReport(
        missing_elements=missing,
        extra_elements=extra,
        relation_errors=tuple(errors),
        element_recall=recall,
        element_precision=precision,
        relation_accuracy=relation_accuracy,
        composite=composite,
        matching=matching,
        truth_fingerprint=ruleset_fingerprint(truth_rules, features),
        truth_elements=tuple(truth_elems),
        elicited_elements=tuple(elicited_elems),
    )


def congruence_delta(before: CongruenceReport, after: CongruenceReport) -> CongruenceDelta:
    """Per-metric differences plus which truth elements appeared/vanished."""
    if before.truth_fingerprint != after.truth_fingerprint:
        raise TruthMismatch("reports were computed against different ground truths")
    before_matched = set(before.matched_truth_elements)
    after_matched = set(after.matched_truth_elements)
    acquired = tuple(e for e in after.truth_elements if e in after_matched - before_matched)
    lost = tuple(e for e in before.truth_elements if e in before_matched - after_matched)
    return CongruenceDelta(
        element_recall=after.element_recall - before.element_recall,
        element_precision=after.element_precision - before.element_precision,
        relation_accuracy=after.relation_accuracy - before.relation_accuracy,
        composite=after.composite - before.composite,
        acquired_elements=acquired,
        lost_elements=lost,
    )
