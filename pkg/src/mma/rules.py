"""Feature/profile model, canonical atoms, constraint rules, and the mock classifier.

A constraint rule pairs a relevance clause (when does the rule apply) with a
satisfaction clause (what the system then checks); a rule whose clauses both
hold shifts one class's log-odds score by its weight.  Atoms are kept in a
canonical form chosen so that two atoms have equal canonical forms exactly
when they have identical truth sets over the feature's finite domain, which
makes "same knowledge element" a decidable, brute-force-checkable question.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Mapping, Sequence, Tuple, Union

Value = Union[bool, float, str]
Profile = Mapping[str, Value]

NUMERIC = "numeric"
BOOLEAN = "boolean"
CATEGORICAL = "categorical"

MORE = "more"
LESS = "less"

MAX_CLAUSE_ATOMS = 3


class RuleModelError(Exception):
    """Base for rule-model validation and evaluation errors."""


class UnknownFeature(RuleModelError):
    """An atom references a feature that is not declared / not in the profile."""


class IllegalComparator(RuleModelError):
    """Comparator not legal for the feature kind (e.g. ``>`` on a boolean)."""


class InvalidAtom(RuleModelError):
    """Structurally broken atom: bad value type, value outside the domain, ..."""


# ---------------------------------------------------------------------------
# Features and profiles


@dataclass(frozen=True)
class FeatureDef:
    """One declared feature: the vocabulary profiles and atoms are built from.

    Numeric features are grid-discretized (min..max in `step` increments) so
    every feature domain is finite and truth-set questions stay decidable.
    """

    name: str
    kind: str
    minimum: float = 0.0
    maximum: float = 0.0
    step: float = 0.0
    unit: str = ""
    values: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == NUMERIC:
            object.__setattr__(self, "_domain", _numeric_grid(self.minimum, self.maximum, self.step))
        elif self.kind == BOOLEAN:
            object.__setattr__(self, "_domain", (False, True))
        elif self.kind == CATEGORICAL:
            if len(self.values) < 2 or len(set(self.values)) != len(self.values):
                raise InvalidAtom(f"categorical feature {self.name!r} needs >= 2 distinct values")
            object.__setattr__(self, "_domain", tuple(self.values))
        else:
            raise InvalidAtom(f"unknown feature kind {self.kind!r}")

    @property
    def domain(self) -> Tuple[Value, ...]:
        """All values this feature can take, in canonical order."""
        return self._domain  # type: ignore[attr-defined]

    def contains(self, value: Value) -> bool:
        return value in self.domain


def _numeric_grid(minimum: float, maximum: float, step: float) -> Tuple[float, ...]:
    if not (minimum < maximum):
        raise InvalidAtom("numeric feature needs min < max")
    if not step > 0:
        raise InvalidAtom("numeric feature needs step > 0")
    span = (maximum - minimum) / step
    count = round(span)
    if abs(span - count) > 1e-9:
        raise InvalidAtom("numeric range is not divisible by step")
    return tuple(minimum + i * step for i in range(count + 1))


def feature_by_name(features: Sequence[FeatureDef], name: str) -> FeatureDef:
    for f in features:
        if f.name == name:
            return f
    raise UnknownFeature(f"unknown feature {name!r}")


def validate_profile(features: Sequence[FeatureDef], profile: Profile) -> None:
    """Require a total profile with every value on its feature's domain."""
    for f in features:
        if f.name not in profile:
            raise InvalidAtom(f"profile is missing feature {f.name!r}")
        if not f.contains(profile[f.name]):
            raise InvalidAtom(f"profile value {profile[f.name]!r} is off the domain of {f.name!r}")
    extra = set(profile) - {f.name for f in features}
    if extra:
        raise UnknownFeature(f"profile has undeclared features: {sorted(extra)}")


# ---------------------------------------------------------------------------
# Atoms

_NUMERIC_OPS = (">", ">=", "<", "<=", "==", "!=")
_BOOLEAN_OPS = ("==", "!=")
_CATEGORICAL_OPS = ("==", "!=", "in")


@dataclass(frozen=True)
class RawAtom:
    """An atom as written: any legal comparator, threshold possibly off-grid."""

    feature: str
    op: str
    value: Value | None = None
    values: Tuple[Value, ...] = ()


@dataclass(frozen=True)
class CanonicalAtom:
    """The unique normal form of an atom's truth set over its feature domain.

    numeric      -> ``>= t`` / ``< t`` for suffix/prefix sets of the grid,
                    ``== v`` / ``!= v`` for interior singletons and their
                    complements (t, v always grid points)
    boolean      -> ``== v``
    categorical  -> ``in S`` with S sorted by declared value order
    """

    feature: str
    op: str
    value: Value | None = None
    values: Tuple[Value, ...] = ()


AnyAtom = Union[RawAtom, CanonicalAtom]


def _op_legal(op: str, kind: str) -> bool:
    if kind == NUMERIC:
        return op in _NUMERIC_OPS
    if kind == BOOLEAN:
        return op in _BOOLEAN_OPS
    return op in _CATEGORICAL_OPS


def _holds(op: str, candidate: Value, atom: AnyAtom) -> bool:
    if op == ">":
        return candidate > atom.value  # type: ignore[operator]
    if op == ">=":
        return candidate >= atom.value  # type: ignore[operator]
    if op == "<":
        return candidate < atom.value  # type: ignore[operator]
    if op == "<=":
        return candidate <= atom.value  # type: ignore[operator]
    if op == "==":
        return candidate == atom.value
    if op == "!=":
        return candidate != atom.value
    if op == "in":
        return candidate in atom.values
    raise IllegalComparator(f"unknown comparator {op!r}")


def truth_vector(atom: AnyAtom, feature: FeatureDef) -> Tuple[bool, ...]:
    """Pointwise truth of the atom over the feature's domain, in domain order."""
    if atom.feature != feature.name:
        raise UnknownFeature(f"atom references {atom.feature!r}, not {feature.name!r}")
    if not _op_legal(atom.op, feature.kind):
        raise IllegalComparator(f"comparator {atom.op!r} is not legal for {feature.kind} feature {feature.name!r}")
    if atom.op == "in":
        for v in atom.values:
            if not feature.contains(v):
                raise InvalidAtom(f"value {v!r} is not in the domain of {feature.name!r}")
        if not atom.values:
            raise InvalidAtom("empty value set")
    elif feature.kind == NUMERIC:
        if isinstance(atom.value, bool) or not isinstance(atom.value, (int, float)):
            raise InvalidAtom(f"numeric atom on {feature.name!r} needs a numeric value")
    elif feature.kind == BOOLEAN:
        if not isinstance(atom.value, bool):
            raise InvalidAtom(f"boolean atom on {feature.name!r} needs true/false")
    else:
        if not feature.contains(atom.value):
            raise InvalidAtom(f"value {atom.value!r} is not in the domain of {feature.name!r}")
    return tuple(_holds(atom.op, v, atom) for v in feature.domain)


def canonicalize_atom(atom: AnyAtom, feature: FeatureDef) -> CanonicalAtom:
    """Snap an atom to the unique canonical form with the same truth set.

    Off-grid numeric thresholds are not an error: ``glucose > 125`` on a
    step-5 grid simply lands on ``glucose >= 130``.  Idempotent.
    """
    vec = truth_vector(atom, feature)
    domain = feature.domain
    if feature.kind == BOOLEAN:
        # Truth sets {false}, {true} only; == is the canonical comparator.
        if vec == (False, True):
            return CanonicalAtom(feature.name, "==", True)
        if vec == (True, False):
            return CanonicalAtom(feature.name, "==", False)
        raise InvalidAtom(f"boolean atom on {feature.name!r} must select exactly one value")
    if feature.kind == CATEGORICAL:
        selected = tuple(v for v, hit in zip(domain, vec) if hit)
        if not selected:
            raise InvalidAtom(f"categorical atom on {feature.name!r} selects nothing")
        return CanonicalAtom(feature.name, "in", values=selected)
    # Numeric: classify the truth set by shape.
    n = len(domain)
    count = sum(vec)
    if count == 0:
        return CanonicalAtom(feature.name, "<", domain[0])
    if count == n:
        return CanonicalAtom(feature.name, ">=", domain[0])
    first = vec.index(True)
    if all(vec[first:]):
        return CanonicalAtom(feature.name, ">=", domain[first])
    if all(vec[:count]) and not any(vec[count:]):
        return CanonicalAtom(feature.name, "<", domain[count])
    if count == 1:
        return CanonicalAtom(feature.name, "==", domain[first])
    if count == n - 1:
        return CanonicalAtom(feature.name, "!=", domain[vec.index(False)])
    raise InvalidAtom(f"numeric atom on {feature.name!r} has a non-contiguous truth set")


def is_tautology(atom: AnyAtom, feature: FeatureDef) -> bool:
    return all(truth_vector(atom, feature))


def is_contradiction(atom: AnyAtom, feature: FeatureDef) -> bool:
    return not any(truth_vector(atom, feature))


def atoms_equivalent(a: AnyAtom, b: AnyAtom, features: Sequence[FeatureDef]) -> bool:
    """True iff the atoms have identical truth sets over the full profile domain.

    Same-feature atoms compare by canonical form.  Atoms on different
    features never carve out the same profile sets unless both are
    tautologies or both are contradictions.
    """
    fa = feature_by_name(features, a.feature)
    fb = feature_by_name(features, b.feature)
    if fa.name == fb.name:
        return canonicalize_atom(a, fa) == canonicalize_atom(b, fb)
    if is_tautology(a, fa):
        return is_tautology(b, fb)
    if is_contradiction(a, fa):
        return is_contradiction(b, fb)
    return False


def eval_atom(atom: AnyAtom, profile: Profile) -> bool:
    """Evaluate one atom against a total profile."""
    if atom.feature not in profile:
        raise UnknownFeature(f"profile has no feature {atom.feature!r}")
    return _holds(atom.op, profile[atom.feature], atom)


# ---------------------------------------------------------------------------
# Rules and classification


class RuleStatus(Enum):
    INAPPLICABLE = "inapplicable"
    TRIGGERED = "triggered"
    FULFILLED = "fulfilled"


@dataclass(frozen=True)
class ConstraintRule:
    """Relevance clause + satisfaction clause + one signed class effect."""

    id: str
    relevance: Tuple[CanonicalAtom, ...]
    satisfaction: Tuple[CanonicalAtom, ...]
    effect_class: str
    direction: str
    weight: float

    def atoms(self) -> Tuple[CanonicalAtom, ...]:
        return self.relevance + self.satisfaction


@dataclass(frozen=True)
class RuleSet:
    rules: Tuple[ConstraintRule, ...] = ()

    def __iter__(self):
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def by_id(self, rule_id: str) -> ConstraintRule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)


# An elicited rule set is structurally a RuleSet; unlike ground truth it may
# be empty, and its weights are placeholders (elicitation collects direction
# only).
ElicitedRuleSet = RuleSet


def validate_rule(rule: ConstraintRule, features: Sequence[FeatureDef], classes: Sequence[str]) -> None:
    if not 1 <= len(rule.relevance) <= MAX_CLAUSE_ATOMS:
        raise InvalidAtom(f"rule {rule.id!r}: relevance needs 1..{MAX_CLAUSE_ATOMS} atoms")
    if not 1 <= len(rule.satisfaction) <= MAX_CLAUSE_ATOMS:
        raise InvalidAtom(f"rule {rule.id!r}: satisfaction needs 1..{MAX_CLAUSE_ATOMS} atoms")
    if rule.effect_class not in classes:
        raise InvalidAtom(f"rule {rule.id!r}: undeclared class {rule.effect_class!r}")
    if rule.direction not in (MORE, LESS):
        raise InvalidAtom(f"rule {rule.id!r}: direction must be more/less")
    if not rule.weight > 0:
        raise InvalidAtom(f"rule {rule.id!r}: weight must be > 0")
    for atom in rule.atoms():
        feature_by_name(features, atom.feature)


def rule_status(rule: ConstraintRule, profile: Profile) -> RuleStatus:
    """Inapplicable if relevance fails; triggered if only relevance holds."""
    if not all(eval_atom(a, profile) for a in rule.relevance):
        return RuleStatus.INAPPLICABLE
    if all(eval_atom(a, profile) for a in rule.satisfaction):
        return RuleStatus.FULFILLED
    return RuleStatus.TRIGGERED


@dataclass(frozen=True)
class Classification:
    scores: Mapping[str, float]
    probabilities: Mapping[str, float]
    label: str
    fulfilled_rule_ids: Tuple[str, ...]


def classify(
    rules: RuleSet,
    base_scores: Mapping[str, float],
    profile: Profile,
    classes: Sequence[str],
) -> Classification:
    """Score classes by summed log-odds of fulfilled rules, then softmax.

    Only fulfilled rules act; triggered-but-unsatisfied rules contribute
    nothing.  The label is the argmax probability, ties going to the first
    class in declared order.
    """
    scores: Dict[str, float] = {c: float(base_scores.get(c, 0.0)) for c in classes}
    fulfilled = []
    for rule in rules:
        if rule_status(rule, profile) is RuleStatus.FULFILLED:
            fulfilled.append(rule.id)
            delta = rule.weight if rule.direction == MORE else -rule.weight
            scores[rule.effect_class] += delta
    peak = max(scores.values())
    exps = {c: math.exp(scores[c] - peak) for c in classes}
    total = sum(exps.values())
    probabilities = {c: exps[c] / total for c in classes}
    label = classes[0]
    best = probabilities[label]
    for c in classes:
        if probabilities[c] > best:
            best = probabilities[c]
            label = c
    return Classification(
        scores=scores,
        probabilities=probabilities,
        label=label,
        fulfilled_rule_ids=tuple(fulfilled),
    )
