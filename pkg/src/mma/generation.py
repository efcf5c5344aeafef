"""Seeded generation of observation and prediction stimuli.

Observations are uniform draws over the feature domain, with a coverage
pass first: every rule gets demonstrated fulfilled (and, where possible,
triggered-but-unfulfilled) before the remaining slots are filled and the
whole sequence is shuffled.  Everything is a pure function of
(study, seed), bit-exact across platforms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

from .dsl import Study
from .rng import PURPOSE_OBSERVATIONS, PURPOSE_PREDICTIONS, SplitMix64, stream
from .rules import (
    Classification,
    ConstraintRule,
    FeatureDef,
    Profile,
    RuleStatus,
    Value,
    classify,
    rule_status,
    truth_vector,
)

# One call's cumulative rejection-draw allowance; beyond it the clause is
# near-unsatisfiable on the grid and the study author must widen it.
DRAW_BUDGET = 10**6

LARGE_DOMAIN = 100_000


class CoverageUnsatisfiable(Exception):
    """A rule cannot be demonstrated within the domain or draw budget."""


@dataclass(frozen=True)
class Observation:
    profile: Mapping[str, Value]
    classification: Classification

    @property
    def label(self) -> str:
        return self.classification.label


@dataclass(frozen=True)
class PredictionItem:
    profile: Mapping[str, Value]
    classification: Classification

    @property
    def label(self) -> str:
        return self.classification.label


@dataclass(frozen=True)
class PredictionBatch:
    items: Tuple[PredictionItem, ...]
    disjoint_from_observations: bool
    with_replacement: bool

    def __iter__(self):
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)


def domain_size(features: Sequence[FeatureDef]) -> int:
    size = 1
    for f in features:
        size *= len(f.domain)
    return size


def enumerate_profiles(features: Sequence[FeatureDef]) -> Iterator[Dict[str, Value]]:
    """All profiles in mixed-radix order (first feature slowest)."""
    names = [f.name for f in features]
    for combo in itertools.product(*(f.domain for f in features)):
        yield dict(zip(names, combo))


def profile_key(features: Sequence[FeatureDef], profile: Profile) -> Tuple[Value, ...]:
    return tuple(profile[f.name] for f in features)


def _draw_profile(rng: SplitMix64, features: Sequence[FeatureDef]) -> Dict[str, Value]:
    return {f.name: f.domain[rng.next_below(len(f.domain))] for f in features}


def _conjunction_size(atoms, features: Sequence[FeatureDef]) -> int:
    """Exact profile count satisfying a conjunction (factorizes per feature)."""
    per_feature: Dict[str, List[bool]] = {}
    by_name = {f.name: f for f in features}
    for atom in atoms:
        feature = by_name[atom.feature]
        vec = truth_vector(atom, feature)
        if atom.feature in per_feature:
            per_feature[atom.feature] = [a and b for a, b in zip(per_feature[atom.feature], vec)]
        else:
            per_feature[atom.feature] = list(vec)
    size = 1
    for f in features:
        if f.name in per_feature:
            size *= sum(per_feature[f.name])
        else:
            size *= len(f.domain)
    return size


def _rule_set_sizes(rule: ConstraintRule, features: Sequence[FeatureDef]) -> Tuple[int, int]:
    """(|relevance profiles|, |fulfilled profiles|) for one rule, exactly."""
    relevance = _conjunction_size(rule.relevance, features)
    fulfilled = _conjunction_size(tuple(rule.relevance) + tuple(rule.satisfaction), features)
    return relevance, fulfilled


class _Budget:
    def __init__(self, limit: int = DRAW_BUDGET):
        self.left = limit

    def spend(self, context: str) -> None:
        self.left -= 1
        if self.left < 0:
            raise CoverageUnsatisfiable(
                f"rejection sampling exceeded {DRAW_BUDGET} draws while {context}"
            )


def _draw_with_status(
    rng: SplitMix64,
    features: Sequence[FeatureDef],
    rule: ConstraintRule,
    wanted: RuleStatus,
    budget: _Budget,
) -> Dict[str, Value]:
    while True:
        budget.spend(f"demonstrating rule {rule.id!r}")
        profile = _draw_profile(rng, features)
        if rule_status(rule, profile) is wanted:
            return profile


def generate_observations(
    study: Study,
    seed: Optional[int] = None,
    count: Optional[int] = None,
    demonstrate_each: Optional[int] = None,
) -> List[Observation]:
    """The observation sequence a participant will see, fully determined
    by (study, seed).

    When demonstrate_each > 0 every rule is shown fulfilled at least that
    often and triggered-only at least once (when such profiles exist at
    all); leftover slots are uniform draws and the result is shuffled so
    coverage profiles are not front-loaded.
    """
    params = study.observation_params
    if seed is None:
        seed = params.seed
    if count is None:
        count = params.count
    if demonstrate_each is None:
        demonstrate_each = params.demonstrate_each

    features = study.features
    rng = stream(seed, PURPOSE_OBSERVATIONS)
    budget = _Budget()
    profiles: List[Dict[str, Value]] = []

    if demonstrate_each > 0:
        for rule in study.truth:
            relevance_n, fulfilled_n = _rule_set_sizes(rule, features)
            if fulfilled_n == 0:
                raise CoverageUnsatisfiable(
                    f"rule {rule.id!r} can never be fulfilled on this domain"
                )
            for _ in range(demonstrate_each):
                profiles.append(_draw_with_status(rng, features, rule, RuleStatus.FULFILLED, budget))
            if relevance_n > fulfilled_n:
                profiles.append(_draw_with_status(rng, features, rule, RuleStatus.TRIGGERED, budget))
        if len(profiles) > count:
            raise CoverageUnsatisfiable(
                f"coverage needs {len(profiles)} observations but count is {count}"
            )

    while len(profiles) < count:
        profiles.append(_draw_profile(rng, features))
    rng.shuffle(profiles)

    base = study.base_scores()
    return [
        Observation(profile=p, classification=classify(study.truth, base, p, study.classes))
        for p in profiles
    ]


def generate_prediction_items(
    study: Study,
    seed: Optional[int] = None,
    count: Optional[int] = None,
    avoid: Optional[Sequence[Profile]] = None,
) -> PredictionBatch:
    """Held-out profiles for the prediction task.

    Prefers profiles disjoint from the observation sequence; falls back to
    reusing observation profiles when the domain is too small, and only
    repeats profiles once the whole domain is exhausted (flagged on the
    batch).  `avoid` defaults to this study's own generated observations.
    """
    if seed is None:
        seed = study.observation_params.seed
    if count is None:
        count = study.prediction_params.count
    features = study.features
    if avoid is None:
        avoid = [o.profile for o in generate_observations(study)]
    avoid_keys: Set[Tuple[Value, ...]] = {profile_key(features, p) for p in avoid}

    rng = stream(seed, PURPOSE_PREDICTIONS)
    total = domain_size(features)
    chosen: List[Dict[str, Value]] = []
    with_replacement = False

    if total <= LARGE_DOMAIN:
        universe = list(enumerate_profiles(features))
        rng.shuffle(universe)
        fresh = [p for p in universe if profile_key(features, p) not in avoid_keys]
        seen = [p for p in universe if profile_key(features, p) in avoid_keys]
        ordered = fresh + seen
        chosen = ordered[: min(count, total)]
        while len(chosen) < count:  # domain exhausted: sample with replacement
            with_replacement = True
            chosen.append(_draw_profile(rng, features))
    else:
        budget = _Budget()
        used: Set[Tuple[Value, ...]] = set()
        while len(chosen) < count:
            budget.spend("drawing distinct prediction profiles")
            p = _draw_profile(rng, features)
            key = profile_key(features, p)
            if key in avoid_keys or key in used:
                continue
            used.add(key)
            chosen.append(p)

    disjoint = all(profile_key(features, p) not in avoid_keys for p in chosen)
    base = study.base_scores()
    items = tuple(
        PredictionItem(profile=p, classification=classify(study.truth, base, p, study.classes))
        for p in chosen
    )
    return PredictionBatch(
        items=items, disjoint_from_observations=disjoint, with_replacement=with_replacement
    )
