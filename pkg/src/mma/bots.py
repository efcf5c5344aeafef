"""Simulated participants.

Four kinds, each exercising a different failure mode of the pipeline:
perfect (elicits the truth verbatim), forgetful (drops whole truth rules
with probability p), random (menu-legal noise), and frequency (learns
single-atom rules from observed co-occurrence, seeing only the menu and
the observation stream, never the truth).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .dsl import ClauseMenu, Study
from .generation import Observation
from .rng import PURPOSE_BOT, SplitMix64, stream
from .rules import (
    ConstraintRule,
    LESS,
    MORE,
    Profile,
    RuleSet,
    classify,
    eval_atom,
)
from .session import (
    EV_ELICITATION,
    EV_INTERVENTION_ACK,
    EV_OBSERVATION_ACK,
    EV_PREDICTION,
    SessionEvent,
    SessionState,
    apply_event,
    create_session,
    elicited_rules_to_wire,
)

BOT_KINDS = ("perfect", "forgetful", "random", "frequency")

DEFAULT_MIN_SUPPORT = 3
DEFAULT_LIFT_THRESHOLD = 0.3


@dataclass(frozen=True)
class BotSpec:
    kind: str
    p: float = 0.0
    min_support: int = DEFAULT_MIN_SUPPORT
    lift_threshold: float = DEFAULT_LIFT_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BOT_KINDS:
            raise ValueError(f"unknown bot kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("drop probability p must be in [0, 1]")
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")
        if not 0.0 < self.lift_threshold < 1.0:
            raise ValueError("lift_threshold must be in (0, 1)")

    def describe(self) -> str:
        if self.kind == "forgetful":
            return f"forgetful:p={self.p}"
        if self.kind == "frequency":
            return f"frequency:min_support={self.min_support},lift={self.lift_threshold}"
        return self.kind


def parse_bot_spec(text: str, seed: int = 0) -> BotSpec:
    """Parse the CLI mini-syntax: `perfect`, `forgetful:p=0.5`,
    `frequency:min_support=3,lift=0.3`, `random`."""
    kind, _, arg_text = text.partition(":")
    kind = kind.strip()
    args: Dict[str, str] = {}
    if arg_text:
        for piece in arg_text.split(","):
            key, eq, value = piece.partition("=")
            if not eq:
                raise ValueError(f"bot argument {piece!r} is not key=value")
            args[key.strip()] = value.strip()
    try:
        if kind == "forgetful":
            p = float(args.pop("p", "0.5"))
            spec = BotSpec(kind=kind, p=p, seed=seed)
        elif kind == "frequency":
            ms = int(args.pop("min_support", str(DEFAULT_MIN_SUPPORT)))
            lift = float(args.pop("lift", str(DEFAULT_LIFT_THRESHOLD)))
            spec = BotSpec(kind=kind, min_support=ms, lift_threshold=lift, seed=seed)
        elif kind in ("perfect", "random"):
            spec = BotSpec(kind=kind, seed=seed)
        else:
            raise ValueError(f"unknown bot kind {kind!r}")
    except ValueError:
        raise
    if args:
        raise ValueError(f"unknown bot argument(s) for {kind!r}: {', '.join(sorted(args))}")
    return spec


class Bot:
    """Common surface: observe each card, elicit a rule set, predict labels."""

    def __init__(self, spec: BotSpec, menu: ClauseMenu, classes: Sequence[str]):
        self.spec = spec
        self.menu = menu
        self.classes = tuple(classes)
        self.rng = stream(spec.seed, PURPOSE_BOT)
        self.elicited: RuleSet = RuleSet()

    def observe(self, observation: Observation) -> "Bot":
        return self

    def elicit(self, truth: Optional[RuleSet]) -> RuleSet:
        raise NotImplementedError

    def predict(self, profile: Profile) -> str:
        zero_base = {c: 0.0 for c in self.classes}
        return classify(self.elicited, zero_base, profile, self.classes).label


class PerfectBot(Bot):
    def elicit(self, truth: Optional[RuleSet]) -> RuleSet:
        assert truth is not None, "perfect bot needs the truth to copy"
        self.elicited = RuleSet(tuple(truth))
        return self.elicited


class ForgetfulBot(Bot):
    """Keeps each truth rule with probability 1 - p, independently."""

    def elicit(self, truth: Optional[RuleSet]) -> RuleSet:
        assert truth is not None, "forgetful bot needs the truth to corrupt"
        kept = tuple(r for r in truth if not self.rng.next_float() < self.spec.p)
        self.elicited = RuleSet(kept)
        return self.elicited


def _sample_indices(rng: SplitMix64, n: int, k: int) -> List[int]:
    indices = list(range(n))
    for i in range(k):
        j = i + rng.next_below(n - i)
        indices[i], indices[j] = indices[j], indices[i]
    return indices[:k]


class RandomBot(Bot):
    """Menu-legal noise: a random number of rules over random menu picks."""

    def elicit(self, truth: Optional[RuleSet]) -> RuleSet:
        atoms = self.menu.atoms
        n_rules = self.rng.next_below(len(atoms) + 1)
        rules: List[ConstraintRule] = []
        for n in range(n_rules):
            rel_k = 1 + self.rng.next_below(min(3, len(atoms)))
            sat_k = 1 + self.rng.next_below(min(3, len(atoms)))
            relevance = tuple(atoms[i] for i in _sample_indices(self.rng, len(atoms), rel_k))
            satisfaction = tuple(atoms[i] for i in _sample_indices(self.rng, len(atoms), sat_k))
            cls, direction = self.menu.classifications[
                self.rng.next_below(len(self.menu.classifications))
            ]
            rules.append(
                ConstraintRule(
                    id=f"E{n + 1}",
                    relevance=relevance,
                    satisfaction=satisfaction,
                    effect_class=cls,
                    direction=direction,
                    weight=1.0,
                )
            )
        self.elicited = RuleSet(tuple(rules))
        return self.elicited

    def predict(self, profile: Profile) -> str:
        return self.classes[self.rng.next_below(len(self.classes))]


class FrequencyBot(Bot):
    """Learns from observations alone.

    Tracks which menu atoms hold in each observed profile, then mines
    ordered atom pairs (r, s): when the label distribution differs enough
    between "r and s hold" and "r holds, s does not", it emits the rule
    `when r check s then c <direction> by 1.0`.
    """

    def __init__(self, spec: BotSpec, menu: ClauseMenu, classes: Sequence[str]):
        super().__init__(spec, menu, classes)
        self.history: List[Tuple[Tuple[bool, ...], str]] = []

    def observe(self, observation: Observation) -> "Bot":
        held = tuple(eval_atom(a, observation.profile) for a in self.menu.atoms)
        self.history.append((held, observation.label))
        return self

    def elicit(self, truth: Optional[RuleSet]) -> RuleSet:
        atoms = self.menu.atoms
        rules: List[ConstraintRule] = []
        for r in range(len(atoms)):
            among = [(held, label) for held, label in self.history if held[r]]
            if not among:
                continue
            for s in range(len(atoms)):
                if s == r:
                    continue
                with_s = [label for held, label in among if held[s]]
                without_s = [label for held, label in among if not held[s]]
                if len(with_s) < self.spec.min_support or not without_s:
                    continue
                for cls in self.classes:
                    p_with = sum(1 for l in with_s if l == cls) / len(with_s)
                    p_without = sum(1 for l in without_s if l == cls) / len(without_s)
                    diff = p_with - p_without
                    if abs(diff) < self.spec.lift_threshold:
                        continue
                    rules.append(
                        ConstraintRule(
                            id=f"F{len(rules) + 1}",
                            relevance=(atoms[r],),
                            satisfaction=(atoms[s],),
                            effect_class=cls,
                            direction=MORE if diff > 0 else LESS,
                            weight=1.0,
                        )
                    )
        self.elicited = RuleSet(tuple(rules))
        return self.elicited


def make_bot(spec: BotSpec, menu: ClauseMenu, classes: Sequence[str]) -> Bot:
    cls = {
        "perfect": PerfectBot,
        "forgetful": ForgetfulBot,
        "random": RandomBot,
        "frequency": FrequencyBot,
    }[spec.kind]
    return cls(spec, menu, classes)


# Functional wrappers for the bot surface.


def bot_observe(bot: Bot, observation: Observation) -> Bot:
    return bot.observe(observation)


def bot_elicit(bot: Bot, menu: ClauseMenu, truth: Optional[RuleSet] = None) -> RuleSet:
    if bot.spec.kind in ("perfect", "forgetful"):
        return bot.elicit(truth)
    return bot.elicit(None)  # frequency/random never see the truth


def bot_predict(bot: Bot, profile: Profile, menu: ClauseMenu, truth: Optional[RuleSet] = None) -> str:
    return bot.predict(profile)


def run_bot_session(
    study: Study,
    spec: BotSpec,
    condition: str,
    session_id: str = "sim",
    ts: int = 0,
) -> SessionState:
    """Drive one full session (both rounds) with a simulated participant."""
    state = create_session(study, condition, spec.seed, session_id=session_id, ts=ts)
    bot = make_bot(spec, state.menu, study.classes)

    def push(kind: str, payload: Dict) -> None:
        nonlocal state
        event = SessionEvent(seq=state.next_seq, ts=ts, kind=kind, payload=payload)
        state = apply_event(state, event, study)

    push(EV_OBSERVATION_ACK, {})  # leave the briefing
    for obs in state.observations:
        bot.observe(obs)
        push(EV_OBSERVATION_ACK, {})
    for round_number in (1, 2):
        rules = bot_elicit(bot, state.menu, study.truth)
        push(EV_ELICITATION, dict(elicited_rules_to_wire(rules), round=round_number))
        for index, item in enumerate(state.prediction_rounds[round_number - 1]):
            push(
                EV_PREDICTION,
                {"round": round_number, "index": index, "class": bot.predict(item.profile)},
            )
        if round_number == 1:
            push(EV_INTERVENTION_ACK, {})
    return state
