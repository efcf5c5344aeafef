"""Event-sourced participant sessions.

A session is a pure fold over its event log: observation cards are
acknowledged one by one, a rule set is elicited, predictions are made,
an intervention (explanations or filler) happens, then a second
elicitation and prediction round closes the loop.  Stimuli are generated
eagerly at creation so a log plus the study text reproduces everything.

Log file format: one JSON object per line, UTF-8, LF, preceded by the
header line ``{"format":"mma-log","version":1}``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .congruence import CongruenceDelta, CongruenceReport, congruence_delta, congruence_report
from .dsl import (
    CONDITIONS,
    ClauseMenu,
    Study,
    atom_phrase,
    build_menu,
    render_rule_text,
)
from .generation import (
    Observation,
    PredictionItem,
    generate_observations,
    generate_prediction_items,
)
from .rules import (
    BOOLEAN,
    CanonicalAtom,
    ConstraintRule,
    FeatureDef,
    InvalidAtom,
    MAX_CLAUSE_ATOMS,
    RawAtom,
    RuleModelError,
    RuleSet,
    atoms_equivalent,
    canonicalize_atom,
    feature_by_name,
)

LOG_FORMAT = "mma-log"
LOG_VERSION = 1

BRIEFING = "briefing"
OBSERVING = "observing"
ELICITING = "eliciting"
PREDICTING = "predicting"
INTERVENTION = "intervention"
DONE = "done"

EV_STARTED = "started"
EV_OBSERVATION_ACK = "observation_ack"
EV_ELICITATION = "elicitation_submitted"
EV_PREDICTION = "prediction_submitted"
EV_INTERVENTION_ACK = "intervention_ack"

FILLER_TEXT = "Take a moment before the next part of the study. Press continue when ready."


class SessionError(Exception):
    """Base for session-protocol failures; `seq` set when known."""

    def __init__(self, message: str, seq: Optional[int] = None):
        super().__init__(message)
        self.seq = seq


class IllegalTransition(SessionError):
    pass


class DuplicateSequence(SessionError):
    pass


class SequenceGap(SessionError):
    pass


class MenuViolation(SessionError):
    pass


class PayloadError(SessionError):
    pass


class MissingStarted(SessionError):
    pass


class StudyMismatch(SessionError):
    pass


class PhaseTooEarly(SessionError):
    pass


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    ts: int  # ms since epoch, informational only
    kind: str
    payload: Mapping


@dataclass(frozen=True)
class SessionState:
    session_id: str
    study_id: str
    study_fingerprint: str
    stimuli_fingerprint: str
    condition: str
    seed: int
    observations: Tuple[Observation, ...]
    prediction_rounds: Tuple[Tuple[PredictionItem, ...], Tuple[PredictionItem, ...]]
    menu: ClauseMenu
    phase: str = BRIEFING
    obs_index: int = 0
    round: int = 1
    pred_index: int = 0
    elicitations: Tuple[RuleSet, ...] = ()
    predictions: Tuple[Tuple[Tuple[int, str], ...], ...] = ((), ())
    events: Tuple[SessionEvent, ...] = ()

    @property
    def next_seq(self) -> int:
        return len(self.events)

    @property
    def completed(self) -> bool:
        return self.phase == DONE


@dataclass(frozen=True)
class SessionReport:
    session_id: str
    condition: str
    seed: int
    n_observations: int
    predictions_per_round: int
    pre: CongruenceReport
    post: Optional[CongruenceReport]
    delta: Optional[CongruenceDelta]
    accuracy_round1: float
    accuracy_round2: Optional[float]
    completed: bool
    duration_ms: int


# ---------------------------------------------------------------------------
# Wire encoding of atoms and elicited rules (event payloads, API payloads)


def atom_to_wire(atom: CanonicalAtom) -> Dict:
    if atom.op == "in":
        return {"feature": atom.feature, "op": "in", "values": list(atom.values)}
    return {"feature": atom.feature, "op": atom.op, "value": atom.value}


def wire_to_atom(obj: Mapping, features: Sequence[FeatureDef]) -> CanonicalAtom:
    """Parse one atom from its wire form and canonicalize it."""
    if not isinstance(obj, Mapping):
        raise PayloadError("atom must be an object")
    feature_name = obj.get("feature")
    op = obj.get("op")
    if not isinstance(feature_name, str) or not isinstance(op, str):
        raise PayloadError("atom needs string 'feature' and 'op' fields")
    try:
        feature = feature_by_name(features, feature_name)
    except RuleModelError as exc:
        raise PayloadError(str(exc)) from exc
    if op == "in":
        values = obj.get("values")
        if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
            raise PayloadError("'in' atom needs a list of string values")
        raw = RawAtom(feature_name, "in", values=tuple(values))
    else:
        if "value" not in obj:
            raise PayloadError("atom needs a 'value' field")
        value = obj["value"]
        if feature.kind == BOOLEAN and not isinstance(value, bool):
            raise PayloadError(f"feature {feature_name!r} takes a boolean value")
        if isinstance(value, bool):
            raw = RawAtom(feature_name, op, value=value)
        elif isinstance(value, (int, float)):
            raw = RawAtom(feature_name, op, value=float(value))
        elif isinstance(value, str):
            raw = RawAtom(feature_name, op, value=value)
        else:
            raise PayloadError("atom value must be a boolean, number, or string")
    try:
        return canonicalize_atom(raw, feature)
    except RuleModelError as exc:
        raise PayloadError(str(exc)) from exc


def parse_elicited_rules(payload: Mapping, study: Study, menu: ClauseMenu) -> RuleSet:
    """Validate an elicitation payload against the menu and build the rule set.

    Structural problems raise PayloadError; well-formed atoms or
    classifications that are simply not on the menu raise MenuViolation.
    """
    rules_obj = payload.get("rules")
    if not isinstance(rules_obj, list):
        raise PayloadError("elicitation payload needs a 'rules' list")
    rules: List[ConstraintRule] = []
    for n, robj in enumerate(rules_obj, start=1):
        if not isinstance(robj, Mapping):
            raise PayloadError(f"rule #{n} must be an object")
        clauses: Dict[str, Tuple[CanonicalAtom, ...]] = {}
        for role in ("relevance", "satisfaction"):
            atoms_obj = robj.get(role)
            if not isinstance(atoms_obj, list) or not 1 <= len(atoms_obj) <= MAX_CLAUSE_ATOMS:
                raise PayloadError(
                    f"rule #{n}: {role} needs 1..{MAX_CLAUSE_ATOMS} atoms"
                )
            atoms = tuple(wire_to_atom(a, study.features) for a in atoms_obj)
            for atom in atoms:
                if not any(atoms_equivalent(atom, m, study.features) for m in menu.atoms):
                    raise MenuViolation(
                        f"rule #{n}: atom {atom_to_wire(atom)} is not on the menu"
                    )
            clauses[role] = atoms
        cls = robj.get("class")
        direction = robj.get("direction")
        if not isinstance(cls, str) or not isinstance(direction, str):
            raise PayloadError(f"rule #{n} needs string 'class' and 'direction' fields")
        if (cls, direction) not in menu.classifications:
            raise MenuViolation(f"rule #{n}: classification ({cls}, {direction}) is not on the menu")
        rules.append(
            ConstraintRule(
                id=f"E{n}",
                relevance=clauses["relevance"],
                satisfaction=clauses["satisfaction"],
                effect_class=cls,
                direction=direction,
                weight=1.0,
            )
        )
    return RuleSet(tuple(rules))


def elicited_rules_to_wire(rules: Sequence[ConstraintRule]) -> Dict:
    return {
        "rules": [
            {
                "relevance": [atom_to_wire(a) for a in r.relevance],
                "satisfaction": [atom_to_wire(a) for a in r.satisfaction],
                "class": r.effect_class,
                "direction": r.direction,
            }
            for r in rules
        ]
    }


# ---------------------------------------------------------------------------
# Creation and the fold


def _stimuli_fingerprint(
    observations: Sequence[Observation],
    rounds: Sequence[Sequence[PredictionItem]],
    menu: ClauseMenu,
) -> str:
    doc = {
        "observations": [
            {"profile": dict(o.profile), "label": o.label} for o in observations
        ],
        "predictions": [
            [{"profile": dict(p.profile), "label": p.label} for p in rnd] for rnd in rounds
        ],
        "menu": {
            "atoms": [atom_to_wire(a) for a in menu.atoms],
            "classifications": [list(c) for c in menu.classifications],
        },
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()


def create_session(
    study: Study,
    condition: str,
    seed: int,
    session_id: str = "session",
    ts: int = 0,
    study_id: str = "",
) -> SessionState:
    """Generate all stimuli eagerly and open the log with a `started` event.

    The observation/prediction/menu content is a function of the study
    alone, so every participant of one study sees identical material; the
    session seed is recorded for analysis and for seeding simulated
    participants.
    """
    if condition not in CONDITIONS:
        raise PayloadError(f"unknown condition {condition!r}; expected one of {CONDITIONS}")
    if not 0 <= int(seed) < (1 << 64):
        raise PayloadError("seed must fit in 64 unsigned bits")
    observations = tuple(generate_observations(study))
    per_round = study.prediction_params.count
    batch = generate_prediction_items(
        study, count=2 * per_round, avoid=[o.profile for o in observations]
    )
    rounds = (tuple(batch.items[:per_round]), tuple(batch.items[per_round:]))
    menu = build_menu(study)
    payload = {
        "session_id": session_id,
        "study_id": study_id,
        "study_fingerprint": study.fingerprint(),
        "stimuli_fingerprint": _stimuli_fingerprint(observations, rounds, menu),
        "condition": condition,
        "seed": int(seed),
        "n_observations": len(observations),
        "predictions_per_round": per_round,
        "menu_size": len(menu.atoms),
    }
    started = SessionEvent(seq=0, ts=ts, kind=EV_STARTED, payload=payload)
    return SessionState(
        session_id=session_id,
        study_id=study_id,
        study_fingerprint=payload["study_fingerprint"],
        stimuli_fingerprint=payload["stimuli_fingerprint"],
        condition=condition,
        seed=int(seed),
        observations=observations,
        prediction_rounds=rounds,
        menu=menu,
        events=(started,),
    )


def apply_event(state: SessionState, event: SessionEvent, study: Optional[Study] = None) -> SessionState:
    """One deterministic transition; raises with state unchanged on misuse.

    `study` is needed only for elicitation events (menu validation parses
    atoms against the feature definitions).
    """
    if event.seq < state.next_seq:
        raise DuplicateSequence(f"sequence {event.seq} was already applied", seq=event.seq)
    if event.seq > state.next_seq:
        raise SequenceGap(
            f"sequence gap: expected {state.next_seq}, got {event.seq}", seq=event.seq
        )
    if state.phase == DONE:
        raise IllegalTransition("session is already complete", seq=event.seq)
    if event.kind == EV_STARTED:
        raise IllegalTransition("session is already started", seq=event.seq)

    with_event = replace(state, events=state.events + (event,))
    n_obs = len(state.observations)
    per_round = len(state.prediction_rounds[0])

    if event.kind == EV_OBSERVATION_ACK:
        if state.phase == BRIEFING:
            if n_obs == 0:
                return replace(with_event, phase=ELICITING, round=1)
            return replace(with_event, phase=OBSERVING, obs_index=0)
        if state.phase == OBSERVING:
            nxt = state.obs_index + 1
            if nxt >= n_obs:
                return replace(with_event, phase=ELICITING, round=1)
            return replace(with_event, phase=OBSERVING, obs_index=nxt)
        raise IllegalTransition(
            f"observation_ack is not legal in phase {state.phase!r}", seq=event.seq
        )

    if event.kind == EV_ELICITATION:
        if state.phase != ELICITING:
            raise IllegalTransition(
                f"elicitation_submitted is not legal in phase {state.phase!r}", seq=event.seq
            )
        if study is None:
            raise PayloadError("elicitation validation requires the study", seq=event.seq)
        declared_round = event.payload.get("round")
        if declared_round != state.round:
            raise PayloadError(
                f"elicitation declares round {declared_round!r}, session is in round {state.round}",
                seq=event.seq,
            )
        rules = parse_elicited_rules(event.payload, study, state.menu)
        return replace(
            with_event,
            phase=PREDICTING,
            pred_index=0,
            elicitations=state.elicitations + (rules,),
        )

    if event.kind == EV_PREDICTION:
        if state.phase != PREDICTING:
            raise IllegalTransition(
                f"prediction_submitted is not legal in phase {state.phase!r}", seq=event.seq
            )
        declared_round = event.payload.get("round")
        index = event.payload.get("index")
        chosen = event.payload.get("class")
        if declared_round != state.round or index != state.pred_index:
            raise PayloadError(
                f"prediction targets round {declared_round!r} item {index!r}; "
                f"session is at round {state.round} item {state.pred_index}",
                seq=event.seq,
            )
        classes = {c for c, _ in state.menu.classifications}
        if not isinstance(chosen, str) or chosen not in classes:
            raise PayloadError(f"unknown class {chosen!r}", seq=event.seq)
        slot = state.round - 1
        answers = tuple(
            state.predictions[i] + ((index, chosen),) if i == slot else state.predictions[i]
            for i in range(2)
        )
        nxt = state.pred_index + 1
        if nxt < per_round:
            return replace(with_event, predictions=answers, pred_index=nxt)
        if state.round == 1:
            return replace(with_event, predictions=answers, phase=INTERVENTION)
        return replace(with_event, predictions=answers, phase=DONE)

    if event.kind == EV_INTERVENTION_ACK:
        if state.phase != INTERVENTION:
            raise IllegalTransition(
                f"intervention_ack is not legal in phase {state.phase!r}", seq=event.seq
            )
        return replace(with_event, phase=ELICITING, round=2)

    raise PayloadError(f"unknown event kind {event.kind!r}", seq=event.seq)


def replay(events: Sequence[SessionEvent], study: Study) -> SessionState:
    """Rebuild a session from its log; bit-identical to the live state."""
    if not events:
        raise MissingStarted("event log is empty")
    first = events[0]
    if first.kind != EV_STARTED or first.seq != 0:
        raise MissingStarted("log does not begin with a started event")
    p = first.payload
    try:
        state = create_session(
            study,
            condition=p["condition"],
            seed=p["seed"],
            session_id=p["session_id"],
            ts=first.ts,
            study_id=p.get("study_id", ""),
        )
    except KeyError as exc:
        raise MissingStarted(f"started payload lacks {exc}") from exc
    if dict(state.events[0].payload) != dict(p):
        raise StudyMismatch(
            "started payload does not match this study's regenerated stimuli", seq=0
        )
    for event in events[1:]:
        try:
            state = apply_event(state, event, study)
        except SessionError as err:
            if err.seq is None:
                err.seq = event.seq
            raise
    return state


# ---------------------------------------------------------------------------
# Intervention content and reporting


def select_explanations(
    condition: str, report: CongruenceReport, truth: RuleSet
) -> List[ConstraintRule]:
    """Which truth rules the intervention shows: all, the flagged ones, or none."""
    if condition == "full":
        return list(truth)
    if condition == "targeted":
        flagged = {rule_id for rule_id, _ in report.relation_errors}
        return [r for r in truth if r.id in flagged]
    return []


def _round_accuracy(state: SessionState, round_number: int) -> Optional[float]:
    answers = state.predictions[round_number - 1]
    items = state.prediction_rounds[round_number - 1]
    if len(answers) < len(items) or not items:
        return None
    hits = sum(1 for index, chosen in answers if chosen == items[index].label)
    return hits / len(items)


def session_report(state: SessionState, truth: RuleSet, features: Sequence[FeatureDef]) -> SessionReport:
    """Scores for one session; post-intervention fields appear once round 2 ends."""
    acc1 = _round_accuracy(state, 1)
    if not state.elicitations or acc1 is None:
        raise PhaseTooEarly(
            f"report needs round-1 elicitation and predictions; phase is {state.phase!r}"
        )
    pre = congruence_report(state.elicitations[0], truth, features)
    post = None
    delta = None
    acc2 = None
    if state.phase == DONE and len(state.elicitations) >= 2:
        post = congruence_report(state.elicitations[1], truth, features)
        delta = congruence_delta(pre, post)
        acc2 = _round_accuracy(state, 2)
    return SessionReport(
        session_id=state.session_id,
        condition=state.condition,
        seed=state.seed,
        n_observations=len(state.observations),
        predictions_per_round=len(state.prediction_rounds[0]),
        pre=pre,
        post=post,
        delta=delta,
        accuracy_round1=acc1,
        accuracy_round2=acc2,
        completed=state.completed,
        duration_ms=state.events[-1].ts - state.events[0].ts,
    )


# ---------------------------------------------------------------------------
# Step views (what a client should render right now)


def step_view(state: SessionState, study: Study) -> Dict:
    """The current screen as a JSON-able dict: phase plus its payload.

    Ground-truth rules are never exposed before the intervention, and then
    only as rendered explanation text for the session's own condition.
    """
    phase = state.phase
    if phase == BRIEFING:
        return {
            "phase": phase,
            "payload": {
                "n_observations": len(state.observations),
                "predictions_per_round": len(state.prediction_rounds[0]),
            },
        }
    if phase == OBSERVING:
        obs = state.observations[state.obs_index]
        return {
            "phase": phase,
            "payload": {
                "index": state.obs_index,
                "total": len(state.observations),
                "profile": dict(obs.profile),
                "label": obs.label,
            },
        }
    if phase == ELICITING:
        menu = state.menu
        return {
            "phase": phase,
            "payload": {
                "round": state.round,
                "menu": {
                    "atoms": [
                        dict(atom_to_wire(a), id=i, text=atom_phrase(a, study.features))
                        for i, a in enumerate(menu.atoms)
                    ],
                    "classifications": [
                        {"id": i, "class": c, "direction": d}
                        for i, (c, d) in enumerate(menu.classifications)
                    ],
                },
            },
        }
    if phase == PREDICTING:
        item = state.prediction_rounds[state.round - 1][state.pred_index]
        classes: List[str] = []
        for c, _direction in state.menu.classifications:
            if c not in classes:
                classes.append(c)
        return {
            "phase": phase,
            "payload": {
                "round": state.round,
                "index": state.pred_index,
                "total": len(state.prediction_rounds[state.round - 1]),
                "profile": dict(item.profile),
                "classes": classes,
            },
        }
    if phase == INTERVENTION:
        pre = congruence_report(state.elicitations[0], study.truth, study.features)
        rules = select_explanations(state.condition, pre, study.truth)
        texts = [render_rule_text(r, study.features) for r in rules]
        if not texts:
            texts = [FILLER_TEXT]
        return {
            "phase": phase,
            "payload": {"condition": state.condition, "texts": texts},
        }
    return {"phase": DONE, "payload": {"completion_code": state.session_id}}


def _congruence_to_dict(r: CongruenceReport) -> Dict:
    return {
        "element_recall": r.element_recall,
        "element_precision": r.element_precision,
        "relation_accuracy": r.relation_accuracy,
        "composite": r.composite,
        "missing_elements": [atom_to_wire(a) for a in r.missing_elements],
        "extra_elements": [atom_to_wire(a) for a in r.extra_elements],
        "relation_errors": [
            {"rule_id": rule_id, "kinds": sorted(kinds)} for rule_id, kinds in r.relation_errors
        ],
        "matching": [
            {
                "elicited_index": m.elicited_index,
                "truth_rule_id": m.truth_rule_id,
                "similarity": m.similarity,
            }
            for m in r.matching
        ],
        "truth_fingerprint": r.truth_fingerprint,
    }


def report_to_dict(report: SessionReport) -> Dict:
    """JSON-able form of a SessionReport (service responses, CLI output)."""
    delta = None
    if report.delta is not None:
        delta = {
            "element_recall": report.delta.element_recall,
            "element_precision": report.delta.element_precision,
            "relation_accuracy": report.delta.relation_accuracy,
            "composite": report.delta.composite,
            "acquired_elements": [atom_to_wire(a) for a in report.delta.acquired_elements],
            "lost_elements": [atom_to_wire(a) for a in report.delta.lost_elements],
        }
    return {
        "session_id": report.session_id,
        "condition": report.condition,
        "seed": report.seed,
        "n_observations": report.n_observations,
        "predictions_per_round": report.predictions_per_round,
        "pre": _congruence_to_dict(report.pre),
        "post": _congruence_to_dict(report.post) if report.post is not None else None,
        "delta": delta,
        "prediction_accuracy": {
            "round1": report.accuracy_round1,
            "round2": report.accuracy_round2,
        },
        "completed": report.completed,
        "duration_ms": report.duration_ms,
    }


# ---------------------------------------------------------------------------
# Log (de)serialization


def log_header_line() -> str:
    return json.dumps({"format": LOG_FORMAT, "version": LOG_VERSION}, separators=(",", ":"), sort_keys=True)


def event_to_line(event: SessionEvent) -> str:
    doc = {"seq": event.seq, "ts": event.ts, "kind": event.kind, "payload": dict(event.payload)}
    return json.dumps(doc, separators=(",", ":"), sort_keys=True)


def serialize_log(events: Sequence[SessionEvent]) -> str:
    lines = [log_header_line()]
    lines.extend(event_to_line(e) for e in events)
    return "\n".join(lines) + "\n"


def parse_log(text: str) -> List[SessionEvent]:
    lines = [line for line in text.split("\n") if line.strip()]
    if not lines:
        raise MissingStarted("log file is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise MissingStarted(f"log header is not JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != LOG_FORMAT:
        raise MissingStarted("log header is missing or has the wrong format tag")
    if header.get("version") != LOG_VERSION:
        raise MissingStarted(f"unsupported log version {header.get('version')!r}")
    events: List[SessionEvent] = []
    for n, line in enumerate(lines[1:], start=2):
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PayloadError(f"log line {n} is not JSON: {exc}") from exc
        if not isinstance(doc, dict) or not {"seq", "ts", "kind", "payload"} <= doc.keys():
            raise PayloadError(f"log line {n} lacks required fields")
        events.append(
            SessionEvent(seq=doc["seq"], ts=doc["ts"], kind=doc["kind"], payload=doc["payload"])
        )
    return events


def events_signature(events: Sequence[SessionEvent]) -> Tuple:
    """Replay-comparison key: everything except timestamps."""
    return tuple(
        (e.seq, e.kind, json.dumps(dict(e.payload), sort_keys=True)) for e in events
    )


def state_signature(state: SessionState) -> Tuple:
    """Equality key for live-vs-replayed states, timestamps excluded."""
    return (
        state.session_id,
        state.study_fingerprint,
        state.stimuli_fingerprint,
        state.condition,
        state.seed,
        state.phase,
        state.obs_index,
        state.round,
        state.pred_index,
        state.elicitations,
        state.predictions,
        events_signature(state.events),
    )
