"""Study platform for measuring how well people infer a transparent
rule-based classifier: seeded stimuli, event-sourced sessions, congruence
scoring, simulated participants, and an HTTP service for the browser UI.
"""

from .rules import (
    BOOLEAN,
    CATEGORICAL,
    CanonicalAtom,
    Classification,
    ConstraintRule,
    FeatureDef,
    IllegalComparator,
    InvalidAtom,
    LESS,
    MORE,
    NUMERIC,
    RawAtom,
    RuleModelError,
    RuleSet,
    RuleStatus,
    UnknownFeature,
    atoms_equivalent,
    canonicalize_atom,
    classify,
    eval_atom,
    rule_status,
    truth_vector,
    validate_rule,
)
from .dsl import (
    ClauseMenu,
    MenuExhausted,
    MenuParams,
    ObservationParams,
    ParseIssue,
    ParseResult,
    PredictionParams,
    Study,
    StudyParseError,
    atom_phrase,
    build_menu,
    load_study,
    parse_study,
    parse_study_or_raise,
    print_study,
    render_rule_text,
)
from .generation import (
    CoverageUnsatisfiable,
    Observation,
    PredictionBatch,
    PredictionItem,
    domain_size,
    enumerate_profiles,
    generate_observations,
    generate_prediction_items,
)
from .congruence import (
    CongruenceDelta,
    CongruenceReport,
    EmptyTruth,
    Match,
    TruthMismatch,
    canonical_elements,
    congruence_delta,
    congruence_report,
    match_rules,
    rule_similarity,
)
from .session import (
    DuplicateSequence,
    IllegalTransition,
    MenuViolation,
    MissingStarted,
    PayloadError,
    PhaseTooEarly,
    SequenceGap,
    SessionError,
    SessionEvent,
    SessionReport,
    SessionState,
    StudyMismatch,
    apply_event,
    create_session,
    replay,
    select_explanations,
    session_report,
    step_view,
)
from .bots import BotSpec, make_bot, parse_bot_spec, run_bot_session

__version__ = "0.1.0"
