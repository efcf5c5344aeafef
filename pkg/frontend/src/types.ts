// Wire types mirroring the service JSON API. Everything the client renders
// comes from these payloads; there is no client-side rule knowledge.

export type Scalar = number | boolean | string;
export type Profile = Record<string, Scalar>;

/** One selectable clause atom as served in the elicitation menu. */
export interface MenuAtom {
  id: number;
  text: string;
  feature: string;
  op: string;
  value?: number | boolean;
  values?: string[];
}

/** One selectable (class, direction) outcome. */
export interface MenuClassification {
  id: number;
  class: string;
  direction: "more" | "less";
}

export interface ClauseMenu {
  atoms: MenuAtom[];
  classifications: MenuClassification[];
}

// Atom as posted back in an elicitation payload: menu atom minus id/text.
export interface WireAtom {
  feature: string;
  op: string;
  value?: number | boolean;
  values?: string[];
}

export interface WireRule {
  relevance: WireAtom[];
  satisfaction: WireAtom[];
  class: string;
  direction: string;
}

export interface BriefingView {
  phase: "briefing";
  payload: { n_observations: number; predictions_per_round: number };
}

export interface ObservingView {
  phase: "observing";
  payload: { index: number; total: number; profile: Profile; label: string };
}

export interface ElicitingView {
  phase: "eliciting";
  payload: { round: number; menu: ClauseMenu };
}

export interface PredictingView {
  phase: "predicting";
  payload: {
    round: number;
    index: number;
    total: number;
    profile: Profile;
    classes: string[];
  };
}

export interface InterventionView {
  phase: "intervention";
  payload: { condition: string; texts: string[] };
}

export interface DoneView {
  phase: "done";
  payload: { completion_code: string };
}

export type StepView =
  | BriefingView
  | ObservingView
  | ElicitingView
  | PredictingView
  | InterventionView
  | DoneView;

export interface SessionEventBody {
  seq: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface CongruenceDoc {
  element_recall: number;
  element_precision: number;
  relation_accuracy: number;
  composite: number;
  [key: string]: unknown;
}

export interface ReportDoc {
  session_id: string;
  condition: string;
  seed: number;
  n_observations: number;
  predictions_per_round: number;
  pre: CongruenceDoc;
  post: CongruenceDoc | null;
  delta: { composite: number; [key: string]: unknown } | null;
  prediction_accuracy: { round1: number | null; round2: number | null };
  completed: boolean;
  duration_ms: number;
}

export interface StudyDoc {
  name: string;
  classes: string[];
  features: Array<{
    name: string;
    kind: string;
    minimum?: number;
    maximum?: number;
    step?: number;
    values?: string[];
    unit?: string;
  }>;
  observation_params: { count: number; demonstrate_each: number; seed: number };
}
