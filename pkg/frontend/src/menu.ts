import type {
  ClauseMenu,
  MenuAtom,
  MenuClassification,
  WireAtom,
  WireRule,
} from "./types";
import { isComplete, type RuleDraft } from "./drafts";

export function atomById(menu: ClauseMenu, id: number): MenuAtom {
  const atom = menu.atoms.find((a) => a.id === id);
  if (!atom) throw new Error(`menu has no atom ${id}`);
  return atom;
}

export function classificationById(
  menu: ClauseMenu,
  id: number,
): MenuClassification {
  const cls = menu.classifications.find((c) => c.id === id);
  if (!cls) throw new Error(`menu has no classification ${id}`);
  return cls;
}

/** Strip menu bookkeeping; the server compares atoms by content, not id. */
export function toWireAtom(atom: MenuAtom): WireAtom {
  const wire: WireAtom = { feature: atom.feature, op: atom.op };
  if (atom.op === "in") {
    wire.values = [...(atom.values ?? [])];
  } else {
    wire.value = atom.value;
  }
  return wire;
}

/**
 * Serialize finished drafts to the elicitation event payload. Atoms go out
 * by their canonical content so server-side comparison is independent of
 * menu position; an empty draft list is a legal "no rules" submission.
 */
export function buildElicitationPayload(
  drafts: readonly RuleDraft[],
  menu: ClauseMenu,
  round: number,
): { round: number; rules: WireRule[] } {
  const rules = drafts.map((draft, index) => {
    if (!isComplete(draft)) {
      throw new Error(`draft ${index + 1} is incomplete`);
    }
    const outcome = classificationById(menu, draft.classification as number);
    return {
      relevance: draft.relevance.map((id) => toWireAtom(atomById(menu, id))),
      satisfaction: draft.satisfaction.map((id) => toWireAtom(atomById(menu, id))),
      class: outcome.class,
      direction: outcome.direction,
    };
  });
  return { round, rules };
}

/** Short human-readable line for a draft card. */
export function describeDraft(draft: RuleDraft, menu: ClauseMenu): string {
  const texts = (ids: number[]) =>
    ids.map((id) => atomById(menu, id).text).join(" and ");
  const outcome =
    draft.classification === null
      ? "?"
      : formatClassification(classificationById(menu, draft.classification));
  return `When ${texts(draft.relevance)}, the AI checks ${texts(
    draft.satisfaction,
  )}; if met, ${outcome}.`;
}

export function formatClassification(cls: MenuClassification): string {
  const shift = cls.direction === "more" ? "more" : "less";
  return `'${cls.class}' becomes ${shift} likely`;
}
