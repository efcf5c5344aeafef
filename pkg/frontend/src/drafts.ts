// Draft rules under construction. Selections are menu-atom ids and a
// classification id, resolved against the served menu only at submit time.

export interface RuleDraft {
  relevance: number[];
  satisfaction: number[];
  classification: number | null;
}

export const MAX_ATOMS_PER_CLAUSE = 3;

export function emptyDraft(): RuleDraft {
  return { relevance: [], satisfaction: [], classification: null };
}

/** Complete means submittable: 1..3 atoms per clause and an outcome chosen. */
export function isComplete(draft: RuleDraft): boolean {
  const okClause = (ids: number[]) =>
    ids.length >= 1 && ids.length <= MAX_ATOMS_PER_CLAUSE;
  return (
    okClause(draft.relevance) &&
    okClause(draft.satisfaction) &&
    draft.classification !== null
  );
}

/**
 * The participant's rule list for the current elicitation round. Survives
 * failed submissions untouched; only an accepted submission or a new round
 * clears it.
 */
export class DraftStore {
  private items: RuleDraft[] = [];

  get drafts(): readonly RuleDraft[] {
    return this.items;
  }

  get size(): number {
    return this.items.length;
  }

  add(draft: RuleDraft): void {
    if (!isComplete(draft)) {
      throw new Error("cannot add an incomplete rule");
    }
    this.items.push(clone(draft));
  }

  update(index: number, draft: RuleDraft): void {
    if (!isComplete(draft)) {
      throw new Error("cannot save an incomplete rule");
    }
    if (index < 0 || index >= this.items.length) {
      throw new Error(`no draft at index ${index}`);
    }
    this.items[index] = clone(draft);
  }

  remove(index: number): void {
    if (index < 0 || index >= this.items.length) {
      throw new Error(`no draft at index ${index}`);
    }
    this.items.splice(index, 1);
  }

  get(index: number): RuleDraft {
    const item = this.items[index];
    if (!item) throw new Error(`no draft at index ${index}`);
    return clone(item);
  }

  clear(): void {
    this.items = [];
  }
}

function clone(draft: RuleDraft): RuleDraft {
  return {
    relevance: [...draft.relevance],
    satisfaction: [...draft.satisfaction],
    classification: draft.classification,
  };
}
