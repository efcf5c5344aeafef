import { describe, expect, it } from "vitest";

import { DraftStore, emptyDraft, isComplete } from "../src/drafts";
import { buildElicitationPayload, toWireAtom } from "../src/menu";
import type { ClauseMenu } from "../src/types";

const MENU: ClauseMenu = {
  atoms: [
    { id: 0, text: "glucose >= 130", feature: "glucose", op: ">=", value: 130 },
    { id: 1, text: "fatigue is present", feature: "fatigue", op: "==", value: true },
    { id: 2, text: "heart disease is present", feature: "heart_disease", op: "==", value: true },
    { id: 3, text: "time is one of morning", feature: "time", op: "in", values: ["morning"] },
  ],
  classifications: [
    { id: 0, class: "healthy", direction: "more" },
    { id: 1, class: "diabetes", direction: "more" },
    { id: 2, class: "diabetes", direction: "less" },
  ],
};

describe("draft completeness", () => {
  it("requires one to three atoms per clause and a chosen outcome", () => {
    const draft = emptyDraft();
    expect(isComplete(draft)).toBe(false);
    draft.relevance = [0];
    expect(isComplete(draft)).toBe(false);
    draft.satisfaction = [1];
    expect(isComplete(draft)).toBe(false);
    draft.classification = 1;
    expect(isComplete(draft)).toBe(true);
    draft.relevance = [0, 1, 2, 3];
    expect(isComplete(draft)).toBe(false);
    draft.relevance = [0, 1, 3];
    expect(isComplete(draft)).toBe(true);
  });

  it("store rejects incomplete drafts and supports add, edit, delete", () => {
    const store = new DraftStore();
    expect(() => store.add(emptyDraft())).toThrow(/incomplete/);
    store.add({ relevance: [0], satisfaction: [1], classification: 1 });
    store.add({ relevance: [2], satisfaction: [0], classification: 2 });
    expect(store.size).toBe(2);
    store.update(1, { relevance: [2], satisfaction: [3], classification: 2 });
    expect(store.get(1).satisfaction).toEqual([3]);
    store.remove(0);
    expect(store.size).toBe(1);
    expect(store.get(0).relevance).toEqual([2]);
    expect(() => store.remove(5)).toThrow(/no draft/);
  });

  it("stored drafts are insulated from later mutation of the input", () => {
    const store = new DraftStore();
    const draft = { relevance: [0], satisfaction: [1], classification: 1 };
    store.add(draft);
    draft.relevance.push(2);
    expect(store.get(0).relevance).toEqual([0]);
  });
});

describe("elicitation payload serialization", () => {
  it("serializes atoms by content without menu bookkeeping", () => {
    const payload = buildElicitationPayload(
      [{ relevance: [0], satisfaction: [1], classification: 1 }],
      MENU,
      1,
    );
    expect(payload).toEqual({
      round: 1,
      rules: [
        {
          relevance: [{ feature: "glucose", op: ">=", value: 130 }],
          satisfaction: [{ feature: "fatigue", op: "==", value: true }],
          class: "diabetes",
          direction: "more",
        },
      ],
    });
    const flat = JSON.stringify(payload);
    expect(flat).not.toContain('"id"');
    expect(flat).not.toContain('"text"');
  });

  it("keeps categorical atoms as value lists", () => {
    const atom = MENU.atoms[3]!;
    expect(toWireAtom(atom)).toEqual({
      feature: "time",
      op: "in",
      values: ["morning"],
    });
  });

  it("an empty draft list is a legal payload", () => {
    expect(buildElicitationPayload([], MENU, 2)).toEqual({ round: 2, rules: [] });
  });

  it("refuses incomplete drafts and unknown ids", () => {
    expect(() =>
      buildElicitationPayload(
        [{ relevance: [0], satisfaction: [], classification: 1 }],
        MENU,
        1,
      ),
    ).toThrow(/incomplete/);
    expect(() =>
      buildElicitationPayload(
        [{ relevance: [99], satisfaction: [1], classification: 1 }],
        MENU,
        1,
      ),
    ).toThrow(/no atom 99/);
    expect(() =>
      buildElicitationPayload(
        [{ relevance: [0], satisfaction: [1], classification: 77 }],
        MENU,
        1,
      ),
    ).toThrow(/no classification 77/);
  });
});
