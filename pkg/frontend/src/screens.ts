import type {
  BriefingView,
  DoneView,
  ElicitingView,
  InterventionView,
  MenuClassification,
  ObservingView,
  PredictingView,
  Profile,
} from "./types";
import {
  DraftStore,
  MAX_ATOMS_PER_CLAUSE,
  emptyDraft,
  isComplete,
  type RuleDraft,
} from "./drafts";
import { describeDraft, formatClassification } from "./menu";

// Plain DOM screens. Each render function returns a detached element; the
// app swaps it into the page and wires outcomes through the callbacks.

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(
  label: string,
  action: string,
  onClick: () => void,
): HTMLButtonElement {
  const node = el("button", "button", label);
  node.dataset.action = action;
  node.addEventListener("click", onClick);
  return node;
}

function formatValue(value: Profile[string]): string {
  if (typeof value === "boolean") return value ? "yes" : "no";
  return String(value);
}

export function profileTable(profile: Profile): HTMLTableElement {
  const table = el("table", "profile");
  for (const [feature, value] of Object.entries(profile)) {
    const row = table.insertRow();
    row.insertCell().textContent = feature.replaceAll("_", " ");
    const cell = row.insertCell();
    cell.textContent = formatValue(value);
    cell.dataset.feature = feature;
  }
  return table;
}

export function briefingScreen(
  view: BriefingView,
  onBegin: () => void,
): HTMLElement {
  const root = el("section", "screen screen-briefing");
  root.append(el("h1", undefined, "Welcome"));
  const p = view.payload;
  root.append(
    el(
      "p",
      "lead",
      `You will watch an AI assistant classify ${p.n_observations} cases. ` +
        `Afterwards you will describe the rules you think it follows and ` +
        `predict its answer on ${p.predictions_per_round} new cases. ` +
        `Then a short break, and one more round of both.`,
    ),
  );
  root.append(
    el(
      "p",
      undefined,
      "There are no right or wrong styles of answer; describe the AI as you understand it.",
    ),
  );
  root.append(button("Begin", "begin", onBegin));
  return root;
}

export function observationScreen(
  view: ObservingView,
  onNext: () => void,
): HTMLElement {
  const root = el("section", "screen screen-observation");
  const p = view.payload;
  root.append(el("h1", undefined, "Watch the AI"));
  root.append(
    el("p", "progress", `Case ${p.index + 1} of ${p.total}`),
  );
  root.append(profileTable(p.profile));
  const verdict = el("p", "verdict");
  verdict.append("The AI says: ");
  const badge = el("strong", "label-badge", p.label);
  badge.dataset.label = p.label;
  verdict.append(badge);
  root.append(verdict);
  root.append(button("Next", "next", onNext));
  return root;
}

export interface BuilderCallbacks {
  onSubmit: () => void;
  onChange?: () => void;
}

/**
 * Selection-list rule builder: three columns mirroring how explanations are
 * phrased (WHEN / THE AI CHECKS / THEN), a draft list with edit and delete,
 * and a submit button. Incomplete drafts cannot be added; submitting with no
 * rules at all is allowed.
 */
export function builderScreen(
  view: ElicitingView,
  store: DraftStore,
  callbacks: BuilderCallbacks,
): HTMLElement {
  const menu = view.payload.menu;
  const root = el("section", "screen screen-builder");
  root.append(el("h1", undefined, "Describe the AI's rules"));
  root.append(
    el(
      "p",
      "lead",
      "Build one rule at a time from the lists below, add it, and submit " +
        "when your list feels right. You may submit no rules at all.",
    ),
  );

  let editing: number | null = null;
  let current: RuleDraft = emptyDraft();

  const columns = el("div", "builder-columns");
  const relevanceColumn = clauseColumn("WHEN", "relevance");
  const satisfactionColumn = clauseColumn("THE AI CHECKS", "satisfaction");
  const outcomeColumn = outcomeColumnFor(menu.classifications);
  columns.append(relevanceColumn.root, satisfactionColumn.root, outcomeColumn.root);
  root.append(columns);

  const addButton = button("Add rule", "add-rule", () => {
    if (!isComplete(current)) return;
    if (editing === null) store.add(current);
    else store.update(editing, current);
    editing = null;
    current = emptyDraft();
    syncForm();
    renderList();
    callbacks.onChange?.();
  });
  addButton.disabled = true;

  const formRow = el("div", "builder-actions");
  formRow.append(addButton);
  root.append(formRow);

  const list = el("ol", "draft-list");
  root.append(list);

  const errorSlot = el("p", "banner banner-error");
  errorSlot.hidden = true;
  root.append(errorSlot);

  const submit = button("Submit my rules", "submit-rules", callbacks.onSubmit);
  root.append(submit);

  function clauseColumn(title: string, role: "relevance" | "satisfaction") {
    const column = el("div", "builder-column");
    column.dataset.role = role;
    column.append(el("h2", undefined, title));
    const options = el("ul", "atom-options");
    for (const atom of menu.atoms) {
      const item = el("li");
      const label = el("label");
      const box = el("input");
      box.type = "checkbox";
      box.dataset.atomId = String(atom.id);
      box.addEventListener("change", () => {
        const chosen = current[role];
        if (box.checked) chosen.push(atom.id);
        else current[role] = chosen.filter((id) => id !== atom.id);
        syncForm();
      });
      label.append(box, ` ${atom.text}`);
      item.append(label);
      options.append(item);
    }
    column.append(options);
    return { root: column, options };
  }

  function outcomeColumnFor(classifications: MenuClassification[]) {
    const column = el("div", "builder-column");
    column.dataset.role = "outcome";
    column.append(el("h2", undefined, "THEN"));
    const options = el("ul", "outcome-options");
    for (const cls of classifications) {
      const item = el("li");
      const label = el("label");
      const radio = el("input");
      radio.type = "radio";
      radio.name = "classification";
      radio.dataset.clsId = String(cls.id);
      radio.addEventListener("change", () => {
        if (radio.checked) current.classification = cls.id;
        syncForm();
      });
      label.append(radio, ` ${formatClassification(cls)}`);
      item.append(label);
      options.append(item);
    }
    column.append(options);
    return { root: column, options };
  }

  function syncForm(): void {
    // Reflect `current` into the inputs and cap each clause at three atoms.
    for (const role of ["relevance", "satisfaction"] as const) {
      const column = role === "relevance" ? relevanceColumn : satisfactionColumn;
      const chosen = current[role];
      const full = chosen.length >= MAX_ATOMS_PER_CLAUSE;
      column.options
        .querySelectorAll<HTMLInputElement>("input[type=checkbox]")
        .forEach((box) => {
          const id = Number(box.dataset.atomId);
          box.checked = chosen.includes(id);
          box.disabled = full && !box.checked;
        });
    }
    outcomeColumn.options
      .querySelectorAll<HTMLInputElement>("input[type=radio]")
      .forEach((radio) => {
        radio.checked = current.classification === Number(radio.dataset.clsId);
      });
    addButton.disabled = !isComplete(current);
    addButton.textContent = editing === null ? "Add rule" : "Save rule";
  }

  function renderList(): void {
    list.textContent = "";
    store.drafts.forEach((draft, index) => {
      const item = el("li", "draft-card");
      item.append(el("span", "draft-text", describeDraft(draft, menu)));
      const edit = button("Edit", "edit-rule", () => {
        editing = index;
        current = store.get(index);
        syncForm();
      });
      edit.dataset.index = String(index);
      const remove = button("Delete", "delete-rule", () => {
        store.remove(index);
        if (editing === index) {
          editing = null;
          current = emptyDraft();
        }
        syncForm();
        renderList();
        callbacks.onChange?.();
      });
      remove.dataset.index = String(index);
      item.append(edit, remove);
      list.append(item);
    });
  }

  syncForm();
  renderList();
  return root;
}

export function predictionScreen(
  view: PredictingView,
  onChoose: (cls: string) => void,
): HTMLElement {
  const root = el("section", "screen screen-prediction");
  const p = view.payload;
  root.append(el("h1", undefined, "Your turn to predict"));
  root.append(
    el("p", "progress", `Prediction ${p.index + 1} of ${p.total}`),
  );
  root.append(profileTable(p.profile));
  root.append(el("p", undefined, "What will the AI say about this case?"));
  const row = el("div", "class-buttons");
  for (const cls of p.classes) {
    const b = button(cls, "predict", () => onChoose(cls));
    b.dataset.class = cls;
    row.append(b);
  }
  root.append(row);
  return root;
}

export function interventionScreen(
  view: InterventionView,
  onContinue: () => void,
): HTMLElement {
  const root = el("section", "screen screen-intervention");
  root.append(el("h1", undefined, "A short break"));
  const list = el("ul", "explanations");
  for (const text of view.payload.texts) {
    list.append(el("li", "explanation", text));
  }
  root.append(list);
  root.append(button("Continue", "continue", onContinue));
  return root;
}

export function doneScreen(view: DoneView): HTMLElement {
  const root = el("section", "screen screen-done");
  root.append(el("h1", undefined, "All done"));
  root.append(el("p", undefined, "Thank you for taking part. Your completion code:"));
  root.append(el("p", "completion-code", view.payload.completion_code));
  return root;
}
