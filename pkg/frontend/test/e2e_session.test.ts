// @vitest-environment jsdom
import { existsSync } from "node:fs";
import { resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { App } from "../src/app";
import type { ElicitingView, PredictingView } from "../src/types";
import {
  buildRule,
  findAtomId,
  findClassificationId,
} from "./helpers/dom";
import {
  createFixtureStudy,
  startServer,
  type TestServer,
} from "./helpers/server";

const DIST_DIR = resolve(process.cwd(), "dist");

// The fixture's prediction stimuli depend only on the study definition, so
// the scripted participant can carry a frozen answer key. Every profile in
// both rounds has a distinct glucose value; keying on it keeps the script
// honest (an unknown profile fails loudly instead of guessing).
const CORRECT_LABEL_BY_GLUCOSE: Record<number, string> = {
  205: "diabetes",
  270: "diabetes",
  135: "healthy",
  185: "diabetes",
  100: "healthy",
  240: "diabetes",
  160: "healthy",
  180: "diabetes",
  295: "diabetes",
  280: "diabetes",
  210: "diabetes",
  255: "diabetes",
};

let server: TestServer;
let api: ApiClient;
let studyId: string;

beforeAll(async () => {
  if (!existsSync(`${DIST_DIR}/index.html`)) {
    throw new Error("dist/ is missing; run `npm run build` before the tests");
  }
  server = await startServer({ assets: DIST_DIR });
  api = new ApiClient(server.base);
  studyId = await createFixtureStudy(api);
});

afterAll(async () => {
  await server?.stop();
});

function queryButton(root: HTMLElement, selector: string): HTMLButtonElement {
  const button = root.querySelector<HTMLButtonElement>(selector);
  if (!button) throw new Error(`no element matches ${selector}`);
  return button;
}

async function answerPredictions(app: App, root: HTMLElement): Promise<void> {
  for (;;) {
    const view = app.controller!.view!;
    if (view.phase !== "predicting") return;
    const glucose = (view as PredictingView).payload.profile.glucose;
    const answer = CORRECT_LABEL_BY_GLUCOSE[glucose as number];
    if (!answer) throw new Error(`no scripted answer for glucose=${String(glucose)}`);
    queryButton(root, `button[data-action=predict][data-class="${answer}"]`).click();
    await app.pending;
  }
}

describe("scripted full session, condition full", () => {
  it("walks every phase and the exported row carries the expected scores", async () => {
    const sessionId = await api.createSession(studyId, "full", 9);
    window.location.hash = `#/s/${sessionId}`;
    const root = document.createElement("div");
    document.body.append(root);
    const app = new App(root, api);
    await app.start();

    // Briefing.
    expect(root.querySelector(".screen-briefing")).toBeTruthy();
    expect(root.textContent).toContain("12 cases");
    queryButton(root, "button[data-action=begin]").click();
    await app.pending;

    // Twelve observation cards, each with a profile and the AI's label.
    for (let i = 0; i < 12; i++) {
      expect(root.textContent).toContain(`Case ${i + 1} of 12`);
      expect(root.querySelector("table.profile")).toBeTruthy();
      expect(root.querySelector(".label-badge")?.textContent).toMatch(
        /^(healthy|diabetes)$/,
      );
      queryButton(root, "button[data-action=next]").click();
      await app.pending;
    }

    // Round 1 elicitation: state one of the two real rules.
    let view = app.controller!.view as ElicitingView;
    expect(view.phase).toBe("eliciting");
    expect(view.payload.round).toBe(1);
    let menu = view.payload.menu;
    buildRule(
      root,
      [findAtomId(menu, "glucose", ">=", 130)],
      [findAtomId(menu, "fatigue", "==", true)],
      findClassificationId(menu, "diabetes", "more"),
    );
    expect(app.drafts.size).toBe(1);
    queryButton(root, "button[data-action=submit-rules]").click();
    await app.pending;

    // Round 1 predictions, answered from the script.
    expect(app.controller!.view!.phase).toBe("predicting");
    expect(root.textContent).toContain("Prediction 1 of 6");
    await answerPredictions(app, root);

    // Full-condition intervention explains both rules.
    expect(app.controller!.view!.phase).toBe("intervention");
    const explanations = Array.from(
      root.querySelectorAll(".explanation"),
      (node) => node.textContent ?? "",
    );
    expect(explanations).toHaveLength(2);
    for (const text of explanations) {
      expect(text).toContain("BECOMES MORE LIKELY");
    }
    queryButton(root, "button[data-action=continue]").click();
    await app.pending;

    // Round 2 elicitation starts clean, then restates both rules exactly.
    view = app.controller!.view as ElicitingView;
    expect(view.phase).toBe("eliciting");
    expect(view.payload.round).toBe(2);
    expect(app.drafts.size).toBe(0);
    expect(root.querySelectorAll(".draft-card")).toHaveLength(0);
    menu = view.payload.menu;
    buildRule(
      root,
      [findAtomId(menu, "glucose", ">=", 130)],
      [findAtomId(menu, "fatigue", "==", true)],
      findClassificationId(menu, "diabetes", "more"),
    );
    buildRule(
      root,
      [findAtomId(menu, "heart_disease", "==", true)],
      [findAtomId(menu, "glucose", ">=", 185)],
      findClassificationId(menu, "diabetes", "more"),
    );
    expect(app.drafts.size).toBe(2);
    queryButton(root, "button[data-action=submit-rules]").click();
    await app.pending;

    // Round 2 predictions, then the completion screen.
    await answerPredictions(app, root);
    expect(app.controller!.view!.phase).toBe("done");
    expect(root.querySelector(".completion-code")?.textContent).toBe(sessionId);

    // The report carries the expected congruence arc.
    const report = await api.getReport(sessionId);
    expect(report.completed).toBe(true);
    expect(report.pre.element_recall).toBeCloseTo(0.5, 10);
    expect(report.pre.element_precision).toBeCloseTo(1.0, 10);
    expect(report.pre.relation_accuracy).toBeCloseTo(0.5, 10);
    expect(Math.abs(report.pre.composite - 2 / 3)).toBeLessThan(1e-4);
    expect(report.post?.composite).toBeCloseTo(1.0, 10);
    expect(Math.abs((report.delta?.composite ?? 0) - 1 / 3)).toBeLessThan(1e-4);
    expect(report.prediction_accuracy).toEqual({ round1: 1.0, round2: 1.0 });

    // And the CSV row matches it field for field.
    const csv = await api.exportCsv(studyId);
    const lines = csv.trim().split(/\r?\n/);
    expect(lines[0]).toBe(
      "session_id,condition,seed,n_observations,pre_recall,pre_precision," +
        "pre_relation_acc,pre_composite,post_recall,post_precision," +
        "post_relation_acc,post_composite,delta_composite,pred_acc_pre," +
        "pred_acc_post,completed",
    );
    const row = lines.find((line) => line.startsWith(sessionId));
    expect(row).toBeTruthy();
    const cells = row!.split(",");
    expect(cells[1]).toBe("full");
    expect(cells[2]).toBe("9");
    expect(cells[3]).toBe("12");
    expect(cells.slice(4, 8)).toEqual(["0.5", "1.0", "0.5", "0.6667"]);
    expect(cells.slice(8, 12)).toEqual(["1.0", "1.0", "1.0", "1.0"]);
    expect(cells[12]).toBe("0.3333");
    expect(cells[13]).toBe("1.0");
    expect(cells[14]).toBe("1.0");
    expect(cells[15]).toBe("true");
  });

  it("the built bundle is served from the service's static asset directory", async () => {
    const response = await fetch(`${server.base}/`);
    expect(response.status).toBe(200);
    const html = await response.text();
    expect(html).toContain('id="app"');
    expect(html).toContain("<script");

    // The API keeps priority over static files.
    const api404 = await fetch(`${server.base}/api/studies/not-real`);
    expect(api404.status).toBe(404);
    const body = (await api404.json()) as { code: string };
    expect(body.code).toBe("not_found");
  });
});
