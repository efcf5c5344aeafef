import { ApiClient, ApiError } from "./api";
import { DraftStore } from "./drafts";
import { StepFlowController } from "./flow";
import { buildElicitationPayload } from "./menu";
import {
  briefingScreen,
  builderScreen,
  doneScreen,
  interventionScreen,
  observationScreen,
  predictionScreen,
} from "./screens";
import type { StepView } from "./types";

const SESSION_HASH = /^#\/s\/([A-Za-z0-9_-]+)$/;

export function parseSessionHash(hash: string): string | null {
  const match = SESSION_HASH.exec(hash);
  return match ? match[1]! : null;
}

/**
 * Hash-routed single page app. `#/s/{session_id}` runs that session;
 * anything else shows a small form for starting one. Re-opening a session
 * URL resumes at the current phase.
 */
export class App {
  readonly api: ApiClient;
  readonly drafts = new DraftStore();
  controller: StepFlowController | null = null;
  /** The last screen-changing action; tests and callers can await it. */
  pending: Promise<unknown> = Promise.resolve();

  private draftsRound: number | null = null;

  constructor(
    readonly root: HTMLElement,
    api?: ApiClient,
  ) {
    this.api = api ?? new ApiClient();
  }

  async start(): Promise<void> {
    const sessionId = parseSessionHash(window.location.hash);
    if (!sessionId) {
      this.controller = null;
      this.renderLanding();
      return;
    }
    if (this.controller?.sessionId !== sessionId) {
      this.controller = new StepFlowController(this.api, sessionId);
      this.draftsRound = null;
      this.drafts.clear();
    }
    try {
      const view = await this.controller.resume();
      this.render(view);
    } catch (err) {
      this.renderFatal(err);
    }
  }

  render(view: StepView): void {
    const controller = this.controller;
    if (!controller) return;
    switch (view.phase) {
      case "briefing":
        this.swap(briefingScreen(view, () => this.act(controller.ackObservation())));
        return;
      case "observing":
        this.swap(observationScreen(view, () => this.act(controller.ackObservation())));
        return;
      case "eliciting": {
        if (this.draftsRound !== view.payload.round) {
          this.drafts.clear();
          this.draftsRound = view.payload.round;
        }
        const screen = builderScreen(view, this.drafts, {
          onSubmit: () => {
            const payload = buildElicitationPayload(
              this.drafts.drafts,
              view.payload.menu,
              view.payload.round,
            );
            this.act(controller.submitElicitation(payload));
          },
        });
        this.swap(screen);
        return;
      }
      case "predicting":
        this.swap(
          predictionScreen(view, (cls) => this.act(controller.submitPrediction(cls))),
        );
        return;
      case "intervention":
        this.swap(
          interventionScreen(view, () => this.act(controller.ackIntervention())),
        );
        return;
      case "done":
        this.swap(doneScreen(view));
        return;
    }
  }

  /**
   * Run one action and re-render on success. A rejected submission keeps the
   * current screen and drafts exactly as they are and shows what happened.
   */
  private act(step: Promise<StepView>): void {
    this.pending = step.then(
      (view) => this.render(view),
      (err: unknown) => this.showError(err),
    );
  }

  private swap(screen: HTMLElement): void {
    this.root.textContent = "";
    this.root.append(screen);
  }

  private showError(err: unknown): void {
    const message =
      err instanceof ApiError
        ? `The server declined that (${err.code}): ${err.message}`
        : err instanceof Error
          ? `Something went wrong: ${err.message}`
          : "Something went wrong.";
    let banner = this.root.querySelector<HTMLElement>(".banner-error");
    if (!banner) {
      banner = document.createElement("p");
      banner.className = "banner banner-error";
      this.root.firstElementChild?.prepend(banner);
    }
    banner.hidden = false;
    banner.textContent = message;
  }

  private renderFatal(err: unknown): void {
    const section = document.createElement("section");
    section.className = "screen screen-error";
    const h1 = document.createElement("h1");
    h1.textContent = "Session unavailable";
    const p = document.createElement("p");
    p.textContent =
      err instanceof ApiError && err.status === 404
        ? "This session link does not point to a known session."
        : "The study server could not be reached. Check the link and try again.";
    section.append(h1, p);
    this.swap(section);
  }

  private renderLanding(): void {
    const section = document.createElement("section");
    section.className = "screen screen-landing";
    section.innerHTML = `
      <h1>Start a session</h1>
      <p class="lead">Paste the study id you were given, pick a condition, and begin.</p>
      <form class="landing-form">
        <label>Study id <input name="study" required /></label>
        <label>Condition
          <select name="condition">
            <option value="none">none</option>
            <option value="full">full</option>
            <option value="targeted">targeted</option>
          </select>
        </label>
        <label>Seed <input name="seed" type="number" value="1" required /></label>
        <button class="button" data-action="create-session" type="submit">Start</button>
      </form>
      <p class="banner banner-error" hidden></p>
    `;
    const form = section.querySelector("form")!;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const data = new FormData(form);
      const studyId = String(data.get("study") ?? "").trim();
      const condition = String(data.get("condition") ?? "none");
      const seed = Number(data.get("seed") ?? 1);
      this.pending = this.api
        .createSession(studyId, condition, seed)
        .then((sessionId) => {
          window.location.hash = `#/s/${sessionId}`;
          return this.start();
        })
        .catch((err: unknown) => {
          const banner = section.querySelector<HTMLElement>(".banner-error")!;
          banner.hidden = false;
          banner.textContent =
            err instanceof ApiError ? err.message : "Could not start a session.";
        });
    });
    this.swap(section);
  }
}
