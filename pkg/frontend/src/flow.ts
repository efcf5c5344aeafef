import { ApiClient, ApiError } from "./api";
import type { SessionEventBody, StepView, WireRule } from "./types";

// Far above any real session's event count; used only by the resume probe.
const PROBE_SEQ = 1_000_000_000;

/**
 * Drives one session against the service: tracks the next sequence number,
 * posts events, and resynchronizes after conflicts. GET /step stays the
 * single source of truth for what to render.
 */
export class StepFlowController {
  view: StepView | null = null;
  private nextSeq = 1;

  constructor(
    readonly api: ApiClient,
    readonly sessionId: string,
  ) {}

  get seq(): number {
    return this.nextSeq;
  }

  /** Fetch the current step and recover the next sequence number. */
  async resume(): Promise<StepView> {
    const view = await this.api.getStep(this.sessionId);
    this.view = view;
    if (view.phase !== "done") {
      this.nextSeq = await this.probeNextSeq();
    }
    return view;
  }

  async refresh(): Promise<StepView> {
    const view = await this.api.getStep(this.sessionId);
    this.view = view;
    return view;
  }

  ackObservation(): Promise<StepView> {
    return this.post("observation_ack", {});
  }

  submitElicitation(payload: {
    round: number;
    rules: WireRule[];
  }): Promise<StepView> {
    return this.post("elicitation_submitted", payload);
  }

  submitPrediction(chosenClass: string): Promise<StepView> {
    const view = this.view;
    if (!view || view.phase !== "predicting") {
      throw new Error("no prediction is being asked for");
    }
    return this.post("prediction_submitted", {
      round: view.payload.round,
      index: view.payload.index,
      class: chosenClass,
    });
  }

  ackIntervention(): Promise<StepView> {
    return this.post("intervention_ack", {});
  }

  /**
   * Apply one event. The sequence number advances only when the server
   * accepted it, so a rejected submission (409 conflict, 422 menu violation,
   * 400 bad payload) leaves this controller ready to retry as-is and never
   * costs the participant their drafts.
   */
  private async post(
    kind: string,
    payload: Record<string, unknown>,
  ): Promise<StepView> {
    const event: SessionEventBody = { seq: this.nextSeq, kind, payload };
    try {
      const view = await this.api.postEvent(this.sessionId, event);
      this.nextSeq += 1;
      this.view = view;
      return view;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        if (err.code === "duplicate_sequence") {
          // A retried delivery whose first copy landed: already applied.
          this.nextSeq += 1;
          return this.refresh();
        }
        if (err.code === "sequence_gap") {
          await this.resume();
        }
      }
      throw err;
    }
  }

  /**
   * Discover the next expected sequence number without changing anything.
   * The server checks sequence numbers before it even looks at the event
   * kind, so an unknown kind can never be applied: a duplicate-sequence
   * answer means "below the frontier", a gap means "above it", and a
   * bad-payload answer means the probe sat exactly on it.
   */
  private async probeNextSeq(): Promise<number> {
    const gapAt = async (seq: number): Promise<"below" | "at" | "above"> => {
      const result = await this.api.postEventRaw(this.sessionId, {
        seq,
        kind: "seq_probe",
        payload: {},
      });
      const code = result.body.code;
      if (result.status === 409 && code === "duplicate_sequence") return "below";
      if (result.status === 409 && code === "sequence_gap") return "above";
      return "at";
    };

    const first = await this.api.postEventRaw(this.sessionId, {
      seq: PROBE_SEQ,
      kind: "seq_probe",
      payload: {},
    });
    if (first.status === 409 && first.body.code === "sequence_gap") {
      const message =
        typeof first.body.message === "string" ? first.body.message : "";
      const match = /expected (\d+)/.exec(message);
      if (match) return parseInt(match[1]!, 10);
    }

    // Fallback if the gap message ever stops naming the frontier: gallop up
    // from 1, then bisect on probe answers.
    let low = 1;
    let high = 2;
    while ((await gapAt(high)) === "below") {
      low = high;
      high *= 2;
      if (high > PROBE_SEQ) throw new Error("sequence probe ran away");
    }
    while (low < high) {
      const mid = Math.floor((low + high) / 2);
      const where = await gapAt(mid);
      if (where === "below") low = mid + 1;
      else if (where === "at") return mid;
      else high = mid;
    }
    return low;
  }
}
