import { ApiClient, PairPayload } from "./api.js";
import { INDICATORS, indicatorOrder } from "./order.js";
import type { View } from "./view.js";

export type Phase =
  | "idle"
  | "loading"
  | "choosing"
  | "submitting"
  | "retry_wait"
  | "complete";

export interface UiSessionState {
  participant: string;
  indicatorOrder: string[];
  indicatorIndex: number;
  currentPair: PairPayload | null;
  progress: Record<string, number>;
  target: number;
  errorBanner: string | null;
  phase: Phase;
}

function validPair(body: unknown): body is PairPayload {
  if (typeof body !== "object" || body === null) return false;
  const pair = body as PairPayload;
  return (
    !!pair.left?.id &&
    !!pair.right?.id &&
    typeof pair.left.url === "string" &&
    typeof pair.right.url === "string" &&
    typeof pair.question_text === "string" &&
    pair.question_text.length > 0 &&
    pair.left.id !== pair.right.id
  );
}

// Drives one participant's survey pass: indicators in a seeded block
// order, pairs served and answered until the server reports each
// indicator complete. A failed POST is queued and retried; the recorded
// click is never dropped.
export class SurveySession {
  readonly state: UiSessionState;
  private queuedWinner: ("left" | "right") | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly view: View,
    participant: string,
    indicators: readonly string[] = INDICATORS,
    readonly retryDelayMs = 1500,
    private readonly scheduleRetry: (run: () => void, delayMs: number) => void = (
      run,
      delay,
    ) => setTimeout(run, delay),
  ) {
    this.state = {
      participant,
      indicatorOrder: indicatorOrder(participant, indicators),
      indicatorIndex: 0,
      currentPair: null,
      progress: {},
      target: 18,
      errorBanner: null,
      phase: "idle",
    };
  }

  currentIndicator(): string | null {
    const { indicatorOrder: order, indicatorIndex } = this.state;
    return indicatorIndex < order.length ? order[indicatorIndex] : null;
  }

  async start(): Promise<void> {
    await this.refreshProgress();
    await this.nextPair();
  }

  private async refreshProgress(): Promise<void> {
    try {
      const result = await this.api.getProgress(this.state.participant);
      if (result.status === 200) {
        this.state.progress = result.body.progress;
        this.state.target = result.body.target;
      } else if (result.status === 404) {
        this.state.progress = {}; // participant not registered yet
      }
    } catch {
      // keep the last known progress on transient failures
    }
    this.view.renderProgress(
      this.state.progress,
      this.state.target,
      this.state.indicatorOrder,
      this.state.indicatorIndex,
    );
  }

  private indicatorDone(indicator: string): boolean {
    return (this.state.progress[indicator] ?? 0) >= this.state.target;
  }

  async nextPair(): Promise<void> {
    const indicator = this.currentIndicator();
    if (indicator === null) {
      this.state.phase = "complete";
      this.state.currentPair = null;
      this.view.showComplete();
      return;
    }
    if (this.indicatorDone(indicator)) {
      await this.advanceIndicator();
      return;
    }
    this.state.phase = "loading";
    let result;
    try {
      result = await this.api.getPair(indicator, this.state.participant);
    } catch {
      this.state.phase = "idle";
      this.setError("network failure while fetching the next pair; retrying");
      this.scheduleRetry(() => void this.nextPair(), this.retryDelayMs);
      return;
    }
    if (result.status === 409) {
      // server says this indicator is finished for the participant
      await this.refreshProgress();
      await this.advanceIndicator();
      return;
    }
    if (result.status !== 200 || !validPair(result.body)) {
      this.state.phase = "idle";
      this.state.currentPair = null;
      this.setError("malformed pair payload from server");
      return;
    }
    this.setError(null);
    this.state.currentPair = result.body;
    this.state.phase = "choosing";
    this.view.renderPair(result.body);
    this.view.setChoicesEnabled(true);
  }

  async advanceIndicator(): Promise<void> {
    this.state.indicatorIndex += 1;
    this.view.renderProgress(
      this.state.progress,
      this.state.target,
      this.state.indicatorOrder,
      this.state.indicatorIndex,
    );
    await this.nextPair();
  }

  // One rendered pair yields at most one recorded response: submissions are
  // accepted only in the "choosing" phase and the phase flips before any
  // await, so a double-click cannot double-submit.
  async submitChoice(winner: "left" | "right"): Promise<void> {
    if (this.state.phase !== "choosing" || this.state.currentPair === null) {
      return;
    }
    this.state.phase = "submitting";
    this.view.setChoicesEnabled(false);
    await this.postCurrent(winner);
  }

  private async postCurrent(winner: "left" | "right"): Promise<void> {
    const pair = this.state.currentPair;
    if (pair === null) return;
    const indicator = pair.indicator;
    let result;
    try {
      result = await this.api.postResponse(
        indicator,
        pair.left.id,
        pair.right.id,
        winner,
        this.state.participant,
      );
    } catch {
      // transport failure: keep the click, retry visibly
      this.state.phase = "retry_wait";
      this.queuedWinner = winner;
      this.view.showRetryPending(true);
      this.setError("network failure while recording your choice; retrying");
      this.scheduleRetry(() => void this.flushRetry(), this.retryDelayMs);
      return;
    }
    this.queuedWinner = null;
    this.view.showRetryPending(false);
    if (result.status === 201) {
      this.setError(null);
      this.state.currentPair = null;
      await this.refreshProgress();
      const current = this.currentIndicator();
      if (current !== null && this.indicatorDone(current)) {
        await this.advanceIndicator();
      } else {
        await this.nextPair();
      }
      return;
    }
    if (result.status === 409) {
      // duplicate or stale pair: the server already holds a response
      this.state.currentPair = null;
      await this.refreshProgress();
      const current = this.currentIndicator();
      if (current !== null && this.indicatorDone(current)) {
        await this.advanceIndicator();
      } else {
        await this.nextPair();
      }
      return;
    }
    this.state.phase = "idle";
    this.setError(`server rejected the response (${result.status})`);
  }

  async flushRetry(): Promise<void> {
    if (this.state.phase !== "retry_wait" || this.queuedWinner === null) {
      return;
    }
    this.state.phase = "submitting";
    await this.postCurrent(this.queuedWinner);
  }

  private setError(message: string | null): void {
    this.state.errorBanner = message;
    this.view.showError(message);
  }
}
