import type { FetchLike, PairPayload } from "../src/api.js";
import type { View } from "../src/view.js";

// In-memory stand-in for the survey service with the same semantics the
// real one guarantees: serve-before-answer, idempotent responses, a hard
// per-indicator cap, progress reconstruction.

export interface LoggedResponse {
  indicator: string;
  left: string;
  right: string;
  winner: string;
  participant: string;
}

export class FakeServer {
  log: LoggedResponse[] = [];
  served = new Set<string>();
  answered = new Set<string>();
  progress = new Map<string, Map<string, number>>();
  pairCounter = 0;
  failNextPost = 0;
  malformNextPair = 0;

  constructor(
    readonly images: string[],
    readonly target = 18,
    readonly questions: Record<string, string> = {},
  ) {}

  private key(participant: string, indicator: string, a: string, b: string): string {
    const [x, y] = [a, b].sort();
    return `${participant}|${indicator}|${x}|${y}`;
  }

  getPair(indicator: string, participant: string): { status: number; body: unknown } {
    const mine = this.progress.get(participant)?.get(indicator) ?? 0;
    if (mine >= this.target) {
      return { status: 409, body: { error: "indicator complete" } };
    }
    if (this.malformNextPair > 0) {
      this.malformNextPair -= 1;
      return { status: 200, body: { oops: true } };
    }
    const a = this.images[this.pairCounter % this.images.length];
    const b = this.images[(this.pairCounter + 1) % this.images.length];
    this.pairCounter += 1;
    this.served.add(this.key(participant, indicator, a, b));
    const body: PairPayload = {
      left: { id: a, url: `http://img/${a}.jpg` },
      right: { id: b, url: `http://img/${b}.jpg` },
      indicator,
      question_text: this.questions[indicator] ?? `Which image shows more ${indicator}?`,
    };
    return { status: 200, body };
  }

  postResponse(body: LoggedResponse): { status: number; body: unknown } {
    if (body.winner !== "left" && body.winner !== "right") {
      return { status: 400, body: { error: "bad winner" } };
    }
    const key = this.key(body.participant, body.indicator, body.left, body.right);
    if (this.answered.has(key)) {
      return { status: 409, body: { error: "already answered" } };
    }
    if (!this.served.has(key)) {
      return { status: 409, body: { error: "not served" } };
    }
    this.answered.add(key);
    this.served.delete(key);
    this.log.push(body);
    const mine = this.progress.get(body.participant) ?? new Map<string, number>();
    mine.set(body.indicator, (mine.get(body.indicator) ?? 0) + 1);
    this.progress.set(body.participant, mine);
    return { status: 201, body: { recorded: true } };
  }

  getProgress(participant: string): { status: number; body: unknown } {
    const mine = this.progress.get(participant);
    if (mine === undefined) {
      return { status: 404, body: { error: "unknown participant" } };
    }
    return {
      status: 200,
      body: {
        participant,
        target: this.target,
        progress: Object.fromEntries(mine.entries()),
      },
    };
  }

  fetch(): FetchLike {
    return async (url: string, init?: RequestInit) => {
      const parsed = new URL(url, "http://fake");
      let result: { status: number; body: unknown };
      if (parsed.pathname === "/api/pair") {
        result = this.getPair(
          parsed.searchParams.get("indicator")!,
          parsed.searchParams.get("participant")!,
        );
      } else if (parsed.pathname === "/api/response") {
        if (this.failNextPost > 0) {
          this.failNextPost -= 1;
          throw new Error("connection reset");
        }
        result = this.postResponse(JSON.parse(init!.body as string));
      } else if (parsed.pathname === "/api/progress") {
        result = this.getProgress(parsed.searchParams.get("participant")!);
      } else {
        result = { status: 404, body: { error: "no such endpoint" } };
      }
      return {
        status: result.status,
        json: async () => result.body,
      } as unknown as Response;
    };
  }
}

export class FakeView implements View {
  pairs: PairPayload[] = [];
  enabledChanges: boolean[] = [];
  progressCalls: Array<{ progress: Record<string, number>; currentIndex: number }> = [];
  errors: Array<string | null> = [];
  retryPending: boolean[] = [];
  completed = false;

  renderPair(pair: PairPayload): void {
    this.pairs.push(pair);
  }
  setChoicesEnabled(enabled: boolean): void {
    this.enabledChanges.push(enabled);
  }
  renderProgress(progress: Record<string, number>, _t: number, _o: readonly string[], currentIndex: number): void {
    this.progressCalls.push({ progress: { ...progress }, currentIndex });
  }
  showError(message: string | null): void {
    this.errors.push(message);
  }
  showRetryPending(pending: boolean): void {
    this.retryPending.push(pending);
  }
  showComplete(): void {
    this.completed = true;
  }
}
