import type { PairPayload } from "./api.js";

// Everything the session controller can make the page do. The DOM binding
// implements this; tests substitute a recording fake.
export interface View {
  renderPair(pair: PairPayload): void;
  setChoicesEnabled(enabled: boolean): void;
  renderProgress(
    progress: Record<string, number>,
    target: number,
    order: readonly string[],
    currentIndex: number,
  ): void;
  showError(message: string | null): void;
  showRetryPending(pending: boolean): void;
  showComplete(): void;
}
