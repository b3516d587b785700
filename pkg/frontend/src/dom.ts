import type { PairPayload } from "./api.js";
import type { SurveySession } from "./session.js";
import type { View } from "./view.js";

// Real-DOM binding: two equal-size images side by side, the question text,
// two choice targets, keyboard shortcuts, progress bars, error banner.

export class DomView implements View {
  private readonly question: HTMLElement;
  private readonly leftImg: HTMLImageElement;
  private readonly rightImg: HTMLImageElement;
  private readonly leftButton: HTMLButtonElement;
  private readonly rightButton: HTMLButtonElement;
  private readonly progressBox: HTMLElement;
  private readonly banner: HTMLElement;
  private readonly retryNote: HTMLElement;
  private readonly completeBox: HTMLElement;

  constructor(private readonly root: HTMLElement) {
    root.innerHTML = `
      <div class="banner" id="banner" hidden></div>
      <div class="retry" id="retry" hidden>recording your last choice…</div>
      <h2 id="question"></h2>
      <div class="pair">
        <figure>
          <img id="left-img" alt="left streetscape">
          <button id="left-btn" class="choice">choose left (&larr;)</button>
        </figure>
        <figure>
          <img id="right-img" alt="right streetscape">
          <button id="right-btn" class="choice">choose right (&rarr;)</button>
        </figure>
      </div>
      <div id="progress"></div>
      <div id="complete" hidden><h2>All comparisons finished. Thank you!</h2></div>
    `;
    this.question = root.querySelector("#question")!;
    this.leftImg = root.querySelector("#left-img")!;
    this.rightImg = root.querySelector("#right-img")!;
    this.leftButton = root.querySelector("#left-btn")!;
    this.rightButton = root.querySelector("#right-btn")!;
    this.progressBox = root.querySelector("#progress")!;
    this.banner = root.querySelector("#banner")!;
    this.retryNote = root.querySelector("#retry")!;
    this.completeBox = root.querySelector("#complete")!;
  }

  bind(session: SurveySession): void {
    this.leftButton.addEventListener("click", () => void session.submitChoice("left"));
    this.rightButton.addEventListener("click", () => void session.submitChoice("right"));
    // arrow keys mirror the click targets exactly
    window.addEventListener("keydown", (event) => {
      if (event.key === "ArrowLeft") void session.submitChoice("left");
      if (event.key === "ArrowRight") void session.submitChoice("right");
    });
    const retryImage = (img: HTMLImageElement) => {
      img.addEventListener("error", () => {
        const src = img.src;
        this.showError("an image failed to load; click it to retry");
        img.addEventListener("click", () => {
          img.src = "";
          img.src = src;
        }, { once: true });
      });
    };
    retryImage(this.leftImg);
    retryImage(this.rightImg);
  }

  renderPair(pair: PairPayload): void {
    this.completeBox.hidden = true;
    this.question.textContent = pair.question_text;
    this.leftImg.src = pair.left.url;
    this.rightImg.src = pair.right.url;
  }

  setChoicesEnabled(enabled: boolean): void {
    this.leftButton.disabled = !enabled;
    this.rightButton.disabled = !enabled;
  }

  renderProgress(
    progress: Record<string, number>,
    target: number,
    order: readonly string[],
    currentIndex: number,
  ): void {
    const rows = order.map((indicator, i) => {
      const done = progress[indicator] ?? 0;
      const marker = i === currentIndex ? "▶" : done >= target ? "✓" : "";
      return `<div class="progress-row">
        <span class="marker">${marker}</span>
        <span class="name">${indicator}</span>
        <progress max="${target}" value="${done}"></progress>
        <span>${done}/${target}</span>
      </div>`;
    });
    this.progressBox.innerHTML = rows.join("");
  }

  showError(message: string | null): void {
    this.banner.hidden = message === null;
    this.banner.textContent = message ?? "";
  }

  showRetryPending(pending: boolean): void {
    this.retryNote.hidden = !pending;
  }

  showComplete(): void {
    this.question.textContent = "";
    this.completeBox.hidden = false;
    this.setChoicesEnabled(false);
  }
}
