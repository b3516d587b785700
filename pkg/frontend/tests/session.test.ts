import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SurveySession } from "../src/session.js";
import { FakeServer, FakeView } from "./fakes.js";

const IMAGES = ["img00", "img01", "img02", "img03", "img04", "img05"];

function makeSession(
  server: FakeServer,
  participant = "p1",
  indicators: readonly string[] = ["vata", "safe"],
) {
  const view = new FakeView();
  const retries: Array<() => void> = [];
  const session = new SurveySession(
    new ApiClient("http://fake", server.fetch()),
    view,
    participant,
    indicators,
    0,
    (run) => retries.push(run),
  );
  return { session, view, retries };
}

describe("pair rendering", () => {
  it("renders the served pair with the question text verbatim", async () => {
    const server = new FakeServer(IMAGES, 18, {
      vata: "Which street view image do you perceive as having a more comfortable outdoor thermal environment for you?",
    });
    const { session, view } = makeSession(server, "p1", ["vata"]);
    await session.start();
    expect(view.pairs).toHaveLength(1);
    expect(view.pairs[0].question_text).toBe(
      "Which street view image do you perceive as having a more comfortable outdoor thermal environment for you?",
    );
    expect(view.pairs[0].left.id).not.toBe(view.pairs[0].right.id);
    expect(session.state.phase).toBe("choosing");
  });

  it("malformed payload raises the error banner and blocks submission", async () => {
    const server = new FakeServer(IMAGES);
    server.malformNextPair = 1;
    const { session, view } = makeSession(server);
    await session.start();
    expect(view.pairs).toHaveLength(0);
    expect(session.state.errorBanner).toMatch(/malformed/);
    await session.submitChoice("left");
    expect(server.log).toHaveLength(0);
  });
});

describe("submitting choices", () => {
  it("posts the clicked side and advances to the next pair on 201", async () => {
    const server = new FakeServer(IMAGES);
    const { session, view } = makeSession(server);
    await session.start();
    const first = view.pairs[0];
    await session.submitChoice("left");
    expect(server.log).toHaveLength(1);
    expect(server.log[0]).toMatchObject({
      indicator: first.indicator,
      left: first.left.id,
      right: first.right.id,
      winner: "left",
      participant: "p1",
    });
    expect(view.pairs).toHaveLength(2);
    expect(session.state.phase).toBe("choosing");
  });

  it("a rapid double-click records exactly one response", async () => {
    const server = new FakeServer(IMAGES);
    const { session } = makeSession(server);
    await session.start();
    const both = Promise.all([
      session.submitChoice("left"),
      session.submitChoice("left"),
    ]);
    await both;
    // the second click arrived while the first was in flight: one log line
    expect(server.log).toHaveLength(1);
  });

  it("disables the choice targets while a submission is in flight", async () => {
    const server = new FakeServer(IMAGES);
    const { session, view } = makeSession(server);
    await session.start();
    await session.submitChoice("right");
    const changes = view.enabledChanges;
    expect(changes.filter((c) => c === false).length).toBeGreaterThanOrEqual(1);
    expect(changes[changes.length - 1]).toBe(true);   // re-enabled on next pair
  });

  it("progress mirrors the server after every post", async () => {
    const server = new FakeServer(IMAGES);
    const { session, view } = makeSession(server);
    await session.start();
    const indicator = session.currentIndicator()!;
    await session.submitChoice("left");
    const last = view.progressCalls[view.progressCalls.length - 1];
    expect(last.progress[indicator]).toBe(1);
    expect(session.state.progress[indicator]).toBe(1);
  });
});

describe("network failure", () => {
  it("queues a failed post and records it exactly once on retry", async () => {
    const server = new FakeServer(IMAGES);
    const { session, view, retries } = makeSession(server);
    await session.start();
    server.failNextPost = 1;
    await session.submitChoice("left");
    expect(session.state.phase).toBe("retry_wait");
    expect(view.retryPending).toContain(true);
    expect(server.log).toHaveLength(0);
    expect(retries).toHaveLength(1);
    retries[0]();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(server.log).toHaveLength(1);
    expect(session.state.phase).toBe("choosing");
  });
});

describe("indicator blocks", () => {
  it("finishing the target for an indicator advances to the next block", async () => {
    const server = new FakeServer(IMAGES, 3);
    const { session, view } = makeSession(server, "p2", ["vata", "safe"]);
    await session.start();
    const firstIndicator = session.currentIndicator()!;
    for (let i = 0; i < 3; i++) {
      await session.submitChoice("left");
    }
    expect(session.currentIndicator()).not.toBe(firstIndicator);
    expect(session.state.indicatorIndex).toBe(1);
    expect(server.progress.get("p2")!.get(firstIndicator)).toBe(3);
    expect(view.pairs[view.pairs.length - 1].indicator).toBe(session.currentIndicator());
  });

  it("a 409 from the pair endpoint advances the indicator", async () => {
    const server = new FakeServer(IMAGES, 2);
    const { session } = makeSession(server, "p3", ["vata", "safe"]);
    // pre-load the server with a finished first block for p3
    const order = session.state.indicatorOrder;
    server.progress.set("p3", new Map([[order[0], 2]]));
    await session.start();
    expect(session.currentIndicator()).toBe(order[1]);
  });

  it("the 18th response flips server progress to 18/18 and moves the UI on", async () => {
    const manyImages = Array.from({ length: 40 }, (_, i) => `img${i}`);
    const server = new FakeServer(manyImages, 18);
    const { session } = makeSession(server, "p18", ["vata", "safe"]);
    await session.start();
    const first = session.currentIndicator()!;
    for (let i = 0; i < 18; i++) {
      expect(session.currentIndicator()).toBe(first);
      await session.submitChoice(i % 2 ? "left" : "right");
    }
    expect(server.progress.get("p18")!.get(first)).toBe(18);
    expect(session.state.progress[first]).toBe(18);
    expect(session.currentIndicator()).not.toBe(first);
    expect(server.log).toHaveLength(18);
  });

  it("completing every indicator shows the completion screen", async () => {
    const server = new FakeServer(IMAGES, 2);
    const { session, view } = makeSession(server, "p4", ["vata", "safe"]);
    await session.start();
    for (let i = 0; i < 4; i++) {
      await session.submitChoice("right");
    }
    expect(view.completed).toBe(true);
    expect(session.state.phase).toBe("complete");
    expect(server.log).toHaveLength(4);
  });
});
