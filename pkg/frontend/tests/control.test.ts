import { describe, expect, it } from "vitest";

import { ControlPanel, MIN_SEND_INTERVAL_MS } from "../src/control.js";

interface Sent {
  kind: string;
  value: number | null;
  tag: string;
  atMs: number;
}

/** A panel on a fake clock with manually fired timers. */
function harness(options: { ackTimeoutMs?: number } = {}) {
  let nowMs = 0;
  let tagN = 0;
  const sent: Sent[] = [];
  const timers: Array<{ fn: () => void; at: number }> = [];

  const panel = new ControlPanel({
    emit: (kind, value, tag) => sent.push({ kind, value, tag, atMs: nowMs }),
    nextTag: () => `t${++tagN}`,
    now: () => nowMs,
    setTimer: (fn, delayMs) => {
      const handle = { fn, at: nowMs + delayMs };
      timers.push(handle);
      return handle;
    },
    clearTimer: (handle) => {
      const i = timers.indexOf(handle as { fn: () => void; at: number });
      if (i >= 0) timers.splice(i, 1);
    },
    ...options,
  });

  const advance = (ms: number): void => {
    const target = nowMs + ms;
    for (;;) {
      const due = timers.filter((t) => t.at <= target).sort((a, b) => a.at - b.at)[0];
      if (due === undefined) break;
      timers.splice(timers.indexOf(due), 1);
      nowMs = due.at;
      due.fn();
    }
    nowMs = target;
  };

  return { panel, sent, advance, now: () => nowMs };
}

describe("key bindings", () => {
  it("steps each axis from its current value", () => {
    const { panel, sent, advance } = harness();
    const presses: Array<[string, string, number]> = [
      ["ArrowUp", "SET_SPEED", 10],
      ["ArrowUp", "SET_SPEED", 20],
      ["ArrowDown", "SET_SPEED", 10],
      ["ArrowLeft", "SET_STEERING", -5],
      ["ArrowRight", "SET_STEERING", 0],
      ["w", "SET_CAM_TILT", 5],
      ["s", "SET_CAM_TILT", 0],
      ["a", "SET_CAM_PAN", -5],
      ["d", "SET_CAM_PAN", 0],
    ];
    for (const [key, kind, value] of presses) {
      advance(MIN_SEND_INTERVAL_MS + 1);
      expect(panel.keydown(key)).toBe(true);
      const last = sent[sent.length - 1];
      expect([last.kind, last.value]).toEqual([kind, value]);
    }
    expect(sent.length).toBe(presses.length);
  });

  it("maps space to STOP with no value and zeroes the speed display", () => {
    const { panel, sent, advance } = harness();
    panel.keydown("ArrowUp");
    advance(60);
    expect(panel.axes.speed).toBe(10);
    panel.keydown(" ");
    expect(sent[sent.length - 1]).toMatchObject({ kind: "STOP", value: null });
    expect(panel.axes.speed).toBe(0);
  });

  it("ignores unbound keys", () => {
    const { panel, sent } = harness();
    expect(panel.keydown("q")).toBe(false);
    expect(panel.keydown("Enter")).toBe(false);
    expect(sent.length).toBe(0);
  });
});

describe("rate limiting", () => {
  it("never emits more than one command per interval under key repeat", () => {
    const { panel, sent, advance } = harness();
    // 40 repeats, 10 ms apart: 400 ms of hammering ArrowUp.
    for (let i = 0; i < 40; i++) {
      panel.keydown("ArrowUp");
      advance(10);
    }
    advance(MIN_SEND_INTERVAL_MS);
    // At most one emit per MIN_SEND_INTERVAL_MS (20/s), not one per press.
    expect(sent.length).toBeLessThanOrEqual(Math.ceil(400 / MIN_SEND_INTERVAL_MS) + 1);
    expect(sent.length).toBeGreaterThanOrEqual(2);
    for (let i = 1; i < sent.length; i++) {
      expect(sent[i].atMs - sent[i - 1].atMs).toBeGreaterThanOrEqual(MIN_SEND_INTERVAL_MS);
    }
    // Coalescing keeps only the newest request: the final emit carries the
    // full accumulated speed, and nothing was reordered.
    expect(sent[sent.length - 1].value).toBe(400);
    expect(panel.axes.speed).toBe(400); // optimistic until the ack clamps it
  });

  it("sends immediately when the interval has already passed", () => {
    const { panel, sent, advance } = harness();
    panel.keydown("ArrowUp");
    advance(MIN_SEND_INTERVAL_MS + 5);
    panel.keydown("ArrowUp");
    expect(sent.length).toBe(2);
  });
});

describe("acks and errors", () => {
  it("marks a row acked and snaps axes to the server's applied value", () => {
    const { panel, sent, advance } = harness();
    // Drive steering well past the device limit of ±30.
    for (let i = 0; i < 8; i++) {
      panel.keydown("ArrowLeft");
      advance(MIN_SEND_INTERVAL_MS + 1);
    }
    expect(panel.axes.steering).toBe(-40); // optimistic request
    const last = sent[sent.length - 1];
    expect(last.value).toBe(-40);
    panel.onAck({
      tag: last.tag,
      kind: "SET_STEERING",
      value: -30,
      applied_frame_index: 123,
    });
    const row = panel.rows.find((r) => r.tag === last.tag)!;
    expect(row.state).toBe("acked");
    expect(row.requestedValue).toBe(-40);
    expect(row.ackValue).toBe(-30);
    expect(row.appliedFrameIndex).toBe(123);
    // Server-authoritative display: the axis shows the clamped value.
    expect(panel.axes.steering).toBe(-30);
  });

  it("shows gateway errors verbatim", () => {
    const { panel, sent } = harness();
    panel.submit({ kind: "WARP", value: 9 });
    panel.onError({
      tag: sent[0].tag,
      error: "MalformedPayload",
      detail: "'WARP' is not a valid CommandKind",
    });
    const row = panel.rows[0];
    expect(row.state).toBe("error");
    expect(row.error).toBe("MalformedPayload: 'WARP' is not a valid CommandKind");
  });

  it("ignores acks for unknown tags", () => {
    const { panel } = harness();
    panel.keydown("ArrowUp");
    panel.onAck({ tag: "bogus", value: 10 });
    expect(panel.rows[0].state).toBe("pending");
  });

  it("times out rows that never get an ack", () => {
    const { panel, advance } = harness({ ackTimeoutMs: 1000 });
    panel.keydown("ArrowUp");
    advance(1001);
    panel.sweepTimeouts();
    expect(panel.rows[0].state).toBe("error");
    expect(panel.rows[0].error).toBe("ack timeout after 1000 ms");
    expect(panel.pendingRows()).toEqual([]);
  });
});
