/**
 * Keyboard steering: key presses become control commands, acknowledgments
 * come back with the frame index where the device applied them.
 *
 * Bindings: ArrowUp/ArrowDown step speed by +-10%, ArrowLeft/ArrowRight step
 * steering by +-5 degrees, space issues STOP, and w/a/s/d step the camera
 * (w/s tilt, a/d pan) by +-5 degrees.
 *
 * Displayed values are server-authoritative: the panel's notion of the
 * current speed/steering/camera pose is corrected by every ack, so a held
 * key past a server-side clamp keeps showing the clamped value the gateway
 * actually applied. Emission is throttled to at most 20 commands per second
 * regardless of key repeat; bursts coalesce to the latest desired value.
 */

export const SPEED_STEP = 10;
export const STEERING_STEP = 5;
export const CAMERA_STEP = 5;
export const MIN_SEND_INTERVAL_MS = 50; // 20 commands per second

export interface CommandRequest {
  kind: string;
  value: number | null;
}

export type PendingState = "pending" | "acked" | "error";

export interface CommandRow {
  tag: string;
  kind: string;
  /** The value the panel asked for (pre-clamp). */
  requestedValue: number | null;
  sentAtMs: number;
  state: PendingState;
  /** The value the gateway applied (post-clamp), from the ack payload. */
  ackValue?: number | null;
  appliedFrameIndex?: number;
  /** The gateway's error name and detail, verbatim. */
  error?: string;
}

export interface AxisValues {
  speed: number;
  steering: number;
  pan: number;
  tilt: number;
}

interface PanelHooks {
  /** Transport: actually send (kind, value, tag) to the gateway. */
  emit: (kind: string, value: number | null, tag: string) => void;
  nextTag: () => string;
  now?: () => number;
  setTimer?: (fn: () => void, delayMs: number) => unknown;
  clearTimer?: (handle: unknown) => void;
  /** How long an unanswered command stays pending before timing out. */
  ackTimeoutMs?: number;
}

export class ControlPanel {
  readonly axes: AxisValues = { speed: 0, steering: 0, pan: 0, tilt: 0 };
  readonly rows: CommandRow[] = [];

  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, delayMs: number) => unknown;
  private readonly clearTimer: (handle: unknown) => void;
  private readonly ackTimeoutMs: number;

  private lastSentAtMs = -Infinity;
  private queued: CommandRequest | null = null;
  private flushTimer: unknown = null;

  constructor(private readonly hooks: PanelHooks) {
    this.now = hooks.now ?? (() => Date.now());
    this.setTimer = hooks.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = hooks.clearTimer ?? ((h) => clearTimeout(h as any));
    this.ackTimeoutMs = hooks.ackTimeoutMs ?? 5000;
  }

  /** Map one key press to a command, or null for an unbound key. */
  commandForKey(key: string): CommandRequest | null {
    switch (key) {
      case "ArrowUp":
        return { kind: "SET_SPEED", value: this.axes.speed + SPEED_STEP };
      case "ArrowDown":
        return { kind: "SET_SPEED", value: this.axes.speed - SPEED_STEP };
      case "ArrowLeft":
        return { kind: "SET_STEERING", value: this.axes.steering - STEERING_STEP };
      case "ArrowRight":
        return { kind: "SET_STEERING", value: this.axes.steering + STEERING_STEP };
      case " ":
        return { kind: "STOP", value: null };
      case "w":
        return { kind: "SET_CAM_TILT", value: this.axes.tilt + CAMERA_STEP };
      case "s":
        return { kind: "SET_CAM_TILT", value: this.axes.tilt - CAMERA_STEP };
      case "a":
        return { kind: "SET_CAM_PAN", value: this.axes.pan - CAMERA_STEP };
      case "d":
        return { kind: "SET_CAM_PAN", value: this.axes.pan + CAMERA_STEP };
      default:
        return null;
    }
  }

  /** Handle one key press; returns true when the key was bound. */
  keydown(key: string): boolean {
    const request = this.commandForKey(key);
    if (request === null) return false;
    this.submit(request);
    return true;
  }

  /** Queue a command through the rate limiter. */
  submit(request: CommandRequest): void {
    // Track the requested value optimistically so rapid presses step from
    // the latest request, not from a stale ack; acks re-anchor it below.
    this.applyLocal(request.kind, request.value);
    const elapsed = this.now() - this.lastSentAtMs;
    if (elapsed >= MIN_SEND_INTERVAL_MS && this.flushTimer === null) {
      this.sendNow(request);
      return;
    }
    this.queued = request; // coalesce: latest desired command wins
    if (this.flushTimer === null) {
      const wait = Math.max(0, MIN_SEND_INTERVAL_MS - elapsed);
      this.flushTimer = this.setTimer(() => {
        this.flushTimer = null;
        const next = this.queued;
        this.queued = null;
        if (next !== null) this.sendNow(next);
      }, wait);
    }
  }

  /** Route a gateway ack (matched by tag) into its pending row. */
  onAck(payload: {
    tag?: unknown;
    kind?: unknown;
    value?: unknown;
    applied_frame_index?: unknown;
  }): void {
    const row = this.rowByTag(payload.tag);
    if (row === null) return;
    row.state = "acked";
    row.ackValue = typeof payload.value === "number" ? payload.value : null;
    if (typeof payload.applied_frame_index === "number") {
      row.appliedFrameIndex = payload.applied_frame_index;
    }
    // Server-authoritative: displayed axes snap to what was actually applied.
    this.applyLocal(row.kind, row.ackValue);
  }

  /** Route a gateway error (matched by tag) into its pending row, verbatim. */
  onError(payload: { tag?: unknown; error?: unknown; detail?: unknown }): void {
    const row = this.rowByTag(payload.tag);
    if (row === null) return;
    row.state = "error";
    const name = typeof payload.error === "string" ? payload.error : "error";
    const detail = typeof payload.detail === "string" ? payload.detail : "";
    row.error = detail ? `${name}: ${detail}` : name;
  }

  /** Expire rows that have waited longer than the ack timeout. */
  sweepTimeouts(): void {
    const cutoff = this.now() - this.ackTimeoutMs;
    for (const row of this.rows) {
      if (row.state === "pending" && row.sentAtMs <= cutoff) {
        row.state = "error";
        row.error = `ack timeout after ${this.ackTimeoutMs} ms`;
      }
    }
  }

  pendingRows(): CommandRow[] {
    return this.rows.filter((r) => r.state === "pending");
  }

  private sendNow(request: CommandRequest): void {
    const tag = this.hooks.nextTag();
    this.lastSentAtMs = this.now();
    this.rows.push({
      tag,
      kind: request.kind,
      requestedValue: request.value,
      sentAtMs: this.lastSentAtMs,
      state: "pending",
    });
    this.hooks.emit(request.kind, request.value, tag);
  }

  private applyLocal(kind: string, value: number | null): void {
    switch (kind) {
      case "SET_SPEED":
        if (value !== null) this.axes.speed = value;
        break;
      case "SET_STEERING":
        if (value !== null) this.axes.steering = value;
        break;
      case "SET_CAM_PAN":
        if (value !== null) this.axes.pan = value;
        break;
      case "SET_CAM_TILT":
        if (value !== null) this.axes.tilt = value;
        break;
      case "STOP":
        this.axes.speed = 0;
        break;
    }
  }

  private rowByTag(tag: unknown): CommandRow | null {
    if (typeof tag !== "string") return null;
    return this.rows.find((r) => r.tag === tag) ?? null;
  }
}
