/**
 * Frame presentation state shared by the live view and rewatch.
 *
 * Incoming frames land in a keep-latest mailbox; the render loop takes the
 * newest one each pass. When rendering lags the stream, intermediate frames
 * are skipped — never reordered — so the displayed frame index can only move
 * forward within a playback run. Joining a live stream mid-session therefore
 * starts at a current frame, not at index 0.
 *
 * Every painted frame is cross-checked against the index strip embedded in
 * its own pixels, so the on-screen counter provably matches what is shown.
 */

import { ParsedFrame, stripMatchesHeader } from "./frames.js";
import type { Cue } from "./srt.js";

export type ViewerMode = "LIVE" | "REWATCH";

export interface ViewerState {
  mode: ViewerMode;
  sessionId: string | null;
  /** Index of the last painted frame; -1 before the first paint of a run. */
  lastRenderedFrameIndex: number;
  overlayCues: Cue[];
  connection: "connecting" | "connected" | "disconnected";
  /** Painted frames per second over the trailing window. */
  displayFps: number;
  /** True when a painted frame's pixel strip contradicted its header. */
  stripMismatch: boolean;
}

const FPS_WINDOW_MS = 1000;

export class Viewer {
  readonly state: ViewerState = {
    mode: "LIVE",
    sessionId: null,
    lastRenderedFrameIndex: -1,
    overlayCues: [],
    connection: "disconnected",
    displayFps: 0,
    stripMismatch: false,
  };

  private latest: ParsedFrame | null = null;
  private paintTimesMs: number[] = [];

  constructor(private readonly now: () => number = () => Date.now()) {}

  /** Enter a mode and start a fresh playback run. */
  startRun(mode: ViewerMode, sessionId: string | null): void {
    this.state.mode = mode;
    this.state.sessionId = sessionId;
    this.state.lastRenderedFrameIndex = -1;
    this.state.overlayCues = [];
    this.state.stripMismatch = false;
    this.latest = null;
    this.paintTimesMs = [];
    this.state.displayFps = 0;
  }

  setConnection(connection: ViewerState["connection"]): void {
    this.state.connection = connection;
  }

  /**
   * Offer an incoming frame. Frames at or behind the displayed position are
   * dropped (degrade by skipping, never by reordering); a newer frame
   * replaces any not-yet-painted one.
   */
  offer(frame: ParsedFrame): void {
    if (frame.frameIndex <= this.state.lastRenderedFrameIndex) return;
    if (this.latest !== null && frame.frameIndex < this.latest.frameIndex) return;
    this.latest = frame;
  }

  /**
   * Take the newest pending frame for painting, advancing the displayed
   * index, fps estimate, and strip check. Returns null when nothing newer
   * than the current frame is pending.
   */
  takeForRender(): ParsedFrame | null {
    const frame = this.latest;
    if (frame === null) return null;
    this.latest = null;
    this.state.lastRenderedFrameIndex = frame.frameIndex;
    if (!stripMatchesHeader(frame)) this.state.stripMismatch = true;
    const now = this.now();
    this.paintTimesMs.push(now);
    const cutoff = now - FPS_WINDOW_MS;
    while (this.paintTimesMs.length > 0 && this.paintTimesMs[0] <= cutoff) {
      this.paintTimesMs.shift();
    }
    this.state.displayFps = this.paintTimesMs.length;
    return frame;
  }

  setOverlayCues(cues: Cue[]): void {
    this.state.overlayCues = cues;
  }
}
