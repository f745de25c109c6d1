/**
 * Rewatch: replaying a packed session with cue overlays and frame-anchored
 * prompts.
 *
 * Cue overlays are computed from the parsed SRT sidecar, so a cue is visible
 * exactly while the displayed frame's timestamp falls inside its interval.
 * MARKER cues are prompts: reaching one pauses playback behind a modal that
 * must be dismissed before play resumes. Prompt answers are kept in memory
 * on the player (the packed session is immutable; there is nowhere server-
 * side for them to go).
 *
 * A container that fails client-side verification (manifest arithmetic,
 * frame ordering, pixel-strip cross-checks) plays anyway — behind a warning
 * banner.
 */

import type { Manifest } from "./api.js";
import { ParsedFrame, stripMatchesHeader } from "./frames.js";
import { activeCues, Cue, markerText } from "./srt.js";
import { Viewer } from "./viewer.js";

export interface MarkerAnswer {
  cueIndex: number;
  frameIndex: number;
  text: string;
  answer: string;
}

export interface MarkerModal {
  cue: Cue;
  text: string;
  frameIndex: number;
}

export interface ReplayVerification {
  ok: boolean;
  problems: string[];
}

/**
 * Client-side container verification: does the replayed stream agree with
 * the manifest and with its own embedded frame indices?
 */
export function verifyReplay(
  manifest: Manifest | null,
  frames: readonly ParsedFrame[],
): ReplayVerification {
  const problems: string[] = [];
  if (manifest === null) {
    problems.push("no manifest");
  } else {
    const segmentSum = manifest.segments.reduce((acc, s) => acc + s.frame_count, 0);
    if (segmentSum !== manifest.frame_count) {
      problems.push(`segments sum to ${segmentSum} frames, manifest says ${manifest.frame_count}`);
    }
    if (frames.length !== manifest.frame_count) {
      problems.push(`replay delivered ${frames.length} frames, manifest says ${manifest.frame_count}`);
    }
    for (const frame of frames) {
      if (frame.sessionId !== manifest.session_id) {
        problems.push(`frame ${frame.frameIndex} belongs to session ${frame.sessionId}`);
        break;
      }
    }
  }
  for (let i = 1; i < frames.length; i++) {
    if (frames[i].frameIndex <= frames[i - 1].frameIndex) {
      problems.push(`frame order breaks at position ${i}`);
      break;
    }
  }
  for (const frame of frames) {
    if (!stripMatchesHeader(frame)) {
      problems.push(`frame ${frame.frameIndex}: pixel strip contradicts the header`);
      break;
    }
  }
  return { ok: problems.length === 0, problems };
}

export class RewatchPlayer {
  playing = false;
  ended = false;
  modal: MarkerModal | null = null;
  readonly answers: MarkerAnswer[] = [];
  readonly verification: ReplayVerification;

  /** Array position of the next frame step() will render. */
  private cursor = 0;
  private dismissed = new Set<number>();
  private pausedByModal = false;
  private readonly markerCues: Cue[];

  constructor(
    private readonly frames: readonly ParsedFrame[],
    private readonly cues: readonly Cue[],
    private readonly fps: number,
    readonly viewer: Viewer,
    manifest: Manifest | null = null,
  ) {
    this.markerCues = cues.filter((c) => c.kind === "MARKER");
    this.verification = verifyReplay(manifest, frames);
    viewer.startRun("REWATCH", frames.length > 0 ? frames[0].sessionId : null);
  }

  /** Show the verification warning banner? Playback is allowed regardless. */
  get showWarningBanner(): boolean {
    return !this.verification.ok;
  }

  get currentFrameIndex(): number {
    return this.viewer.state.lastRenderedFrameIndex;
  }

  get lastFrameIndex(): number {
    return this.frames.length > 0 ? this.frames[this.frames.length - 1].frameIndex : -1;
  }

  activeCues(): Cue[] {
    const index = this.currentFrameIndex;
    return index < 0 ? [] : activeCues(this.cues, index, this.fps);
  }

  play(): void {
    if (this.modal !== null) return; // the prompt must be dismissed first
    if (this.cursor >= this.frames.length) return;
    this.playing = true;
    this.ended = false;
  }

  pause(): void {
    this.playing = false;
  }

  /**
   * Advance one frame if playing. The render scheduler calls this once per
   * frame period; while paused or behind a modal it is a no-op, freezing
   * the displayed frame index.
   */
  step(): ParsedFrame | null {
    if (!this.playing || this.modal !== null) return null;
    if (this.cursor >= this.frames.length) {
      this.playing = false;
      this.ended = true;
      return null;
    }
    return this.present(this.cursor);
  }

  /**
   * Jump to the first stored frame at or after frameIndex and display it.
   * Seeking starts a new playback run (the forward-only display invariant
   * holds within a run) and re-arms every marker prompt.
   */
  seek(frameIndex: number): ParsedFrame | null {
    let target = this.frames.findIndex((f) => f.frameIndex >= frameIndex);
    if (target < 0) target = this.frames.length - 1;
    if (target < 0) return null;
    this.viewer.startRun("REWATCH", this.viewer.state.sessionId);
    this.dismissed.clear();
    this.modal = null;
    this.pausedByModal = false;
    this.ended = false;
    return this.present(target);
  }

  /** Dismiss the marker prompt, recording the participant's answer. */
  dismissModal(answer = ""): void {
    const modal = this.modal;
    if (modal === null) return;
    this.answers.push({
      cueIndex: modal.cue.index,
      frameIndex: modal.frameIndex,
      text: modal.text,
      answer,
    });
    this.dismissed.add(modal.cue.index);
    this.modal = null;
    if (this.pausedByModal) {
      this.pausedByModal = false;
      this.playing = this.cursor < this.frames.length;
      this.ended = !this.playing && this.cursor >= this.frames.length;
    }
  }

  private present(position: number): ParsedFrame {
    const frame = this.frames[position];
    this.cursor = position + 1;
    this.viewer.offer(frame);
    const painted = this.viewer.takeForRender() ?? frame;
    this.viewer.setOverlayCues(activeCues(this.cues, frame.frameIndex, this.fps));
    this.checkMarkers(frame.frameIndex);
    if (this.cursor >= this.frames.length && this.modal === null && !this.playing) {
      this.ended = true;
    }
    return painted;
  }

  private checkMarkers(frameIndex: number): void {
    for (const cue of activeCues(this.markerCues, frameIndex, this.fps)) {
      if (this.dismissed.has(cue.index)) continue;
      this.pausedByModal = this.playing;
      this.playing = false;
      this.modal = { cue, text: markerText(cue), frameIndex };
      return;
    }
  }
}
