/**
 * Parsing the session's SRT sidecar into overlay cues.
 *
 * Each cue body is one line: the event kind followed by its JSON payload.
 * Cue timing is in frame-derived milliseconds, so mapping a frame index back
 * onto cues is exact integer arithmetic, not float comparison.
 */

export interface Cue {
  index: number;
  startMillis: number;
  endMillis: number;
  kind: string;
  /** The raw JSON text after the kind, exactly as stored. */
  payloadText: string;
  /** Parsed payload, or null when the text is not valid JSON. */
  payload: unknown;
}

export class SrtParseError extends Error {}

const TIMING_RE = /^(\d{2,}):(\d{2}):(\d{2}),(\d{3}) --> (\d{2,}):(\d{2}):(\d{2}),(\d{3})$/;

function timestampMillis(h: string, m: string, s: string, ms: string): number {
  return ((Number(h) * 60 + Number(m)) * 60 + Number(s)) * 1000 + Number(ms);
}

/** Millisecond timestamp of a frame boundary (floor, never rounded up). */
export function frameMillis(frameIndex: number, fps: number): number {
  return Math.floor((frameIndex * 1000) / fps);
}

export function parseSrt(text: string): Cue[] {
  if (text === "") return [];
  const cues: Cue[] = [];
  for (const block of text.split("\n\n")) {
    if (block.trim() === "") continue;
    const lines = block.split("\n");
    while (lines.length > 0 && lines[lines.length - 1] === "") lines.pop();
    if (lines.length < 3) {
      throw new SrtParseError(`cue block with ${lines.length} lines: ${JSON.stringify(block)}`);
    }
    const index = Number(lines[0]);
    if (!Number.isInteger(index)) {
      throw new SrtParseError(`bad cue number ${JSON.stringify(lines[0])}`);
    }
    const timing = TIMING_RE.exec(lines[1]);
    if (!timing) {
      throw new SrtParseError(`bad timing line ${JSON.stringify(lines[1])}`);
    }
    const body = lines.slice(2).join("\n");
    const space = body.indexOf(" ");
    const kind = space < 0 ? body : body.slice(0, space);
    const payloadText = space < 0 ? "" : body.slice(space + 1);
    let payload: unknown = null;
    try {
      payload = JSON.parse(payloadText);
    } catch {
      payload = null;
    }
    cues.push({
      index,
      startMillis: timestampMillis(timing[1], timing[2], timing[3], timing[4]),
      endMillis: timestampMillis(timing[5], timing[6], timing[7], timing[8]),
      kind,
      payloadText,
      payload,
    });
  }
  return cues;
}

export function cueCoversMillis(cue: Cue, tsMillis: number): boolean {
  return cue.startMillis <= tsMillis && tsMillis < cue.endMillis;
}

/** Cues whose [start, end) interval covers the frame's timestamp. */
export function activeCues(cues: readonly Cue[], frameIndex: number, fps: number): Cue[] {
  const ts = frameMillis(frameIndex, fps);
  return cues.filter((c) => cueCoversMillis(c, ts));
}

/** Human-readable marker text from a MARKER cue payload. */
export function markerText(cue: Cue): string {
  const payload = cue.payload as { text?: unknown } | null;
  return payload && typeof payload.text === "string" ? payload.text : cue.payloadText;
}
