/**
 * Binary frame records as they cross the gateway's WebSocket and replay feed.
 *
 * Every record is a little-endian 48-byte header followed by the pixel
 * payload: magic "EXFR", version, a 16-byte session id, device id (u16),
 * frame index (u64), capture timestamp in microseconds (u64), width and
 * height (u16 each), encoding (u8), and payload length (u32).
 */

export const FRAME_MAGIC = "EXFR";
export const FRAME_VERSION = 1;
export const FRAME_HEADER_SIZE = 48;

export enum FrameEncoding {
  RawRgb24 = 0,
  RleRgb24 = 1,
}

export interface ParsedFrame {
  sessionId: string;
  deviceId: number;
  frameIndex: number;
  captureTsMicros: number;
  width: number;
  height: number;
  encoding: FrameEncoding;
  payload: Uint8Array;
}

export class FrameParseError extends Error {}

function asBytes(data: ArrayBuffer | Uint8Array): Uint8Array {
  return data instanceof Uint8Array ? data : new Uint8Array(data);
}

function safeNumber(value: bigint, field: string): number {
  if (value > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new FrameParseError(`${field} ${value} exceeds the safe integer range`);
  }
  return Number(value);
}

function uuidString(bytes: Uint8Array): string {
  const hex = Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
  return (
    `${hex.slice(0, 8)}-${hex.slice(8, 12)}-${hex.slice(12, 16)}-` +
    `${hex.slice(16, 20)}-${hex.slice(20)}`
  );
}

/** Parse one complete frame record; the input must be exactly one record. */
export function parseFrameRecord(data: ArrayBuffer | Uint8Array): ParsedFrame {
  const bytes = asBytes(data);
  if (bytes.length < FRAME_HEADER_SIZE) {
    throw new FrameParseError(`header needs ${FRAME_HEADER_SIZE} bytes, got ${bytes.length}`);
  }
  const magic = String.fromCharCode(bytes[0], bytes[1], bytes[2], bytes[3]);
  if (magic !== FRAME_MAGIC) {
    throw new FrameParseError(`bad magic ${JSON.stringify(magic)}`);
  }
  if (bytes[4] !== FRAME_VERSION) {
    throw new FrameParseError(`unsupported version ${bytes[4]}`);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const encodingRaw = view.getUint8(43);
  if (encodingRaw !== FrameEncoding.RawRgb24 && encodingRaw !== FrameEncoding.RleRgb24) {
    throw new FrameParseError(`unsupported encoding ${encodingRaw}`);
  }
  const payloadLen = view.getUint32(44, true);
  if (bytes.length !== FRAME_HEADER_SIZE + payloadLen) {
    throw new FrameParseError(
      `payload_len ${payloadLen} but ${bytes.length - FRAME_HEADER_SIZE} payload bytes present`,
    );
  }
  const frame: ParsedFrame = {
    sessionId: uuidString(bytes.subarray(5, 21)),
    deviceId: view.getUint16(21, true),
    frameIndex: safeNumber(view.getBigUint64(23, true), "frame_index"),
    captureTsMicros: safeNumber(view.getBigUint64(31, true), "capture_ts_micros"),
    width: view.getUint16(39, true),
    height: view.getUint16(41, true),
    encoding: encodingRaw,
    payload: bytes.slice(FRAME_HEADER_SIZE),
  };
  rgbPixels(frame); // validate payload length/expansion eagerly
  return frame;
}

/** Expand run-length (count, value) byte pairs to exactly expectedLen bytes. */
export function rleDecode(data: Uint8Array, expectedLen: number): Uint8Array {
  if (data.length % 2 !== 0) {
    throw new FrameParseError(`RLE payload has odd length ${data.length}`);
  }
  const out = new Uint8Array(expectedLen);
  let at = 0;
  for (let i = 0; i < data.length; i += 2) {
    const count = data[i];
    if (count === 0) throw new FrameParseError("RLE run with count 0");
    if (at + count > expectedLen) {
      throw new FrameParseError(`RLE expands past ${expectedLen} bytes`);
    }
    out.fill(data[i + 1], at, at + count);
    at += count;
  }
  if (at !== expectedLen) {
    throw new FrameParseError(`RLE expands to ${at} bytes, expected ${expectedLen}`);
  }
  return out;
}

/** Raw RGB24 bytes of a frame, expanding RLE; validates sizes. */
export function rgbPixels(frame: ParsedFrame): Uint8Array {
  const expected = frame.width * frame.height * 3;
  if (frame.encoding === FrameEncoding.RawRgb24) {
    if (frame.payload.length !== expected) {
      throw new FrameParseError(
        `payload_len ${frame.payload.length} != width*height*3 = ${expected}`,
      );
    }
    return frame.payload;
  }
  return rleDecode(frame.payload, expected);
}

/** RGBA bytes ready for ImageData / putImageData (alpha forced opaque). */
export function rgbaBytes(frame: ParsedFrame): Uint8ClampedArray<ArrayBuffer> {
  const rgb = rgbPixels(frame);
  const out = new Uint8ClampedArray((rgb.length / 3) * 4);
  for (let src = 0, dst = 0; src < rgb.length; src += 3, dst += 4) {
    out[dst] = rgb[src];
    out[dst + 1] = rgb[src + 1];
    out[dst + 2] = rgb[src + 2];
    out[dst + 3] = 255;
  }
  return out;
}

// Row 0 of every rendered frame carries the frame index as 64 bits, one
// pixel per bit, LSB first: a set bit has a bright red channel (>= 128).
export const STRIP_BITS = 64;
export const STRIP_THRESHOLD = 128;

/** Decode the frame index embedded in row 0 of the pixels. */
export function extractFrameIndex(frame: ParsedFrame): number {
  const rgb = rgbPixels(frame);
  const bits = Math.min(STRIP_BITS, frame.width);
  let value = 0n;
  for (let i = 0; i < bits; i++) {
    if (rgb[i * 3] >= STRIP_THRESHOLD) value |= 1n << BigInt(i);
  }
  return safeNumber(value, "strip index");
}

/**
 * Whether the in-band index strip agrees with the header. The console keeps
 * this check on every painted frame so a displayed counter can never drift
 * from the pixels on screen. Frames narrower than the strip are unverifiable.
 */
export function stripMatchesHeader(frame: ParsedFrame): boolean {
  if (frame.width < STRIP_BITS) return true;
  return extractFrameIndex(frame) === frame.frameIndex;
}
