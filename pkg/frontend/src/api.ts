/**
 * Typed fetch wrappers over the gateway's HTTP endpoints.
 *
 * Errors keep the server's own error name and detail verbatim — the console
 * never rewrites what the gateway said.
 */

export interface DeviceInfo {
  device_id: number;
  capabilities: string;
  online: boolean;
  busy: boolean;
}

export interface LeaseInfo {
  scene_id: string;
  holder: string;
  acquired_ts_micros: number;
  ttl_seconds: number;
  expires_at_micros: number;
}

export interface SceneInfo {
  scene_id: string;
  description: string;
  devices: DeviceInfo[];
  lease: LeaseInfo | null;
}

export interface SessionState {
  session_id: string;
  scene_id: string;
  device_id: number;
  status: string;
  fps: number;
  resolution: string;
  deterministic_clock: boolean;
  start_ts_micros: number;
  event_count: number;
  segment_count: number;
  stats?: Record<string, unknown>;
  summary?: Record<string, unknown>;
}

export interface AppliedCommand {
  session_id: string;
  client_seq: number;
  kind: string;
  value: number | null;
  applied_frame_index: number;
  applied_ts_micros: number;
}

export interface EventEnvelope {
  seq: number;
  kind: string;
  frame_index: number;
  ts_micros: number;
  payload: Record<string, unknown>;
}

export interface SegmentEntry {
  file: string;
  first_frame_index: number;
  frame_count: number;
  crc32: number;
}

export interface Manifest {
  session_id: string;
  scene_id: string;
  device_id: number;
  fps: number;
  resolution: string;
  start_ts_micros: number;
  frame_count: number;
  segments: SegmentEntry[];
  deterministic_clock: boolean;
}

/** A non-2xx gateway response, carrying the server's error fields verbatim. */
export class GatewayHttpError extends Error {
  constructor(
    readonly status: number,
    readonly error: string,
    readonly detail: string,
  ) {
    super(detail ? `${error}: ${detail}` : error);
  }
}

export class GatewayClient {
  constructor(
    readonly baseUrl: string,
    private readonly doFetch: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.doFetch(this.baseUrl + path, {
      method,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let error = `HTTP ${response.status}`;
      let detail = "";
      try {
        const doc = (await response.json()) as { error?: string; detail?: string };
        if (doc.error) error = doc.error;
        if (doc.detail) detail = doc.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new GatewayHttpError(response.status, error, detail);
    }
    return (await response.json()) as T;
  }

  ping(): Promise<{ ok: boolean; ts_micros: number }> {
    return this.request("GET", "/ping");
  }

  async scenes(): Promise<SceneInfo[]> {
    const doc = await this.request<{ scenes: SceneInfo[] }>("GET", "/scenes");
    return doc.scenes;
  }

  acquireLease(researcher: string, sceneId: string, ttlSeconds?: number): Promise<LeaseInfo> {
    return this.request("POST", "/leases", {
      researcher,
      scene_id: sceneId,
      ...(ttlSeconds === undefined ? {} : { ttl_seconds: ttlSeconds }),
    });
  }

  releaseLease(researcher: string, sceneId: string): Promise<{ released: boolean }> {
    return this.request(
      "DELETE",
      `/leases/${encodeURIComponent(sceneId)}?researcher=${encodeURIComponent(researcher)}`,
    );
  }

  async startSessions(
    researcher: string,
    sceneId: string,
    deviceIds: number[],
  ): Promise<SessionState[]> {
    const doc = await this.request<{ sessions: SessionState[] }>("POST", "/sessions", {
      researcher,
      scene_id: sceneId,
      device_ids: deviceIds,
    });
    return doc.sessions;
  }

  async listSessions(): Promise<SessionState[]> {
    const doc = await this.request<{ sessions: SessionState[] }>("GET", "/sessions");
    return doc.sessions;
  }

  session(sessionId: string): Promise<SessionState> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  stopSession(sessionId: string, researcher: string): Promise<SessionState> {
    return this.request("POST", `/sessions/${sessionId}/stop`, { researcher });
  }

  async command(
    sessionId: string,
    researcher: string,
    kind: string,
    value?: number,
  ): Promise<{ applied: AppliedCommand; round_trip_ms: number }> {
    return this.request("POST", `/sessions/${sessionId}/commands`, {
      researcher,
      kind,
      ...(value === undefined ? {} : { value }),
    });
  }

  addMarker(
    sessionId: string,
    frameIndex: number,
    text: string,
  ): Promise<{ seq: number; frame_index: number }> {
    return this.request("POST", `/sessions/${sessionId}/markers`, {
      frame_index: frameIndex,
      text,
    });
  }

  async events(sessionId: string, fromSeq = 1): Promise<EventEnvelope[]> {
    const doc = await this.request<{ events: EventEnvelope[] }>(
      "GET",
      `/sessions/${sessionId}/events?from=${fromSeq}`,
    );
    return doc.events;
  }

  attachProcessor(sessionId: string, name: string): Promise<{ attached: string }> {
    return this.request("POST", `/sessions/${sessionId}/processors`, { name });
  }

  stats(sessionId: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/sessions/${sessionId}/stats`);
  }

  container(sessionId: string): Promise<Manifest> {
    return this.request("GET", `/sessions/${sessionId}/container`);
  }

  async srt(sessionId: string): Promise<string> {
    const response = await this.doFetch(`${this.baseUrl}/sessions/${sessionId}/srt`);
    if (!response.ok) {
      let error = `HTTP ${response.status}`;
      let detail = "";
      try {
        const doc = (await response.json()) as { error?: string; detail?: string };
        if (doc.error) error = doc.error;
        if (doc.detail) detail = doc.detail;
      } catch {
        // plain-text error body
      }
      throw new GatewayHttpError(response.status, error, detail);
    }
    return response.text();
  }
}
