/**
 * Browser entry point: wires the gateway client, the live viewer, the
 * control panel, and the rewatch player to the page.
 *
 * All behavior lives in the imported modules; this file is DOM glue and is
 * not imported by tests.
 */

import { GatewayClient, GatewayHttpError, SceneInfo, SessionState } from "./api.js";
import { persistBaseUrl, resolveBaseUrl, wsUrl } from "./config.js";
import { ControlPanel } from "./control.js";
import { FrameParseError, ParsedFrame, parseFrameRecord, rgbaBytes } from "./frames.js";
import { RewatchPlayer } from "./rewatch.js";
import { ConsoleSocket } from "./socket.js";
import { parseSrt } from "./srt.js";
import { Viewer } from "./viewer.js";

const RESEARCHER_KEY = "caplab.researcher";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function shortId(sessionId: string): string {
  return sessionId.length > 13 ? `${sessionId.slice(0, 13)}…` : sessionId;
}

function describeError(err: unknown): string {
  if (err instanceof GatewayHttpError) {
    return err.detail ? `${err.error}: ${err.detail}` : err.error;
  }
  return err instanceof Error ? err.message : String(err);
}

/** Paint one frame 1:1 into a canvas (scaling is left to CSS). */
function paintFrame(canvas: HTMLCanvasElement, frame: ParsedFrame): void {
  if (canvas.width !== frame.width) canvas.width = frame.width;
  if (canvas.height !== frame.height) canvas.height = frame.height;
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  ctx.putImageData(new ImageData(rgbaBytes(frame), frame.width, frame.height), 0, 0);
}

class ConsoleApp {
  readonly baseUrl = resolveBaseUrl();
  readonly client = new GatewayClient(this.baseUrl);
  readonly socket = new ConsoleSocket(wsUrl(this.baseUrl));
  readonly viewer = new Viewer();
  readonly panel: ControlPanel;

  watchedSessionId: string | null = null;
  player: RewatchPlayer | null = null;
  rewatchSessionId: string | null = null;
  private rewatchTimer: ReturnType<typeof setInterval> | null = null;
  private noteTimer: ReturnType<typeof setTimeout> | null = null;

  constructor() {
    this.panel = new ControlPanel({
      emit: (kind, value, tag) => this.emitCommand(kind, value, tag),
      nextTag: () => this.socket.nextTag(),
    });
  }

  researcher(): string {
    return el<HTMLInputElement>("researcher").value.trim() || "console";
  }

  note(text: string): void {
    el("status-note").textContent = text;
    if (this.noteTimer !== null) clearTimeout(this.noteTimer);
    this.noteTimer = setTimeout(() => {
      el("status-note").textContent = "";
    }, 6000);
  }

  // ---------------------------------------------------------------- config

  initConfig(): void {
    const baseInput = el<HTMLInputElement>("base-url");
    baseInput.value = this.baseUrl;
    el<HTMLButtonElement>("apply-base").addEventListener("click", () => {
      persistBaseUrl(baseInput.value, localStorage);
      location.reload();
    });

    const researcher = el<HTMLInputElement>("researcher");
    researcher.value = localStorage.getItem(RESEARCHER_KEY) ?? "console";
    researcher.addEventListener("change", () => {
      localStorage.setItem(RESEARCHER_KEY, this.researcher());
    });

    this.client
      .ping()
      .then(() => this.note(`gateway at ${this.baseUrl} is up`))
      .catch((err) => this.note(`gateway unreachable: ${describeError(err)}`));
  }

  // ---------------------------------------------------------------- socket

  initSocket(): void {
    this.socket.onStatus((status) => {
      this.viewer.setConnection(status);
      el("conn-status").textContent = status;
      el("conn-status").dataset.state = status;
      // After an automatic reconnect, resume watching the same session;
      // the server starts the feed at the current frame.
      if (status === "connected" && this.watchedSessionId !== null) {
        this.socket.send("watch", { session_id: this.watchedSessionId });
      }
    });
    this.socket.onBinary((data) => {
      try {
        const frame = parseFrameRecord(data);
        if (frame.sessionId === this.watchedSessionId) this.viewer.offer(frame);
      } catch (err) {
        if (!(err instanceof FrameParseError)) throw err;
        this.note(`dropped undecodable frame: ${err.message}`);
      }
    });
    this.socket.onMessage((envelope) => {
      const payload = envelope.payload as Record<string, unknown>;
      switch (envelope.type) {
        case "ack":
          this.panel.onAck(payload as Parameters<ControlPanel["onAck"]>[0]);
          break;
        case "error":
          this.panel.onError(payload as Parameters<ControlPanel["onError"]>[0]);
          break;
        case "stream_end":
          this.note("live stream ended");
          this.watchedSessionId = null;
          void this.refreshSessions();
          break;
        case "stopping":
          this.note(`session ${shortId(String(payload.session_id ?? ""))} is stopping`);
          void this.refreshSessions();
          break;
        default:
          break;
      }
    });
    this.socket.open();
  }

  private emitCommand(kind: string, value: number | null, tag: string): void {
    if (this.watchedSessionId === null) return;
    const payload: Record<string, unknown> = {
      session_id: this.watchedSessionId,
      researcher: this.researcher(),
      kind,
      tag,
    };
    if (value !== null) payload.value = value;
    try {
      this.socket.send("command", payload);
    } catch (err) {
      this.panel.onError({ tag, error: "NotConnected", detail: describeError(err) });
    }
  }

  // ---------------------------------------------------------------- scenes

  async refreshScenes(): Promise<void> {
    let scenes: SceneInfo[];
    try {
      scenes = await this.client.scenes();
    } catch (err) {
      this.note(`scenes: ${describeError(err)}`);
      return;
    }
    const list = el("scenes-list");
    list.textContent = "";
    for (const scene of scenes) {
      list.appendChild(this.sceneCard(scene));
    }
  }

  private sceneCard(scene: SceneInfo): HTMLElement {
    const card = document.createElement("div");
    card.className = "card";

    const title = document.createElement("h3");
    title.textContent = scene.scene_id;
    card.appendChild(title);

    const desc = document.createElement("p");
    desc.textContent = scene.description;
    card.appendChild(desc);

    const devices = document.createElement("p");
    devices.textContent =
      "devices: " +
      scene.devices
        .map((d) => `#${d.device_id} ${d.online ? (d.busy ? "busy" : "online") : "offline"}`)
        .join(", ");
    card.appendChild(devices);

    const lease = document.createElement("p");
    lease.textContent = scene.lease
      ? `leased by ${scene.lease.holder}`
      : "not leased";
    card.appendChild(lease);

    const actions = document.createElement("div");
    actions.className = "actions";
    card.appendChild(actions);

    const addButton = (label: string, onClick: () => Promise<void>): void => {
      const button = document.createElement("button");
      button.textContent = label;
      button.addEventListener("click", () => {
        onClick().catch((err) => this.note(`${label}: ${describeError(err)}`));
      });
      actions.appendChild(button);
    };

    addButton("Lease", async () => {
      await this.client.acquireLease(this.researcher(), scene.scene_id);
      await this.refreshScenes();
    });
    addButton("Release", async () => {
      await this.client.releaseLease(this.researcher(), scene.scene_id);
      await this.refreshScenes();
    });
    addButton("Start sessions", async () => {
      const ids = scene.devices.filter((d) => d.online && !d.busy).map((d) => d.device_id);
      if (ids.length === 0) throw new Error("no idle online devices");
      const sessions = await this.client.startSessions(this.researcher(), scene.scene_id, ids);
      this.note(`started ${sessions.length} session(s)`);
      await Promise.all([this.refreshScenes(), this.refreshSessions()]);
    });

    return card;
  }

  // -------------------------------------------------------------- sessions

  async refreshSessions(): Promise<void> {
    let sessions: SessionState[];
    try {
      sessions = await this.client.listSessions();
    } catch (err) {
      this.note(`sessions: ${describeError(err)}`);
      return;
    }
    const list = el("sessions-list");
    list.textContent = "";
    if (sessions.length === 0) {
      list.textContent = "no sessions yet";
      return;
    }
    for (const session of sessions) {
      list.appendChild(this.sessionRow(session));
    }
  }

  private sessionRow(session: SessionState): HTMLElement {
    const row = document.createElement("div");
    row.className = "session-row";

    const label = document.createElement("span");
    label.textContent =
      `${shortId(session.session_id)} · ${session.scene_id} · device ${session.device_id}` +
      ` · ${session.fps} fps · ${session.resolution} · ${session.status}`;
    row.appendChild(label);

    const addButton = (text: string, onClick: () => void): void => {
      const button = document.createElement("button");
      button.textContent = text;
      button.addEventListener("click", onClick);
      row.appendChild(button);
    };

    if (session.status === "LIVE") {
      addButton("Watch", () => this.watch(session.session_id));
      addButton("Stop", () => {
        this.client
          .stopSession(session.session_id, this.researcher())
          .then(() => this.pollUntilPacked(session.session_id))
          .catch((err) => this.note(`stop: ${describeError(err)}`));
      });
    }
    if (session.status === "PACKED") {
      addButton("Rewatch", () => {
        this.loadRewatch(session.session_id).catch((err) =>
          this.note(`rewatch: ${describeError(err)}`),
        );
      });
    }
    return row;
  }

  private pollUntilPacked(sessionId: string): void {
    const poll = async (): Promise<void> => {
      const state = await this.client.session(sessionId);
      await this.refreshSessions();
      if (state.status !== "PACKED") setTimeout(() => void poll(), 500);
      else this.note(`session ${shortId(sessionId)} packed`);
    };
    void poll().catch((err) => this.note(`poll: ${describeError(err)}`));
  }

  // ------------------------------------------------------------------ live

  watch(sessionId: string): void {
    this.watchedSessionId = sessionId;
    this.viewer.startRun("LIVE", sessionId);
    this.viewer.setConnection(this.socket.status);
    el("live-session").textContent = shortId(sessionId);
    if (this.socket.status === "connected") {
      this.socket.send("watch", { session_id: sessionId });
    }
    el("control-pad").focus();
  }

  initControls(): void {
    const pad = el("control-pad");
    pad.addEventListener("keydown", (event: KeyboardEvent) => {
      if (this.panel.keydown(event.key)) event.preventDefault();
    });

    el<HTMLButtonElement>("drop-marker").addEventListener("click", () => {
      const sessionId = this.watchedSessionId;
      if (sessionId === null) {
        this.note("marker: not watching a session");
        return;
      }
      const input = el<HTMLInputElement>("marker-input");
      const frameIndex = Math.max(0, this.viewer.state.lastRenderedFrameIndex);
      this.client
        .addMarker(sessionId, frameIndex, input.value || "marker")
        .then((doc) => this.note(`marker #${doc.seq} at frame ${doc.frame_index}`))
        .catch((err) => this.note(`marker: ${describeError(err)}`));
    });
  }

  /** One animation-frame tick: paint the freshest live frame, sync readouts. */
  liveTick(): void {
    const frame = this.viewer.takeForRender();
    if (frame !== null) {
      paintFrame(el<HTMLCanvasElement>("live-canvas"), frame);
    }
    const state = this.viewer.state;
    el("live-frame-index").textContent =
      state.lastRenderedFrameIndex < 0 ? "—" : String(state.lastRenderedFrameIndex);
    el("live-fps").textContent = state.displayFps.toFixed(1);
    el("live-strip").textContent = state.stripMismatch ? "MISMATCH" : "ok";
    el("live-strip").dataset.state = state.stripMismatch ? "bad" : "good";
    el("live-connection").textContent = state.connection;

    this.panel.sweepTimeouts();
    this.renderAxes();
    this.renderCommandRows();
    requestAnimationFrame(() => this.liveTick());
  }

  private renderAxes(): void {
    el("axis-speed").textContent = String(this.panel.axes.speed);
    el("axis-steering").textContent = String(this.panel.axes.steering);
    el("axis-pan").textContent = String(this.panel.axes.pan);
    el("axis-tilt").textContent = String(this.panel.axes.tilt);
  }

  private renderCommandRows(): void {
    const container = el("command-rows");
    const rows = this.panel.rows.slice(-8).reverse();
    container.textContent = "";
    for (const row of rows) {
      const div = document.createElement("div");
      div.className = `cmd-row cmd-${row.state}`;
      let text = `${row.kind}`;
      if (row.requestedValue !== null) text += ` ${row.requestedValue}`;
      if (row.state === "pending") text += " · pending";
      else if (row.state === "acked") {
        text += ` · applied ${row.ackValue ?? ""} @ frame ${row.appliedFrameIndex}`;
      } else text += ` · ${row.error ?? "error"}`;
      div.textContent = text;
      container.appendChild(div);
    }
  }

  // --------------------------------------------------------------- rewatch

  /** Fetch a packed session's frames over a one-shot replay socket. */
  private collectReplay(sessionId: string): Promise<ParsedFrame[]> {
    return new Promise((resolve, reject) => {
      const socket = new ConsoleSocket(wsUrl(this.baseUrl), undefined, {
        autoReconnect: false,
      });
      const frames: ParsedFrame[] = [];
      // Settle the promise before close(): close() flips the status to
      // "disconnected" synchronously, and the loss handler below must not
      // win the race against a finished replay.
      socket.onBinary((data) => {
        try {
          frames.push(parseFrameRecord(data));
        } catch (err) {
          reject(err);
          socket.close();
        }
      });
      socket.onMessage((envelope) => {
        if (envelope.type === "replay_end") {
          resolve(frames);
          socket.close();
        } else if (envelope.type === "error") {
          const payload = envelope.payload as { error?: string; detail?: string };
          reject(new Error(`${payload.error ?? "error"}: ${payload.detail ?? ""}`));
          socket.close();
        }
      });
      socket.onStatus((status) => {
        if (status === "connected") socket.send("replay", { session_id: sessionId });
        else if (status === "disconnected" && frames.length > 0) {
          reject(new Error("replay connection lost"));
        }
      });
      socket.open();
    });
  }

  async loadRewatch(sessionId: string): Promise<void> {
    this.note(`loading ${shortId(sessionId)} for rewatch…`);
    const [manifest, srtText, state] = await Promise.all([
      this.client.container(sessionId),
      this.client.srt(sessionId),
      this.client.session(sessionId),
    ]);
    const frames = await this.collectReplay(sessionId);
    const cues = parseSrt(srtText);

    if (this.rewatchTimer !== null) clearInterval(this.rewatchTimer);
    this.player = new RewatchPlayer(frames, cues, state.fps, new Viewer(), manifest);
    this.rewatchSessionId = sessionId;

    const slider = el<HTMLInputElement>("seek-slider");
    slider.min = "0";
    slider.max = String(this.player.lastFrameIndex);
    slider.value = "0";
    el("rewatch-session").textContent = shortId(sessionId);
    el("rewatch-last").textContent = String(this.player.lastFrameIndex);

    const first = this.player.seek(0);
    if (first !== null) paintFrame(el<HTMLCanvasElement>("rewatch-canvas"), first);
    this.player.play();
    const periodMs = Math.max(10, Math.round(1000 / state.fps));
    this.rewatchTimer = setInterval(() => this.rewatchTick(), periodMs);
    this.note(`rewatching ${shortId(sessionId)} (${frames.length} frames)`);
  }

  initRewatchControls(): void {
    el<HTMLButtonElement>("play-pause").addEventListener("click", () => {
      const player = this.player;
      if (player === null) return;
      if (player.playing) player.pause();
      else player.play();
    });

    const slider = el<HTMLInputElement>("seek-slider");
    slider.addEventListener("change", () => {
      const player = this.player;
      if (player === null) return;
      const frame = player.seek(Number(slider.value));
      if (frame !== null) paintFrame(el<HTMLCanvasElement>("rewatch-canvas"), frame);
    });

    const dialog = el<HTMLDialogElement>("marker-dialog");
    // The prompt requires an explicit dismissal; swallow Esc.
    dialog.addEventListener("cancel", (event) => event.preventDefault());
    el<HTMLButtonElement>("marker-dismiss").addEventListener("click", () => {
      const player = this.player;
      if (player === null) return;
      const answer = el<HTMLInputElement>("marker-answer");
      player.dismissModal(answer.value);
      answer.value = "";
      dialog.close();
      this.renderAnswers();
    });
  }

  private rewatchTick(): void {
    const player = this.player;
    if (player === null) return;
    const frame = player.step();
    if (frame !== null) paintFrame(el<HTMLCanvasElement>("rewatch-canvas"), frame);

    const index = player.currentFrameIndex;
    el("rewatch-frame-index").textContent = index < 0 ? "—" : String(index);
    el<HTMLButtonElement>("play-pause").textContent = player.playing ? "Pause" : "Play";
    const slider = el<HTMLInputElement>("seek-slider");
    if (document.activeElement !== slider && index >= 0) slider.value = String(index);

    const chips = el("cue-overlay");
    chips.textContent = "";
    for (const cue of player.activeCues()) {
      const chip = document.createElement("span");
      chip.className = `cue-chip cue-${cue.kind.toLowerCase()}`;
      chip.textContent = `${cue.kind} ${cue.payloadText}`;
      chips.appendChild(chip);
    }

    const banner = el("verify-banner");
    if (player.showWarningBanner) {
      banner.hidden = false;
      banner.textContent = `container failed verification: ${player.verification.problems.join("; ")} — playback may not be faithful`;
    } else {
      banner.hidden = true;
    }

    const dialog = el<HTMLDialogElement>("marker-dialog");
    if (player.modal !== null && !dialog.open) {
      el("marker-text").textContent = player.modal.text;
      el("marker-frame").textContent = String(player.modal.frameIndex);
      dialog.showModal();
    } else if (player.modal === null && dialog.open) {
      dialog.close();
    }
  }

  private renderAnswers(): void {
    const player = this.player;
    if (player === null) return;
    const log = el("answers-log");
    log.textContent = "";
    for (const answer of player.answers) {
      const div = document.createElement("div");
      div.textContent = `frame ${answer.frameIndex} · “${answer.text}” → ${answer.answer || "(dismissed)"}`;
      log.appendChild(div);
    }
  }

  // ------------------------------------------------------------------ init

  start(): void {
    this.initConfig();
    this.initSocket();
    this.initControls();
    this.initRewatchControls();
    el<HTMLButtonElement>("refresh-scenes").addEventListener("click", () => {
      void this.refreshScenes();
      void this.refreshSessions();
    });
    void this.refreshScenes();
    void this.refreshSessions();
    requestAnimationFrame(() => this.liveTick());
  }
}

new ConsoleApp().start();
