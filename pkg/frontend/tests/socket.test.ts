import { describe, expect, it } from "vitest";

import { ConsoleSocket, SocketLike } from "../src/socket.js";

type Listener = (event: any) => void;

class FakeSocket implements SocketLike {
  binaryType = "";
  sent: string[] = [];
  closed = false;
  private listeners = new Map<string, Listener[]>();

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
  }

  addEventListener(type: string, listener: Listener): void {
    const list = this.listeners.get(type) ?? [];
    list.push(listener);
    this.listeners.set(type, list);
  }

  fire(type: string, event: unknown = {}): void {
    for (const listener of this.listeners.get(type) ?? []) listener(event);
  }
}

function fakeFactory() {
  const sockets: FakeSocket[] = [];
  const factory = (_url: string): SocketLike => {
    const socket = new FakeSocket();
    sockets.push(socket);
    return socket;
  };
  return { sockets, factory };
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

describe("ConsoleSocket", () => {
  it("tracks status through connect and user close", () => {
    const { sockets, factory } = fakeFactory();
    const socket = new ConsoleSocket("ws://x/ws", factory);
    const statuses: string[] = [];
    socket.onStatus((s) => statuses.push(s));

    socket.open();
    expect(sockets.length).toBe(1);
    expect(sockets[0].binaryType).toBe("arraybuffer");
    expect(socket.status).toBe("connecting");
    sockets[0].fire("open");
    expect(socket.status).toBe("connected");
    socket.close();
    expect(socket.status).toBe("disconnected");
    expect(sockets[0].closed).toBe(true);
    expect(statuses).toEqual(["connecting", "connected", "disconnected"]);
  });

  it("routes text envelopes and binary payloads separately", () => {
    const { sockets, factory } = fakeFactory();
    const socket = new ConsoleSocket("ws://x/ws", factory);
    const envelopes: unknown[] = [];
    const binaries: Uint8Array[] = [];
    socket.onMessage((e) => envelopes.push(e));
    socket.onBinary((b) => binaries.push(b));
    socket.open();
    sockets[0].fire("open");

    sockets[0].fire("message", { data: '{"type":"pong","payload":{"ts_micros":7}}' });
    expect(envelopes).toEqual([{ type: "pong", payload: { ts_micros: 7 } }]);

    sockets[0].fire("message", { data: new Uint8Array([1, 2, 3]).buffer });
    expect(binaries.length).toBe(1);
    expect([...binaries[0]]).toEqual([1, 2, 3]);

    sockets[0].fire("message", { data: "not json" }); // ignored, no throw
    expect(envelopes.length).toBe(1);
  });

  it("sends typed envelopes and refuses to send while disconnected", () => {
    const { sockets, factory } = fakeFactory();
    const socket = new ConsoleSocket("ws://x/ws", factory);
    expect(() => socket.send("ping")).toThrow(/disconnected/);
    socket.open();
    expect(() => socket.send("ping")).toThrow(/connecting/);
    sockets[0].fire("open");
    socket.send("watch", { session_id: "s" });
    expect(JSON.parse(sockets[0].sent[0])).toEqual({
      type: "watch",
      payload: { session_id: "s" },
    });
  });

  it("redials automatically after an unexpected close", async () => {
    const { sockets, factory } = fakeFactory();
    const socket = new ConsoleSocket("ws://x/ws", factory, { reconnectDelayMs: 5 });
    socket.open();
    sockets[0].fire("open");
    sockets[0].fire("close");
    expect(socket.status).toBe("disconnected");
    await sleep(25);
    expect(sockets.length).toBe(2); // a fresh dial
    sockets[1].fire("open");
    expect(socket.status).toBe("connected");
    socket.close();
  });

  it("stays closed after close() and when auto-reconnect is off", async () => {
    const { sockets, factory } = fakeFactory();
    const socket = new ConsoleSocket("ws://x/ws", factory, { reconnectDelayMs: 5 });
    socket.open();
    sockets[0].fire("open");
    socket.close();
    await sleep(25);
    expect(sockets.length).toBe(1);

    const oneShot = fakeFactory();
    const single = new ConsoleSocket("ws://x/ws", oneShot.factory, {
      reconnectDelayMs: 5,
      autoReconnect: false,
    });
    single.open();
    oneShot.sockets[0].fire("open");
    oneShot.sockets[0].fire("close");
    await sleep(25);
    expect(oneShot.sockets.length).toBe(1);
  });

  it("hands out unique correlation tags", () => {
    const socket = new ConsoleSocket("ws://x/ws", fakeFactory().factory);
    expect(socket.nextTag()).toBe("t1");
    expect(socket.nextTag()).toBe("t2");
    expect(socket.nextTag()).toBe("t3");
  });

  it("waitForMessage resolves on a match and times out otherwise", async () => {
    const { sockets, factory } = fakeFactory();
    const socket = new ConsoleSocket("ws://x/ws", factory);
    socket.open();
    sockets[0].fire("open");

    const waiting = socket.waitForMessage((e) => e.type === "ack");
    sockets[0].fire("message", { data: '{"type":"pong","payload":{}}' });
    sockets[0].fire("message", { data: '{"type":"ack","payload":{"tag":"t1"}}' });
    const envelope = await waiting;
    expect(envelope.payload).toEqual({ tag: "t1" });

    await expect(socket.waitForMessage((e) => e.type === "never", 10)).rejects.toThrow(
      /timed out/,
    );
  });
});
