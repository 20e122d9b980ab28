// Shared loader for the recorded gateway streams in fixtures/.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { parseServerMessage } from "../src/protocol.js";
import type { SessionStore } from "../src/store.js";

export interface RecordedMessage {
  kind: "json" | "binary";
  data?: unknown;
  b64?: string;
}

export interface GoldenPlacement {
  viewId: number;
  points: [number, number, number][];
  placed: [number, number, number][];
}

export interface FixtureStreams {
  clientA: RecordedMessage[];
  clientB: RecordedMessage[];
  reconnect: RecordedMessage[];
  placements: GoldenPlacement[];
}

const here = dirname(fileURLToPath(import.meta.url));

export function loadStreams(): FixtureStreams {
  const path = join(here, "fixtures", "session_streams.json");
  return JSON.parse(readFileSync(path, "utf8"));
}

export function toArrayBuffer(b64: string): ArrayBuffer {
  const buf = Buffer.from(b64, "base64");
  return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
}

/** Replay one recorded stream into a store, exactly as the socket would. */
export function feed(store: SessionStore, stream: RecordedMessage[]): void {
  for (const msg of stream) {
    if (msg.kind === "json") {
      const parsed = parseServerMessage(JSON.stringify(msg.data));
      if (parsed === null) throw new Error("fixture held an unparseable message");
      store.apply(parsed);
    } else {
      store.applyBinary(toArrayBuffer(msg.b64!));
    }
  }
}
