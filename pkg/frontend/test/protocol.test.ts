import { describe, expect, it } from "vitest";

import {
  commandMessage,
  decodeMeshFrame,
  keyMessage,
  parseServerMessage,
  pointerMessage,
  requestRenderMessage,
  requestSceneMessage,
} from "../src/protocol.js";

function meshFrame(positions: number[], indices: number[]): ArrayBuffer {
  const buffer = new ArrayBuffer(8 + positions.length * 4 + indices.length * 4);
  const dv = new DataView(buffer);
  dv.setUint32(0, positions.length / 3, true);
  dv.setUint32(4, indices.length / 3, true);
  positions.forEach((x, i) => dv.setFloat32(8 + i * 4, x, true));
  const base = 8 + positions.length * 4;
  indices.forEach((x, i) => dv.setUint32(base + i * 4, x, true));
  return buffer;
}

describe("decodeMeshFrame", () => {
  it("decodes a one-triangle frame", () => {
    const mesh = decodeMeshFrame(meshFrame([0, 0, 0, 1, 0, 0, 0, 1, 0], [0, 1, 2]));
    expect(mesh.vertexCount).toBe(3);
    expect(mesh.triangleCount).toBe(1);
    expect(Array.from(mesh.positions)).toEqual([0, 0, 0, 1, 0, 0, 0, 1, 0]);
    expect(Array.from(mesh.indices)).toEqual([0, 1, 2]);
  });

  it("keeps exactly representable coordinates exact", () => {
    const mesh = decodeMeshFrame(meshFrame([0.5, -2.25, 1024.125], []));
    expect(Array.from(mesh.positions)).toEqual([0.5, -2.25, 1024.125]);
  });

  it("rejects frames whose length disagrees with the header", () => {
    const frame = meshFrame([0, 0, 0, 1, 0, 0, 0, 1, 0], [0, 1, 2]);
    expect(() => decodeMeshFrame(frame.slice(0, frame.byteLength - 4))).toThrow(
      /expected/,
    );
    const padded = new Uint8Array(frame.byteLength + 1);
    padded.set(new Uint8Array(frame));
    expect(() => decodeMeshFrame(padded.buffer)).toThrow(/expected/);
  });

  it("rejects truncated headers", () => {
    expect(() => decodeMeshFrame(new ArrayBuffer(4))).toThrow(/short/);
  });

  it("rejects indices past the vertex table", () => {
    const frame = meshFrame([0, 0, 0, 1, 0, 0, 0, 1, 0], [0, 1, 3]);
    expect(() => decodeMeshFrame(frame)).toThrow(/out of range/);
  });
});

describe("parseServerMessage", () => {
  it("returns null for malformed or unknown input", () => {
    expect(parseServerMessage("{nope")).toBeNull();
    expect(parseServerMessage('"a bare string"')).toBeNull();
    expect(parseServerMessage("3")).toBeNull();
    expect(parseServerMessage('{"notype":1}')).toBeNull();
    expect(parseServerMessage('{"type":"surprise"}')).toBeNull();
    expect(parseServerMessage('{"type":42}')).toBeNull();
  });

  it("passes known message types through", () => {
    expect(parseServerMessage('{"type":"ack","sessionVersion":3}')).toEqual({
      type: "ack",
      sessionVersion: 3,
    });
    expect(parseServerMessage('{"type":"error","message":"m","origin":"o"}')).toEqual(
      { type: "error", message: "m", origin: "o" },
    );
  });
});

describe("client message encoders", () => {
  it("encode plain JSON objects", () => {
    expect(JSON.parse(commandMessage("view add met"))).toEqual({
      type: "command",
      text: "view add met",
    });
    expect(JSON.parse(keyMessage("o"))).toEqual({ type: "key", char: "o" });
    expect(JSON.parse(requestSceneMessage())).toEqual({ type: "requestScene" });
    expect(JSON.parse(requestRenderMessage(2, 300, 200))).toEqual({
      type: "requestRender",
      viewId: 2,
      width: 300,
      height: 200,
    });
  });

  it("include targetView only when one is given", () => {
    expect(JSON.parse(pointerMessage("rotateDrag", 0.1, -0.2))).toEqual({
      type: "pointer",
      kind: "rotateDrag",
      dx: 0.1,
      dy: -0.2,
    });
    expect(JSON.parse(pointerMessage("panDrag", 0, 0.5, 1))).toEqual({
      type: "pointer",
      kind: "panDrag",
      dx: 0,
      dy: 0.5,
      targetView: 1,
    });
  });
});
