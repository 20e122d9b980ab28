// Wire types for the session service: JSON text messages both ways, plus
// binary mesh frames that follow their JSON header on the same socket.

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export interface CameraDoc {
  position: Vec3;
  focal: Vec3;
  up: Vec3;
  fov: number;
}

export interface LayoutDoc {
  cols: number;
  cellWidth: number;
  cellHeight: number;
}

export interface TransferDoc {
  paletteName: string | null;
  colorPoints: [number, [number, number, number]][];
  opacityPoints: [number, number][];
}

export interface CutPlaneDoc {
  axis: string | number | null;
  normal: number[] | null;
  offset: number | "center";
}

export interface ViewDoc {
  id: number;
  cell: [number, number];
  source: string;
  derivation: unknown;
  showVolume: boolean;
  isoLevels: number[];
  cutPlanes: CutPlaneDoc[];
  tf: TransferDoc;
  window: [number, number] | null;
  showColorbar: boolean;
  showHistogram: boolean;
  histBins: number;
  basePosition: Vec3;
  objectOrigin: Vec3;
  objectRotation: Quat;
  objectTranslation: Vec3;
}

export interface SceneDoc {
  version: number;
  mode: "camera" | "object" | "sync";
  camera: CameraDoc;
  layout: LayoutDoc;
  nextViewId: number;
  datasets: Record<string, unknown>;
  views: ViewDoc[];
}

export interface ImagePayload {
  width: number;
  height: number;
  encoding: string; // "png"
  data: string; // base64
  frame?: { origin: Vec3; stepU: Vec3; stepV: Vec3 };
}

export interface SceneDeltaMsg {
  type: "sceneDelta";
  sessionVersion: number;
  events: { event: string; [key: string]: unknown }[];
  scene: SceneDoc;
}

export interface MeshHeaderMsg {
  type: "mesh";
  viewId: number;
  level: number;
  binaryRef: number;
}

export interface SliceDataMsg {
  type: "sliceData";
  viewId: number;
  planeIndex: number;
  image: ImagePayload;
}

export interface VolumeFrameMsg {
  type: "volumeFrame";
  viewId: number;
  image: ImagePayload;
}

export interface HistogramMsg {
  type: "histogram";
  viewId: number;
  edges: number[];
  counts: number[];
}

export interface ErrorMsg {
  type: "error";
  message: string;
  origin: string;
}

export interface AckMsg {
  type: "ack";
  sessionVersion: number;
}

export type ServerMessage =
  | SceneDeltaMsg
  | MeshHeaderMsg
  | SliceDataMsg
  | VolumeFrameMsg
  | HistogramMsg
  | ErrorMsg
  | AckMsg;

const SERVER_TYPES = new Set([
  "sceneDelta",
  "mesh",
  "sliceData",
  "volumeFrame",
  "histogram",
  "error",
  "ack",
]);

/** Parse one server text frame; unknown or malformed messages yield null. */
export function parseServerMessage(text: string): ServerMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const type = (raw as { type?: unknown }).type;
  if (typeof type !== "string" || !SERVER_TYPES.has(type)) return null;
  return raw as ServerMessage;
}

export interface MeshData {
  vertexCount: number;
  triangleCount: number;
  /** xyz triples, vertexCount * 3 floats */
  positions: Float32Array;
  /** vertex index triples, triangleCount * 3 ints */
  indices: Uint32Array;
}

/**
 * Decode a binary mesh frame: u32 vertexCount, u32 triangleCount, then
 * f32 xyz triples and u32 index triples, all little-endian.
 */
export function decodeMeshFrame(buffer: ArrayBuffer): MeshData {
  if (buffer.byteLength < 8) {
    throw new Error(`mesh frame too short: ${buffer.byteLength} bytes`);
  }
  const head = new DataView(buffer);
  const vertexCount = head.getUint32(0, true);
  const triangleCount = head.getUint32(4, true);
  const expected = 8 + vertexCount * 12 + triangleCount * 12;
  if (buffer.byteLength !== expected) {
    throw new Error(
      `mesh frame is ${buffer.byteLength} bytes, expected ${expected} ` +
        `for ${vertexCount} vertices / ${triangleCount} triangles`,
    );
  }
  // Offsets 8 and 8 + 12v are both multiples of 4, so aligned views work.
  const positions = new Float32Array(buffer, 8, vertexCount * 3);
  const indices = new Uint32Array(buffer, 8 + vertexCount * 12, triangleCount * 3);
  for (const index of indices) {
    if (index >= vertexCount) {
      throw new Error(`mesh frame index ${index} out of range`);
    }
  }
  return { vertexCount, triangleCount, positions, indices };
}

// --- client -> server messages ---------------------------------------------

export function commandMessage(text: string): string {
  return JSON.stringify({ type: "command", text });
}

export type PointerKind = "rotateDrag" | "panDrag" | "zoomDrag";

export function pointerMessage(
  kind: PointerKind,
  dx: number,
  dy: number,
  targetView?: number,
): string {
  const msg: Record<string, unknown> = { type: "pointer", kind, dx, dy };
  if (targetView !== undefined) msg.targetView = targetView;
  return JSON.stringify(msg);
}

export function keyMessage(char: string): string {
  return JSON.stringify({ type: "key", char });
}

export function requestSceneMessage(): string {
  return JSON.stringify({ type: "requestScene" });
}

export function requestRenderMessage(
  viewId: number,
  width: number,
  height: number,
): string {
  return JSON.stringify({ type: "requestRender", viewId, width, height });
}
