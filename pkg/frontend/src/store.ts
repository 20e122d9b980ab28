// Client-side session state: the latest scene document plus per-view
// renderable content, fed by server messages applied in arrival order.

import {
  decodeMeshFrame,
  type ErrorMsg,
  type ImagePayload,
  type MeshData,
  type MeshHeaderMsg,
  type SceneDoc,
  type ServerMessage,
  type ViewDoc,
} from "./protocol.js";

export interface PanelContent {
  /** isolevel -> decoded mesh */
  meshes: Map<number, MeshData>;
  /** cut plane index -> server-colored texture */
  slices: Map<number, ImagePayload>;
  volume: ImagePayload | null;
  histogram: { edges: number[]; counts: number[] } | null;
}

export interface Panel {
  viewId: number;
  row: number;
  col: number;
}

export interface PanelGrid {
  cols: number;
  panels: Panel[];
}

function emptyContent(): PanelContent {
  return { meshes: new Map(), slices: new Map(), volume: null, histogram: null };
}

/**
 * Applies server messages and exposes the resulting state.
 *
 * Scene deltas carry the complete scene document, so ordering is the only
 * concern: a delta whose sessionVersion is not newer than what we already
 * hold is stale (a replay or an out-of-order arrival) and is dropped.
 * Binary mesh frames pair with the mesh headers that announced them, in
 * arrival order per connection.
 */
export class SessionStore {
  version = -1;
  scene: SceneDoc | null = null;
  content = new Map<number, PanelContent>();
  errors: ErrorMsg[] = [];
  /** events from the last applied delta, for render scheduling */
  lastEvents: { event: string; [key: string]: unknown }[] = [];

  private pendingMesh: MeshHeaderMsg[] = [];
  private listeners = new Set<() => void>();

  onChange(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  /** Apply one parsed text message; returns true when state changed. */
  apply(msg: ServerMessage): boolean {
    switch (msg.type) {
      case "ack":
        if (msg.sessionVersion > this.version) {
          this.version = msg.sessionVersion;
          this.notify();
          return true;
        }
        return false;
      case "sceneDelta": {
        if (msg.sessionVersion <= this.version && this.scene !== null) {
          return false; // stale or duplicate
        }
        this.version = msg.sessionVersion;
        this.scene = msg.scene;
        this.lastEvents = msg.events;
        this.pruneContent();
        this.notify();
        return true;
      }
      case "mesh":
        this.pendingMesh.push(msg);
        return false;
      case "sliceData":
        this.contentFor(msg.viewId).slices.set(msg.planeIndex, msg.image);
        this.notify();
        return true;
      case "volumeFrame":
        this.contentFor(msg.viewId).volume = msg.image;
        this.notify();
        return true;
      case "histogram":
        this.contentFor(msg.viewId).histogram = {
          edges: msg.edges,
          counts: msg.counts,
        };
        this.notify();
        return true;
      case "error":
        this.errors.push(msg);
        this.notify();
        return true;
    }
  }

  /** Apply one binary frame: the payload of the oldest unpaired header. */
  applyBinary(buffer: ArrayBuffer): boolean {
    const header = this.pendingMesh.shift();
    if (header === undefined) return false; // frame without a header
    const mesh = decodeMeshFrame(buffer);
    this.contentFor(header.viewId).meshes.set(header.level, mesh);
    this.notify();
    return true;
  }

  view(viewId: number): ViewDoc | undefined {
    return this.scene?.views.find((v) => v.id === viewId);
  }

  contentFor(viewId: number): PanelContent {
    let entry = this.content.get(viewId);
    if (entry === undefined) {
      entry = emptyContent();
      this.content.set(viewId, entry);
    }
    return entry;
  }

  /** Panels in reading order (row-major), plus the column count. */
  panelGrid(): PanelGrid {
    if (this.scene === null) return { cols: 0, panels: [] };
    const panels = this.scene.views
      .map((v) => ({ viewId: v.id, row: v.cell[0], col: v.cell[1] }))
      .sort((a, b) => a.row - b.row || a.col - b.col);
    return { cols: this.scene.layout.cols, panels };
  }

  /** Drop content for removed views, stale isolevels, and gone cut planes. */
  private pruneContent(): void {
    if (this.scene === null) return;
    const live = new Map(this.scene.views.map((v) => [v.id, v]));
    for (const [viewId, entry] of this.content) {
      const view = live.get(viewId);
      if (view === undefined) {
        this.content.delete(viewId);
        continue;
      }
      const levels = new Set(view.isoLevels);
      for (const level of entry.meshes.keys()) {
        if (!levels.has(level)) entry.meshes.delete(level);
      }
      for (const index of entry.slices.keys()) {
        if (index >= view.cutPlanes.length) entry.slices.delete(index);
      }
    }
    // pendingMesh is never pruned: a binary frame always directly follows
    // its header on the socket, so dropping a header would mispair frames.
  }
}
