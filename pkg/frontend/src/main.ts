// Composition root: one shared session mirrored into a grid of canvas
// panels, a command console, and c/o/s mode keys.

import { drawPanel } from "./draw.js";
import { CommandConsole } from "./console.js";
import { GatewayClient } from "./net.js";
import {
  commandMessage,
  keyMessage,
  parseServerMessage,
  pointerMessage,
  requestRenderMessage,
  requestSceneMessage,
  type PointerKind,
} from "./protocol.js";
import { SessionStore } from "./store.js";

const RENDER_CAP = 512;
const MODE_KEYS = new Set(["c", "o", "s"]);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function wsUrl(): string {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/session`;
}

class App {
  private readonly store = new SessionStore();
  private readonly client: GatewayClient;
  private readonly console_: CommandConsole;
  private readonly grid = el<HTMLDivElement>("panels");
  private readonly modeLabel = el<HTMLSpanElement>("mode");
  private readonly statusDot = el<HTMLSpanElement>("status");
  private readonly canvases = new Map<number, HTMLCanvasElement>();
  private drawQueued = false;
  private readonly volumeTimers = new Map<number, ReturnType<typeof setTimeout>>();

  constructor() {
    this.client = new GatewayClient(wsUrl(), {
      onText: (text) => this.onText(text),
      onBinary: (buffer) => {
        this.store.applyBinary(buffer);
      },
      onState: (state) => {
        this.statusDot.dataset.state = state;
        if (state === "open") this.client.send(requestSceneMessage());
      },
    });
    this.console_ = new CommandConsole(
      { input: el<HTMLInputElement>("command"), log: el<HTMLElement>("log") },
      (text) => this.client.send(commandMessage(text)),
    );
    this.store.onChange(() => this.onStoreChange());
    window.addEventListener("keydown", (event) => this.onKey(event));
    window.addEventListener("resize", () => this.scheduleDraw());
    this.client.connect();
  }

  private onText(text: string): void {
    const msg = parseServerMessage(text);
    if (msg === null) return;
    if (msg.type === "error") {
      this.console_.append("error", `${msg.origin}: ${msg.message}`);
    }
    this.store.apply(msg);
  }

  private onStoreChange(): void {
    const scene = this.store.scene;
    if (scene !== null) {
      this.modeLabel.textContent = scene.mode;
      this.syncPanels();
      for (const ev of this.store.lastEvents) {
        if (ev.event === "viewAdded" || ev.event === "viewChanged") {
          this.queueVolumeRender(ev.viewId as number);
        } else if (ev.event === "datasetChanged" || ev.event === "cameraChanged" || ev.event === "scene") {
          for (const view of scene.views) this.queueVolumeRender(view.id);
        }
      }
      this.store.lastEvents = [];
    }
    this.scheduleDraw();
  }

  /** Make the DOM grid match the scene's panel layout. */
  private syncPanels(): void {
    const { cols, panels } = this.store.panelGrid();
    this.grid.style.gridTemplateColumns = `repeat(${Math.max(1, cols)}, 1fr)`;
    const wanted = new Set(panels.map((p) => p.viewId));
    for (const [viewId, canvas] of this.canvases) {
      if (!wanted.has(viewId)) {
        canvas.parentElement?.remove();
        this.canvases.delete(viewId);
      }
    }
    for (const panel of panels) {
      if (!this.canvases.has(panel.viewId)) {
        const cell = document.createElement("div");
        cell.className = "panel";
        const label = document.createElement("span");
        label.className = "panel-label";
        label.textContent = `view ${panel.viewId}`;
        const canvas = document.createElement("canvas");
        this.attachDrag(canvas, panel.viewId);
        cell.append(canvas, label);
        this.grid.appendChild(cell);
        this.canvases.set(panel.viewId, canvas);
        this.queueVolumeRender(panel.viewId);
      }
      const canvas = this.canvases.get(panel.viewId)!;
      const cell = canvas.parentElement as HTMLElement;
      cell.style.gridRow = `${panel.row + 1}`;
      cell.style.gridColumn = `${panel.col + 1}`;
    }
  }

  private attachDrag(canvas: HTMLCanvasElement, viewId: number): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    canvas.addEventListener("pointerdown", (event) => {
      dragging = true;
      lastX = event.clientX;
      lastY = event.clientY;
      canvas.setPointerCapture(event.pointerId);
    });
    canvas.addEventListener("pointermove", (event) => {
      if (!dragging) return;
      const rect = canvas.getBoundingClientRect();
      const dx = (event.clientX - lastX) / Math.max(1, rect.width);
      const dy = (event.clientY - lastY) / Math.max(1, rect.height);
      lastX = event.clientX;
      lastY = event.clientY;
      if (dx === 0 && dy === 0) return;
      const kind: PointerKind = event.shiftKey ? "panDrag" : "rotateDrag";
      this.client.send(pointerMessage(kind, dx, dy, viewId));
    });
    const stop = (event: PointerEvent) => {
      dragging = false;
      if (canvas.hasPointerCapture(event.pointerId)) {
        canvas.releasePointerCapture(event.pointerId);
      }
    };
    canvas.addEventListener("pointerup", stop);
    canvas.addEventListener("pointercancel", stop);
    canvas.addEventListener(
      "wheel",
      (event) => {
        event.preventDefault();
        this.client.send(
          pointerMessage("zoomDrag", 0, event.deltaY > 0 ? 0.08 : -0.08, viewId),
        );
      },
      { passive: false },
    );
  }

  private onKey(event: KeyboardEvent): void {
    if (event.target instanceof HTMLInputElement) return;
    if (MODE_KEYS.has(event.key)) {
      this.client.send(keyMessage(event.key));
    }
  }

  /** Ask the server for a fresh volume frame, debounced per view. */
  private queueVolumeRender(viewId: number): void {
    const view = this.store.view(viewId);
    if (view === undefined || !view.showVolume) return;
    const pending = this.volumeTimers.get(viewId);
    if (pending !== undefined) clearTimeout(pending);
    this.volumeTimers.set(
      viewId,
      setTimeout(() => {
        this.volumeTimers.delete(viewId);
        const canvas = this.canvases.get(viewId);
        if (canvas === undefined || !this.client.isOpen) return;
        const width = Math.min(RENDER_CAP, Math.max(1, canvas.clientWidth));
        const height = Math.min(RENDER_CAP, Math.max(1, canvas.clientHeight));
        this.client.send(requestRenderMessage(viewId, width, height));
      }, 150),
    );
  }

  private scheduleDraw(): void {
    if (this.drawQueued) return;
    this.drawQueued = true;
    requestAnimationFrame(() => {
      this.drawQueued = false;
      this.drawAll();
    });
  }

  private drawAll(): void {
    const scene = this.store.scene;
    if (scene === null) return;
    for (const view of scene.views) {
      const canvas = this.canvases.get(view.id);
      if (canvas === undefined) continue;
      const width = Math.max(1, canvas.clientWidth);
      const height = Math.max(1, canvas.clientHeight);
      if (canvas.width !== width || canvas.height !== height) {
        canvas.width = width;
        canvas.height = height;
      }
      const ctx = canvas.getContext("2d");
      if (ctx === null) continue;
      drawPanel(
        ctx,
        scene.camera,
        view,
        this.store.contentFor(view.id),
        width,
        height,
        () => this.scheduleDraw(),
      );
    }
  }
}

new App();
