// Canvas renderer for one panel: locally drawn isosurface meshes and cut
// plane textures over the latest server volume frame.

import {
  cameraBasis,
  cameraForView,
  placePoint,
  projectPoint,
  transferColor,
  transferRange,
  vdot,
  vnormalize,
  vsub,
  vcross,
} from "./math3d.js";
import type { ImagePayload, MeshData, Vec3, ViewDoc, CameraDoc } from "./protocol.js";
import type { PanelContent } from "./store.js";

export interface ShadedTriangle {
  xs: [number, number, number];
  ys: [number, number, number];
  depth: number;
  fill: string;
}

function shade(base: Vec3, normal: Vec3, viewDir: Vec3): string {
  // Two-sided headlight: faces keep their color whichever way they wind.
  const lambert = Math.abs(vdot(normal, viewDir));
  const k = 0.1 + 0.9 * lambert;
  const r = Math.round(Math.min(1, base[0] * k) * 255);
  const g = Math.round(Math.min(1, base[1] * k) * 255);
  const b = Math.round(Math.min(1, base[2] * k) * 255);
  return `rgb(${r},${g},${b})`;
}

/**
 * Place, project, shade, and depth-sort one mesh's triangles for a panel.
 * Triangles behind the camera are culled.
 */
export function meshTriangles(
  camera: CameraDoc,
  view: ViewDoc,
  mesh: MeshData,
  level: number,
  width: number,
  height: number,
): ShadedTriangle[] {
  const basis = cameraBasis(camera);
  const base = transferColor(view.tf, level);
  const n = mesh.vertexCount;
  const xs = new Float64Array(n);
  const ys = new Float64Array(n);
  const depths = new Float64Array(n);
  const world: Vec3[] = new Array(n);
  for (let i = 0; i < n; i++) {
    const p = placePoint(view, [
      mesh.positions[i * 3],
      mesh.positions[i * 3 + 1],
      mesh.positions[i * 3 + 2],
    ]);
    world[i] = p;
    const pr = projectPoint(camera, basis, width, height, p);
    xs[i] = pr.x;
    ys[i] = pr.y;
    depths[i] = pr.depth;
  }
  const out: ShadedTriangle[] = [];
  for (let t = 0; t < mesh.triangleCount; t++) {
    const a = mesh.indices[t * 3];
    const b = mesh.indices[t * 3 + 1];
    const c = mesh.indices[t * 3 + 2];
    const depth = (depths[a] + depths[b] + depths[c]) / 3;
    if (depths[a] <= 0 || depths[b] <= 0 || depths[c] <= 0) continue;
    const e1 = vsub(world[b], world[a]);
    const e2 = vsub(world[c], world[a]);
    const cross = vcross(e1, e2);
    const len = Math.hypot(cross[0], cross[1], cross[2]);
    if (len === 0) continue;
    const normal: Vec3 = [cross[0] / len, cross[1] / len, cross[2] / len];
    const viewDir = vnormalize(vsub(world[a], camera.position));
    out.push({
      xs: [xs[a], xs[b], xs[c]],
      ys: [ys[a], ys[b], ys[c]],
      depth,
      fill: shade(base, normal, viewDir),
    });
  }
  out.sort((p, q) => q.depth - p.depth); // painter order, far first
  return out;
}

/** Decoded bitmaps are cached on the payload object itself. */
const bitmapCache = new WeakMap<ImagePayload, ImageBitmap | "pending">();

function bitmapFor(payload: ImagePayload, onReady: () => void): ImageBitmap | null {
  const cached = bitmapCache.get(payload);
  if (cached === "pending") return null;
  if (cached !== undefined) return cached;
  bitmapCache.set(payload, "pending");
  const bytes = Uint8Array.from(atob(payload.data), (ch) => ch.charCodeAt(0));
  createImageBitmap(new Blob([bytes], { type: "image/png" }))
    .then((bitmap) => {
      bitmapCache.set(payload, bitmap);
      onReady();
    })
    .catch(() => bitmapCache.delete(payload));
  return null;
}

function drawSlice(
  ctx: CanvasRenderingContext2D,
  camera: CameraDoc,
  view: ViewDoc,
  payload: ImagePayload,
  width: number,
  height: number,
  onReady: () => void,
): void {
  const frame = payload.frame;
  if (frame === undefined) return;
  const bitmap = bitmapFor(payload, onReady);
  if (bitmap === null) return;
  const basis = cameraBasis(camera);
  // Map the texture onto the plane with the affine transform fixed by
  // three placed corners: origin, origin + w*stepU, origin + h*stepV.
  const o = placePoint(view, frame.origin as Vec3);
  const u = placePoint(view, [
    frame.origin[0] + frame.stepU[0] * payload.width,
    frame.origin[1] + frame.stepU[1] * payload.width,
    frame.origin[2] + frame.stepU[2] * payload.width,
  ]);
  const v = placePoint(view, [
    frame.origin[0] + frame.stepV[0] * payload.height,
    frame.origin[1] + frame.stepV[1] * payload.height,
    frame.origin[2] + frame.stepV[2] * payload.height,
  ]);
  const po = projectPoint(camera, basis, width, height, o);
  const pu = projectPoint(camera, basis, width, height, u);
  const pv = projectPoint(camera, basis, width, height, v);
  if (po.depth <= 0 || pu.depth <= 0 || pv.depth <= 0) return;
  ctx.save();
  ctx.globalAlpha = 0.85;
  ctx.setTransform(
    (pu.x - po.x) / payload.width,
    (pu.y - po.y) / payload.width,
    (pv.x - po.x) / payload.height,
    (pv.y - po.y) / payload.height,
    po.x,
    po.y,
  );
  ctx.drawImage(bitmap, 0, 0);
  ctx.restore();
}

function drawHistogram(
  ctx: CanvasRenderingContext2D,
  histogram: { edges: number[]; counts: number[] },
  width: number,
): void {
  const w = Math.max(60, Math.floor(width / 3));
  const h = Math.floor(w / 2);
  const x0 = width - w - 8;
  const y0 = 8;
  ctx.save();
  ctx.fillStyle = "rgba(16, 20, 28, 0.85)";
  ctx.fillRect(x0, y0, w, h);
  ctx.strokeStyle = "#3b465c";
  ctx.strokeRect(x0 + 0.5, y0 + 0.5, w - 1, h - 1);
  const peak = Math.max(1, ...histogram.counts);
  const barW = (w - 4) / histogram.counts.length;
  ctx.fillStyle = "#7aa2f7";
  histogram.counts.forEach((count, i) => {
    const barH = Math.round(((h - 4) * count) / peak);
    ctx.fillRect(x0 + 2 + i * barW, y0 + h - 2 - barH, Math.max(1, barW - 1), barH);
  });
  ctx.restore();
}

function drawColorbar(
  ctx: CanvasRenderingContext2D,
  view: ViewDoc,
  width: number,
  height: number,
): void {
  const h = Math.max(10, Math.floor(height / 14));
  const y0 = height - h - 6;
  const [lo, hi] = transferRange(view.tf);
  ctx.save();
  for (let x = 6; x < width - 6; x++) {
    const s = lo + ((hi - lo) * (x - 6)) / Math.max(1, width - 13);
    const [r, g, b] = transferColor(view.tf, s);
    ctx.fillStyle = `rgb(${Math.round(r * 255)},${Math.round(g * 255)},${Math.round(b * 255)})`;
    ctx.fillRect(x, y0, 1, h);
  }
  ctx.strokeStyle = "#3b465c";
  ctx.strokeRect(5.5, y0 - 0.5, width - 11, h + 1);
  ctx.restore();
}

/** Redraw one panel from the current scene state. */
export function drawPanel(
  ctx: CanvasRenderingContext2D,
  sceneCamera: CameraDoc,
  view: ViewDoc,
  content: PanelContent,
  width: number,
  height: number,
  onAsyncReady: () => void,
): void {
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  ctx.fillStyle = "#0b0e14";
  ctx.fillRect(0, 0, width, height);
  const camera = cameraForView(sceneCamera, view);

  if (view.showVolume && content.volume !== null) {
    const bitmap = bitmapFor(content.volume, onAsyncReady);
    if (bitmap !== null) ctx.drawImage(bitmap, 0, 0, width, height);
  }

  for (const [index, payload] of content.slices) {
    if (index < view.cutPlanes.length) {
      drawSlice(ctx, camera, view, payload, width, height, onAsyncReady);
    }
  }

  for (const [level, mesh] of content.meshes) {
    for (const tri of meshTriangles(camera, view, mesh, level, width, height)) {
      ctx.fillStyle = tri.fill;
      ctx.strokeStyle = tri.fill;
      ctx.lineWidth = 0.5;
      ctx.beginPath();
      ctx.moveTo(tri.xs[0], tri.ys[0]);
      ctx.lineTo(tri.xs[1], tri.ys[1]);
      ctx.lineTo(tri.xs[2], tri.ys[2]);
      ctx.closePath();
      ctx.fill();
      ctx.stroke();
    }
  }

  if (content.histogram !== null && view.showHistogram) {
    drawHistogram(ctx, content.histogram, width);
  }
  if (view.showColorbar) {
    drawColorbar(ctx, view, width, height);
  }
}
