// Small vector/quaternion kit mirroring the server's conventions, so
// locally drawn meshes land where server renders put them.

import type { CameraDoc, Quat, TransferDoc, Vec3, ViewDoc } from "./protocol.js";

export function vadd(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function vsub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function vscale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function vdot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function vcross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function vnorm(a: Vec3): number {
  return Math.sqrt(vdot(a, a));
}

export function vnormalize(a: Vec3): Vec3 {
  const n = vnorm(a);
  if (n === 0) throw new Error("cannot normalize a zero vector");
  return vscale(a, 1 / n);
}

/** Rotate a point by a unit quaternion (w, x, y, z). */
export function quatRotate(q: Quat, p: Vec3): Vec3 {
  const [w, x, y, z] = q;
  const u: Vec3 = [x, y, z];
  const uv = vcross(u, p);
  const uuv = vcross(u, uv);
  return vadd(p, vscale(vadd(vscale(uv, w), uuv), 2));
}

/**
 * A view's object placement: rotate about the pivot, then translate.
 * pivot = objectOrigin - basePosition (in raw data coordinates);
 * offset = basePosition + objectTranslation.
 */
export function placePoint(view: ViewDoc, p: Vec3): Vec3 {
  const pivot = vsub(view.objectOrigin, view.basePosition);
  const offset = vadd(view.basePosition, view.objectTranslation);
  const rotated = quatRotate(view.objectRotation, vsub(p, pivot));
  return vadd(vadd(rotated, pivot), offset);
}

/** The shared camera, shifted to sit in front of this view's grid cell. */
export function cameraForView(camera: CameraDoc, view: ViewDoc): CameraDoc {
  return {
    position: vadd(camera.position, view.basePosition),
    focal: vadd(camera.focal, view.basePosition),
    up: camera.up,
    fov: camera.fov,
  };
}

export interface CameraBasis {
  right: Vec3;
  up: Vec3;
  forward: Vec3;
}

/** Right-handed screen basis: forward into the screen, right x forward = up. */
export function cameraBasis(camera: CameraDoc): CameraBasis {
  const forward = vnormalize(vsub(camera.focal, camera.position));
  const right = vnormalize(vcross(forward, camera.up));
  const up = vcross(right, forward);
  return { right, up, forward };
}

export interface Projected {
  x: number;
  y: number;
  /** distance along the view axis; points behind the camera are negative */
  depth: number;
}

/**
 * Pinhole projection to canvas pixels: x grows right, y grows DOWN, and
 * the vertical field of view spans the canvas height.
 */
export function projectPoint(
  camera: CameraDoc,
  basis: CameraBasis,
  width: number,
  height: number,
  p: Vec3,
): Projected {
  const rel = vsub(p, camera.position);
  const depth = vdot(rel, basis.forward);
  const scale = height / 2 / Math.tan(((camera.fov / 2) * Math.PI) / 180);
  const safe = Math.abs(depth) < 1e-9 ? 1e-9 : depth;
  return {
    x: width / 2 + (vdot(rel, basis.right) / safe) * scale,
    y: height / 2 - (vdot(rel, basis.up) / safe) * scale,
    depth,
  };
}

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

/** Piecewise-linear color lookup over the transfer function's points. */
export function transferColor(tf: TransferDoc, s: number): Vec3 {
  const pts = tf.colorPoints;
  if (pts.length === 0) return [1, 1, 1];
  if (s <= pts[0][0]) return [...pts[0][1]] as Vec3;
  const last = pts[pts.length - 1];
  if (s >= last[0]) return [...last[1]] as Vec3;
  for (let i = 1; i < pts.length; i++) {
    const [s1, c1] = pts[i];
    if (s <= s1) {
      const [s0, c0] = pts[i - 1];
      const t = s1 === s0 ? 0 : (s - s0) / (s1 - s0);
      return [lerp(c0[0], c1[0], t), lerp(c0[1], c1[1], t), lerp(c0[2], c1[2], t)];
    }
  }
  return [...last[1]] as Vec3;
}

/** The scalar span of the transfer function's control points. */
export function transferRange(tf: TransferDoc): [number, number] {
  const pts = tf.colorPoints;
  if (pts.length === 0) return [0, 1];
  return [pts[0][0], pts[pts.length - 1][0]];
}
