import { describe, expect, it } from "vitest";

import {
  cameraBasis,
  placePoint,
  projectPoint,
  quatRotate,
  transferColor,
  transferRange,
  vcross,
  vdot,
  vnorm,
} from "../src/math3d.js";
import type {
  CameraDoc,
  Quat,
  SceneDeltaMsg,
  TransferDoc,
  Vec3,
  ViewDoc,
} from "../src/protocol.js";
import { loadStreams } from "./helpers.js";

function expectVec(got: Vec3, want: number[], digits = 10): void {
  expect(got[0]).toBeCloseTo(want[0], digits);
  expect(got[1]).toBeCloseTo(want[1], digits);
  expect(got[2]).toBeCloseTo(want[2], digits);
}

function makeView(over: Partial<ViewDoc>): ViewDoc {
  return {
    id: 0,
    cell: [0, 0],
    source: "d",
    derivation: null,
    showVolume: false,
    isoLevels: [],
    cutPlanes: [],
    tf: {
      paletteName: null,
      colorPoints: [
        [0, [0, 0, 0]],
        [1, [1, 1, 1]],
      ],
      opacityPoints: [
        [0, 0],
        [1, 1],
      ],
    },
    window: null,
    showColorbar: false,
    showHistogram: false,
    histBins: 64,
    basePosition: [0, 0, 0],
    objectOrigin: [0, 0, 0],
    objectRotation: [1, 0, 0, 0],
    objectTranslation: [0, 0, 0],
    ...over,
  };
}

const Z90: Quat = [Math.SQRT1_2, 0, 0, Math.SQRT1_2];

describe("quatRotate", () => {
  it("rotates a quarter turn about z", () => {
    expectVec(quatRotate(Z90, [1, 0, 0]), [0, 1, 0]);
    expectVec(quatRotate(Z90, [0, 1, 0]), [-1, 0, 0]);
  });

  it("leaves the rotation axis alone", () => {
    expectVec(quatRotate(Z90, [0, 0, 3]), [0, 0, 3]);
  });

  it("identity quaternion is a no-op", () => {
    expectVec(quatRotate([1, 0, 0, 0], [2, -5, 0.25]), [2, -5, 0.25]);
  });
});

describe("placePoint", () => {
  it("with identity rotation shifts by base position plus translation", () => {
    const view = makeView({
      basePosition: [5, -10, 0],
      objectOrigin: [9, -6, 2],
      objectTranslation: [0.5, 0, -1],
    });
    expectVec(placePoint(view, [1, 2, 3]), [6.5, -8, 2]);
  });

  it("rotates about the origin point, not the data origin", () => {
    const view = makeView({ objectOrigin: [2, 2, 0], objectRotation: Z90 });
    expectVec(placePoint(view, [3, 2, 0]), [2, 3, 0]);
    expectVec(placePoint(view, [2, 2, 0]), [2, 2, 0]); // the pivot is fixed
  });

  it("matches the service's own placements from the recorded session", () => {
    const streams = loadStreams();
    const all = streams.clientA.filter(
      (m) => m.kind === "json" && (m.data as { type?: string }).type === "sceneDelta",
    );
    const scene = (all[all.length - 1].data as SceneDeltaMsg).scene;
    expect(streams.placements.length).toBeGreaterThan(0);
    for (const golden of streams.placements) {
      const view = scene.views.find((v) => v.id === golden.viewId)!;
      expect(view).toBeDefined();
      golden.points.forEach((p, i) => {
        expectVec(placePoint(view, p), golden.placed[i], 9);
      });
    }
  });
});

describe("cameraBasis", () => {
  const camera: CameraDoc = {
    position: [0, -10, 0],
    focal: [0, 0, 0],
    up: [0, 0, 1],
    fov: 90,
  };

  it("builds the expected axes for an axis-aligned camera", () => {
    const basis = cameraBasis(camera);
    expectVec(basis.forward, [0, 1, 0]);
    expectVec(basis.right, [1, 0, 0]);
    expectVec(basis.up, [0, 0, 1]);
  });

  it("is orthonormal with right x forward = up for a tilted camera", () => {
    const tilted = cameraBasis({
      position: [3, -7, 4],
      focal: [0.5, 1, -2],
      up: [0, 0, 1],
    fov: 30,
    });
    expect(vnorm(tilted.right)).toBeCloseTo(1, 12);
    expect(vnorm(tilted.up)).toBeCloseTo(1, 12);
    expect(vnorm(tilted.forward)).toBeCloseTo(1, 12);
    expect(vdot(tilted.right, tilted.up)).toBeCloseTo(0, 12);
    expect(vdot(tilted.right, tilted.forward)).toBeCloseTo(0, 12);
    expect(vdot(tilted.up, tilted.forward)).toBeCloseTo(0, 12);
    expectVec(vcross(tilted.right, tilted.forward), tilted.up);
  });
});

describe("projectPoint", () => {
  const camera: CameraDoc = {
    position: [0, -10, 0],
    focal: [0, 0, 0],
    up: [0, 0, 1],
    fov: 90,
  };
  const basis = cameraBasis(camera);

  it("lands the focal point in the canvas center", () => {
    const pr = projectPoint(camera, basis, 200, 100, [0, 0, 0]);
    expect(pr.x).toBeCloseTo(100, 10);
    expect(pr.y).toBeCloseTo(50, 10);
    expect(pr.depth).toBeCloseTo(10, 10);
  });

  it("maps world-right to +x and world-up to -y", () => {
    const right = projectPoint(camera, basis, 200, 100, [1, 0, 0]);
    expect(right.x).toBeCloseTo(105, 10); // scale = 50/tan(45 deg) = 50
    expect(right.y).toBeCloseTo(50, 10);
    const up = projectPoint(camera, basis, 200, 100, [0, 0, 1]);
    expect(up.x).toBeCloseTo(100, 10);
    expect(up.y).toBeCloseTo(45, 10);
  });

  it("reports points behind the camera with negative depth", () => {
    expect(projectPoint(camera, basis, 200, 100, [0, -20, 0]).depth).toBeLessThan(0);
  });
});

describe("transfer function sampling", () => {
  const tf: TransferDoc = {
    paletteName: null,
    colorPoints: [
      [0, [0, 0, 0]],
      [1, [1, 0, 0]],
      [3, [1, 1, 1]],
    ],
    opacityPoints: [],
  };

  it("interpolates linearly between control points", () => {
    expectVec(transferColor(tf, 0.5), [0.5, 0, 0]);
    expectVec(transferColor(tf, 2), [1, 0.5, 0.5]);
  });

  it("clamps outside the control range", () => {
    expectVec(transferColor(tf, -4), [0, 0, 0]);
    expectVec(transferColor(tf, 9), [1, 1, 1]);
  });

  it("hits control points exactly", () => {
    expectVec(transferColor(tf, 1), [1, 0, 0]);
  });

  it("reports the control span", () => {
    expect(transferRange(tf)).toEqual([0, 3]);
    expect(transferRange({ paletteName: null, colorPoints: [], opacityPoints: [] })).toEqual([0, 1]);
  });
});
