import { describe, expect, it } from "vitest";

import {
  applyDrag,
  applyZoom,
  clampOrbit,
  defaultOrbit,
  orbitPosition,
  orbitToCamera,
  type Orbit,
} from "../src/camera.js";

const base: Orbit = { azimuthDeg: 0, elevationDeg: 0, distance: 100, target: [10, 20, 30] };

describe("orbit camera", () => {
  it("azimuth 0 places the camera on the +x side of the target", () => {
    expect(orbitPosition(base)).toEqual([110, 20, 30]);
  });

  it("a 90 degree azimuth drag rotates the position onto the y axis", () => {
    // quarter of the viewport width = quarter turn
    const turned = applyDrag(base, 96, 0, 384);
    expect(turned.azimuthDeg).toBeCloseTo(270, 10);
    const [x, y, z] = orbitPosition(turned);
    expect(x).toBeCloseTo(10, 10);
    expect(y).toBeCloseTo(20 - 100, 10);
    expect(z).toBeCloseTo(30, 10);
  });

  it("camera JSON reflects the rotated position and keeps the target", () => {
    const cam = orbitToCamera(applyDrag(base, -96, 0, 384), 256, 256);
    expect(cam.position[0]).toBeCloseTo(10, 10);
    expect(cam.position[1]).toBeCloseTo(120, 10);
    expect(cam.look_at).toEqual([10, 20, 30]);
    expect(cam.up).toEqual([0, 0, 1]);
    expect(cam.width).toBe(256);
  });

  it("elevation is clamped short of the poles", () => {
    const up = clampOrbit({ ...base, elevationDeg: 200 });
    expect(up.elevationDeg).toBe(89);
    const down = clampOrbit({ ...base, elevationDeg: -95 });
    expect(down.elevationDeg).toBe(-89);
  });

  it("zoom is exponential in wheel delta and never reaches zero", () => {
    const nearer = applyZoom(base, -1000);
    expect(nearer.distance).toBeCloseTo(100 * Math.exp(-1), 10);
    let orbit = base;
    for (let i = 0; i < 50; i++) orbit = applyZoom(orbit, -10_000);
    expect(orbit.distance).toBeGreaterThan(0);
  });

  it("default orbit frames the volume centre", () => {
    const orbit = defaultOrbit([100, 100, 200]);
    expect(orbit.target).toEqual([50, 50, 100]);
    expect(orbit.distance).toBeCloseTo(440);
  });

  it("drag distance scales with viewport size", () => {
    const small = applyDrag(base, 10, 0, 100);
    const large = applyDrag(base, 10, 0, 1000);
    expect(Math.abs(small.azimuthDeg - 360)).toBeCloseTo(36, 10);
    expect(Math.abs(large.azimuthDeg - 360)).toBeCloseTo(3.6, 10);
  });
});
