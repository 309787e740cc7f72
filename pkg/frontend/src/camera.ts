/** Orbit camera: spherical coordinates around a target point.
 *
 * Azimuth 0 looks down the -x axis from the +x side; elevation is the
 * angle above the horizontal plane; z is up, matching the server's
 * default up vector.
 */

export interface Orbit {
  azimuthDeg: number;
  elevationDeg: number;
  distance: number;
  target: [number, number, number];
}

export interface CameraJson {
  position: [number, number, number];
  look_at: [number, number, number];
  up: [number, number, number];
  vertical_fov_deg: number;
  width: number;
  height: number;
}

const MAX_ELEVATION = 89.0;

export function clampOrbit(orbit: Orbit, minDistance = 1e-3): Orbit {
  return {
    azimuthDeg: ((orbit.azimuthDeg % 360) + 360) % 360,
    elevationDeg: Math.min(MAX_ELEVATION, Math.max(-MAX_ELEVATION, orbit.elevationDeg)),
    distance: Math.max(minDistance, orbit.distance),
    target: orbit.target,
  };
}

export function orbitPosition(orbit: Orbit): [number, number, number] {
  const az = (orbit.azimuthDeg * Math.PI) / 180;
  const el = (orbit.elevationDeg * Math.PI) / 180;
  const [tx, ty, tz] = orbit.target;
  return [
    tx + orbit.distance * Math.cos(el) * Math.cos(az),
    ty + orbit.distance * Math.cos(el) * Math.sin(az),
    tz + orbit.distance * Math.sin(el),
  ];
}

export function orbitToCamera(
  orbit: Orbit,
  width: number,
  height: number,
  fovDeg = 30,
): CameraJson {
  const safe = clampOrbit(orbit);
  return {
    position: orbitPosition(safe),
    look_at: [...safe.target],
    up: [0, 0, 1],
    vertical_fov_deg: fovDeg,
    width,
    height,
  };
}

/** Pointer drag in pixels to orbit angles; a full-width drag is 360 deg. */
export function applyDrag(orbit: Orbit, dxPx: number, dyPx: number, viewportPx: number): Orbit {
  const perPixel = 360 / Math.max(viewportPx, 1);
  return clampOrbit({
    ...orbit,
    azimuthDeg: orbit.azimuthDeg - dxPx * perPixel,
    elevationDeg: orbit.elevationDeg + dyPx * perPixel,
  });
}

/** Wheel zoom; positive deltaY moves away. Exponential so zoom feels uniform. */
export function applyZoom(orbit: Orbit, deltaY: number): Orbit {
  return clampOrbit({ ...orbit, distance: orbit.distance * Math.exp(deltaY * 0.001) });
}

/** Default orbit framing a volume of the given physical extent. */
export function defaultOrbit(extentMm: [number, number, number]): Orbit {
  const target: [number, number, number] = [
    extentMm[0] / 2,
    extentMm[1] / 2,
    extentMm[2] / 2,
  ];
  return {
    azimuthDeg: 0,
    elevationDeg: 15,
    distance: 2.2 * Math.max(...extentMm),
    target,
  };
}
