/** Transfer-function editing model mirroring the service schema.
 *
 * Control points are (value, color, opacity) with strictly increasing
 * values; edits are clamped client-side so every state the editor can
 * reach is a state the server will accept.
 */

export interface ControlPoint {
  value: number;
  color: [number, number, number];
  opacity: number;
}

export interface TransferJson {
  domain: [number, number];
  points: { value: number; color: [number, number, number]; opacity: number }[];
}

const clamp = (x: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, x));

export class TransferModel {
  constructor(
    public points: ControlPoint[],
    public domain: [number, number],
  ) {
    if (points.length === 0) throw new Error("need at least one control point");
    for (let i = 1; i < points.length; i++) {
      if (points[i]!.value <= points[i - 1]!.value) {
        throw new Error("control point values must be strictly increasing");
      }
    }
  }

  static fromPreset(json: TransferJson): TransferModel {
    return new TransferModel(
      json.points.map((p) => ({
        value: p.value,
        color: [...p.color] as [number, number, number],
        opacity: p.opacity,
      })),
      [json.domain[0], json.domain[1]],
    );
  }

  /** Smallest value separation the editor maintains between neighbours. */
  get minGap(): number {
    return Math.max((this.domain[1] - this.domain[0]) * 1e-4, 1e-9);
  }

  /** Move point i; value is clamped between its neighbours and the domain,
   * opacity to [0, 1]. Returns the applied (clamped) point. */
  movePoint(i: number, value: number, opacity: number): ControlPoint {
    const p = this.points[i];
    if (p === undefined) throw new Error(`no control point ${i}`);
    const lo = i > 0 ? this.points[i - 1]!.value + this.minGap : this.domain[0];
    const hi =
      i < this.points.length - 1 ? this.points[i + 1]!.value - this.minGap : this.domain[1];
    const applied: ControlPoint = {
      value: clamp(value, lo, hi),
      color: p.color,
      opacity: clamp(opacity, 0, 1),
    };
    this.points[i] = applied;
    return applied;
  }

  setColor(i: number, color: [number, number, number]): void {
    const p = this.points[i];
    if (p === undefined) throw new Error(`no control point ${i}`);
    this.points[i] = { ...p, color: color.map((c) => clamp(c, 0, 1)) as [number, number, number] };
  }

  /** Insert a point at the given value, clamped clear of existing points. */
  addPoint(value: number, color: [number, number, number], opacity: number): number {
    const v = clamp(value, this.domain[0], this.domain[1]);
    let at = this.points.findIndex((p) => p.value > v);
    if (at < 0) at = this.points.length;
    const lo = at > 0 ? this.points[at - 1]!.value + this.minGap : this.domain[0];
    const hi = at < this.points.length ? this.points[at]!.value - this.minGap : this.domain[1];
    if (lo > hi) throw new Error("no room between neighbouring points");
    this.points.splice(at, 0, { value: clamp(v, lo, hi), color, opacity: clamp(opacity, 0, 1) });
    return at;
  }

  removePoint(i: number): void {
    if (this.points.length <= 1) throw new Error("cannot remove the last point");
    if (i < 0 || i >= this.points.length) throw new Error(`no control point ${i}`);
    this.points.splice(i, 1);
  }

  /** Body for the render request; same shape the service's presets use. */
  toRequest(): TransferJson {
    return {
      domain: [this.domain[0], this.domain[1]],
      points: this.points.map((p) => ({
        value: p.value,
        color: [...p.color] as [number, number, number],
        opacity: p.opacity,
      })),
    };
  }
}
