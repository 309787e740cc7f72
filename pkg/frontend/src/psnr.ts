/** Client-side PSNR for the compare badge.
 *
 * Duplicates the server's formula (RGB mean-squared error against the
 * 255 peak, alpha ignored, capped at 99 dB) so the badge matches what
 * the CLI would report for the same two images.
 */

export const PSNR_CAP = 99;

export interface RgbaImage {
  width: number;
  height: number;
  /** RGBA interleaved, 4 bytes per pixel, as in canvas ImageData. */
  data: Uint8Array | Uint8ClampedArray;
}

export function psnr(a: RgbaImage, b: RgbaImage): number {
  if (a.width !== b.width || a.height !== b.height) {
    throw new Error(
      `image sizes differ: ${a.width}x${a.height} vs ${b.width}x${b.height}`,
    );
  }
  const n = a.width * a.height;
  if (a.data.length < 4 * n || b.data.length < 4 * n) {
    throw new Error("pixel buffer shorter than width*height*4");
  }
  let sum = 0;
  for (let i = 0; i < 4 * n; i += 4) {
    for (let c = 0; c < 3; c++) {
      const d = a.data[i + c]! - b.data[i + c]!;
      sum += d * d;
    }
  }
  if (sum === 0) return PSNR_CAP;
  const mse = sum / (3 * n);
  return Math.min(PSNR_CAP, 10 * Math.log10((255 * 255) / mse));
}

export function formatBadge(db: number): string {
  return `${db.toFixed(1)} dB`;
}
