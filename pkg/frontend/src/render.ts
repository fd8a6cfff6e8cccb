/**
 * Canvas-free rendering cores.
 *
 * Everything here turns payload bytes into RGBA pixel buffers; the DOM layer
 * only blits them.  Keeping these pure makes the overlay-fidelity contract
 * testable without a browser: the painted pixels must equal the server's
 * run-length sidecar exactly.
 */

import { decodeRle } from "./rle.js";

export const OVERLAY_RGBA: [number, number, number, number] = [255, 64, 32, 255];

/** Base64 grayscale slice bytes -> opaque RGBA buffer (length h*w*4). */
export function grayscaleToRgba(b64: string, height: number, width: number):
    Uint8ClampedArray {
  const bytes = base64ToBytes(b64);
  if (bytes.length !== height * width) {
    throw new Error(`slice payload is ${bytes.length} bytes, expected ${height * width}`);
  }
  const out = new Uint8ClampedArray(height * width * 4);
  for (let i = 0; i < bytes.length; i++) {
    const v = bytes[i];
    const o = i * 4;
    out[o] = v;
    out[o + 1] = v;
    out[o + 2] = v;
    out[o + 3] = 255;
  }
  return out;
}

/** Paint the contour mask into an RGBA buffer (in place); returns the count
 * of painted pixels. */
export function paintOverlay(
  rgba: Uint8ClampedArray, runs: number[], height: number, width: number,
): number {
  const mask = decodeRle(runs, height * width);
  let painted = 0;
  for (let i = 0; i < mask.length; i++) {
    if (mask[i]) {
      const o = i * 4;
      rgba[o] = OVERLAY_RGBA[0];
      rgba[o + 1] = OVERLAY_RGBA[1];
      rgba[o + 2] = OVERLAY_RGBA[2];
      rgba[o + 3] = OVERLAY_RGBA[3];
      painted += 1;
    }
  }
  return painted;
}

/** Pixel indices whose color equals the overlay color. */
export function overlayPixels(rgba: Uint8ClampedArray): number[] {
  const out: number[] = [];
  for (let i = 0; i * 4 < rgba.length; i++) {
    const o = i * 4;
    if (
      rgba[o] === OVERLAY_RGBA[0]
      && rgba[o + 1] === OVERLAY_RGBA[1]
      && rgba[o + 2] === OVERLAY_RGBA[2]
      && rgba[o + 3] === OVERLAY_RGBA[3]
    ) {
      out.push(i);
    }
  }
  return out;
}

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) {
      out[i] = bin.charCodeAt(i);
    }
    return out;
  }
  return new Uint8Array(Buffer.from(b64, "base64"));
}
