/**
 * Run-length mask codec matching the server's slice overlay sidecar.
 *
 * Runs alternate background/foreground over the row-major flattened mask and
 * always start with a background run (possibly 0).
 */

/** Decode alternating run lengths into a flat 0/1 mask of length `size`. */
export function decodeRle(runs: number[], size: number): Uint8Array {
  const mask = new Uint8Array(size);
  let pos = 0;
  let val = 0;
  for (const run of runs) {
    if (run < 0 || pos + run > size) {
      throw new Error(`run-length data overruns mask: pos=${pos} run=${run} size=${size}`);
    }
    if (val === 1) {
      mask.fill(1, pos, pos + run);
    }
    pos += run;
    val ^= 1;
  }
  if (pos !== size) {
    throw new Error(`run-length data covers ${pos} of ${size} pixels`);
  }
  return mask;
}

/** Encode a flat 0/1 mask as alternating run lengths (background first). */
export function encodeRle(mask: Uint8Array | number[]): number[] {
  const runs: number[] = [];
  let val = 0;
  let run = 0;
  for (let i = 0; i < mask.length; i++) {
    const m = mask[i] ? 1 : 0;
    if (m === val) {
      run += 1;
    } else {
      runs.push(run);
      val = m;
      run = 1;
    }
  }
  if (mask.length > 0) {
    runs.push(run);
  }
  return runs;
}
