/**
 * Grid geometry shared with the server.
 *
 * Volumes are indexed (i, j, k) over dims (D, H, W) with physical axes
 * (z, y, x) in mm; voxel (i, j, k) has its center at
 * origin + spacing * (i + 0.5, j + 0.5, k + 0.5).  All wire coordinates are
 * physical mm in (z, y, x) order; the client never invents geometry beyond
 * this one transform.
 */

export interface GridMeta {
  dims: [number, number, number];
  spacing: [number, number, number];
  origin: [number, number, number];
}

/** In-plane axes of a slice: [rowAxis, colAxis] for the given slice axis. */
export function sliceAxes(axis: number): [number, number] {
  if (axis === 0) return [1, 2];
  if (axis === 1) return [0, 2];
  if (axis === 2) return [0, 1];
  throw new Error(`axis must be 0, 1 or 2, got ${axis}`);
}

/** Voxel index triple addressed by a slice pixel (row, col). */
export function pixelToIndex(
  axis: number, sliceIndex: number, row: number, col: number,
): [number, number, number] {
  const idx: [number, number, number] = [0, 0, 0];
  const [rowAxis, colAxis] = sliceAxes(axis);
  idx[axis] = sliceIndex;
  idx[rowAxis] = row;
  idx[colAxis] = col;
  return idx;
}

/** Physical (z, y, x) mm center of a voxel index triple. */
export function indexToPoint(meta: GridMeta, idx: [number, number, number]):
    [number, number, number] {
  return [
    meta.origin[0] + meta.spacing[0] * (idx[0] + 0.5),
    meta.origin[1] + meta.spacing[1] * (idx[1] + 0.5),
    meta.origin[2] + meta.spacing[2] * (idx[2] + 0.5),
  ];
}

/** Physical mm point named by a click on a slice pixel. */
export function clickToPoint(
  meta: GridMeta, axis: number, sliceIndex: number, row: number, col: number,
): [number, number, number] {
  return indexToPoint(meta, pixelToIndex(axis, sliceIndex, row, col));
}

/** Projection of a physical point onto a slice view: [row, col] pixels,
 * plus the slice index the point belongs to on that axis. */
export function pointToPixel(
  meta: GridMeta, axis: number, point: [number, number, number],
): { slice: number; row: number; col: number } {
  const idx = point.map(
    (p, d) => Math.floor((p - meta.origin[d]) / meta.spacing[d]),
  ) as [number, number, number];
  const [rowAxis, colAxis] = sliceAxes(axis);
  return { slice: idx[axis], row: idx[rowAxis], col: idx[colAxis] };
}

/** Clamp a slice index into the valid range for its axis. */
export function clampSlice(meta: GridMeta, axis: number, index: number): number {
  return Math.min(Math.max(index, 0), meta.dims[axis] - 1);
}

export function insideGrid(meta: GridMeta, idx: [number, number, number]): boolean {
  return idx.every((v, d) => v >= 0 && v < meta.dims[d]);
}
