/**
 * Client view state: three orthogonal slice indices, the active axis, the
 * display window, the overlay toggle and the point list mirrored from the
 * server.  Pure update functions; the controller owns the single instance.
 */

import { GridMeta, clampSlice } from "./transform.js";
import { ServerPoint } from "./api.js";

export interface ViewState {
  sessionId: string;
  meta: GridMeta;
  slices: [number, number, number];
  activeAxis: number;
  window: [number, number];
  overlayOn: boolean;
  points: ServerPoint[];
  revision: number;
}

export function initialState(
  sessionId: string, meta: GridMeta, window: [number, number],
): ViewState {
  return {
    sessionId,
    meta,
    slices: [
      Math.floor(meta.dims[0] / 2),
      Math.floor(meta.dims[1] / 2),
      Math.floor(meta.dims[2] / 2),
    ],
    activeAxis: 0,
    window,
    overlayOn: true,
    points: [],
    revision: 0,
  };
}

export function withSlice(state: ViewState, axis: number, index: number): ViewState {
  const slices: [number, number, number] = [...state.slices];
  slices[axis] = clampSlice(state.meta, axis, index);
  return { ...state, slices, activeAxis: axis };
}

export function withOverlay(state: ViewState, on: boolean): ViewState {
  return { ...state, overlayOn: on };
}

export function withServerPoints(
  state: ViewState, points: ServerPoint[], revision: number,
): ViewState {
  return { ...state, points: [...points], revision };
}
