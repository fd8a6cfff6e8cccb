/**
 * Annotation controller: the DOM-free core of the client.
 *
 * Owns the view state, talks to the API, and exposes exactly the actions the
 * page binds to buttons and canvas clicks.  Geometry is limited to the one
 * documented grid transform; every coordinate shown or sent comes from the
 * server's metadata.
 */

import { AnnotationApi, ApiError, DeformReport, SlicePayload } from "./api.js";
import {
  ViewState,
  initialState,
  withOverlay,
  withServerPoints,
  withSlice,
} from "./state.js";
import { GridMeta, clickToPoint, insideGrid, pixelToIndex } from "./transform.js";

export interface ControllerEvents {
  onState?: (state: ViewState) => void;
  onSlice?: (axis: number, payload: SlicePayload) => void;
  onReport?: (report: DeformReport) => void;
  onNotice?: (kind: "info" | "error", message: string) => void;
}

export class AnnotationController {
  state!: ViewState;

  constructor(
    private api: AnnotationApi,
    private events: ControllerEvents = {},
  ) {}

  private emitState() {
    this.events.onState?.(this.state);
  }

  async open(volume: ArrayBuffer | Uint8Array): Promise<string> {
    const meta = await this.api.createSession(volume);
    const grid: GridMeta = {
      dims: meta.dims, spacing: meta.spacing, origin: meta.origin,
    };
    // window comes from the first slice payload (volume-wide min-max)
    this.state = initialState(meta.id, grid, [0, 0]);
    this.state = withServerPoints(this.state, meta.points, meta.revision);
    this.emitState();
    await this.refreshSlices();
    return meta.id;
  }

  /** Click on a slice view: (axis, row, col) pixel -> one 3D point. */
  async placePoint(axis: number, row: number, col: number): Promise<boolean> {
    const sliceIndex = this.state.slices[axis];
    const idx = pixelToIndex(axis, sliceIndex, row, col);
    if (!insideGrid(this.state.meta, idx)) {
      this.events.onNotice?.("info", "click outside the image ignored");
      return false;
    }
    const point = clickToPoint(this.state.meta, axis, sliceIndex, row, col);
    try {
      await this.api.addPoints(this.state.sessionId, [point]);
    } catch (err) {
      if (err instanceof ApiError) {
        this.events.onNotice?.("error", err.message);
        return false;
      }
      throw err;
    }
    await this.syncPoints();
    return true;
  }

  async removePoint(pointId: number): Promise<void> {
    const out = await this.api.removePoint(this.state.sessionId, pointId);
    if (out.warning) {
      this.events.onNotice?.("info", out.warning);
    }
    await this.syncPoints();
  }

  async syncPoints(): Promise<void> {
    const meta = await this.api.getMeta(this.state.sessionId);
    this.state = withServerPoints(this.state, meta.points, meta.revision);
    this.emitState();
  }

  /** Deform with the current points, then refresh all three views. */
  async deformAndRefresh(overrides?: Record<string, number>):
      Promise<DeformReport | null> {
    try {
      const out = await this.api.deform(this.state.sessionId, overrides);
      this.state = { ...this.state, revision: out.revision };
      this.events.onReport?.(out.report);
      await this.refreshSlices();
      return out.report;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.events.onNotice?.("error", err.body.detail);
        return null;
      }
      throw err;
    }
  }

  async setSlice(axis: number, index: number): Promise<void> {
    this.state = withSlice(this.state, axis, index);
    this.emitState();
    await this.refreshSlice(axis);
  }

  async setOverlay(on: boolean): Promise<void> {
    this.state = withOverlay(this.state, on);
    this.emitState();
    await this.refreshSlices();
  }

  async refreshSlice(axis: number): Promise<SlicePayload> {
    const payload = await this.api.getSlice(
      this.state.sessionId, axis, this.state.slices[axis], this.state.overlayOn,
    );
    this.state = { ...this.state, window: payload.window, revision: payload.revision };
    if (payload.overlay?.stale) {
      this.events.onNotice?.("info", "overlay out of date: deform again");
    }
    this.events.onSlice?.(axis, payload);
    return payload;
  }

  async refreshSlices(): Promise<void> {
    for (const axis of [0, 1, 2]) {
      await this.refreshSlice(axis);
    }
  }

  exportBundle(): Promise<ArrayBuffer> {
    return this.api.exportBundle(this.state.sessionId);
  }

  meshObj(): Promise<ArrayBuffer> {
    return this.api.getMeshObj(this.state.sessionId);
  }
}
