/**
 * Typed client for the /v1 annotation API.
 *
 * Every call goes through one promise queue so mutating requests never race
 * each other (the server serializes writers per session; the client simply
 * never has more than one request outstanding).
 */

export interface ServerPoint {
  id: number;
  zyx: [number, number, number];
}

export interface SessionMeta {
  id: string;
  revision: number;
  dims: [number, number, number];
  spacing: [number, number, number];
  origin: [number, number, number];
  dtype: string;
  points: ServerPoint[];
  deformed_revision: number;
  raster_revision: number;
  raster_stale: boolean;
  last_report: DeformReport | null;
}

export interface DeformReport {
  iterations_used: number;
  final_mean_displacement: number;
  residuals: number[];
  converged: boolean;
}

export interface OverlayPayload {
  stale: boolean;
  revision: number | null;
  rle: number[] | null;
}

export interface SlicePayload {
  axis: number;
  index: number;
  height: number;
  width: number;
  window: [number, number];
  revision: number;
  image_b64: string;
  overlay: OverlayPayload | null;
}

export interface ApiErrorBody {
  error: string;
  detail: string;
}

export class ApiError extends Error {
  constructor(public status: number, public body: ApiErrorBody) {
    super(`${body.error}: ${body.detail}`);
  }
}

export class AnnotationApi {
  private queue: Promise<unknown> = Promise.resolve();

  constructor(public baseUrl: string) {}

  private enqueue<T>(job: () => Promise<T>): Promise<T> {
    const next = this.queue.then(job, job);
    this.queue = next.catch(() => undefined);
    return next;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    return this.enqueue(async () => {
      const resp = await fetch(`${this.baseUrl}${path}`, init);
      if (!resp.ok) {
        let body: ApiErrorBody;
        try {
          body = (await resp.json()) as ApiErrorBody;
        } catch {
          body = { error: `http ${resp.status}`, detail: resp.statusText };
        }
        throw new ApiError(resp.status, body);
      }
      const ctype = resp.headers.get("content-type") ?? "";
      if (ctype.includes("application/json")) {
        return (await resp.json()) as T;
      }
      return (await resp.arrayBuffer()) as unknown as T;
    });
  }

  createSession(volume: ArrayBuffer | Uint8Array): Promise<SessionMeta> {
    const body = volume instanceof Uint8Array
      ? volume.slice().buffer as ArrayBuffer
      : volume;
    return this.request("/v1/sessions", {
      method: "POST",
      body,
      headers: { "content-type": "application/octet-stream" },
    });
  }

  getMeta(sessionId: string): Promise<SessionMeta> {
    return this.request(`/v1/sessions/${sessionId}`);
  }

  addPoints(sessionId: string, points: [number, number, number][]):
      Promise<{ revision: number; point_ids: number[] }> {
    return this.request(`/v1/sessions/${sessionId}/points`, {
      method: "POST",
      body: JSON.stringify({ points }),
      headers: { "content-type": "application/json" },
    });
  }

  removePoint(sessionId: string, pointId: number):
      Promise<{ revision: number; warning?: string }> {
    return this.request(`/v1/sessions/${sessionId}/points/${pointId}`, {
      method: "DELETE",
    });
  }

  deform(sessionId: string, overrides?: Record<string, number>):
      Promise<{ revision: number; report: DeformReport }> {
    return this.request(`/v1/sessions/${sessionId}/deform`, {
      method: "POST",
      body: overrides ? JSON.stringify(overrides) : undefined,
      headers: { "content-type": "application/json" },
    });
  }

  getSlice(sessionId: string, axis: number, index: number, overlay: boolean):
      Promise<SlicePayload> {
    const q = `axis=${axis}&index=${index}&overlay=${overlay}`;
    return this.request(`/v1/sessions/${sessionId}/slice?${q}`);
  }

  getMeshObj(sessionId: string): Promise<ArrayBuffer> {
    return this.request(`/v1/sessions/${sessionId}/mesh`);
  }

  exportBundle(sessionId: string): Promise<ArrayBuffer> {
    return this.request(`/v1/sessions/${sessionId}/export`);
  }
}
