/**
 * Browser entry: three orthogonal slice canvases, click-to-annotate, deform
 * and export buttons.  Served by the annotation service's /ui route.
 */

import { AnnotationApi, SlicePayload } from "./api.js";
import { AnnotationController } from "./controller.js";
import { grayscaleToRgba, paintOverlay } from "./render.js";
import { pointToPixel, sliceAxes } from "./transform.js";

const AXIS_NAMES = ["axial (z)", "coronal (y)", "sagittal (x)"];
const SCALE = 4;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Record<string, string> = {}, parent?: HTMLElement,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    node.setAttribute(k, v);
  }
  parent?.appendChild(node);
  return node;
}

function setup() {
  const root = document.getElementById("app")!;
  const toolbar = el("div", { class: "toolbar" }, root);
  const fileInput = el("input", { type: "file" }, toolbar);
  const deformBtn = el("button", {}, toolbar);
  deformBtn.textContent = "deform";
  const overlayToggle = el("input", { type: "checkbox", checked: "1" }, toolbar);
  el("span", {}, toolbar).textContent = "overlay";
  const exportBtn = el("button", {}, toolbar);
  exportBtn.textContent = "export";
  const banner = el("div", { class: "banner" }, root);
  const report = el("div", { class: "report" }, root);

  const views = el("div", { class: "views" }, root);
  const canvases: HTMLCanvasElement[] = [];
  const sliders: HTMLInputElement[] = [];
  for (let axis = 0; axis < 3; axis++) {
    const panel = el("div", { class: "panel" }, views);
    el("div", {}, panel).textContent = AXIS_NAMES[axis];
    canvases.push(el("canvas", {}, panel));
    const slider = el("input", { type: "range", min: "0", value: "0" }, panel);
    sliders.push(slider);
  }

  const api = new AnnotationApi("");
  const lastPayload: (SlicePayload | null)[] = [null, null, null];

  const controller = new AnnotationController(api, {
    onSlice(axis, payload) {
      lastPayload[axis] = payload;
      drawSlice(axis, payload);
    },
    onNotice(kind, message) {
      banner.textContent = message;
      banner.className = `banner ${kind}`;
    },
    onReport(rep) {
      const res = rep.residuals[rep.residuals.length - 1];
      report.textContent =
        `deform: ${rep.iterations_used} iterations, residual ${res.toFixed(2)} mm`
        + (rep.converged ? "" : " (iteration cap)");
    },
  });

  function drawSlice(axis: number, payload: SlicePayload) {
    const canvas = canvases[axis];
    canvas.width = payload.width;
    canvas.height = payload.height;
    canvas.style.width = `${payload.width * SCALE}px`;
    canvas.style.height = `${payload.height * SCALE}px`;
    const rgba = grayscaleToRgba(payload.image_b64, payload.height, payload.width);
    if (payload.overlay && !payload.overlay.stale && payload.overlay.rle) {
      paintOverlay(rgba, payload.overlay.rle, payload.height, payload.width);
    }
    const ctx = canvas.getContext("2d")!;
    const pixels = new Uint8ClampedArray(rgba);  // pin to a plain ArrayBuffer
    ctx.putImageData(new ImageData(pixels, payload.width, payload.height), 0, 0);
    drawPointMarkers(axis, ctx);
  }

  function drawPointMarkers(axis: number, ctx: CanvasRenderingContext2D) {
    const state = controller.state;
    ctx.fillStyle = "#27e";
    for (const p of state.points) {
      const proj = pointToPixel(state.meta, axis, p.zyx);
      if (proj.slice === state.slices[axis]) {
        ctx.fillRect(proj.col - 1, proj.row - 1, 3, 3);
      }
    }
  }

  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    const sid = await controller.open(await file.arrayBuffer());
    banner.textContent = `session ${sid}`;
    for (let axis = 0; axis < 3; axis++) {
      sliders[axis].max = String(controller.state.meta.dims[axis] - 1);
      sliders[axis].value = String(controller.state.slices[axis]);
    }
  });

  for (let axis = 0; axis < 3; axis++) {
    canvases[axis].addEventListener("click", async (ev) => {
      const rect = canvases[axis].getBoundingClientRect();
      const col = Math.floor((ev.clientX - rect.left) / SCALE);
      const row = Math.floor((ev.clientY - rect.top) / SCALE);
      await controller.placePoint(axis, row, col);
      const payload = lastPayload[axis];
      if (payload) drawSlice(axis, payload);
    });
    sliders[axis].addEventListener("input", async () => {
      await controller.setSlice(axis, Number(sliders[axis].value));
    });
  }

  deformBtn.addEventListener("click", async () => {
    await controller.deformAndRefresh();
  });
  overlayToggle.addEventListener("change", async () => {
    await controller.setOverlay(overlayToggle.checked);
  });
  exportBtn.addEventListener("click", async () => {
    const bundle = await controller.exportBundle();
    const blob = new Blob([bundle], { type: "application/zip" });
    const a = el("a", { href: URL.createObjectURL(blob), download: "session.zip" });
    a.click();
  });
}

setup();
