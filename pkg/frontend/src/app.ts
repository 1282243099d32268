// Canvas review tool: one image at a time, model proposals drawn over
// the pixels, keyboard-first accept/reject/correct workflow.

import { getLabels, getManifest, getProgress, imageUrl, markComplete, putLabels } from "./api.js";
import { actionForKey, type UiAction } from "./keyboard.js";
import { ReviewStore } from "./store.js";
import {
  fitImage,
  panBy,
  toImage,
  toScreen,
  zoomAt,
  type Rect,
  type Transform,
} from "./transform.js";
import type { BoxRecord, Manifest, Status } from "./types.js";

const STATUS_COLOR: Record<Status, string> = {
  proposed: "#e8a33d",
  accepted: "#37b24d",
  corrected: "#339af0",
  rejected: "#f03e3e",
};

const HANDLE_PX = 5;

type DragState =
  | { mode: "none" }
  | { mode: "pan"; lastX: number; lastY: number }
  | { mode: "move"; lastX: number; lastY: number }
  | { mode: "resize"; corner: 0 | 1 | 2 | 3 }
  | { mode: "draw"; startX: number; startY: number; currentX: number; currentY: number };

class App {
  store = new ReviewStore();
  transform: Transform = { zoom: 1, panX: 0, panY: 0 };
  manifest: Manifest = { classes: [], images: [] };
  imageIndex = -1;
  image: HTMLImageElement | null = null;
  drawMode = false;
  drawClass = 0;
  drag: DragState = { mode: "none" };

  canvas = document.getElementById("canvas") as HTMLCanvasElement;
  ctx = this.canvas.getContext("2d") as CanvasRenderingContext2D;
  imageList = document.getElementById("image-list") as HTMLUListElement;
  progressFill = document.getElementById("progress-fill") as HTMLDivElement;
  progressText = document.getElementById("progress-text") as HTMLSpanElement;
  titleEl = document.getElementById("image-title") as HTMLSpanElement;
  dirtyEl = document.getElementById("dirty-flag") as HTMLSpanElement;
  classSelect = document.getElementById("class-select") as HTMLSelectElement;
  conflictDialog = document.getElementById("conflict-dialog") as HTMLDialogElement;
  toastEl = document.getElementById("toast") as HTMLDivElement;

  async start(): Promise<void> {
    this.manifest = await getManifest();
    this.classSelect.innerHTML = "";
    this.manifest.classes.forEach((name, i) => {
      const opt = document.createElement("option");
      opt.value = String(i);
      opt.textContent = `${i + 1}: ${name}`;
      this.classSelect.appendChild(opt);
    });
    this.renderImageList();
    await this.refreshProgress();
    this.bindEvents();
    if (this.manifest.images.length > 0) await this.open(0);
  }

  // ---- data flow -----------------------------------------------------------

  async open(index: number): Promise<void> {
    if (index < 0 || index >= this.manifest.images.length) return;
    if (this.store.dirty && !confirm("Discard unsaved edits?")) return;
    this.imageIndex = index;
    const meta = this.manifest.images[index];
    const doc = await getLabels(meta.id);
    this.store.load(meta.id, meta.width, meta.height, doc);
    this.image = await this.loadImage(imageUrl(meta.id));
    this.transform = fitImage(meta.width, meta.height, this.canvas.width, this.canvas.height);
    this.drawMode = false;
    this.titleEl.textContent = `${meta.id} (${meta.width}x${meta.height})`;
    this.renderImageList();
    this.draw();
  }

  loadImage(url: string): Promise<HTMLImageElement> {
    return new Promise((resolve, reject) => {
      const img = new Image();
      img.onload = () => resolve(img);
      img.onerror = () => reject(new Error(`failed to load ${url}`));
      img.src = url;
    });
  }

  async save(): Promise<boolean> {
    const result = await putLabels(this.store.imageId, this.store.putBody());
    if (result.kind === "saved") {
      this.store.markSaved(result.revision);
      this.toast(`saved, revision ${result.revision}`);
      this.draw();
      return true;
    }
    if (result.kind === "conflict") {
      // someone else saved first; never overwrite silently
      this.conflictDialog.showModal();
      return false;
    }
    this.toast(`save failed: ${result.message} (edits kept locally)`);
    return false;
  }

  async reloadFromServer(): Promise<void> {
    const meta = this.manifest.images[this.imageIndex];
    const doc = await getLabels(meta.id);
    this.store.load(meta.id, meta.width, meta.height, doc);
    this.draw();
    this.toast(`reloaded at revision ${doc.revision}`);
  }

  async refreshProgress(): Promise<void> {
    const p = await getProgress();
    const pct = p.total === 0 ? 0 : Math.round((100 * p.done) / p.total);
    this.progressFill.style.width = `${pct}%`;
    this.progressText.textContent = `${p.done} / ${p.total} reviewed`;
  }

  // ---- actions -------------------------------------------------------------

  async dispatch(action: UiAction): Promise<void> {
    switch (action.kind) {
      case "accept":
        this.store.accept();
        break;
      case "reject":
        this.store.reject();
        break;
      case "delete":
        this.store.deleteSelected();
        break;
      case "draw":
        this.drawMode = !this.drawMode;
        break;
      case "setClass":
        this.store.setClass(action.classId, this.manifest.classes.length);
        break;
      case "save": {
        const saved = await this.save();
        if (saved) await this.open(this.imageIndex + 1);
        return;
      }
      case "nextImage":
        await this.open(this.imageIndex + 1);
        return;
      case "prevImage":
        await this.open(this.imageIndex - 1);
        return;
      case "nextAnnotation":
        this.store.selectNext(1);
        break;
      case "prevAnnotation":
        this.store.selectNext(-1);
        break;
      case "cancel":
        this.drawMode = false;
        this.store.select(null);
        break;
    }
    this.draw();
  }

  // ---- events --------------------------------------------------------------

  bindEvents(): void {
    document.addEventListener("keydown", (ev) => {
      if (this.conflictDialog.open) return;
      const target = ev.target as HTMLElement;
      if (target.tagName === "SELECT" || target.tagName === "INPUT") return;
      const action = actionForKey(ev.key);
      if (!action) return;
      ev.preventDefault();
      void this.dispatch(action);
    });

    this.canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      const factor = ev.deltaY < 0 ? 1.15 : 1 / 1.15;
      const pos = this.canvasPos(ev);
      this.transform = zoomAt(this.transform, pos.x, pos.y, factor);
      this.draw();
    });

    this.canvas.addEventListener("pointerdown", (ev) => {
      this.canvas.setPointerCapture(ev.pointerId);
      const pos = this.canvasPos(ev);
      const pt = toImage(this.transform, pos.x, pos.y);
      if (this.drawMode) {
        this.drag = { mode: "draw", startX: pt.x, startY: pt.y, currentX: pt.x, currentY: pt.y };
        return;
      }
      const corner = this.hitHandle(pos.x, pos.y);
      if (corner !== null) {
        this.drag = { mode: "resize", corner };
        return;
      }
      const hit = this.hitAnnotation(pt.x, pt.y);
      if (hit !== null) {
        this.store.select(hit);
        this.drag = { mode: "move", lastX: pt.x, lastY: pt.y };
        this.draw();
        return;
      }
      this.store.select(null);
      this.drag = { mode: "pan", lastX: pos.x, lastY: pos.y };
      this.draw();
    });

    this.canvas.addEventListener("pointermove", (ev) => {
      const pos = this.canvasPos(ev);
      const pt = toImage(this.transform, pos.x, pos.y);
      switch (this.drag.mode) {
        case "none":
          return;
        case "pan":
          this.transform = panBy(this.transform, pos.x - this.drag.lastX, pos.y - this.drag.lastY);
          this.drag = { mode: "pan", lastX: pos.x, lastY: pos.y };
          break;
        case "move":
          this.store.moveSelected(pt.x - this.drag.lastX, pt.y - this.drag.lastY);
          this.drag = { mode: "move", lastX: pt.x, lastY: pt.y };
          break;
        case "resize": {
          const rec = this.store.current();
          if (rec) this.store.resizeSelected(cornerResize(rec, this.drag.corner, pt.x, pt.y));
          break;
        }
        case "draw":
          this.drag = { ...this.drag, currentX: pt.x, currentY: pt.y };
          break;
      }
      this.draw();
    });

    this.canvas.addEventListener("pointerup", () => {
      if (this.drag.mode === "draw") {
        const d = this.drag;
        const rect: Rect = { x1: d.startX, y1: d.startY, x2: d.currentX, y2: d.currentY };
        if (Math.abs(rect.x2 - rect.x1) > 2 && Math.abs(rect.y2 - rect.y1) > 2) {
          this.store.addBox(rect, this.drawClass);
        }
        this.drawMode = false;
      }
      this.drag = { mode: "none" };
      this.draw();
    });

    this.classSelect.addEventListener("change", () => {
      this.drawClass = Number(this.classSelect.value);
      this.store.setClass(this.drawClass, this.manifest.classes.length);
      this.draw();
    });

    (document.getElementById("save-btn") as HTMLButtonElement).addEventListener("click", () =>
      void this.save(),
    );
    (document.getElementById("done-btn") as HTMLButtonElement).addEventListener(
      "click",
      async () => {
        if (this.store.dirty && !(await this.save())) return;
        await markComplete(this.store.imageId);
        this.manifest.images[this.imageIndex].done = true;
        this.renderImageList();
        await this.refreshProgress();
        this.toast("marked done");
      },
    );
    (document.getElementById("draw-btn") as HTMLButtonElement).addEventListener("click", () => {
      this.drawMode = !this.drawMode;
      this.draw();
    });
    (document.getElementById("reload-btn") as HTMLButtonElement).addEventListener(
      "click",
      async () => {
        this.conflictDialog.close();
        await this.reloadFromServer();
      },
    );
    (document.getElementById("dismiss-btn") as HTMLButtonElement).addEventListener("click", () => {
      this.conflictDialog.close();
      this.toast("conflict unresolved; reload before saving");
    });
  }

  canvasPos(ev: MouseEvent): { x: number; y: number } {
    const rect = this.canvas.getBoundingClientRect();
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  }

  // topmost annotation containing the image-space point, rejected ones skipped
  hitAnnotation(x: number, y: number): number | null {
    for (let i = this.store.annotations.length - 1; i >= 0; i--) {
      const a = this.store.annotations[i];
      if (a.status === "rejected") continue;
      if (x >= a.x1 && x <= a.x2 && y >= a.y1 && y <= a.y2) return i;
    }
    return null;
  }

  hitHandle(sx: number, sy: number): 0 | 1 | 2 | 3 | null {
    const rec = this.store.current();
    if (!rec) return null;
    const corners = cornerPoints(rec).map((c) => toScreen(this.transform, c.x, c.y));
    for (let i = 0; i < 4; i++) {
      if (Math.abs(corners[i].x - sx) <= HANDLE_PX + 2 && Math.abs(corners[i].y - sy) <= HANDLE_PX + 2) {
        return i as 0 | 1 | 2 | 3;
      }
    }
    return null;
  }

  // ---- rendering -----------------------------------------------------------

  renderImageList(): void {
    this.imageList.innerHTML = "";
    this.manifest.images.forEach((im, i) => {
      const li = document.createElement("li");
      li.textContent = `${im.done ? "✓ " : ""}${im.id} (${im.annotations})`;
      li.className = i === this.imageIndex ? "active" : "";
      li.addEventListener("click", () => void this.open(i));
      this.imageList.appendChild(li);
    });
  }

  draw(): void {
    const { ctx, canvas } = this;
    ctx.fillStyle = "#181a1f";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    if (!this.image) return;

    const origin = toScreen(this.transform, 0, 0);
    ctx.imageSmoothingEnabled = this.transform.zoom < 2;
    ctx.drawImage(
      this.image,
      origin.x,
      origin.y,
      this.image.naturalWidth * this.transform.zoom,
      this.image.naturalHeight * this.transform.zoom,
    );

    this.store.annotations.forEach((a, i) => this.drawBox(a, i === this.store.selected));

    if (this.drag.mode === "draw") {
      const d = this.drag;
      const p1 = toScreen(this.transform, Math.min(d.startX, d.currentX), Math.min(d.startY, d.currentY));
      const p2 = toScreen(this.transform, Math.max(d.startX, d.currentX), Math.max(d.startY, d.currentY));
      ctx.setLineDash([6, 4]);
      ctx.strokeStyle = "#ffffff";
      ctx.lineWidth = 1;
      ctx.strokeRect(p1.x, p1.y, p2.x - p1.x, p2.y - p1.y);
      ctx.setLineDash([]);
    }

    this.dirtyEl.textContent = this.store.dirty ? "unsaved edits" : "";
    this.canvas.style.cursor = this.drawMode ? "crosshair" : "default";
  }

  drawBox(a: BoxRecord, isSelected: boolean): void {
    const { ctx } = this;
    const p1 = toScreen(this.transform, a.x1, a.y1);
    const p2 = toScreen(this.transform, a.x2, a.y2);
    ctx.strokeStyle = STATUS_COLOR[a.status];
    ctx.lineWidth = isSelected ? 3 : 1.5;
    ctx.setLineDash(a.status === "rejected" ? [4, 4] : []);
    ctx.strokeRect(p1.x, p1.y, p2.x - p1.x, p2.y - p1.y);
    ctx.setLineDash([]);

    const name = this.manifest.classes[a.class_id] ?? String(a.class_id);
    ctx.font = "12px system-ui, sans-serif";
    ctx.fillStyle = STATUS_COLOR[a.status];
    ctx.fillText(`${name}${a.source === "human" ? " ✎" : ""}`, p1.x + 2, p1.y - 4);

    if (isSelected) {
      ctx.fillStyle = "#ffffff";
      for (const c of cornerPoints(a)) {
        const s = toScreen(this.transform, c.x, c.y);
        ctx.fillRect(s.x - HANDLE_PX, s.y - HANDLE_PX, 2 * HANDLE_PX, 2 * HANDLE_PX);
      }
    }
  }

  toast(message: string): void {
    this.toastEl.textContent = message;
    this.toastEl.classList.add("visible");
    window.setTimeout(() => this.toastEl.classList.remove("visible"),  2500);
  }
}

function cornerPoints(r: Rect): Array<{ x: number; y: number }> {
  return [
    { x: r.x1, y: r.y1 },
    { x: r.x2, y: r.y1 },
    { x: r.x2, y: r.y2 },
    { x: r.x1, y: r.y2 },
  ];
}

/** New rectangle from dragging one corner to (x, y); the opposite corner holds. */
function cornerResize(r: Rect, corner: 0 | 1 | 2 | 3, x: number, y: number): Rect {
  switch (corner) {
    case 0:
      return { x1: x, y1: y, x2: r.x2, y2: r.y2 };
    case 1:
      return { x1: r.x1, y1: y, x2: x, y2: r.y2 };
    case 2:
      return { x1: r.x1, y1: r.y1, x2: x, y2: y };
    case 3:
      return { x1: x, y1: r.y1, x2: r.x2, y2: y };
  }
}

void new App().start();
