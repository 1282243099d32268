// Local editing state for one image: annotations, selection, dirty flag.
// Edits are optimistic; nothing reaches the server until save() builds a
// PUT body carrying the revision this copy was loaded from.

import { clampRect, shiftRectInside, type Rect } from "./transform.js";
import type { BoxRecord, LabelsDoc, Status } from "./types.js";

export class ReviewStore {
  imageId = "";
  imageWidth = 0;
  imageHeight = 0;
  revision = 0;
  annotations: BoxRecord[] = [];
  selected: number | null = null;
  dirty = false;

  load(imageId: string, width: number, height: number, doc: LabelsDoc): void {
    this.imageId = imageId;
    this.imageWidth = width;
    this.imageHeight = height;
    this.revision = doc.revision;
    this.annotations = doc.annotations.map((a) => ({ ...a }));
    this.selected = this.annotations.length > 0 ? 0 : null;
    this.dirty = false;
  }

  select(index: number | null): void {
    if (index !== null && (index < 0 || index >= this.annotations.length)) return;
    this.selected = index;
  }

  selectNext(step: 1 | -1): void {
    const n = this.annotations.length;
    if (n === 0) return;
    const base = this.selected === null ? (step === 1 ? -1 : 0) : this.selected;
    this.selected = (base + step + n) % n;
  }

  current(): BoxRecord | null {
    return this.selected === null ? null : this.annotations[this.selected];
  }

  private setStatus(status: Status): void {
    const rec = this.current();
    if (!rec) return;
    rec.status = status;
    this.dirty = true;
  }

  accept(): void {
    this.setStatus("accepted");
  }

  reject(): void {
    this.setStatus("rejected");
  }

  /** Remove the record outright (unlike reject, which keeps it on file). */
  deleteSelected(): void {
    if (this.selected === null) return;
    this.annotations.splice(this.selected, 1);
    this.dirty = true;
    if (this.annotations.length === 0) this.selected = null;
    else if (this.selected >= this.annotations.length) this.selected = this.annotations.length - 1;
  }

  // geometry or class edits turn an untouched model proposal into a
  // correction; human boxes and explicit accept/reject keep their status
  private markEdited(rec: BoxRecord): void {
    if (rec.source === "model") rec.status = "corrected";
    this.dirty = true;
  }

  setClass(classId: number, numClasses: number): void {
    const rec = this.current();
    if (!rec || classId < 0 || classId >= numClasses) return;
    if (rec.class_id === classId) return;
    rec.class_id = classId;
    this.markEdited(rec);
  }

  addBox(r: Rect, classId: number): void {
    const c = clampRect(r, this.imageWidth, this.imageHeight);
    this.annotations.push({
      class_id: classId,
      ...c,
      status: "accepted",
      source: "human",
    });
    this.selected = this.annotations.length - 1;
    this.dirty = true;
  }

  moveSelected(dx: number, dy: number): void {
    const rec = this.current();
    if (!rec) return;
    const moved = shiftRectInside(rec, dx, dy, this.imageWidth, this.imageHeight);
    rec.x1 = moved.x1;
    rec.y1 = moved.y1;
    rec.x2 = moved.x2;
    rec.y2 = moved.y2;
    this.markEdited(rec);
  }

  resizeSelected(r: Rect): void {
    const rec = this.current();
    if (!rec) return;
    const c = clampRect(r, this.imageWidth, this.imageHeight);
    rec.x1 = c.x1;
    rec.y1 = c.y1;
    rec.x2 = c.x2;
    rec.y2 = c.y2;
    this.markEdited(rec);
  }

  /** Full-list replace body, rejected records included. */
  putBody(): LabelsDoc {
    return {
      revision: this.revision,
      annotations: this.annotations.map((a) => ({ ...a })),
    };
  }

  markSaved(newRevision: number): void {
    this.revision = newRevision;
    this.dirty = false;
  }
}
