import { beforeEach, describe, expect, it } from "vitest";
import { ReviewStore } from "../src/store.js";
import type { BoxRecord, LabelsDoc } from "../src/types.js";

function proposal(x1: number, y1: number, x2: number, y2: number, classId = 0): BoxRecord {
  return { class_id: classId, x1, y1, x2, y2, status: "proposed", source: "model" };
}

function docWith(...annotations: BoxRecord[]): LabelsDoc {
  return { revision: 3, annotations };
}

describe("ReviewStore", () => {
  let store: ReviewStore;

  beforeEach(() => {
    store = new ReviewStore();
    store.load("im0", 640, 480, docWith(proposal(10, 10, 100, 100), proposal(200, 50, 260, 120, 1)));
  });

  it("mirrors the loaded document and starts clean", () => {
    expect(store.imageId).toBe("im0");
    expect(store.revision).toBe(3);
    expect(store.annotations).toHaveLength(2);
    expect(store.selected).toBe(0);
    expect(store.dirty).toBe(false);
  });

  it("does not alias the loaded document", () => {
    const doc = docWith(proposal(0, 0, 5, 5));
    store.load("im1", 640, 480, doc);
    store.accept();
    expect(doc.annotations[0].status).toBe("proposed");
  });

  it("accept and reject update status and mark dirty", () => {
    store.accept();
    expect(store.annotations[0].status).toBe("accepted");
    expect(store.dirty).toBe(true);
    store.select(1);
    store.reject();
    expect(store.annotations[1].status).toBe("rejected");
  });

  it("selectNext wraps in both directions", () => {
    expect(store.selected).toBe(0);
    store.selectNext(-1);
    expect(store.selected).toBe(1);
    store.selectNext(1);
    expect(store.selected).toBe(0);
  });

  it("delete removes the record outright and fixes the selection", () => {
    store.select(1);
    store.deleteSelected();
    expect(store.annotations).toHaveLength(1);
    expect(store.selected).toBe(0);
    store.deleteSelected();
    expect(store.annotations).toHaveLength(0);
    expect(store.selected).toBeNull();
    expect(store.dirty).toBe(true);
  });

  it("setClass reassigns within range and marks model boxes corrected", () => {
    store.setClass(1, 2);
    expect(store.annotations[0].class_id).toBe(1);
    expect(store.annotations[0].status).toBe("corrected");
    expect(store.dirty).toBe(true);
  });

  it("setClass ignores out-of-range ids and no-op reassignment", () => {
    store.setClass(7, 2);
    expect(store.annotations[0].class_id).toBe(0);
    expect(store.dirty).toBe(false);
    store.setClass(0, 2);
    expect(store.annotations[0].status).toBe("proposed");
    expect(store.dirty).toBe(false);
  });

  it("addBox clamps, stores a human-accepted record, and selects it", () => {
    store.addBox({ x1: 700, y1: -20, x2: 500, y2: 90 }, 1);
    const added = store.annotations[2];
    expect(added.source).toBe("human");
    expect(added.status).toBe("accepted");
    expect(added.class_id).toBe(1);
    expect(added.x1).toBe(500);
    expect(added.x2).toBe(640);
    expect(added.y1).toBe(0);
    expect(added.y2).toBe(90);
    expect(store.selected).toBe(2);
    expect(store.dirty).toBe(true);
  });

  it("moveSelected never pushes a box outside the image", () => {
    store.moveSelected(-9999, 9999);
    const a = store.annotations[0];
    expect(a.x1).toBe(0);
    expect(a.y2).toBe(480);
    expect(a.x2 - a.x1).toBe(90);
    expect(a.y2 - a.y1).toBe(90);
    expect(a.status).toBe("corrected");
  });

  it("resizeSelected keeps a valid box for inverted drag input", () => {
    store.resizeSelected({ x1: 100, y1: 100, x2: 10, y2: 10 });
    const a = store.annotations[0];
    expect(a.x2).toBeGreaterThan(a.x1);
    expect(a.y2).toBeGreaterThan(a.y1);
  });

  it("editing a human box keeps it accepted instead of corrected", () => {
    store.addBox({ x1: 10, y1: 10, x2: 50, y2: 50 }, 0);
    store.moveSelected(5, 5);
    expect(store.annotations[2].status).toBe("accepted");
  });

  it("putBody carries the held revision and every record, rejected included", () => {
    store.reject();
    store.select(1);
    store.accept();
    const body = store.putBody();
    expect(body.revision).toBe(3);
    expect(body.annotations).toHaveLength(2);
    expect(body.annotations.map((a) => a.status)).toEqual(["rejected", "accepted"]);
  });

  it("markSaved adopts the new revision and clears the dirty flag", () => {
    store.accept();
    store.markSaved(4);
    expect(store.revision).toBe(4);
    expect(store.dirty).toBe(false);
  });

  it("no sequence of actions can produce an invalid box", () => {
    let state = 12345;
    const rand = () => {
      // LCG, keeps the fuzz deterministic
      state = (state * 1103515245 + 12345) % 2147483648;
      return state / 2147483648;
    };
    for (let i = 0; i < 500; i++) {
      const roll = rand();
      if (roll < 0.2) {
        store.addBox(
          { x1: rand() * 900 - 100, y1: rand() * 700 - 100, x2: rand() * 900 - 100, y2: rand() * 700 - 100 },
          0,
        );
      } else if (roll < 0.5) {
        store.moveSelected(rand() * 2000 - 1000, rand() * 2000 - 1000);
      } else if (roll < 0.8) {
        store.resizeSelected({
          x1: rand() * 900 - 100,
          y1: rand() * 700 - 100,
          x2: rand() * 900 - 100,
          y2: rand() * 700 - 100,
        });
      } else if (roll < 0.9) {
        store.deleteSelected();
      } else {
        store.selectNext(1);
      }
      for (const a of store.annotations) {
        expect(a.x2).toBeGreaterThan(a.x1);
        expect(a.y2).toBeGreaterThan(a.y1);
        expect(a.x1).toBeGreaterThanOrEqual(0);
        expect(a.y1).toBeGreaterThanOrEqual(0);
        expect(a.x2).toBeLessThanOrEqual(640);
        expect(a.y2).toBeLessThanOrEqual(480);
      }
    }
  });
});
