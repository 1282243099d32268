// Keyboard layer: a key press maps to one abstract action; the app
// decides what the action does against the store and the service.

export type UiAction =
  | { kind: "accept" }
  | { kind: "reject" }
  | { kind: "delete" }
  | { kind: "draw" }
  | { kind: "save" }
  | { kind: "setClass"; classId: number }
  | { kind: "nextImage" }
  | { kind: "prevImage" }
  | { kind: "nextAnnotation" }
  | { kind: "prevAnnotation" }
  | { kind: "cancel" };

export function actionForKey(key: string): UiAction | null {
  switch (key) {
    case "a":
    case "A":
      return { kind: "accept" };
    case "r":
    case "R":
      return { kind: "reject" };
    case "d":
    case "D":
      return { kind: "delete" };
    case "n":
    case "N":
      return { kind: "draw" };
    case " ":
      return { kind: "save" };
    case "ArrowRight":
      return { kind: "nextImage" };
    case "ArrowLeft":
      return { kind: "prevImage" };
    case "ArrowDown":
      return { kind: "nextAnnotation" };
    case "ArrowUp":
      return { kind: "prevAnnotation" };
    case "Escape":
      return { kind: "cancel" };
    default: {
      // digit k selects the k-th class (1-based, so "1" is class 0)
      if (key.length === 1 && key >= "1" && key <= "9") {
        return { kind: "setClass", classId: key.charCodeAt(0) - "1".charCodeAt(0) };
      }
      return null;
    }
  }
}
