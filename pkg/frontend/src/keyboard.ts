/** Keyboard-only review loop: 1-5 score the active aspect, a/r/f set the
 * verdict, arrows navigate, Enter submits, Tab cycles the active aspect. */

export type KeyAction =
  | { type: "score"; value: number }
  | { type: "verdict"; value: "accept" | "reject" | "fix" }
  | { type: "nav"; delta: -1 | 1 }
  | { type: "submit" }
  | { type: "cycle-aspect" }
  | null;

export function mapKey(key: string, inTextInput = false): KeyAction {
  if (inTextInput) {
    // typing a fixed answer: only Enter is intercepted
    return key === "Enter" ? { type: "submit" } : null;
  }
  if (key >= "1" && key <= "5") {
    return { type: "score", value: Number(key) };
  }
  switch (key) {
    case "a":
      return { type: "verdict", value: "accept" };
    case "r":
      return { type: "verdict", value: "reject" };
    case "f":
      return { type: "verdict", value: "fix" };
    case "ArrowRight":
      return { type: "nav", delta: 1 };
    case "ArrowLeft":
      return { type: "nav", delta: -1 };
    case "Enter":
      return { type: "submit" };
    case "Tab":
      return { type: "cycle-aspect" };
    default:
      return null;
  }
}
