// Keyboard shortcuts: y = positive, n = negative, s = skip, u = undo last.

export type Action = "label-true" | "label-false" | "skip" | "undo";

const BINDINGS: Record<string, Action> = {
  y: "label-true",
  n: "label-false",
  s: "skip",
  u: "undo",
};

export function keyToAction(key: string): Action | null {
  return BINDINGS[key.toLowerCase()] ?? null;
}
