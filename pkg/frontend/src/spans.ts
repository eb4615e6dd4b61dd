// Sentence rendering with the four construction slots color-coded:
// verb green, direct object purple, preposition blue, prepositional
// object red (the dataset's presentation convention).

import type { Spans } from "./api.js";

export const SPAN_CLASSES: Record<string, string> = {
  verb: "span-verb",
  dobj: "span-dobj",
  prep: "span-prep",
  pobj: "span-pobj",
};

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

type Slice = { start: number; end: number; name: string };

export function renderSentence(text: string, spans: Spans): string {
  const slices: Slice[] = Object.entries(spans)
    .filter(([name]) => name in SPAN_CLASSES)
    .map(([name, [start, end]]) => ({ start, end, name }))
    .filter((s) => s.start >= 0 && s.end <= text.length && s.start < s.end)
    .sort((a, b) => a.start - b.start);

  const parts: string[] = [];
  let cursor = 0;
  for (const slice of slices) {
    if (slice.start < cursor) {
      continue; // overlapping span: keep the earlier one
    }
    parts.push(escapeHtml(text.slice(cursor, slice.start)));
    parts.push(
      `<mark class="${SPAN_CLASSES[slice.name]}">` +
        escapeHtml(text.slice(slice.start, slice.end)) +
        "</mark>",
    );
    cursor = slice.end;
  }
  parts.push(escapeHtml(text.slice(cursor)));
  return parts.join("");
}
