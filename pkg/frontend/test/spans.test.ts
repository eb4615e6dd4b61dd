import { describe, expect, it } from "vitest";

import { escapeHtml, renderSentence } from "../src/spans.js";

const TEXT = "She sneezed the foam off her cappuccino.";
const SPANS = {
  verb: [4, 11] as [number, number],
  dobj: [12, 20] as [number, number],
  prep: [21, 24] as [number, number],
  pobj: [25, 39] as [number, number],
};

describe("renderSentence", () => {
  it("wraps each slot in its colored mark", () => {
    const html = renderSentence(TEXT, SPANS);
    expect(html).toContain('<mark class="span-verb">sneezed</mark>');
    expect(html).toContain('<mark class="span-dobj">the foam</mark>');
    expect(html).toContain('<mark class="span-prep">off</mark>');
    expect(html).toContain('<mark class="span-pobj">her cappuccino</mark>');
    expect(html.startsWith("She ")).toBe(true);
    expect(html.endsWith(".")).toBe(true);
  });

  it("escapes html in the sentence text", () => {
    const html = renderSentence("a <b> c", { verb: [0, 1] });
    expect(html).toContain("&lt;b&gt;");
  });

  it("drops out-of-bounds spans", () => {
    const html = renderSentence("short", { verb: [0, 99] });
    expect(html).toBe("short");
  });

  it("keeps the earlier of two overlapping spans", () => {
    const html = renderSentence("abcdef", {
      verb: [0, 4] as [number, number],
      dobj: [2, 6] as [number, number],
    });
    expect(html).toContain('<mark class="span-verb">abcd</mark>');
    expect(html).not.toContain("span-dobj");
  });
});

describe("escapeHtml", () => {
  it("escapes the dangerous four", () => {
    expect(escapeHtml('<a href="x">&</a>')).toBe(
      "&lt;a href=&quot;x&quot;&gt;&amp;&lt;/a&gt;",
    );
  });
});
