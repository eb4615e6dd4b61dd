import { describe, expect, it } from "vitest";

import {
  formatPrecision,
  renderConflicts,
  renderCostPanel,
  renderQuotaTable,
} from "../src/dashboard.js";

describe("cost panel", () => {
  it("shows em-dash placeholders with zero labels", () => {
    const html = renderCostPanel({
      labeled: 0,
      positives: 0,
      c_hr: "0.2",
      precision: null,
      projected_cost_per_tp: null,
    });
    expect(html).toContain("—");
    expect(html).not.toContain("NaN");
  });

  it("shows precision and projection when present", () => {
    const html = renderCostPanel({
      labeled: 10,
      positives: 7,
      c_hr: "0.2",
      precision: "0.7000",
      projected_cost_per_tp: "0.285714",
    });
    expect(html).toContain("0.7000");
    expect(html).toContain("$0.285714");
  });
});

describe("formatPrecision", () => {
  it("is a placeholder at zero and arithmetic otherwise", () => {
    expect(formatPrecision(0, 0)).toBe("—");
    expect(formatPrecision(7, 10)).toBe("0.700");
  });
});

describe("quota table", () => {
  it("renders one row per verb with caps", () => {
    const html = renderQuotaTable({
      candidates: 9,
      labeled: 3,
      positives: 2,
      negatives: 1,
      verbs: [
        {
          verb: "put",
          positive: 2,
          negative: 1,
          cap: 5,
          closed: false,
          prepositions: { positive: ["on"], negative: ["in"] },
        },
      ],
    });
    expect(html).toContain("<td>put</td>");
    expect(html).toContain("<td>2/5</td>");
    expect(html).toContain("<td>open</td>");
  });
});

describe("conflicts", () => {
  it("lists quad keys", () => {
    const html = renderConflicts([
      { quad: ["sneeze", "foam", "off", "cappuccino"], positive_ids: ["a"], negative_ids: ["b"] },
    ]);
    expect(html).toContain("sneeze / foam / off / cappuccino");
  });

  it("says so when empty", () => {
    expect(renderConflicts([])).toContain("No conflicting");
  });
});
