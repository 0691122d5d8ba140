import { describe, expect, it } from "vitest";
import { defaultCriteria, renderPrompt } from "../src/prompt.js";
import type { ScoreRequest } from "../src/protocol.js";

const request: ScoreRequest = {
  item_id: "0",
  learner_id: "7",
  n_categories: 5,
  answer_text: "THE-RESPONSE-TEXT",
  prompt: "THE-ITEM-TEXT",
  rubric: "THE-RUBRIC-TEXT",
  reference_answer: "THE-REFERENCE-TEXT",
};

function countOccurrences(haystack: string, needle: string): number {
  return haystack.split(needle).length - 1;
}

describe("renderPrompt", () => {
  it("includes every provided slot exactly once", () => {
    const text = renderPrompt(request);
    for (const needle of [
      "THE-ITEM-TEXT",
      "THE-REFERENCE-TEXT",
      "THE-RUBRIC-TEXT",
      "THE-RESPONSE-TEXT",
    ]) {
      expect(countOccurrences(text, needle)).toBe(1);
    }
  });

  it("labels each section exactly once", () => {
    const text = renderPrompt(request);
    for (const label of [
      "Test Item:",
      "Reference Answer:",
      "Basic Grading Criteria",
      "Basic Deductions:",
      "Item-Specific Grading Criteria:",
      "Response:",
    ]) {
      expect(countOccurrences(text, label)).toBe(1);
    }
  });

  it("states the integer-only scale instruction with the request's K", () => {
    const text = renderPrompt(request);
    expect(text).toContain("on a scale of 1 to 5");
    expect(text).toContain("output the number only");
    const k3 = renderPrompt({ ...request, n_categories: 3 });
    expect(k3).toContain("on a scale of 1 to 3");
  });

  it("falls back to placeholders for missing optional slots", () => {
    const bare = renderPrompt({
      ...request,
      prompt: null,
      rubric: null,
      reference_answer: null,
    });
    expect(countOccurrences(bare, "(not provided)")).toBe(3);
  });

  it("accepts custom criteria text verbatim", () => {
    const text = renderPrompt(request, {
      basicCriteria: "CUSTOM-LEVELS",
      basicDeductions: "CUSTOM-DEDUCTIONS",
    });
    expect(text).toContain("CUSTOM-LEVELS");
    expect(text).toContain("CUSTOM-DEDUCTIONS");
  });

  it("default criteria span the full scale for any K", () => {
    for (const k of [2, 3, 4, 5, 7]) {
      const cfg = defaultCriteria(k);
      expect(cfg.basicCriteria).toContain("1. ");
      expect(cfg.basicCriteria).toContain(`${k}. `);
    }
  });
});
