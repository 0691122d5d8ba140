/**
 * Grading prompt renderer.
 *
 * Layout: a grader framing sentence with an integer-only output
 * instruction, then labeled slots for the test item, the reference
 * answer, the shared grading criteria, the shared deduction rules, the
 * item-specific criteria, and finally the response under evaluation.
 * The shared criteria/deduction text is configuration, not code; the
 * defaults describe a generic 1..K helpfulness scale.
 */

import type { ScoreRequest } from "./protocol.js";

export interface CriteriaConfig {
  basicCriteria: string;
  basicDeductions: string;
}

export function defaultCriteria(nCategories: number): CriteriaConfig {
  const lines = [
    "1. Incorrect: does not follow the instructions or answers a different question.",
  ];
  if (nCategories >= 3) {
    lines.push("2. Incorrect but heading in the right direction: a partially sound approach with a wrong result.");
  }
  if (nCategories >= 4) {
    lines.push("3. Partially correct: addresses the majority of the instruction correctly.");
  }
  if (nCategories >= 5) {
    lines.push("4. Correct: answers the question correctly.");
  }
  lines.push(`${nCategories}. Helpful: answers correctly and anticipates follow-up needs.`);
  return {
    basicCriteria: lines.join("\n"),
    basicDeductions: [
      "- Unnatural wording (-1 point): awkward phrasing, repeated sentences, or abrupt language switches.",
      "- Partial hallucination (-1 point): statements partially inconsistent with the given facts.",
      "- Excessive refusal (score as 2 points): declines to answer a benign question.",
    ].join("\n"),
  };
}

/** Render the full grading prompt. Every provided slot appears exactly once. */
export function renderPrompt(request: ScoreRequest, criteria?: CriteriaConfig): string {
  const k = request.n_categories;
  const cfg = criteria ?? defaultCriteria(k);
  const parts = [
    `You are a grader. You will be given a test item, a reference answer, a grading rubric, and a response. ` +
      `Referencing the grading rubric and the reference answer, grade the response on a scale of 1 to ${k}, ` +
      `and output the number only.`,
    `Test Item: ${request.prompt ?? "(not provided)"}`,
    `Reference Answer: ${request.reference_answer ?? "(not provided)"}`,
    `Basic Grading Criteria\n${cfg.basicCriteria}`,
    `Basic Deductions: scores may be adjusted based on the following factors.\n${cfg.basicDeductions}`,
    `Item-Specific Grading Criteria: ${request.rubric ?? "(not provided)"}`,
    `Response: ${request.answer_text ?? ""}`,
  ];
  return parts.join("\n\n");
}
