/**
 * Wire types for the scorer protocol: one JSON object per line on stdin,
 * one JSON object per line on stdout (or one HTTP POST body per call).
 */

export interface ScoreRequest {
  item_id: string;
  learner_id: string;
  n_categories: number;
  answer_text: string | null;
  prompt: string | null;
  rubric: string | null;
  reference_answer: string | null;
}

export interface ScoreResponse {
  item_id: string;
  learner_id: string;
  predicted: number;
  raw_output: string;
}

export interface ErrorResponse {
  error: string;
  item_id?: string;
  learner_id?: string;
}

/** Validate a decoded JSON value as a ScoreRequest; throws on misshape. */
export function asScoreRequest(value: unknown): ScoreRequest {
  if (typeof value !== "object" || value === null) {
    throw new Error("request must be a JSON object");
  }
  const obj = value as Record<string, unknown>;
  if (typeof obj.item_id !== "string" || typeof obj.learner_id !== "string") {
    throw new Error("request needs string item_id and learner_id");
  }
  const k = obj.n_categories;
  if (typeof k !== "number" || !Number.isInteger(k) || k < 2) {
    throw new Error("request needs integer n_categories >= 2");
  }
  const opt = (name: string): string | null => {
    const v = obj[name];
    if (v === undefined || v === null) return null;
    if (typeof v !== "string") throw new Error(`${name} must be a string or null`);
    return v;
  };
  return {
    item_id: obj.item_id,
    learner_id: obj.learner_id,
    n_categories: k,
    answer_text: opt("answer_text"),
    prompt: opt("prompt"),
    rubric: opt("rubric"),
    reference_answer: opt("reference_answer"),
  };
}

/**
 * Pull the first integer token out of model output and clamp it to [1, K].
 * Returns null when no integer appears at all.
 */
export function parseFirstInteger(text: string, nCategories: number): number | null {
  const match = text.match(/-?\d+/);
  if (!match) return null;
  const value = parseInt(match[0], 10);
  return Math.min(Math.max(value, 1), nCategories);
}
