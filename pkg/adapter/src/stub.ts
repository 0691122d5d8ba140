/**
 * File-backed stand-in for the LLM: answers come from a fixtures file
 * keyed by "item_id:learner_id", so pipelines can be exercised
 * deterministically and offline.
 */

import { readFileSync } from "node:fs";
import type { ScoreRequest } from "./protocol.js";
import type { Model } from "./model.js";

export interface StubFixtures {
  scores: Record<string, number | string>;
  default?: number | string;
}

export function loadFixtures(path: string): StubFixtures {
  const parsed: unknown = JSON.parse(readFileSync(path, "utf8"));
  if (typeof parsed !== "object" || parsed === null) {
    throw new Error(`fixtures file ${path} must hold a JSON object`);
  }
  const obj = parsed as Record<string, unknown>;
  if (typeof obj.scores !== "object" || obj.scores === null) {
    throw new Error(`fixtures file ${path} needs a "scores" object`);
  }
  return obj as unknown as StubFixtures;
}

export class StubModel implements Model {
  constructor(private fixtures: StubFixtures) {}

  async complete(_prompt: string, request: ScoreRequest): Promise<string> {
    const key = `${request.item_id}:${request.learner_id}`;
    const hit = this.fixtures.scores[key] ?? this.fixtures.default;
    if (hit === undefined) {
      throw new Error(`no fixture for cell ${key} and no default`);
    }
    return String(hit);
  }
}
