/**
 * Text-completion backends. The real backend posts the rendered grading
 * prompt to an OpenAI-style chat endpoint configured entirely through
 * the environment; temperature is pinned to 0 so grading is as
 * repeatable as the provider allows.
 */

import type { ScoreRequest } from "./protocol.js";

export interface Model {
  complete(prompt: string, request: ScoreRequest): Promise<string>;
}

export interface HttpModelConfig {
  apiUrl: string;
  apiKey: string | null;
  modelName: string;
  timeoutMs: number;
}

export function configFromEnv(env: NodeJS.ProcessEnv = process.env): HttpModelConfig {
  const apiUrl = env.GRADER_API_URL;
  if (!apiUrl) {
    throw new Error("GRADER_API_URL is not set; use --stub for offline runs");
  }
  return {
    apiUrl,
    apiKey: env.GRADER_API_KEY ?? null,
    modelName: env.GRADER_MODEL ?? "gpt-4o-mini",
    timeoutMs: Number(env.GRADER_TIMEOUT_MS ?? 30000),
  };
}

export class HttpModel implements Model {
  constructor(private config: HttpModelConfig) {}

  async complete(prompt: string, _request: ScoreRequest): Promise<string> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (this.config.apiKey) {
      headers.authorization = `Bearer ${this.config.apiKey}`;
    }
    const body = JSON.stringify({
      model: this.config.modelName,
      temperature: 0,
      messages: [{ role: "user", content: prompt }],
    });
    const response = await fetch(this.config.apiUrl, {
      method: "POST",
      headers,
      body,
      signal: AbortSignal.timeout(this.config.timeoutMs),
    });
    if (!response.ok) {
      throw new Error(`model endpoint returned ${response.status}`);
    }
    const payload: unknown = await response.json();
    const text = extractText(payload);
    if (text === null) {
      throw new Error("model response had no text content");
    }
    return text;
  }
}

/** Pull the completion text out of a chat- or completion-shaped payload. */
export function extractText(payload: unknown): string | null {
  if (typeof payload !== "object" || payload === null) return null;
  const obj = payload as Record<string, unknown>;
  const choices = obj.choices;
  if (Array.isArray(choices) && choices.length > 0) {
    const first = choices[0] as Record<string, unknown>;
    const message = first.message as Record<string, unknown> | undefined;
    if (message && typeof message.content === "string") return message.content;
    if (typeof first.text === "string") return first.text;
  }
  if (typeof obj.output_text === "string") return obj.output_text;
  return null;
}
