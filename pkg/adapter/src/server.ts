/**
 * Scorer service: reads one JSON request per line on stdin and writes
 * one JSON reply per line on stdout (or serves the same exchange over
 * HTTP POST). A malformed line gets an error reply and the process
 * stays up; requests are handled strictly in order.
 */

import { createInterface } from "node:readline";
import { createServer } from "node:http";
import type { ErrorResponse, ScoreRequest, ScoreResponse } from "./protocol.js";
import { asScoreRequest, parseFirstInteger } from "./protocol.js";
import { renderPrompt } from "./prompt.js";
import type { Model } from "./model.js";

const MAX_ATTEMPTS = 3;

export async function handleRequest(
  request: ScoreRequest,
  model: Model,
): Promise<ScoreResponse | ErrorResponse> {
  const prompt = renderPrompt(request);
  let lastRaw = "";
  for (let attempt = 0; attempt < MAX_ATTEMPTS; attempt++) {
    let raw: string;
    try {
      raw = await model.complete(prompt, request);
    } catch (err) {
      return {
        error: `model call failed: ${err instanceof Error ? err.message : String(err)}`,
        item_id: request.item_id,
        learner_id: request.learner_id,
      };
    }
    lastRaw = raw;
    const predicted = parseFirstInteger(raw, request.n_categories);
    if (predicted !== null) {
      return {
        item_id: request.item_id,
        learner_id: request.learner_id,
        predicted,
        raw_output: raw,
      };
    }
  }
  return {
    error: `no integer in model output after ${MAX_ATTEMPTS} attempts: ${JSON.stringify(lastRaw)}`,
    item_id: request.item_id,
    learner_id: request.learner_id,
  };
}

export async function handleLine(line: string, model: Model): Promise<string> {
  let request: ScoreRequest;
  try {
    request = asScoreRequest(JSON.parse(line));
  } catch (err) {
    const reply: ErrorResponse = {
      error: `bad request line: ${err instanceof Error ? err.message : String(err)}`,
    };
    return JSON.stringify(reply);
  }
  return JSON.stringify(await handleRequest(request, model));
}

export async function serveStdio(model: Model): Promise<void> {
  const rl = createInterface({ input: process.stdin, crlfDelay: Infinity });
  for await (const line of rl) {
    if (line.trim() === "") continue;
    process.stdout.write((await handleLine(line, model)) + "\n");
  }
}

export function serveHttp(model: Model, port: number): Promise<void> {
  const server = createServer((req, res) => {
    if (req.method !== "POST") {
      res.writeHead(405, { "content-type": "application/json" });
      res.end(JSON.stringify({ error: "POST only" }));
      return;
    }
    const chunks: Buffer[] = [];
    req.on("data", (chunk: Buffer) => chunks.push(chunk));
    req.on("end", () => {
      void (async () => {
        const body = Buffer.concat(chunks).toString("utf8");
        let request: ScoreRequest;
        try {
          request = asScoreRequest(JSON.parse(body));
        } catch (err) {
          res.writeHead(400, { "content-type": "application/json" });
          res.end(
            JSON.stringify({
              error: `bad request body: ${err instanceof Error ? err.message : String(err)}`,
            }),
          );
          return;
        }
        const reply = await handleRequest(request, model);
        res.writeHead("error" in reply ? 502 : 200, { "content-type": "application/json" });
        res.end(JSON.stringify(reply));
      })();
    });
  });
  return new Promise((resolve) => {
    server.listen(port, () => {
      process.stderr.write(`listening on port ${port}\n`);
    });
    server.on("close", resolve);
  });
}
