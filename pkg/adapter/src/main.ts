/**
 * Entry point. Flags:
 *   --stub <fixtures.json>   answer from a fixtures file instead of an LLM
 *   --transport stdio|http   wire transport (default stdio)
 *   --port <n>               port for the http transport (default 8787)
 */

import { pathToFileURL } from "node:url";
import { HttpModel, configFromEnv, type Model } from "./model.js";
import { StubModel, loadFixtures } from "./stub.js";
import { serveHttp, serveStdio } from "./server.js";

function usage(): never {
  process.stderr.write(
    "usage: main.js [--stub fixtures.json] [--transport stdio|http] [--port n]\n",
  );
  process.exit(1);
}

export function parseArgs(argv: string[]): { stub: string | null; transport: string; port: number } {
  const opts = { stub: null as string | null, transport: "stdio", port: 8787 };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (flag === "--stub" && value !== undefined) {
      opts.stub = value;
      i++;
    } else if (flag === "--transport" && (value === "stdio" || value === "http")) {
      opts.transport = value;
      i++;
    } else if (flag === "--port" && value !== undefined && /^\d+$/.test(value)) {
      opts.port = parseInt(value, 10);
      i++;
    } else {
      usage();
    }
  }
  return opts;
}

async function main(): Promise<void> {
  const opts = parseArgs(process.argv.slice(2));
  const model: Model = opts.stub
    ? new StubModel(loadFixtures(opts.stub))
    : new HttpModel(configFromEnv());
  if (opts.transport === "http") {
    await serveHttp(model, opts.port);
  } else {
    await serveStdio(model);
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href;

if (invokedDirectly) {
  main().catch((err) => {
    process.stderr.write(`fatal: ${err instanceof Error ? err.message : String(err)}\n`);
    process.exit(1);
  });
}
