// CLI entrypoint. Binds the port immediately and answers 503 until the model
// file finishes loading, so orchestrators can health-poll from the start.
// Auth token comes from RSA_REMOTE_TOKEN when set.

import * as fs from "node:fs/promises";
import * as path from "node:path";
import { parseArgs } from "node:util";

import { NgramModel } from "./ngram.js";
import { createLogitsServer } from "./server.js";

async function main(): Promise<void> {
  const { values } = parseArgs({
    options: {
      model: { type: "string" },
      port: { type: "string", default: "8337" },
      name: { type: "string" },
      "idle-timeout-ms": { type: "string" },
    },
  });
  if (!values.model) {
    throw new Error("--model <path.rsang> is required");
  }
  const port = Number(values.port);
  if (!Number.isInteger(port) || port < 0 || port > 65535) {
    throw new Error(`invalid --port: ${values.port}`);
  }
  const idleRaw = values["idle-timeout-ms"];
  const idleTimeoutMs = idleRaw === undefined ? undefined : Number(idleRaw);
  if (idleTimeoutMs !== undefined && !(Number.isFinite(idleTimeoutMs) && idleTimeoutMs > 0)) {
    throw new Error(`invalid --idle-timeout-ms: ${idleRaw}`);
  }
  const modelPath = values.model;
  const modelName = values.name ?? path.basename(modelPath, path.extname(modelPath));
  const token = process.env.RSA_REMOTE_TOKEN ?? null;

  const { server, state } = createLogitsServer({
    model: null,
    modelName,
    token,
    idleTimeoutMs,
  });
  server.listen(port, () => {
    const addr = server.address();
    const bound = typeof addr === "object" && addr !== null ? addr.port : port;
    process.stderr.write(`listening on :${bound} (model loading)\n`);
  });

  const buf = await fs.readFile(modelPath);
  state.setModel(NgramModel.fromBuffer(buf));
  process.stderr.write(
    `serving ${modelName} (vocab ${state.model!.vocabSize}, auth ${token ? "on" : "off"})\n`,
  );
}

main().catch((err) => {
  process.stderr.write(`error: ${err instanceof Error ? err.message : String(err)}\n`);
  process.exitCode = 1;
});
