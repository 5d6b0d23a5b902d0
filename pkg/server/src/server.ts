// HTTP surface for serving n-gram logprobs. Gate order is fixed: a missing
// model answers 503 on every route (loading wins over auth), then bearer
// auth, then body decode, then routing. Responses are JSON, gzipped when the
// client advertises gzip, and session state is token ids only.

import * as http from "node:http";
import * as zlib from "node:zlib";

import { batchLogprobs } from "./batch.js";
import { NgramModel } from "./ngram.js";
import { SessionStore } from "./sessions.js";

export interface ServerOptions {
  model: NgramModel | null;
  modelName: string;
  token?: string | null;
  idleTimeoutMs?: number;
}

export interface ServerState {
  model: NgramModel | null;
  modelName: string;
  token: string | null;
  sessions: SessionStore;
  inFlight: number;
  setModel(model: NgramModel): void;
}

interface Reply {
  status: number;
  payload: unknown;
}

function isJsonObject(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function readBody(req: http.IncomingMessage): Promise<Buffer> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    req.on("data", (c: Buffer) => chunks.push(c));
    req.on("end", () => resolve(Buffer.concat(chunks)));
    req.on("error", reject);
  });
}

function route(state: ServerState, method: string, path: string, body: unknown): Reply {
  const model = state.model;
  if (model === null) {
    throw new Error("routed without a model");
  }
  if (method === "GET" && path === "/v1/meta") {
    return {
      status: 200,
      payload: {
        model: state.modelName,
        vocab_size: model.vocabSize,
        bos_id: model.bosId,
        eos_id: model.eosId,
      },
    };
  }
  if (method === "GET" && path === "/v1/health") {
    // inFlight counts this probe too; peers waiting behind it are the queue.
    return {
      status: 200,
      payload: {
        status: "ok",
        model: state.modelName,
        queue_depth: Math.max(0, state.inFlight - 1),
      },
    };
  }
  if (method !== "POST") {
    return { status: 404, payload: { error: "no such route" } };
  }
  const obj = isJsonObject(body) ? body : {};
  if (path === "/v1/tokenize") {
    const text = obj.text;
    if (typeof text !== "string") {
      return { status: 422, payload: { error: "text must be a string" } };
    }
    return { status: 200, payload: { token_ids: model.tokenize(text) } };
  }
  if (path === "/v1/session") {
    if (obj.model !== undefined && obj.model !== null && obj.model !== state.modelName) {
      return { status: 422, payload: { error: "unknown model" } };
    }
    const text = obj.prompt_text;
    if (typeof text !== "string") {
      return { status: 422, payload: { error: "prompt_text must be a string" } };
    }
    const ids = model.tokenize(text);
    const sid = state.sessions.create(ids);
    return { status: 200, payload: { session_id: sid, prompt_token_ids: ids } };
  }
  if (path === "/v1/append") {
    const session = typeof obj.session_id === "string" ? state.sessions.get(obj.session_id) : undefined;
    if (!session) {
      return { status: 404, payload: { error: "unknown session" } };
    }
    const ids = obj.token_ids;
    const ok =
      Array.isArray(ids) &&
      ids.every((t) => Number.isInteger(t) && t >= 0 && t < model.vocabSize);
    if (!ok) {
      return { status: 422, payload: { error: "invalid token ids" } };
    }
    session.ids.push(...(ids as number[]));
    return { status: 200, payload: { ok: true } };
  }
  if (path === "/v1/logprobs") {
    const session = typeof obj.session_id === "string" ? state.sessions.get(obj.session_id) : undefined;
    if (!session) {
      return { status: 404, payload: { error: "unknown session" } };
    }
    const [result] = batchLogprobs(model, [{ tokenIds: session.ids }]);
    if (!result.ok) {
      return { status: 422, payload: { error: result.error } };
    }
    return {
      status: 200,
      payload: {
        vocab_size: model.vocabSize,
        logprobs: Array.from(result.logprobs),
      },
    };
  }
  return { status: 404, payload: { error: "no such route" } };
}

function send(req: http.IncomingMessage, res: http.ServerResponse, reply: Reply): void {
  let body = Buffer.from(JSON.stringify(reply.payload), "utf-8");
  const accepts = String(req.headers["accept-encoding"] ?? "");
  const headers: Record<string, string> = { "Content-Type": "application/json" };
  if (/\bgzip\b/.test(accepts)) {
    body = zlib.gzipSync(body);
    headers["Content-Encoding"] = "gzip";
  }
  headers["Content-Length"] = String(body.length);
  res.writeHead(reply.status, headers);
  res.end(body);
}

async function handle(state: ServerState, req: http.IncomingMessage, res: http.ServerResponse): Promise<void> {
  // drain the request before any early reply, or keep-alive sockets die mid-response
  const raw = await readBody(req);
  if (state.model === null) {
    send(req, res, { status: 503, payload: { error: "model loading" } });
    return;
  }
  if (state.token !== null && req.headers.authorization !== `Bearer ${state.token}`) {
    send(req, res, { status: 401, payload: { error: "unauthorized" } });
    return;
  }
  const method = req.method ?? "GET";
  const path = (req.url ?? "/").split("?")[0];
  let body: unknown = {};
  if (method === "POST") {
    try {
      const plain = req.headers["content-encoding"] === "gzip" ? zlib.gunzipSync(raw) : raw;
      body = plain.length ? JSON.parse(plain.toString("utf-8")) : {};
    } catch {
      send(req, res, { status: 422, payload: { error: "bad json" } });
      return;
    }
  }
  send(req, res, route(state, method, path, body));
}

export function createLogitsServer(opts: ServerOptions): { server: http.Server; state: ServerState } {
  const state: ServerState = {
    model: opts.model,
    modelName: opts.modelName,
    token: opts.token ?? null,
    sessions: new SessionStore(opts.idleTimeoutMs),
    inFlight: 0,
    setModel(model: NgramModel) {
      this.model = model;
    },
  };
  const server = http.createServer((req, res) => {
    state.inFlight += 1;
    let settled = false;
    const done = () => {
      if (!settled) {
        settled = true;
        state.inFlight -= 1;
      }
    };
    res.once("close", done);
    handle(state, req, res)
      .catch(() => {
        if (!res.headersSent) {
          send(req, res, { status: 500, payload: { error: "internal error" } });
        } else {
          res.destroy();
        }
      })
      .finally(done);
  });
  return { server, state };
}
