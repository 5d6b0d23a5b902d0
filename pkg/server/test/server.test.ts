// Transport-level behavior: gzip both ways, auth, the loading gate, session
// expiry, and the batch helper. Uses node:http directly where fetch would
// hide Content-Encoding by transparently decompressing.

import * as fs from "node:fs";
import * as http from "node:http";
import * as zlib from "node:zlib";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { batchLogprobs } from "../src/batch.js";
import { NgramModel } from "../src/ngram.js";
import { createLogitsServer } from "../src/server.js";
import type { ServerState } from "../src/server.js";
import { SessionStore } from "../src/sessions.js";

const fixtureUrl = new URL("../../protocol/fixture.rsang", import.meta.url);
const model = NgramModel.fromBuffer(fs.readFileSync(fixtureUrl));

interface RawResponse {
  status: number;
  headers: http.IncomingHttpHeaders;
  body: Buffer;
}

function rawRequest(
  port: number,
  method: string,
  path: string,
  headers: Record<string, string> = {},
  body?: Buffer,
): Promise<RawResponse> {
  return new Promise((resolve, reject) => {
    const req = http.request({ host: "127.0.0.1", port, method, path, headers }, (res) => {
      const chunks: Buffer[] = [];
      res.on("data", (c: Buffer) => chunks.push(c));
      res.on("end", () =>
        resolve({
          status: res.statusCode ?? 0,
          headers: res.headers,
          body: Buffer.concat(chunks),
        }),
      );
    });
    req.on("error", reject);
    if (body && body.length) req.write(body);
    req.end();
  });
}

interface Running {
  server: http.Server;
  state: ServerState;
  port: number;
}

async function start(opts: {
  model: NgramModel | null;
  token?: string | null;
  idleTimeoutMs?: number;
}): Promise<Running> {
  const { server, state } = createLogitsServer({ modelName: "fixture-v1", ...opts });
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const addr = server.address();
  if (typeof addr !== "object" || addr === null) throw new Error("no address");
  return { server, state, port: addr.port };
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

describe("content encoding", () => {
  let run: Running;
  beforeAll(async () => {
    run = await start({ model });
  });
  afterAll(() => run.server.close());

  it("gzips the response when the client asks for it", async () => {
    const res = await rawRequest(run.port, "GET", "/v1/meta", { "Accept-Encoding": "gzip" });
    expect(res.status).toBe(200);
    expect(res.headers["content-encoding"]).toBe("gzip");
    const payload = JSON.parse(zlib.gunzipSync(res.body).toString("utf-8"));
    expect(payload.model).toBe("fixture-v1");
    expect(payload.vocab_size).toBe(model.vocabSize);
  });

  it("stays uncompressed otherwise", async () => {
    const res = await rawRequest(run.port, "GET", "/v1/meta");
    expect(res.status).toBe(200);
    expect(res.headers["content-encoding"]).toBeUndefined();
    expect(JSON.parse(res.body.toString("utf-8")).model).toBe("fixture-v1");
  });

  it("accepts a gzipped request body", async () => {
    const body = zlib.gzipSync(Buffer.from(JSON.stringify({ text: "the cat" })));
    const res = await rawRequest(
      run.port,
      "POST",
      "/v1/tokenize",
      { "Content-Type": "application/json", "Content-Encoding": "gzip" },
      body,
    );
    expect(res.status).toBe(200);
    const payload = JSON.parse(res.body.toString("utf-8"));
    expect(payload.token_ids).toEqual(model.tokenize("the cat"));
  });

  it("rejects a corrupt gzipped body as bad json", async () => {
    const res = await rawRequest(
      run.port,
      "POST",
      "/v1/tokenize",
      { "Content-Type": "application/json", "Content-Encoding": "gzip" },
      Buffer.from("definitely not gzip"),
    );
    expect(res.status).toBe(422);
    expect(JSON.parse(res.body.toString("utf-8"))).toEqual({ error: "bad json" });
  });

  it("rejects malformed plain json", async () => {
    const res = await rawRequest(
      run.port,
      "POST",
      "/v1/tokenize",
      { "Content-Type": "application/json" },
      Buffer.from("{nope"),
    );
    expect(res.status).toBe(422);
    expect(JSON.parse(res.body.toString("utf-8"))).toEqual({ error: "bad json" });
  });
});

describe("routing", () => {
  let run: Running;
  beforeAll(async () => {
    run = await start({ model });
  });
  afterAll(() => run.server.close());

  it("404s unknown paths and wrong methods", async () => {
    for (const [method, path] of [
      ["GET", "/v1/nope"],
      ["GET", "/"],
      ["POST", "/v1/meta"],
      ["POST", "/v1/health"],
    ] as const) {
      const res = await rawRequest(run.port, method, path, {}, Buffer.alloc(0));
      expect(res.status).toBe(404);
      expect(JSON.parse(res.body.toString("utf-8"))).toEqual({ error: "no such route" });
    }
  });

  it("rejects fractional token ids on append", async () => {
    const opened = await rawRequest(
      run.port,
      "POST",
      "/v1/session",
      { "Content-Type": "application/json" },
      Buffer.from(JSON.stringify({ prompt_text: "the cat" })),
    );
    const sid = JSON.parse(opened.body.toString("utf-8")).session_id;
    const res = await rawRequest(
      run.port,
      "POST",
      "/v1/append",
      { "Content-Type": "application/json" },
      Buffer.from(JSON.stringify({ session_id: sid, token_ids: [1.5] })),
    );
    expect(res.status).toBe(422);
  });

  it("reports queue depth on health", async () => {
    const res = await rawRequest(run.port, "GET", "/v1/health");
    const payload = JSON.parse(res.body.toString("utf-8"));
    expect(typeof payload.queue_depth).toBe("number");
    expect(payload.queue_depth).toBe(0);
  });
});

describe("auth", () => {
  let run: Running;
  beforeAll(async () => {
    run = await start({ model, token: "sesame" });
  });
  afterAll(() => run.server.close());

  it("401s a missing or wrong bearer token", async () => {
    const missing = await rawRequest(run.port, "GET", "/v1/meta");
    expect(missing.status).toBe(401);
    expect(JSON.parse(missing.body.toString("utf-8"))).toEqual({ error: "unauthorized" });
    const wrong = await rawRequest(run.port, "GET", "/v1/meta", {
      Authorization: "Bearer nope",
    });
    expect(wrong.status).toBe(401);
  });

  it("admits the right token", async () => {
    const res = await rawRequest(run.port, "GET", "/v1/meta", {
      Authorization: "Bearer sesame",
    });
    expect(res.status).toBe(200);
  });
});

describe("loading gate", () => {
  it("503s every route until the model arrives, even unauthenticated", async () => {
    const run = await start({ model: null, token: "sesame" });
    try {
      for (const [method, path] of [
        ["GET", "/v1/meta"],
        ["GET", "/v1/health"],
        ["POST", "/v1/logprobs"],
      ] as const) {
        const body = method === "POST" ? Buffer.from("{}") : undefined;
        const res = await rawRequest(run.port, method, path, {}, body);
        expect(res.status).toBe(503);
        expect(JSON.parse(res.body.toString("utf-8"))).toEqual({ error: "model loading" });
      }
      run.state.setModel(model);
      const res = await rawRequest(run.port, "GET", "/v1/meta", {
        Authorization: "Bearer sesame",
      });
      expect(res.status).toBe(200);
    } finally {
      run.server.close();
    }
  });
});

describe("session lifecycle", () => {
  it("expires idle sessions", async () => {
    const run = await start({ model, idleTimeoutMs: 20 });
    try {
      const opened = await rawRequest(
        run.port,
        "POST",
        "/v1/session",
        { "Content-Type": "application/json" },
        Buffer.from(JSON.stringify({ prompt_text: "the cat" })),
      );
      const sid = JSON.parse(opened.body.toString("utf-8")).session_id;
      await sleep(60);
      const res = await rawRequest(
        run.port,
        "POST",
        "/v1/logprobs",
        { "Content-Type": "application/json" },
        Buffer.from(JSON.stringify({ session_id: sid })),
      );
      expect(res.status).toBe(404);
      expect(JSON.parse(res.body.toString("utf-8"))).toEqual({ error: "unknown session" });
    } finally {
      run.server.close();
    }
  });

  it("touching a session keeps it alive, sweep drops stale ones", () => {
    let t = 0;
    const store = new SessionStore(100, () => t);
    const id = store.create([1, 2]);
    t = 90;
    expect(store.get(id)).toBeDefined(); // touch resets the idle clock
    t = 180;
    expect(store.get(id)).toBeDefined();
    t = 400;
    expect(store.get(id)).toBeUndefined();
    expect(store.size).toBe(0);

    const ids = [store.create([]), store.create([]), store.create([])];
    t = 600;
    expect(store.sweep()).toBe(3);
    expect(store.size).toBe(0);
    expect(ids.every((i) => store.get(i) === undefined)).toBe(true);
  });
});

describe("batchLogprobs", () => {
  it("matches sequential single calls and keeps order", () => {
    const entries = [{ tokenIds: [3, 4] }, { tokenIds: [] }, { tokenIds: [0, 3] }];
    const batched = batchLogprobs(model, entries);
    expect(batched).toHaveLength(3);
    for (let i = 0; i < entries.length; i++) {
      const r = batched[i];
      expect(r.ok).toBe(true);
      if (r.ok) {
        expect(Array.from(r.logprobs)).toEqual(
          Array.from(model.nextLogprobs(entries[i].tokenIds)),
        );
      }
    }
  });

  it("fails bad entries without poisoning the rest", () => {
    const batched = batchLogprobs(model, [
      { tokenIds: [3] },
      { tokenIds: [model.vocabSize] },
      { tokenIds: [-1] },
      { tokenIds: [4] },
    ]);
    expect(batched.map((r) => r.ok)).toEqual([true, false, false, true]);
    const bad = batched[1];
    if (!bad.ok) expect(bad.error).toBe("invalid token ids");
  });
});
