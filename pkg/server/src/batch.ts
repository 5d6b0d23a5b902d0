// Batched scoring used when embedding the server as a library. Not a wire
// endpoint: the HTTP surface stays single-session, and handlers call this
// with one entry. Results preserve input order and failures are per entry,
// so one bad request never poisons the rest of a batch.

import { NgramModel } from "./ngram.js";

export interface BatchEntry {
  tokenIds: readonly number[];
}

export type BatchResult =
  | { ok: true; logprobs: Float64Array }
  | { ok: false; error: string };

function validIds(model: NgramModel, ids: readonly number[]): boolean {
  return ids.every((t) => Number.isInteger(t) && t >= 0 && t < model.vocabSize);
}

export function batchLogprobs(
  model: NgramModel,
  entries: readonly BatchEntry[],
): BatchResult[] {
  return entries.map((entry) => {
    if (!Array.isArray(entry.tokenIds) || !validIds(model, entry.tokenIds)) {
      return { ok: false, error: "invalid token ids" };
    }
    return { ok: true, logprobs: model.nextLogprobs(entry.tokenIds) };
  });
}
