// Word n-gram model: parses the RSANG1 binary container (docs/model_format.md)
// and serves next-token log-probability vectors with Jelinek-Mercer smoothing.
// The arithmetic mirrors the reference implementation operation for operation
// so independently computed vectors agree to float64 round-off.

export const BOS = 0;
export const EOS = 1;
export const UNK = 2;

const MAGIC = "RSANG1";

// word-lower-punct-split: maximal letter/digit/underscore runs, every other
// non-space character as its own token
const TOKEN_RE = /[\p{L}\p{N}_]+|[^\s\p{L}\p{N}_]/gu;

export class ModelFormatError extends Error {}

export function wordTokenize(text: string): string[] {
  return text.toLowerCase().match(TOKEN_RE) ?? [];
}

interface SuccessorTable {
  ids: Uint32Array;
  counts: Float64Array;
  total: number;
}

class Reader {
  private off = 0;

  constructor(private readonly buf: Buffer) {}

  private need(n: number): void {
    if (this.off + n > this.buf.length) {
      throw new ModelFormatError("truncated model file");
    }
  }

  u32(): number {
    this.need(4);
    const v = this.buf.readUInt32LE(this.off);
    this.off += 4;
    return v;
  }

  f64(): number {
    this.need(8);
    const v = this.buf.readDoubleLE(this.off);
    this.off += 8;
    return v;
  }

  u64(): number {
    this.need(8);
    const v = this.buf.readBigUInt64LE(this.off);
    this.off += 8;
    if (v > BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new ModelFormatError("count exceeds safe integer range");
    }
    return Number(v);
  }

  utf8(n: number): string {
    this.need(n);
    const v = this.buf.toString("utf8", this.off, this.off + n);
    this.off += n;
    return v;
  }

  ascii(n: number): string {
    this.need(n);
    const v = this.buf.toString("ascii", this.off, this.off + n);
    this.off += n;
    return v;
  }

  atEnd(): boolean {
    return this.off === this.buf.length;
  }
}

export class NgramModel {
  readonly order: number;
  readonly lam: number;
  readonly delta: number;
  readonly idToWord: readonly string[];

  private readonly wordToId: Map<string, number>;
  private readonly tables: Map<string, SuccessorTable>;
  private readonly unigram: Float64Array;

  private constructor(
    order: number,
    lam: number,
    delta: number,
    idToWord: string[],
    tables: Map<string, SuccessorTable>,
  ) {
    if (order < 1) throw new ModelFormatError("order must be >= 1");
    if (!(lam > 0 && lam < 1)) throw new ModelFormatError("lam must be in (0, 1)");
    if (!(delta > 0)) throw new ModelFormatError("delta must be > 0");
    this.order = order;
    this.lam = lam;
    this.delta = delta;
    this.idToWord = idToWord;
    this.tables = tables;
    this.wordToId = new Map(idToWord.map((w, i) => [w, i]));
    // unigram base: plain additive-delta (an interpolation level with lam = 1)
    this.unigram = this.blend("", null, 1.0);
  }

  get vocabSize(): number {
    return this.idToWord.length;
  }

  get bosId(): number {
    return BOS;
  }

  get eosId(): number {
    return EOS;
  }

  static fromBuffer(buf: Buffer): NgramModel {
    const r = new Reader(buf);
    if (r.ascii(MAGIC.length) !== MAGIC) {
      throw new ModelFormatError("not a recognized model file (bad magic)");
    }
    const order = r.u32();
    const lam = r.f64();
    const delta = r.f64();
    const vocabSize = r.u32();
    const idToWord: string[] = [];
    for (let i = 0; i < vocabSize; i++) {
      idToWord.push(r.utf8(r.u32()));
    }
    const nCtx = r.u32();
    const tables = new Map<string, SuccessorTable>();
    for (let c = 0; c < nCtx; c++) {
      const clen = r.u32();
      const ctx: number[] = [];
      for (let k = 0; k < clen; k++) {
        const tok = r.u32();
        if (tok >= vocabSize) throw new ModelFormatError("context token out of range");
        ctx.push(tok);
      }
      const nSucc = r.u32();
      const ids = new Uint32Array(nSucc);
      const counts = new Float64Array(nSucc);
      let total = 0;
      for (let s = 0; s < nSucc; s++) {
        const tok = r.u32();
        if (tok >= vocabSize) throw new ModelFormatError("successor token out of range");
        ids[s] = tok;
        counts[s] = r.u64();
        total += counts[s];
      }
      tables.set(ctx.join(","), { ids, counts, total });
    }
    if (!r.atEnd()) {
      throw new ModelFormatError("trailing bytes after model payload");
    }
    return new NgramModel(order, lam, delta, idToWord, tables);
  }

  tokenize(text: string): number[] {
    return wordTokenize(text).map((w) => this.wordToId.get(w) ?? UNK);
  }

  tokenText(id: number): string {
    return this.idToWord[id];
  }

  /** Natural-log next-token distribution given the full preceding token ids. */
  nextLogprobs(context: readonly number[]): Float64Array {
    const hlen = this.order > 1 ? Math.min(context.length, this.order - 1) : 0;
    const history = context.slice(context.length - hlen);
    let probs = this.unigram;
    for (let k = 1; k <= history.length; k++) {
      const suffix = history.slice(history.length - k);
      probs = this.blend(suffix.join(","), probs, this.lam);
    }
    const v = this.vocabSize;
    const logp = new Float64Array(v);
    let max = -Infinity;
    for (let i = 0; i < v; i++) {
      logp[i] = Math.log(probs[i]);
      if (logp[i] > max) max = logp[i];
    }
    let sum = 0;
    for (let i = 0; i < v; i++) sum += Math.exp(logp[i] - max);
    const lse = max + Math.log(sum);
    for (let i = 0; i < v; i++) logp[i] -= lse;
    return logp;
  }

  // one interpolation level: lam * P_add(.|h) + (1 - lam) * prev
  private blend(key: string, prev: Float64Array | null, lam: number): Float64Array {
    const v = this.idToWord.length;
    const table = this.tables.get(key);
    const total = table ? table.total : 0;
    const denom = total + this.delta * v;
    const base = lam * (this.delta / denom);
    const out = new Float64Array(v);
    if (prev) {
      const keep = 1.0 - lam;
      for (let i = 0; i < v; i++) out[i] = base + keep * prev[i];
    } else {
      out.fill(base);
    }
    if (table) {
      for (let j = 0; j < table.ids.length; j++) {
        out[table.ids[j]] += lam * (table.counts[j] / denom);
      }
    }
    return out;
  }
}
