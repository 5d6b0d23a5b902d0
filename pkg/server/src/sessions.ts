// Session bookkeeping. A session is nothing but token ids plus a last-used
// stamp; expiry is enforced lazily on access so tests need no timers.

import { randomUUID } from "node:crypto";

export interface Session {
  ids: number[];
  lastUsed: number;
}

export class SessionStore {
  private readonly sessions = new Map<string, Session>();

  constructor(
    private readonly idleTimeoutMs: number = 30 * 60 * 1000,
    private readonly now: () => number = Date.now,
  ) {}

  create(promptIds: readonly number[]): string {
    const id = randomUUID();
    this.sessions.set(id, { ids: [...promptIds], lastUsed: this.now() });
    return id;
  }

  /** Returns the live session and refreshes its stamp; expired ones vanish. */
  get(id: string): Session | undefined {
    const s = this.sessions.get(id);
    if (!s) return undefined;
    const t = this.now();
    if (t - s.lastUsed > this.idleTimeoutMs) {
      this.sessions.delete(id);
      return undefined;
    }
    s.lastUsed = t;
    return s;
  }

  /** Drops every expired session; returns how many were removed. */
  sweep(): number {
    const t = this.now();
    let dropped = 0;
    for (const [id, s] of this.sessions) {
      if (t - s.lastUsed > this.idleTimeoutMs) {
        this.sessions.delete(id);
        dropped++;
      }
    }
    return dropped;
  }

  get size(): number {
    return this.sessions.size;
  }
}
