// Per-control rate limiting for slider drags: at most one message per
// interval per key, with a trailing send so the final drag position always
// goes out.

export type CancelTimer = () => void;
export type Scheduler = (fn: () => void, delayMs: number) => CancelTimer;

const defaultScheduler: Scheduler = (fn, delay) => {
  const handle = setTimeout(fn, delay);
  return () => clearTimeout(handle);
};

export class CommandThrottle {
  private lastSent = new Map<string, number>();
  private trailing = new Map<string, { cancel: CancelTimer; fn: () => void }>();

  constructor(
    private intervalMs = 50, // <= 20 messages/s per control
    private now: () => number = () => Date.now(),
    private schedule: Scheduler = defaultScheduler,
  ) {}

  /** Run `fn` now if the key is cold, else coalesce into a trailing send. */
  submit(key: string, fn: () => void): boolean {
    const now = this.now();
    const last = this.lastSent.get(key);
    if (last === undefined || now - last >= this.intervalMs) {
      this.lastSent.set(key, now);
      fn();
      return true;
    }
    const existing = this.trailing.get(key);
    if (existing) {
      existing.fn = fn; // newest value wins
      return false;
    }
    const delay = this.intervalMs - (now - last);
    const entry = { cancel: () => {}, fn };
    entry.cancel = this.schedule(() => {
      this.trailing.delete(key);
      this.lastSent.set(key, this.now());
      entry.fn();
    }, delay);
    this.trailing.set(key, entry);
    return false;
  }

  cancelAll(): void {
    for (const entry of this.trailing.values()) entry.cancel();
    this.trailing.clear();
  }
}
