/** Per-view polling loop. The next poll is scheduled only after the previous
 * one settles, so a view never has two requests in flight; errors mark the
 * view stale and polling continues. */

export type PollFn = () => Promise<void>;

export class Poller {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = true;
  private inFlight = false;
  stale = false;

  constructor(
    private fn: PollFn,
    private intervalMs: number,
    private onStateChange?: (stale: boolean) => void,
  ) {}

  start(): void {
    if (!this.stopped) return;
    this.stopped = false;
    void this.runOnce();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  /** One poll followed by scheduling the next; never overlaps itself. */
  async runOnce(): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    try {
      await this.fn();
      if (this.stale) {
        this.stale = false;
        this.onStateChange?.(false);
      }
    } catch {
      if (!this.stale) {
        this.stale = true;
        this.onStateChange?.(true);
      }
    } finally {
      this.inFlight = false;
      if (!this.stopped) {
        this.timer = setTimeout(() => void this.runOnce(), this.intervalMs);
      }
    }
  }
}
