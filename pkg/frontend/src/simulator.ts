// Key-hold blink input: while the key is held the eye is closed, released
// means open, one sim_state message per frame period. The gateway does all
// interpretation; this only has to keep the cadence.

export type SendFn = (type: string, payload: unknown) => void;

export class KeySimulator {
  private held = false;
  private timer: ReturnType<typeof setInterval> | null = null;
  private counts = { open: 0, closed: 0 };

  constructor(
    private send: SendFn,
    private fps: number,
  ) {
    if (!(fps > 0)) throw new Error(`fps must be positive, got ${fps}`);
  }

  start(): void {
    if (this.timer) return;
    this.timer = setInterval(() => this.tick(), 1000 / this.fps);
  }

  stop(): void {
    if (this.timer) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  setHeld(held: boolean): void {
    this.held = held;
  }

  get running(): boolean {
    return this.timer !== null;
  }

  // Messages sent so far, by state. Lets a script pace itself on what was
  // actually sent instead of on wall time.
  get sent(): { open: number; closed: number } {
    return { ...this.counts };
  }

  private tick(): void {
    const state = this.held ? "closed" : "open";
    this.counts[state] += 1;
    this.send("sim_state", { state });
  }
}
