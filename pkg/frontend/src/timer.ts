// Display-to-decision stopwatch on the monotonic clock.

export class DecisionTimer {
  private startedAt: number | null = null;

  constructor(private now: () => number = () => performance.now()) {}

  start(): void {
    this.startedAt = this.now();
  }

  elapsedSeconds(): number {
    if (this.startedAt === null) return 0;
    return Math.max(0, (this.now() - this.startedAt) / 1000);
  }
}
