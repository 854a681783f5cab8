/**
 * Deadline countdown driven by the server-supplied ISO deadline.
 *
 * The clock source is injectable so tests can steer time; the browser uses
 * Date.now. Expiry fires exactly once.
 */

export interface CountdownHandle {
  stop(): void;
}

export function remainingMs(deadlineIso: string, nowMs: number): number {
  return Date.parse(deadlineIso) - nowMs;
}

/** mm:ss, clamped at zero; hours roll into minutes (90:00 for 1.5h). */
export function formatRemaining(ms: number): string {
  const total = Math.max(0, Math.floor(ms / 1000));
  const minutes = Math.floor(total / 60);
  const seconds = total % 60;
  return `${String(minutes).padStart(2, '0')}:${String(seconds).padStart(2, '0')}`;
}

export function startCountdown(
  deadlineIso: string,
  onTick: (display: string, msLeft: number) => void,
  onExpire: () => void,
  options: {
    now?: () => number;
    setIntervalFn?: typeof setInterval;
    clearIntervalFn?: typeof clearInterval;
    periodMs?: number;
  } = {},
): CountdownHandle {
  const now = options.now ?? Date.now;
  const setIntervalFn = options.setIntervalFn ?? setInterval;
  const clearIntervalFn = options.clearIntervalFn ?? clearInterval;
  let expired = false;
  let timer: ReturnType<typeof setInterval> | null = null;

  const tick = () => {
    const left = remainingMs(deadlineIso, now());
    onTick(formatRemaining(left), left);
    if (left <= 0 && !expired) {
      expired = true;
      if (timer !== null) clearIntervalFn(timer);
      timer = null;
      onExpire();
    }
  };

  tick();
  if (!expired) {
    timer = setIntervalFn(tick, options.periodMs ?? 1000);
  }
  return {
    stop() {
      if (timer !== null) clearIntervalFn(timer);
      timer = null;
    },
  };
}
