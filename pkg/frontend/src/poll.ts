export const DEFAULT_POLL_MS = 2000;

export interface Poller {
  stop(): void;
}

/**
 * Run `tick` immediately and then on a fixed interval. Ticks never overlap:
 * the timer only fires the next tick after the previous promise settles,
 * so a slow gateway stretches the effective period instead of stacking
 * requests. Errors inside `tick` are its own business (the views fold them
 * into their state); the poller just keeps going.
 */
export function startPolling(
  tick: () => Promise<void>,
  intervalMs: number = DEFAULT_POLL_MS,
  schedule: (fn: () => void, ms: number) => unknown = (fn, ms) => setTimeout(fn, ms),
  cancel: (handle: unknown) => void = (handle) => clearTimeout(handle as number),
): Poller {
  let stopped = false;
  let handle: unknown = null;

  const run = (): void => {
    if (stopped) return;
    void tick()
      .catch(() => {
        // tick() is expected to swallow its own errors; this keeps an
        // unexpected throw from killing the loop.
      })
      .then(() => {
        if (!stopped) {
          handle = schedule(run, intervalMs);
        }
      });
  };

  run();
  return {
    stop(): void {
      stopped = true;
      if (handle !== null) cancel(handle);
    },
  };
}
