/** Fixed-interval polling with an in-flight guard: if a tick is still
 * running when the next interval fires, that interval is skipped
 * rather than stacking requests behind a slow server.
 */

export const DEFAULT_POLL_MS = 2000;

export interface Poller {
  start(): void;
  stop(): void;
  readonly active: boolean;
}

export function createPoller(
  tick: () => Promise<void>,
  intervalMs: number = DEFAULT_POLL_MS,
): Poller {
  let timer: ReturnType<typeof setInterval> | null = null;
  let running = false;

  const fire = () => {
    if (running) return;
    running = true;
    tick()
      .catch(() => {
        // the tick surfaces its own errors in the UI; swallowing here
        // just keeps a rejection from killing the interval
      })
      .finally(() => {
        running = false;
      });
  };

  return {
    start() {
      if (timer !== null) return;
      fire();
      timer = setInterval(fire, intervalMs);
    },
    stop() {
      if (timer !== null) {
        clearInterval(timer);
        timer = null;
      }
    },
    get active() {
      return timer !== null;
    },
  };
}
