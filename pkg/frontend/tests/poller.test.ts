import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { createPoller } from "../src/poller.js";

beforeEach(() => {
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
});

describe("createPoller", () => {
  it("ticks immediately on start, then on each interval", async () => {
    const tick = vi.fn(async () => {});
    const poller = createPoller(tick, 2000);
    poller.start();
    expect(tick).toHaveBeenCalledTimes(1);
    await vi.advanceTimersByTimeAsync(2000);
    expect(tick).toHaveBeenCalledTimes(2);
    await vi.advanceTimersByTimeAsync(4000);
    expect(tick).toHaveBeenCalledTimes(4);
    poller.stop();
  });

  it("skips intervals while a tick is still in flight", async () => {
    let release: () => void = () => {};
    const tick = vi.fn(
      () =>
        new Promise<void>((resolve) => {
          release = resolve;
        }),
    );
    const poller = createPoller(tick, 1000);
    poller.start();
    expect(tick).toHaveBeenCalledTimes(1);
    await vi.advanceTimersByTimeAsync(3500);
    expect(tick).toHaveBeenCalledTimes(1);
    release();
    await vi.advanceTimersByTimeAsync(1000);
    expect(tick).toHaveBeenCalledTimes(2);
    release();
    poller.stop();
  });

  it("stops cleanly and can be restarted", async () => {
    const tick = vi.fn(async () => {});
    const poller = createPoller(tick, 1000);
    poller.start();
    expect(poller.active).toBe(true);
    poller.stop();
    expect(poller.active).toBe(false);
    await vi.advanceTimersByTimeAsync(5000);
    expect(tick).toHaveBeenCalledTimes(1);
    poller.start();
    expect(tick).toHaveBeenCalledTimes(2);
    poller.stop();
  });

  it("ignores a second start while running", async () => {
    const tick = vi.fn(async () => {});
    const poller = createPoller(tick, 1000);
    poller.start();
    poller.start();
    expect(tick).toHaveBeenCalledTimes(1);
    await vi.advanceTimersByTimeAsync(1000);
    expect(tick).toHaveBeenCalledTimes(2);
    poller.stop();
  });

  it("keeps polling after a tick rejects", async () => {
    let failures = 0;
    const tick = vi.fn(async () => {
      failures += 1;
      if (failures === 1) {
        throw new Error("transient");
      }
    });
    const poller = createPoller(tick, 1000);
    poller.start();
    await vi.advanceTimersByTimeAsync(2000);
    expect(tick).toHaveBeenCalledTimes(3);
    poller.stop();
  });
});
