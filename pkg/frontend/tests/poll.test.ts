import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { DEFAULT_POLL_MS, startPolling } from "../src/poll.js";

describe("startPolling", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("defaults to a two second period", () => {
    expect(DEFAULT_POLL_MS).toBe(2000);
  });

  it("ticks immediately and then every interval", async () => {
    let ticks = 0;
    const poller = startPolling(async () => {
      ticks += 1;
    }, 2000);
    await vi.advanceTimersByTimeAsync(0);
    expect(ticks).toBe(1);
    await vi.advanceTimersByTimeAsync(2000);
    expect(ticks).toBe(2);
    await vi.advanceTimersByTimeAsync(6000);
    expect(ticks).toBe(5);
    poller.stop();
  });

  it("never overlaps ticks: the next one waits for the last to settle", async () => {
    let release: () => void = () => {};
    let running = 0;
    let maxRunning = 0;
    const poller = startPolling(async () => {
      running += 1;
      maxRunning = Math.max(maxRunning, running);
      await new Promise<void>((resolve) => {
        release = resolve;
      });
      running -= 1;
    }, 2000);
    await vi.advanceTimersByTimeAsync(0);
    // The first tick is still in flight; time passing must not start another.
    await vi.advanceTimersByTimeAsync(10_000);
    expect(maxRunning).toBe(1);
    release();
    await vi.advanceTimersByTimeAsync(2000);
    expect(maxRunning).toBe(1);
    expect(running).toBe(1);
    poller.stop();
    release();
  });

  it("stop prevents any further ticks", async () => {
    let ticks = 0;
    const poller = startPolling(async () => {
      ticks += 1;
    }, 2000);
    await vi.advanceTimersByTimeAsync(0);
    poller.stop();
    await vi.advanceTimersByTimeAsync(10_000);
    expect(ticks).toBe(1);
  });

  it("keeps polling after a tick throws", async () => {
    let ticks = 0;
    const poller = startPolling(async () => {
      ticks += 1;
      throw new Error("boom");
    }, 2000);
    await vi.advanceTimersByTimeAsync(0);
    await vi.advanceTimersByTimeAsync(2000);
    expect(ticks).toBe(2);
    poller.stop();
  });
});
