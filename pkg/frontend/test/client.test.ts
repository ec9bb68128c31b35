import { describe, expect, it, vi } from "vitest";
import { ApiClient, debounce, digestBadge } from "../src/client.js";

function deferredFetch() {
    const calls: Array<{
        resolve: (body?: string) => void;
        signal: AbortSignal | undefined;
    }> = [];
    const fetchFn = vi.fn((input: RequestInfo | URL, init?: RequestInit) => {
        return new Promise<Response>((resolve, reject) => {
            const entry = {
                resolve: (body = "{}") => resolve(new Response(body, {
                    status: 200,
                    headers: { "X-Content-Digest": "d-" + calls.indexOf(entry) },
                })),
                signal: init?.signal ?? undefined,
            };
            init?.signal?.addEventListener("abort", () =>
                reject(new DOMException("aborted", "AbortError")));
            calls.push(entry);
        });
    });
    return { calls, fetchFn: fetchFn as unknown as typeof fetch };
}

describe("ApiClient.filter", () => {
    it("keeps at most one request in flight and aborts stale ones", async () => {
        const { calls, fetchFn } = deferredFetch();
        const client = new ApiClient("", fetchFn);

        const first = client.filter({ bands: [] });
        const second = client.filter({ bands: [{ a: 0, b: 1, gain: 0 }] });
        expect(calls.length).toBe(2);
        expect(calls[0].signal?.aborted).toBe(true);
        expect(calls[1].signal?.aborted).toBe(false);

        await expect(first).rejects.toThrow();
        calls[1].resolve();
        const result = await second;
        expect(result.digest).toBe("d-1");
        expect(client.inFlight).toBe(0);
    });

    it("reports latency and digest", async () => {
        const { calls, fetchFn } = deferredFetch();
        const client = new ApiClient("", fetchFn);
        const pending = client.filter({ bands: [] });
        calls[0].resolve();
        const result = await pending;
        expect(result.digest).toBe("d-0");
        expect(result.latencyMs).toBeGreaterThanOrEqual(0);
    });
});

describe("debounce", () => {
    it("fires once on the trailing edge of a drag", () => {
        vi.useFakeTimers();
        const spy = vi.fn();
        const run = debounce(spy, 150);
        for (let i = 0; i < 25; i++) {
            run(i);
            vi.advanceTimersByTime(20); // rapid slider events
        }
        expect(spy).not.toHaveBeenCalled();
        vi.advanceTimersByTime(200);
        expect(spy).toHaveBeenCalledTimes(1);
        expect(spy).toHaveBeenCalledWith(24);
        vi.useRealTimers();
    });
});

describe("digestBadge", () => {
    it("labels the identity round trip", () => {
        expect(digestBadge("abc", "abc")).toBe("identity");
        expect(digestBadge("0123456789abcdef00", "other")).toBe("0123456789ab");
        expect(digestBadge("", "abc")).toBe("");
    });
});
