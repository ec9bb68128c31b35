import type { FilterPayload, FilterResponse, SessionMeta } from "./types.js";

/**
 * Service client that keeps at most one filter request in flight: newer
 * requests abort the pending one, so slider drags never queue up.
 */
export class ApiClient {
    private pending: AbortController | null = null;
    inFlight = 0;

    constructor(
        private readonly base: string = "",
        private readonly fetchFn: typeof fetch = fetch,
    ) {}

    async meta(): Promise<SessionMeta> {
        const resp = await this.fetchFn(`${this.base}/api/meta`);
        if (!resp.ok) throw new Error(`meta failed: ${resp.status}`);
        return (await resp.json()) as SessionMeta;
    }

    async mesh(): Promise<ArrayBuffer> {
        const resp = await this.fetchFn(`${this.base}/api/mesh`);
        if (!resp.ok) throw new Error(`mesh failed: ${resp.status}`);
        return resp.arrayBuffer();
    }

    /** POST the filter; a newer call cancels the previous pending one. */
    async filter(spec: FilterPayload): Promise<FilterResponse> {
        if (this.pending) this.pending.abort();
        const controller = new AbortController();
        this.pending = controller;
        this.inFlight += 1;
        const started = performance.now();
        try {
            const resp = await this.fetchFn(`${this.base}/api/filter`, {
                method: "POST",
                headers: { "content-type": "application/json" },
                body: JSON.stringify(spec),
                signal: controller.signal,
            });
            if (!resp.ok) {
                throw new Error(`filter failed: ${resp.status} ${await resp.text()}`);
            }
            const payload = await resp.arrayBuffer();
            return {
                payload,
                digest: resp.headers.get("X-Content-Digest") ?? "",
                latencyMs: performance.now() - started,
            };
        } finally {
            this.inFlight -= 1;
            if (this.pending === controller) this.pending = null;
        }
    }
}

/** Trailing-edge debounce used for slider drags. */
export function debounce<A extends unknown[]>(
    fn: (...args: A) => void,
    delayMs = 150,
): (...args: A) => void {
    let timer: ReturnType<typeof setTimeout> | undefined;
    return (...args: A) => {
        if (timer !== undefined) clearTimeout(timer);
        timer = setTimeout(() => fn(...args), delayMs);
    };
}

/** Badge text for the payload digest: flags the exact identity round trip. */
export function digestBadge(payloadDigest: string, originalDigest: string): string {
    if (!payloadDigest) return "";
    return payloadDigest === originalDigest
        ? "identity"
        : payloadDigest.slice(0, 12);
}
