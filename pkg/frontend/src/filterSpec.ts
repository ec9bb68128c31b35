import type { Band, FilterPayload } from "./types.js";

/** Editable band list kept sorted and non-overlapping, with gains >= 0. */
export class FilterSpecModel {
    private bands: Band[] = [];

    list(): Band[] {
        return this.bands.map((b) => ({ ...b }));
    }

    /** Insert a band, clamping it against its neighbors so intervals never overlap. */
    addBand(a: number, b: number, gain: number): Band {
        if (!(a <= b)) [a, b] = [b, a];
        gain = Math.max(0, gain);
        for (const other of this.bands) {
            if (a < other.b && other.a < b) {
                // clip to the free space nearest the requested interval
                if (a >= other.a) a = other.b;
                else b = other.a;
            }
        }
        if (!(a <= b)) throw new Error("no room for band");
        const band = { a, b, gain };
        this.bands.push(band);
        this.bands.sort((x, y) => x.a - y.a);
        return { ...band };
    }

    removeBand(index: number): void {
        this.bands.splice(index, 1);
    }

    replaceAll(bands: Band[]): void {
        this.bands = [];
        for (const band of bands) this.addBand(band.a, band.b, band.gain);
    }

    /** Move one edge of a band, clamped so neighbors stay disjoint. */
    dragEdge(index: number, edge: "a" | "b", value: number): void {
        const band = this.bands[index];
        if (!band) return;
        if (edge === "a") {
            const low = index > 0 ? this.bands[index - 1].b : -Infinity;
            band.a = Math.min(Math.max(value, low), band.b);
        } else {
            const high = index + 1 < this.bands.length ? this.bands[index + 1].a : Infinity;
            band.b = Math.max(Math.min(value, high), band.a);
        }
    }

    setGain(index: number, gain: number): void {
        const band = this.bands[index];
        if (band) band.gain = Math.max(0, gain);
    }

    isAllPass(): boolean {
        return this.bands.every((b) => b.gain === 1);
    }

    toPayload(): FilterPayload {
        return { bands: this.list() };
    }

    /** Canonical JSON matching the CLI file format (stable key order). */
    exportJson(): string {
        const bands = this.bands
            .map((b) => `    {\n      "a": ${jsonNumber(b.a)},\n      "b": ${jsonNumber(b.b)},\n      "gain": ${jsonNumber(b.gain)}\n    }`)
            .join(",\n");
        return `{\n  "bands": [\n${bands}\n  ]\n}`.replace("[\n\n  ]", "[]");
    }

    static importJson(text: string): FilterSpecModel {
        let doc: unknown;
        try {
            doc = JSON.parse(text);
        } catch (err) {
            throw new Error(`filter spec is not valid JSON: ${err}`);
        }
        if (typeof doc !== "object" || doc === null || !Array.isArray((doc as { bands?: unknown }).bands)) {
            throw new Error("filter spec must be an object with a bands list");
        }
        const model = new FilterSpecModel();
        for (const raw of (doc as { bands: unknown[] }).bands) {
            const band = raw as Partial<Band>;
            if (typeof band.a !== "number" || typeof band.b !== "number" || typeof band.gain !== "number") {
                throw new Error("band entries need numeric a, b, gain");
            }
            model.addBand(band.a, band.b, band.gain);
        }
        return model;
    }
}

function jsonNumber(x: number): string {
    return Object.is(x, -0) ? "0" : `${x}`;
}

/** Snap a time value to the nearest bin boundary of the decomposition grid. */
export function snapToBin(times: number[], value: number): number {
    if (times.length === 0) return value;
    const edges = binEdges(times);
    let best = edges[0];
    for (const e of edges) {
        if (Math.abs(e - value) < Math.abs(best - value)) best = e;
    }
    return best;
}

/** Bin boundaries: midpoints between consecutive times, padded by 0 and the end. */
export function binEdges(times: number[]): number[] {
    const edges = [0];
    for (let i = 0; i + 1 < times.length; i++) {
        edges.push(0.5 * (times[i] + times[i + 1]));
    }
    if (times.length > 0) edges.push(times[times.length - 1] * 1.0000001);
    return edges;
}
