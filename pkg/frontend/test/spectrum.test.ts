import { describe, expect, it } from "vitest";
import { bandAroundPeak, findPeaks, layoutBars } from "../src/spectrum.js";
import { parseTvsm, parseTvsv } from "../src/mesh.js";

describe("spectrum layout", () => {
    it("one bar per bin, heights relative to the peak", () => {
        const times = [0.01, 0.1, 1.0];
        const s = [1, 4, 2];
        const bars = layoutBars(times, s);
        expect(bars.length).toBe(3);
        expect(bars[0].x).toBe(0);
        expect(bars[2].x).toBe(1);
        expect(bars[1].x).toBeCloseTo(0.5); // log axis
        expect(bars[1].height).toBe(1);
        expect(bars[2].height).toBeCloseTo(0.5);
    });

    it("peak finding matches the reporting rule", () => {
        expect(findPeaks([0, 1, 0.2, 3, 0.1])).toEqual([1, 3]);
        expect(findPeaks([0.01, 1, 0.02, 0.05, 0.04])).toEqual([1]); // below 10% cut
        expect(findPeaks([])).toEqual([]);
        expect(findPeaks([0, 0, 0])).toEqual([]);
    });

    it("band seeded from a peak spans its bin", () => {
        const times = [0.1, 0.2, 0.4];
        const band = bandAroundPeak(times, 1);
        expect(band.a).toBeCloseTo(0.15);
        expect(band.b).toBeCloseTo(0.3);
    });
});

describe("binary payload parsing", () => {
    it("round-trips a TVSM container", () => {
        const nv = 3, nf = 1;
        const buffer = new ArrayBuffer(16 + nv * 24 + nf * 12);
        const view = new DataView(buffer);
        view.setUint32(0, 0x4d535654, true);
        view.setUint32(4, 1, true);
        view.setUint32(8, nv, true);
        view.setUint32(12, nf, true);
        const verts = new Float64Array(buffer, 16, 9);
        verts.set([0, 0, 0, 1, 0, 0, 0, 1, 0]);
        new Uint32Array(buffer, 16 + 72, 3).set([0, 1, 2]);
        const mesh = parseTvsm(buffer);
        expect(Array.from(mesh.faces)).toEqual([0, 1, 2]);
        expect(mesh.vertices[3]).toBe(1);
        expect(() => parseTvsm(buffer.slice(0, 20))).toThrow();
    });

    it("parses a TVSV signal container", () => {
        const buffer = new ArrayBuffer(16 + 4 * 8);
        const view = new DataView(buffer);
        view.setUint32(0, 0x56535654, true);
        view.setUint32(4, 1, true);
        view.setUint32(8, 2, true);
        view.setUint32(12, 2, true);
        new Float64Array(buffer, 16, 4).set([1, 2, 3, 4]);
        const signal = parseTvsv(buffer);
        expect(signal.rows).toBe(2);
        expect(signal.channels).toBe(2);
        expect(Array.from(signal.values)).toEqual([1, 2, 3, 4]);
    });
});
