/** Pure layout helpers for the log-x spectrum plot. */

export interface BarLayout {
    x: number;      // [0, 1] horizontal position
    width: number;  // [0, 1]
    height: number; // [0, 1] relative to the largest bin
    time: number;
    value: number;
}

/** One bar per spectrum bin on a log time axis. */
export function layoutBars(times: number[], spectrum: number[]): BarLayout[] {
    if (times.length === 0) return [];
    const logs = times.map((t) => Math.log10(Math.max(t, 1e-300)));
    const lo = Math.min(...logs);
    const hi = Math.max(...logs);
    const span = hi - lo || 1;
    const peak = Math.max(...spectrum, 1e-300);
    const width = 1 / Math.max(times.length, 1);
    return times.map((t, i) => ({
        x: (logs[i] - lo) / span,
        width: width * 0.9,
        height: spectrum[i] / peak,
        time: t,
        value: spectrum[i],
    }));
}

/** Local maxima above a fraction of the global peak (same rule as the CLI report). */
export function findPeaks(spectrum: number[], thresholdFrac = 0.1): number[] {
    const n = spectrum.length;
    if (n === 0) return [];
    const max = Math.max(...spectrum);
    if (max <= 0) return [];
    const thr = thresholdFrac * max;
    const peaks: number[] = [];
    for (let k = 0; k < n; k++) {
        const left = k > 0 ? spectrum[k - 1] : -Infinity;
        const right = k + 1 < n ? spectrum[k + 1] : -Infinity;
        if (spectrum[k] > thr && spectrum[k] >= left && spectrum[k] > right) {
            peaks.push(k);
        }
    }
    return peaks;
}

/** Default band seeded from a clicked peak: one bin wide, unit gain. */
export function bandAroundPeak(times: number[], peak: number): { a: number; b: number } {
    const lo = peak > 0 ? 0.5 * (times[peak - 1] + times[peak]) : 0;
    const hi = peak + 1 < times.length
        ? 0.5 * (times[peak] + times[peak + 1])
        : times[peak] * 1.0000001;
    return { a: lo, b: hi };
}
