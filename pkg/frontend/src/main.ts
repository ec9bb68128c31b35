import { ApiClient, debounce, digestBadge } from "./client.js";
import { FilterSpecModel, snapToBin } from "./filterSpec.js";
import { isMeshPayload, parseTvsm } from "./mesh.js";
import { bandAroundPeak, findPeaks, layoutBars } from "./spectrum.js";
import type { SessionMeta } from "./types.js";
import { SurfaceViewer } from "./viewer.js";

const client = new ApiClient("");
const model = new FilterSpecModel();
let meta: SessionMeta | null = null;
let originalDigest = "";
let originalPayload: ArrayBuffer | null = null;
let showingOriginal = false;

const $ = (id: string) => document.getElementById(id)!;

async function boot(): Promise<void> {
    try {
        meta = await client.meta();
    } catch (err) {
        toast(`service unreachable: ${err}`);
        return;
    }
    const viewer = new SurfaceViewer($("view") as HTMLCanvasElement);
    originalPayload = await client.mesh();
    originalDigest = meta.meshDigest;
    if (isMeshPayload(originalPayload)) viewer.show(parseTvsm(originalPayload));
    $("stats").textContent =
        `${meta.vertexCount} vertices / ${meta.faceCount} faces / ${meta.times.length} bins (${meta.scheme})`;
    drawSpectrum();
    renderBandList();

    const requestFiltered = debounce(async () => {
        if (!meta) return;
        try {
            const result = await client.filter(model.toPayload());
            $("badge").textContent = digestBadge(result.digest, originalDigest);
            $("latency").textContent = `${result.latencyMs.toFixed(0)} ms`;
            if (isMeshPayload(result.payload) && !showingOriginal) {
                viewer.show(parseTvsm(result.payload));
            }
        } catch (err) {
            if (!String(err).includes("AbortError")) toast(String(err));
        }
    }, 150);

    $("spectrum").addEventListener("click", (event) => {
        if (!meta) return;
        const canvas = $("spectrum") as HTMLCanvasElement;
        const frac = (event.offsetX / canvas.clientWidth);
        const bars = layoutBars(meta.times, meta.spectrum);
        const peaks = findPeaks(meta.spectrum);
        for (const k of peaks) {
            if (Math.abs(bars[k].x - frac) < 0.03) {
                const seed = bandAroundPeak(meta.times, k);
                model.addBand(snapToBin(meta.times, seed.a), snapToBin(meta.times, seed.b), 0.0);
                renderBandList();
                drawSpectrum();
                requestFiltered();
                return;
            }
        }
    });

    $("add-band").addEventListener("click", () => {
        if (!meta) return;
        const t = meta.times;
        model.addBand(t[0], t[Math.floor(t.length / 4)], 0.0);
        renderBandList();
        drawSpectrum();
        requestFiltered();
    });

    $("toggle").addEventListener("click", () => {
        showingOriginal = !showingOriginal;
        $("toggle").textContent = showingOriginal ? "show filtered" : "show original";
        if (showingOriginal && originalPayload && isMeshPayload(originalPayload)) {
            viewer.show(parseTvsm(originalPayload));
        } else {
            requestFiltered();
        }
    });

    $("export").addEventListener("click", () => {
        const blob = new Blob([model.exportJson()], { type: "application/json" });
        const link = document.createElement("a");
        link.href = URL.createObjectURL(blob);
        link.download = "filter.json";
        link.click();
    });

    ($("import") as HTMLInputElement).addEventListener("change", async (event) => {
        const file = (event.target as HTMLInputElement).files?.[0];
        if (!file) return;
        try {
            const imported = FilterSpecModel.importJson(await file.text());
            model.replaceAll(imported.list());
            renderBandList();
            drawSpectrum();
            requestFiltered();
        } catch (err) {
            toast(String(err));
        }
    });

    function renderBandList(): void {
        const holder = $("bands");
        holder.innerHTML = "";
        model.list().forEach((band, i) => {
            const row = document.createElement("div");
            row.className = "band";
            row.innerHTML =
                `<span>[${band.a.toPrecision(3)}, ${band.b.toPrecision(3)}]</span>` +
                `<input type="range" min="0" max="3" step="0.05" value="${band.gain}">` +
                `<span class="gain">${band.gain.toFixed(2)}</span>` +
                `<button>x</button>`;
            const slider = row.querySelector("input")!;
            slider.addEventListener("input", () => {
                model.setGain(i, Number(slider.value));
                (row.querySelector(".gain") as HTMLElement).textContent =
                    Number(slider.value).toFixed(2);
                requestFiltered();
            });
            row.querySelector("button")!.addEventListener("click", () => {
                model.removeBand(i);
                renderBandList();
                drawSpectrum();
                requestFiltered();
            });
            holder.appendChild(row);
        });
    }

    function drawSpectrum(): void {
        if (!meta) return;
        const canvas = $("spectrum") as HTMLCanvasElement;
        const ctx = canvas.getContext("2d")!;
        const w = (canvas.width = canvas.clientWidth || 600);
        const h = (canvas.height = 160);
        ctx.clearRect(0, 0, w, h);
        if (meta.spectrum.every((v) => v === 0)) {
            ctx.fillStyle = "#888";
            ctx.fillText("empty spectrum", w / 2 - 40, h / 2);
            return;
        }
        const bars = layoutBars(meta.times, meta.spectrum);
        const peaks = new Set(findPeaks(meta.spectrum));
        bars.forEach((bar, i) => {
            ctx.fillStyle = peaks.has(i) ? "#e8a33d" : "#5a8dc0";
            const bh = Math.max(2, bar.height * (h - 20));
            ctx.fillRect(bar.x * (w - 10), h - bh, Math.max(2, bar.width * (w - 10)), bh);
        });
        ctx.fillStyle = "rgba(180, 220, 160, 0.25)";
        const logs = meta.times.map((t) => Math.log10(t));
        const lo = Math.min(...logs);
        const span = Math.max(...logs) - lo || 1;
        for (const band of model.list()) {
            if (band.b <= 0) continue;
            const xa = (Math.log10(Math.max(band.a, meta.times[0])) - lo) / span;
            const xb = (Math.log10(Math.max(band.b, meta.times[0])) - lo) / span;
            ctx.fillRect(xa * (w - 10), 0, Math.max(2, (xb - xa) * (w - 10)), h);
        }
    }
}

function toast(message: string): void {
    const el = $("toast");
    el.textContent = message;
    el.classList.add("visible");
    setTimeout(() => el.classList.remove("visible"), 4000);
}

boot();
