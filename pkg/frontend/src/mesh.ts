import type { MeshData } from "./types.js";

const TVSM_MAGIC = 0x4d535654; // "TVSM" little endian
const TVSV_MAGIC = 0x56535654; // "TVSV"

/** Parse the binary mesh container streamed by the service. */
export function parseTvsm(buffer: ArrayBuffer): MeshData {
    const view = new DataView(buffer);
    if (buffer.byteLength < 16 || view.getUint32(0, true) !== TVSM_MAGIC) {
        throw new Error("not a TVSM payload");
    }
    const version = view.getUint32(4, true);
    if (version !== 1) throw new Error(`unsupported TVSM version ${version}`);
    const nv = view.getUint32(8, true);
    const nf = view.getUint32(12, true);
    const need = 16 + nv * 24 + nf * 12;
    if (buffer.byteLength !== need) throw new Error("truncated TVSM payload");
    const vertices = new Float64Array(buffer, 16, nv * 3);
    const faces = new Uint32Array(buffer, 16 + nv * 24, nf * 3);
    return { vertices, faces };
}

/** Parse the binary signal container (filtered scalar payloads). */
export function parseTvsv(buffer: ArrayBuffer): { rows: number; channels: number; values: Float64Array } {
    const view = new DataView(buffer);
    if (buffer.byteLength < 16 || view.getUint32(0, true) !== TVSV_MAGIC) {
        throw new Error("not a TVSV payload");
    }
    const rows = view.getUint32(8, true);
    const channels = view.getUint32(12, true);
    return { rows, channels, values: new Float64Array(buffer, 16, rows * channels) };
}

export function isMeshPayload(buffer: ArrayBuffer): boolean {
    return buffer.byteLength >= 4 && new DataView(buffer).getUint32(0, true) === TVSM_MAGIC;
}
