export interface SessionMeta {
    vertexCount: number;
    faceCount: number;
    domain: string;
    channels: number;
    scheme: string;
    times: number[];
    spectrum: number[];
    meshDigest: string;
}

export interface Band {
    a: number;
    b: number;
    gain: number;
}

export interface FilterPayload {
    bands: Band[];
    mask?: number[];
}

export interface MeshData {
    vertices: Float64Array; // xyz interleaved
    faces: Uint32Array;     // vertex index triples
}

export interface FilterResponse {
    payload: ArrayBuffer;
    digest: string;
    latencyMs: number;
}
