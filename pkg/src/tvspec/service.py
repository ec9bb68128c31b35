"""HTTP service for interactive spectral filtering of a precomputed session.

The decomposition is computed offline (CLI); the service only evaluates
filters and, for normal-field sessions, re-integrates vertex positions with
a screened Poisson solve whose factorization is cached at load time.  All
session state is immutable after load, so concurrent requests are safe; the
cached factorization is guarded by a lock.
"""

from __future__ import annotations

import hashlib
import struct
import threading

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from .errors import DigestError, FilterShapeMismatchError, ParseError
from .filters import FilterSpec, apply_filter
from .flow import ScreenedSolver
from .mesh import load_mesh, tvsm_bytes
from .spectral import load_decomposition, spectrum

TVSV_MAGIC = b"TVSV"


def signal_bytes(values):
    """Binary container for a filtered signal (little endian f64)."""
    values = np.asarray(values, dtype=np.float64)
    head = TVSV_MAGIC + struct.pack("<III", 1, values.shape[0], values.shape[1])
    return head + values.astype("<f8").tobytes()


class SessionState:
    """Loaded mesh + decomposition, immutable after construction."""

    def __init__(self, mesh, decomposition, mesh_blob=None, epsilon=1e-4):
        self.mesh = mesh
        self.dec = decomposition
        self.mesh_blob = mesh_blob if mesh_blob is not None else tvsm_bytes(mesh)
        if decomposition.source_digest and decomposition.source_digest != mesh.digest():
            raise DigestError("decomposition does not match the supplied mesh")
        self.is_normal_field = decomposition.domain == "faces" and decomposition.channels == 3
        self.screened = ScreenedSolver(mesh, epsilon=epsilon) if self.is_normal_field else None
        self.lock = threading.Lock()
        self.mesh_digest = hashlib.sha256(self.mesh_blob).hexdigest()

    @classmethod
    def load(cls, mesh_path, dec_path, epsilon=1e-4):
        mesh = load_mesh(mesh_path)
        dec = load_decomposition(dec_path)
        return cls(mesh, dec, epsilon=epsilon)

    def meta(self):
        times, s = spectrum(self.dec)
        return {
            "vertexCount": self.mesh.n_vertices,
            "faceCount": self.mesh.n_faces,
            "domain": self.dec.domain,
            "channels": self.dec.channels,
            "scheme": self.dec.scheme,
            "times": times.tolist(),
            "spectrum": s.tolist(),
            "meshDigest": self.mesh_digest,
        }

    def evaluate(self, spec):
        """Filter the decomposition; returns (payload bytes, content type)."""
        if self.is_normal_field and spec.is_all_pass():
            # exact identity: synthesis returns the input field bit-for-bit,
            # so the original container is the correct payload
            return self.mesh_blob, "application/octet-stream"
        values = apply_filter(self.dec, spec)
        if self.is_normal_field:
            norms = np.linalg.norm(values, axis=1)
            norms[norms < 1e-12] = 1.0
            from .flow import recover_vertices

            with self.lock:
                verts = recover_vertices(self.mesh, values / norms[:, None],
                                         screened=self.screened)
            return tvsm_bytes(self.mesh.with_vertices(verts)), "application/octet-stream"
        return signal_bytes(values), "application/octet-stream"


def create_app(session=None, cors_origins=("*",)):
    """FastAPI application bound to one immutable session (or none yet)."""
    app = FastAPI(title="tvspec filtering service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.session = session

    def current():
        return app.state.session

    @app.get("/api/meta")
    def meta():
        sess = current()
        if sess is None:
            return Response(status_code=503, content="no session loaded")
        return sess.meta()

    @app.get("/api/mesh")
    def mesh():
        sess = current()
        if sess is None:
            return Response(status_code=503, content="no session loaded")
        return Response(
            content=sess.mesh_blob,
            media_type="application/octet-stream",
            headers={"X-Content-Digest": sess.mesh_digest},
        )

    @app.post("/api/filter")
    async def filter_endpoint(request: Request):
        sess = current()
        if sess is None:
            return Response(status_code=503, content="no session loaded")
        try:
            body = await request.json()
        except Exception:
            return Response(status_code=400, content="body is not valid JSON")
        try:
            spec = FilterSpec.from_json_dict(body)
        except ParseError as exc:
            return Response(status_code=400, content=str(exc))
        try:
            payload, ctype = sess.evaluate(spec)
        except FilterShapeMismatchError as exc:
            return Response(status_code=422, content=str(exc))
        digest = hashlib.sha256(payload).hexdigest()
        return Response(content=payload, media_type=ctype,
                        headers={"X-Content-Digest": digest})

    return app


def run(session, host="127.0.0.1", port=8787):
    import uvicorn

    uvicorn.run(create_app(session), host=host, port=port)
