"""Triangle meshes, per-element signals, and mesh file I/O.

The mesh is immutable after construction: all derived quantities (edges,
areas, lengths, normals) are computed once and shared freely across threads.
"""

from __future__ import annotations

import hashlib
import os
import struct

import numpy as np

from .errors import DegenerateFaceError, NonManifoldError, ParseError

TVSM_MAGIC = b"TVSM"
TVSM_VERSION = 1


class TriangleMesh:
    """Embedded manifold triangle mesh with derived geometric quantities.

    Parameters
    ----------
    vertices : array_like, shape (V, 3)
        Vertex positions.
    faces : array_like, shape (F, 3)
        Counterclockwise vertex index triples.

    Attributes
    ----------
    vertices, faces : np.ndarray
        Validated copies of the inputs.
    edges : np.ndarray, shape (E, 2)
        Unique undirected edges, each row sorted ascending.
    edge_faces : np.ndarray, shape (E, 2)
        Incident face indices per edge, -1 for the missing side of a
        boundary edge.
    face_areas, vertex_areas, edge_lengths, face_normals : np.ndarray
        Areas, barycentric-lumped vertex areas (one third of the incident
        triangle areas), edge lengths, and unit face normals.
    """

    def __init__(self, vertices, faces):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ParseError("vertices must be an (n, 3) array")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ParseError("faces must be an (n, 3) array")
        if not np.isfinite(vertices).all():
            raise ParseError("non-finite vertex coordinate")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise ParseError("face references a vertex index out of range")

        repeated = (
            (faces[:, 0] == faces[:, 1])
            | (faces[:, 1] == faces[:, 2])
            | (faces[:, 2] == faces[:, 0])
        )
        if repeated.any():
            raise DegenerateFaceError(int(np.flatnonzero(repeated)[0]))

        self.vertices = vertices
        self.faces = faces
        self._build_edges()
        self._build_metrics()
        self._digest = None

    def _build_edges(self):
        halfedges = self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        canon = np.sort(halfedges, axis=1)
        edges, inverse, counts = np.unique(
            canon, axis=0, return_inverse=True, return_counts=True
        )
        if (counts > 2).any():
            bad = edges[np.argmax(counts)]
            raise NonManifoldError(
                f"edge ({bad[0]}, {bad[1]}) is shared by {counts.max()} faces"
            )
        order = np.argsort(inverse, kind="stable")
        starts = np.zeros(len(edges), dtype=np.int64)
        starts[1:] = np.cumsum(counts)[:-1]
        owner = order // 3  # halfedge row -> face index

        edge_faces = np.full((len(edges), 2), -1, dtype=np.int64)
        edge_faces[:, 0] = owner[starts]
        two = counts == 2
        edge_faces[two, 1] = owner[starts[two] + 1]

        self.edges = edges
        self.edge_faces = edge_faces
        self.boundary_edges = np.flatnonzero(counts == 1)

    def _build_metrics(self):
        v = self.vertices
        f = self.faces
        e1 = v[f[:, 1]] - v[f[:, 0]]
        e2 = v[f[:, 2]] - v[f[:, 0]]
        cross = np.cross(e1, e2)
        norms = np.linalg.norm(cross, axis=1)
        areas = 0.5 * norms
        if (areas <= 0.0).any():
            raise DegenerateFaceError(int(np.flatnonzero(areas <= 0.0)[0]))
        self.face_areas = areas
        self.face_normals = cross / norms[:, None]

        va = np.zeros(len(v))
        np.add.at(va, f.ravel(), np.repeat(areas / 3.0, 3))
        self.vertex_areas = va

        self.edge_lengths = np.linalg.norm(
            v[self.edges[:, 1]] - v[self.edges[:, 0]], axis=1
        )

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces

    @property
    def is_closed(self):
        return len(self.boundary_edges) == 0

    @property
    def min_edge_length(self):
        return float(self.edge_lengths.min())

    @property
    def interior_edges(self):
        """Indices of edges with two incident faces."""
        return np.flatnonzero(self.edge_faces[:, 1] >= 0)

    def digest(self):
        """SHA-256 hash of the canonical binary container for this mesh."""
        if self._digest is None:
            self._digest = hashlib.sha256(tvsm_bytes(self)).hexdigest()
        return self._digest

    def with_vertices(self, vertices):
        """New mesh with the same connectivity and different positions."""
        return TriangleMesh(vertices, self.faces)

    def volume(self):
        """Signed enclosed volume (divergence theorem; meaningful when closed)."""
        v = self.vertices[self.faces]
        return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)


class Signal:
    """Multi-channel function attached to mesh vertices, faces, or points.

    Values are stored as a dense ``(n, channels)`` float64 matrix; 1-D input
    is promoted to a single channel.
    """

    DOMAINS = ("vertices", "faces", "points")

    def __init__(self, domain, values):
        if domain not in self.DOMAINS:
            raise ValueError(f"unknown signal domain {domain!r}")
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[1] < 1:
            raise ValueError("signal values must be an (n, channels) matrix")
        if not np.isfinite(values).all():
            raise ValueError("signal contains non-finite entries")
        self.domain = domain
        self.values = values
        self.meta = {}

    @property
    def channels(self):
        return self.values.shape[1]

    def __len__(self):
        return self.values.shape[0]

    def check_against(self, n_elements):
        if len(self) != n_elements:
            raise ValueError(
                f"signal has {len(self)} rows, domain {self.domain!r} has {n_elements}"
            )
        return self


def domain_size(mesh, domain):
    """Number of elements carried by ``domain`` on ``mesh``."""
    if domain == "vertices":
        return mesh.n_vertices
    if domain == "faces":
        return mesh.n_faces
    raise ValueError(f"mesh does not carry domain {domain!r}")


# ---------------------------------------------------------------------------
# readers


def load_mesh(path, fmt=None):
    """Load a triangle mesh from an OBJ, OFF, PLY, or TVSM file.

    The format is inferred from the extension unless ``fmt`` is given.
    Raises :class:`ParseError` for malformed input and the mesh validation
    errors for bad geometry.
    """
    if fmt is None:
        fmt = os.path.splitext(path)[1].lstrip(".").lower()
    fmt = fmt.lower()
    if fmt == "obj":
        verts, faces = _read_obj(path)
    elif fmt == "off":
        verts, faces = _read_off(path)
    elif fmt == "ply":
        verts, faces = _read_ply(path)
    elif fmt == "tvsm":
        with open(path, "rb") as fh:
            return mesh_from_tvsm(fh.read())
    else:
        raise ParseError(f"unsupported mesh format {fmt!r}")
    return TriangleMesh(verts, faces)


def _read_obj(path):
    verts = []
    faces = []
    with open(path, "r", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise ParseError(f"{path}:{lineno}: short vertex record")
                try:
                    verts.append([float(x) for x in parts[1:4]])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: bad vertex: {exc}") from exc
            elif parts[0] == "f":
                idx = []
                for token in parts[1:]:
                    head = token.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise ParseError(f"{path}:{lineno}: bad face index") from exc
                    if i <= 0:
                        raise ParseError(f"{path}:{lineno}: non-positive face index")
                    idx.append(i - 1)
                if len(idx) != 3:
                    raise ParseError(f"{path}:{lineno}: only triangle faces supported")
                faces.append(idx)
    if not verts:
        raise ParseError(f"{path}: no vertices")
    return np.array(verts), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _read_off(path):
    with open(path, "r", errors="replace") as fh:
        tokens = []
        for line in fh:
            stripped = line.split("#", 1)[0].strip()
            if stripped:
                tokens.extend(stripped.split())
    if not tokens or tokens[0] != "OFF":
        raise ParseError(f"{path}: missing OFF header")
    tokens = tokens[1:]
    try:
        nv, nf = int(tokens[0]), int(tokens[1])
        pos = 3  # skip edge count
        verts = np.array([float(x) for x in tokens[pos:pos + 3 * nv]]).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            cnt = int(tokens[pos])
            if cnt != 3:
                raise ParseError(f"{path}: only triangle faces supported")
            faces.append([int(x) for x in tokens[pos + 1:pos + 4]])
            pos += 1 + cnt
    except ParseError:
        raise
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed OFF: {exc}") from exc
    return verts, np.array(faces, dtype=np.int64).reshape(-1, 3)


_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def _read_ply(path):
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise ParseError(f"{path}: not a PLY file")
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]

    fmt = None
    elements = []  # (name, count, [(prop_name, dtype)] , list_prop or None)
    for line in header[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append({"name": parts[1], "count": int(parts[2]), "props": []})
        elif parts[0] == "property":
            if not elements:
                raise ParseError(f"{path}: property before element")
            if parts[1] == "list":
                elements[-1]["props"].append(("list", parts[2], parts[3], parts[4]))
            else:
                elements[-1]["props"].append(("scalar", parts[1], parts[2]))
    if fmt != "binary_little_endian":
        raise ParseError(f"{path}: only binary little-endian PLY is supported")

    verts = None
    faces = None
    offset = 0
    for elem in elements:
        if elem["name"] == "vertex":
            names = [p[2] for p in elem["props"]]
            if any(p[0] == "list" for p in elem["props"]):
                raise ParseError(f"{path}: list property on vertices")
            dtype = np.dtype([(p[2], "<" + _PLY_TYPES[p[1]]) for p in elem["props"]])
            block = np.frombuffer(body, dtype=dtype, count=elem["count"], offset=offset)
            offset += dtype.itemsize * elem["count"]
            try:
                verts = np.stack(
                    [block["x"], block["y"], block["z"]], axis=1
                ).astype(np.float64)
            except KeyError as exc:
                raise ParseError(f"{path}: vertex element lacks x/y/z") from exc
            del names
        elif elem["name"] == "face":
            if len(elem["props"]) != 1 or elem["props"][0][0] != "list":
                raise ParseError(f"{path}: face element must be a single list property")
            _, cnt_t, idx_t, _name = elem["props"][0]
            cnt_dt = np.dtype("<" + _PLY_TYPES[cnt_t])
            idx_dt = np.dtype("<" + _PLY_TYPES[idx_t])
            rows = []
            for _ in range(elem["count"]):
                cnt = int(np.frombuffer(body, dtype=cnt_dt, count=1, offset=offset)[0])
                offset += cnt_dt.itemsize
                if cnt != 3:
                    raise ParseError(f"{path}: only triangle faces supported")
                rows.append(np.frombuffer(body, dtype=idx_dt, count=3, offset=offset))
                offset += 3 * idx_dt.itemsize
            faces = np.array(rows, dtype=np.int64).reshape(-1, 3)
        else:
            # skip unknown fixed-size elements; lists of unknown layout are an error
            if any(p[0] == "list" for p in elem["props"]):
                raise ParseError(f"{path}: cannot skip list element {elem['name']!r}")
            size = sum(np.dtype(_PLY_TYPES[p[1]]).itemsize for p in elem["props"])
            offset += size * elem["count"]
    if verts is None or faces is None:
        raise ParseError(f"{path}: missing vertex or face element")
    return verts, faces


# ---------------------------------------------------------------------------
# writers


def write_mesh(path, mesh, fmt=None):
    """Write a mesh as OBJ (text) or TVSM (binary container)."""
    if fmt is None:
        fmt = os.path.splitext(path)[1].lstrip(".").lower()
    fmt = fmt.lower()
    if fmt == "obj":
        with open(path, "w") as fh:
            for v in mesh.vertices:
                fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
            for f in mesh.faces:
                fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
    elif fmt == "tvsm":
        with open(path, "wb") as fh:
            fh.write(tvsm_bytes(mesh))
    else:
        raise ParseError(f"unsupported output format {fmt!r}")


def tvsm_bytes(mesh):
    """Serialize a mesh to the TVSM binary container (little endian)."""
    header = TVSM_MAGIC + struct.pack(
        "<III", TVSM_VERSION, mesh.n_vertices, mesh.n_faces
    )
    return (
        header
        + mesh.vertices.astype("<f8").tobytes()
        + mesh.faces.astype("<u4").tobytes()
    )


def mesh_from_tvsm(blob):
    """Parse a TVSM container produced by :func:`tvsm_bytes`."""
    if len(blob) < 16 or blob[:4] != TVSM_MAGIC:
        raise ParseError("not a TVSM container")
    version, nv, nf = struct.unpack("<III", blob[4:16])
    if version != TVSM_VERSION:
        raise ParseError(f"unsupported TVSM version {version}")
    need = 16 + nv * 24 + nf * 12
    if len(blob) != need:
        raise ParseError("TVSM container is truncated or padded")
    verts = np.frombuffer(blob, dtype="<f8", count=3 * nv, offset=16).reshape(nv, 3)
    faces = np.frombuffer(blob, dtype="<u4", count=3 * nf, offset=16 + nv * 24)
    return TriangleMesh(verts.copy(), faces.reshape(nf, 3).astype(np.int64))


def read_scalar_file(path, channels=None):
    """Whitespace-separated numeric table, one row per element."""
    try:
        values = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if channels is not None and values.shape[1] != channels:
        raise ParseError(f"{path}: expected {channels} columns, found {values.shape[1]}")
    return values


def write_scalar_file(path, values):
    np.savetxt(path, np.asarray(values, dtype=np.float64), fmt="%.17g")
