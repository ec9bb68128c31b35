"""Sparse differential operators for vertex, face, and graph signals.

Conventions
-----------
* ``G`` maps vertex values to one 3-vector per face, stored as three
  consecutive rows per face (x, y, z).
* ``D = -A^-1 G^T T`` is the divergence (negative adjoint of ``G`` under the
  vertex-area and face-area inner products), and ``L = D G`` so that ``A L``
  is symmetric negative semidefinite.
* ``Ge`` has one row per interior edge with entries +1/-1 on the two
  incident faces; ``De = -T^-1 Ge^T Ae``.
* Graph operators follow the weighted difference form ``w_ij (f_i - f_j)``
  over directed edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite

from .errors import SingularMetricError


@dataclass
class DiscreteOperators:
    """Container for the sparse operators of one fixed domain.

    Vertex part: ``G``, ``D``, ``L``, ``A`` (vertex areas), ``T`` (face
    areas).  Face part: ``Ge``, ``De``, ``Ae`` (interior edge lengths).
    Graph part: ``Gg`` (directed), ``Dg``, plus the undirected reduction
    ``Ku`` used by the solver.  Parts not built are ``None``.
    """

    n_vertices: int = 0
    n_faces: int = 0
    min_edge_length: float = 1.0
    G: sp.csr_matrix | None = None
    D: sp.csr_matrix | None = None
    L: sp.csr_matrix | None = None
    A: np.ndarray | None = None
    T: np.ndarray | None = None
    Ge: sp.csr_matrix | None = None
    De: sp.csr_matrix | None = None
    Ae: np.ndarray | None = None
    interior_edges: np.ndarray | None = None
    Gg: sp.csr_matrix | None = None
    Dg: sp.csr_matrix | None = None
    Ku: sp.csr_matrix | None = None
    n_points: int = 0
    _norms: dict = field(default_factory=dict, repr=False)

    # -- solver-facing views -------------------------------------------------

    def gradient_for(self, domain):
        if domain == "vertices":
            return self.G
        if domain == "faces":
            return self.Ge
        if domain == "points":
            return self.Ku
        raise ValueError(f"unknown domain {domain!r}")

    def adjoint_for(self, domain):
        """Adjoint of the gradient under the domain's weighted inner products."""
        if domain == "vertices":
            return _scale_rows(self.G.T @ _diag(np.repeat(self.T, 3)), 1.0 / self.A)
        if domain == "faces":
            return _scale_rows(self.Ge.T @ _diag(self.Ae), 1.0 / self.T)
        if domain == "points":
            return self.Ku.T.tocsr()
        raise ValueError(f"unknown domain {domain!r}")

    def primal_weights(self, domain):
        if domain == "vertices":
            return self.A
        if domain == "faces":
            return self.T
        if domain == "points":
            return np.ones(self.n_points)
        raise ValueError(f"unknown domain {domain!r}")

    def dual_weights(self, domain):
        if domain == "vertices":
            return self.T
        if domain == "faces":
            return self.Ae
        if domain == "points":
            return np.ones(self.Ku.shape[0])
        raise ValueError(f"unknown domain {domain!r}")

    def dual_block(self, domain):
        """Spatial components per dual element (3 for per-face vectors, else 1)."""
        return 3 if domain == "vertices" else 1

    def stability_bound(self, domain):
        """Upper bound for sigma*tau: min edge length over the squared plain norm."""
        scale = self.min_edge_length if domain != "points" else 1.0
        return scale / self.operator_norm(domain) ** 2

    def operator_norm(self, domain):
        """Cached power-iteration estimate of the plain gradient norm."""
        key = ("plain", domain)
        if key not in self._norms:
            self._norms[key] = estimate_operator_norm(self.gradient_for(domain))
        return self._norms[key]

    def weighted_operator_norm(self, domain):
        """Norm of the gradient as a map between the weighted inner products."""
        key = ("weighted", domain)
        if key not in self._norms:
            w = self.dual_weights(domain)
            w = np.repeat(w, self.dual_block(domain))
            a = self.primal_weights(domain)
            K = _scale_rows(self.gradient_for(domain) @ _diag(1.0 / np.sqrt(a)), np.sqrt(w))
            self._norms[key] = estimate_operator_norm(K)
        return self._norms[key]


def _diag(v):
    return sp.diags(np.asarray(v, dtype=np.float64))


def _scale_rows(mat, v):
    return (_diag(v) @ mat).tocsr()


def build_vertex_operators(mesh, singular_tol=1e-14):
    """Assemble ``G``, ``D``, ``L``, ``A``, ``T`` for vertex signals.

    The per-face gradient inverts the 2x2 edge Gram matrix, which makes
    linear functions exact; a numerically singular Gram matrix raises
    :class:`SingularMetricError` with the face index.
    """
    v = mesh.vertices
    f = mesh.faces
    e_ij = v[f[:, 1]] - v[f[:, 0]]
    e_ik = v[f[:, 2]] - v[f[:, 0]]

    g11 = np.einsum("ij,ij->i", e_ij, e_ij)
    g12 = np.einsum("ij,ij->i", e_ij, e_ik)
    g22 = np.einsum("ij,ij->i", e_ik, e_ik)
    det = g11 * g22 - g12 * g12
    bad = det <= singular_tol * g11 * g22
    if bad.any():
        raise SingularMetricError(int(np.flatnonzero(bad)[0]))

    # columns of E (Gram inverse): coefficients of f_j and f_k
    bj = (e_ij * (g22 / det)[:, None]) - (e_ik * (g12 / det)[:, None])
    bk = (e_ik * (g11 / det)[:, None]) - (e_ij * (g12 / det)[:, None])
    bi = -(bj + bk)

    nf = len(f)
    # index layout: (face, component, column) with columns ordered (i, j, k)
    rows = np.repeat(3 * np.arange(nf)[:, None, None] + np.arange(3)[None, :, None], 3, axis=2)
    cols = np.broadcast_to(f[:, None, :], (nf, 3, 3))
    data = np.stack([bi, bj, bk], axis=2)  # (face, comp, col) matching cols order

    G = sp.coo_matrix(
        (data.ravel(), (rows.ravel(), cols.ravel())),
        shape=(3 * nf, mesh.n_vertices),
    ).tocsr()

    A = mesh.vertex_areas
    T = mesh.face_areas
    D = (-_scale_rows(G.T @ _diag(np.repeat(T, 3)), 1.0 / A)).tocsr()
    L = (D @ G).tocsr()

    ops = DiscreteOperators(
        n_vertices=mesh.n_vertices,
        n_faces=mesh.n_faces,
        min_edge_length=mesh.min_edge_length,
        G=G, D=D, L=L, A=A, T=T,
    )
    return ops


def build_face_operators(mesh):
    """Assemble the edge-jump operators ``Ge``, ``De``, ``Ae`` for face signals.

    Boundary edges carry no row (the jump is undefined there).
    """
    interior = mesh.interior_edges
    ne = len(interior)
    pairs = mesh.edge_faces[interior]
    rows = np.repeat(np.arange(ne), 2)
    cols = pairs.ravel()
    data = np.tile([1.0, -1.0], ne)
    Ge = sp.coo_matrix((data, (rows, cols)), shape=(ne, mesh.n_faces)).tocsr()

    Ae = mesh.edge_lengths[interior]
    T = mesh.face_areas
    De = (-_scale_rows(Ge.T @ _diag(Ae), 1.0 / T)).tocsr()

    return DiscreteOperators(
        n_vertices=mesh.n_vertices,
        n_faces=mesh.n_faces,
        min_edge_length=mesh.min_edge_length,
        T=T, A=mesh.vertex_areas,
        Ge=Ge, De=De, Ae=Ae, interior_edges=interior,
    )


def build_operators(mesh):
    """Vertex and face operators over the same mesh in one container."""
    ops = build_vertex_operators(mesh)
    face = build_face_operators(mesh)
    ops.Ge, ops.De, ops.Ae = face.Ge, face.De, face.Ae
    ops.interior_edges = face.interior_edges
    return ops


def build_graph_operators(graph):
    """Weighted difference operators for a point-cloud graph.

    ``Gg`` acts on directed edges (``w_ij (f_i - f_j)``); ``Dg`` sums
    ``w_ij (F_ij - F_ji)`` per node.  ``Ku`` is the undirected reduction
    (one row per unordered pair) used by the TV solver, so each physical
    edge is penalized once.
    """
    n = graph.n_points
    edges = graph.edges
    w = graph.weights
    m = len(edges)

    rows = np.repeat(np.arange(m), 2)
    cols = edges.ravel()
    data = np.stack([w, -w], axis=1).ravel()
    Gg = sp.coo_matrix((data, (rows, cols)), shape=(m, n)).tocsr()

    # divergence: row i has +w_ij on column (i,j) and -w_ji on column (j,i)
    lookup = {(int(i), int(j)): m_idx for m_idx, (i, j) in enumerate(edges)}
    reverse = np.array([lookup[(int(j), int(i))] for i, j in edges])
    drows = np.concatenate([edges[:, 0], edges[:, 0]])
    dcols = np.concatenate([np.arange(m), reverse])
    ddata = np.concatenate([w, -w])
    Dg = sp.coo_matrix((ddata, (drows, dcols)), shape=(n, m)).tocsr()

    pairs, uw = graph.undirected()
    mu = len(pairs)
    urows = np.repeat(np.arange(mu), 2)
    ucols = pairs.ravel()
    udata = np.stack([uw, -uw], axis=1).ravel()
    Ku = sp.coo_matrix((udata, (urows, ucols)), shape=(mu, n)).tocsr()

    return DiscreteOperators(n_points=n, Gg=Gg, Dg=Dg, Ku=Ku, min_edge_length=1.0)


def estimate_operator_norm(op, tol=1e-6, max_iter=200, seed=0):
    """Spectral norm estimate by power iteration on ``op^T op``.

    Stops when the Rayleigh quotient changes by less than ``tol`` relative
    or after ``max_iter`` iterations; a zero matrix returns 0.
    """
    op = sp.csr_matrix(op)
    if op.nnz == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.shape[1])
    nx = np.linalg.norm(x)
    if nx == 0:
        return 0.0
    x /= nx
    lam = 0.0
    for _ in range(max_iter):
        y = op @ x
        lam_new = float(y @ y)
        z = op.T @ y
        nz = np.linalg.norm(z)
        if nz == 0:
            return float(np.sqrt(lam_new))
        x = z / nz
        if lam > 0 and abs(lam_new - lam) < tol * lam:
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(lam))


def export_matrix_market(ops, directory):
    """Write G, D, L to Matrix Market text files for external cross-checks."""
    import os

    os.makedirs(directory, exist_ok=True)
    written = []
    for name in ("G", "D", "L"):
        mat = getattr(ops, name)
        if mat is not None:
            path = os.path.join(directory, f"{name}.mtx")
            mmwrite(path, mat)
            written.append(path)
    return written
