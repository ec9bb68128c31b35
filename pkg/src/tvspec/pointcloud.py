"""k-nearest-neighbor graphs over point clouds and total-least-squares normals."""

from __future__ import annotations

import logging
from collections import deque

import numpy as np
from scipy.spatial import cKDTree

from .errors import TooFewPointsError
from .mesh import Signal

logger = logging.getLogger(__name__)


class PointCloudGraph:
    """Directed neighbor graph with Gaussian edge weights.

    Attributes
    ----------
    points : np.ndarray, shape (N, 3)
    k : int
        Neighborhood size used at construction.
    delta : float
        Gaussian bandwidth (squared-length units).
    edges : np.ndarray, shape (M, 2)
        Directed neighbor pairs ``(i, j)``; the set is symmetric (``(j, i)``
        is present whenever ``(i, j)`` is).
    weights : np.ndarray, shape (M,)
        ``exp(-|x_i - x_j|^2 / delta)`` per directed edge.
    """

    def __init__(self, points, k, delta, edges, weights):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.k = int(k)
        self.delta = float(delta)
        self.edges = np.ascontiguousarray(edges, dtype=np.int64)
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        order = np.lexsort((self.edges[:, 1], self.edges[:, 0]))
        self.edges = self.edges[order]
        self.weights = self.weights[order]
        self._neighbors = None

    @property
    def n_points(self):
        return len(self.points)

    @property
    def n_edges(self):
        return len(self.edges)

    def undirected(self):
        """Unique undirected edges and their weights (one row per pair i < j)."""
        lo = np.minimum(self.edges[:, 0], self.edges[:, 1])
        hi = np.maximum(self.edges[:, 0], self.edges[:, 1])
        pairs, index = np.unique(np.stack([lo, hi], axis=1), axis=0, return_index=True)
        return pairs, self.weights[index]

    def neighbor_lists(self):
        """Adjacency as a list of index arrays, one per point."""
        if self._neighbors is None:
            lists = [[] for _ in range(self.n_points)]
            for i, j in self.edges:
                lists[i].append(j)
            self._neighbors = [np.array(sorted(set(l)), dtype=np.int64) for l in lists]
        return self._neighbors


def build_point_cloud_graph(points, k, delta=None):
    """Connect each point to its ``k`` nearest Euclidean neighbors.

    The directed neighborhoods are symmetrized by union, and each edge gets
    the Gaussian weight ``exp(-d^2 / delta)``.  When ``delta`` is omitted it
    defaults to the mean squared distance to the k-th neighbor, so the
    farthest neighbor of a typical point has weight ``1/e``.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError("points must be an (n, 3) array")
    n = len(points)
    if n < k + 1:
        raise TooFewPointsError(f"need at least {k + 1} points for k={k}")

    tree = cKDTree(points)
    dist, idx = tree.query(points, k=k + 1)
    dist, idx = dist[:, 1:], idx[:, 1:]  # drop self matches

    if delta is None:
        delta = float(np.mean(dist[:, -1] ** 2))
    if delta <= 0:
        raise ValueError("delta must be positive")

    src = np.repeat(np.arange(n), k)
    dst = idx.ravel()
    directed = np.stack([src, dst], axis=1)
    both = np.vstack([directed, directed[:, ::-1]])
    edges = np.unique(both, axis=0)

    d2 = np.sum((points[edges[:, 0]] - points[edges[:, 1]]) ** 2, axis=1)
    weights = np.exp(-d2 / delta)
    return PointCloudGraph(points, k, delta, edges, weights)


def estimate_normals(graph, rank_tol=1e-8, root=0):
    """Per-point unit normals from the smallest covariance eigenvector.

    Signs are made globally consistent by breadth-first propagation from
    ``root`` with majority voting against already-oriented neighbors.
    Points whose neighborhood is rank deficient (all neighbors collinear)
    are flagged in ``signal.meta['rank_deficient']`` and receive the least
    degenerate direction of the whole cloud.
    """
    pts = graph.points
    n = graph.n_points
    neighbors = graph.neighbor_lists()

    normals = np.zeros((n, 3))
    deficient = []
    for i in range(n):
        nbr = neighbors[i]
        local = np.vstack([pts[nbr], pts[i][None, :]])
        centered = local - local.mean(axis=0)
        cov = centered.T @ centered
        w, v = np.linalg.eigh(cov)
        if len(nbr) < 2 or w[1] <= rank_tol * max(w[2], rank_tol):
            deficient.append(i)
            continue
        normals[i] = v[:, 0]

    if deficient:
        centered = pts - pts.mean(axis=0)
        _, v = np.linalg.eigh(centered.T @ centered)
        normals[deficient] = v[:, 0]
        logger.warning("rank-deficient neighborhoods at %d points", len(deficient))

    # sign propagation over a BFS spanning tree
    seen = np.zeros(n, dtype=bool)
    for start in [root] + list(range(n)):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in neighbors[i]:
                if seen[j]:
                    continue
                votes = sum(
                    np.sign(normals[j] @ normals[m]) for m in neighbors[j] if seen[m]
                )
                if votes < 0:
                    normals[j] = -normals[j]
                seen[j] = True
                queue.append(j)

    signal = Signal("points", normals)
    signal.meta["rank_deficient"] = np.array(deficient, dtype=np.int64)
    return signal
