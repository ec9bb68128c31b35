"""Synthetic test geometry: icospheres, grid cubes, planar patches.

All generators return plain ``(vertices, faces)`` arrays; wrap them in
:class:`tvspec.mesh.TriangleMesh` as needed.  The icosphere is built from a
pole-aligned icosahedron so that ``(0, 0, 1)`` is always a vertex.
"""

from __future__ import annotations

import numpy as np


def icosahedron():
    """Pole-aligned unit icosahedron (12 vertices, 20 faces)."""
    lat = np.arctan(0.5)
    top = [(np.cos(lat) * np.cos(a), np.cos(lat) * np.sin(a), np.sin(lat))
           for a in 2.0 * np.pi * np.arange(5) / 5.0]
    bot = [(np.cos(lat) * np.cos(a), np.cos(lat) * np.sin(a), -np.sin(lat))
           for a in 2.0 * np.pi * (np.arange(5) + 0.5) / 5.0]
    verts = np.array([(0.0, 0.0, 1.0)] + top + bot + [(0.0, 0.0, -1.0)])

    faces = []
    for i in range(5):
        j = (i + 1) % 5
        faces.append((0, 1 + i, 1 + j))               # north cap
        faces.append((1 + i, 6 + i, 1 + j))           # upper band
        faces.append((1 + j, 6 + i, 6 + j))           # lower band
        faces.append((6 + i, 11, 6 + j))              # south cap
    return verts, np.array(faces, dtype=np.int64)


def icosphere(subdivisions=3, radius=1.0):
    """Icosphere obtained by midpoint subdivision and projection.

    Parameters
    ----------
    subdivisions : int
        Number of 4:1 subdivision rounds (3 gives 642 vertices, 4 gives 2562).
    radius : float
        Sphere radius.
    """
    verts, faces = icosahedron()
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return radius * verts, faces


def _subdivide(verts, faces):
    edges = np.sort(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    midpoints = 0.5 * (verts[uniq[:, 0]] + verts[uniq[:, 1]])
    mid_index = len(verts) + np.arange(len(uniq))

    m = mid_index[inverse].reshape(-1, 3)  # midpoint ids of edges (01, 12, 20)
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    ab, bc, ca = m[:, 0], m[:, 1], m[:, 2]
    new_faces = np.concatenate([
        np.stack([a, ab, ca], axis=1),
        np.stack([ab, b, bc], axis=1),
        np.stack([ca, bc, c], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ])
    return np.vstack([verts, midpoints]), new_faces.astype(np.int64)


def grid_patch(nx=10, ny=10, size=1.0):
    """Planar triangulated rectangle in the z=0 plane (open boundary)."""
    xs = np.linspace(0.0, size, nx)
    ys = np.linspace(0.0, size, ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([gx.ravel(), gy.ravel(), np.zeros(nx * ny)], axis=1)

    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            v00 = i * ny + j
            v01 = v00 + 1
            v10 = v00 + ny
            v11 = v10 + 1
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))
    return verts, np.array(faces, dtype=np.int64)


def cube(n=8, size=1.0):
    """Axis-aligned cube with each side an ``n x n`` grid, welded and outward oriented.

    Centered at the origin with edge length ``size``.
    """
    h = 0.5 * size
    t = np.linspace(-h, h, n + 1)
    u, v = np.meshgrid(t, t, indexing="ij")
    u, v = u.ravel(), v.ravel()

    sides = [
        np.stack([u, v, np.full_like(u, h)], axis=1),    # +z
        np.stack([v, u, np.full_like(u, -h)], axis=1),   # -z
        np.stack([v, np.full_like(u, h), u], axis=1),    # +y
        np.stack([u, np.full_like(u, -h), v], axis=1),   # -y
        np.stack([np.full_like(u, h), u, v], axis=1),    # +x
        np.stack([np.full_like(u, -h), v, u], axis=1),   # -x
    ]

    all_verts = []
    all_faces = []
    offset = 0
    m = n + 1
    for pts in sides:
        all_verts.append(pts)
        for i in range(n):
            for j in range(n):
                v00 = offset + i * m + j
                v01 = v00 + 1
                v10 = v00 + m
                v11 = v10 + 1
                all_faces.append((v00, v10, v11))
                all_faces.append((v00, v11, v01))
        offset += m * m
    verts = np.vstack(all_verts)
    faces = np.array(all_faces, dtype=np.int64)

    # weld duplicated edge/corner vertices between sides
    rounded = np.round(verts / (size * 1e-12)) * (size * 1e-12)
    uniq, index, inverse = np.unique(rounded, axis=0, return_index=True, return_inverse=True)
    verts = verts[index]
    faces = inverse[faces]
    return verts, faces


def geodesic_cap_indicator(verts, center=(0.0, 0.0, 1.0), radius=0.5):
    """Indicator of the geodesic cap around ``center`` on a sphere mesh (per vertex)."""
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    unit = verts / np.linalg.norm(verts, axis=1, keepdims=True)
    ang = np.arccos(np.clip(unit @ c, -1.0, 1.0))
    return (ang <= radius).astype(np.float64)


def cap_face_indicator(verts, faces, center=(0.0, 0.0, 1.0), radius=0.5):
    """Indicator of the geodesic cap per face.

    A face counts as inside when all three of its vertices are, which keeps
    the jump set a tight polyline around the cap circle (centroid-based
    selection zigzags and overshoots the analytic boundary length badly).
    """
    inside = geodesic_cap_indicator(verts, center=center, radius=radius)
    return inside[faces].min(axis=1)


def bumpy_sphere(subdivisions=3, amplitude=0.12, frequency=4.0):
    """Sphere with smooth sinusoidal radial bumps (breaks the Gauss-map symmetry)."""
    verts, faces = icosphere(subdivisions)
    bump = np.cos(frequency * verts[:, 0]) * np.cos(frequency * verts[:, 1]) \
        * np.cos(frequency * verts[:, 2])
    return verts * (1.0 + amplitude * bump)[:, None], faces
