"""Conforming triangular meshes.

A :class:`Mesh` stores counterclockwise triangles together with the derived
edge structure needed by edge elements: canonically oriented edges (lower
vertex index first), triangle/edge incidence with orientation signs, and the
element patches used by the error estimator.  Local edge ``k`` of a triangle
is the edge opposite its local vertex ``k``.

Refinement is newest-vertex bisection (:func:`bisect`) with conforming
closure.  Meshes are never modified in place.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Mesh",
    "FaceData",
    "NonConforming",
    "structured_mesh",
    "build_faces",
    "vertex_patch",
    "bisect",
    "write_mesh",
    "read_mesh",
]


class NonConforming(ValueError):
    """Raised when the triangulation is not a conforming mesh."""


def _signed_areas(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    d1 = p1 - p0
    d2 = p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _local_edges(triangles):
    # local edge k is opposite local vertex k
    return np.stack(
        [triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1
    )


class Mesh:
    """Conforming triangulation of an axis-aligned rectangle.

    Parameters
    ----------
    vertices : (nv, 2) array
        Vertex coordinates.
    triangles : (nt, 3) int array
        Vertex indices.  Clockwise triangles are reoriented.
    region_id : (nt,) int array, optional
        Material region of every triangle (default 0).
    refinement_edge : (nt,) int array, optional
        Local index of the edge bisected next.  Defaults to the longest edge,
        ties broken by the lowest global edge index.
    box : (xmin, xmax, ymin, ymax), optional
        Bounding rectangle.  Defaults to the vertex bounding box.
    """

    def __init__(self, vertices, triangles, region_id=None, refinement_edge=None, box=None):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        nt = triangles.shape[0]
        if region_id is None:
            region_id = np.zeros(nt, dtype=np.int64)
        region_id = np.asarray(region_id, dtype=np.int64).copy()
        if refinement_edge is not None:
            refinement_edge = np.asarray(refinement_edge, dtype=np.int64).copy()

        area = _signed_areas(vertices, triangles)
        flip = area < 0
        if flip.any():
            # swapping local vertices 1 and 2 also swaps local edges 1 and 2
            triangles[flip] = triangles[flip][:, [0, 2, 1]]
            if refinement_edge is not None:
                swap = np.array([0, 2, 1])
                refinement_edge[flip] = swap[refinement_edge[flip]]

        self.vertices = vertices
        self.triangles = triangles
        self.region_id = region_id
        if box is None:
            lo = vertices.min(axis=0)
            hi = vertices.max(axis=0)
            box = (lo[0], hi[0], lo[1], hi[1])
        self.box = tuple(float(b) for b in box)

        self._build_edges()
        if refinement_edge is None:
            refinement_edge = self._longest_edges()
        self.refinement_edge = refinement_edge

        for name in ("vertices", "triangles", "region_id", "refinement_edge"):
            getattr(self, name).setflags(write=False)

    def _build_edges(self):
        loc = _local_edges(self.triangles)
        keys = np.sort(loc.reshape(-1, 2), axis=1)
        edges, inverse, counts = np.unique(
            keys, axis=0, return_inverse=True, return_counts=True
        )
        if np.any(counts > 2):
            raise NonConforming(f"{int(np.sum(counts > 2))} edges shared by more than two triangles")
        nt = self.triangles.shape[0]
        self.edges = edges
        self.tri_edges = inverse.reshape(nt, 3)
        self.tri_edge_sign = np.where(loc[:, :, 0] < loc[:, :, 1], 1, -1)

        edge_tris = -np.ones((edges.shape[0], 2), dtype=np.int64)
        flat = self.tri_edges.ravel()
        owner = np.repeat(np.arange(nt), 3)
        order = np.argsort(flat, kind="stable")
        sorted_edges = flat[order]
        first = np.ones(sorted_edges.size, dtype=bool)
        first[1:] = sorted_edges[1:] != sorted_edges[:-1]
        edge_tris[sorted_edges[first], 0] = owner[order[first]]
        edge_tris[sorted_edges[~first], 1] = owner[order[~first]]
        self.edge_tris = edge_tris
        for name in ("edges", "tri_edges", "tri_edge_sign", "edge_tris"):
            getattr(self, name).setflags(write=False)

    def _longest_edges(self):
        lengths = self.edge_lengths[self.tri_edges]
        longest = lengths.max(axis=1, keepdims=True)
        candidate = np.isclose(lengths, longest, rtol=1e-12, atol=0.0)
        edge_id = np.where(candidate, self.tri_edges, np.iinfo(np.int64).max)
        return np.argmin(edge_id, axis=1).astype(np.int64)

    def __repr__(self):
        return (
            f"Mesh(n_vertices={self.n_vertices}, n_triangles={self.n_triangles}, "
            f"n_edges={self.n_edges})"
        )

    # -- sizes -------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    # -- geometry ----------------------------------------------------------
    @cached_property
    def areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def diameters(self) -> np.ndarray:
        """Element diameters h_K (longest edge)."""
        return self.edge_lengths[self.tri_edges].max(axis=1)

    @cached_property
    def inradii(self) -> np.ndarray:
        """Radius rho_K of the inscribed circle."""
        perimeter = self.edge_lengths[self.tri_edges].sum(axis=1)
        return 2.0 * self.areas / perimeter

    @cached_property
    def shape_regularity(self) -> np.ndarray:
        """Elementwise beta_K = h_K / rho_K."""
        return self.diameters / self.inradii

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @property
    def beta(self) -> float:
        return float(self.shape_regularity.max())

    @property
    def domain_diameter(self) -> float:
        x0, x1, y0, y1 = self.box
        return float(np.hypot(x1 - x0, y1 - y0))

    @property
    def box_area(self) -> float:
        x0, x1, y0, y1 = self.box
        return (x1 - x0) * (y1 - y0)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def min_angles(self) -> np.ndarray:
        """Smallest interior angle of every triangle, in radians."""
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cos = np.einsum("ij,ij->i", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            )
            angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
        return np.min(angles, axis=0)

    # -- topology ----------------------------------------------------------
    @property
    def boundary_edges(self) -> np.ndarray:
        """Boolean mask of edges with a single incident triangle."""
        return self.edge_tris[:, 1] < 0

    @cached_property
    def _patch_csr(self) -> sp.csr_matrix:
        nt = self.n_triangles
        incidence = sp.csr_matrix(
            (np.ones(3 * nt), (np.repeat(np.arange(nt), 3), self.triangles.ravel())),
            shape=(nt, self.n_vertices),
        )
        adjacency = (incidence @ incidence.T).tocsr()
        adjacency.sort_indices()
        return adjacency

    @property
    def patch_indptr(self) -> np.ndarray:
        return self._patch_csr.indptr

    @property
    def patch_indices(self) -> np.ndarray:
        return self._patch_csr.indices

    def patch_reduce(self, values, op=np.minimum) -> np.ndarray:
        """Reduce per-element ``values`` over every vertex patch with ``op``."""
        values = np.asarray(values)
        return op.reduceat(values[self.patch_indices], self.patch_indptr[:-1])

    def is_conforming(self) -> bool:
        """Check that no vertex hangs on another triangle's edge.

        A hanging vertex leaves an edge with one incident triangle inside the
        domain, so it suffices that single-sided edges all lie on the bounding
        box and that Euler's relation holds for a simply connected domain.
        """
        if np.any(self.areas <= 0):
            return False
        ends = self.vertices[self.edges[self.boundary_edges]]
        x0, x1, y0, y1 = self.box
        tol = 1e-12 * max(1.0, self.domain_diameter)
        on_box = (
            np.all(np.abs(ends[:, :, 0] - x0) < tol, axis=1)
            | np.all(np.abs(ends[:, :, 0] - x1) < tol, axis=1)
            | np.all(np.abs(ends[:, :, 1] - y0) < tol, axis=1)
            | np.all(np.abs(ends[:, :, 1] - y1) < tol, axis=1)
        )
        used = np.unique(self.triangles).size
        euler = used - self.n_edges + self.n_triangles == 1
        return bool(on_box.all() and euler)

    def straddles_regions(self, region_map: Callable, samples: int = 4) -> np.ndarray:
        """Return a mask of triangles whose interior meets two regions."""
        p = self.vertices[self.triangles]
        bad = np.zeros(self.n_triangles, dtype=bool)
        g = np.linspace(0.05, 0.9, samples)
        for a in g:
            for b in g:
                if a + b >= 0.95:
                    continue
                x = p[:, 0] + a * (p[:, 1] - p[:, 0]) + b * (p[:, 2] - p[:, 0])
                bad |= np.asarray(region_map(x)) != self.region_id
        return bad


@dataclass(frozen=True)
class FaceData:
    """Per-edge geometric data.

    ``normals`` are rotations by +90 degrees of the unit tangent from the
    lower to the higher vertex index.  ``tri_sign[f, s]`` is the dot product
    of the outward normal of triangle ``tris[f, s]`` with ``normals[f]``.
    """

    normals: np.ndarray
    lengths: np.ndarray
    tris: np.ndarray
    tri_sign: np.ndarray
    interior: np.ndarray

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    @property
    def n_boundary(self) -> int:
        return int((~self.interior).sum())


def build_faces(mesh: Mesh) -> FaceData:
    """Classify edges and attach normals, lengths and incident triangles."""
    v = mesh.vertices
    t = v[mesh.edges[:, 1]] - v[mesh.edges[:, 0]]
    lengths = np.hypot(t[:, 0], t[:, 1])
    t = t / lengths[:, None]
    normals = np.column_stack([-t[:, 1], t[:, 0]])

    tris = mesh.edge_tris.copy()
    tri_sign = np.zeros(tris.shape, dtype=np.int64)
    for side in range(2):
        has = tris[:, side] >= 0
        k = tris[has, side]
        # the third vertex lies on the inner side; outward normal points away
        local = np.argmax(mesh.tri_edges[k] == np.flatnonzero(has)[:, None], axis=1)
        opposite = v[mesh.triangles[k, local]]
        inward = opposite - v[mesh.edges[has, 0]]
        tri_sign[has, side] = np.where(np.einsum("ij,ij->i", inward, normals[has]) < 0, 1, -1)
    interior = tris[:, 1] >= 0
    return FaceData(normals, lengths, tris, tri_sign, interior)


def vertex_patch(mesh: Mesh, k: int) -> np.ndarray:
    """Indices of all triangles whose closure touches triangle ``k``."""
    return mesh.patch_indices[mesh.patch_indptr[k] : mesh.patch_indptr[k + 1]].copy()


def structured_mesh(n: int, box: Sequence[float] = (-1.0, 1.0, -1.0, 1.0), region_map: Callable | None = None) -> Mesh:
    """Cartesian n x n grid with every square split into four triangles.

    Each square is cut along the segments joining its barycenter to its four
    corners.  ``region_map`` maps an (m, 2) array of points to region ids and
    is evaluated at the triangle barycenters.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    x0, x1, y0, y1 = (float(b) for b in box)
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    mx, my = np.meshgrid(cx, cy)
    centers = np.column_stack([mx.ravel(), my.ravel()])
    vertices = np.vstack([grid, centers])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i = i.ravel()
    j = j.ravel()
    v00 = i + (n + 1) * j
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    c = (n + 1) ** 2 + i + n * j
    triangles = np.stack(
        [
            np.column_stack([v00, v10, c]),
            np.column_stack([v10, v11, c]),
            np.column_stack([v11, v01, c]),
            np.column_stack([v01, v00, c]),
        ],
        axis=1,
    ).reshape(-1, 3)

    if region_map is None:
        region_id = np.zeros(triangles.shape[0], dtype=np.int64)
    else:
        region_id = np.asarray(region_map(vertices[triangles].mean(axis=1)), dtype=np.int64)
    return Mesh(vertices, triangles, region_id, box=(x0, x1, y0, y1))


def bisect(mesh: Mesh, marked) -> Mesh:
    """Refine ``mesh`` by newest-vertex bisection.

    All three edges of every marked triangle are bisected, so a marked
    triangle is split into four children of roughly half its diameter.
    Further edges are bisected as required to keep the mesh conforming.
    """
    marked = np.asarray(marked, dtype=np.int64).ravel()
    if marked.size == 0:
        return mesh

    nt = mesh.n_triangles
    ref_edge = mesh.tri_edges[np.arange(nt), mesh.refinement_edge]
    cut = np.zeros(mesh.n_edges, dtype=bool)
    cut[mesh.tri_edges[marked].ravel()] = True
    while True:
        touched = cut[mesh.tri_edges].any(axis=1)
        need = touched & ~cut[ref_edge]
        if not need.any():
            break
        cut[ref_edge[need]] = True

    nv = mesh.n_vertices
    cut_ids = np.flatnonzero(cut)
    ends = mesh.edges[cut_ids]
    midpoints = 0.5 * (mesh.vertices[ends[:, 0]] + mesh.vertices[ends[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])
    stride = vertices.shape[0]
    # cut edges are sorted lexicographically, hence so are their keys
    keys = ends[:, 0] * stride + ends[:, 1]
    new_ids = nv + np.arange(cut_ids.size)

    def lookup(a, b):
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        k = lo * stride + hi
        pos = np.searchsorted(keys, k)
        pos = np.minimum(pos, keys.size - 1)
        hit = (keys.size > 0) & (keys[pos] == k)
        return np.where(hit, new_ids[pos], -1)

    # normalize so that the refinement edge is opposite local vertex 0
    r = mesh.refinement_edge
    rot = (np.arange(3)[None, :] + r[:, None]) % 3
    tris = np.take_along_axis(mesh.triangles, rot, axis=1)
    regions = mesh.region_id.copy()

    done_t, done_r = [], []
    while tris.shape[0]:
        mid = lookup(tris[:, 1], tris[:, 2])
        split = mid >= 0
        done_t.append(tris[~split])
        done_r.append(regions[~split])
        a, b, c = tris[split].T
        m = mid[split]
        # children keep counterclockwise order with the new vertex first
        tris = np.vstack([np.column_stack([m, a, b]), np.column_stack([m, c, a])])
        regions = np.concatenate([regions[split], regions[split]])

    triangles = np.vstack(done_t)
    region_id = np.concatenate(done_r)
    return Mesh(
        vertices,
        triangles,
        region_id,
        refinement_edge=np.zeros(triangles.shape[0], dtype=np.int64),
        box=mesh.box,
    )


def write_mesh(mesh: Mesh, path) -> None:
    """Write the plain text format: vertex count, coordinates, triangle count,
    then one ``i j k region`` line per triangle."""
    lines = [str(mesh.n_vertices)]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines.append(str(mesh.n_triangles))
    lines += [f"{a} {b} {c} {r}" for (a, b, c), r in zip(mesh.triangles, mesh.region_id)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path, box=None) -> Mesh:
    with open(path) as fh:
        tokens = [line.split() for line in fh if line.strip()]
    nv = int(tokens[0][0])
    vertices = np.array(tokens[1 : 1 + nv], dtype=float)
    nt = int(tokens[1 + nv][0])
    tri = np.array(tokens[2 + nv : 2 + nv + nt], dtype=np.int64)
    return Mesh(vertices, tri[:, :3], tri[:, 3], box=box)
