"""Simplicial meshes with global-index based entity orientation.

Every cell stores its vertices in ascending global index order.  Local
entities (edges, faces) are read off that ordered tuple, so two cells that
share an edge or a face always see it with the same vertex order, and
hence the same tangent and normal directions.  No sign corrections are
needed anywhere downstream.

Local numbering
---------------
triangle:    edge k is opposite vertex k: (1, 2), (0, 2), (0, 1)
tetrahedron: edges (0,1) (0,2) (0,3) (1,2) (1,3) (2,3)
             faces (0,1,2) (0,1,3) (0,2,3) (1,2,3)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

REFERENCE_VERTICES = {
    2: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    3: np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
}

# local sub-entities of the reference cell, keyed by (cell dim, entity dim)
LOCAL_ENTITIES = {
    (2, 0): [(0,), (1,), (2,)],
    (2, 1): [(1, 2), (0, 2), (0, 1)],
    (2, 2): [(0, 1, 2)],
    (3, 0): [(0,), (1,), (2,), (3,)],
    (3, 1): list(combinations(range(4), 2)),
    (3, 2): list(combinations(range(4), 3)),
    (3, 3): [(0, 1, 2, 3)],
}

# clockwise rotation; the 2D facet normal is R @ t
ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class CellGeometry:
    """Affine map x = J X + x_K of the reference cell onto one cell."""

    jacobian: np.ndarray
    detJ: float
    inverse_jacobian: np.ndarray
    translation: np.ndarray

    @property
    def inverse_jacobian_transposed(self) -> np.ndarray:
        return self.inverse_jacobian.T

    def push_forward(self, X: np.ndarray) -> np.ndarray:
        return X @ self.jacobian.T + self.translation

    def pull_back(self, x: np.ndarray) -> np.ndarray:
        return (x - self.translation) @ self.inverse_jacobian.T


@dataclass(frozen=True)
class FacetFrame:
    facet: int
    tangents: tuple
    normal: np.ndarray
    measure: float


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable simplicial mesh; connectivity is derived at construction."""

    vertices: np.ndarray
    cells: np.ndarray
    _topology: dict = field(default_factory=dict, repr=False)
    _cell_entities: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=float)
        cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise MeshError("vertices must be an (nv, 2) or (nv, 3) array")
        dim = vertices.shape[1]
        if cells.ndim != 2 or cells.shape[1] != dim + 1:
            raise MeshError(f"cells must be an (nc, {dim + 1}) array")
        if np.any(np.diff(cells, axis=1) <= 0):
            raise MeshError("cell vertex tuples must be strictly ascending")
        vertices.flags.writeable = False
        cells.flags.writeable = False
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "cells", cells)
        self._build_topology()
        det = self.jacobians()[1]
        if np.any(np.abs(det) <= 1e-14 * self.h_max ** dim):
            raise MeshError("degenerate cell (det J = 0)")

    @classmethod
    def from_cells(cls, vertices, cells) -> "Mesh":
        """Build a mesh, sorting each cell tuple by global vertex index."""
        return cls(np.asarray(vertices, dtype=float), np.sort(np.asarray(cells), axis=1))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    def _build_topology(self):
        dim = self.dim
        self._topology[0] = np.arange(self.num_vertices).reshape(-1, 1)
        self._cell_entities[0] = self.cells
        for d in range(1, dim):
            local = LOCAL_ENTITIES[(dim, d)]
            candidates = np.concatenate([self.cells[:, list(e)] for e in local])
            unique, inverse = np.unique(candidates, axis=0, return_inverse=True)
            self._topology[d] = unique
            self._cell_entities[d] = inverse.reshape(len(local), -1).T.copy()
        self._topology[dim] = self.cells
        self._cell_entities[dim] = np.arange(self.num_cells).reshape(-1, 1)

        facet_cells = [[] for _ in range(len(self._topology[dim - 1]))]
        for c, facets in enumerate(self._cell_entities[dim - 1]):
            for f in facets:
                facet_cells[f].append(c)
        if any(len(fc) > 2 for fc in facet_cells):
            raise MeshError("non-manifold mesh: facet shared by more than two cells")
        self._topology["facet_cells"] = facet_cells

    def entities(self, d: int) -> np.ndarray:
        """Vertex tuples (ascending) of all entities of topological dim ``d``."""
        return self._topology[d]

    def num_entities(self, d: int) -> int:
        return len(self._topology[d])

    def cell_entities(self, d: int) -> np.ndarray:
        """(num_cells, num_local_entities) global ids of each cell's entities."""
        return self._cell_entities[d]

    @property
    def edges(self) -> np.ndarray:
        return self._topology[1]

    @property
    def faces(self) -> np.ndarray:
        if self.dim != 3:
            raise MeshError("faces are only stored for tetrahedral meshes")
        return self._topology[2]

    @property
    def facets(self) -> np.ndarray:
        return self._topology[self.dim - 1]

    def facet_cells(self, facet: int) -> list:
        return self._topology["facet_cells"][facet]

    def boundary_facets(self) -> np.ndarray:
        fc = self._topology["facet_cells"]
        return np.array([f for f, cells in enumerate(fc) if len(cells) == 1], dtype=np.int64)

    def interior_facets(self) -> np.ndarray:
        fc = self._topology["facet_cells"]
        return np.array([f for f, cells in enumerate(fc) if len(cells) == 2], dtype=np.int64)

    def boundary_entities(self, d: int) -> np.ndarray:
        """Ids of entities of dim ``d`` lying in the closure of a boundary facet."""
        facets = self.facets[self.boundary_facets()]
        if d == self.dim - 1:
            return self.boundary_facets()
        if d == 0:
            return np.unique(facets)
        local = LOCAL_ENTITIES[(self.dim - 1, d)] if self.dim == 3 else None
        sub = np.unique(np.sort(np.concatenate([facets[:, list(e)] for e in local])), axis=0)
        lookup = {tuple(e): i for i, e in enumerate(self._topology[d])}
        return np.array(sorted(lookup[tuple(e)] for e in sub), dtype=np.int64)

    def jacobians(self):
        """Jacobians, determinants and translations of all cells (batched)."""
        x = self.vertices[self.cells]
        J = np.transpose(x[:, 1:] - x[:, :1], (0, 2, 1))
        return J, np.linalg.det(J), x[:, 0].copy()

    def cell_geometry(self, cell: int) -> CellGeometry:
        x = self.vertices[self.cells[cell]]
        J = (x[1:] - x[0]).T
        det = float(np.linalg.det(J))
        if det == 0.0:
            raise MeshError(f"cell {cell} is degenerate")
        return CellGeometry(J, det, np.linalg.inv(J), x[0].copy())

    def facet_frame(self, facet: int, cell: int | None = None) -> FacetFrame:
        """Tangent(s), unit normal and measure of a facet.

        When ``cell`` is given the frame is computed from that cell's local
        view of the facet, which yields the same vertex order as the global
        facet tuple because every cell is sorted.
        """
        verts = self.facets[facet]
        if cell is not None:
            cv = list(self.cells[cell])
            local = sorted(cv.index(v) for v in verts)
            verts = self.cells[cell][local]
        x = self.vertices[verts]
        if self.dim == 2:
            e = x[1] - x[0]
            length = float(np.linalg.norm(e))
            if length == 0.0:
                raise MeshError(f"facet {facet} is degenerate")
            t = e / length
            return FacetFrame(facet, (t,), ROTATION @ t, length)
        e1, e2 = x[1] - x[0], x[2] - x[0]
        cross = np.cross(e1, e2)
        area2 = float(np.linalg.norm(cross))
        if area2 == 0.0:
            raise MeshError(f"facet {facet} is degenerate")
        tangents = (e1 / np.linalg.norm(e1), e2 / np.linalg.norm(e2))
        return FacetFrame(facet, tangents, cross / area2, 0.5 * area2)

    @property
    def h_max(self) -> float:
        e = self.vertices[self.edges]
        return float(np.max(np.linalg.norm(e[:, 1] - e[:, 0], axis=1)))

    def write(self, path) -> None:
        lines = [f"{self.dim} {self.num_vertices} {self.num_cells}"]
        lines += [" ".join(repr(float(c)) for c in v) for v in self.vertices]
        lines += [" ".join(str(int(i)) for i in c) for c in self.cells]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path) -> "Mesh":
        tokens = Path(path).read_text().split()
        dim, nv, nc = (int(t) for t in tokens[:3])
        pos = 3
        verts = np.array(tokens[pos:pos + nv * dim], dtype=float).reshape(nv, dim)
        pos += nv * dim
        cells = np.array(tokens[pos:pos + nc * (dim + 1)], dtype=np.int64).reshape(nc, dim + 1)
        return cls.from_cells(verts, cells)


def unit_square_mesh(n: int, pattern: str = "regular", scale: float = 1.0) -> Mesh:
    """Triangulate [0, scale]^2 with an n x n grid of squares."""
    if n < 1 or scale <= 0:
        raise MeshError("need n >= 1 and scale > 0")
    s = np.linspace(0.0, scale, n + 1)
    X, Y = np.meshgrid(s, s)
    vertices = [np.column_stack([X.ravel(), Y.ravel()])]

    def v(i, j):
        return j * (n + 1) + i

    cells = []
    if pattern == "regular":
        for j in range(n):
            for i in range(n):
                cells.append((v(i, j), v(i + 1, j), v(i + 1, j + 1)))
                cells.append((v(i, j), v(i, j + 1), v(i + 1, j + 1)))
    elif pattern == "crisscross":
        centers = []
        base = (n + 1) ** 2
        for j in range(n):
            for i in range(n):
                c = base + j * n + i
                centers.append(((s[i] + s[i + 1]) / 2, (s[j] + s[j + 1]) / 2))
                a, b, cc, d = v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)
                cells += [(a, b, c), (b, cc, c), (cc, d, c), (d, a, c)]
        vertices.append(np.array(centers))
    else:
        raise MeshError(f"unknown pattern {pattern!r}")
    return Mesh.from_cells(np.concatenate(vertices), np.array(cells))


# Kuhn split of the unit cube along its main diagonal
_KUHN = [
    (0, 1, 3, 7), (0, 1, 5, 7), (0, 2, 3, 7),
    (0, 2, 6, 7), (0, 4, 5, 7), (0, 4, 6, 7),
]


def unit_cube_mesh(n: int) -> Mesh:
    """Split each of the n^3 subcubes of [0,1]^3 into 6 tetrahedra."""
    if n < 1:
        raise MeshError("need n >= 1")
    s = np.linspace(0.0, 1.0, n + 1)
    Z, Y, X = np.meshgrid(s, s, s, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def v(i, j, k):
        return (k * (n + 1) + j) * (n + 1) + i

    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                corner = [v(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) for c in range(8)]
                cells += [tuple(corner[c] for c in tet) for tet in _KUHN]
    return Mesh.from_cells(vertices, np.array(cells))


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement in 2D; in 3D the unit cube is remeshed at twice the resolution."""
    if mesh.dim == 3:
        n = int(round((mesh.num_cells / 6) ** (1 / 3)))
        if 6 * n ** 3 != mesh.num_cells or not np.allclose(mesh.vertices.min(0), 0) \
                or not np.allclose(mesh.vertices.max(0), 1):
            raise MeshError("3D refinement only supports unit_cube_mesh output")
        return unit_cube_mesh(2 * n)
    nv = mesh.num_vertices
    edges = mesh.edges
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.concatenate([mesh.vertices, midpoints])
    ce = mesh.cell_entities(1) + nv
    cells = []
    for (a, b, c), (m0, m1, m2) in zip(mesh.cells, ce):
        # m0 is the midpoint of (b, c), m1 of (a, c), m2 of (a, b)
        cells += [(a, m2, m1), (b, m0, m2), (c, m1, m0), (m0, m1, m2)]
    return Mesh.from_cells(vertices, np.array(cells))
