"""Uniform triangulation of the square (0, L)^2 with tagged boundary edges.

Vertices are numbered row-major in (y, x): vertex ``j * (n + 1) + i`` sits at
``(i * h, j * h)``. Boundary tags follow the electrode layout: ``Gamma1`` is
the left side x = 0, ``Gamma3`` the right side x = L, and ``Gamma2`` the
insulated top and bottom sides.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GAMMA1 = "Gamma1"
GAMMA2 = "Gamma2"
GAMMA3 = "Gamma3"
TAGS = (GAMMA1, GAMMA2, GAMMA3)


class MeshError(ValueError):
    """Invalid mesh configuration or topology."""


@dataclass(frozen=True)
class BoundaryEdge:
    endpoints: tuple[int, int]
    tag: str
    owner_triangle: int
    outward_normal: tuple[float, float]
    length: float


@dataclass(frozen=True)
class Mesh:
    """Immutable triangle mesh.

    Boundary edges are stored as parallel arrays (``edge_vertices``,
    ``edge_tags``, ``edge_owner``, ``edge_normals``, ``edge_lengths``);
    :attr:`boundary_edges` gives the same data as :class:`BoundaryEdge`
    records.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edge_vertices: np.ndarray
    edge_tags: np.ndarray
    edge_owner: np.ndarray
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    n: int
    L: float
    diagonal: str = "right"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def boundary_edges(self) -> list[BoundaryEdge]:
        return [self._edge(k) for k in range(len(self.edge_vertices))]

    def _edge(self, k: int) -> BoundaryEdge:
        a, b = self.edge_vertices[k]
        nx, ny = self.edge_normals[k]
        return BoundaryEdge(
            endpoints=(int(a), int(b)),
            tag=str(self.edge_tags[k]),
            owner_triangle=int(self.edge_owner[k]),
            outward_normal=(float(nx), float(ny)),
            length=float(self.edge_lengths[k]),
        )

    def edge_indices(self, tag: str) -> np.ndarray:
        """Indices into the boundary edge arrays carrying ``tag``."""
        if tag not in TAGS:
            raise MeshError(f"unknown boundary tag {tag!r}")
        return np.flatnonzero(self.edge_tags == tag)

    def tagged_vertices(self, tag: str) -> np.ndarray:
        """Sorted vertex indices touched by edges with ``tag``."""
        return np.unique(self.edge_vertices[self.edge_indices(tag)])

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def dump(self, path) -> None:
        """Write the plain-text debug format: vertices, triangles, edges."""
        with open(path, "w") as fh:
            fh.write(f"# vertices {self.num_vertices}\n")
            for x, y in self.vertices:
                fh.write(f"{float(x)!r} {float(y)!r}\n")
            fh.write(f"# triangles {self.num_triangles}\n")
            for i, j, k in self.triangles:
                fh.write(f"{i} {j} {k}\n")
            fh.write(f"# edges {len(self.edge_vertices)}\n")
            for (i, j), tag in zip(self.edge_vertices, self.edge_tags):
                fh.write(f"{i} {j} {tag}\n")


def load_mesh_dump(path) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int, str]]]:
    """Read back a file written by :meth:`Mesh.dump` (vertices, triangles, edges)."""
    sections: dict[str, list[list[str]]] = {}
    current = None
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "#":
                current = parts[1]
                sections[current] = []
            else:
                sections[current].append(parts)
    verts = np.array([[float(a), float(b)] for a, b in sections["vertices"]])
    tris = np.array([[int(a) for a in row] for row in sections["triangles"]], dtype=np.int64)
    edges = [(int(a), int(b), t) for a, b, t in sections["edges"]]
    return verts, tris, edges


def build_unit_square_mesh(n: int, L: float = 1.0, diagonal: str = "right") -> Mesh:
    """Structured mesh of (0, L)^2 with n cells per side, 2 triangles per cell.

    ``diagonal="right"`` splits each cell along lower-left to upper-right,
    ``"left"`` along lower-right to upper-left.
    """
    if int(n) != n or n < 1:
        raise MeshError(f"n must be a positive integer, got {n!r}")
    if not L > 0:
        raise MeshError(f"L must be positive, got {L!r}")
    if diagonal not in ("right", "left"):
        raise MeshError(f"unsupported diagonal pattern {diagonal!r}")
    n = int(n)
    L = float(L)
    h = L / n

    coords = np.arange(n + 1) * h
    coords[-1] = L
    X, Y = np.meshgrid(coords, coords)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i = i.ravel()
    j = j.ravel()
    v00 = j * (n + 1) + i
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    if diagonal == "right":
        lower = np.column_stack([v00, v10, v11])
        upper = np.column_stack([v00, v11, v01])
    else:
        lower = np.column_stack([v00, v10, v01])
        upper = np.column_stack([v10, v11, v01])
    # cell c owns triangles 2c and 2c+1
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    def cell(ci, cj):
        return cj * n + ci

    k = np.arange(n)
    edges, tags, owners, normals = [], [], [], []

    # Gamma1: x = 0, cells (0, k); the owner is whichever triangle has the left side
    left_owner = 2 * cell(0, k) + (1 if diagonal == "right" else 0)
    edges.append(np.column_stack([k * (n + 1), (k + 1) * (n + 1)]))
    tags.append(np.full(n, GAMMA1))
    owners.append(left_owner)
    normals.append(np.tile([-1.0, 0.0], (n, 1)))

    # Gamma2 bottom: y = 0, cells (k, 0); lower triangle in both patterns
    edges.append(np.column_stack([k, k + 1]))
    tags.append(np.full(n, GAMMA2))
    owners.append(2 * cell(k, 0))
    normals.append(np.tile([0.0, -1.0], (n, 1)))

    # Gamma3: x = L, cells (n-1, k)
    right_owner = 2 * cell(n - 1, k) + (0 if diagonal == "right" else 1)
    edges.append(np.column_stack([k * (n + 1) + n, (k + 1) * (n + 1) + n]))
    tags.append(np.full(n, GAMMA3))
    owners.append(right_owner)
    normals.append(np.tile([1.0, 0.0], (n, 1)))

    # Gamma2 top: y = L, cells (k, n-1); upper triangle in both patterns
    top = n * (n + 1)
    edges.append(np.column_stack([top + k, top + k + 1]))
    tags.append(np.full(n, GAMMA2))
    owners.append(2 * cell(k, n - 1) + 1)
    normals.append(np.tile([0.0, 1.0], (n, 1)))

    edge_vertices = np.concatenate(edges).astype(np.int64)
    p = vertices[edge_vertices]
    lengths = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    for arr in (vertices, triangles, edge_vertices):
        arr.setflags(write=False)
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        edge_vertices=edge_vertices,
        edge_tags=np.concatenate(tags),
        edge_owner=np.concatenate(owners).astype(np.int64),
        edge_normals=np.concatenate(normals),
        edge_lengths=lengths,
        n=n,
        L=L,
        diagonal=diagonal,
    )


def gamma_edges(mesh: Mesh, tag: str) -> list[BoundaryEdge]:
    return [mesh._edge(k) for k in mesh.edge_indices(tag)]
