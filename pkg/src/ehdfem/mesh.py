"""Structured triangulations of axis-aligned rectangles.

The solver only ever runs on tensor-product grids of a rectangle where each
grid cell is split along its lower-left to upper-right diagonal.  Keeping the
generator this small makes every downstream object (DOF maps, quadrature
tables, boundary flags) reproducible bit for bit.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of a rectangle.

    Attributes
    ----------
    domain : tuple of float
        ``(x_min, x_max, y_min, y_max)``.
    nx, ny : int
        Number of grid cells per direction; each cell holds two triangles.
    vertices : ndarray, shape (num_vertices, 2)
        Vertex coordinates, x-fastest row-major ordering.
    triangles : ndarray, shape (num_triangles, 3)
        Vertex indices per triangle, counterclockwise.
    edges : ndarray, shape (num_edges, 2)
        Unique edges as sorted vertex pairs, lexicographically ordered.
    triangle_edges : ndarray, shape (num_triangles, 3)
        Edge index opposite each local vertex (edge k connects local
        vertices k+1 and k+2, modulo 3).
    boundary_vertex, boundary_edge : ndarray of bool
        Flags for entities on the rectangle boundary.
    """

    domain: tuple
    nx: int
    ny: int
    vertices: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    edges: np.ndarray = field(repr=False)
    triangle_edges: np.ndarray = field(repr=False)
    boundary_vertex: np.ndarray = field(repr=False)
    boundary_edge: np.ndarray = field(repr=False)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]


def build_rect_mesh(nx, ny, domain=(0.0, 1.0, 0.0, 1.0)):
    """Triangulate ``domain`` into ``2*nx*ny`` triangles.

    Every cell is split along the diagonal running from its lower-left to its
    upper-right corner, so the two triangles of cell ``(i, j)`` are
    ``(v00, v10, v11)`` and ``(v00, v11, v01)``, both counterclockwise.

    Parameters
    ----------
    nx, ny : int
        Cells per direction, at least 1.
    domain : tuple of float
        ``(x_min, x_max, y_min, y_max)`` with positive extents.

    Returns
    -------
    Mesh
    """
    if not (isinstance(nx, (int, np.integer)) and isinstance(ny, (int, np.integer))):
        raise ValueError("nx and ny must be integers")
    if nx < 1 or ny < 1:
        raise ValueError(f"nx and ny must be >= 1, got nx={nx}, ny={ny}")
    x_min, x_max, y_min, y_max = map(float, domain)
    if not (x_min < x_max and y_min < y_max):
        raise ValueError(f"degenerate domain {domain}")

    x = np.linspace(x_min, x_max, nx + 1)
    y = np.linspace(y_min, y_max, ny + 1)
    xx, yy = np.meshgrid(x, y)  # row j holds y[j], x varies fastest
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    # Cell corners; vertex (i, j) sits at index j*(nx+1) + i.
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    v00 = (jj * (nx + 1) + ii).ravel()
    v10 = v00 + 1
    v01 = v00 + (nx + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    # Unique edges in lexicographic order of their sorted vertex pairs.  Edge
    # k of a triangle is the one opposite local vertex k.
    raw = np.concatenate(
        [triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]]
    )
    raw.sort(axis=1)
    edges, inverse = np.unique(raw, axis=0, return_inverse=True)
    triangle_edges = inverse.reshape(3, -1).T.copy()

    # An edge on the boundary belongs to exactly one triangle.
    counts = np.bincount(inverse, minlength=edges.shape[0])
    boundary_edge = counts == 1
    boundary_vertex = np.zeros(vertices.shape[0], dtype=bool)
    boundary_vertex[edges[boundary_edge].ravel()] = True

    return Mesh(
        domain=(x_min, x_max, y_min, y_max),
        nx=int(nx),
        ny=int(ny),
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        triangle_edges=triangle_edges,
        boundary_vertex=boundary_vertex,
        boundary_edge=boundary_edge,
    )


def triangle_areas(mesh):
    """Signed areas of all triangles (positive for counterclockwise)."""
    p0 = mesh.vertices[mesh.triangles[:, 0]]
    p1 = mesh.vertices[mesh.triangles[:, 1]]
    p2 = mesh.vertices[mesh.triangles[:, 2]]
    d1 = p1 - p0
    d2 = p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def mesh_size(mesh):
    """Maximum triangle diameter (the longest edge of any triangle)."""
    tri = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
    sides = tri - np.roll(tri, shift=1, axis=1)
    lengths = np.linalg.norm(sides, axis=2)
    return float(lengths.max())
