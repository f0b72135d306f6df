"""Scalar and vector Lagrange spaces on a triangulated rectangle.

A space pins down the global degree-of-freedom numbering: scalar DOFs are
the mesh vertices followed by the edge midpoints (P2) in mesh order, and
vector spaces interleave the two components of each node, so DOF ``2*k + c``
is component ``c`` at node ``k``.  Both maps are pure functions of the mesh,
which keeps every assembled matrix reproducible.
"""

import numpy as np

from . import elements


class FeSpace:
    """Continuous Lagrange space of degree 1 or 2 with 1 or 2 components.

    Attributes
    ----------
    mesh : ehdfem.mesh.Mesh
    degree : int
    components : int
    num_nodes : int
        Scalar nodes (vertices, plus edge midpoints for P2).
    node_coords : ndarray, shape (num_nodes, 2)
    boundary_node : ndarray of bool, shape (num_nodes,)
    dof_count : int
        ``components * num_nodes``.
    cell_dofs : ndarray, shape (num_triangles, local_dofs)
        Global DOF indices per triangle; vector spaces interleave components
        locally as well, so local DOF ``2*a + c`` is basis node ``a``,
        component ``c``.
    dirichlet_mask : ndarray of bool, shape (dof_count,)
        True on constrained DOFs (all components of boundary nodes when the
        space was built with ``dirichlet=True``).
    """

    def __init__(self, mesh, degree, components=1, dirichlet=False):
        if degree not in (1, 2):
            raise ValueError(f"unsupported polynomial degree {degree}")
        if components not in (1, 2):
            raise ValueError(f"unsupported component count {components}")
        self.mesh = mesh
        self.degree = degree
        self.components = components
        self.dirichlet = bool(dirichlet)

        if degree == 1:
            node_cells = mesh.triangles
            self.node_coords = mesh.vertices
            self.boundary_node = mesh.boundary_vertex
        else:
            midpoints = 0.5 * (
                mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]]
            )
            node_cells = np.hstack(
                [mesh.triangles, mesh.num_vertices + mesh.triangle_edges]
            )
            self.node_coords = np.vstack([mesh.vertices, midpoints])
            self.boundary_node = np.concatenate(
                [mesh.boundary_vertex, mesh.boundary_edge]
            )

        self.num_nodes = self.node_coords.shape[0]
        self.dof_count = components * self.num_nodes
        if components == 1:
            self.cell_dofs = np.ascontiguousarray(node_cells)
        else:
            interleaved = np.empty(
                (node_cells.shape[0], 2 * node_cells.shape[1]), dtype=node_cells.dtype
            )
            interleaved[:, 0::2] = 2 * node_cells
            interleaved[:, 1::2] = 2 * node_cells + 1
            self.cell_dofs = interleaved

        self.dirichlet_mask = np.zeros(self.dof_count, dtype=bool)
        if dirichlet:
            self.dirichlet_mask[:] = np.repeat(self.boundary_node, components)

        self._table_cache = {}

    def __repr__(self):
        kind = "vector" if self.components == 2 else "scalar"
        return (
            f"FeSpace(P{self.degree} {kind}, {self.dof_count} dofs, "
            f"dirichlet={self.dirichlet})"
        )


def build_space(mesh, degree, components=1, dirichlet=False):
    """Construct an :class:`FeSpace`; see the class docstring for layout."""
    return FeSpace(mesh, degree, components=components, dirichlet=dirichlet)


def _call_field(f, x, y, t):
    return f(x, y) if t is None else f(x, y, t)


def interpolate(space, f, t=None):
    """Nodal interpolant of a callable field.

    Parameters
    ----------
    space : FeSpace
    f : callable
        ``f(x, y)`` or ``f(x, y, t)`` accepting coordinate arrays.  For
        vector spaces it must return the two components either as a pair of
        arrays or stacked along the last axis.
    t : float, optional
        Passed through to ``f`` when given.

    Returns
    -------
    ndarray, shape (dof_count,)

    Raises
    ------
    ValueError
        If any sampled value is NaN or infinite; the message names the first
        offending node and its coordinates.
    """
    x = space.node_coords[:, 0]
    y = space.node_coords[:, 1]
    raw = _call_field(f, x, y, t)
    if space.components == 1:
        values = np.broadcast_to(np.asarray(raw, dtype=np.float64), x.shape).copy()
    else:
        if isinstance(raw, (tuple, list)):
            comp = [np.broadcast_to(np.asarray(c, dtype=np.float64), x.shape) for c in raw]
        else:
            arr = np.asarray(raw, dtype=np.float64)
            if arr.shape[-1] != 2:
                raise ValueError(
                    "vector field must return a pair of components, got shape "
                    f"{arr.shape}"
                )
            comp = [arr[..., 0], arr[..., 1]]
        values = np.empty(space.dof_count)
        values[0::2] = comp[0]
        values[1::2] = comp[1]

    bad = ~np.isfinite(values)
    if bad.any():
        dof = int(np.flatnonzero(bad)[0])
        node = dof // space.components
        px, py = space.node_coords[node]
        raise ValueError(
            f"interpolated field is not finite at node {node} "
            f"(x={px:.6g}, y={py:.6g})"
        )
    return values


def mean_functional(space, quad_degree=6):
    """Vector ``m`` with ``m @ coeffs == integral of the discrete function``.

    Only defined for scalar spaces.
    """
    if space.components != 1:
        raise ValueError("mean functional is only defined for scalar spaces")
    from . import assembly  # deferred: assembly builds on spaces

    tables = assembly.element_tables(space, quad_degree)
    # sum_q w_q |J| phi_a(q) per element, scattered to global nodes
    local = np.einsum("eq,qa->ea", tables.wdet, tables.val)
    m = np.zeros(space.dof_count)
    np.add.at(m, space.cell_dofs, local)
    return m
