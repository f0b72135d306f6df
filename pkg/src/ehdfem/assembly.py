"""Finite element matrix and vector assembly on affine triangles.

All kernels precompute per-element quadrature tables once per (space,
degree) pair and evaluate the element integrals with ``einsum`` over every
triangle at once; triplet scatter then runs through
:func:`ehdfem.sparse.triplets_to_csr`, which sums duplicates
deterministically.

Vector-valued spaces interleave components, so a local vector DOF ``2*a + c``
is scalar basis ``a`` acting on component ``c``; the kernels below exploit
that layout when expanding scalar element matrices to vector ones.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import elements
from .sparse import TripletPattern, triplets_to_csr

#: Default quadrature degree for assembling bilinear forms.  The worst
#: integrand here is coefficient * basis * basis-gradient with everything P2
#: (total degree 5), so degree 6 is exact on affine cells with headroom.
ASSEMBLY_DEGREE = 6


@dataclass(frozen=True)
class ElementTables:
    """Per-element quadrature data for one (space, quadrature degree) pair.

    Attributes
    ----------
    rule : elements.QuadratureRule
    wdet : ndarray, shape (nt, nq)
        Quadrature weight times ``|det J|`` per element and point.
    phys : ndarray, shape (nt, nq, 2)
        Quadrature points mapped to physical coordinates.
    val : ndarray, shape (nq, nloc)
        Scalar basis values (identical on every affine element).
    grad : ndarray, shape (nt, nq, nloc, 2)
        Physical basis gradients.
    """

    rule: elements.QuadratureRule
    wdet: np.ndarray
    phys: np.ndarray
    val: np.ndarray
    grad: np.ndarray


def element_tables(space, quad_degree=ASSEMBLY_DEGREE):
    """Cached quadrature tables for ``space`` at the requested degree."""
    cached = space._table_cache.get(quad_degree)
    if cached is not None:
        return cached

    mesh = space.mesh
    rule = elements.quadrature(quad_degree)
    val, ref_grad = elements.eval_basis(space.degree, rule.points)

    p0 = mesh.vertices[mesh.triangles[:, 0]]
    p1 = mesh.vertices[mesh.triangles[:, 1]]
    p2 = mesh.vertices[mesh.triangles[:, 2]]
    jac = np.stack([p1 - p0, p2 - p0], axis=2)  # (nt, 2, 2), columns = edges
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_jt = np.empty_like(jac)  # inverse transpose of the Jacobian
    inv_jt[:, 0, 0] = jac[:, 1, 1]
    inv_jt[:, 0, 1] = -jac[:, 1, 0]
    inv_jt[:, 1, 0] = -jac[:, 0, 1]
    inv_jt[:, 1, 1] = jac[:, 0, 0]
    inv_jt /= det[:, None, None]

    wdet = rule.weights[None, :] * np.abs(det)[:, None]
    phys = p0[:, None, :] + np.einsum("eij,qj->eqi", jac, rule.points)
    grad = np.einsum("eij,qaj->eqai", inv_jt, ref_grad)

    tables = ElementTables(rule=rule, wdet=wdet, phys=phys, val=val, grad=grad)
    space._table_cache[quad_degree] = tables
    return tables


def _scatter(element_matrices, row_dofs, col_dofs, shape):
    nt, nr, nc = element_matrices.shape
    rows = np.broadcast_to(row_dofs[:, :, None], (nt, nr, nc))
    cols = np.broadcast_to(col_dofs[:, None, :], (nt, nr, nc))
    return triplets_to_csr(rows.ravel(), cols.ravel(), element_matrices.ravel(), shape)


def _scatter_vector(element_vectors, dofs, size):
    out = np.zeros(size)
    np.add.at(out, dofs, element_vectors)
    return out


def _expand_components(scalar_elem):
    """Scalar element matrices (nt, a, b) -> interleaved vector (nt, 2a, 2b)."""
    nt, nr, nc = scalar_elem.shape
    out = np.zeros((nt, nr, 2, nc, 2))
    out[:, :, 0, :, 0] = scalar_elem
    out[:, :, 1, :, 1] = scalar_elem
    return out.reshape(nt, 2 * nr, 2 * nc)


def evaluate_field(space, coeffs, quad_degree=ASSEMBLY_DEGREE):
    """Values of a discrete field at all quadrature points.

    Returns shape ``(nt, nq)`` for scalar spaces, ``(nt, nq, 2)`` for vector
    spaces.
    """
    tables = element_tables(space, quad_degree)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    gathered = coeffs[space.cell_dofs]
    if space.components == 1:
        return np.einsum("qa,ea->eq", tables.val, gathered)
    nodal = gathered.reshape(gathered.shape[0], -1, 2)
    return np.einsum("qa,ead->eqd", tables.val, nodal)


def mass_matrix(space, quad_degree=ASSEMBLY_DEGREE):
    """Mass matrix ``(trial, test)``; SPD, bitwise symmetric."""
    tables = element_tables(space, quad_degree)
    elem = np.einsum("eq,qa,qb->eab", tables.wdet, tables.val, tables.val)
    elem = 0.5 * (elem + elem.transpose(0, 2, 1))  # enforce exact symmetry
    if space.components == 2:
        elem = _expand_components(elem)
    n = space.dof_count
    return _scatter(elem, space.cell_dofs, space.cell_dofs, (n, n))


def stiffness_matrix(space, quad_degree=ASSEMBLY_DEGREE):
    """Stiffness matrix ``(grad trial, grad test)``; symmetric PSD with the
    constant function(s) spanning its kernel."""
    tables = element_tables(space, quad_degree)
    elem = np.einsum("eq,eqad,eqbd->eab", tables.wdet, tables.grad, tables.grad)
    elem = 0.5 * (elem + elem.transpose(0, 2, 1))
    if space.components == 2:
        elem = _expand_components(elem)
    n = space.dof_count
    return _scatter(elem, space.cell_dofs, space.cell_dofs, (n, n))


def convection_matrix(space, w_coeffs, quad_degree=ASSEMBLY_DEGREE):
    """Skew-symmetric transport matrix for the velocity space.

    Implements the antisymmetrized form
    ``N[i, j] = 1/2 (w.grad psi_j, psi_i) - 1/2 (w.grad psi_i, psi_j)``
    with ``w`` the discrete advecting velocity, so ``N^T = -N`` holds exactly
    and the form vanishes on its own argument.
    """
    if space.components != 2:
        raise ValueError("convection matrix expects the vector velocity space")
    tables = element_tables(space, quad_degree)
    w_q = evaluate_field(space, w_coeffs, quad_degree)  # (nt, nq, 2)
    # (w . grad phi_b) phi_a on the scalar basis level
    w_dot_grad = np.einsum("eqd,eqbd->eqb", w_q, tables.grad)
    raw = np.einsum("eq,eqb,qa->eab", tables.wdet, w_dot_grad, tables.val)
    skew = 0.5 * (raw - raw.transpose(0, 2, 1))
    elem = _expand_components(skew)
    n = space.dof_count
    return _scatter(elem, space.cell_dofs, space.cell_dofs, (n, n))


def rho_transport_coupling(space_rho, space_u, rho_coeffs, quad_degree=ASSEMBLY_DEGREE):
    """Charge-transport block ``T[i, j] = (rho_tilde psi_j, grad chi_i)``.

    Rows live on the charge space, columns on the velocity space.  The
    integrated-by-parts form makes the row sum against a constant test
    function vanish identically, which is what conserves total charge.
    """
    t_rho = element_tables(space_rho, quad_degree)
    t_u = element_tables(space_u, quad_degree)
    rho_q = evaluate_field(space_rho, rho_coeffs, quad_degree)
    elem = np.einsum("eq,eq,qb,eqid->eibd", t_rho.wdet, rho_q, t_u.val, t_rho.grad)
    nt, nr = elem.shape[:2]
    elem = elem.reshape(nt, nr, -1)  # columns interleave (node, component)
    shape = (space_rho.dof_count, space_u.dof_count)
    return _scatter(elem, space_rho.cell_dofs, space_u.cell_dofs, shape)


def coulomb_coupling(space_u, space_phi, rho_coeffs, quad_degree=ASSEMBLY_DEGREE):
    """Electric force block ``G[i, j] = (rho_tilde grad phi_j, psi_i)``.

    Rows live on the velocity space, columns on the potential space.  By
    construction this is the transpose of :func:`rho_transport_coupling`
    evaluated with the same extrapolated charge, which is what makes the
    coupling terms cancel in the discrete energy balance.
    """
    t_u = element_tables(space_u, quad_degree)
    t_phi = element_tables(space_phi, quad_degree)
    rho_q = evaluate_field(space_phi, rho_coeffs, quad_degree)
    elem = np.einsum("eq,eq,eqjc,qa->eacj", t_phi.wdet, rho_q, t_phi.grad, t_u.val)
    nt = elem.shape[0]
    elem = elem.reshape(nt, -1, elem.shape[3])  # rows interleave (node, component)
    shape = (space_u.dof_count, space_phi.dof_count)
    return _scatter(elem, space_u.cell_dofs, space_phi.cell_dofs, shape)


def divergence_matrix(space_p, space_u, quad_degree=ASSEMBLY_DEGREE):
    """Pressure-velocity block ``B[i, j] = (div psi_j, q_i)``."""
    t_p = element_tables(space_p, quad_degree)
    t_u = element_tables(space_u, quad_degree)
    elem = np.einsum("eq,qi,eqbd->eibd", t_p.wdet, t_p.val, t_u.grad)
    nt, nr = elem.shape[:2]
    elem = elem.reshape(nt, nr, -1)
    shape = (space_p.dof_count, space_u.dof_count)
    return _scatter(elem, space_p.cell_dofs, space_u.cell_dofs, shape)


class CouplingKernels:
    """Per-step assembly of the three extrapolation-dependent blocks.

    Convection, charge transport and Coulomb coupling are rebuilt every time
    step from the extrapolated fields, but their sparsity patterns never
    change.  This helper freezes the triplet orderings once and afterwards
    only recomputes values, producing matrices bitwise identical to the
    one-shot assembly functions.
    """

    def __init__(self, space_phi, space_rho, space_u, quad_degree=ASSEMBLY_DEGREE):
        self.space_phi = space_phi
        self.space_rho = space_rho
        self.space_u = space_u
        self.quad_degree = quad_degree
        self.t_scalar = element_tables(space_rho, quad_degree)
        self.t_u = element_tables(space_u, quad_degree)

        def pattern(row_dofs, col_dofs, shape):
            nt = row_dofs.shape[0]
            nr = row_dofs.shape[1]
            nc = col_dofs.shape[1]
            rows = np.broadcast_to(row_dofs[:, :, None], (nt, nr, nc))
            cols = np.broadcast_to(col_dofs[:, None, :], (nt, nr, nc))
            return TripletPattern(rows.ravel(), cols.ravel(), shape)

        nu = space_u.dof_count
        self._pat_convection = pattern(space_u.cell_dofs, space_u.cell_dofs, (nu, nu))
        self._pat_transport = pattern(
            space_rho.cell_dofs, space_u.cell_dofs, (space_rho.dof_count, nu)
        )
        self._pat_coulomb = pattern(
            space_u.cell_dofs, space_phi.cell_dofs, (nu, space_phi.dof_count)
        )

    def convection(self, u_coeffs):
        tab = self.t_u
        u_q = evaluate_field(self.space_u, u_coeffs, self.quad_degree)
        w_dot_grad = np.einsum("eqd,eqbd->eqb", u_q, tab.grad)
        raw = np.einsum("eq,eqb,qa->eab", tab.wdet, w_dot_grad, tab.val)
        skew = 0.5 * (raw - raw.transpose(0, 2, 1))
        return self._pat_convection.build(_expand_components(skew))

    def transport(self, rho_coeffs):
        tab = self.t_scalar
        rho_q = evaluate_field(self.space_rho, rho_coeffs, self.quad_degree)
        elem = np.einsum("eq,eq,qb,eqid->eibd", tab.wdet, rho_q, self.t_u.val, tab.grad)
        return self._pat_transport.build(elem)

    def coulomb(self, rho_coeffs):
        tab = self.t_scalar
        rho_q = evaluate_field(self.space_phi, rho_coeffs, self.quad_degree)
        elem = np.einsum("eq,eq,eqjc,qa->eacj", tab.wdet, rho_q, tab.grad, self.t_u.val)
        return self._pat_coulomb.build(elem)


def _field_at_quadrature(f, phys, t, vector):
    x = phys[..., 0]
    y = phys[..., 1]
    raw = f(x, y) if t is None else f(x, y, t)
    if not vector:
        return np.broadcast_to(np.asarray(raw, dtype=np.float64), x.shape)
    if isinstance(raw, (tuple, list)):
        return np.stack(
            [np.broadcast_to(np.asarray(c, dtype=np.float64), x.shape) for c in raw],
            axis=-1,
        )
    arr = np.asarray(raw, dtype=np.float64)
    if arr.shape[-1] != 2:
        raise ValueError(f"vector field must return two components, got {arr.shape}")
    return arr


def load_vector(space, f, t=None, quad_degree=ASSEMBLY_DEGREE):
    """Assemble ``(f, test)`` for a callable source field."""
    tables = element_tables(space, quad_degree)
    f_q = _field_at_quadrature(f, tables.phys, t, space.components == 2)
    if space.components == 1:
        elem = np.einsum("eq,eq,qa->ea", tables.wdet, f_q, tables.val)
    else:
        elem = np.einsum("eq,eqc,qa->eac", tables.wdet, f_q, tables.val)
        elem = elem.reshape(elem.shape[0], -1)  # (node, component) interleaved
    return _scatter_vector(elem, space.cell_dofs, space.dof_count)


def gradient_load(space, f_gradient, t=None, quad_degree=ASSEMBLY_DEGREE):
    """Assemble ``(grad f, grad test)`` from an analytic gradient callable."""
    if space.components != 1:
        raise ValueError("gradient load is implemented for scalar spaces")
    tables = element_tables(space, quad_degree)
    g_q = _field_at_quadrature(f_gradient, tables.phys, t, vector=True)
    elem = np.einsum("eq,eqd,eqad->ea", tables.wdet, g_q, tables.grad)
    return _scatter_vector(elem, space.cell_dofs, space.dof_count)


def stokes_load(space_u, u_jacobian, p_exact, t=None, eta=1.0,
                quad_degree=ASSEMBLY_DEGREE):
    """Assemble ``eta (grad u, grad v) - (p, div v)`` for analytic ``u, p``.

    ``u_jacobian(x, y[, t])`` must return the velocity Jacobian with entry
    ``[..., i, j] = d u_i / d x_j``.
    """
    if space_u.components != 2:
        raise ValueError("stokes load expects the vector velocity space")
    tables = element_tables(space_u, quad_degree)
    x = tables.phys[..., 0]
    y = tables.phys[..., 1]
    jac = np.asarray(
        u_jacobian(x, y) if t is None else u_jacobian(x, y, t), dtype=np.float64
    )
    p_q = _field_at_quadrature(p_exact, tables.phys, t, vector=False)
    # test (a, c): grad contribution sum_d grad[a, d] * jac[c, d]
    visc = np.einsum("eq,eqad,eqcd->eac", tables.wdet, tables.grad, jac)
    pres = np.einsum("eq,eq,eqac->eac", tables.wdet, p_q, tables.grad)
    elem = (eta * visc - pres).reshape(tables.wdet.shape[0], -1)
    return _scatter_vector(elem, space_u.cell_dofs, space_u.dof_count)


def apply_dirichlet(matrix, mask, rhs=None):
    """Eliminate masked rows and columns symmetrically.

    Masked rows and columns are zeroed, the diagonal gets a 1, and masked
    right-hand side entries are set to 0 (homogeneous constraints only).
    Returns the modified matrix (and rhs when given).
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[0] != matrix.shape[0] or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("mask must match a square matrix")
    keep = sp.diags((~mask).astype(np.float64))
    pinned = sp.diags(mask.astype(np.float64))
    out = (keep @ matrix @ keep + pinned).tocsr()
    if rhs is None:
        return out
    rhs = np.asarray(rhs, dtype=np.float64).copy()
    rhs[mask] = 0.0
    return out, rhs
