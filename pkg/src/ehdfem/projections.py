"""Discrete projections used to start the time stepper.

Three projections produce the initial fields: an L2 projection for the
charge, a Stokes projection for the velocity/pressure pair, and a discrete
Poisson solve that derives the starting potential from the projected charge.
A Ritz (elliptic) projection is provided as well; it shares the bordered
zero-mean formulation with the potential solve.
"""

import numpy as np

from . import assembly, spaces
from .sparse import BlockSystem, solve


def l2_project(space, f, t=None, quad_degree=assembly.ASSEMBLY_DEGREE):
    """L2-orthogonal projection of a callable field onto ``space``."""
    mass = assembly.mass_matrix(space, quad_degree)
    rhs = assembly.load_vector(space, f, t, quad_degree)
    return solve(mass, rhs, assume_spd=True)


def ritz_project(space, f, f_gradient, t=None, quad_degree=assembly.ASSEMBLY_DEGREE):
    """Elliptic projection: match gradients weakly, pin the mean to ``f``'s.

    Solves ``(grad v_h, grad chi) = (grad f, grad chi)`` for all test
    functions with a scalar multiplier enforcing ``integral(v_h) =
    integral(f)``.
    """
    if space.components != 1:
        raise ValueError("Ritz projection is implemented for scalar spaces")
    stiffness = assembly.stiffness_matrix(space, quad_degree)
    rhs = assembly.gradient_load(space, f_gradient, t, quad_degree)
    mean_vec = spaces.mean_functional(space, quad_degree)
    # integral of f by quadrature: the load vector sums the partition of unity
    f_integral = assembly.load_vector(space, f, t, quad_degree).sum()

    system = BlockSystem([("v", space.dof_count)])
    system.set_block("v", "v", stiffness)
    system.add_multiplier("v", mean_vec, rhs=f_integral)
    system.set_rhs("v", rhs)
    matrix, full_rhs = system.assemble()
    solution = solve(matrix, full_rhs)
    return system.extract("v", solution)


def stokes_project(space_u, space_p, u_jacobian, p_exact, t=None, eta=1.0,
                   quad_degree=assembly.ASSEMBLY_DEGREE):
    """Discrete Stokes projection of an analytic velocity/pressure pair.

    Solves the Taylor-Hood saddle system with right-hand side
    ``eta (grad u, grad v) - (p, div v)``, homogeneous Dirichlet velocity,
    and a zero-mean pressure multiplier.  The projected velocity is discretely
    divergence-free by construction.

    Returns
    -------
    (u_coeffs, p_coeffs)
    """
    stiffness_u = assembly.stiffness_matrix(space_u, quad_degree)
    div = assembly.divergence_matrix(space_p, space_u, quad_degree)
    mean_p = spaces.mean_functional(space_p, quad_degree)
    rhs_u = assembly.stokes_load(space_u, u_jacobian, p_exact, t, eta, quad_degree)

    system = BlockSystem([("u", space_u.dof_count), ("p", space_p.dof_count)])
    system.set_block("u", "u", eta * stiffness_u)
    system.set_block("u", "p", -div.T.tocsr())
    system.set_block("p", "u", div)
    system.add_multiplier("p", mean_p)
    system.set_rhs("u", rhs_u)
    matrix, full_rhs = system.assemble()

    mask = np.zeros(system.total_size, dtype=bool)
    mask[: space_u.dof_count] = space_u.dirichlet_mask
    matrix, full_rhs = assembly.apply_dirichlet(matrix, mask, full_rhs)

    solution = solve(matrix, full_rhs)
    return system.extract("u", solution), system.extract("p", solution)


def initial_potential(space, rho_coeffs, epsilon=1.0, include_epsilon=False,
                      quad_degree=assembly.ASSEMBLY_DEGREE):
    """Starting potential from the projected charge.

    Solves ``(grad phi_h, grad chi) = (rho_h, chi)`` with a zero-mean
    multiplier.  ``include_epsilon=True`` scales the left-hand side by the
    permittivity instead, i.e. ``epsilon (grad phi_h, grad chi) = (rho_h,
    chi)``; the default keeps the unscaled form.

    Raises
    ------
    ValueError
        If the total charge of ``rho_coeffs`` does not vanish (the Neumann
        problem would be incompatible).
    """
    if space.components != 1:
        raise ValueError("potential space must be scalar")
    mean_vec = spaces.mean_functional(space, quad_degree)
    total_charge = float(mean_vec @ rho_coeffs)
    if abs(total_charge) > 1e-8:
        raise ValueError(
            f"incompatible RHS: total charge {total_charge:.3e} must vanish"
        )
    stiffness = assembly.stiffness_matrix(space, quad_degree)
    mass = assembly.mass_matrix(space, quad_degree)
    factor = epsilon if include_epsilon else 1.0

    system = BlockSystem([("phi", space.dof_count)])
    system.set_block("phi", "phi", factor * stiffness)
    system.add_multiplier("phi", mean_vec)
    system.set_rhs("phi", mass @ np.asarray(rho_coeffs, dtype=np.float64))
    matrix, full_rhs = system.assemble()
    solution = solve(matrix, full_rhs)
    return system.extract("phi", solution)
