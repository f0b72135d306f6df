"""Coupled time stepper for the electrohydrodynamic system.

Unknowns per time level: electric potential ``phi`` (P2), charge density
``rho`` (P2), velocity ``u`` (Taylor-Hood P2 vector), pressure ``p`` (P1).
Each step solves one monolithic linear system in all four fields plus two
scalar multipliers pinning the means of ``phi`` and ``p``:

* potential row:   eps (grad phi, grad chi) - (rho, chi) = (f_phi, chi)
* charge row:      (D_tau rho, chi) - (rho~ u, grad chi)
                   + D (grad rho, grad chi) + (sigma/eps)(rho, chi) = (f_rho, chi)
* momentum row:    (D_tau u, v) + b(u~, u, v) + eta (grad u, grad v)
                   - (p, div v) + (rho~ grad phi, v) = (f_u, v)
* continuity row:  (div u, q) = 0

``D_tau`` is the backward difference: first order on the startup step,
second order (3 v^{n+1} - 4 v^n + v^{n-1}) / (2 tau) afterwards, and tilde
quantities are the matching extrapolations (v^n, then 2 v^n - v^{n-1}).
All implicit couplings sit on the left-hand side; only the extrapolated
coefficients are lagged, so a single LU solve advances the whole system.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import assembly, diagnostics, projections
from .mesh import mesh_size
from .sparse import BlockSystem, RefreshingSolver, SolverError, solve
from .spaces import FeSpace, build_space, mean_functional

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    """Physical coefficients of the coupled system."""

    epsilon: float = 1.0  # permittivity
    d_coeff: float = 1.0  # charge diffusivity
    sigma: float = 1.0  # conductivity
    eta: float = 1.0  # viscosity

    def validate(self):
        for name in ("epsilon", "d_coeff", "eta"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        return self


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of ``[0, t_end]`` into ``num_steps`` steps."""

    t_end: float
    num_steps: int

    def validate(self):
        if self.t_end <= 0.0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.num_steps < 1:
            raise ValueError(f"num_steps must be >= 1, got {self.num_steps}")
        return self

    @property
    def tau(self):
        return self.t_end / self.num_steps

    def time(self, n):
        return n * self.tau


class EhdSpaces(NamedTuple):
    phi: FeSpace
    rho: FeSpace
    u: FeSpace
    p: FeSpace


def build_ehd_spaces(mesh):
    """Taylor-Hood velocity/pressure plus P2 potential and charge spaces."""
    scalar = build_space(mesh, 2)
    return EhdSpaces(
        phi=scalar,
        rho=scalar,
        u=build_space(mesh, 2, components=2, dirichlet=True),
        p=build_space(mesh, 1),
    )


@dataclass
class EhdState:
    """Fields at one time level (with the previous level for BDF2)."""

    n: int
    time: float
    phi: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    p: np.ndarray
    phi_prev: np.ndarray = None
    rho_prev: np.ndarray = None
    u_prev: np.ndarray = None


def extrapolate(state):
    """Second-order extrapolation ``2 v^n - v^{n-1}`` (startup: ``v^n``)."""
    if state.rho_prev is None:
        return state.rho.copy(), state.u.copy()
    return 2.0 * state.rho - state.rho_prev, 2.0 * state.u - state.u_prev


@dataclass(frozen=True)
class InitialData:
    """Closures defining the starting fields.

    ``rho(x, y)`` is L2-projected; ``u_jacobian(x, y)`` (velocity Jacobian)
    and ``p(x, y)`` feed the Stokes projection; the potential follows from
    the projected charge.
    """

    rho: callable
    u_jacobian: callable
    p: callable


def mms_initial_data(case, t0=0.0):
    """Initial data of a manufactured case frozen at ``t0``."""
    return InitialData(
        rho=lambda x, y: case.rho(x, y, t0),
        u_jacobian=lambda x, y: case.jac_u(x, y, t0),
        p=lambda x, y: case.p(x, y, t0),
    )


class EhdStepper:
    """Precomputes the constant operators and advances the coupled system.

    Parameters
    ----------
    spaces : EhdSpaces
    params : ModelParams
    grid : TimeGrid
    forcing : optional
        Object with ``f_phi``, ``f_rho``, ``f_u`` closures (see
        :func:`ehdfem.mms.forcing`); omit for the unforced system.
    include_epsilon_in_initial_potential : bool
        Scale the initial potential solve by the permittivity (off by
        default, matching the plain Poisson form of the startup).
    """

    def __init__(self, spaces, params, grid, forcing=None,
                 include_epsilon_in_initial_potential=False,
                 quad_degree=assembly.ASSEMBLY_DEGREE):
        self.spaces = spaces
        self.params = params.validate()
        self.grid = grid.validate()
        self.forcing = forcing
        self.include_epsilon = bool(include_epsilon_in_initial_potential)
        self.quad_degree = quad_degree
        self.h = mesh_size(spaces.phi.mesh)

        qd = quad_degree
        self.mass_scalar = assembly.mass_matrix(spaces.rho, qd)
        self.stiffness_scalar = assembly.stiffness_matrix(spaces.rho, qd)
        self.mass_u = assembly.mass_matrix(spaces.u, qd)
        self.stiffness_u = assembly.stiffness_matrix(spaces.u, qd)
        self.divergence = assembly.divergence_matrix(spaces.p, spaces.u, qd)
        self.mean_phi = mean_functional(spaces.phi, qd)
        self.mean_p = mean_functional(spaces.p, qd)

        self._phi_block = (params.epsilon * self.stiffness_scalar).tocsr()
        self._neg_mass_scalar = (-self.mass_scalar).tocsr()
        self._neg_div_t = (-self.divergence.T).tocsr()
        self._const_blocks = {}  # alpha -> (charge block, velocity block)

        sizes = [spaces.phi.dof_count, spaces.rho.dof_count,
                 spaces.u.dof_count, spaces.p.dof_count]
        total = sum(sizes) + 2  # two mean multipliers
        mask = np.zeros(total, dtype=bool)
        u_offset = sizes[0] + sizes[1]
        mask[u_offset:u_offset + sizes[2]] = spaces.u.dirichlet_mask
        self._dirichlet_mask = mask
        self._flow_mask = mask.copy()
        self._flow_mask[u_offset:u_offset + sizes[2]] = True
        self._flow_mask[u_offset + sizes[2]:u_offset + sizes[2] + sizes[3]] = True
        self._flow_mask[-1] = True  # pressure-mean multiplier row

        # consecutive step matrices differ only in the extrapolated coupling
        # blocks, so one factorization serves several steps and the previous
        # solutions give the refinement a second-order accurate start
        self._solver = RefreshingSolver()
        self._kernels = assembly.CouplingKernels(
            spaces.phi, spaces.rho, spaces.u, quad_degree
        )
        self._solution_history = []

    def _constant_blocks(self, alpha):
        cached = self._const_blocks.get(alpha)
        if cached is not None:
            return cached
        p = self.params
        tau = self.grid.tau
        charge = (
            (alpha / tau) * self.mass_scalar
            + p.d_coeff * self.stiffness_scalar
            + (p.sigma / p.epsilon) * self.mass_scalar
        ).tocsr()
        velocity = ((alpha / tau) * self.mass_u + p.eta * self.stiffness_u).tocsr()
        self._const_blocks[alpha] = (charge, velocity)
        return charge, velocity

    def init_state(self, initial):
        """Project the initial closures onto the discrete spaces."""
        s = self.spaces
        rho = projections.l2_project(s.rho, initial.rho, quad_degree=self.quad_degree)
        u, p = projections.stokes_project(
            s.u, s.p, initial.u_jacobian, initial.p,
            eta=self.params.eta, quad_degree=self.quad_degree,
        )
        phi = projections.initial_potential(
            s.phi, rho, epsilon=self.params.epsilon,
            include_epsilon=self.include_epsilon, quad_degree=self.quad_degree,
        )
        return EhdState(n=0, time=0.0, phi=phi, rho=rho, u=u, p=p)

    def step(self, state, freeze_flow=False):
        """Advance one time level.

        ``freeze_flow=True`` pins velocity, pressure and the pressure
        multiplier to zero, reducing the charge row to a pure
        diffusion-reaction step (verification hook).
        """
        s = self.spaces
        tau = self.grid.tau
        qd = self.quad_degree
        n_next = state.n + 1
        t_next = self.grid.time(n_next)
        startup = state.rho_prev is None
        alpha = 1.0 if startup else 1.5

        rho_tilde, u_tilde = extrapolate(state)
        transport = self._kernels.transport(rho_tilde)
        coulomb = self._kernels.coulomb(rho_tilde)
        convection = self._kernels.convection(u_tilde)
        charge_block, velocity_const = self._constant_blocks(alpha)

        system = BlockSystem([
            ("phi", s.phi.dof_count),
            ("rho", s.rho.dof_count),
            ("u", s.u.dof_count),
            ("p", s.p.dof_count),
        ])
        system.set_block("phi", "phi", self._phi_block)
        system.set_block("phi", "rho", self._neg_mass_scalar)
        system.set_block("rho", "rho", charge_block)
        system.set_block("rho", "u", (-transport).tocsr())
        system.set_block("u", "u", (velocity_const + convection).tocsr())
        system.set_block("u", "p", self._neg_div_t)
        system.set_block("u", "phi", coulomb)
        system.set_block("p", "u", self.divergence)
        system.add_multiplier("phi", self.mean_phi)
        system.add_multiplier("p", self.mean_p)

        if startup:
            hist_rho = (1.0 / tau) * (self.mass_scalar @ state.rho)
            hist_u = (1.0 / tau) * (self.mass_u @ state.u)
        else:
            hist_rho = (0.5 / tau) * (
                self.mass_scalar @ (4.0 * state.rho - state.rho_prev)
            )
            hist_u = (0.5 / tau) * (self.mass_u @ (4.0 * state.u - state.u_prev))

        if self.forcing is not None:
            system.set_rhs("phi", assembly.load_vector(s.phi, self.forcing.f_phi, t_next, qd))
            hist_rho = hist_rho + assembly.load_vector(s.rho, self.forcing.f_rho, t_next, qd)
            hist_u = hist_u + assembly.load_vector(s.u, self.forcing.f_u, t_next, qd)
        system.set_rhs("rho", hist_rho)
        system.set_rhs("u", hist_u)

        matrix, rhs = system.assemble()
        mask = self._flow_mask if freeze_flow else self._dirichlet_mask
        matrix, rhs = assembly.apply_dirichlet(matrix, mask, rhs)
        try:
            if freeze_flow:  # different sparsity; keep the main LU untouched
                solution = solve(matrix, rhs)
            else:
                if startup:
                    self._solution_history = []
                history = self._solution_history
                guess = 2.0 * history[1] - history[0] if len(history) == 2 else None
                solution = self._solver.solve(matrix, rhs, x0=guess)
                self._solution_history = [*history[-1:], solution]
        except SolverError as exc:
            raise SolverError(f"time step {n_next} (t = {t_next:.6g}): {exc}") from exc

        return EhdState(
            n=n_next,
            time=t_next,
            phi=system.extract("phi", solution).copy(),
            rho=system.extract("rho", solution).copy(),
            u=system.extract("u", solution).copy(),
            p=system.extract("p", solution).copy(),
            phi_prev=state.phi,
            rho_prev=state.rho,
            u_prev=state.u,
        )

    def run(self, initial, exact=None, track_errors=False):
        """Step from 0 to ``t_end`` collecting per-level diagnostics.

        Parameters
        ----------
        initial : InitialData
        exact : ManufacturedCase, optional
            When given together with ``track_errors``, per-level L2 errors of
            phi, rho and u are appended to the log.

        Returns
        -------
        (EhdState, diagnostics.DiagnosticsLog)
        """
        tau = self.grid.tau
        if tau > math.sqrt(self.h):
            logger.warning(
                "tau = %.4g exceeds sqrt(h) = %.4g; the second-order error "
                "bound is not covered by theory at this resolution",
                tau, math.sqrt(self.h),
            )
        state = self.init_state(initial)
        log = diagnostics.DiagnosticsLog(mesh_size=self.h, tau=tau)
        self._append_diagnostics(log, state, exact if track_errors else None)
        for _ in range(self.grid.num_steps):
            state = self.step(state)
            self._append_diagnostics(log, state, exact if track_errors else None)
        return state, log

    def _append_diagnostics(self, log, state, exact):
        energy = math.nan
        if state.phi_prev is not None:
            energy = diagnostics.discrete_energy(
                state, self.stiffness_scalar, self.mass_u, self.params.epsilon
            )
        charge = diagnostics.total_charge(self.mean_phi, state.rho)
        div_norm = float(np.linalg.norm(self.divergence @ state.u))
        errors = None
        if exact is not None:
            s = self.spaces
            errors = {
                "err_phi": diagnostics.l2_error(s.phi, state.phi, exact.phi, state.time),
                "err_rho": diagnostics.l2_error(s.rho, state.rho, exact.rho, state.time),
                "err_u": diagnostics.l2_error(s.u, state.u, exact.u, state.time),
            }
        log.append(state.n, state.time, energy, charge, div_norm, errors)
