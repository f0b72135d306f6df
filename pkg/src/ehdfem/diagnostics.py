"""Run diagnostics: discrete energy, charge bookkeeping, errors, rates.

The energy functional mirrors the two-level quantity that the implicit
scheme dissipates,

    E^n = eps ||grad phi^n||^2 + eps ||2 grad phi^n - grad phi^{n-1}||^2
        + ||u^n||^2 + ||2 u^n - u^{n-1}||^2,

so it is only defined once two time levels exist.  Everything here is pure
post-processing; nothing feeds back into the solve.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import assembly

#: Quadrature degree for error norms; high enough that the quadrature error
#: is negligible against the discretization error being measured.
ERROR_QUAD_DEGREE = 8


def discrete_energy(state, stiffness_phi, mass_u, epsilon):
    """Two-level energy of ``state``; raises if no previous level exists."""
    if state.phi_prev is None or state.u_prev is None:
        raise ValueError("discrete energy needs two time levels (n >= 1)")
    phi_jump = 2.0 * state.phi - state.phi_prev
    u_jump = 2.0 * state.u - state.u_prev
    return float(
        epsilon * (state.phi @ (stiffness_phi @ state.phi))
        + epsilon * (phi_jump @ (stiffness_phi @ phi_jump))
        + state.u @ (mass_u @ state.u)
        + u_jump @ (mass_u @ u_jump)
    )


def total_charge(mean_vector, rho_coeffs):
    """Integral of the discrete charge density."""
    return float(mean_vector @ np.asarray(rho_coeffs, dtype=np.float64))


def l2_error(space, coeffs, exact, t=None, quad_degree=ERROR_QUAD_DEGREE):
    """L2 distance between a discrete field and an analytic one.

    Vector fields sum both components inside the norm.  ``exact`` follows the
    same calling convention as interpolation sources: ``exact(x, y[, t])``.
    """
    tables = assembly.element_tables(space, quad_degree)
    approx = assembly.evaluate_field(space, coeffs, quad_degree)
    x = tables.phys[..., 0]
    y = tables.phys[..., 1]
    target = exact(x, y) if t is None else exact(x, y, t)
    if space.components == 1:
        diff2 = (approx - np.broadcast_to(np.asarray(target), x.shape)) ** 2
    else:
        target = np.asarray(target)
        if isinstance(target, np.ndarray) and target.shape[-1] != 2:
            raise ValueError(f"vector exact field has shape {target.shape}")
        diff = approx - target
        diff2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    return float(np.sqrt(np.sum(tables.wdet * diff2)))


def eoc(errors, parameters):
    """Observed convergence orders between consecutive refinement levels.

    ``rate_k = log(e_k / e_{k+1}) / log(p_k / p_{k+1})`` for error sequence
    ``e`` at parameters ``p`` (mesh sizes or step sizes).  Returns a list one
    shorter than the inputs.
    """
    errors = [float(e) for e in errors]
    parameters = [float(p) for p in parameters]
    if len(errors) != len(parameters):
        raise ValueError("errors and parameters must have equal length")
    if len(errors) < 2:
        raise ValueError("need at least two levels to compute a rate")
    rates = []
    for (e0, e1), (p0, p1) in zip(zip(errors, errors[1:]), zip(parameters, parameters[1:])):
        if min(e0, e1) <= 0.0 or min(p0, p1) <= 0.0 or p0 == p1:
            raise ValueError("errors and parameters must be positive and distinct")
        rates.append(math.log(e0 / e1) / math.log(p0 / p1))
    return rates


@dataclass
class DiagnosticsLog:
    """Per-level history of a time-stepping run.

    One record per time level including the initial one, so a run of ``N``
    steps holds ``N + 1`` records.  The energy entry of level 0 is NaN
    because the two-level functional is undefined there.
    """

    mesh_size: float
    tau: float
    steps: list = field(default_factory=list)
    times: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    charge: list = field(default_factory=list)
    divergence: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)  # name -> list, optional

    def append(self, step, time, energy, charge, divergence, errors=None):
        self.steps.append(int(step))
        self.times.append(float(time))
        self.energy.append(float(energy))
        self.charge.append(float(charge))
        self.divergence.append(float(divergence))
        if errors:
            for name, value in errors.items():
                self.errors.setdefault(name, []).append(float(value))

    def __len__(self):
        return len(self.steps)

    def energy_increments(self):
        """``E^{n+1} - E^n`` for n >= 1 (skipping the undefined level 0)."""
        vals = [e for e in self.energy if not math.isnan(e)]
        return [b - a for a, b in zip(vals, vals[1:])]

    def max_abs_charge(self):
        return max(abs(c) for c in self.charge)
