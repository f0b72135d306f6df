"""Manufactured solutions for verifying the coupled solver.

The workhorse case lives on (0, 2*pi)^2: every scalar field is
``t^4 cos(x) cos(y)`` and the velocity is the cellular vortex
``t^4 (sin^2(x) sin(2y), -sin(2x) sin^2(y))``, which is divergence-free,
vanishes on the boundary, and satisfies the homogeneous Neumann conditions
of the potential and the charge.  Forcing terms were derived by hand and are
hard-coded; :func:`fd_check` validates every derivative closure against
centered finite differences of the plain field values and must pass before
any convergence run is trusted.
"""

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ManufacturedCase:
    """Analytic fields plus the derivatives the forcing terms need.

    Vector-valued closures stack components along the last axis; ``jac_u``
    returns the velocity Jacobian with ``[..., i, j] = d u_i / d x_j``.
    """

    domain: tuple
    phi: callable = field(repr=False)
    rho: callable = field(repr=False)
    u: callable = field(repr=False)
    p: callable = field(repr=False)
    grad_phi: callable = field(repr=False)
    lap_phi: callable = field(repr=False)
    dt_rho: callable = field(repr=False)
    grad_rho: callable = field(repr=False)
    lap_rho: callable = field(repr=False)
    dt_u: callable = field(repr=False)
    jac_u: callable = field(repr=False)
    lap_u: callable = field(repr=False)
    grad_p: callable = field(repr=False)


@dataclass(frozen=True)
class Forcing:
    """Source closures that make the manufactured fields an exact solution."""

    f_phi: callable = field(repr=False)
    f_rho: callable = field(repr=False)
    f_u: callable = field(repr=False)


def _vortex(x, y):
    sx = np.sin(x)
    sy = np.sin(y)
    return np.stack([sx * sx * np.sin(2.0 * y), -np.sin(2.0 * x) * sy * sy], axis=-1)


def cosine_vortex_case():
    """The standard verification case on (0, 2*pi)^2; see module docstring."""

    def g(t):
        return t**4

    def dg(t):
        return 4.0 * t**3

    def scalar(x, y, t):
        return g(t) * np.cos(x) * np.cos(y)

    def grad_scalar(x, y, t):
        return np.asarray(g(t))[..., None] * np.stack(
            [-np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)], axis=-1
        )

    def lap_scalar(x, y, t):
        return -2.0 * g(t) * np.cos(x) * np.cos(y)

    def u(x, y, t):
        return np.asarray(g(t))[..., None] * _vortex(x, y)

    def dt_u(x, y, t):
        return np.asarray(dg(t))[..., None] * _vortex(x, y)

    def jac_u(x, y, t):
        s2x = np.sin(2.0 * x)
        s2y = np.sin(2.0 * y)
        sx2 = np.sin(x) ** 2
        sy2 = np.sin(y) ** 2
        j = np.empty(np.broadcast(x, y).shape + (2, 2))
        j[..., 0, 0] = s2x * s2y
        j[..., 0, 1] = 2.0 * sx2 * np.cos(2.0 * y)
        j[..., 1, 0] = -2.0 * np.cos(2.0 * x) * sy2
        j[..., 1, 1] = -s2x * s2y
        return np.asarray(g(t))[..., None, None] * j

    def lap_u(x, y, t):
        s2y = np.sin(2.0 * y)
        s2x = np.sin(2.0 * x)
        comp0 = 2.0 * np.cos(2.0 * x) * s2y - 4.0 * np.sin(x) ** 2 * s2y
        comp1 = 4.0 * s2x * np.sin(y) ** 2 - 2.0 * s2x * np.cos(2.0 * y)
        return np.asarray(g(t))[..., None] * np.stack([comp0, comp1], axis=-1)

    def dt_rho(x, y, t):
        return dg(t) * np.cos(x) * np.cos(y)

    return ManufacturedCase(
        domain=(0.0, TWO_PI, 0.0, TWO_PI),
        phi=scalar,
        rho=scalar,
        u=u,
        p=scalar,
        grad_phi=grad_scalar,
        lap_phi=lap_scalar,
        dt_rho=dt_rho,
        grad_rho=grad_scalar,
        lap_rho=lap_scalar,
        dt_u=dt_u,
        jac_u=jac_u,
        lap_u=lap_u,
        grad_p=grad_scalar,
    )


def stability_profile():
    """Initial data for the unforced decay experiment.

    Returns ``(rho0, u0)`` closures: the spatial factors of the verification
    case, i.e. ``cos(x) cos(y)`` and the cellular vortex.  The profile has
    zero total charge and homogeneous velocity boundary values.
    """

    def rho0(x, y):
        return np.cos(x) * np.cos(y)

    def u0(x, y):
        return _vortex(x, y)

    def jac_u0(x, y):
        case = cosine_vortex_case()
        return case.jac_u(x, y, 1.0)

    return rho0, u0, jac_u0


def forcing(case, params):
    """Source terms for which ``case`` solves the full system.

    * ``f_phi = -epsilon lap(phi) - rho``
    * ``f_rho = dt(rho) + u . grad(rho) - D lap(rho) + (sigma/epsilon) rho``
      (the conservative transport term reduces to ``u . grad(rho)`` because
      the velocity is divergence-free)
    * ``f_u = dt(u) + (u . grad) u - eta lap(u) + grad(p) + rho grad(phi)``
    """
    params.validate()
    eps = params.epsilon
    dif = params.d_coeff
    sig = params.sigma
    eta = params.eta

    def f_phi(x, y, t):
        return -eps * case.lap_phi(x, y, t) - case.rho(x, y, t)

    def f_rho(x, y, t):
        adv = np.einsum("...d,...d->...", case.u(x, y, t), case.grad_rho(x, y, t))
        return (
            case.dt_rho(x, y, t)
            + adv
            - dif * case.lap_rho(x, y, t)
            + (sig / eps) * case.rho(x, y, t)
        )

    def f_u(x, y, t):
        uval = case.u(x, y, t)
        inertia = np.einsum("...ij,...j->...i", case.jac_u(x, y, t), uval)
        coulomb = case.rho(x, y, t)[..., None] * case.grad_phi(x, y, t)
        return (
            case.dt_u(x, y, t)
            + inertia
            - eta * case.lap_u(x, y, t)
            + case.grad_p(x, y, t)
            + coulomb
        )

    return Forcing(f_phi=f_phi, f_rho=f_rho, f_u=f_u)


def _fd_time(f, x, y, t, delta):
    return (f(x, y, t + delta) - f(x, y, t - delta)) / (2.0 * delta)


def _fd_grad(f, x, y, t, delta):
    gx = (f(x + delta, y, t) - f(x - delta, y, t)) / (2.0 * delta)
    gy = (f(x, y + delta, t) - f(x, y - delta, t)) / (2.0 * delta)
    return np.stack([gx, gy], axis=-1)


def _fd_lap(f, x, y, t, delta):
    center = f(x, y, t)
    return (
        f(x + delta, y, t)
        + f(x - delta, y, t)
        + f(x, y + delta, t)
        + f(x, y - delta, t)
        - 4.0 * center
    ) / delta**2


def fd_check(case, params, num_samples=200, delta=1e-4, seed=0):
    """Maximum relative deviation between forcing and its FD reconstruction.

    Rebuilds every forcing component from the *value* closures alone using
    centered second-order differences at random space-time samples and
    compares against the hard-coded forcing.  Run this before trusting any
    convergence result; values around ``delta**2`` are expected.
    """
    rng = np.random.default_rng(seed)
    x_min, x_max, y_min, y_max = case.domain
    margin = 10.0 * delta
    x = rng.uniform(x_min + margin, x_max - margin, num_samples)
    y = rng.uniform(y_min + margin, y_max - margin, num_samples)
    t = rng.uniform(0.2, 1.0, num_samples)

    fc = forcing(case, params)
    eps, dif, sig, eta = params.epsilon, params.d_coeff, params.sigma, params.eta

    f_phi_fd = -eps * _fd_lap(case.phi, x, y, t, delta) - case.rho(x, y, t)
    adv = np.einsum("...d,...d->...", case.u(x, y, t), _fd_grad(case.rho, x, y, t, delta))
    f_rho_fd = (
        _fd_time(case.rho, x, y, t, delta)
        + adv
        - dif * _fd_lap(case.rho, x, y, t, delta)
        + (sig / eps) * case.rho(x, y, t)
    )
    uval = case.u(x, y, t)
    jac_fd = np.stack(
        [
            _fd_grad(lambda a, b, s: case.u(a, b, s)[..., 0], x, y, t, delta),
            _fd_grad(lambda a, b, s: case.u(a, b, s)[..., 1], x, y, t, delta),
        ],
        axis=-2,
    )
    lap_fd = np.stack(
        [
            _fd_lap(lambda a, b, s: case.u(a, b, s)[..., 0], x, y, t, delta),
            _fd_lap(lambda a, b, s: case.u(a, b, s)[..., 1], x, y, t, delta),
        ],
        axis=-1,
    )
    f_u_fd = (
        _fd_time(case.u, x, y, t, delta)
        + np.einsum("...ij,...j->...i", jac_fd, uval)
        - eta * lap_fd
        + _fd_grad(case.p, x, y, t, delta)
        + case.rho(x, y, t)[..., None] * _fd_grad(case.phi, x, y, t, delta)
    )

    worst = 0.0
    for fd, hard in (
        (f_phi_fd, fc.f_phi(x, y, t)),
        (f_rho_fd, fc.f_rho(x, y, t)),
        (f_u_fd, fc.f_u(x, y, t)),
    ):
        scale = max(float(np.abs(fd).max()), 1e-12)
        worst = max(worst, float(np.abs(fd - hard).max()) / scale)
    return worst
