"""Lagrangian side: action, Euler-Lagrange residual, Legendre condition and transform.

Lagrangians are real functions of the real lift ``q = (q1, q2)`` and the real
velocity ``u = (u1, u2)`` with ``d_t q = u1 + i u2`` (arrays of shape
``(2, d, ...)``). In these coordinates the fiber momentum is ``pi = dL/du`` and
the complex momentum ``p = dL/d(d_t q) = (pi1 - i pi2) / 2``, so

    p1 = pi1 / 2,  p2 = -pi2 / 2,  H = u . pi - L.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hamiltonian import HamiltonianSpec, hamilton_residual
from .nonlinearity import Nonlinearity
from .spectral import PhaseField, SpectralField, TorusGrid, dt_array

CONDITION_THRESHOLD = 1e-8


class LegendreError(ValueError):
    """Raised when the fiber map (d_t q, d_tbar qbar) -> (p, pbar) is not invertible."""


class LagrangianSpec:
    """Base class. ``value``, ``grad_q``, ``grad_u``, ``hess_uu``, ``hess_uq``, ``hess_qq``.

    Hessians have shape ``(2, d, 2, d, ...)``; ``hess_uq[a, j, b, k] = d^2 L / du_aj dq_bk``.
    """

    t_dependent = False
    name = "lagrangian"

    def value(self, q, u, t=None):
        raise NotImplementedError

    def grad_q(self, q, u, t=None):
        raise NotImplementedError

    def grad_u(self, q, u, t=None):
        raise NotImplementedError

    def hess_uu(self, q, u, t=None):
        raise NotImplementedError

    def hess_uq(self, q, u, t=None):
        raise NotImplementedError

    def hess_qq(self, q, u, t=None):
        raise NotImplementedError


def _with_p(q):
    return np.concatenate([q, np.zeros_like(q)])


class KineticPotential(LagrangianSpec):
    """L = 2 |u|^2 + (a/4) |u|^4 - V(q); a = 0 is the Dirichlet-minus-potential Lagrangian

    L = 2 d_t q d_tbar qbar - V.
    """

    def __init__(self, V: Nonlinearity, a: float = 0.0):
        if not V.potential:
            raise ValueError("V must depend on q only")
        self.V, self.a = V, a
        self.t_dependent = V.t_dependent
        self.name = "dirichlet-minus-potential" if a == 0 else "kinetic-quartic"

    def value(self, q, u, t=None):
        w = (u**2).sum(axis=(0, 1))
        return 2 * w + 0.25 * self.a * w**2 - self.V.value(_with_p(q), t)

    def grad_q(self, q, u, t=None):
        return -self.V.grad(_with_p(q), t)[:2]

    def grad_u(self, q, u, t=None):
        w = (u**2).sum(axis=(0, 1))
        return (4 + self.a * w) * u

    def hess_uu(self, q, u, t=None):
        d = u.shape[1]
        w = (u**2).sum(axis=(0, 1))
        eye = np.eye(2 * d).reshape(2, d, 2, d)
        eye = eye.reshape(eye.shape + (1,) * (u.ndim - 2))
        return (4 + self.a * w) * eye + 2 * self.a * np.einsum("ab...,cd...->abcd...", u, u)

    def hess_uq(self, q, u, t=None):
        return np.zeros(u.shape[:2] + q.shape)

    def hess_qq(self, q, u, t=None):
        return -self.V.hess(_with_p(q), t)[:2, :, :2]


class DirichletMinusPotential(KineticPotential):
    def __init__(self, V: Nonlinearity):
        super().__init__(V, 0.0)


def make_lagrangian(name: str, V: Nonlinearity, **params) -> LagrangianSpec:
    if name == "dirichlet-minus-potential":
        return DirichletMinusPotential(V)
    if name == "kinetic-quartic":
        return KineticPotential(V, params.get("a", 1.0))
    raise KeyError(f"unknown Lagrangian {name!r}")


# ---------------------------------------------------------------- field-level maps

def _t(L: LagrangianSpec, grid: TorusGrid):
    return grid.t if L.t_dependent else None


def real_lift(values: np.ndarray) -> np.ndarray:
    """(d, n1, n2) complex -> (2, d, n1, n2) real."""
    return np.stack([values.real, values.imag])


def velocity(q: SpectralField) -> np.ndarray:
    return real_lift(dt_array(q.values, q.grid))


def momentum(L: LagrangianSpec, q: SpectralField) -> np.ndarray:
    """p = dL/d(d_t q) on the grid, complex (d, n1, n2)."""
    pi = L.grad_u(real_lift(q.values), velocity(q), _t(L, q.grid))
    return 0.5 * (pi[0] - 1j * pi[1])


def lagrangian_density(L: LagrangianSpec, q: SpectralField) -> np.ndarray:
    return L.value(real_lift(q.values), velocity(q), _t(L, q.grid))


def lagrangian_action(L: LagrangianSpec, q: SpectralField) -> float:
    """S[q] = int L dV with dV = dt1 dt2 (the form -dt ^ dtbar / 2i)."""
    dens = lagrangian_density(L, q)
    if np.iscomplexobj(dens) and np.abs(dens.imag).max() > 1e-12:
        raise ValueError("Lagrangian is not real-valued")
    return float(q.grid.integrate(np.real(dens)))


def euler_lagrange_residual(L: LagrangianSpec, q: SpectralField) -> SpectralField:
    """dL/dq - d_t (dL/d(d_t q)); the conjugate row is the complex conjugate."""
    t = _t(L, q.grid)
    gq = L.grad_q(real_lift(q.values), velocity(q), t)
    dLdq = 0.5 * (gq[0] - 1j * gq[1])
    return SpectralField(q.grid, dLdq - dt_array(momentum(L, q), q.grid))


def wirtinger_velocity_blocks(huu: np.ndarray):
    """(A, B, C) = (L_{v vbar}, L_{v v}, L_{vbar vbar}) as (..., d, d) matrices, v = d_t q."""
    h = np.moveaxis(np.moveaxis(huu, (0, 1, 2, 3), (-4, -3, -2, -1)), -3, -2)  # (..., 2, 2, d, d)
    L11, L12, L21, L22 = h[..., 0, 0, :, :], h[..., 0, 1, :, :], h[..., 1, 0, :, :], h[..., 1, 1, :, :]
    A = 0.25 * (L11 + L22 + 1j * (L12 - L21))
    B = 0.25 * (L11 - L22 - 1j * (L12 + L21))
    C = 0.25 * (L11 - L22 + 1j * (L12 + L21))
    return A, B, C


def legendre_condition(L: LagrangianSpec, q: SpectralField) -> np.ndarray:
    """Pointwise det(A^2 - B C) on the grid (real part; the imaginary part vanishes for real L)."""
    huu = L.hess_uu(real_lift(q.values), velocity(q), _t(L, q.grid))
    A, B, C = wirtinger_velocity_blocks(huu)
    return np.real(np.linalg.det(A @ A - B @ C))


def condition_flagged(det: np.ndarray, threshold: float = CONDITION_THRESHOLD) -> bool:
    return bool(np.any(np.abs(det) < threshold))


# ---------------------------------------------------------------- the transform

def _flat(a, d):
    """(2, d, 2, d, ...) -> (..., 2d, 2d)."""
    n = 2 * d
    return np.moveaxis(a.reshape((n, n) + a.shape[4:]), (0, 1), (-2, -1))


def _unflat_vec(v, d):
    """(..., 2d) -> (2, d, ...)."""
    return np.moveaxis(v, -1, 0).reshape((2, d) + v.shape[:-1])


def _flat_vec(v):
    return np.moveaxis(v.reshape((-1,) + v.shape[2:]), 0, -1)


def solve_velocity(L: LagrangianSpec, q, pi, t=None, tol: float = 1e-12, maxiter: int = 50):
    """Per-point damped Newton for L_u(q, u) = pi; returns (u, iterations, max residual)."""
    d = q.shape[1]
    u = np.zeros_like(pi)
    res = L.grad_u(q, u, t) - pi
    it = 0
    scale = 1.0 + np.abs(pi).max(initial=0.0)
    for it in range(1, maxiter + 1):
        H = _flat(L.hess_uu(q, u, t), d)
        du = _unflat_vec(np.linalg.solve(H, -_flat_vec(res)[..., None])[..., 0], d)
        lam = np.ones(pi.shape[2:])
        norm0 = np.sqrt((res**2).sum(axis=(0, 1)))
        for _ in range(30):
            trial = u + lam * du
            r_trial = L.grad_u(q, trial, t) - pi
            worse = np.sqrt((r_trial**2).sum(axis=(0, 1))) > norm0 * (1 - 1e-4 * lam) + 1e-15 * scale
            if not worse.any():
                break
            lam = np.where(worse, 0.5 * lam, lam)
        u, res = trial, r_trial
        err = float(np.abs(res).max()) if res.size else 0.0
        if err <= tol * scale:
            break
    return u, it, float(np.abs(res).max()) if res.size else 0.0


class LegendreNonlinearity(Nonlinearity):
    """F = H_L - 1/2 |p|^2, where H_L(q, p) = u . pi - L(q, u) at the velocity solving L_u = pi."""

    potential = False

    def __init__(self, L: LagrangianSpec, tol: float = 1e-12, maxiter: int = 50):
        self.L, self.tol, self.maxiter = L, tol, maxiter
        self.t_dependent = L.t_dependent
        self.name = f"legendre-{L.name}"

    @staticmethod
    def pi_of(x):
        return np.stack([2 * x[2], -2 * x[3]])

    def velocity(self, x, t=None):
        u, _, err = solve_velocity(self.L, x[:2], self.pi_of(x), t, self.tol, self.maxiter)
        if err > 1e-8 * (1 + np.abs(x).max()):
            raise LegendreError(f"fiber Newton did not converge (residual {err:.3e})")
        return u

    def hamiltonian(self, x, t=None):
        u = self.velocity(x, t)
        return (u * self.pi_of(x)).sum(axis=(0, 1)) - self.L.value(x[:2], u, t)

    def value(self, x, t=None):
        return self.hamiltonian(x, t) - 0.5 * (x[2:] ** 2).sum(axis=(0, 1))

    def grad(self, x, t=None):
        u = self.velocity(x, t)
        g = np.empty_like(x, dtype=float)
        g[:2] = -self.L.grad_q(x[:2], u, t)
        g[2] = 2 * u[0] - x[2]
        g[3] = -2 * u[1] - x[3]
        return g

    def hess(self, x, t=None):
        d = x.shape[1]
        q = x[:2]
        u = self.velocity(x, t)
        Huu = _flat(self.L.hess_uu(q, u, t), d)
        Huq = _flat(self.L.hess_uq(q, u, t), d)
        Hqq = _flat(self.L.hess_qq(q, u, t), d)
        inv = np.linalg.inv(Huu)
        u_q = -inv @ Huq                      # du/dq
        H_pipi = inv
        H_qq = -Hqq - np.swapaxes(Huq, -1, -2) @ u_q
        H_qpi = -np.swapaxes(Huq, -1, -2) @ inv
        M = np.kron(np.diag([2.0, -2.0]), np.eye(d))  # pi = M p
        H_pp = M @ H_pipi @ M
        H_qp = H_qpi @ M
        n = 2 * d
        full = np.zeros(x.shape[2:] + (2 * n, 2 * n))
        full[..., :n, :n] = H_qq
        full[..., :n, n:] = H_qp
        full[..., n:, :n] = np.swapaxes(H_qp, -1, -2)
        full[..., n:, n:] = H_pp - np.eye(n)
        return np.moveaxis(full, (-2, -1), (0, 1)).reshape((4, d, 4, d) + x.shape[2:])


@dataclass
class TransformReport:
    condition_min: float
    flagged: bool
    dH_dq_err: float
    dH_dp_err: float
    newton_residual: float


def legendre_transform(L: LagrangianSpec, q: SpectralField, samples: int | None = None,
                       seed: int = 0) -> tuple[PhaseField, HamiltonianSpec, TransformReport]:
    """Z = (q, p = dL/d(d_t q)) together with the Hamiltonian H_L and bookkeeping checks.

    Checks dH/dq = -dL/dq and dH/dp = d_t q at ``samples`` random grid points
    (all points if ``None``).
    """
    grid = q.grid
    det = legendre_condition(L, q)
    if condition_flagged(det):
        raise LegendreError(f"Legendre condition degenerate: min |det| = {np.abs(det).min():.3e}")
    p = momentum(L, q)
    Z = PhaseField.from_complex(grid, q.values, p)
    F = LegendreNonlinearity(L)
    spec = HamiltonianSpec(F)

    t = _t(L, grid)
    x = Z.x
    if samples is not None:
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, grid.n1 * grid.n2, size=samples)
        x = x.reshape(4, grid.d, -1)[..., idx]
        if t is not None:
            t = tuple(c.ravel()[idx] for c in t)
        v = dt_array(q.values, grid).reshape(grid.d, -1)[:, idx]
    else:
        v = dt_array(q.values, grid)
    u, _, nres = solve_velocity(L, x[:2], F.pi_of(x), t)
    g = F.grad(x, t)
    g[2:] += x[2:]
    dH_dq = 0.5 * (g[0] - 1j * g[1])
    dH_dp = 0.5 * (g[2] - 1j * g[3])
    gq = L.grad_q(x[:2], u, t)
    dL_dq = 0.5 * (gq[0] - 1j * gq[1])
    rep = TransformReport(float(np.abs(det).min()), False, float(np.abs(dH_dq + dL_dq).max()),
                          float(np.abs(dH_dp - v).max()), nres)
    return Z, spec, rep


def el_and_hamilton(L: LagrangianSpec, q: SpectralField) -> tuple[SpectralField, PhaseField]:
    """EL residual of q and Hamilton residual of its Legendre transform."""
    Z, spec, _ = legendre_transform(L, q, samples=16)
    return euler_lagrange_residual(L, q), hamilton_residual(spec, Z)
