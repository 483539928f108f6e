"""Hamiltonians H = 1/2 |p|^2 + beta * F~, residual forms, the action and its L^2 gradient.

Gradient-type outputs are :class:`PhaseField` objects. ``grad_H`` returns the
Wirtinger covector: its slot view is ``(dH/dqbar, dH/dq, dH/dpbar, dH/dp)``,
i.e. its stored components are half the real gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .nonlinearity import CutoffNonlinearity, CutoffProfile, Nonlinearity, Zero
from .spectral import VOLUME, PhaseField, SpectralField, bridges_op_array, dt_array, laplacian_array


@dataclass(frozen=True)
class HamiltonianSpec:
    F: Nonlinearity = field(default_factory=Zero)
    rho: float | None = None

    @property
    def cutoff(self) -> CutoffProfile | None:
        return None if self.rho is None else CutoffProfile(self.rho)

    @property
    def effective(self) -> Nonlinearity:
        """F~^rho when a cutoff radius is set, F otherwise."""
        if self.rho is None:
            return self.F
        return CutoffNonlinearity(self.F, self.cutoff)

    def c3_bounds(self):
        return self.effective.bounds()

    def _t(self, Z: PhaseField):
        return Z.grid.t if self.F.t_dependent else None


def eval_H(spec: HamiltonianSpec, Z: PhaseField, beta: float = 1.0) -> SpectralField:
    x = Z.x
    kinetic = 0.5 * (x[2] ** 2 + x[3] ** 2).sum(axis=0)
    return SpectralField(Z.grid, kinetic + beta * spec.effective.value(x, spec._t(Z)))


def real_gradient(spec: HamiltonianSpec, Z: PhaseField, beta: float = 1.0) -> np.ndarray:
    """grad H in real coordinates, shape (4, d, n1, n2)."""
    g = beta * spec.effective.grad(Z.x, spec._t(Z))
    g[2:] += Z.x[2:]
    return g


def real_hessian(spec: HamiltonianSpec, Z: PhaseField, beta: float = 1.0) -> np.ndarray:
    h = beta * spec.effective.hess(Z.x, spec._t(Z))
    for a in (2, 3):
        for k in range(Z.grid.d):
            h[a, k, a, k] += 1.0
    return h


def grad_H(spec: HamiltonianSpec, Z: PhaseField, beta: float = 1.0) -> PhaseField:
    """Slots (dH/dqbar, dH/dq, dH/dpbar, dH/dp); F = 0 gives (0, 0, p/2, pbar/2)."""
    return PhaseField(Z.grid, 0.5 * real_gradient(spec, Z, beta))


def bridges_residual(spec: HamiltonianSpec, Z: PhaseField, beta: float = 1.0) -> PhaseField:
    """J_d Z - grad H in real coordinates."""
    return PhaseField(Z.grid, bridges_op_array(Z.x, Z.grid) - real_gradient(spec, Z, beta))


def hamilton_rows_from_bridges(B: PhaseField) -> tuple[np.ndarray, np.ndarray]:
    """Map a real Bridges residual to the complex rows (d_t q - dH/dp, -d_t p - dH/dq)."""
    x = B.x
    return np.conj(0.5 * (x[2] + 1j * x[3])), np.conj(0.5 * (x[0] + 1j * x[1]))


def hamilton_residual(spec: HamiltonianSpec, Z: PhaseField, beta: float = 1.0) -> PhaseField:
    """Complex Hamilton rows stored as slots: q-slot d_t q - dH/dp, p-slot -d_t p - dH/dq.

    The conjugate rows are the slot conjugates.
    """
    g = grad_H(spec, Z, beta)
    dH_dq = np.conj(g.q)
    dH_dp = np.conj(g.p)
    row1 = dt_array(Z.q, Z.grid) - dH_dp
    row2 = -dt_array(Z.p, Z.grid) - dH_dq
    return PhaseField.from_complex(Z.grid, row1, row2)


def laplace_residual(spec: HamiltonianSpec, Z: PhaseField) -> SpectralField:
    """-Laplacian q - 2 dF/dqbar = -Laplacian q - (dV1/dq1 + i dV2/dq2), d channels."""
    if not spec.F.potential:
        raise ValueError("Laplace form undefined: nonlinearity depends on p")
    g = spec.F.grad(Z.x, spec._t(Z))
    lap = laplacian_array(Z.x[0], Z.grid) + 1j * laplacian_array(Z.x[1], Z.grid)
    return SpectralField(Z.grid, -lap - (g[0] + 1j * g[1]))


def residual_norm(field_or_array, grid) -> float:
    vals = field_or_array.x if isinstance(field_or_array, PhaseField) else np.asarray(field_or_array)
    return float(np.sqrt(grid.integrate(np.abs(vals) ** 2).sum()))


def action(spec: HamiltonianSpec, Z: PhaseField, beta: float = 1.0) -> float:
    """int (p d_t q + pbar d_tbar qbar - H) dV, with dV = dt1 dt2."""
    Jz = bridges_op_array(Z.x, Z.grid)
    symplectic = (Z.x[2] * Jz[2] + Z.x[3] * Jz[3]).sum(axis=0)
    return float(Z.grid.integrate(symplectic - eval_H(spec, Z, beta).values[0]))


def grad_action(spec: HamiltonianSpec, Z: PhaseField, beta: float = 1.0) -> PhaseField:
    """L^2 gradient of the action: J_d Z - grad H = 2 (slashed_del Z - grad_H)."""
    return bridges_residual(spec, Z, beta)


def hofer_extrema(spec: HamiltonianSpec, grid, lattice: int = 64, shells: int = 8,
                  angles: int = 4, refine_steps: int = 25, seed: int = 0):
    """Per-grid-point (sup F~, inf F~) over T*T^{2d}, estimated by sampling plus ascent.

    Samples q on a ``lattice^2`` grid (d = 1) or a Sobol set of the same size
    (d > 1), crossed with ``shells`` values of |p|^2 in [0, rho] (or [0, 1] without
    cutoff) and ``angles`` directions of p; the best samples are then refined by a
    few gradient ascent/descent steps.
    """
    F = spec.effective
    d = grid.d
    if d == 1:
        g = 2 * np.pi * np.arange(lattice) / lattice
        Q1, Q2 = np.meshgrid(g, g, indexing="ij")
        qs = np.stack([Q1.ravel(), Q2.ravel()])[:, None, :]
    else:
        pts = qmc.Sobol(2 * d, seed=seed).random(lattice**2) * 2 * np.pi
        qs = np.stack([pts[:, :d].T, pts[:, d:].T])
    pmax = spec.rho if spec.rho is not None else 1.0
    radii = np.sqrt(np.linspace(0.0, pmax, shells))
    phis = 2 * np.pi * np.arange(angles) / angles
    samples = []
    for r in radii:
        for phi in phis if r > 0 else phis[:1]:
            p = np.empty((2,) + qs.shape[1:])
            p[0] = r * np.cos(phi) / np.sqrt(d)
            p[1] = r * np.sin(phi) / np.sqrt(d)
            samples.append(np.concatenate([qs, p]))
    X = np.concatenate(samples, axis=-1)  # (4, d, S)

    bounds = F.bounds()
    step = 0.5 / bounds.c2 if np.isfinite(bounds.c2) and bounds.c2 > 0 else 1e-2

    def refine(x, t, sign):
        for _ in range(refine_steps):
            x = x + sign * step * F.grad(x, t)
        return x

    def extrema_at(t):
        v = F.value(X, t)
        out = []
        for sign in (1.0, -1.0):
            idx = np.argsort(sign * v)[-8:]
            x = refine(X[..., idx], t, sign)
            vals = np.concatenate([v[idx], F.value(x, t)])
            out.append(vals.max() if sign > 0 else vals.min())
        return out

    if not F.t_dependent:
        hi, lo = extrema_at(None)
        return np.full(grid.shape, hi), np.full(grid.shape, lo)
    t1, t2 = grid.t
    hi = np.empty(grid.shape)
    lo = np.empty(grid.shape)
    for idx in np.ndindex(grid.shape):
        hi[idx], lo[idx] = extrema_at((t1[idx], t2[idx]))
    return hi, lo


def hofer_norm(spec: HamiltonianSpec, grid, **kw) -> float:
    """int_{T^2} (sup F~_t - inf F~_t) dV (no factor 2)."""
    hi, lo = hofer_extrema(spec, grid, **kw)
    return float(grid.integrate(hi - lo))


__all__ = [
    "HamiltonianSpec", "eval_H", "grad_H", "real_gradient", "real_hessian", "bridges_residual",
    "hamilton_residual", "hamilton_rows_from_bridges", "laplace_residual", "residual_norm",
    "action", "grad_action", "hofer_extrema", "hofer_norm", "VOLUME",
]
