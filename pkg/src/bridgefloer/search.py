"""Multi-start search for solutions of the Hamilton equations and distinct-solution counting.

Each start is relaxed by the signed Floer flow (well-posed, same stationary
points as the Floer flow) and then polished by Newton-Krylov on the Bridges
residual J_d x - grad H(x) = 0.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .flow import FlowConfig, apply_modes, bridges_symbol, run_flow
from .hamiltonian import (HamiltonianSpec, action, bridges_residual, hamilton_residual, laplace_residual,
                          real_hessian, residual_norm)
from .spectral import TWO_PI, PhaseField, TorusGrid, bridges_op_array, forward, inverse, random_field


@dataclass
class SearchConfig:
    lattice: int = 4
    starts: int = 32
    perturb_amplitude: float = 0.1
    perturb_modes: int = 3
    seed: int = 0
    flow: FlowConfig = field(default_factory=lambda: FlowConfig(
        ds=0.1, s_max=20.0, tol=1e-9, patience=10, dealias=False, signed=True))
    newton_tol: float = 1e-12
    newton_maxiter: int = 30
    gmres_rtol: float = 1e-10
    delta: float = 1e-3
    solution_tol: float = 1e-8
    threads: int = 1


@dataclass(eq=False)
class SolutionRecord:
    x: np.ndarray = field(repr=False)
    action: float
    hamilton: float
    bridges: float
    laplace: float | None
    max_p2: float
    start: int
    status: str
    newton_iterations: int = 0
    flow_status: str = ""
    starts: list = field(default_factory=list)
    family: str | None = None

    @property
    def is_solution(self) -> bool:
        return self.status == "solution"

    def q_mean(self) -> np.ndarray:
        """Zero-mode positions wrapped to [0, 2 pi), shape (2, d)."""
        q = np.mod(self.x[:2].mean(axis=(-2, -1)), TWO_PI)
        q[np.isclose(q, TWO_PI, rtol=0.0, atol=1e-9)] = 0.0
        return q

    def summary(self) -> dict:
        return {
            "action": self.action, "hamilton": self.hamilton, "bridges": self.bridges,
            "laplace": self.laplace, "max_p2": self.max_p2, "start": self.start,
            "starts": self.starts, "status": self.status, "family": self.family,
            "q_mean": np.round(self.q_mean(), 12).tolist(), "newton_iterations": self.newton_iterations,
            "flow_status": self.flow_status,
        }


@dataclass
class SearchResult:
    solutions: list
    records: list
    failures: list

    @property
    def count(self) -> int:
        return len(self.solutions)


# ---------------------------------------------------------------- Newton-Krylov

def _preconditioner(grid: TorusGrid, reg: float = 1.0) -> np.ndarray:
    """Per-mode inverse of J^ - P, with -reg on the q-block where J^ vanishes."""
    m1, m2 = grid.derivative_modes
    M = bridges_symbol(grid) - np.diag([0.0, 0.0, 1.0, 1.0])
    flat = (m1 == 0) & (m2 == 0)
    M[flat] -= reg * np.diag([1.0, 1.0, 0.0, 0.0])
    return np.linalg.inv(M)


def newton_polish(spec: HamiltonianSpec, Z: PhaseField, tol: float = 1e-12, maxiter: int = 30,
                  gmres_rtol: float = 1e-10) -> tuple[PhaseField, int, float]:
    """Solve J_d x - grad H(x) = 0 by Newton-Krylov (GMRES, symbol preconditioner)."""
    grid = Z.grid
    shape = Z.x.shape
    Minv = _preconditioner(grid)

    def precond(v):
        return inverse(apply_modes(Minv, forward(v.reshape(shape)))).real.ravel()

    Mop = LinearOperator((Z.x.size, Z.x.size), matvec=precond, dtype=float)
    G = bridges_residual(spec, Z)
    norm = residual_norm(G, grid)
    it = 0
    for it in range(1, maxiter + 1):
        if norm <= tol:
            it -= 1
            break
        hess = real_hessian(spec, Z)

        def matvec(v, hess=hess):
            y = v.reshape(shape)
            hy = np.einsum("abcd...,cd...->ab...", hess, y)
            return (bridges_op_array(y, grid) - hy).ravel()

        A = LinearOperator((Z.x.size, Z.x.size), matvec=matvec, dtype=float)
        dx, _ = gmres(A, -G.x.ravel(), rtol=gmres_rtol, atol=0.0, restart=60, maxiter=20, M=Mop)
        lam = 1.0
        for _ in range(12):
            trial = PhaseField(grid, Z.x + lam * dx.reshape(shape))
            G_t = bridges_residual(spec, trial)
            n_t = residual_norm(G_t, grid)
            if n_t < norm:
                break
            lam *= 0.5
        else:
            break
        Z, G, norm = trial, G_t, n_t
    return Z, it, norm


# ---------------------------------------------------------------- starts and dedup

def initial_states(grid: TorusGrid, cfg: SearchConfig) -> list[PhaseField]:
    """Lattice constants in T^{2d}, then lattice constants plus small random Fourier perturbations."""
    d = grid.d
    pts = np.array(list(itertools.product(TWO_PI * np.arange(cfg.lattice) / cfg.lattice, repeat=2 * d)))
    rng = np.random.default_rng(cfg.seed)
    if cfg.starts < len(pts):
        pts = pts[rng.choice(len(pts), cfg.starts, replace=False)]
    out = [PhaseField.constant(grid, p[:d], p[d:]) for p in pts]
    m1, m2 = grid.modes
    while len(out) < cfg.starts:
        p = pts[rng.integers(len(pts))]
        pert = random_field(grid, rng, max_mode=cfg.perturb_modes, amplitude=cfg.perturb_amplitude, decay=0.0)
        pert -= pert.mean(axis=(-2, -1), keepdims=True)
        out.append(PhaseField.constant(grid, p[:d], p[d:]) + PhaseField(grid, pert))
    return out


def field_distance(a: np.ndarray, b: np.ndarray, grid: TorusGrid) -> float:
    """L^2 distance of (q mod 2 pi, p), q-differences taken on the circle."""
    dq = np.mod(a[:2] - b[:2] + np.pi, TWO_PI) - np.pi
    dp = a[2:] - b[2:]
    return float(np.sqrt(grid.integrate((dq**2).sum(axis=(0, 1)) + (dp**2).sum(axis=(0, 1)))))


def dedup(records: list, grid: TorusGrid, delta: float = 1e-3) -> list:
    """Greedy clustering by :func:`field_distance`; each cluster keeps its lowest-action member."""
    reps: list[SolutionRecord] = []
    for r in sorted(records, key=lambda r: r.action):
        for k in reps:
            if np.isinf(delta) or field_distance(r.x, k.x, grid) <= delta:
                k.starts.append(r.start)
                break
        else:
            reps.append(replace(r, starts=[r.start]))
    return reps


def _degenerate_constant(spec: HamiltonianSpec, rec: SolutionRecord, tol: float = 1e-10) -> bool:
    x = rec.x
    const = np.ptp(x, axis=(-2, -1)).max() <= 1e-10 and np.abs(x[2:]).max() <= 1e-10
    if not const:
        return False
    h = spec.effective.hess(x[..., :1, :1])[:2, :, :2, :, 0, 0]
    d = x.shape[1]
    return abs(np.linalg.det(h.reshape(2 * d, 2 * d))) <= tol


def merge_families(spec: HamiltonianSpec, reps: list) -> list:
    """Collapse constant solutions with singular q-Hessian into one continuum family record."""
    fam = [r for r in reps if r.is_solution and _degenerate_constant(spec, r)]
    if len(fam) <= 1:
        for r in fam:
            r.family = "degenerate-constants"
        return reps
    head = replace(fam[0], starts=sorted(s for r in fam for s in r.starts), family="degenerate-constants")
    return [head] + [r for r in reps if r not in fam]


# ---------------------------------------------------------------- driver

def solve_start(spec: HamiltonianSpec, Z0: PhaseField, index: int, cfg: SearchConfig) -> SolutionRecord:
    traj = run_flow(spec, None, Z0, cfg.flow)
    Z, its, _ = newton_polish(spec, traj.final, cfg.newton_tol, cfg.newton_maxiter, cfg.gmres_rtol)
    grid = Z.grid
    ham = residual_norm(hamilton_residual(spec, Z), grid)
    bri = residual_norm(bridges_residual(spec, Z), grid)
    lap = residual_norm(laplace_residual(spec, Z).values, grid) if spec.F.potential else None
    p2 = float((Z.x[2] ** 2 + Z.x[3] ** 2).sum(axis=0).max())
    ok = np.isfinite(ham) and ham <= cfg.solution_tol and (spec.rho is None or p2 <= spec.rho)
    return SolutionRecord(np.array(Z.x), action(spec, Z), ham, bri, lap, p2, index,
                          "solution" if ok else "unconverged", its, traj.status)


def find_solutions(spec: HamiltonianSpec, grid: TorusGrid, cfg: SearchConfig | None = None) -> SearchResult:
    """Run all starts (optionally in a thread pool), deduplicate, sort by action."""
    cfg = cfg or SearchConfig()
    starts = initial_states(grid, cfg)

    def work(item):
        i, Z0 = item
        return solve_start(spec, Z0, i, cfg)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            records = list(pool.map(work, enumerate(starts)))
    else:
        records = [work(item) for item in enumerate(starts)]
    good = [r for r in records if r.is_solution]
    failures = [{"start": r.start, "status": r.status, "flow_status": r.flow_status, "hamilton": r.hamilton}
                for r in records if not r.is_solution]
    distinct = merge_families(spec, dedup(good, grid, cfg.delta))
    distinct.sort(key=lambda r: r.action)
    return SearchResult(distinct, records, failures)
