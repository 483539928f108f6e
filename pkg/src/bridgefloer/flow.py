"""Floer flow ds Z = 2 (grad_c H^{rho,r} - slashed_del Z), written in real components as

    dx/ds = (P - J_d) x + beta_r(s) grad F~(x),

integrated by ETD-RK2 with the linear part exact per Fourier mode.

Per mode the linear operator L = P - J^(m) satisfies L^2 = L + |m|^2, so its
spectrum is mu_pm = (1 +- sqrt(1 + 4|m|^2)) / 2 with spectral projectors
Pi_pm = +-(L - mu_mp) / (mu_+ - mu_-). Since mu_+ >= 1 the forward initial value
problem is ill-posed (the Floer equation is elliptic in (s, t)); the stepper
therefore supports

* ``stable_projection``: project onto the Pi_- subspace after every step (exact
  for the linear sector),
* ``signed``: integrate dx/ds = S (L x + N) with S = Pi_- - Pi_+, a well-posed
  relaxation with the same stationary points, used by the solution search.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from functools import lru_cache
from pathlib import Path

import numpy as np

from .dump import TrajectoryLog, write_field
from .hamiltonian import HamiltonianSpec, action, real_gradient
from .nonlinearity import SMOOTHSTEP_DERIV_MAX, smoothstep
from .spectral import VOLUME, PhaseField, TorusGrid, bridges_op_array, d1, d2, forward, inverse, laplacian_array


@dataclass(frozen=True)
class HomotopyProfile:
    """beta_r(s) = min(r, 1) * B_r(s); B_r rises on [-1, 0], equals 1 on [0, (2d+1) r], falls after."""

    r: float
    d: int = 1

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("r must be nonnegative")

    @property
    def plateau_end(self) -> float:
        return (2 * self.d + 1) * self.r

    @property
    def support(self) -> tuple[float, float]:
        return (-1.0, self.plateau_end + 1.0)

    def __call__(self, s, order: int = 0):
        s = np.asarray(s, dtype=float)
        B = smoothstep(s + 1.0, order) - smoothstep(s - self.plateau_end, order)
        out = min(self.r, 1.0) * B
        return float(out) if out.ndim == 0 else out

    def derivative_bounds(self) -> tuple[float, float]:
        """(max |beta'|, max |beta''|)."""
        a = min(self.r, 1.0)
        return a * SMOOTHSTEP_DERIV_MAX[1], a * SMOOTHSTEP_DERIV_MAX[2]


def beta(r: float, s, d: int = 1):
    return HomotopyProfile(r, d)(s)


def _beta_at(profile, s: float) -> float:
    return 1.0 if profile is None else float(profile(s))


def floer_rhs(spec: HamiltonianSpec, profile: HomotopyProfile | None, s: float, Z: PhaseField) -> PhaseField:
    """ds Z for the Floer equation; ``profile=None`` means the fixed Hamiltonian (beta = 1)."""
    b = _beta_at(profile, s)
    return PhaseField(Z.grid, real_gradient(spec, Z, b) - bridges_op_array(Z.x, Z.grid))


# ---------------------------------------------------------------- linear symbol

def bridges_symbol(grid: TorusGrid) -> np.ndarray:
    """J^(m) acting on Fourier coefficients of (q1, q2, p1, p2), shape (n1, n2, 4, 4)."""
    m1, m2 = grid.derivative_modes
    J = np.zeros(grid.shape + (4, 4), dtype=complex)
    J[..., 0, 2], J[..., 0, 3] = -1j * m1, -1j * m2
    J[..., 1, 2], J[..., 1, 3] = -1j * m2, 1j * m1
    J[..., 2, 0], J[..., 2, 1] = 1j * m1, 1j * m2
    J[..., 3, 0], J[..., 3, 1] = 1j * m2, -1j * m1
    return J


@lru_cache(maxsize=16)
def linear_modes(grid: TorusGrid):
    """(mu_plus, mu_minus, Pi_plus, Pi_minus) of L = P - J^ per mode."""
    m1, m2 = grid.derivative_modes
    root = np.sqrt(1.0 + 4.0 * (m1**2 + m2**2))
    mu_p, mu_m = 0.5 * (1 + root), 0.5 * (1 - root)
    L = np.diag([0.0, 0.0, 1.0, 1.0]).astype(complex) - bridges_symbol(grid)
    eye = np.eye(4)
    Pi_p = (L - mu_m[..., None, None] * eye) / root[..., None, None]
    Pi_m = eye - Pi_p
    return mu_p, mu_m, Pi_p, Pi_m


def matrix_function(grid: TorusGrid, f_plus, f_minus) -> np.ndarray:
    _, _, Pi_p, Pi_m = linear_modes(grid)
    return np.asarray(f_plus)[..., None, None] * Pi_p + np.asarray(f_minus)[..., None, None] * Pi_m


def apply_modes(M: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Apply per-mode 4x4 matrices (n1, n2, 4, 4) to coefficients (4, d, n1, n2)."""
    return np.einsum("abij,jkab->ikab", M, u)


def stable_projection(Z: PhaseField) -> PhaseField:
    """Component of Z in the decaying subspace of the linear flow."""
    _, _, _, Pi_m = linear_modes(Z.grid)
    return PhaseField(Z.grid, inverse(apply_modes(Pi_m, forward(Z.x))).real)


def linear_solution(Z0: PhaseField, s: float) -> PhaseField:
    """Closed-form F = 0 flow exp(s L) Z0 mode by mode."""
    mu_p, mu_m, _, _ = linear_modes(Z0.grid)
    E = matrix_function(Z0.grid, np.exp(s * mu_p), np.exp(s * mu_m))
    return PhaseField(Z0.grid, inverse(apply_modes(E, forward(Z0.x))).real)


def phi1(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 0.0, z)
    series = 1 + z / 2 + z**2 / 6 + z**3 / 24 + z**4 / 120
    return np.where(small, series, np.expm1(zs) / np.where(small, 1.0, zs))


def phi2(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    series = 0.5 + z / 6 + z**2 / 24 + z**3 / 120 + z**4 / 720
    return np.where(small, series, (np.expm1(zs) - zs) / zs**2)


# ---------------------------------------------------------------- integrator

@dataclass
class FlowConfig:
    ds: float = 0.01
    s0: float = 0.0
    s_max: float = 50.0
    tol: float = 1e-9
    patience: int = 100
    dealias: bool = True
    stable_projection: bool = False
    signed: bool = False
    step_tol: float = 1e-8
    max_halvings: int = 8
    growth_limit: float = 1e6
    snapshot_every: int = 0
    log_path: str | None = None
    dump_every: int = 0
    dump_dir: str | None = None

    @property
    def integrator(self) -> str:
        return "etd-rk2-signed" if self.signed else "etd-rk2"


class ETDStepper:
    """Cox-Matthews ETD-RK2 for dx/ds = L x + N(x, s), state held as Fourier coefficients."""

    def __init__(self, spec: HamiltonianSpec, profile, grid: TorusGrid, dealias: bool = True,
                 signed: bool = False, project: bool = False):
        self.spec, self.profile, self.grid = spec, profile, grid
        self.dealias, self.signed, self.project = dealias, signed, project
        mu_p, mu_m, _, Pi_m = linear_modes(grid)
        self.lam_p = -mu_p if signed else mu_p
        self.lam_m = mu_m
        self.Pi_m = Pi_m
        self.S = matrix_function(grid, -1.0, 1.0) if signed else None
        self._cache: dict[float, tuple] = {}

    def coefficients(self, h: float):
        if h not in self._cache:
            g = self.grid
            zp, zm = h * self.lam_p, h * self.lam_m
            self._cache[h] = (
                matrix_function(g, np.exp(zp), np.exp(zm)),
                matrix_function(g, h * phi1(zp), h * phi1(zm)),
                matrix_function(g, h * phi2(zp), h * phi2(zm)),
            )
        return self._cache[h]

    def nonlinear(self, u: np.ndarray, s: float) -> np.ndarray:
        b = _beta_at(self.profile, s)
        x = inverse(u).real
        t = self.grid.t if self.spec.F.t_dependent else None
        N = forward(b * self.spec.effective.grad(x, t)) if b != 0.0 else np.zeros_like(u)
        if self.dealias:
            N = N * self.grid.dealias_mask
        if self.signed:
            N = apply_modes(self.S, N)
        return N

    def step(self, u: np.ndarray, s: float, h: float) -> np.ndarray:
        E, Q1, Q2 = self.coefficients(h)
        Nn = self.nonlinear(u, s)
        a = apply_modes(E, u) + apply_modes(Q1, Nn)
        Na = self.nonlinear(a, s + h)
        out = a + apply_modes(Q2, Na - Nn)
        if self.project:
            out = apply_modes(self.Pi_m, out)
        return out


def step(spec: HamiltonianSpec, profile, s: float, Z: PhaseField, ds: float, **kw) -> PhaseField:
    """One ETD-RK2 step of the Floer flow from (s, Z)."""
    st = ETDStepper(spec, profile, Z.grid, **kw)
    return PhaseField(Z.grid, inverse(st.step(forward(Z.x), s, ds)).real)


@dataclass
class FlowTrajectory:
    grid: TorusGrid
    spec: HamiltonianSpec
    profile: HomotopyProfile | None
    config: FlowConfig
    s: np.ndarray
    action: np.ndarray
    grad_norm: np.ndarray
    max_p2: np.ndarray
    status: str
    final: PhaseField
    snapshots: list = field(default_factory=list, repr=False)  # (s, x) pairs
    rejected: int = 0
    max_action_increase: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def energy_increments(self) -> np.ndarray:
        g2 = self.grad_norm**2
        return 0.5 * (g2[1:] + g2[:-1]) * np.diff(self.s)

    def echo(self) -> dict:
        cfg = asdict(self.config)
        cfg["integrator"] = self.config.integrator
        return {**cfg, "r": None if self.profile is None else self.profile.r, "rho": self.spec.rho,
                "grid": [self.grid.n1, self.grid.n2, self.grid.d], "volume": VOLUME}


def run_flow(spec: HamiltonianSpec, profile: HomotopyProfile | None, Z0: PhaseField,
             config: FlowConfig | None = None) -> FlowTrajectory:
    """Integrate from ``Z0`` at ``config.s0`` until the gradient norm stays below ``tol``.

    Convergence is only declared once s has left the support of the homotopy
    profile. Status is one of "converged", "max_s", "diverged", "nan",
    "nonmonotone".
    """
    cfg = config or FlowConfig()
    grid = Z0.grid
    st = ETDStepper(spec, profile, grid, cfg.dealias, cfg.signed, cfg.stable_projection)
    check_monotone = not cfg.signed
    s_ready = cfg.s0 if profile is None else max(cfg.s0, profile.support[1])
    log = TrajectoryLog(cfg.log_path, fresh=True) if cfg.log_path else None
    if cfg.dump_every and cfg.dump_dir:
        Path(cfg.dump_dir).mkdir(parents=True, exist_ok=True)

    u = forward(Z0.x)
    Z = Z0
    s = cfg.s0
    S, A, G, P2 = [], [], [], []
    snaps = []
    status = "max_s"
    rejected = 0
    worst = 0.0
    quiet = 0
    h = cfg.ds

    def record(Z, s, n):
        S.append(s)
        A.append(action(spec, Z, _beta_at(profile, s)))
        G.append(floer_rhs(spec, profile, s, Z).norm())
        P2.append(float((Z.x[2] ** 2 + Z.x[3] ** 2).sum(axis=0).max()))
        if log is not None:
            inc = 0.0 if len(S) < 2 else 0.5 * (G[-1] ** 2 + G[-2] ** 2) * (S[-1] - S[-2])
            log.append(s=s, action=A[-1], grad_norm=G[-1], max_p2=P2[-1], energy_increment=inc)
        if cfg.snapshot_every and n % cfg.snapshot_every == 0:
            snaps.append((s, Z.x))
        if cfg.dump_every and cfg.dump_dir and n % cfg.dump_every == 0:
            write_field(Path(cfg.dump_dir) / f"snapshot_{n:06d}.bfsd", Z.x.reshape(-1, *grid.shape),
                        meta={"s": s, "d": grid.d})

    record(Z, s, 0)
    n = 0
    try:
        while s < cfg.s_max - 1e-12:
            h = min(h, cfg.s_max - s)
            u_new = st.step(u, s, h)
            x_new = inverse(u_new).real
            if not np.all(np.isfinite(x_new)):
                status = "nan"
                if cfg.dump_dir:
                    Path(cfg.dump_dir).mkdir(parents=True, exist_ok=True)
                    write_field(Path(cfg.dump_dir) / "last_finite.bfsd", Z.x.reshape(-1, *grid.shape),
                                meta={"s": s, "d": grid.d})
                break
            if np.abs(x_new).max() > cfg.growth_limit:
                status = "diverged"
                break
            Z_new = PhaseField(grid, x_new)
            if check_monotone:
                b = _beta_at(profile, s)
                inc = action(spec, Z_new, b) - action(spec, Z, b)
                if inc > cfg.step_tol:
                    rejected += 1
                    if h < cfg.ds / 2**cfg.max_halvings:
                        status = "nonmonotone"
                        break
                    h /= 2
                    continue
                worst = max(worst, inc)
            u, Z, s = u_new, Z_new, s + h
            n += 1
            h = min(2 * h, cfg.ds)
            record(Z, s, n)
            quiet = quiet + 1 if (G[-1] <= cfg.tol and s >= s_ready) else 0
            if quiet >= cfg.patience:
                status = "converged"
                break
    finally:
        if log is not None:
            log.close()
    if cfg.snapshot_every and snaps and snaps[-1][0] != s:
        snaps.append((s, Z.x))
    return FlowTrajectory(grid, spec, profile, cfg, np.array(S), np.array(A), np.array(G), np.array(P2),
                          status, Z, snaps, rejected, worst)


# ---------------------------------------------------------------- diagnostics

def energy_density(traj: FlowTrajectory, s: float, x: np.ndarray) -> np.ndarray:
    """e = 1/2 (|ds x|^2 + |d1 x|^2 + |d2 x|^2), real components summed."""
    Z = PhaseField(traj.grid, x)
    xs = floer_rhs(traj.spec, traj.profile, s, Z).x
    return 0.5 * (xs**2 + d1(x, traj.grid) ** 2 + d2(x, traj.grid) ** 2).sum(axis=(0, 1))


@dataclass
class EnergyReport:
    E: float
    s: np.ndarray
    density: np.ndarray | None
    window: tuple[float, float] | None
    window_integral: float | None
    C_K: float | None

    @property
    def window_bound_ok(self) -> bool | None:
        if self.window_integral is None:
            return None
        return self.window_integral <= self.E + self.C_K


def window_constant(traj: FlowTrajectory, M: float) -> float:
    """C(K) = vol(K) (rho/2 + 2 sup |dF~|^2) for K = [-M, M] x T^2."""
    rho = traj.spec.rho if traj.spec.rho is not None else float(traj.max_p2.max())
    c1 = traj.spec.effective.bounds().c1
    return 2 * M * VOLUME * (0.5 * rho + 2 * c1**2)


def energy(traj: FlowTrajectory, M: float | None = None) -> EnergyReport:
    """E = int ||ds Z||^2 ds by the trapezoid rule; densities from stored snapshots."""
    E = float(traj.energy_increments.sum()) if len(traj.s) > 1 else 0.0
    if not traj.snapshots:
        return EnergyReport(E, traj.s, None, None, None, None)
    ss = np.array([s for s, _ in traj.snapshots])
    dens = np.stack([energy_density(traj, s, x) for s, x in traj.snapshots])
    if M is None:
        return EnergyReport(E, ss, dens, None, None, None)
    sel = (ss >= -M) & (ss <= M)
    per_s = traj.grid.integrate(dens[sel])
    wi = float(np.trapezoid(per_s, ss[sel])) if sel.sum() > 1 else 0.0
    return EnergyReport(E, ss, dens, (-M, M), wi, window_constant(traj, M))


@dataclass
class MaxPrincipleReport:
    max_p2: float
    rho: float
    passed: bool
    nonincreasing: bool


def max_principle_check(traj: FlowTrajectory, rho: float | None = None, tol: float = 1e-6) -> MaxPrincipleReport:
    rho = traj.spec.rho if rho is None else rho
    if rho is None:
        raise ValueError("no cutoff radius given")
    m = float(traj.max_p2.max())
    mono = bool(np.all(np.diff(traj.max_p2) <= tol))
    return MaxPrincipleReport(m, rho, m <= rho + tol, mono)


@dataclass
class DensityConstants:
    """Constant chain of the density inequality (d_s^2 + Laplacian) e >= -c (1 + e^{3/2}).

    sigma bounds the Hessian of H~ (1 from 1/2 |p|^2 plus c2 of F~), tau its
    third derivatives, b1/b2 bound beta' and beta''. The terms

        A  = 3/2 sigma^2 + b2 c1 + 2 sqrt(3) b1 c2     (coefficient of e)
        B  = 2 sqrt(6) tau                              (coefficient of e^{3/2})
        C0 = b2 c1 / 2                                  (constant term)

    give (d_s^2 + Laplacian) e >= -(C0 + A e + B e^{3/2}); Young with exponents
    (3, 3/2) turns A e into A/3 + 2A/3 e^{3/2}, so c = max(C0 + A/3, 2A/3 + B).
    """

    sigma: float
    tau: float
    c1: float
    b1: float
    b2: float
    A: float
    B: float
    C0: float
    c: float

    @classmethod
    def from_trajectory(cls, traj: FlowTrajectory) -> "DensityConstants":
        bd = traj.spec.effective.bounds()
        sigma, tau, c1, c2 = 1.0 + bd.c2, bd.c3, bd.c1, bd.c2
        b1, b2 = traj.profile.derivative_bounds() if traj.profile is not None else (0.0, 0.0)
        A = 1.5 * sigma**2 + b2 * c1 + 2 * np.sqrt(3) * b1 * c2
        B = 2 * np.sqrt(6) * tau
        C0 = 0.5 * b2 * c1
        return cls(sigma, tau, c1, b1, b2, A, B, C0, max(C0 + A / 3, 2 * A / 3 + B))


@dataclass
class DensityReport:
    constants: DensityConstants
    min_slack: float
    worst_s: float
    passed: bool


def density_inequality_check(traj: FlowTrajectory, tol: float = 1e-6) -> DensityReport:
    """Evaluate lhs - rhs at interior snapshots; d_s^2 by the three-point nonuniform stencil."""
    if len(traj.snapshots) < 3:
        raise ValueError("insufficient s-resolution: need at least three snapshots to form ds^2")
    k = DensityConstants.from_trajectory(traj)
    ss = np.array([s for s, _ in traj.snapshots])
    dens = np.stack([energy_density(traj, s, x) for s, x in traj.snapshots])
    hm, hp = ss[1:-1] - ss[:-2], ss[2:] - ss[1:-1]
    if np.any(hm <= 0) or np.any(hp <= 0):
        raise ValueError("insufficient s-resolution: snapshots not strictly increasing")
    e0 = dens[1:-1]
    dss = 2 * ((dens[2:] - e0) / hp[:, None, None] - (e0 - dens[:-2]) / hm[:, None, None]) \
        / (hp + hm)[:, None, None]
    lhs = dss + laplacian_array(e0, traj.grid)
    slack = lhs + k.c * (1 + e0**1.5)
    i = np.unravel_index(np.argmin(slack), slack.shape)
    ms = float(slack[i])
    return DensityReport(k, ms, float(ss[1 + i[0]]), ms >= -tol)
