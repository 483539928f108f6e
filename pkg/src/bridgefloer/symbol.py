"""Fourier symbol of the linearized Floer operator D = 1/2 d_s + slashed_del - 1/2 P.

On the space-time mode ``exp(i xi s + i m1 t1 + i m2 t2)`` acting on the slot
vector ``(q, qbar, p, pbar)``, ``D`` is the 4x4 matrix returned by :func:`symbol`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import HamiltonianSpec, real_gradient, real_hessian
from .spectral import PhaseField, TorusGrid, bridges_op_array, forward, inverse

P_MATRIX = np.diag([0.0, 0.0, 1.0, 1.0]).astype(complex)
SLOT_SWAP = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
# real components x = (q1, q2, p1, p2) as a linear map of slots (q, qbar, p, pbar)
SLOTS_TO_REAL = np.array([
    [0.5, 0.5, 0, 0],
    [-0.5j, 0.5j, 0, 0],
    [0, 0, 0.5, 0.5],
    [0, 0, -0.5j, 0.5j],
])


@dataclass(frozen=True, eq=False)
class SymbolMatrix:
    xi: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    entries: np.ndarray = field(repr=False)

    def det(self) -> np.ndarray:
        return np.linalg.det(self.entries)

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvals(self.entries)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("...ij,...j->...i", self.entries, v)


def symbol(xi, m1, m2) -> SymbolMatrix:
    xi, m1, m2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (xi, m1, m2)))
    D = np.zeros(xi.shape + (4, 4), dtype=complex)
    D[..., 0, 3] = -1j * m1 + m2
    D[..., 1, 2] = -1j * m1 - m2
    D[..., 2, 1] = 1j * m1 - m2
    D[..., 3, 0] = 1j * m1 + m2
    D *= 0.5
    D += 0.5j * xi[..., None, None] * np.eye(4) - 0.5 * P_MATRIX
    return SymbolMatrix(xi, m1, m2, D)


def symbol_det(xi, m1, m2):
    """Closed form (m1^2 + m2^2 + xi^2 + i xi)^2 / 16."""
    xi, m1, m2 = (np.asarray(a, dtype=float) for a in (xi, m1, m2))
    return (m1**2 + m2**2 + xi**2 + 1j * xi) ** 2 / 16.0


def symbol_eigs(xi, m1, m2):
    """Closed-form (lambda_plus, lambda_minus), each of multiplicity two."""
    xi, m1, m2 = (np.asarray(a, dtype=float) for a in (xi, m1, m2))
    root = np.sqrt(1.0 + 4.0 * m1**2 + 4.0 * m2**2)
    lam_plus = 0.25j * (1j + 2.0 * xi + 1j * root)
    lam_minus = 0.25j * (1j + 2.0 * xi - 1j * root)
    return lam_plus, lam_minus


def eigen_lower_bound(xi, m1, m2):
    xi, m1, m2 = (np.asarray(a, dtype=float) for a in (xi, m1, m2))
    return 0.25 * xi**2 + 0.125 * m1**2 + 0.125 * m2**2


def match_eigenvalues(numeric: np.ndarray, lam_plus, lam_minus):
    """Pair numerical eigenvalues (..., 4) with the closed-form pair by minimal distance.

    Returns ``(max_abs_error, multiplicity_ok)`` per point.
    """
    lp = np.asarray(lam_plus)[..., None]
    lm = np.asarray(lam_minus)[..., None]
    dp = np.abs(numeric - lp)
    dm = np.abs(numeric - lm)
    to_plus = dp <= dm
    err = np.where(to_plus, dp, dm).max(axis=-1)
    return err, to_plus.sum(axis=-1) == 2


@dataclass
class OracleReport:
    points: int
    det_err: float
    eig_err: float
    multiplicity_ok: bool
    zero_det_only_at_origin: bool


def oracle_check(max_m: int = 32, xi=None) -> OracleReport:
    """Closed-form determinant/eigenvalues against direct 4x4 numerics on a lattice.

    The determinant error is measured on entries normalized by ``max(1, max|D|)``.
    """
    if xi is None:
        xi = np.round(np.arange(-100, 101) * 0.1, 12)
    xi = np.asarray(xi, dtype=float)
    ms = np.arange(-max_m, max_m + 1)
    det_err = eig_err = 0.0
    mult_ok = True
    zero_ok = True
    for m1 in ms:
        X, M2 = np.meshgrid(xi, ms, indexing="ij")
        M1 = np.full_like(X, m1)
        S = symbol(X, M1, M2)
        scale = np.maximum(1.0, np.abs(S.entries).max(axis=(-2, -1)))
        direct = np.linalg.det(S.entries / scale[..., None, None])
        closed = symbol_det(X, M1, M2) / scale**4
        det_err = max(det_err, float(np.abs(direct - closed).max()))
        lp, lm = symbol_eigs(X, M1, M2)
        err, ok = match_eigenvalues(S.eigvals(), lp, lm)
        eig_err = max(eig_err, float(err.max()))
        mult_ok &= bool(ok.all())
        origin = (X == 0) & (M1 == 0) & (M2 == 0)
        singular = np.abs(symbol_det(X, M1, M2)) == 0
        zero_ok &= bool(np.array_equal(singular, origin))
    return OracleReport(len(xi) * len(ms) ** 2, det_err, eig_err, mult_ok, zero_ok)


@dataclass
class ScanReport:
    N: int | None
    max_m: int
    xi: np.ndarray
    k2_violations: list[int]
    margins: np.ndarray  # min over xi of min|lambda|^2 - bound, indexed [m1 + max_m, m2 + max_m]
    failed: bool

    def margin_at(self, m1: int, m2: int) -> float:
        return float(self.margins[m1 + self.max_m, m2 + self.max_m])

    def rays_monotone(self) -> bool:
        """Margins increase with |m1| along every line m2 = const, beyond N."""
        if self.N is None:
            return False
        ms = np.arange(-self.max_m, self.max_m + 1)
        for j, m2 in enumerate(ms):
            for sign in (1, -1):
                m1 = np.arange(0, self.max_m + 1)
                keep = m1**2 + m2**2 > self.N
                vals = self.margins[sign * m1[keep] + self.max_m, j]
                if np.any(np.diff(vals) <= 0):
                    return False
        return True


def scan_margins(xi, m1, m2):
    lp, lm = symbol_eigs(xi, m1, m2)
    bound = eigen_lower_bound(xi, m1, m2)
    a, b = np.abs(lp) ** 2, np.abs(lm) ** 2
    return a, b, bound, np.minimum(a, b) - bound


def invertibility_scan(max_m: int = 32, xi=None, rtol: float = 1e-12) -> ScanReport:
    """Smallest N with |lambda_pm|^2 >= xi^2/4 + (m1^2 + m2^2)/8 whenever m1^2 + m2^2 > N.

    Margins below ``-rtol * (1 + bound)`` count as violations; the bound is attained
    with equality at m1^2 + m2^2 = 2.
    """
    if max_m < 4:
        raise ValueError("max_m must be at least 4")
    if xi is None:
        xi = np.round(np.arange(-1000, 1001) * 0.01, 12)
    xi = np.asarray(xi, dtype=float)
    ms = np.arange(-max_m, max_m + 1)
    M1, M2 = np.meshgrid(ms, ms, indexing="ij")
    margins = np.full(M1.shape, np.inf)
    violated = np.zeros(M1.shape, dtype=bool)
    for x in xi:
        _, _, bound, margin = scan_margins(x, M1, M2)
        margins = np.minimum(margins, margin)
        violated |= margin < -rtol * (1.0 + bound)
    k2 = M1**2 + M2**2
    bad = sorted({int(v) for v in k2[violated]})
    N = max(bad) if bad else 0
    failed = bool(bad) and N >= k2.max()
    return ScanReport(None if failed else N, max_m, xi, bad, margins, failed)


def write_scan_csv(path, max_m: int, xi, full: bool = False) -> int:
    """Write scan rows; with ``full=False`` only the minimal-margin xi per lattice point.

    ``lam_plus`` / ``lam_minus`` columns hold |lambda_pm|^2.
    """
    xi = np.asarray(xi, dtype=float)
    ms = np.arange(-max_m, max_m + 1)
    rows = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["xi", "m1", "m2", "det_re", "det_im", "lam_plus", "lam_minus", "bound", "margin"])
        for m1 in ms:
            X, M2 = np.meshgrid(xi, ms, indexing="ij")
            M1 = np.full_like(X, m1)
            a, b, bound, margin = scan_margins(X, M1, M2)
            det = symbol_det(X, M1, M2)
            if full:
                sel = np.ones(X.shape, dtype=bool)
            else:
                sel = np.zeros(X.shape, dtype=bool)
                sel[np.argmin(margin, axis=0), np.arange(len(ms))] = True
            for i, j in zip(*np.nonzero(sel)):
                w.writerow([f"{X[i, j]:.6g}", int(m1), int(M2[i, j]), f"{det[i, j].real:.17g}",
                            f"{det[i, j].imag:.17g}", f"{a[i, j]:.17g}", f"{b[i, j]:.17g}",
                            f"{bound[i, j]:.17g}", f"{margin[i, j]:.17g}"])
                rows += 1
    return rows


def field_slots_coeffs(Z: PhaseField) -> np.ndarray:
    """Fourier coefficients of the four slots, shape (4, d, n1, n2)."""
    return forward(np.stack(Z.slots()))


def apply_symbol(Z: PhaseField, xi: float = 0.0) -> PhaseField:
    """Apply D^(xi, m) mode by mode to the slots of a field (Nyquist wavenumbers zeroed)."""
    m1, m2 = Z.grid.derivative_modes
    S = symbol(xi, m1, m2)
    out = inverse(np.einsum("abij,jkab->ikab", S.entries, field_slots_coeffs(Z)))
    return PhaseField.from_complex(Z.grid, out[0], out[2])


def wirtinger_hessian(hr: np.ndarray, d: int) -> np.ndarray:
    """Slot Hessian A^T Hr A from a real Hessian of shape (4d, 4d, ...)."""
    A = np.kron(SLOTS_TO_REAL, np.eye(d))
    return np.einsum("ki,kl...,lj->ij...", A, hr, A)


def S_Z(spec: HamiltonianSpec, Z: PhaseField) -> np.ndarray:
    """Pointwise slot matrix swap . Hess F~ at Z, shape (4d, 4d, n1, n2)."""
    d = Z.grid.d
    hr = spec.effective.hess(Z.x, spec._t(Z)).reshape((4 * d, 4 * d) + Z.grid.shape)
    return np.einsum("ij,jk...->ik...", np.kron(SLOT_SWAP, np.eye(d)), wirtinger_hessian(hr, d))


@dataclass
class LinearizedOperator:
    """(dF^r)_Z = D - beta_r(s) S_Z along a sampled window of a trajectory."""

    spec: HamiltonianSpec
    s: np.ndarray
    Z: np.ndarray  # (ns, 4, d, n1, n2) real components
    grid: TorusGrid
    beta: object  # callable s -> beta_r(s)

    @property
    def ds(self) -> float:
        return float(self.s[1] - self.s[0])


def floer_map(spec: HamiltonianSpec, s, Zs: np.ndarray, grid: TorusGrid, beta) -> np.ndarray:
    """1/2 d_s Z + slashed_del Z - grad_c H^{rho,r}(Z) in slot storage on a window."""
    ds = float(s[1] - s[0])
    out = np.gradient(Zs, ds, axis=0, edge_order=2)
    for n, sn in enumerate(s):
        Z = PhaseField(grid, Zs[n])
        out[n] += bridges_op_array(Zs[n], grid) - real_gradient(spec, Z, beta(sn))
    return 0.5 * out


def apply_linearized(opr: LinearizedOperator, Y: np.ndarray) -> np.ndarray:
    """Windowed application of D - beta S_Z, returned in slot storage (real components)."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape != opr.Z.shape:
        raise ValueError(f"resolution mismatch: window {opr.Z.shape}, got {Y.shape}")
    d = opr.grid.d
    out = np.gradient(Y, opr.ds, axis=0, edge_order=2)
    for n, sn in enumerate(opr.s):
        Z = PhaseField(opr.grid, opr.Z[n])
        hr = real_hessian(opr.spec, Z, opr.beta(sn)).reshape((4 * d, 4 * d) + opr.grid.shape)
        hy = np.einsum("ij...,j...->i...", hr, Y[n].reshape((4 * d,) + opr.grid.shape))
        out[n] += bridges_op_array(Y[n], opr.grid) - hy.reshape(Y[n].shape)
    return 0.5 * out
