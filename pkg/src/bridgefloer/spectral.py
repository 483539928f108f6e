"""Fourier-grid fields on the torus T^2 = (R / 2piZ)^2 and exact spectral operators.

Conventions
-----------
* Grid points ``t_j = 2*pi*k / n_j``; arrays are indexed ``[..., k1, k2]`` with
  ``t1`` along the second-to-last axis.
* Forward transform divides by ``n1*n2`` so coefficients are Fourier-series
  coefficients ``f(t) = sum_m c_m exp(i m.t)``.
* Every derivative zeroes the Nyquist row/column (``|m_j| = n_j/2``).
* Volume form ``dV = dt1 dt2``; total volume ``(2 pi)^2``.

A :class:`PhaseField` stores ``Z`` through its real components
``x = (q1, q2, p1, p2)`` with shape ``(4, d, n1, n2)``. The complex slots are
``(q, qbar, p, pbar)`` with ``q = q1 + i q2``.  The same container is used for
covector-type quantities (gradients, residuals): their slot view is read off
the stored components in the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft as sp_fft

TWO_PI = 2.0 * np.pi
VOLUME = TWO_PI**2


@dataclass(frozen=True)
class TorusGrid:
    n1: int = 64
    n2: int = 64
    d: int = 1

    def __post_init__(self):
        for n in (self.n1, self.n2):
            if n < 8 or n % 2:
                raise ValueError(f"grid sizes must be even and >= 8, got {self.n1}x{self.n2}")
        if self.d < 1:
            raise ValueError("target half-dimension d must be >= 1")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def cell_area(self) -> float:
        return VOLUME / (self.n1 * self.n2)

    @cached_property
    def t(self) -> tuple[np.ndarray, np.ndarray]:
        t1 = TWO_PI * np.arange(self.n1) / self.n1
        t2 = TWO_PI * np.arange(self.n2) / self.n2
        return np.meshgrid(t1, t2, indexing="ij")

    @cached_property
    def modes(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer wavenumbers (m1, m2) in FFT order, broadcast to the grid."""
        m1 = np.fft.fftfreq(self.n1, 1.0 / self.n1)
        m2 = np.fft.fftfreq(self.n2, 1.0 / self.n2)
        return np.meshgrid(m1, m2, indexing="ij")

    @cached_property
    def nyquist(self) -> np.ndarray:
        m1, m2 = self.modes
        return (np.abs(m1) == self.n1 // 2) | (np.abs(m2) == self.n2 // 2)

    @cached_property
    def derivative_modes(self) -> tuple[np.ndarray, np.ndarray]:
        """Wavenumbers with the Nyquist row/column zeroed (used by every derivative)."""
        m1, m2 = self.modes
        keep = ~self.nyquist
        return m1 * keep, m2 * keep

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        m1, m2 = self.modes
        return (np.abs(m1) <= self.n1 // 3) & (np.abs(m2) <= self.n2 // 3)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Rectangle-rule quadrature over the last two axes (spectrally exact)."""
        return values.sum(axis=(-2, -1)) * self.cell_area


def forward(values: np.ndarray) -> np.ndarray:
    n1, n2 = values.shape[-2:]
    return sp_fft.fft2(values) / (n1 * n2)


def inverse(coeffs: np.ndarray) -> np.ndarray:
    n1, n2 = coeffs.shape[-2:]
    return sp_fft.ifft2(coeffs) * (n1 * n2)


def _real_derivative(values: np.ndarray, mult: np.ndarray) -> np.ndarray:
    out = inverse(forward(values) * mult)
    return out.real if np.isrealobj(values) else out


def d1(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    m1, _ = grid.derivative_modes
    return _real_derivative(values, 1j * m1)


def d2(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    _, m2 = grid.derivative_modes
    return _real_derivative(values, 1j * m2)


def dt_array(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """d_t = (d1 - i d2)/2; multiplier (i m1 + m2)/2."""
    m1, m2 = grid.derivative_modes
    return inverse(forward(values) * (0.5 * (1j * m1 + m2)))


def dtbar_array(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """d_tbar = (d1 + i d2)/2; multiplier (i m1 - m2)/2."""
    m1, m2 = grid.derivative_modes
    return inverse(forward(values) * (0.5 * (1j * m1 - m2)))


def laplacian_array(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    m1, m2 = grid.derivative_modes
    return _real_derivative(values, -(m1**2 + m2**2))


def dealias(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """2/3-rule truncation."""
    return _real_derivative(values, grid.dealias_mask.astype(float))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Samples of a C^c-valued map on the torus; coefficients computed lazily."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 2:
            v = v[None]
        if v.shape[-2:] != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_coeffs(cls, grid: TorusGrid, coeffs: np.ndarray, real: bool = False) -> "SpectralField":
        vals = inverse(np.asarray(coeffs))
        return cls(grid, vals.real if real else vals)

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "SpectralField":
        t1, t2 = grid.t
        return cls(grid, fn(t1, t2))

    @cached_property
    def coeffs(self) -> np.ndarray:
        return forward(self.values)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2).sum()))

    def coeff_norm(self) -> float:
        """l2 norm of coefficients, scaled so it equals :meth:`l2_norm` (Parseval)."""
        return float(np.sqrt(VOLUME * (np.abs(self.coeffs) ** 2).sum()))

    def centered_coeffs(self) -> np.ndarray:
        return np.fft.fftshift(self.coeffs, axes=(-2, -1))

    def conj(self) -> "SpectralField":
        return SpectralField(self.grid, np.conj(self.values))

    def __add__(self, other):
        return SpectralField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return SpectralField(self.grid, self.values - _vals(other))

    def __mul__(self, c):
        return SpectralField(self.grid, self.values * _vals(c))

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, SpectralField) else x


def d_t(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, dt_array(f.values, f.grid))


def d_tbar(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, dtbar_array(f.values, f.grid))


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, laplacian_array(f.values, f.grid))


@dataclass(frozen=True, eq=False)
class PhaseField:
    """Z = (q, qbar, p, pbar) on the torus, stored as real lifts (q1, q2, p1, p2)."""

    grid: TorusGrid
    x: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        expected = (4, self.grid.d) + self.grid.shape
        if x.shape != expected:
            raise ValueError(f"phase field must have shape {expected}, got {x.shape}")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @classmethod
    def from_complex(cls, grid: TorusGrid, q, p) -> "PhaseField":
        q = np.broadcast_to(np.asarray(q, dtype=complex), (grid.d,) + grid.shape)
        p = np.broadcast_to(np.asarray(p, dtype=complex), (grid.d,) + grid.shape)
        return cls(grid, np.stack([q.real, q.imag, p.real, p.imag]))

    @classmethod
    def constant(cls, grid: TorusGrid, q1, q2, p1=0.0, p2=0.0) -> "PhaseField":
        comps = [np.broadcast_to(np.asarray(c, dtype=float).reshape(-1, 1, 1), (grid.d,) + grid.shape)
                 for c in (q1, q2, p1, p2)]
        return cls(grid, np.stack(comps))

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "PhaseField":
        return cls(grid, np.zeros((4, grid.d) + grid.shape))

    @property
    def q(self) -> np.ndarray:
        return self.x[0] + 1j * self.x[1]

    @property
    def p(self) -> np.ndarray:
        return self.x[2] + 1j * self.x[3]

    def slots(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        q, p = self.q, self.p
        return q, np.conj(q), p, np.conj(p)

    def q_torus(self) -> np.ndarray:
        """Positions in T^{2d}: the lift wrapped to [0, 2 pi)."""
        return np.mod(self.x[:2], TWO_PI)

    def dot(self, other: "PhaseField") -> float:
        """Real L^2 pairing; equals 1/2 int (X_q Y_qbar + X_qbar Y_q + ...) dV."""
        return float(self.grid.integrate((self.x * other.x).sum(axis=(0, 1))))

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    def max_abs(self) -> float:
        return float(np.abs(self.x).max())

    def __add__(self, other: "PhaseField") -> "PhaseField":
        return PhaseField(self.grid, self.x + other.x)

    def __sub__(self, other: "PhaseField") -> "PhaseField":
        return PhaseField(self.grid, self.x - other.x)

    def __mul__(self, c: float) -> "PhaseField":
        return PhaseField(self.grid, self.x * c)

    __rmul__ = __mul__

    def __neg__(self) -> "PhaseField":
        return PhaseField(self.grid, -self.x)


def bridges_op_array(x: np.ndarray, grid: TorusGrid) -> np.ndarray:
    c = forward(x)
    m1, m2 = grid.derivative_modes
    i1, i2 = 1j * m1, 1j * m2
    q1, q2, p1, p2 = c
    out = np.stack([
        -i1 * p1 - i2 * p2,
        i1 * p2 - i2 * p1,
        i1 * q1 + i2 * q2,
        -i1 * q2 + i2 * q1,
    ])
    out = inverse(out)
    return out.real if np.isrealobj(x) else out


def bridges_op(Z: PhaseField) -> PhaseField:
    """J_d Z in gradient order (dH/dq1, dH/dq2, dH/dp1, dH/dp2).

    The p-slots carry the first two rows of Bridges' system, the q-slots the
    last two, so that ``J_d Z = grad H`` componentwise and ``J_d^2 = -Laplacian``.
    """
    return PhaseField(Z.grid, bridges_op_array(Z.x, Z.grid))


def slashed_del_slots(q, qbar, p, pbar, grid: TorusGrid):
    """The 4x4 first-order operator acting on four independent complex slots."""
    return (-dtbar_array(pbar, grid), -dt_array(p, grid), dtbar_array(qbar, grid), dt_array(q, grid))


def slashed_del(Z: PhaseField) -> PhaseField:
    """Slot view (-d_tbar pbar, -d_t p, d_tbar qbar, d_t q); equals bridges_op(Z)/2."""
    out_q, _, out_p, _ = slashed_del_slots(*Z.slots(), Z.grid)
    return PhaseField.from_complex(Z.grid, out_q, out_p)


def random_field(grid: TorusGrid, rng: np.random.Generator, max_mode: int | None = None,
                 amplitude: float = 1.0, components: int | None = None, decay: float = 1.0) -> np.ndarray:
    """Smooth random real samples with shape ``(components, ...)`` (default ``(4, d)``)."""
    shape = (4, grid.d) if components is None else (components,)
    m1, m2 = grid.modes
    k2 = m1**2 + m2**2
    coeffs = rng.standard_normal(shape + grid.shape) + 1j * rng.standard_normal(shape + grid.shape)
    coeffs *= (1.0 + k2) ** (-decay)
    if max_mode is not None:
        coeffs *= (np.abs(m1) <= max_mode) & (np.abs(m2) <= max_mode)
    coeffs *= ~grid.nyquist
    vals = inverse(coeffs).real
    scale = np.abs(vals).max()
    return amplitude * vals / (scale if scale > 0 else 1.0)
