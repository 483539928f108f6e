"""Nonlinearities F_t(Z) in real coordinates, the cutoff chi_rho(|p|^2) and a small potential library.

Every nonlinearity works on real components ``x`` of shape ``(4, d, ...)`` ordered
``(q1, q2, p1, p2)`` and returns

* ``value``: shape ``(...)``
* ``grad``:  shape ``(4, d, ...)``
* ``hess``:  shape ``(4, d, 4, d, ...)``

``t`` is a pair ``(t1, t2)`` broadcastable against the trailing axes, or ``None``
for t-independent nonlinearities.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, inf, sqrt

import numpy as np

from .dump import read_field
from .spectral import forward

# max |S^(k)| on [0, 1] for the quintic smoothstep S = 6x^5 - 15x^4 + 10x^3
SMOOTHSTEP_DERIV_MAX = (1.0, 15.0 / 8.0, 10.0 / sqrt(3.0), 60.0)


def smoothstep(x, order: int = 0):
    """C^2 quintic step: 0 for x <= 0, 1 for x >= 1, and its first two derivatives."""
    x = np.clip(x, 0.0, 1.0)
    if order == 0:
        return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)
    if order == 1:
        return 30.0 * x**2 * (1.0 - x) ** 2
    if order == 2:
        return 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
    raise ValueError("order must be 0, 1 or 2")


@dataclass(frozen=True)
class CutoffProfile:
    """chi_rho: 1 on [0, rho-1], 0 on [rho, inf), quintic smoothstep in between."""

    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("cutoff radius rho must be positive")

    @property
    def start(self) -> float:
        return max(self.rho - 1.0, 0.0)

    @property
    def width(self) -> float:
        return self.rho - self.start

    def __call__(self, u, order: int = 0):
        s = (np.asarray(u, dtype=float) - self.start) / self.width
        val = smoothstep(s, order) / self.width**order
        return 1.0 - val if order == 0 else -val

    def derivative_bounds(self) -> tuple[float, ...]:
        return tuple(m / self.width**k for k, m in enumerate(SMOOTHSTEP_DERIV_MAX))


@dataclass(frozen=True)
class DerivativeBounds:
    """Sup-norm bounds of F and its first three Z-derivatives (operator norms)."""

    c0: float
    c1: float
    c2: float
    c3: float

    def __getitem__(self, k: int) -> float:
        return (self.c0, self.c1, self.c2, self.c3)[k]

    @property
    def finite(self) -> bool:
        return all(np.isfinite([self.c0, self.c1, self.c2, self.c3]))


class Nonlinearity:
    """Base class. Subclasses override ``value``, ``grad``, ``hess`` and ``bounds``."""

    potential = False  # depends on q only
    t_dependent = False
    name = "nonlinearity"

    def value(self, x, t=None):
        raise NotImplementedError

    def grad(self, x, t=None):
        raise NotImplementedError

    def hess(self, x, t=None):
        raise NotImplementedError

    def bounds(self) -> DerivativeBounds:
        return DerivativeBounds(inf, inf, inf, inf)

    def hess_q(self, q1, q2):
        """Hessian of a potential at a constant q in (q1, q2) coordinates, shape (2d, 2d)."""
        d = np.size(q1)
        x = np.zeros((4, d))
        x[0], x[1] = q1, q2
        h = self.hess(x)
        return h[:2, :, :2, :].reshape(2 * d, 2 * d)


class Zero(Nonlinearity):
    potential = True
    name = "zero"

    def value(self, x, t=None):
        return np.zeros(x.shape[2:])

    def grad(self, x, t=None):
        return np.zeros_like(x)

    def hess(self, x, t=None):
        return np.zeros((4, x.shape[1]) + x.shape[:2] + x.shape[2:])

    def bounds(self):
        return DerivativeBounds(0.0, 0.0, 0.0, 0.0)


class SeparablePotential(Nonlinearity):
    """V(q) = sum_k V1(q1_k) + V2(q2_k) given scalar derivative callbacks."""

    potential = True

    def _deriv(self, comp: int, u, order: int):
        raise NotImplementedError

    def value(self, x, t=None):
        return (self._deriv(0, x[0], 0) + self._deriv(1, x[1], 0)).sum(axis=0)

    def grad(self, x, t=None):
        g = np.zeros_like(x, dtype=float)
        g[0] = self._deriv(0, x[0], 1)
        g[1] = self._deriv(1, x[1], 1)
        return g

    def hess(self, x, t=None):
        d = x.shape[1]
        h = np.zeros((4, d, 4, d) + x.shape[2:])
        for c in (0, 1):
            dd = self._deriv(c, x[c], 2)
            for k in range(d):
                h[c, k, c, k] = dd[k]
        return h

    def third(self, comp: int, u):
        return self._deriv(comp, u, 3)


class Cosine(SeparablePotential):
    """V_i(q_i) = eps_i cos(q_i) on every channel."""

    name = "cosine"

    def __init__(self, eps1: float = 0.1, eps2: float | None = None, d: int = 1):
        self.eps = (float(eps1), float(eps1 if eps2 is None else eps2))
        self.d = d

    def _deriv(self, comp, u, order):
        e = self.eps[comp]
        return e * (np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v), np.sin)[order](u)

    def bounds(self):
        e1, e2 = map(abs, self.eps)
        m = max(e1, e2)
        return DerivativeBounds(self.d * (e1 + e2), sqrt(self.d * (e1**2 + e2**2)), m, m)

    def __repr__(self):
        return f"Cosine(eps={self.eps})"


class Polynomial(SeparablePotential):
    """V_i(q_i) = sum_j c_j q_i^j on the lift; not periodic, so no global bounds.

    Useful for exact non-constant solutions: ``V = a/2 |q|^2`` with ``a = |m|^2``
    is solved by the single mode ``q = exp(i m.t)``.
    """

    name = "polynomial"

    def __init__(self, coeffs, coeffs2=None):
        c1 = np.asarray(coeffs, dtype=float)
        c2 = c1 if coeffs2 is None else np.asarray(coeffs2, dtype=float)
        self.coeffs = (c1, c2)

    def _deriv(self, comp, u, order):
        c = np.polynomial.polynomial.polyder(self.coeffs[comp], order) if order else self.coeffs[comp]
        return np.polynomial.polynomial.polyval(u, c)

    def __repr__(self):
        return f"Polynomial({self.coeffs[0].tolist()}, {self.coeffs[1].tolist()})"


class SampledPotential(Nonlinearity):
    """d = 1 potential V(q1, q2) given by samples on a periodic grid over T^2.

    Evaluated by trigonometric interpolation, so all derivatives are analytic.
    """

    potential = True
    name = "custom-sampled"

    def __init__(self, samples: np.ndarray, tol: float = 1e-14):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 2 or samples.shape[0] % 2 or samples.shape[1] % 2:
            raise ValueError("sampled potential must be a 2-d array with even sizes")
        c = forward(samples)
        n1, n2 = samples.shape
        m1 = np.fft.fftfreq(n1, 1.0 / n1)
        m2 = np.fft.fftfreq(n2, 1.0 / n2)
        M1, M2 = np.meshgrid(m1, m2, indexing="ij")
        keep = (np.abs(c) > tol) & (np.abs(M1) < n1 // 2) & (np.abs(M2) < n2 // 2)
        self.c = c[keep]
        self.m = np.stack([M1[keep], M2[keep]])

    def _modes(self, q1, q2):
        phase = np.exp(1j * (np.multiply.outer(q1, self.m[0]) + np.multiply.outer(q2, self.m[1])))
        return phase * self.c

    def value(self, x, t=None):
        return self._modes(x[0], x[1]).sum(-1).real.sum(axis=0)

    def grad(self, x, t=None):
        e = self._modes(x[0], x[1])
        g = np.zeros_like(x, dtype=float)
        g[0] = (1j * self.m[0] * e).sum(-1).real
        g[1] = (1j * self.m[1] * e).sum(-1).real
        return g

    def hess(self, x, t=None):
        e = self._modes(x[0], x[1])
        d = x.shape[1]
        h = np.zeros((4, d, 4, d) + x.shape[2:])
        for a in (0, 1):
            for b in (0, 1):
                hab = (-(self.m[a] * self.m[b]) * e).sum(-1).real
                for k in range(d):
                    h[a, k, b, k] = hab[k]
        return h

    def bounds(self):
        a = np.abs(self.c)
        k = np.sqrt((self.m**2).sum(0))
        return DerivativeBounds(*(float((a * k**j).sum()) for j in range(4)))


class TimeModulated(Nonlinearity):
    """F_t(Z) = (1 + a cos(m1 t1 + m2 t2)) G(Z)."""

    t_dependent = True

    def __init__(self, base: Nonlinearity, amplitude: float, mode=(1, 0)):
        self.base = base
        self.amplitude = float(amplitude)
        self.mode = tuple(mode)
        self.potential = base.potential
        self.name = f"modulated-{base.name}"

    def _factor(self, t):
        if t is None:
            raise ValueError("t-dependent nonlinearity evaluated without t")
        return 1.0 + self.amplitude * np.cos(self.mode[0] * t[0] + self.mode[1] * t[1])

    def value(self, x, t=None):
        return self._factor(t) * self.base.value(x, t)

    def grad(self, x, t=None):
        return self._factor(t) * self.base.grad(x, t)

    def hess(self, x, t=None):
        return self._factor(t) * self.base.hess(x, t)

    def bounds(self):
        b = self.base.bounds()
        f = 1.0 + abs(self.amplitude)
        return DerivativeBounds(*(f * b[k] for k in range(4)))


class CutoffNonlinearity(Nonlinearity):
    """F~(Z) = chi_rho(|p|^2) F(Z), |p|^2 summed over channels."""

    def __init__(self, base: Nonlinearity, profile: CutoffProfile):
        self.base = base
        self.profile = profile
        self.potential = False
        self.t_dependent = base.t_dependent
        self.name = f"cutoff-{base.name}"

    def _u(self, x):
        return (x[2] ** 2 + x[3] ** 2).sum(axis=0)

    def value(self, x, t=None):
        return self.profile(self._u(x)) * self.base.value(x, t)

    def grad(self, x, t=None):
        u = self._u(x)
        chi, chi1 = self.profile(u), self.profile(u, 1)
        g = chi * self.base.grad(x, t)
        f = self.base.value(x, t)
        g[2:] += 2.0 * x[2:] * chi1 * f
        return g

    def hess(self, x, t=None):
        u = self._u(x)
        chi, chi1, chi2 = self.profile(u), self.profile(u, 1), self.profile(u, 2)
        f = self.base.value(x, t)
        gf = self.base.grad(x, t)
        h = chi * self.base.hess(x, t)
        # gradient of chi(|p|^2): 2 p chi'
        gc = np.zeros_like(x, dtype=float)
        gc[2:] = 2.0 * x[2:] * chi1
        h += np.einsum("ab...,cd...->abcd...", gc, gf) + np.einsum("ab...,cd...->abcd...", gf, gc)
        pp = np.zeros_like(x, dtype=float)
        pp[2:] = x[2:]
        h += 4.0 * chi2 * np.einsum("ab...,cd...->abcd...", pp, pp) * f
        d = x.shape[1]
        for a in (2, 3):
            for k in range(d):
                h[a, k, a, k] += 2.0 * chi1 * f
        return h

    def bounds(self):
        """Leibniz bounds using |p| <= sqrt(rho) wherever chi' != 0."""
        b = self.base.bounds()
        x0, x1, x2, x3 = self.profile.derivative_bounds()
        r = sqrt(self.profile.rho)
        g = (1.0, 2 * r * x1, 2 * x1 + 4 * r**2 * x2, 12 * r * x2 + 8 * r**3 * x3)
        return DerivativeBounds(*(sum(comb(k, j) * g[j] * b[k - j] for j in range(k + 1)) for k in range(4)))


def make_potential(name: str, d: int = 1, **params) -> Nonlinearity:
    """Library lookup used by scenario configs."""
    if name == "zero":
        return Zero()
    if name == "cosine":
        return Cosine(params.get("eps1", params.get("eps", 0.1)), params.get("eps2"), d=d)
    if name == "polynomial":
        return Polynomial(params["coeffs"], params.get("coeffs2"))
    if name == "custom-sampled":
        header, values = read_field(params["path"])
        return SampledPotential(np.real(values[0]))
    raise KeyError(f"unknown potential {name!r}")
