import csv

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from bridgefloer.flow import HomotopyProfile
from bridgefloer.hamiltonian import HamiltonianSpec, grad_H, real_gradient
from bridgefloer.nonlinearity import Cosine, CutoffNonlinearity, CutoffProfile
from bridgefloer.spectral import PhaseField, TorusGrid, forward, slashed_del
from bridgefloer.symbol import (P_MATRIX, LinearizedOperator, S_Z, apply_linearized, apply_symbol,
                                eigen_lower_bound, floer_map, invertibility_scan, match_eigenvalues, oracle_check,
                                symbol, symbol_det, symbol_eigs, write_scan_csv)

from conftest import rand_phase

ints = st.integers(-40, 40)
xis = st.floats(-20, 20, allow_nan=False)


def sympy_symbol():
    xi, m1, m2 = sp.symbols("xi m1 m2", real=True)
    I = sp.I
    pattern = sp.Matrix([[0, 0, 0, -I * m1 + m2], [0, 0, -I * m1 - m2, 0],
                         [0, I * m1 - m2, 0, 0], [I * m1 + m2, 0, 0, 0]])
    D = I * xi / 2 * sp.eye(4) + pattern / 2 - sp.diag(0, 0, 1, 1) / 2
    return (xi, m1, m2), D


def test_symbol_examples():
    assert np.allclose(symbol(0, 0, 0).entries, np.diag([0, 0, -0.5, -0.5]))
    assert np.allclose(symbol(1, 0, 0).entries, 0.5j * np.eye(4) - 0.5 * P_MATRIX)
    assert symbol_det(0, 0, 0) == 0
    assert symbol_det(1, 0, 0) == pytest.approx(1j / 8)
    assert symbol_det(0, 1, 0) == pytest.approx(1 / 16)
    lp, lm = symbol_eigs(0, 0, 0)
    assert lp == pytest.approx(-0.5) and lm == pytest.approx(0.0)
    lp, lm = symbol_eigs(0, 1, 0)
    assert lp == pytest.approx(-0.25 * (1 + np.sqrt(5)))
    assert lm == pytest.approx(-0.25 * (1 - np.sqrt(5)))


def test_determinant_symbolically():
    (xi, m1, m2), D = sympy_symbol()
    closed = (m1**2 + m2**2 + xi**2 + sp.I * xi) ** 2 / 16
    assert sp.simplify(sp.expand(D.det() - closed)) == 0


def test_eigenvalues_symbolically():
    (xi, m1, m2), D = sympy_symbol()
    root = sp.sqrt(1 + 4 * m1**2 + 4 * m2**2)
    for lam in (sp.I / 4 * (sp.I + 2 * xi + sp.I * root), sp.I / 4 * (sp.I + 2 * xi - sp.I * root)):
        M = D - lam * sp.eye(4)
        # multiplicity two: rank drops by two
        num = M.subs({xi: sp.Rational(3, 7), m1: 2, m2: -3})
        assert num.rank(simplify=True) == 2
        assert sp.simplify(M.det()) == 0


@given(xis, ints, ints)
def test_closed_forms_match_numerics(xi, m1, m2):
    S = symbol(xi, m1, m2)
    scale = max(1.0, np.abs(S.entries).max())
    assert abs(np.linalg.det(S.entries / scale) - symbol_det(xi, m1, m2) / scale**4) < 1e-12
    err, ok = match_eigenvalues(S.eigvals(), *symbol_eigs(xi, m1, m2))
    assert err < 1e-10 * scale and ok


@given(xis, ints, ints)
def test_eigs_product_is_det(xi, m1, m2):
    lp, lm = symbol_eigs(xi, m1, m2)
    assert lp**2 * lm**2 == pytest.approx(symbol_det(xi, m1, m2), rel=1e-9, abs=1e-12)


def test_oracle_small_lattice():
    rep = oracle_check(max_m=6)
    assert rep.det_err < 1e-12 and rep.eig_err < 1e-10
    assert rep.multiplicity_ok and rep.zero_det_only_at_origin


def test_small_mode_violation():
    _, lm = symbol_eigs(0, 1, 0)
    assert abs(lm) ** 2 == pytest.approx(((np.sqrt(5) - 1) / 4) ** 2)
    assert abs(lm) ** 2 < eigen_lower_bound(0, 1, 0) == 0.125


def test_bound_equality_at_k2_two():
    # with xi = 0: |lambda_-|^2 = (sqrt(1+4k^2) - 1)^2 / 16 = k^2/8 exactly when k^2 = 2
    _, lm = symbol_eigs(0, 1, 1)
    assert abs(lm) ** 2 == pytest.approx(eigen_lower_bound(0, 1, 1), rel=1e-14)


def test_invertibility_scan():
    rep = invertibility_scan(max_m=8, xi=np.linspace(-3, 3, 61))
    assert rep.N == 1 and rep.k2_violations == [1] and not rep.failed
    assert rep.margin_at(1, 0) < 0 and rep.margin_at(3, 0) > 0
    assert rep.rays_monotone()


def test_scan_rejects_small_lattice():
    with pytest.raises(ValueError):
        invertibility_scan(max_m=3)


def test_scan_csv(tmp_path):
    path = tmp_path / "scan.csv"
    n = write_scan_csv(path, 4, np.linspace(-1, 1, 5))
    rows = list(csv.DictReader(open(path)))
    assert n == len(rows) == 81
    assert list(rows[0]) == ["xi", "m1", "m2", "det_re", "det_im", "lam_plus", "lam_minus", "bound", "margin"]
    r = next(r for r in rows if (r["m1"], r["m2"]) == ("1", "0"))
    assert float(r["margin"]) < 0
    assert write_scan_csv(path, 4, np.linspace(-1, 1, 5), full=True) == 81 * 5


@pytest.mark.parametrize("m", [(1, 0), (0, 1), (2, -3), (-1, 1)])
def test_symbol_acts_on_pure_mode(m, grid):
    t1, t2 = grid.t
    e = np.exp(1j * (m[0] * t1 + m[1] * t2))
    a, b = 0.3 - 0.2j, -0.7 + 0.4j
    Z = PhaseField.from_complex(grid, a * e, b * e)
    out = forward(np.stack((slashed_del(Z) - grad_H(HamiltonianSpec(), Z)).slots()))[:, 0]
    i, j = m[0] % grid.n1, m[1] % grid.n2
    v = np.array([a, 0, b, 0])
    assert np.allclose(out[:, i, j], symbol(0, *m).entries @ v, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_apply_symbol_matches_operator(seed):
    g = TorusGrid(16, 16)
    Z = rand_phase(g, np.random.default_rng(seed))
    direct = slashed_del(Z) - grad_H(HamiltonianSpec(), Z)
    assert np.abs(apply_symbol(Z).x - direct.x).max() < 1e-12


def test_S_Z_matches_gradient_differences(grid, rng):
    spec = HamiltonianSpec(Cosine(0.3, 0.2), rho=2.0)
    Z = rand_phase(grid, rng, amplitude=0.5)
    Y = rand_phase(grid, rng, amplitude=0.5)
    h = 1e-6
    # grad_H slots are (dH/dqbar, dH/dq, dH/dpbar, dH/dp): already the swapped Wirtinger gradient
    fd = (np.stack(grad_H(spec, Z + h * Y).slots()) - np.stack(grad_H(spec, Z - h * Y).slots())) / (2 * h)
    ys = np.stack(Y.slots())
    fd[2:] -= 0.5 * ys[2:]  # kinetic part 1/2 |p|^2
    Sy = np.einsum("ij...,j...->i...", S_Z(spec, Z), ys[:, 0])
    assert np.abs(Sy - fd[:, 0]).max() < 1e-6


def window(grid, rng, ns=7, s0=-0.5):
    s = s0 + 0.05 * np.arange(ns)
    return s, np.stack([rand_phase(grid, rng, amplitude=0.4).x for _ in s])


def test_apply_linearized_matches_fd(rng):
    g = TorusGrid(16, 16)
    spec = HamiltonianSpec(CutoffNonlinearity(Cosine(0.3), CutoffProfile(2.0)))
    beta = HomotopyProfile(0.5)
    s, Zs = window(g, rng)
    _, Ys = window(g, rng)
    opr = LinearizedOperator(spec, s, Zs, g, beta)
    h = 1e-6
    fd = (floer_map(spec, s, Zs + h * Ys, g, beta) - floer_map(spec, s, Zs - h * Ys, g, beta)) / (2 * h)
    assert np.abs(apply_linearized(opr, Ys) - fd).max() < 1e-6


def test_linearized_reduces_to_D_outside_support(rng):
    g = TorusGrid(16, 16)
    spec = HamiltonianSpec(Cosine(0.4), rho=2.0)
    s, Zs = window(g, rng, s0=-3.0)
    _, Ys = window(g, rng, s0=-3.0)
    beta = HomotopyProfile(1.0)
    full = apply_linearized(LinearizedOperator(spec, s, Zs, g, beta), Ys)
    free = apply_linearized(LinearizedOperator(HamiltonianSpec(), s, Zs, g, beta), Ys)
    assert np.array_equal(full, free)


def test_apply_linearized_resolution_mismatch(rng):
    g = TorusGrid(16, 16)
    s, Zs = window(g, rng)
    opr = LinearizedOperator(HamiltonianSpec(), s, Zs, g, HomotopyProfile(1.0))
    with pytest.raises(ValueError):
        apply_linearized(opr, Zs[:-1])


def test_real_gradient_used_by_floer_map_is_kinetic_for_zero(rng):
    g = TorusGrid(8, 8)
    Z = rand_phase(g, rng)
    assert np.array_equal(real_gradient(HamiltonianSpec(), Z)[2:], Z.x[2:])
