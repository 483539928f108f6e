import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bridgefloer.dump import read_log
from bridgefloer.flow import (DensityConstants, ETDStepper, FlowConfig, HomotopyProfile, beta,
                              density_inequality_check, energy, floer_rhs, linear_modes, linear_solution,
                              max_principle_check, run_flow, stable_projection, step, window_constant)
from bridgefloer.hamiltonian import HamiltonianSpec, grad_action, hofer_norm
from bridgefloer.nonlinearity import Cosine
from bridgefloer.spectral import PhaseField, TorusGrid, forward, inverse
from bridgefloer.symbol import symbol, symbol_eigs

from conftest import rand_phase

rs = st.floats(0.05, 3.0)


def homotopy_run(grid, eps=0.2, q0=(1.0, 2.0), r=1.0, **kw):
    spec = HamiltonianSpec(Cosine(eps), rho=4.0)
    cfg = FlowConfig(ds=0.01, s0=-1.0, s_max=30.0, snapshot_every=1, patience=50, **kw)
    return run_flow(spec, HomotopyProfile(r), PhaseField.constant(grid, *q0, 0.0, 0.0), cfg)


@pytest.fixture(scope="module")
def traj():
    return homotopy_run(TorusGrid(8, 8))


# ---------------------------------------------------------------- profile

@given(rs, st.integers(1, 3))
def test_profile_support_and_plateau(r, d):
    prof = HomotopyProfile(r, d)
    lo, hi = prof.support
    s = np.linspace(lo - 2, hi + 2, 2001)
    b = prof(s)
    assert np.all(b[(s <= lo) | (s >= hi)] == 0.0)
    plateau = (s >= 0) & (s <= (2 * d + 1) * r)
    assert np.allclose(b[plateau], min(r, 1.0))
    assert np.all((b >= 0) & (b <= min(r, 1.0) + 1e-15))


@given(rs)
def test_profile_is_c2(r):
    prof = HomotopyProfile(r)
    s = np.linspace(-1.5, prof.support[1] + 0.5, 4001)
    h = 1e-6
    assert np.allclose(prof(s, 1), (prof(s + h) - prof(s - h)) / (2 * h), atol=1e-6)
    # the third derivative jumps at the kinks, so the stencil error there is O(h * 60)
    assert np.allclose(prof(s, 2), (prof(s + h, 1) - prof(s - h, 1)) / (2 * h), atol=1e-4)
    b1, b2 = prof.derivative_bounds()
    assert np.abs(prof(s, 1)).max() <= b1 + 1e-12 and np.abs(prof(s, 2)).max() <= b2 + 1e-12


def test_profile_zero_radius_and_validation():
    assert beta(0.0, np.linspace(-2, 5, 50)).max() == 0.0
    with pytest.raises(ValueError):
        HomotopyProfile(-0.1)


# ---------------------------------------------------------------- rhs and linear part

def test_rhs_is_minus_action_gradient(grid, rng):
    spec = HamiltonianSpec(Cosine(0.3), rho=2.0)
    Z = rand_phase(grid, rng, amplitude=0.5)
    assert np.array_equal(floer_rhs(spec, None, 0.0, Z).x, -grad_action(spec, Z).x)
    # outside the profile support the nonlinearity is switched off
    free = floer_rhs(HamiltonianSpec(), None, 0.0, Z).x
    assert np.array_equal(floer_rhs(spec, HomotopyProfile(1.0), -2.0, Z).x, free)


@pytest.mark.parametrize("m", [(1, 0), (2, -1), (0, 3)])
def test_free_rhs_mode_action_is_symbol(m, grid):
    t1, t2 = grid.t
    e = np.exp(1j * (m[0] * t1 + m[1] * t2))
    a, b = 0.4 + 0.1j, -0.3 + 0.2j
    Z = PhaseField.from_complex(grid, a * e, b * e)
    out = forward(np.stack(floer_rhs(HamiltonianSpec(), None, 0.0, Z).slots()))[:, 0]
    i, j = m[0] % grid.n1, m[1] % grid.n2
    assert np.allclose(out[:, i, j], -2 * symbol(0, *m).entries @ np.array([a, 0, b, 0]), atol=1e-12)


@pytest.mark.parametrize("m", [(1, 0), (1, 1), (0, 2)])
def test_linear_step_factors_are_symbol_eigenvalues(m, grid):
    t1, t2 = grid.t
    e = np.exp(1j * (m[0] * t1 + m[1] * t2))
    Z0 = PhaseField.from_complex(grid, e, (0.3 - 0.1j) * e)
    ds = 0.05
    lp, lm = symbol_eigs(0, *m)
    Zm = stable_projection(Z0)
    Zp = Z0 - Zm
    out_m = step(HamiltonianSpec(), None, 0.0, Zm, ds)
    out_p = step(HamiltonianSpec(), None, 0.0, Zp, ds)
    assert np.abs(out_m.x - np.exp(-2 * lm.real * ds) * Zm.x).max() < 1e-8
    assert np.abs(out_p.x - np.exp(-2 * lp.real * ds) * Zp.x).max() < 1e-8


def test_linear_solution_matches_steps(rng):
    # small grid: FFT roundoff in the unstable subspace grows like exp(max mu_plus * s)
    Z0 = stable_projection(rand_phase(TorusGrid(8, 8), rng))
    Z = Z0
    for n in range(10):
        Z = step(HamiltonianSpec(), None, 0.1 * n, Z, 0.1)
    assert np.abs(Z.x - linear_solution(Z0, 1.0).x).max() < 1e-12


def test_projectors(grid):
    mu_p, mu_m, Pi_p, Pi_m = linear_modes(grid)
    assert np.allclose(Pi_p @ Pi_p, Pi_p, atol=1e-12)
    assert np.allclose(Pi_p @ Pi_m, 0.0, atol=1e-12)
    assert np.all(mu_p >= 1.0) and np.all(mu_m <= 0.0)


# ---------------------------------------------------------------- stepping

def test_signed_flow_is_second_order():
    g = TorusGrid(8, 8)
    rng = np.random.default_rng(1)
    Z = rand_phase(g, rng, max_mode=2, amplitude=0.5)
    spec = HamiltonianSpec(Cosine(0.5))

    def run(h, span=0.4):
        st = ETDStepper(spec, None, g, dealias=False, signed=True)
        u, s = forward(Z.x), 0.0
        for _ in range(int(round(span / h))):
            u = st.step(u, s, h)
            s += h
        return inverse(u).real

    a, b, c = run(0.04), run(0.02), run(0.01)
    ratio = np.abs(a - b).max() / np.abs(b - c).max()
    assert 3.5 < ratio < 4.5


@pytest.mark.parametrize("signed", [False, True])
def test_critical_constant_is_fixed(signed, grid):
    spec = HamiltonianSpec(Cosine(0.3), rho=4.0)
    Z = PhaseField.constant(grid, np.pi, 0.0, 0.0, 0.0)
    out = step(spec, HomotopyProfile(1.0), 0.5, Z, 0.1, signed=signed)
    assert np.abs(out.x - Z.x).max() < 1e-14


def test_stable_projection_run_converges(rng):
    g = TorusGrid(16, 16)
    # start on the stable subspace: the projection itself is a jump that can raise the action
    Z0 = stable_projection(rand_phase(g, rng, amplitude=0.5))
    cfg = FlowConfig(ds=0.05, s_max=80.0, tol=1e-9, patience=5, stable_projection=True)
    traj = run_flow(HamiltonianSpec(), None, Z0, cfg)
    assert traj.converged
    x = traj.final.x
    assert np.abs(x - x.mean(axis=(2, 3), keepdims=True)).max() < 1e-8
    assert np.all(np.diff(traj.max_p2) <= 1e-12)


def test_log_and_dumps(tmp_path):
    g = TorusGrid(8, 8)
    log = tmp_path / "run.jsonl"
    cfg = FlowConfig(ds=0.05, s_max=0.5, log_path=str(log), dump_every=5, dump_dir=str(tmp_path / "d"))
    traj = run_flow(HamiltonianSpec(Cosine(0.1)), None, PhaseField.constant(g, 1.0, 1.0, 0.0, 0.0), cfg)
    rows = read_log(log)
    assert len(rows) == len(traj.s)
    assert set(rows[0]) >= {"s", "action", "grad_norm", "max_p2", "energy_increment"}
    assert len(list((tmp_path / "d").glob("snapshot_*.bfsd"))) == 3
    # a rerun overwrites the log rather than appending
    run_flow(HamiltonianSpec(Cosine(0.1)), None, PhaseField.constant(g, 1.0, 1.0, 0.0, 0.0), cfg)
    assert len(read_log(log)) == len(rows)


# ---------------------------------------------------------------- diagnostics

def test_homotopy_run_converges(traj):
    assert traj.converged and traj.s[-1] >= traj.profile.support[1]
    assert traj.max_action_increase <= 1e-8


def test_energy_bounded_by_hofer_norm(traj):
    rep = energy(traj)
    assert 0 < rep.E <= 2 * hofer_norm(traj.spec, traj.grid)


def test_window_energy_bound(traj):
    rep = energy(traj, M=3.0)
    assert rep.window_bound_ok
    assert rep.C_K == pytest.approx(window_constant(traj, 3.0))


def test_max_principle(traj):
    rep = max_principle_check(traj)
    assert rep.passed and rep.nonincreasing


def test_density_inequality(traj):
    rep = density_inequality_check(traj)
    assert rep.passed and rep.min_slack > 0


def test_density_constants_chain(traj):
    k = DensityConstants.from_trajectory(traj)
    assert k.c == pytest.approx(max(k.C0 + k.A / 3, 2 * k.A / 3 + k.B))
    assert k.b1 == pytest.approx(15 / 8) and k.b2 == pytest.approx(10 / np.sqrt(3))


def test_density_needs_three_snapshots(grid):
    cfg = FlowConfig(ds=0.1, s_max=0.1, snapshot_every=1)
    traj = run_flow(HamiltonianSpec(), None, PhaseField.constant(grid, 0, 0, 0, 0), cfg)
    with pytest.raises(ValueError, match="insufficient s-resolution"):
        density_inequality_check(traj)


@settings(max_examples=5)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_constant_start_keeps_p_zero(q1, q2):
    traj = homotopy_run(TorusGrid(8, 8), eps=0.1, q0=(q1, q2), r=0.5)
    assert traj.converged and traj.max_p2.max() == 0.0
    # the action at the current beta(s) also moves with beta'; monotonicity holds per frozen-beta step
    assert traj.max_action_increase <= 1e-8 and traj.rejected == 0
