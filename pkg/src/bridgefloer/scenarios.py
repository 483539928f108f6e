"""Named scenarios and the four pipelines behind the CLI.

Every pipeline returns a summary dict with a ``checks`` mapping
``name -> {"passed": bool, ...}`` and writes its tables and dumps to ``out``.
Summaries contain no timings so that reruns with the same seed are identical;
wall-clock times go to ``timing.json``.
"""

from __future__ import annotations

import copy
import csv
import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import legendre as lg
from .config import (FlowSection, GridSection, HamiltonianSection, HomotopySection, LegendreSection,
                     PotentialSection, ScenarioConfig, SearchSection, SymbolSection)
from .dump import write_field
from .flow import (FlowConfig, HomotopyProfile, density_inequality_check, energy, max_principle_check,
                   run_flow)
from .hamiltonian import HamiltonianSpec, hofer_norm, laplace_residual, residual_norm
from .nonlinearity import make_potential
from .search import SearchConfig, find_solutions, newton_polish
from .spectral import VOLUME, PhaseField, SpectralField, TorusGrid, random_field
from .symbol import invertibility_scan, oracle_check, write_scan_csv

SCENARIOS = {
    "cuplength-d1": ScenarioConfig(
        name="cuplength-d1", pipeline="solutions",
        grid=GridSection(64, 64, 1), potential=PotentialSection("cosine", {"eps": 0.1}),
        hamiltonian=HamiltonianSection(4.0), search=SearchSection()),
    "energy-bound": ScenarioConfig(
        name="energy-bound", pipeline="flow-diagnostics",
        grid=GridSection(16, 16, 1), potential=PotentialSection("cosine", {"eps": 0.1}),
        hamiltonian=HamiltonianSection(4.0), flow=FlowSection(), homotopy=HomotopySection()),
    "symbol-scan": ScenarioConfig(name="symbol-scan", pipeline="symbol-scan", symbol=SymbolSection()),
    "legendre-check": ScenarioConfig(
        name="legendre-check", pipeline="legendre-check", grid=GridSection(32, 32, 1),
        potential=PotentialSection("cosine", {"eps": 0.1}), legendre=LegendreSection()),
}
VERB_DEFAULTS = {"solve": "cuplength-d1", "flow-diag": "energy-bound", "symbol-scan": "symbol-scan",
                 "legendre-check": "legendre-check"}


def scenario(name: str) -> ScenarioConfig:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}")
    return copy.deepcopy(SCENARIOS[name])


def _grid(cfg: ScenarioConfig) -> TorusGrid:
    return TorusGrid(cfg.grid.n1, cfg.grid.n2, cfg.grid.d)


def _potential(cfg: ScenarioConfig, **override):
    params = {**cfg.potential.params, **override}
    return make_potential(cfg.potential.name, cfg.grid.d, **params)


def _check(passed, **info) -> dict:
    return {"passed": bool(passed), **info}


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------- pipelines

def pipeline_solutions(cfg: ScenarioConfig, out: Path, threads: int = 1) -> dict:
    grid = _grid(cfg)
    F = _potential(cfg)
    spec = HamiltonianSpec(F, cfg.hamiltonian.rho)
    s = cfg.search
    scfg = SearchConfig(lattice=s.lattice, starts=s.starts, perturb_amplitude=s.perturb_amplitude,
                        perturb_modes=s.perturb_modes, seed=cfg.seed, delta=s.delta,
                        newton_tol=s.newton_tol, solution_tol=s.solution_tol, threads=threads)
    scfg.flow = replace(scfg.flow, s_max=s.s_max, ds=s.ds)
    res = find_solutions(spec, grid, scfg)
    rows = []
    for k, r in enumerate(res.solutions):
        qm = r.q_mean()
        rows.append([k, f"{r.action:.15g}", *(f"{v:.6f}" for v in qm.ravel()), f"{r.hamilton:.3e}",
                     f"{r.bridges:.3e}", "" if r.laplace is None else f"{r.laplace:.3e}",
                     f"{r.max_p2:.3e}", len(r.starts), r.family or ""])
        write_field(out / f"solution_{k:02d}.bfsd", r.x.reshape(-1, grid.n1, grid.n2),
                    meta={"action": r.action, "d": grid.d, "components": "q1,q2,p1,p2"})
    qcols = [f"{c}{j}" for c in ("q1_", "q2_") for j in range(grid.d)]
    _write_csv(out / "solutions.csv", ["index", "action", *qcols, "hamilton", "bridges", "laplace",
                                       "max_p2", "members", "family"], rows)
    bound = 2 * grid.d + 1
    sols = res.solutions
    tol = 1e-7
    checks = {
        "residuals": _check(all(r.hamilton <= tol and r.bridges <= tol and (r.laplace is None or r.laplace <= tol)
                                for r in sols) and bool(sols), tol=tol),
        "cutoff": _check(all(spec.rho is None or r.max_p2 <= spec.rho for r in sols)),
    }
    if cfg.potential.name == "zero":
        checks["single_family"] = _check(len(sols) == 1 and sols[0].family == "degenerate-constants")
    else:
        checks["count"] = _check(len(sols) >= bound, count=len(sols), bound=bound)
    return {
        "count": len(sols), "bound": bound, "solutions": [r.summary() for r in sols],
        "failures": res.failures, "checks": checks,
    }


def pipeline_flow(cfg: ScenarioConfig, out: Path, threads: int = 1) -> dict:
    grid = _grid(cfg)
    h = cfg.homotopy
    f = cfg.flow
    profile = HomotopyProfile(h.r, grid.d)
    s_max = max(f.s_max, profile.support[1] + f.patience * f.ds + 1.0)
    runs, rows = [], []
    (out / "logs").mkdir(exist_ok=True)
    eps_list = h.eps if cfg.potential.name == "cosine" else [None]
    k = 0
    for eps in eps_list:
        F = _potential(cfg) if eps is None else make_potential("cosine", grid.d, eps=eps)
        spec = HamiltonianSpec(F, cfg.hamiltonian.rho)
        hof = hofer_norm(spec, grid)
        for q0 in h.starts:
            q0 = np.asarray(q0, dtype=float).reshape(2, -1)
            Z0 = PhaseField.constant(grid, q0[0], q0[1])
            fc = FlowConfig(ds=f.ds, s0=f.s0, s_max=s_max, tol=f.tol, patience=f.patience, dealias=f.dealias,
                            snapshot_every=max(f.snapshot_every, 1), log_path=str(out / "logs" / f"run_{k:02d}.jsonl"),
                            dump_every=f.dump_every, dump_dir=str(out / "dumps" / f"run_{k:02d}") if f.dump_every else None)
            traj = run_flow(spec, profile, Z0, fc)
            er = energy(traj, M=2.0)
            mp = max_principle_check(traj) if spec.rho is not None else None
            dr = density_inequality_check(traj)
            run = {
                "run": k, "eps": eps, "q0": q0.ravel().tolist(), "status": traj.status, "s_end": float(traj.s[-1]),
                "E": er.E, "hofer2": 2 * hof, "energy_margin": 2 * hof - er.E,
                "window_integral": er.window_integral, "C_K": er.C_K, "window_ok": er.window_bound_ok,
                "max_p2": None if mp is None else mp.max_p2, "rho": spec.rho,
                "max_principle": None if mp is None else mp.passed,
                "density_c": dr.constants.c, "density_min_slack": dr.min_slack, "density_ok": dr.passed,
                "max_action_increase": traj.max_action_increase, "rejected": traj.rejected,
            }
            runs.append(run)
            rows.append([run[c] for c in ("run", "eps", "status", "E", "hofer2", "energy_margin", "max_p2",
                                          "density_min_slack", "max_action_increase")])
            k += 1
    _write_csv(out / "flow_runs.csv", ["run", "eps", "status", "E", "hofer2", "energy_margin", "max_p2",
                                       "density_min_slack", "max_action_increase"], rows)
    conv = [r for r in runs if r["status"] == "converged"]
    checks = {
        "converged": _check(len(conv) == len(runs), converged=len(conv), runs=len(runs)),
        "energy_bound": _check(bool(conv) and all(r["E"] <= r["hofer2"] for r in conv),
                               min_margin=min((r["energy_margin"] for r in conv), default=None)),
        "energy_window": _check(all(r["window_ok"] for r in conv)),
        "max_principle": _check(all(r["max_principle"] in (True, None) for r in conv),
                                max_p2=max((r["max_p2"] or 0.0 for r in conv), default=None)),
        "density_inequality": _check(all(r["density_ok"] for r in conv),
                                     min_slack=min((r["density_min_slack"] for r in conv), default=None)),
        "action_monotone": _check(all(r["max_action_increase"] <= 1e-8 for r in runs),
                                  max_increase=max(r["max_action_increase"] for r in runs)),
    }
    return {"runs": runs, "checks": checks}


def pipeline_symbol(cfg: ScenarioConfig, out: Path, threads: int = 1) -> dict:
    s = cfg.symbol
    n = int(round((s.xi_max - s.xi_min) / s.xi_step))
    xi = np.round(s.xi_min + s.xi_step * np.arange(n + 1), 12)
    n_o = int(round((s.xi_max - s.xi_min) / s.oracle_xi_step))
    xi_o = np.round(s.xi_min + s.oracle_xi_step * np.arange(n_o + 1), 12)
    orc = oracle_check(s.max_m, xi_o)
    scan = invertibility_scan(s.max_m, xi)
    rows = write_scan_csv(out / "symbol_scan.csv", s.max_m, xi, full=s.full_table)
    checks = {
        "det_oracle": _check(orc.det_err <= 1e-10, err=orc.det_err),
        "eig_oracle": _check(orc.eig_err <= 1e-10 and orc.multiplicity_ok, err=orc.eig_err),
        "zero_det_only_at_origin": _check(orc.zero_det_only_at_origin),
        "finite_N": _check(scan.N is not None, N=scan.N),
        "small_mode_violation": _check(1 in scan.k2_violations, margin_010=scan.margin_at(0, 1)),
        "rays_monotone": _check(scan.rays_monotone()),
    }
    return {"N": scan.N, "k2_violations": scan.k2_violations, "rows": rows, "oracle_points": orc.points,
            "checks": checks}


def near_solution_fields(grid: TorusGrid, V, n: int, amplitude: float, seed: int):
    """Pairs (perturbed q, polished solution q) around the constant critical points {0, pi}^2."""
    rng = np.random.default_rng(seed)
    spec = HamiltonianSpec(V)
    out = []
    for k in range(n):
        c = np.pi * rng.integers(0, 2, size=(2, grid.d))
        pert = random_field(grid, rng, max_mode=3, amplitude=amplitude, components=2 * grid.d, decay=0.0)
        pert -= pert.mean(axis=(-2, -1), keepdims=True)
        pert = pert.reshape(2, grid.d, *grid.shape)
        q = (c[0][:, None, None] + pert[0]) + 1j * (c[1][:, None, None] + pert[1])
        qf = SpectralField(grid, q)
        Z = PhaseField.from_complex(grid, q, np.zeros_like(q))
        Zs, _, _ = newton_polish(spec, Z)
        out.append((qf, SpectralField(grid, Zs.q)))
    return out


def pipeline_legendre(cfg: ScenarioConfig, out: Path, threads: int = 1) -> dict:
    grid = _grid(cfg)
    V = _potential(cfg)
    lc = cfg.legendre
    L = lg.make_lagrangian(lc.lagrangian, V, a=lc.a)
    pairs = near_solution_fields(grid, V, lc.fields, lc.amplitude, cfg.seed)
    rows = []
    agree = 0.0
    together = True
    H_err = 0.0
    rt_err = 0.0
    cond_min = np.inf
    for k, (q, qs) in enumerate(pairs):
        for label, f in (("perturbed", q), ("polished", qs)):
            el, hr = lg.el_and_hamilton(L, f)
            n_el = residual_norm(el.values, grid)
            n_h = residual_norm(hr, grid)
            agree = max(agree, abs(n_el - n_h))
            if (n_el <= 1e-9) != (n_h <= 1e-9):
                together = False
            lap = None
            if label == "polished" and lc.lagrangian == "dirichlet-minus-potential":
                lap = residual_norm(laplace_residual(HamiltonianSpec(V), PhaseField.from_complex(grid, f.values, 0)).values, grid)
            rows.append([k, label, f"{n_el:.3e}", f"{n_h:.3e}", "" if lap is None else f"{lap:.3e}"])
        det = lg.legendre_condition(L, q)
        cond_min = min(cond_min, float(np.abs(det).min()))
        Z, spec, rep = lg.legendre_transform(L, q, samples=lc.samples, seed=cfg.seed + k)
        v = np.abs(lg.velocity(q)).max()
        rt_err = max(rt_err, rep.dH_dp_err / max(v, 1e-300))
        if lc.lagrangian == "dirichlet-minus-potential":
            rng = np.random.default_rng(cfg.seed + k)
            idx = rng.integers(0, grid.n1 * grid.n2, size=lc.samples)
            x = Z.x.reshape(4, grid.d, -1)[..., idx]
            H = spec.F.hamiltonian(x)
            ref = 0.5 * (x[2] ** 2 + x[3] ** 2).sum(axis=0) + V.value(x)
            H_err = max(H_err, float(np.abs(H - ref).max()))
    _write_csv(out / "legendre.csv", ["field", "kind", "el_norm", "hamilton_norm", "laplace_norm"], rows)
    checks = {
        "condition": _check(cond_min >= lg.CONDITION_THRESHOLD, min_abs_det=cond_min),
        "el_equals_hamilton": _check(agree <= 1e-10, max_gap=agree),
        "vanish_together": _check(together),
        "round_trip_velocity": _check(rt_err <= 1e-8, rel_err=rt_err),
    }
    if lc.lagrangian == "dirichlet-minus-potential":
        checks["hamiltonian_recovered"] = _check(H_err <= 1e-12, err=H_err)
    return {"fields": lc.fields, "checks": checks}


PIPELINE_FUNCS = {
    "solutions": pipeline_solutions,
    "flow-diagnostics": pipeline_flow,
    "symbol-scan": pipeline_symbol,
    "legendre-check": pipeline_legendre,
}


def run_scenario(cfg: ScenarioConfig, out, threads: int = 1) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    body = PIPELINE_FUNCS[cfg.pipeline](cfg, out, threads)
    elapsed = time.perf_counter() - t0
    summary = {
        "scenario": cfg.name, "pipeline": cfg.pipeline, "seed": cfg.seed, "config": cfg.to_dict(),
        "conventions": {"period": "2*pi", "volume": VOLUME, "dV": "dt1 dt2"},
        **body,
        "passed": all(c["passed"] for c in body["checks"].values()),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default))
    (out / "timing.json").write_text(json.dumps({"seconds": elapsed}))
    return summary


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")
