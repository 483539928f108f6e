"""Scenario configuration: TOML files with a fixed schema; unknown keys are rejected.

Schema (all sections optional except where a pipeline needs them)::

    name = "cuplength-d1"            # scenario label
    pipeline = "solutions"           # solutions | symbol-scan | flow-diagnostics | legendre-check
    seed = 0

    [grid]        n1, n2, d
    [potential]   name = zero | cosine | polynomial | custom-sampled
                  cosine: eps (or eps1, eps2); polynomial: coeffs, coeffs2; custom-sampled: path
    [hamiltonian] rho
    [flow]        ds, s0, s_max, tol, patience, dealias, snapshot_every, dump_every
    [homotopy]    r, eps (list of cosine amplitudes), starts (list of [q1, q2] constants)
    [search]      lattice, starts, perturb_amplitude, perturb_modes, delta, newton_tol,
                  solution_tol, s_max, ds
    [symbol]      max_m, xi_min, xi_max, xi_step, oracle_xi_step, full_table
    [legendre]    lagrangian = dirichlet-minus-potential | kinetic-quartic, a, fields, samples,
                  amplitude
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

PIPELINES = ("solutions", "symbol-scan", "flow-diagnostics", "legendre-check")
POTENTIAL_KEYS = {
    "zero": set(),
    "cosine": {"eps", "eps1", "eps2"},
    "polynomial": {"coeffs", "coeffs2"},
    "custom-sampled": {"path"},
}
LAGRANGIANS = ("dirichlet-minus-potential", "kinetic-quartic")


class ConfigError(ValueError):
    pass


@dataclass
class GridSection:
    n1: int = 64
    n2: int = 64
    d: int = 1


@dataclass
class PotentialSection:
    name: str = "cosine"
    params: dict = field(default_factory=lambda: {"eps": 0.1})


@dataclass
class HamiltonianSection:
    rho: float | None = 4.0


@dataclass
class FlowSection:
    ds: float = 0.01
    s0: float = -1.0
    s_max: float = 30.0
    tol: float = 1e-9
    patience: int = 100
    dealias: bool = True
    snapshot_every: int = 1
    dump_every: int = 0


@dataclass
class HomotopySection:
    r: float = 1.0
    eps: list = field(default_factory=lambda: [0.05, 0.1, 0.2])
    starts: list = field(default_factory=lambda: [[1.0, 2.0], [2.5, -0.7], [0.4, 0.3], [-2.0, 1.2]])


@dataclass
class SearchSection:
    lattice: int = 4
    starts: int = 32
    perturb_amplitude: float = 0.1
    perturb_modes: int = 3
    delta: float = 1e-3
    newton_tol: float = 1e-12
    solution_tol: float = 1e-8
    s_max: float = 20.0
    ds: float = 0.1


@dataclass
class SymbolSection:
    max_m: int = 32
    xi_min: float = -10.0
    xi_max: float = 10.0
    xi_step: float = 0.01
    oracle_xi_step: float = 0.1
    full_table: bool = False


@dataclass
class LegendreSection:
    lagrangian: str = "dirichlet-minus-potential"
    a: float = 1.0
    fields: int = 20
    samples: int = 1000
    amplitude: float = 0.5


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    pipeline: str = "solutions"
    seed: int = 0
    grid: GridSection = field(default_factory=GridSection)
    potential: PotentialSection = field(default_factory=PotentialSection)
    hamiltonian: HamiltonianSection = field(default_factory=HamiltonianSection)
    flow: FlowSection = field(default_factory=FlowSection)
    homotopy: HomotopySection = field(default_factory=HomotopySection)
    search: SearchSection = field(default_factory=SearchSection)
    symbol: SymbolSection = field(default_factory=SymbolSection)
    legendre: LegendreSection = field(default_factory=LegendreSection)
    source: str | None = None

    def to_dict(self) -> dict:
        out = {"name": self.name, "pipeline": self.pipeline, "seed": self.seed}
        for sec in SECTIONS:
            obj = getattr(self, sec)
            if sec == "potential":
                out[sec] = {"name": obj.name, **obj.params}
            else:
                out[sec] = {f.name: getattr(obj, f.name) for f in fields(obj)}
        return out


SECTIONS = {
    "grid": GridSection, "potential": PotentialSection, "hamiltonian": HamiltonianSection,
    "flow": FlowSection, "homotopy": HomotopySection, "search": SearchSection,
    "symbol": SymbolSection, "legendre": LegendreSection,
}
TOP_KEYS = {"name", "pipeline", "seed"}


def _line_of(text: str, section: str | None, key: str | None) -> int | None:
    """1-based line of ``key`` inside ``[section]`` (or of the section header)."""
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]", s)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", s):
            return i
    return None


def _err(origin: str, text: str, section, key, msg) -> ConfigError:
    line = _line_of(text, section, key) if text else None
    where = f"{origin}:{line}" if line else origin
    field_name = f"[{section}] {key}" if section and key else (f"[{section}]" if section else key)
    return ConfigError(f"{where}: {field_name}: {msg}")


def _coerce(value, default, origin, text, section, key):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise _err(origin, text, section, key, f"expected boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise _err(origin, text, section, key, f"expected integer, got {value!r}")
        return value
    if isinstance(default, float) or default is None:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise _err(origin, text, section, key, f"expected number, got {value!r}")
        return float(value)
    if isinstance(default, list) and not isinstance(value, list):
        raise _err(origin, text, section, key, f"expected list, got {value!r}")
    if isinstance(default, str) and not isinstance(value, str):
        raise _err(origin, text, section, key, f"expected string, got {value!r}")
    return value


def from_dict(data: dict, origin: str = "<config>", text: str = "") -> ScenarioConfig:
    cfg = ScenarioConfig(source=origin)
    for key, value in data.items():
        if key in TOP_KEYS:
            setattr(cfg, key, _coerce(value, getattr(cfg, key), origin, text, None, key))
        elif key in SECTIONS:
            if not isinstance(value, dict):
                raise _err(origin, text, None, key, "expected a table")
            setattr(cfg, key, _section(key, value, origin, text))
        else:
            raise _err(origin, text, None, key, "unknown key")
    if cfg.pipeline not in PIPELINES:
        raise _err(origin, text, None, "pipeline", f"unknown pipeline {cfg.pipeline!r}; expected one of {PIPELINES}")
    if cfg.seed < 0:
        raise _err(origin, text, None, "seed", "seed must be nonnegative")
    if cfg.legendre.lagrangian not in LAGRANGIANS:
        raise _err(origin, text, "legendre", "lagrangian", f"unknown Lagrangian {cfg.legendre.lagrangian!r}")
    return cfg


def _section(name: str, data: dict, origin: str, text: str):
    if name == "potential":
        pname = data.get("name", "cosine")
        if pname not in POTENTIAL_KEYS:
            raise _err(origin, text, name, "name", f"unknown potential {pname!r}")
        params = {}
        for k, v in data.items():
            if k == "name":
                continue
            if k not in POTENTIAL_KEYS[pname]:
                raise _err(origin, text, name, k, f"unknown key for potential {pname!r}")
            params[k] = v
        if pname == "polynomial" and "coeffs" not in params:
            raise _err(origin, text, name, None, "polynomial potential needs coeffs")
        if pname == "custom-sampled":
            if "path" not in params:
                raise _err(origin, text, name, None, "custom-sampled potential needs path")
            p = Path(params["path"])
            if not p.is_absolute() and origin not in ("<config>",) and Path(origin).exists():
                params["path"] = str(Path(origin).parent / p)
        return PotentialSection(pname, params)
    cls = SECTIONS[name]
    obj = cls()
    known = {f.name for f in fields(cls)}
    for k, v in data.items():
        if k not in known:
            raise _err(origin, text, name, k, "unknown key")
        setattr(obj, k, _coerce(v, getattr(obj, k), origin, text, name, k))
    if name == "grid":
        for k in ("n1", "n2"):
            n = getattr(obj, k)
            if n < 8 or n % 2:
                raise _err(origin, text, name, k, "grid sizes must be even and >= 8")
        if obj.d < 1:
            raise _err(origin, text, name, "d", "d must be >= 1")
    if name == "hamiltonian" and obj.rho is not None and obj.rho <= 0:
        raise _err(origin, text, name, "rho", "rho must be positive")
    if name == "flow" and obj.ds <= 0:
        raise _err(origin, text, name, "ds", "ds must be positive")
    return obj


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    text = path.read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(data, str(path), text)


def override_grid(cfg: ScenarioConfig, spec: str) -> ScenarioConfig:
    """Apply a ``N1xN2`` grid override."""
    m = re.fullmatch(r"(\d+)x(\d+)", spec.strip())
    if not m:
        raise ConfigError(f"--grid: expected N1xN2, got {spec!r}")
    n1, n2 = int(m.group(1)), int(m.group(2))
    for n in (n1, n2):
        if n < 8 or n % 2:
            raise ConfigError("--grid: sizes must be even and >= 8")
    return replace(cfg, grid=replace(cfg.grid, n1=n1, n2=n2))
