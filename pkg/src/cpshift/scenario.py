"""Scenario configuration, distance scans and the discrete-mode convergence
study behind the command-line tool.

Configuration files are INI-style (see ``README.md`` for every key); SI
units throughout except where a key name says otherwise.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .arrowhead import build_discretized_system, lowest_pick_root
from .atomic import AtomicDomainError, GridSpec, QuantumDefectSet, StateLabel
from .channels import build_channels
from .constants import CODATA_VERSION
from .integrals import QuadratureConfig
from .mixing import MixingValidityError, induced_transition_dipole, mixing_probabilities
from .response import Drude, LorentzMetamaterial, PerfectConductor, ResponseError, surface_resonance
from .shift import ShiftConvergenceError, SolverConfig, self_consistent_network, solve_exact_shift

SCHEMA_VERSION = 1
OUTPUTS = ("shift_exact", "shift_pt1", "shift_pt2", "network", "mixing", "induced_dipole")
TWO_PI = 2.0 * math.pi


class ScenarioError(ValueError):
    """Invalid or unresolvable configuration."""


@dataclass(frozen=True)
class InducedSpec:
    final: StateLabel
    reference: StateLabel | None = None
    via: tuple | None = None


@dataclass(frozen=True)
class ConvergenceSpec:
    n_list: tuple = (250, 500, 1000, 2000, 4000, 8000)
    omega_max: float | None = None
    grid: str = "log"
    partner: StateLabel | None = None
    z: float | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    states: tuple
    model: object
    z_grid: tuple
    outputs: tuple
    species: str = "Rb87"
    defects_path: str | None = None
    dn_max: int = 2
    orientation: str = "isotropic"
    solver: SolverConfig = field(default_factory=SolverConfig)
    induced: InducedSpec | None = None
    convergence: ConvergenceSpec = field(default_factory=ConvergenceSpec)
    source_text: str = ""

    def __post_init__(self):
        if not self.states:
            raise ScenarioError("at least one state is required")
        if not self.z_grid:
            raise ScenarioError("z grid is empty")
        if any(z <= 0 for z in self.z_grid):
            raise ScenarioError("distances must be positive")
        if list(self.z_grid) != sorted(self.z_grid):
            raise ScenarioError("distances must be sorted ascending")
        if not self.outputs:
            raise ScenarioError("no outputs requested")
        bad = [o for o in self.outputs if o not in OUTPUTS]
        if bad:
            raise ScenarioError(f"unknown outputs: {', '.join(bad)}")
        if "induced_dipole" in self.outputs and self.induced is None:
            raise ScenarioError("induced_dipole output needs an [induced] section")

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()

    def load_defects(self) -> QuantumDefectSet:
        try:
            if self.defects_path in (None, "", "builtin"):
                return QuantumDefectSet.rubidium()
            return QuantumDefectSet.from_file(self.defects_path, self.species)
        except (OSError, AtomicDomainError, ValueError) as exc:
            raise ScenarioError(f"cannot load defect table: {exc}") from exc


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _states(text: str) -> tuple:
    return tuple(StateLabel.parse(t) for t in text.replace(",", " ").split())


def _model(sec) -> object:
    kind = sec.get("model", "drude").strip().lower()
    try:
        if kind == "drude":
            return Drude(sec.getfloat("omega_p"), sec.getfloat("gamma"))
        if kind == "metamaterial":
            return LorentzMetamaterial(sec.getfloat("omega_p"), sec.getfloat("omega_0"), sec.getfloat("gamma"))
        if kind in ("perfect", "perfect_conductor"):
            return PerfectConductor()
    except TypeError as exc:
        raise ScenarioError(f"surface model {kind!r} is missing a parameter") from exc
    raise ScenarioError(f"unknown surface model {kind!r}")


def _z_grid(sec) -> tuple:
    if "z" in sec:
        return tuple(_floats(sec["z"]))
    if "z_min" in sec:
        lo, hi, n = sec.getfloat("z_min"), sec.getfloat("z_max"), sec.getint("z_count")
        if n < 1 or lo <= 0 or hi < lo:
            raise ScenarioError("z_min, z_max, z_count do not define a grid")
        spacing = sec.get("z_spacing", "log")
        pts = np.geomspace(lo, hi, n) if spacing == "log" else np.linspace(lo, hi, n)
        return tuple(float(v) for v in pts)
    return ()


def parse_config(text: str) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from INI text; raises ScenarioError."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
        for name in ("atom", "surface", "scan"):
            if not cp.has_section(name):
                raise ScenarioError(f"missing [{name}] section")
        atom, scan = cp["atom"], cp["scan"]
        solver = cp["solver"] if cp.has_section("solver") else {}
        quad = QuadratureConfig(
            nodes=int(solver.get("quad_nodes", 200)), rtol=float(solver.get("quad_rtol", 1e-10))
        )
        scfg = SolverConfig(
            tol=float(solver.get("tol", 1e-12)),
            max_iter=int(solver.get("max_iter", 200)),
            damping=float(solver.get("damping", 0.5)),
            max_restarts=int(solver.get("max_restarts", 3)),
            quadrature=quad,
        )
        induced = None
        if cp.has_section("induced"):
            sec = cp["induced"]
            induced = InducedSpec(
                StateLabel.parse(sec["final"]),
                StateLabel.parse(sec["reference"]) if "reference" in sec else None,
                _states(sec["via"]) if "via" in sec else None,
            )
        conv = ConvergenceSpec()
        if cp.has_section("convergence"):
            sec = cp["convergence"]
            conv = ConvergenceSpec(
                tuple(int(v) for v in _floats(sec["n"])) if "n" in sec else conv.n_list,
                sec.getfloat("omega_max") if "omega_max" in sec else None,
                sec.get("grid", "log"),
                StateLabel.parse(sec["partner"]) if "partner" in sec else None,
                sec.getfloat("z") if "z" in sec else None,
            )
        return ScenarioConfig(
            states=_states(atom.get("states", "")),
            model=_model(cp["surface"]),
            z_grid=_z_grid(scan),
            outputs=tuple(o.strip() for o in scan.get("outputs", "").replace(",", " ").split()),
            species=atom.get("species", "Rb87"),
            defects_path=atom.get("defects", None),
            dn_max=atom.getint("dn_max", 2),
            orientation=atom.get("orientation", "isotropic"),
            solver=scfg,
            induced=induced,
            convergence=conv,
            source_text=text,
        )
    except ScenarioError:
        raise
    except (configparser.Error, KeyError, ValueError, ResponseError, AtomicDomainError) as exc:
        raise ScenarioError(str(exc)) from exc


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read config: {exc}") from exc
    return parse_config(text)


# ---------------------------------------------------------------------------
# Distance scan
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    return "%.11e" % v


def result_columns(cfg: ScenarioConfig, channel_partners: dict) -> list[str]:
    cols = ["z_um"]
    for s in cfg.states:
        if "shift_exact" in cfg.outputs:
            cols.append(f"nu_exact_Hz[{s}]")
        if "shift_pt1" in cfg.outputs:
            cols.append(f"nu_pt1_Hz[{s}]")
        if "shift_pt2" in cfg.outputs:
            cols.append(f"nu_pt1_pt2_Hz[{s}]")
        if "network" in cfg.outputs:
            cols.append(f"nu_network_Hz[{s}]")
        if "mixing" in cfg.outputs:
            cols.append(f"p0[{s}]")
            cols.extend(f"p[{s}->{k}]" for k in channel_partners[s])
        cols.append(f"iterations[{s}]")
        cols.append(f"converged[{s}]")
    if "induced_dipole" in cfg.outputs:
        s0, fin = cfg.states[0], cfg.induced.final
        cols.append(f"d_induced_Cm[{s0}->{fin}]")
        if cfg.induced.reference is not None:
            cols.append(f"d_ratio[{s0}->{fin}]")
    cols.append("row_ok")
    return cols


def _scan_row(args):
    cfg, levels, defects, z = args
    solver = cfg.solver
    row = {"z_um": z * 1e6}
    diag = []
    ok = True
    results = {}
    for s in cfg.states:
        res = solve_exact_shift(levels[s], cfg.model, z, solver, raise_on_failure=False)
        results[s] = res
        ok &= res.converged
        diag.append(f"{s}: iterations={res.iterations} residual={res.residual:.3e} converged={int(res.converged)}")
    network = None
    if "network" in cfg.outputs:
        try:
            network = self_consistent_network(levels, cfg.model, z, solver)
            diag.append(f"network: sweeps={network.sweeps} restarts={network.restarts}")
        except ShiftConvergenceError as exc:
            ok = False
            diag.append(f"network: {exc}")
    reports = {}
    for s in cfg.states:
        res = results[s]
        if "shift_exact" in cfg.outputs:
            row[f"nu_exact_Hz[{s}]"] = res.delta_exact / TWO_PI
        if "shift_pt1" in cfg.outputs:
            row[f"nu_pt1_Hz[{s}]"] = res.delta_pt1 / TWO_PI
        if "shift_pt2" in cfg.outputs:
            row[f"nu_pt1_pt2_Hz[{s}]"] = (res.delta_pt1 + res.delta_pt2_correction) / TWO_PI
        if "network" in cfg.outputs:
            row[f"nu_network_Hz[{s}]"] = network.network[s].delta_exact / TWO_PI if network else math.nan
        if "mixing" in cfg.outputs or ("induced_dipole" in cfg.outputs and s == cfg.states[0]):
            try:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    rep = mixing_probabilities(s, levels[s], cfg.model, z, res.delta_exact, solver)
                reports[s] = rep
                diag.extend(f"{s}: {f}" for f in rep.flags)
                diag.extend(f"{s}: {w.message}" for w in caught)
            except MixingValidityError as exc:
                ok = False
                diag.append(f"{s}: {exc}")
        if "mixing" in cfg.outputs:
            rep = reports.get(s)
            row[f"p0[{s}]"] = rep.p0 if rep else math.nan
            for c in levels[s]:
                row[f"p[{s}->{c.partner}]"] = rep.channel(c.partner).p_k if rep else math.nan
        row[f"iterations[{s}]"] = res.iterations
        row[f"converged[{s}]"] = res.converged
    if "induced_dipole" in cfg.outputs:
        s0, spec = cfg.states[0], cfg.induced
        key = f"d_induced_Cm[{s0}->{spec.final}]"
        rep = reports.get(s0)
        if rep is None:
            row[key] = math.nan
            if spec.reference is not None:
                row[f"d_ratio[{s0}->{spec.final}]"] = math.nan
        else:
            ind = induced_transition_dipole(
                s0, spec.final, rep, defects, spec.via, spec.reference, cfg.orientation
            )
            row[key] = ind.magnitude
            if spec.reference is not None:
                row[f"d_ratio[{s0}->{spec.final}]"] = ind.ratio
    row["row_ok"] = ok
    return row, ok, diag


@dataclass
class ScanResult:
    columns: list
    rows: list
    ok: list
    diagnostics: list
    wall_time: float

    @property
    def all_converged(self) -> bool:
        return all(self.ok)

    def to_csv(self) -> str:
        lines = [f"# schema={SCHEMA_VERSION}", ",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_fmt(row[c]) for c in self.columns))
        return "\n".join(lines) + "\n"


def build_levels(cfg: ScenarioConfig, defects: QuantumDefectSet) -> dict:
    try:
        return {
            s: build_channels(s, defects, cfg.dn_max, cfg.orientation, GridSpec()) for s in cfg.states
        }
    except (AtomicDomainError, ValueError) as exc:
        raise ScenarioError(f"cannot build channels: {exc}") from exc


def run_scenario(cfg: ScenarioConfig, jobs: int = 1) -> ScanResult:
    """Distance scan; rows come back in z order whatever ``jobs`` is."""
    start = time.perf_counter()
    defects = cfg.load_defects()
    levels = build_levels(cfg, defects)
    for s, chans in levels.items():
        if not chans:
            raise ScenarioError(f"{s} has no dipole-allowed partners in range")
    columns = result_columns(cfg, {s: [c.partner for c in levels[s]] for s in cfg.states})
    tasks = [(cfg, levels, defects, z) for z in cfg.z_grid]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_scan_row, tasks))
    else:
        out = [_scan_row(t) for t in tasks]
    rows = [o[0] for o in out]
    ok = [o[1] for o in out]
    diags = [f"z={z:.6e} " + "; ".join(o[2]) for z, o in zip(cfg.z_grid, out)]
    return ScanResult(columns, rows, ok, diags, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# Convergence of the discretized two-level system
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceResult:
    rows: list  # (N, root - omega0, continuum, difference)
    fitted_order: float
    monotone_tail: bool
    warnings: list
    wall_time: float

    columns = ("N", "root_minus_omega0_Hz", "continuum_Hz", "difference_Hz")

    def to_csv(self) -> str:
        lines = [f"# schema={SCHEMA_VERSION}", ",".join(self.columns)]
        for n, root, cont, diff in self.rows:
            lines.append(",".join([str(n), _fmt(root / TWO_PI), _fmt(cont / TWO_PI), _fmt(diff / TWO_PI)]))
        return "\n".join(lines) + "\n"


def fitted_order(n_list, diffs, tail: int = 3) -> float:
    """``-slope`` of ``log|diff|`` against ``log N`` over the last points."""
    n = np.asarray(n_list[-tail:], dtype=float)
    d = np.abs(np.asarray(diffs[-tail:], dtype=float))
    if len(n) < 2 or np.any(d == 0):
        return math.inf if np.all(d == 0) else math.nan
    return float(-np.polyfit(np.log(n), np.log(d), 1)[0])


def convergence_study(cfg: ScenarioConfig, n_list=None, grid: str | None = None) -> ConvergenceResult:
    """Lowest Pick root of the discretized two-level system against the
    continuum shift of the same channel."""
    start = time.perf_counter()
    conv = cfg.convergence
    n_list = tuple(n_list if n_list is not None else conv.n_list)
    if not n_list or any(n < 1 for n in n_list):
        raise ScenarioError("convergence study needs positive N values")
    grid = grid or conv.grid
    defects = cfg.load_defects()
    state = cfg.states[0]
    partner = conv.partner
    channels = build_levels(cfg, defects)[state]
    if partner is not None:
        channels = [c for c in channels if c.partner == partner]
    if len(channels) != 1:
        raise ScenarioError("two-level reduction needs exactly one partner ([convergence] partner)")
    channel = channels[0]
    if channel.omega_kn <= 0:
        raise ScenarioError("two-level reduction needs an upward partner")
    z = conv.z if conv.z is not None else cfg.z_grid[0]
    omega_max = conv.omega_max
    if omega_max is None:
        res = surface_resonance(cfg.model) or channel.omega_kn
        omega_max = 10.0 * max(res * math.sqrt(2.0), channel.omega_kn)
    continuum = solve_exact_shift([channel], cfg.model, z, cfg.solver).delta_exact
    rows = []
    notes = []
    for n in n_list:
        system = build_discretized_system(channel, cfg.model, z, omega_max, n, grid)
        notes.extend(system.warnings)
        root = lowest_pick_root(system) - system.a
        rows.append((n, root, continuum, root - continuum))
    diffs = [abs(r[3]) for r in rows]
    tail = [d for n, d in zip(n_list, diffs) if n >= 500] or diffs
    monotone = all(b <= a for a, b in zip(tail, tail[1:]))
    if not monotone:
        notes.append("non-monotone tail in |discrete - continuum|")
        warnings.warn(notes[-1], RuntimeWarning)
    order = fitted_order(n_list, [r[3] for r in rows])
    return ConvergenceResult(rows, order, monotone, notes, time.perf_counter() - start)


def manifest_text(cfg: ScenarioConfig, mode: str, wall_time: float, extra: dict) -> str:
    defects = cfg.load_defects()
    items = {
        "tool": "cpcli",
        "tool_version": __version__,
        "schema": SCHEMA_VERSION,
        "mode": mode,
        "config_sha256": cfg.config_hash,
        "constants_version": CODATA_VERSION,
        "defects_version": defects.version,
        "wall_time_s": f"{wall_time:.3f}",
    }
    items.update(extra)
    return "".join(f"{k} = {v}\n" for k, v in items.items())
