"""Configuration-driven experiment runner and convergence harness.

An experiment is described by a single JSON document (domain, index
map, wavenumber, PML profile, solver settings, mesh ladder, reference
choice).  ``run_experiment`` walks the refinement ladder, solves and
filters at each level, matches the filtered values to the reference
(analytic slab modes, or the finest level itself), and tabulates
eigenvalue and L2 mode errors with their observed orders.
"""

from __future__ import annotations

import cmath
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .assembly import RefractiveIndexMap, assemble_forms
from .eigensolver import (
    SolverConfig,
    filter_propagating,
    interp_p1,
    linearize,
    mode_field,
    nodal_values,
    solve_shift_invert,
)
from .geometry import DofMap, DomainSpec, Mesh, build_dof_map, build_structured_mesh
from .pml import PmlProfile
from .slab import SlabModeSpec, analytic_mode, eval_analytic_mode, l2_field_error

_MATCH_AMBIGUITY_RADIUS = 1e-3


class ExperimentError(RuntimeError):
    pass


class MatchAmbiguousError(ExperimentError):
    """Two reference values compete for the same computed eigenvalue."""


class NonpositiveErrorError(ValueError):
    """Convergence orders need strictly positive errors."""


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    domain: DomainSpec
    index: RefractiveIndexMap
    k: float
    pml: PmlProfile
    solver: SolverConfig
    ladder: tuple
    reference: str = "oracle"  # "oracle" or "self"
    oracle_modes: tuple = ()
    profile_samples: int = 241
    field_grid: tuple = (161, 121)

    def __post_init__(self):
        object.__setattr__(self, "ladder", tuple(float(h) for h in self.ladder))
        object.__setattr__(self, "oracle_modes", tuple(self.oracle_modes))
        if self.k <= 0:
            raise ValueError("wavenumber k must be positive")
        if self.reference not in ("oracle", "self"):
            raise ValueError("reference must be 'oracle' or 'self'")
        if self.reference == "oracle" and not self.oracle_modes:
            raise ValueError("oracle reference requires oracle_modes")
        if len(self.ladder) < 3:
            raise ValueError("mesh ladder needs at least 3 levels for orders")
        if any(b >= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ValueError("mesh ladder must be strictly decreasing")


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build a validated config from a parsed JSON document.

    The physical parameters k, the period, and every index value are
    required; there are no physical defaults.
    """
    dom = doc["domain"]
    domain = DomainSpec(
        period=dom["period"],
        half_height=dom["half_height"],
        pml_thickness=dom["pml_thickness"],
        medium_half_height=dom["medium_half_height"],
        interface_x1=tuple(dom.get("interface_x1", ())),
        interface_x2=tuple(dom.get("interface_x2", ())),
    )
    regions = tuple(
        ((r["x1"][0], r["x1"][1], r["x2"][0], r["x2"][1]), r["gamma"])
        for r in doc["index"]["regions"]
    )
    index = RefractiveIndexMap(
        regions=regions, medium_half_height=domain.medium_half_height
    )
    pml_doc = doc["pml"]
    phase = pml_doc.get("phase", [1.0, 1.0])
    pml = PmlProfile(
        H=domain.half_height,
        delta=domain.pml_thickness,
        strength=pml_doc["strength"],
        power=pml_doc.get("power", 3),
        phase=complex(phase[0], phase[1]),
    )
    sol = doc.get("solver", {})
    solver = SolverConfig(
        shifts=tuple(sol.get("shifts", (0.05, 0.15, 0.25, 0.35, 0.45))),
        n_requested=sol.get("n_requested", 12),
        subspace=sol.get("subspace", 40),
        max_restarts=sol.get("max_restarts", 12),
        tol=sol.get("tol", 1e-9),
        max_arg=sol.get("max_arg", math.atan(0.1)),
        window=tuple(sol.get("window", (0.0, math.pi / domain.period))),
        seed=sol.get("seed", 7),
        threads=sol.get("threads", 1),
    )
    modes = tuple(
        SlabModeSpec(
            k=doc["k"],
            gamma_core=m["gamma_core"],
            shift=m["shift"],
            parity=m["parity"],
        )
        for m in doc.get("oracle_modes", ())
    )
    return ExperimentConfig(
        name=doc.get("name", "experiment"),
        domain=domain,
        index=index,
        k=doc["k"],
        pml=pml,
        solver=solver,
        ladder=tuple(doc["ladder"]),
        reference=doc.get("reference", "oracle"),
        oracle_modes=modes,
        profile_samples=doc.get("profile_samples", 241),
        field_grid=tuple(doc.get("field_grid", (161, 121))),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def config_digest(cfg: ExperimentConfig) -> str:
    doc = asdict(cfg)
    blob = json.dumps(doc, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def mesh_for_hmax(domain: DomainSpec, hmax: float) -> tuple:
    """Structured mesh whose longest triangle side stays below hmax.

    hmax bounds the longest side (the cell diagonal), so the axis
    spacing is hmax/1.5: diagonals come out at about 0.94*hmax, the
    spacing still divides the material lines for dyadic hmax, and
    halving hmax halves the spacing exactly.  The x1 spacing is the
    closest even division of the period.
    """
    ny_per_unit = round(1.5 / hmax)
    if abs(ny_per_unit * hmax - 1.5) > 1e-9:
        raise ValueError(f"1.5/hmax must be an integer, got hmax={hmax}")
    hy = 1.0 / ny_per_unit
    nx = max(2, 2 * round(domain.period / (2 * hy)))
    mesh = build_structured_mesh(domain, nx=nx, ny_per_unit=ny_per_unit)
    return mesh, build_dof_map(mesh)


@dataclass
class LevelSolution:
    hmax: float
    mesh: Mesh
    dofs: DofMap
    pairs: list
    filtered: list
    seconds: float


def solve_level(cfg: ExperimentConfig, hmax: float,
                pml: PmlProfile = None) -> LevelSolution:
    """Assemble and solve one mesh level of an experiment."""
    t0 = time.perf_counter()
    mesh, dofs = mesh_for_hmax(cfg.domain, hmax)
    system = assemble_forms(mesh, dofs, pml or cfg.pml, cfg.index, cfg.k)
    pencil = linearize(system)
    pairs = solve_shift_invert(pencil, cfg.solver)
    filtered = filter_propagating(pairs, cfg.solver)
    return LevelSolution(
        hmax=hmax, mesh=mesh, dofs=dofs, pairs=pairs, filtered=filtered,
        seconds=time.perf_counter() - t0,
    )


def match_references(filtered: list, refs: list) -> list:
    """Assign to every reference value the nearest filtered eigenvalue."""
    if not filtered:
        raise ExperimentError("no filtered eigenvalues to match against")
    for cand in filtered:
        close = [r for r in refs if abs(cand.alpha - r) < _MATCH_AMBIGUITY_RADIUS]
        if len(close) >= 2:
            raise MatchAmbiguousError(
                f"references {close} both within {_MATCH_AMBIGUITY_RADIUS}"
                f" of candidate {cand.alpha}"
            )
    return [min(filtered, key=lambda p: abs(p.alpha - r)) for r in refs]


def convergence_orders(errors: list) -> list:
    """order_i = log2(e_i / e_{i+1}) for a ladder of halved mesh sizes."""
    if len(errors) < 2:
        raise ValueError("need at least two errors")
    if any(e <= 0 for e in errors):
        raise NonpositiveErrorError("errors must be strictly positive")
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


@dataclass
class ModeTrack:
    label: str
    reference_alpha: complex
    alphas: list
    alpha_errors: list
    alpha_orders: list
    l2_errors: list
    l2_orders: list


@dataclass
class ConvergenceReport:
    name: str
    hmax_values: list
    modes: list
    config_hash: str
    timings: list
    levels: list = field(default=None, repr=False)

    def mode(self, i: int) -> ModeTrack:
        return self.modes[i]


def _field_evaluator(level: LevelSolution, pv):
    nodal = nodal_values(level.dofs, pv.phi)
    alpha = pv.alpha

    def evaluate(x1, x2):
        return interp_p1(level.mesh, nodal, x1, x2) * np.exp(1j * alpha * x1)

    return evaluate


def run_experiment(cfg: ExperimentConfig) -> ConvergenceReport:
    """Walk the mesh ladder and tabulate errors against the reference."""
    ladder = list(cfg.ladder)
    levels = {}

    if cfg.reference == "self":
        finest = solve_level(cfg, ladder[-1])
        levels[ladder[-1]] = finest
        if not finest.filtered:
            raise ExperimentError("self-reference level produced no filtered values")
        ref_values = [pv.alpha for pv in finest.filtered]
        ref_fields = [_field_evaluator(finest, pv) for pv in finest.filtered]
        labels = [f"alpha={pv.alpha.real:.4f}" for pv in finest.filtered]
    else:
        modes = [analytic_mode(spec) for spec in cfg.oracle_modes]
        ref_values = [complex(m.alpha) for m in modes]
        ref_fields = [
            (lambda x1, x2, m=m: eval_analytic_mode(m, x1, x2)) for m in modes
        ]
        labels = [f"alpha={m.alpha:.4f}" for m in modes]

    tracks = [
        ModeTrack(label=lab, reference_alpha=ref, alphas=[], alpha_errors=[],
                  alpha_orders=[], l2_errors=[], l2_orders=[])
        for lab, ref in zip(labels, ref_values)
    ]
    timings = []

    for hmax in ladder:
        if hmax not in levels:
            try:
                levels[hmax] = solve_level(cfg, hmax)
            except Exception as exc:
                raise ExperimentError(f"level hmax={hmax}: {exc}") from exc
        level = levels[hmax]
        timings.append(level.seconds)
        is_self_ref_level = cfg.reference == "self" and hmax == ladder[-1]
        matched = match_references(level.filtered, ref_values)
        for track, ref, ref_field, pv in zip(tracks, ref_values, ref_fields, matched):
            track.alphas.append(complex(pv.alpha))
            if is_self_ref_level:
                # the reference level itself carries no error entry
                track.alpha_errors.append(None)
                track.l2_errors.append(None)
            else:
                track.alpha_errors.append(abs(pv.alpha - ref))
                track.l2_errors.append(
                    l2_field_error(level.mesh, level.dofs, pv, ref_field)
                )

    for track in tracks:
        ae = [e for e in track.alpha_errors if e is not None]
        le = [e for e in track.l2_errors if e is not None]
        track.alpha_orders = convergence_orders(ae) if len(ae) >= 2 else []
        track.l2_orders = convergence_orders(le) if len(le) >= 2 else []

    return ConvergenceReport(
        name=cfg.name,
        hmax_values=ladder,
        modes=tracks,
        config_hash=config_digest(cfg),
        timings=timings,
        levels=[levels[h] for h in ladder],
    )


def pml_robustness_sweep(cfg: ExperimentConfig, multipliers: list,
                         hmax: float = 0.03125) -> list:
    """Eigenvalue drift against the strongest PML at a fixed mesh.

    Returns one row per multiplier t with the filtered values matched to
    those of t_max and their distances |alpha(t) - alpha(t_max)|.  Rows
    with t = 0 (no absorption) are flagged and carry no distances.
    """
    if not multipliers:
        raise ValueError("need at least one multiplier")
    ts = sorted(float(t) for t in multipliers)
    t_max = ts[-1]
    runs = {}
    for t in ts:
        prof = replace(cfg.pml, strength=cfg.pml.strength * t)
        runs[t] = solve_level(cfg, hmax, pml=prof)

    ref = runs[t_max].filtered
    if not ref:
        raise ExperimentError("strongest-PML run produced no filtered values")
    ref_values = [pv.alpha for pv in ref]

    rows = []
    for t in ts:
        flagged = t == 0.0
        alphas, deltas = [], []
        if not flagged and runs[t].filtered:
            try:
                matched = match_references(runs[t].filtered, ref_values)
                alphas = [complex(pv.alpha) for pv in matched]
                deltas = [abs(a - r) for a, r in zip(alphas, ref_values)]
            except ExperimentError:
                flagged = True
        elif not runs[t].filtered:
            flagged = True
        rows.append({
            "multiplier": t,
            "strength": cfg.pml.strength * t,
            "alphas": alphas,
            "deltas": deltas,
            "flagged": flagged,
        })
    return rows


def export_profile(pair, mesh: Mesh, dofs: DofMap, n_x2_samples: int) -> tuple:
    """max over x1 of |u(x1, x2)| on a symmetric x2 sampling grid."""
    nx = mesh.grid_x.size - 1
    x1 = np.linspace(mesh.grid_x[0], mesh.grid_x[-1], 4 * nx + 1)
    x2 = np.linspace(mesh.grid_y[0], mesh.grid_y[-1], n_x2_samples)
    nodal = nodal_values(dofs, pair.phi)
    prof = np.empty(n_x2_samples)
    for j, y in enumerate(x2):
        u = interp_p1(mesh, nodal, x1, np.full_like(x1, y))
        prof[j] = np.max(np.abs(u * np.exp(1j * pair.alpha * x1)))
    return x2, prof


def evanescence_ratios(pair, mesh: Mesh, dofs: DofMap, h0: float,
                       offset: float = 0.3) -> dict:
    """Trace decay of |u| away from the medium layer.

    Reports the x1-maximum of |u| at |x2| = h0 and |x2| = h0 + offset
    (worse of the two sides) together with the overall profile maximum.
    """
    nx = mesh.grid_x.size - 1
    x1 = np.linspace(mesh.grid_x[0], mesh.grid_x[-1], 4 * nx + 1)
    nodal = nodal_values(dofs, pair.phi)

    def trace_max(y):
        u = interp_p1(mesh, nodal, x1, np.full_like(x1, y))
        return float(np.max(np.abs(u * np.exp(1j * pair.alpha * x1))))

    at_h0 = min(trace_max(h0), trace_max(-h0))
    at_off = max(trace_max(h0 + offset), trace_max(-h0 - offset))
    x2, prof = export_profile(pair, mesh, dofs, n_x2_samples=201)
    pmax = float(prof.max())
    return {
        "trace_at_h0": at_h0,
        "trace_at_offset": at_off,
        "profile_max": pmax,
        "ratio_to_h0": at_off / at_h0 if at_h0 > 0 else math.inf,
        "ratio_to_max": at_off / pmax if pmax > 0 else math.inf,
    }
