"""Run orchestration: each verb reads a config, runs a solver and writes its artifacts."""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import dys, gradient_flow
from ..constraints import ConstraintSet
from ..errors import ConfigurationError, EmptyContourError
from ..geometry import (Contour, corner_transition_width, enclosed_area_from_mass,
                        extract_contour, leftmost_arclength, manifold_distance, wulff_2d)
from . import io
from .config import ExperimentConfig, emit, with_output
from .initial import make_initial

log = logging.getLogger(__name__)


class ComparisonError(ConfigurationError):
    """The two runs of a comparison are not comparable."""


@dataclass
class Outcome:
    converged: bool
    summary: dict = field(default_factory=dict)
    field: np.ndarray | None = None
    diagnostics: object = None
    contour: Contour | None = None


def _prepare_dir(config: ExperimentConfig) -> Path:
    out = Path(config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(emit(config), encoding="utf-8")
    return out


def _write_shape_files(out: Path, phi: np.ndarray, config: ExperimentConfig) -> Contour | None:
    if config.grid.dim != 2:
        return None
    try:
        c = extract_contour(phi, config.grid_spec())
    except EmptyContourError as exc:
        log.warning("no contour written: %s", exc)
        return None
    io.write_table(out / "contour.csv", ("x", "y"), c.points)
    io.write_table(out / "orientation.csv", ("arclength", "angle_rad"),
                   zip(c.segment_midpoints, c.orientation))
    return c


def initial_field(config: ExperimentConfig) -> np.ndarray:
    return make_initial(config.init.kind, config.grid_spec(), config.splitting.eps, config.init.seed)


def solve(config: ExperimentConfig) -> Outcome:
    """DYS run; writes diagnostics.csv, snapshots, contour/orientation CSVs and summary.txt."""
    out = _prepare_dir(config)
    spec = config.grid_spec()
    model = config.build_model()
    params = config.splitting_params()
    y0 = initial_field(config)
    cset = ConstraintSet.from_field(y0)
    every = config.output.snapshot_every
    io.write_field(out / "field_0.f64", y0, 0)

    def snapshot(state, _diag):
        if every and state.n % every == 0:
            io.write_field(out / f"field_{state.n}.f64", state.z, state.n)

    result = dys.run(y0, model, params, config.step_policy(), cset, config.stop_rule(), spec,
                     kkt_every=config.output.kkt_every, record_every=config.output.record_every,
                     callback=snapshot if every else None)
    d = result.diagnostics
    io.write_diagnostics(out / "diagnostics.csv", d, wall_clock=config.output.wall_clock)
    io.write_field(out / f"field_{d.iterations}.f64", result.z, d.iterations)
    contour = _write_shape_files(out, result.z, config)
    kkt = dys.kkt_residual(result.z, model, params, spec)
    summary = {
        "solver": "dys",
        "converged": d.converged,
        "iterations": d.iterations,
        "halvings": d.halvings,
        "final_tau": d.final_tau,
        "energy_raw": d["energy_raw"][-1],
        "energy_scaled": d["energy_scaled"][-1],
        "theta": d["theta"][-1],
        "kkt": kkt,
        "mass_rel_max": float(np.max(np.abs(d["mass_rel"]))),
        "z_min": float(np.min(d["z_min"])),
        "z_max": float(np.max(d["z_max"])),
        "step_norm": d["step_norm"][-1],
    }
    io.write_summary(out / "summary.txt", summary)
    log.info("dys: converged=%s after %d iterations, energy %.10g, kkt %.3e",
             d.converged, d.iterations, summary["energy_scaled"], kkt)
    return Outcome(d.converged, summary, result.z, d, contour)


def gradflow(config: ExperimentConfig) -> Outcome:
    """Gradient-flow baseline with the same grid, model and initial field."""
    out = _prepare_dir(config)
    spec = config.grid_spec()
    model = config.build_model()
    fp = config.flow_params()
    g = config.gradflow
    phi0 = initial_field(config)
    io.write_field(out / "field_0.f64", phi0, 0)
    phi, d = gradient_flow.run_to_steady(phi0, model, fp, spec, record_every=g.record_every,
                                         kkt_every=g.kkt_every,
                                         kkt_params=config.splitting_params(),
                                         norm_mode=g.norm_mode)
    io.write_diagnostics(out / "diagnostics.csv", d, wall_clock=config.output.wall_clock)
    io.write_field(out / f"field_{d.iterations}.f64", phi, d.iterations)
    contour = _write_shape_files(out, phi, config)
    summary = {
        "solver": "gradflow",
        "converged": d.converged,
        "iterations": d.iterations,
        "time": d["time"][-1],
        "energy_raw": d["energy_raw"][-1],
        "energy_scaled": d["energy_scaled"][-1],
        "energy_reg": d["energy_reg"][-1],
        "kkt": dys.kkt_residual(phi, model, config.splitting_params(), spec),
        "mass_rel_max": float(np.max(np.abs(d["mass_rel"]))),
        "phi_min": float(np.min(d["phi_min"])),
        "phi_max": float(np.max(d["phi_max"])),
        "step_norm": d["step_norm"][-1],
    }
    io.write_summary(out / "summary.txt", summary)
    log.info("gradflow: converged=%s after %d steps, energy %.10g",
             d.converged, d.iterations, summary["energy_scaled"])
    return Outcome(d.converged, summary, phi, d, contour)


def _corner_profile(c: Contour, radius: float):
    at = leftmost_arclength(c)
    rel = c.segment_midpoints - at
    rel = (rel + c.length / 2) % c.length - c.length / 2
    sel = np.abs(rel) <= radius
    order = np.argsort(rel[sel])
    return rel[sel][order], np.unwrap(c.orientation[sel][order]), corner_transition_width(c, at, radius)


def compare(config_dys: ExperimentConfig, config_gf: ExperimentConfig | None = None) -> Outcome:
    """Run both solvers on one instance; joined (wall_s, kkt, energy) table and corner profiles."""
    config_gf = config_gf or config_dys
    if config_dys.grid != config_gf.grid:
        raise ComparisonError(f"grids differ: {config_dys.grid} vs {config_gf.grid}")
    if config_dys.grid.dim != 2:
        raise ComparisonError("comparison profiles are 2D only")
    base = Path(config_dys.output.directory)
    timed = dict(output=dataclasses.replace(config_dys.output, wall_clock=True))
    a = solve(with_output(dataclasses.replace(config_dys, **timed), str(base / "dys")))
    timed = dict(output=dataclasses.replace(config_gf.output, wall_clock=True))
    b = gradflow(with_output(dataclasses.replace(config_gf, **timed), str(base / "gradflow")))
    rows = []
    for name, o in (("dys", a), ("gradflow", b)):
        d = o.diagnostics
        for it, w, k, e in zip(d["iter"], d["wall_s"], d["kkt"], d["energy_scaled"]):
            rows.append((name, int(it), w, k, e))
    io.write_table(base / "compare.csv", ("solver", "iter", "wall_s", "kkt", "energy_scaled"), rows)
    radius = 20.0 * config_dys.grid_spec().h
    summary = {"energy_dys": a.summary["energy_scaled"], "energy_gradflow": b.summary["energy_scaled"],
               "kkt_dys": a.summary["kkt"], "kkt_gradflow": b.summary["kkt"],
               "converged_dys": a.converged, "converged_gradflow": b.converged}
    for name, o in (("dys", a), ("gradflow", b)):
        if o.contour is None:
            continue
        s, ang, width = _corner_profile(o.contour, radius)
        io.write_table(base / f"corner_{name}.csv", ("arclength", "angle_rad"), zip(s, ang))
        summary[f"corner_width_{name}"] = width
    io.write_summary(base / "summary.txt", summary)
    return Outcome(a.converged and b.converged, summary)


def wulff(config: ExperimentConfig, area: float | None = None, contour_path=None) -> Outcome:
    """Wulff polygon for the configured model; area defaults to the initial field's mass."""
    if config.grid.dim != 2:
        raise ConfigurationError("the Wulff construction is available in 2D only")
    out = Path(config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    if area is None:
        area = enclosed_area_from_mass(ConstraintSet.from_field(initial_field(config)),
                                       config.grid_spec())
    shape = wulff_2d(config.build_model(), area)
    io.write_table(out / "wulff.csv", ("x", "y", "corner"),
                   ((x, y, bool(c)) for (x, y), c in zip(shape.vertices, shape.corner_flags)))
    summary = {"area": shape.area, "corners": shape.n_corners, "vertices": len(shape.vertices)}
    if contour_path is not None:
        summary["manifold_distance"] = manifold_distance(io.read_points(contour_path), shape)
    io.write_summary(out / "wulff_summary.txt", summary)
    return Outcome(True, summary)


def distance(path_a, path_b) -> float:
    return manifold_distance(io.read_points(path_a), io.read_points(path_b))


def run_many(configs, workers: int = 2, verb=solve) -> list[Outcome]:
    """Independent runs in worker threads; each config needs its own output directory."""
    dirs = [c.output.directory for c in configs]
    if len(set(dirs)) != len(dirs):
        raise ConfigurationError("parallel runs must write to distinct output directories")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(verb, configs))
