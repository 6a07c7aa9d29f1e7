"""Command line entry point: ``minenergy run <config>`` and ``minenergy validate <config>``.

Exit codes: 0 success, 2 invalid config, 3 kernel matrix not positive
definite (or other kernel error), 4 empty admissible class, 5 solver did not
converge, 6 report could not be written.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .balayage import sweep, verify_balayage_props
from .config import ConfigError, ProblemConfig, config_hash, load_config
from .equilibrium import capacitary_gap, robin_capacity
from .exhaustion import (
    SERIES_COLUMNS,
    THETA_FLOOR,
    THETA_RATIO,
    mass_deficiency_experiment,
    run_exhaustion,
    thinness_series,
)
from .gauss import minimality_battery, representation_solution, solve_gauss, verify_characterization
from .geometry import ExhaustionChain, GeometryError, IndexSet, PointSet, exhaustion_chain, sample_shape
from .kernels import (
    KernelError,
    KernelSpec,
    PositiveDefinitenessError,
    assemble_matrix,
    load_explicit_matrix,
    surface_cell_c_reg,
)
from .measures import DiscreteMeasure, ExternalField, MeasureError, field_values
from .qp import InfeasibleError, QPError, solver_limits
from .report import ReportError, write_csv, write_json

__all__ = ["main", "run_config", "build_instance", "Instance", "OUTPUT_ENV"]

OUTPUT_ENV = "MINENERGY_OUTPUT_DIR"

EXIT_OK, EXIT_CONFIG, EXIT_KERNEL, EXIT_GATE, EXIT_SOLVER, EXIT_OUTPUT = 0, 2, 3, 4, 5, 6


class SolverFailure(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Instance:
    """Everything an experiment needs, built from a config."""

    K: object
    points: PointSet | None
    n_base: int
    A: IndexSet
    field: ExternalField


def _load_points(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _measure(mc, n: int, carrier) -> DiscreteMeasure:
    w = np.zeros(n)
    for i, m in zip(mc.indices, mc.masses):
        if not -n <= i < n:
            raise MeasureError(f"measure index {i} out of range for {n} points")
        w[i] += m
    return DiscreteMeasure(w, carrier)


def _select(sc, n: int, n_base: int, points: PointSet | None) -> IndexSet:
    if sc is None or sc.kind == "all":
        return IndexSet.all(n)
    if sc.kind == "base":
        return IndexSet(np.arange(n_base), n)
    if sc.kind == "indices":
        return IndexSet(np.asarray(sc.indices) % n, n)
    if sc.kind == "range":
        return IndexSet(np.arange(sc.start, sc.stop), n)
    if points is None:
        raise GeometryError("coordinate selector needs points")
    x = points.points[:n_base, sc.axis]
    return IndexSet(np.flatnonzero((x >= sc.low) & (x <= sc.high)), n)


def build_instance(cfg: ProblemConfig, base: Path = Path(".")) -> Instance:
    kc = cfg.kernel
    points = None
    n_base = 0
    if cfg.geometry is not None:
        g = cfg.geometry
        if g.shape is not None:
            ps = sample_shape(g.shape, g.N, cfg.seed, random=g.random, min_separation=g.min_separation)
            pts = ps.points
            sep = ps.min_separation
        else:
            pts = np.asarray(g.points, dtype=float) if g.points is not None else _load_points(base / g.points_file)
            sep = g.min_separation
        n_base = len(pts)
        if g.extra_points:
            pts = np.vstack([pts, np.asarray(g.extra_points, dtype=float)])
        points = PointSet(pts, min_separation=sep)

    if kc.kind == "explicit":
        M = np.asarray(kc.matrix, dtype=float) if kc.matrix is not None else load_explicit_matrix(base / kc.matrix_file)
        spec = KernelSpec(kind="explicit", matrix=M, diagonal=kc.diagonal,
                          diagonal_values=None if kc.diagonal_values is None else tuple(kc.diagonal_values))
        if points is None:
            n_base = M.shape[0]
    else:
        c_reg = kc.c_reg
        if c_reg == "surface":
            c_reg = surface_cell_c_reg(kc.alpha, kc.dim)
        common = dict(diagonal=kc.diagonal, c_reg=float(c_reg),
                      diagonal_values=None if kc.diagonal_values is None else tuple(kc.diagonal_values))
        if kc.kind == "riesz":
            spec = KernelSpec.riesz(kc.alpha, kc.dim, **common)
        else:
            spec = KernelSpec.logarithmic(margin=kc.margin, **common)
    K = assemble_matrix(points, spec)
    n = K.size

    A = _select(cfg.set, n, n_base, points)
    fc = cfg.field
    if fc.form == "zero":
        f = ExternalField.zero()
    elif fc.form == "minus-potential":
        f = ExternalField.minus_potential(_measure(fc.zeta, n, points))
    else:
        psi = None if fc.psi is None else np.array([math.inf if v == "inf" else v for v in fc.psi], dtype=float)
        theta = None if fc.theta is None else _measure(fc.theta, n, points)
        f = ExternalField.from_psi(psi, theta)
    return Instance(K, points, n_base, A, f)


def _require(status: str, what: str):
    if status != "converged":
        raise SolverFailure(f"{what}: solver status {status}")


def _exp_capacity(cfg, inst):
    rep = robin_capacity(inst.K, inst.A, cfg.solver.tol)
    _require(rep.status, "capacity")
    res = rep.to_dict()
    res["capacitary_gap"] = capacitary_gap(inst.K, inst.A, cfg.solver.tol)
    return res, {"frostman": rep.frostman_screen}, None


def _exp_gauss(cfg, inst):
    K, A, tol = inst.K, inst.A, cfg.solver.tol
    fv = field_values(inst.field, K)
    screens = {}
    if inst.field.form == "minus-potential":
        rep = representation_solution(K, inst.field.zeta, A, tol)
        screens = dict(rep.screens)
    else:
        rep = solve_gauss(K, fv, A, tol)
    _require(rep.status, "gauss")
    res = rep.to_dict()
    ch = verify_characterization(K, fv, A, rep.minimizer, cfg.params.characterization_tol, w_f=rep.w_f)
    res["characterization"] = ch.to_dict()
    if inst.field.form == "minus-potential" and cfg.params.battery_trials > 0:
        if all(screens.values()):
            bat = minimality_battery(K, inst.field.zeta, A, rep, cfg.params.battery_trials, cfg.seed)
            res["battery"] = bat.to_dict()
        else:
            res["battery"] = {"skipped": "maximum-principle screens failed"}
    return res, screens, None


def _exp_balayage(cfg, inst):
    K, A, tol = inst.K, inst.A, cfg.solver.tol
    mu = _measure(cfg.params.mu, K.size, inst.points) if cfg.params.mu is not None else inst.field.zeta
    Q = _select(cfg.params.super_set, K.size, inst.n_base, inst.points) if cfg.params.super_set else None
    rep = sweep(K, mu, A, tol)
    _require(rep.status, "balayage")
    props = verify_balayage_props(K, mu, A, Q, tol)
    res = rep.to_dict()
    res["properties"] = props.to_dict()
    res["unscreened_failures"] = props.failures(10 * tol)
    return res, {"frostman": rep.frostman_screen, "domination": rep.domination_screen}, None


def _chain(cfg, inst) -> ExhaustionChain:
    cc = cfg.params.chain
    n = inst.K.size
    if cc.rule == "by-coordinate":
        if inst.points is None:
            raise GeometryError("by-coordinate chains need points")
        x = inst.points.points[:, cc.axis]
        base = inst.A.mask()
        return ExhaustionChain(inst.points, tuple(IndexSet(np.flatnonzero(base & (x <= c)), n)
                                                  for c in cc.cutoffs))
    if inst.points is not None:
        return exhaustion_chain(inst.points, inst.A, cc.rule, cc.stages, seed=cfg.seed,
                                origin=cfg.params.origin)
    if cc.rule == "by-distance":
        raise GeometryError("by-distance chains need points")
    idx = inst.A.indices
    order = idx if cc.rule == "by-index" else np.random.default_rng(cfg.seed).permutation(idx)
    if cc.stages > len(idx):
        raise GeometryError(f"cannot build {cc.stages} strictly nested stages from {len(idx)} indices")
    return ExhaustionChain(None, tuple(IndexSet(order[: (j * len(idx)) // cc.stages], n)
                                       for j in range(1, cc.stages + 1)))


def _exp_exhaustion(cfg, inst):
    rep = run_exhaustion(inst.K, inst.field, _chain(cfg, inst), cfg.solver.tol)
    if rep.final is not None:
        _require(rep.final.status, "exhaustion")
    flags = rep.flags
    screens = {"all_stages": flags["screens_all_stages"]}
    return rep.to_dict(), screens, (SERIES_COLUMNS, rep.rows())


def _exp_thinness(cfg, inst):
    p = cfg.params
    rec = thinness_series(
        inst.K, inst.A, p.q, origin=p.origin,
        theta_floor=THETA_FLOOR if p.theta_floor is None else p.theta_floor,
        theta_ratio=THETA_RATIO if p.theta_ratio is None else p.theta_ratio,
        tol=cfg.solver.tol,
    )
    rows = [(k, s, c, t, ps) for k, s, c, t, ps in
            zip(rec.shells, rec.sizes, rec.capacities, rec.terms, rec.partial_sums)]
    return rec.to_dict(), {}, (("shell", "size", "cap", "term", "partial_sum"), rows)


def _exp_mass_deficiency(cfg, inst):
    p = cfg.params
    if inst.points is None:
        raise GeometryError("mass-deficiency needs points")
    x = inst.points.points[:, p.truncation_axis]
    base = inst.A.mask()
    Ts = [IndexSet(np.flatnonzero(base & (x <= L)), inst.K.size) for L in p.truncations]
    rec = mass_deficiency_experiment(inst.K, inst.field.zeta, Ts, list(p.truncations), cfg.solver.tol)
    screens = {"all_truncations": all(all(s.values()) for s in rec.screens)}
    rows = list(zip(rec.truncations, rec.sizes, rec.sweep_mass, rec.eta, rec.c_f,
                    rec.dist_minimizer_sweep, rec.representation_gap))
    cols = ("truncation", "size", "sweep_mass", "eta", "c_f", "dist_minimizer_sweep", "representation_gap")
    return rec.to_dict(), screens, (cols, rows)


_EXPERIMENTS = {
    "capacity": _exp_capacity,
    "gauss": _exp_gauss,
    "balayage": _exp_balayage,
    "exhaustion": _exp_exhaustion,
    "thinness": _exp_thinness,
    "mass-deficiency": _exp_mass_deficiency,
}


def _output_dir(cfg: ProblemConfig, base: Path) -> Path:
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    d = Path(cfg.output.dir)
    return d if d.is_absolute() else base / d


def run_config(path, *, seed: int | None = None, tol: float | None = None,
               out=None, err=None) -> int:
    """Run one config file; returns the process exit code."""
    out = out or sys.stdout
    err = err or sys.stderr
    path = Path(path)
    try:
        cfg, raw = load_config(path, seed=seed, tol=tol)
    except ConfigError as e:
        for p, m in e.problems:
            print(f"config error at {p}: {m}", file=err)
        return EXIT_CONFIG
    base = path.parent
    report = {
        "schema_version": 1,
        "package_version": __version__,
        "experiment": cfg.experiment,
        "config_sha256": config_hash(raw),
        "seed": cfg.seed,
        "tol": cfg.solver.tol,
    }
    code = EXIT_OK
    series = None
    try:
        inst = build_instance(cfg, base)
        report["kernel"] = inst.K.spec.to_dict()
        report["pd_certificate"] = inst.K.pd_certificate
        report["carrier_size"] = inst.K.size
        report["set_size"] = len(inst.A)
        report["max_iter"] = cfg.solver.max_iter
        with solver_limits(cfg.solver.max_iter):
            result, screens, series = _EXPERIMENTS[cfg.experiment](cfg, inst)
        report["status"] = "ok"
        report["screens"] = screens
        report["result"] = result
    except PositiveDefinitenessError as e:
        report.update(status="not-positive-definite", error=str(e), pivot=e.pivot, minor=e.minor)
        code = EXIT_KERNEL
    except (KernelError, GeometryError, MeasureError) as e:
        report.update(status="invalid-instance", error=str(e))
        code = EXIT_KERNEL
    except InfeasibleError as e:
        report.update(status="empty-admissible-class", error=str(e))
        code = EXIT_GATE
    except (SolverFailure, QPError) as e:
        report.update(status="solver-failure", error=str(e))
        code = EXIT_SOLVER

    name = cfg.output.name or path.stem
    outdir = _output_dir(cfg, base)
    try:
        if "json" in cfg.output.formats:
            p = write_json(report, outdir / f"{name}.json")
            print(f"wrote {p}", file=out)
        if "csv" in cfg.output.formats and series is not None:
            p = write_csv(series[0], series[1], outdir / f"{name}.csv")
            print(f"wrote {p}", file=out)
    except ReportError as e:
        print(f"error: {e}", file=err)
        return EXIT_OUTPUT
    if code != EXIT_OK:
        print(f"error: {report['status']}: {report['error']}", file=err)
    return code


def validate_config(path, *, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        cfg, _ = load_config(path)
    except ConfigError as e:
        for p, m in e.problems:
            print(f"config error at {p}: {m}", file=err)
        return EXIT_CONFIG
    print(f"ok: {cfg.experiment} config is valid", file=out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="minenergy", description="Discrete weighted minimal energy experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--tol", type=float, default=None, help="override the solver tolerance")
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run_config(args.config, seed=args.seed, tol=args.tol)
    return validate_config(args.config)


if __name__ == "__main__":
    sys.exit(main())
