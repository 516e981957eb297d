"""Command line entry point.

    morseflow run --config run.json [--threads N] [--seed S]
    morseflow demo square_index --out out/ [--threads N] [--seed S]

Exit status: 0 success, 2 invalid configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .assembly import AssemblyError
from .config import DEMOS, RunConfig, demo_config
from .eigen import EigenError
from .flow import FlowError, GridPolicy, Tolerances, run_sweep
from .operators import OperatorError, cmc_cylinder_stability, make_operator
from .plot import sweep_svg
from .surface import SurfaceError, build_surface, morse_function, stretch_metric
from .trace_lab import TraceError, decay_experiment, halving, make_triple

logger = logging.getLogger("morseflow")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _surface(cfg):
    s = build_surface(cfg.kind, cfg.resolution, cfg.dimensions)
    if cfg.stretch is not None:
        s = stretch_metric(s, cfg.stretch.band_width, cfg.stretch.strength)
    return s


def _operator(cfg, surface):
    if cfg.kind == "cmc_cylinder_stability":
        if cfg.radius is None:
            raise ConfigError("operator.radius is required for cmc_cylinder_stability")
        return cmc_cylinder_stability(cfg.radius, surface, cfg.constraint)
    return make_operator(cfg.kind, surface, c0=cfg.c0, a_field=cfg.a, c_field=cfg.c, constraint=cfg.constraint)


def _base_point(cfg, surface):
    if cfg.p0 is None:
        lo, hi = surface.positions.min(axis=0), surface.positions.max(axis=0)
        return surface.nearest_vertex(0.5 * (lo + hi))
    if cfg.p0.vertex is not None:
        if cfg.p0.vertex >= surface.vertex_count:
            raise ConfigError(f"p0.vertex out of range (vertex_count={surface.vertex_count})")
        return cfg.p0.vertex
    return surface.nearest_vertex(np.asarray(cfg.p0.point, dtype=np.float64))


def _scenario(cfg):
    surface = _surface(cfg.surface)
    p0 = _base_point(cfg, surface)
    h, catalog = morse_function(surface, p0, cfg.perturbation_scale, cfg.seed)
    return surface, h, catalog


def run_sweep_scenario(cfg, out):
    surface, h, catalog = _scenario(cfg)
    spec = _operator(cfg.operator, surface)
    s, tol = cfg.sweep, cfg.tolerances
    hmax = float(h.values.max())
    if s.t_end is not None and s.t_end > hmax * (1 + 1e-6) + 1e-12:
        raise ConfigError(f"sweep.t_end exceeds max(h) = {hmax!r}")
    report = run_sweep(
        surface, h, catalog, spec, s.k,
        t_range=(s.t_start, s.t_end),
        grid=GridPolicy(s.base, s.refine_depth),
        tolerances=Tolerances(tol.null_tol, tol.mono_tol, tol.eig_tol),
        seed=cfg.seed,
        threads=cfg.threads,
    )
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "samples.csv").write_text(report.to_csv())
    (out / "lambda_vs_t.svg").write_text(sweep_svg(report))
    print(f"index_direct={report.index_direct} index_summed={report.index_summed} "
          f"samples={len(report.samples)} monotonicity_violations={len(report.monotonicity_violations)}")
    for flag in report.flags:
        print(f"flag: {flag}")
    if not all(x.converged for x in report.samples):
        return EXIT_NUMERICAL
    return EXIT_OK


def run_trace_scenario(cfg, out):
    t = cfg.trace
    triple = make_triple(t.case, t.n, t.L0, t.r_resolution)
    x, u = triple.x, triple.u_graph
    funcs = {
        "zero_trace": lambda xx, r: r - np.interp(xx, x, u),
        "one": lambda xx, r: np.ones(np.broadcast(xx, r).shape),
        "zero": lambda xx, r: np.zeros(np.broadcast(xx, r).shape),
    }
    table = decay_experiment(triple, funcs[t.f], halving(t.delta0, t.halvings))
    out.mkdir(parents=True, exist_ok=True)
    (out / "decay.csv").write_text(table.to_csv())
    for row in table.rows:
        print(f"delta={row.delta:.6g} norm={row.norm:.6g} sup|Deta|^2 delta^2={row.sup_grad_eta_sq_times_delta_sq:.6g}")
    return EXIT_OK


def run_mesh_info(cfg, out):
    surface, h, catalog = _scenario(cfg)
    print(f"vertices={surface.vertex_count} triangles={surface.triangle_count} edges={surface.edge_count} "
          f"euler_characteristic={surface.euler_characteristic}")
    print(f"base_point={catalog.base_point} alternating_sum={catalog.alternating_sum}")
    for e in catalog:
        print(f"{e.kind:8s} vertex={e.vertex:6d} value={e.value:.10g} index={e.index} multiplicity={e.multiplicity}")
    return EXIT_OK


def run(cfg: RunConfig, out=None):
    """Execute ``cfg``; returns the exit status."""
    out = Path(out if out is not None else cfg.output)
    handler = {"sweep": run_sweep_scenario, "trace": run_trace_scenario, "mesh_info": run_mesh_info}[cfg.scenario]
    try:
        return handler(cfg, out)
    except (ConfigError, SurfaceError, OperatorError, TraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FlowError, EigenError, AssemblyError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _load(path, overrides):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data.update(overrides)
    return RunConfig.model_validate(data)


def _format_validation(exc):
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return "invalid configuration:\n" + "\n".join(lines)


def build_parser():
    parser = argparse.ArgumentParser(prog="morseflow", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="run a JSON configuration")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="override the output directory")
    p_demo = sub.add_parser("demo", parents=[common], help="run a bundled scenario")
    p_demo.add_argument("name", choices=sorted(DEMOS))
    p_demo.add_argument("--out", default="out")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        if args.command == "run":
            cfg = _load(args.config, overrides)
            out = args.out
        else:
            cfg = demo_config(args.name, args.out).model_copy(update=overrides)
            cfg = RunConfig.model_validate(cfg.model_dump())
            out = args.out
    except ValidationError as exc:
        print(_format_validation(exc), file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
