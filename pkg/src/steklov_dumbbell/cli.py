"""Command-line front end.

Every command reads an optional JSON config (``--config``), applies
``--set key=value`` overrides, validates the result against the command's
known keys, runs, and writes its outputs plus ``manifest.json`` to ``--out``.

Exit codes: 0 success, 2 invalid config or input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, asymptotics, counterexample, fem, geometry, limit1d, meshgen
from .errors import NumericalError, SteklovError, ValidationError
from .geometry import DumbbellSpec, TubeProfile
from .linalg import DEFAULT_SETTINGS

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

SQRT_PI2 = 2 * math.sqrt(math.pi)
UNIT_AREA_R = 1 / math.sqrt(math.pi)

SETTINGS_KEYS = {"cg_tol", "jacobi_tol", "jacobi_max_sweeps", "pivot_tol", "eig_backend"}

DEFAULTS = {
    "limit": {"problem": "ep1", "rho": 1.0, "L": 12.0, "P1": SQRT_PI2, "P2": SQRT_PI2, "N": 4096, "k": 5,
              "dim": 2, "eps": None, "w_b": None, "convention": "paper"},
    "fem": {"domain": "dumbbell", "radius": 1.0, "r1": UNIT_AREA_R, "r2": UNIT_AREA_R, "L": 4.0, "rho": 1.0,
            "eps": 0.1, "h": 0.05, "n_y": 4, "k": 6, "neumann": True, "traces": False, "n_samples": 128},
    "sweep": {"r1": UNIT_AREA_R, "r2": UNIT_AREA_R, "L": 4.0, "rho": 1.0, "eps_list": [0.4, 0.2, 0.1, 0.05],
              "k_max": 3, "h": None, "n_y": 4, "n_samples": 128},
    "counterexample": {"L": 12.0, "fem": False, "eps": list(counterexample.PROBE_EPS), "h": 0.15, "n_y": 4},
    "mesh": {"domain": "dumbbell", "radius": 1.0, "r1": UNIT_AREA_R, "r2": UNIT_AREA_R, "L": 4.0, "rho": 1.0,
             "eps": 0.1, "h": 0.05, "n_y": 4},
}


class ConfigError(ValidationError):
    pass


def _g(v):
    return format(float(v), ".17g")


def _values_csv(values, first=0, header=("k", "value")):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for k, v in enumerate(values, start=first):
        w.writerow([k, _g(v)])
    return buf.getvalue()


def _dump(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def resolve_config(command, raw: dict, overrides=()):
    """Merge defaults, file config and ``key=value`` overrides; unknown keys are rejected."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = dict(DEFAULTS[command])
    allowed = set(cfg) | SETTINGS_KEYS | {"seed"}
    for source in (raw, dict(_parse_override(o) for o in overrides)):
        unknown = sorted(set(source) - allowed)
        if unknown:
            raise ConfigError(f"unknown config keys for '{command}': {', '.join(unknown)}")
        cfg.update(source)
    return cfg


def _parse_override(text):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _number(cfg, key, positive=False, integer=False):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key} must be a finite number")
    if integer and int(v) != v:
        raise ConfigError(f"{key} must be an integer")
    if positive and v <= 0:
        raise ConfigError(f"{key} must be positive")
    return int(v) if integer else float(v)


def _profile(cfg, L):
    rho = cfg["rho"]
    if isinstance(rho, (int, float)) and not isinstance(rho, bool):
        return TubeProfile.constant(rho, L)
    if isinstance(rho, dict):
        try:
            return TubeProfile.from_dict(rho, L)
        except (KeyError, IndexError, TypeError) as exc:
            raise ConfigError(f"malformed rho: {exc}") from exc
    raise ConfigError("rho must be a number or {kind, params}")


def _settings(cfg):
    return DEFAULT_SETTINGS.updated(**{k: cfg[k] for k in SETTINGS_KEYS if k in cfg})


def _dumbbell_spec(cfg, h):
    L = _number(cfg, "L", positive=True)
    r1, r2 = _number(cfg, "r1", positive=True), _number(cfg, "r2", positive=True)
    n_arc = max(16, math.ceil(2 * math.pi * min(r1, r2) / h))
    return DumbbellSpec(r1, r2, L, _profile(cfg, L), _number(cfg, "eps", positive=True), n_arc=n_arc).validate()


def _build_mesh(cfg):
    h = _number(cfg, "h", positive=True)
    domain = cfg["domain"]
    if domain == "disk":
        return meshgen.mesh_disk(_number(cfg, "radius", positive=True), h), None
    if domain == "square":
        n = max(2, round(1 / h))
        return meshgen.mesh_polygon_grid(0.0, 1.0, 0.0, 1.0, n, n), None
    if domain == "dumbbell":
        geom = geometry.make_dumbbell(_dumbbell_spec(cfg, h))
        return meshgen.mesh_dumbbell(geom, h, _number(cfg, "n_y", integer=True)), geom
    raise ConfigError(f"unknown domain {domain!r} (disk, square or dumbbell)")


def cmd_limit(cfg, ctx):
    problem = cfg["problem"]
    k = _number(cfg, "k", positive=True, integer=True)
    L = _number(cfg, "L", positive=True)
    P1, P2 = _number(cfg, "P1", positive=True), _number(cfg, "P2", positive=True)
    if problem == "roots":
        w = limit1d.transcendental_roots(L, P1, P2, k)
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["k", "w", "w_squared"])
        for i, v in enumerate(w, start=1):
            wr.writerow([i, _g(v), _g(v * v)])
        ctx.write("roots.csv", buf.getvalue())
        ctx.write("roots.json", _dump({"L": L, "P1": P1, "P2": P2, "w": [float(v) for v in w]}))
        return
    dim = _number(cfg, "dim", integer=True)
    profile = _profile(cfg, L)
    N = _number(cfg, "N", positive=True, integer=True)
    if problem == "ep4":
        p = limit1d.Limit1DProblem.ep4(profile, L, dim, P1, P2, _number(cfg, "eps", positive=True),
                                       convention=cfg["convention"])
    elif problem in ("ep1", "ep3", "ep2"):
        p = limit1d.Limit1DProblem(profile, L, dim=dim, P1=P1, P2=P2, w_b=cfg["w_b"], convention=cfg["convention"])
    else:
        raise ConfigError(f"unknown problem {problem!r} (ep1, ep2, ep3, ep4 or roots)")
    if problem == "ep2":
        p.validate()
        closed = limit1d.sigma1_closed_form(p)
        oracle = limit1d.sigma1_determinant_oracle(p)
        ctx.write("spectrum.csv", _values_csv([closed], first=1))
        ctx.write("spectrum.json", _dump({"problem": "ep2", "sigma1": closed, "sigma1_oracle": oracle}))
        return
    spec = limit1d.solve_dirichlet_weighted(p, N, k) if problem == "ep3" else limit1d.solve_dynamic_bc(p, N, k)
    ctx.write("spectrum.csv", spec.to_csv())
    ctx.write("spectrum.json", spec.to_json() + "\n")


def cmd_fem(cfg, ctx):
    k = _number(cfg, "k", integer=True)
    if k < 1:
        raise ConfigError("k must be at least 1")
    settings = _settings(cfg)
    mesh, _ = _build_mesh(cfg)
    system = fem.assemble(mesh)
    res = fem.solve_steklov(system, k, settings)
    ctx.write("mesh.json", mesh.to_json() + "\n")
    ctx.write("spectrum.csv", _values_csv(res.values))
    out = {"steklov": [float(v) for v in res.values], "n_nodes": mesh.n_nodes,
           "area": mesh.area(), "perimeter": float(np.sum(mesh.edge_lengths()))}
    if cfg["neumann"]:
        neu = fem.solve_neumann(system, k, settings)
        out["neumann"] = [float(v) for v in neu.values]
        ctx.write("neumann.csv", _values_csv(neu.values, first=1))
    ctx.write("spectrum.json", _dump(out))
    if cfg["traces"]:
        if mesh.tube_grid is None:
            raise ConfigError("traces need a dumbbell mesh")
        n = _number(cfg, "n_samples", positive=True, integer=True)
        traces = [asymptotics.trace_tube(res, i, n).to_dict() for i in range(k + 1)]
        ctx.write("traces.json", _dump(traces))


def cmd_sweep(cfg, ctx):
    eps_list = cfg["eps_list"]
    if not isinstance(eps_list, list) or not eps_list:
        raise ConfigError("eps_list must be a non-empty list")
    eps_list = [float(e) for e in eps_list]
    k_max = _number(cfg, "k_max", integer=True)
    if k_max < 0:
        raise ConfigError("k_max must be non-negative")
    if k_max >= 1 and len(eps_list) < 3:
        raise ConfigError("the rate fit needs at least 3 eps values")
    base = {**cfg, "eps": eps_list[0]}
    h = cfg["h"]
    spec = _dumbbell_spec(base, 0.1 if h is None else _number(cfg, "h", positive=True))
    h_rule = None if h is None else (lambda e, h=float(h): h)
    rep = asymptotics.sweep(spec, eps_list, k_max, h_rule, n_y=_number(cfg, "n_y", integer=True),
                            settings=_settings(cfg), threads=ctx.threads,
                            n_samples=_number(cfg, "n_samples", positive=True, integer=True))
    ctx.write("sweep.csv", rep.to_csv())
    ctx.write("sweep.json", rep.to_json() + "\n")
    ctx.write("plot_data.csv", rep.plot_data_csv())
    if rep.aborted:
        raise NumericalError(f"sweep aborted: {rep.error}")


def cmd_counterexample(cfg, ctx):
    L = _number(cfg, "L", positive=True)
    if cfg["fem"]:
        eps = cfg["eps"] if isinstance(cfg["eps"], list) else [cfg["eps"]]
        rep = counterexample.probe(L, _number(cfg, "h", positive=True), [float(e) for e in eps],
                                   _number(cfg, "n_y", integer=True), _settings(cfg))
    else:
        rep = counterexample.check_limit_inequality(L)
    ctx.write("counterexample.json", rep.to_json() + "\n")
    ctx.write("summary.txt", rep.summary())


def cmd_mesh(cfg, ctx):
    mesh, geom = _build_mesh(cfg)
    ctx.write("mesh.json", mesh.to_json() + "\n")
    if geom is not None:
        ctx.write("geometry.json", geom.to_json() + "\n")
    q = meshgen.mesh_quality(mesh)
    ctx.write("quality.json", _dump({"min_angle": q.min_angle, "max_aspect": q.max_aspect,
                                     "n_nodes": q.n_nodes, "n_tris": q.n_tris}))


COMMANDS = {"limit": cmd_limit, "fem": cmd_fem, "sweep": cmd_sweep,
            "counterexample": cmd_counterexample, "mesh": cmd_mesh}


class _Context:
    """Single writer for all output files, so the order of writes is fixed."""

    def __init__(self, out: Path, threads: int):
        self.out = out
        self.threads = threads
        self.files = []

    def write(self, name, text):
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(text, encoding="utf-8")
        self.files.append(name)


def build_parser():
    parser = argparse.ArgumentParser(prog="steklov-dumbbell", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads for independent solves")
    common.add_argument("--seed", type=int, default=None, help="seed recorded in the manifest (unsigned 64-bit)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (value parsed as JSON when possible)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} pipeline")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("threads must be at least 1")
        raw = {}
        if args.config is not None:
            try:
                raw = json.loads(args.config.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        cfg = resolve_config(args.command, raw, args.overrides)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        cfg["seed"] = seed
        ctx = _Context(args.out, args.threads)
        COMMANDS[args.command](cfg, ctx)
        ctx.write("manifest.json", _dump({"command": args.command, "config": cfg, "seed": seed,
                                          "threads": args.threads, "version": __version__,
                                          "files": ctx.files}))
    except (ValidationError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, SteklovError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
