"""Command-line front end: ``nonholo {list,reduce,simulate,check,sweep}``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .algebroid import check_lie, check_skew
from .errors import NonholoError
from .integrator import drift_report, integrate
from .mechanics import State, el_field, energy
from .nonholonomic import verify_theorem_5_1
from .symmetry import SymmetryCandidate, is_symmetry, noether_charge, search_symmetries
from .systems import REGISTRY, get_system

BUILTIN_OBSERVERS = ("energy", "charges", "constraint-residual")


@dataclass
class RunConfig:
    system: str
    params: Dict[str, float] = field(default_factory=dict)
    x: Optional[List[float]] = None
    y: Optional[List[float]] = None
    h: float = 1e-3
    T: float = 1.0
    observers: Optional[List[str]] = None
    output: Optional[str] = None
    seed: int = 0

    def validate(self):
        if self.system not in REGISTRY:
            raise NonholoError(f"unknown system {self.system!r}; known: {sorted(REGISTRY)}")
        if not self.h > 0:
            raise NonholoError("h must be positive")
        if not self.T >= 0:
            raise NonholoError("T must be non-negative")
        return self


def _floats(text) -> List[float]:
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = text.strip()
    if text == "":
        return []
    return [float(v) for v in text.split(",")]


def _params(pairs) -> Dict[str, float]:
    out = {}
    for item in pairs or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise NonholoError(f"parameter override must look like name=value, got {item!r}")
        out[key.strip()] = float(val)
    return out


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def emit(args, command, config, results, passed, text_lines):
    if getattr(args, "json", False):
        payload = {"command": command, "config": config, "results": results, "pass": bool(passed)}
        print(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
    else:
        for line in text_lines:
            print(line)
    return 0 if passed else 1


# -- list ---------------------------------------------------------------------

def listing(registry=None):
    registry = REGISTRY if registry is None else registry
    return [
        {"name": name, "doc": d.doc,
         "parameters": {p: {"default": v.default, "low": v.low, "high": v.high} for p, v in d.parameters.items()}}
        for name, d in sorted(registry.items())
    ]


def cmd_list(args, registry=None):
    items = listing(registry)
    lines = ["system                 parameters (defaults)"]
    for it in items:
        params = ", ".join(f"{p}={v['default']}" for p, v in it["parameters"].items())
        lines.append(f"{it['name']:<22} {params}")
    return emit(args, "list", {}, items, True, lines)


# -- reduce -------------------------------------------------------------------

def nonzero_structure(C, tol=1e-14):
    """``{"C^c_ab": value}`` (1-based, ``a < b``) for entries above ``tol``."""
    k = C.shape[0]
    out = {}
    for a in range(k):
        for b in range(a + 1, k):
            for c in range(k):
                if abs(C[c, a, b]) > tol:
                    out[f"C^{c + 1}_{a + 1}{b + 1}"] = float(C[c, a, b])
    return out


def _base_points(system, xs):
    if xs:
        return [np.array(_floats(x)) for x in xs]
    return [np.asarray(system.default_x, dtype=float)]


def cmd_reduce(args):
    system = get_system(args.system, **_params(args.param))
    red = system.reduced
    points = _base_points(system, args.x)
    results = {"system": system.name, "params": system.params, "rank": red.rank, "points": []}
    lines = [f"reduced algebroid of {system.name} (rank {red.rank}, base dim {red.base_dim})"]
    for x in points:
        C = red.C.value(x)
        entry = {"x": x, "rho": red.rho.value(x), "sigma": red.sigma.value(x),
                 "structure": nonzero_structure(C, tol=args.zero_tol)}
        results["points"].append(entry)
        lines.append(f"x = {list(map(float, x))}")
        if red.base_dim:
            lines.append("  rho_D =")
            lines.extend("    " + " ".join(f"{v: .10g}" for v in row) for row in entry["rho"])
        if entry["structure"]:
            lines.extend(f"  {key} = {val:.12g}" for key, val in entry["structure"].items())
        else:
            lines.append("  all structure functions vanish")
    skew = check_skew(red, points, tol=1e-10)
    lie = check_lie(red, points, tol=1e-9) if skew.is_skew else None
    results["skew"] = asdict(skew)
    results["lie"] = None if lie is None else {"is_lie": lie.is_lie, "max_jacobiator": lie.max_jacobiator,
                                               "max_anchor_defect": lie.max_anchor_defect}
    lines.append(f"skew: {skew.is_skew} (max violation {skew.max_violation:.3e})")
    if lie is not None:
        lines.append(f"lie: {lie.is_lie} (jacobiator {lie.max_jacobiator:.3e}, anchor defect {lie.max_anchor_defect:.3e})")
    return emit(args, "reduce", {"system": args.system, "params": _params(args.param)}, results, True, lines)


# -- simulate -----------------------------------------------------------------

def build_observers(system, names):
    red, l, P = system.reduction
    obs = {}
    for name in names:
        if name == "energy":
            obs["energy"] = lambda s, l=l: energy(l, s)
        elif name == "charges":
            for i, cand in enumerate(search_symmetries(red, l)):
                obs[f"charge{i + 1}"] = noether_charge(l, cand)
        elif name == "constraint-residual":
            def residual(s, D=system.subbundle):
                v = D.B(s.x) @ s.y
                return float(np.linalg.norm(v - P(s.x) @ v))
            obs["constraint_residual"] = residual
        elif name in system.observers:
            obs[name] = system.observers[name]
        else:
            known = list(BUILTIN_OBSERVERS) + sorted(system.observers)
            raise NonholoError(f"unknown observer {name!r}; known: {known}")
    return obs


def initial_state(system, cfg: RunConfig) -> State:
    x = np.asarray(cfg.x if cfg.x is not None else system.default_x, dtype=float)
    if cfg.y is None:
        y = np.asarray(system.default_y, dtype=float)
    else:
        y = np.asarray(cfg.y, dtype=float)
    return State(x, y, 0.0)


def random_initial(system, seed) -> State:
    return system.sample_states(1, seed=seed)[0]


def run_simulation(cfg: RunConfig) -> dict:
    cfg.validate()
    system = get_system(cfg.system, **cfg.params)
    names = cfg.observers if cfg.observers is not None else ["energy", *system.observers]
    observers = build_observers(system, names)
    s0 = initial_state(system, cfg) if cfg.y != "random" else random_initial(system, cfg.seed)
    red, l, _ = system.reduction
    traj = integrate(el_field(red, l), s0, cfg.h, cfg.T, observers)
    if cfg.output:
        write_csv(cfg.output, traj, system)
    last = traj.states[-1]
    return {
        "steps": len(traj.states) - 1,
        "final": {"t": last.t, "x": last.x, "y": last.y},
        "drift": drift_report(traj),
        "output": cfg.output,
    }


def write_csv(path, traj, system):
    n = system.algebroid.base_dim
    k = system.subbundle.k
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{a + 1}" for a in range(k)] + list(traj.observers)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for idx, s in enumerate(traj.states):
            row = [_fmt(s.t)] + [_fmt(v) for v in s.x] + [_fmt(v) for v in s.y]
            row += [_fmt(traj.observers[name][idx]) for name in traj.observers]
            writer.writerow(row)


def config_from_args(args) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
    merged = {
        "system": data.get("system"),
        "params": dict(data.get("params", {})),
        "x": data.get("x", data.get("initial", {}).get("x") if isinstance(data.get("initial"), dict) else None),
        "y": data.get("y", data.get("initial", {}).get("y") if isinstance(data.get("initial"), dict) else None),
        "h": data.get("h", 1e-3),
        "T": data.get("T", 1.0),
        "observers": data.get("observers"),
        "output": data.get("output"),
        "seed": data.get("seed", 0),
    }
    if args.system is not None:
        merged["system"] = args.system
    merged["params"].update(_params(args.param))
    if args.x is not None:
        merged["x"] = _floats(args.x)
    if args.y is not None:
        merged["y"] = "random" if args.y == "random" else _floats(args.y)
    elif isinstance(merged["y"], str) and merged["y"] != "random":
        merged["y"] = _floats(merged["y"])
    if isinstance(merged["x"], str):
        merged["x"] = _floats(merged["x"])
    for key in ("h", "T", "seed", "output"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    if args.observers is not None:
        merged["observers"] = [o for o in args.observers.split(",") if o]
    if merged["system"] is None:
        raise NonholoError("no system given (use --system or a config file)")
    merged["h"] = float(merged["h"])
    merged["T"] = float(merged["T"])
    merged["seed"] = int(merged["seed"])
    return RunConfig(**merged).validate()


def cmd_simulate(args):
    cfg = config_from_args(args)
    res = run_simulation(cfg)
    lines = [f"simulated {cfg.system}: {res['steps']} steps of h={cfg.h:g} to t={res['final']['t']:.6g}"]
    if cfg.output:
        lines.append(f"wrote {cfg.output}")
    lines.extend(f"  drift[{name}] = {val:.3e}" for name, val in res["drift"].items())
    return emit(args, "simulate", asdict(cfg), res, True, lines)


# -- sweep --------------------------------------------------------------------

def _parse_sweep(spec):
    name, sep, rng = spec.partition("=")
    parts = rng.split(":")
    if not sep or len(parts) != 3:
        raise NonholoError(f"--sweep must look like name=lo:hi:n, got {spec!r}")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1:
        raise NonholoError("sweep needs at least one value")
    return name.strip(), np.linspace(lo, hi, count)


def _sweep_worker(cfg_dict):
    return run_simulation(RunConfig(**cfg_dict))


def cmd_sweep(args):
    base = config_from_args(args)
    pname, values = _parse_sweep(args.sweep)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    configs = []
    for i, v in enumerate(values):
        cfg = asdict(base)
        cfg["params"] = {**cfg["params"], pname: float(v)}
        cfg["output"] = str(outdir / f"{base.system}_{pname}_{i:03d}.csv")
        configs.append(cfg)
    if args.workers == 1:
        results = [_sweep_worker(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_worker, configs))
    runs = [{"value": float(v), **r} for v, r in zip(values, results)]
    lines = [f"sweep {pname} over {len(values)} values -> {outdir}"]
    lines.extend(f"  {pname}={r['value']:.6g}: {r['output']}" for r in runs)
    config = {**asdict(base), "sweep": args.sweep, "output_dir": str(outdir)}
    return emit(args, "sweep", config, runs, True, lines)


# -- check --------------------------------------------------------------------

def cmd_check(args):
    system = get_system(args.system, **_params(args.param))
    if not (args.theorem51 or args.jacobi or args.noether):
        raise NonholoError("check needs at least one of --theorem51, --jacobi, --noether")
    results = {}
    lines = []
    ok = True
    if args.theorem51:
        tol = args.tol if args.tol is not None else 1e-9
        rep = verify_theorem_5_1(system.algebroid, system.lagrangian, system.subbundle,
                                 system.sample_states(args.samples, seed=args.seed), tol)
        results["theorem51"] = {"max_gap": rep.max_gap, "pass": rep.passed, "samples": rep.n_samples, "tol": tol}
        ok &= rep.passed
        lines.append(f"theorem51: {'PASS' if rep.passed else 'FAIL'} max_gap={rep.max_gap:.3e} (tol {tol:g}, {rep.n_samples} states)")
    if args.jacobi:
        tol = args.tol if args.tol is not None else 1e-9
        target = system.algebroid if args.ambient else system.reduced
        pts = system.base_samples(args.points, seed=args.seed)
        skew = check_skew(target, pts, tol=tol)
        if skew.is_skew:
            rep = check_lie(target, pts, tol)
            passed = rep.is_lie
            results["jacobi"] = {"target": "ambient" if args.ambient else "reduced", "pass": passed,
                                 "max_jacobiator": rep.max_jacobiator, "max_anchor_defect": rep.max_anchor_defect,
                                 "tol": tol}
            lines.append(f"jacobi ({results['jacobi']['target']}): {'PASS' if passed else 'FAIL'} "
                         f"jacobiator={rep.max_jacobiator:.3e} anchor_defect={rep.max_anchor_defect:.3e}")
        else:
            passed = False
            results["jacobi"] = {"pass": False, "skew_violation": skew.max_violation}
            lines.append(f"jacobi: FAIL bracket is not skew (violation {skew.max_violation:.3e})")
        ok &= passed
    if args.noether:
        X_text, f_text = args.noether
        tol = args.tol if args.tol is not None else 1e-9
        red, l, _ = system.reduction
        cand = SymmetryCandidate.constant(_floats(X_text), red.base_dim, float(f_text))
        passed = is_symmetry(red, l, cand, tol=tol)
        results["noether"] = {"X": _floats(X_text), "f": float(f_text), "pass": passed, "tol": tol}
        ok &= passed
        lines.append(f"noether X=({X_text}) f={f_text}: {'PASS' if passed else 'FAIL'}")
    config = {"system": args.system, "params": _params(args.param)}
    return emit(args, "check", config, results, ok, lines)


# -- entry point --------------------------------------------------------------

def _add_system_args(p, required=True):
    p.add_argument("--system", required=required, default=None, help="registered system name")
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE", help="parameter override")
    p.add_argument("--json", action="store_true", help="machine-readable output")


def _add_run_args(p):
    p.add_argument("--config", help="JSON run config; flags override it")
    p.add_argument("--x", help="initial base point, comma separated")
    p.add_argument("--y", help="initial fiber vector, comma separated, or 'random'")
    p.add_argument("--h", type=float, default=None, help="step size")
    p.add_argument("--T", type=float, default=None, help="horizon")
    p.add_argument("--observers", default=None, help="comma list: energy,charges,constraint-residual,<system observers>")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonholo", description="Nonholonomic mechanics on algebroids")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="list registered systems")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("reduce", help="print the reduced algebroid")
    _add_system_args(p)
    p.add_argument("--x", action="append", help="base point (repeatable)")
    p.add_argument("--zero-tol", type=float, default=1e-14)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("simulate", help="integrate the reduced dynamics and write CSV")
    _add_system_args(p, required=False)
    _add_run_args(p)
    p.add_argument("--output", default=None, help="CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="simulate over a parameter range concurrently")
    _add_system_args(p, required=False)
    _add_run_args(p)
    p.add_argument("--sweep", required=True, metavar="NAME=LO:HI:N")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep, output=None)

    p = sub.add_parser("check", help="run verification checks; exit 0 iff all pass")
    _add_system_args(p)
    p.add_argument("--theorem51", action="store_true", help="direct vs reduced dynamics")
    p.add_argument("--jacobi", action="store_true", help="Lie algebroid check of the reduced bracket")
    p.add_argument("--ambient", action="store_true", help="run --jacobi on the ambient algebroid")
    p.add_argument("--noether", nargs=2, metavar=("X", "F"), help="constant section X (comma list) and constant gauge F")
    p.add_argument("--samples", type=int, default=100, help="states for --theorem51")
    p.add_argument("--points", type=int, default=5, help="base points for --jacobi")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NonholoError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
