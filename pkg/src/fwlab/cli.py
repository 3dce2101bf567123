"""Command-line front end: instance configs, figure presets, batch runs.

Configs are flat INI files (key = value sections) that round-trip
losslessly; batches write one trace CSV per run plus a manifest with seeds
and sha256 checksums, and re-runs are byte-identical. FW_SEED overrides
config seeds.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import configparser
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .afw import afw_run
from .analysis import rolling_rates
from .core import ConstantStep, RunTrace, parse_rule
from .difw import difw_run
from .fw import constant_rule_for_instance, fw_run
from .herding import FourierDensity, herding_run
from .objectives import InstanceSpec, generate_instance
from .regions import RegionSpec, jaggi_lower_bound

DEFAULT_SEED = 20240
PRESETS = ("nonpolytope", "wolfe", "afw-difw", "local-rate", "herding")


# ---------------------------------------------------------------------------
# Experiment configs and their INI round trip
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    id: str
    algo: str  # fw | afw | difw | herding
    rule: str  # rule label; "constant:auto" derives the step from the instance
    iters: int
    seed: int
    out_name: str
    instance: InstanceSpec | None = None
    density: str | None = None  # uniform | random:<n>:<seed> | fourier:<path>


def config_to_ini(cfg: ExperimentConfig) -> str:
    parser = configparser.ConfigParser()
    parser["run"] = {
        "id": cfg.id,
        "algo": cfg.algo,
        "rule": cfg.rule,
        "iters": str(cfg.iters),
        "seed": str(cfg.seed),
        "out": cfg.out_name,
    }
    if cfg.instance is not None:
        inst = {"location": cfg.instance.location, "seed": str(cfg.instance.seed)}
        if cfg.instance.face_rho is not None:
            inst["face_rho"] = repr(cfg.instance.face_rho)
        parser["instance"] = inst
        reg = cfg.instance.region
        region = {"kind": reg.kind, "dimension": str(reg.dimension)}
        if reg.p is not None:
            region["p"] = repr(reg.p)
        if reg.radius is not None:
            region["radius"] = repr(reg.radius)
        parser["region"] = region
    if cfg.density is not None:
        parser["herding"] = {"density": cfg.density}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def config_from_ini(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    parser.read_string(text)
    run = parser["run"]
    instance = None
    if parser.has_section("instance"):
        reg = parser["region"]
        region = RegionSpec(
            kind=reg["kind"],
            dimension=reg.getint("dimension"),
            p=reg.getfloat("p") if "p" in reg else None,
            radius=reg.getfloat("radius") if "radius" in reg else None,
        )
        inst = parser["instance"]
        instance = InstanceSpec(
            location=inst["location"],
            region=region,
            seed=inst.getint("seed"),
            face_rho=inst.getfloat("face_rho") if "face_rho" in inst else None,
        )
    density = parser["herding"]["density"] if parser.has_section("herding") else None
    cfg = ExperimentConfig(
        id=run["id"],
        algo=run["algo"],
        rule=run["rule"],
        iters=run.getint("iters"),
        seed=run.getint("seed"),
        out_name=run["out"],
        instance=instance,
        density=density,
    )
    return apply_seed_override(cfg)


def apply_seed_override(cfg: ExperimentConfig) -> ExperimentConfig:
    env = os.environ.get("FW_SEED")
    if env is None:
        return cfg
    seed = int(env)
    inst = cfg.instance.with_seed(seed) if cfg.instance is not None else None
    return replace(cfg, seed=seed, instance=inst)


def build_density(spec: str, seed: int) -> FourierDensity:
    if spec == "uniform":
        return FourierDensity.uniform()
    kind, _, arg = spec.partition(":")
    if kind == "random":
        n_str, _, seed_str = arg.partition(":")
        return FourierDensity.random(int(n_str), int(seed_str) if seed_str else seed)
    if kind == "fourier":
        rows = np.loadtxt(arg, delimiter=",", ndmin=2)
        order = np.argsort(rows[:, 0])
        return FourierDensity.from_square_coefficients(rows[order, 1], rows[order, 2])
    raise ValueError(f"unknown density spec {spec!r}")


# ---------------------------------------------------------------------------
# Running configs
# ---------------------------------------------------------------------------


def _default_x0(region) -> np.ndarray:
    x0 = np.zeros(region.dimension)
    x0[0] = getattr(region, "radius", 1.0)
    if not region.contains(x0, 1e-10):
        x0 = region.lmo(-np.ones(region.dimension))
    return x0


def run_config(cfg: ExperimentConfig, outdir: Path) -> dict:
    """Execute one config; returns its manifest row."""
    outdir = Path(outdir)
    out_path = outdir / cfg.out_name
    meta_extra = {"config_id": cfg.id, "seed": cfg.seed}

    if cfg.algo == "herding":
        density = build_density(cfg.density or "uniform", cfg.seed)
        trace = herding_run(density, parse_rule(cfg.rule), cfg.iters, metadata=meta_extra)
    else:
        objective, region = generate_instance(cfg.instance)
        x0 = _default_x0(region)
        if cfg.rule == "constant:auto":
            rule, alpha, lam = constant_rule_for_instance(objective, region)
            meta_extra.update(constant_alpha=alpha, constant_lambda=lam,
                              constant_eta=rule.eta)
        else:
            rule = parse_rule(cfg.rule)
        runner = {"fw": fw_run, "afw": afw_run, "difw": difw_run}.get(cfg.algo)
        if runner is None:
            raise ValueError(f"unknown algorithm {cfg.algo!r}")
        trace = runner(objective, region, rule, x0, cfg.iters, metadata=meta_extra)
        if isinstance(rule, ConstantStep) and "constant_lambda" in meta_extra:
            trace.metadata["lambda_certified"] = bool(
                trace.metadata.get("min_grad_norm", 0.0) >= meta_extra["constant_lambda"])

    trace.to_csv(out_path)
    _write_meta_sidecar(trace, out_path)
    return {
        "id": cfg.id,
        "algo": cfg.algo,
        "rule": cfg.rule,
        "iters": cfg.iters,
        "seed": cfg.seed,
        "file": cfg.out_name,
        "sha256": _sha256(out_path),
        "status": "ok",
    }


def _write_meta_sidecar(trace: RunTrace, out_path: Path):
    clean = {}
    for k, v in trace.metadata.items():
        if isinstance(v, (str, int, float, bool)) or v is None:
            clean[k] = v
        elif isinstance(v, (np.integer, np.floating)):
            clean[k] = v.item()
    with open(out_path.with_suffix(".meta.json"), "w") as fh:
        json.dump(clean, fh, indent=0, sort_keys=True)
        fh.write("\n")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def _run_config_safe(cfg: ExperimentConfig, outdir: str) -> dict:
    try:
        return run_config(cfg, Path(outdir))
    except Exception as exc:  # noqa: BLE001 - batch keeps partial results
        return {
            "id": cfg.id, "algo": cfg.algo, "rule": cfg.rule, "iters": cfg.iters,
            "seed": cfg.seed, "file": cfg.out_name, "sha256": "",
            "status": f"error: {exc}",
        }


def run_batch(configs, outdir, jobs: int = 1) -> int:
    """Run a batch of configs; writes traces and manifest.csv, returns exit status."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_config_safe, configs, [str(outdir)] * len(configs)))
    else:
        rows = [_run_config_safe(cfg, str(outdir)) for cfg in configs]
    _write_manifest(outdir / "manifest.csv", rows)
    failures = [r for r in rows if r["status"] != "ok"]
    for r in failures:
        print(f"[batch] {r['id']}: {r['status']}", file=sys.stderr)
    return 1 if failures else 0


def _write_manifest(path: Path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["id", "algo", "rule", "iters", "seed",
                                                "file", "sha256", "status"],
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Figure presets
# ---------------------------------------------------------------------------


def figure_preset(name: str, *, full: bool = False, iters: int | None = None,
                  dims=None, seed: int | None = None) -> list[ExperimentConfig]:
    """Config batch reproducing one of the stock experiment figures."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    if seed is None:
        seed = int(os.environ.get("FW_SEED", DEFAULT_SEED))
    budget = iters if iters is not None else (100_000 if full else 10_000)
    configs: list[ExperimentConfig] = []

    if name == "nonpolytope":
        panels = [("interior", (1.0, 2.0, 5.0)), ("boundary", (2.0, 3.0, 5.0)),
                  ("exterior", (2.0, 3.0, 5.0))]
        for li, (location, ps) in enumerate(panels):
            for pi, p in enumerate(ps):
                rules = ["linesearch", "shortstep", "openloop:1", "openloop:2", "openloop:4"]
                if location == "exterior":
                    rules += ["openloop:6", "constant:auto"]
                inst = InstanceSpec(location=location,
                                    region=RegionSpec("lp_ball", 100, p=p, radius=1.0),
                                    seed=seed + 10 * li + pi)
                for rule in rules:
                    rid = f"nonpolytope-{location}-l{p:g}-{rule.replace(':', '')}"
                    configs.append(ExperimentConfig(rid, "fw", rule, budget, inst.seed,
                                                    f"{rid}.csv", instance=inst))
    elif name == "wolfe":
        for rho in (0.25, 2.0):
            inst = InstanceSpec(location="face", region=RegionSpec("simplex", 100),
                                seed=seed, face_rho=rho)
            for rule in ("linesearch", "openloop:1", "openloop:2", "openloop:4"):
                rid = f"wolfe-rho{rho:g}-{rule.replace(':', '')}"
                configs.append(ExperimentConfig(rid, "fw", rule, budget, seed,
                                                f"{rid}.csv", instance=inst))
    elif name == "afw-difw":
        for location in ("interior", "boundary", "exterior"):
            inst = InstanceSpec(location=location, region=RegionSpec("simplex", 100), seed=seed)
            for rule in ("linesearch", "openloop:2", "openloop:4"):
                rid = f"afw-{location}-{rule.replace(':', '')}"
                configs.append(ExperimentConfig(rid, "afw", rule, budget, seed,
                                                f"{rid}.csv", instance=inst))
            for rule in ("linesearch", "openloop:2", "openloop:4", "openloop:8"):
                rid = f"difw-{location}-{rule.replace(':', '')}"
                configs.append(ExperimentConfig(rid, "difw", rule, budget, seed,
                                                f"{rid}.csv", instance=inst))
    elif name == "herding":
        herding_budget = iters if iters is not None else 1000
        for density in ("uniform", f"random:5:{seed + 777}"):
            dname = "uniform" if density == "uniform" else "fourier"
            for rule in ("linesearch", "openloop:1", "openloop:2", "openloop:4"):
                rid = f"herding-{dname}-{rule.replace(':', '')}"
                configs.append(ExperimentConfig(rid, "herding", rule, herding_budget, seed,
                                                f"{rid}.csv", density=density))
    else:  # local-rate handled by the figure command driver
        raise ValueError("local-rate preset is driven by rate_contour; use `figure local-rate`")
    return configs


LOCAL_RATE_DIMS = (10, 20, 50, 100, 200, 500, 1000)


def run_local_rate_figure(outdir: Path, *, full: bool = False, iters: int | None = None,
                          dims=None, seed: int | None = None, window: int = 100) -> int:
    from .analysis import rate_contour

    if seed is None:
        seed = int(os.environ.get("FW_SEED", DEFAULT_SEED))
    if dims is None:
        dims = list(range(2, 1001)) if full else list(LOCAL_RATE_DIMS)
    budget = iters if iters is not None else 1000
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows_manifest = []
    status = 0
    families = [("interior", InstanceSpec("interior", RegionSpec("simplex", 2), seed)),
                ("face", InstanceSpec("face", RegionSpec("simplex", 2), seed, face_rho=2.0))]
    for fname, template in families:
        rows, errors = rate_contour(template, dims, budget, window=window)
        path = outdir / f"local-rate-{fname}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["d", "t", "slope", "r2"])
            for d, t, slope, r2 in rows:
                writer.writerow([d, t, f"{slope:.16e}", f"{r2:.16e}"])
        rows_manifest.append({"id": f"local-rate-{fname}", "algo": "fw", "rule": "openloop:4",
                              "iters": budget, "seed": seed, "file": path.name,
                              "sha256": _sha256(path), "status": "ok" if not errors else
                              f"errors: {errors}"})
        if errors:
            status = 1
    _write_manifest(outdir / "manifest.csv", rows_manifest)
    return status


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_solve(args) -> int:
    text = Path(args.instance).read_text()
    parser = configparser.ConfigParser()
    parser.read_string(text)
    if parser.has_section("run"):
        cfg = config_from_ini(text)
        cfg = replace(cfg, algo=args.algo or cfg.algo, rule=args.rule or cfg.rule,
                      iters=args.iters or cfg.iters,
                      out_name=Path(args.out).name if args.out else cfg.out_name)
    else:
        reg = parser["region"]
        region = RegionSpec(kind=reg["kind"], dimension=reg.getint("dimension"),
                            p=reg.getfloat("p") if "p" in reg else None,
                            radius=reg.getfloat("radius") if "radius" in reg else None)
        inst_sec = parser["instance"]
        instance = InstanceSpec(location=inst_sec["location"], region=region,
                                seed=inst_sec.getint("seed"),
                                face_rho=inst_sec.getfloat("face_rho") if "face_rho" in inst_sec else None)
        cfg = apply_seed_override(ExperimentConfig(
            id=Path(args.out).stem, algo=args.algo, rule=args.rule, iters=args.iters,
            seed=instance.seed, out_name=Path(args.out).name, instance=instance))
    row = run_config(cfg, Path(args.out).parent if args.out else Path.cwd())
    print(f"{row['file']}  sha256={row['sha256']}")
    return 0


def _cmd_figure(args) -> int:
    if args.preset == "local-rate":
        return run_local_rate_figure(Path(args.out), full=args.full, iters=args.iters,
                                     dims=[int(d) for d in args.dims.split(",")] if args.dims else None,
                                     seed=args.seed)
    configs = figure_preset(args.preset, full=args.full, iters=args.iters, seed=args.seed)
    return run_batch(configs, Path(args.out), jobs=args.jobs)


def _cmd_rates(args) -> int:
    trace = RunTrace.from_csv(args.infile)
    slopes, r2 = rolling_rates(trace.h, args.window)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "slope", "r2"])
        for t in range(slopes.shape[0]):
            writer.writerow([t, f"{slopes[t]:.16e}", f"{r2[t]:.16e}"])
    return 0


def _cmd_herding(args) -> int:
    seed = int(os.environ.get("FW_SEED", DEFAULT_SEED))
    cfg = ExperimentConfig(id=Path(args.out).stem, algo="herding", rule=args.rule,
                           iters=args.iters, seed=seed, out_name=Path(args.out).name,
                           density=args.density)
    row = run_config(cfg, Path(args.out).parent or Path.cwd())
    print(f"{row['file']}  sha256={row['sha256']}")
    return 0


def _cmd_jaggi(args) -> int:
    rows = [(t, jaggi_lower_bound(args.d, t)) for t in range(1, args.d + 1)]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "value"])
            for t, v in rows:
                writer.writerow([t, f"{v:.16e}"])
    else:
        for t, v in rows:
            print(f"{t},{v:.16e}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fwlab",
                                     description="Projection-free solvers and rate experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one solver on an instance config")
    p_solve.add_argument("--algo", choices=["fw", "afw", "difw"], default="fw")
    p_solve.add_argument("--rule", default="openloop:4")
    p_solve.add_argument("--instance", required=True, help="instance config (INI)")
    p_solve.add_argument("--iters", type=int, default=10_000)
    p_solve.add_argument("--out", default="trace.csv")
    p_solve.set_defaults(func=_cmd_solve)

    p_fig = sub.add_parser("figure", help="run a stock experiment preset")
    p_fig.add_argument("preset", choices=PRESETS)
    p_fig.add_argument("--out", default="figures")
    p_fig.add_argument("--full", action="store_true", help="full iteration budgets")
    p_fig.add_argument("--iters", type=int, default=None, help="override iteration budget")
    p_fig.add_argument("--dims", default=None, help="comma list of dims (local-rate)")
    p_fig.add_argument("--seed", type=int, default=None)
    p_fig.add_argument("--jobs", type=int, default=1)
    p_fig.set_defaults(func=_cmd_figure)

    p_rates = sub.add_parser("rates", help="local rates of a trace CSV")
    p_rates.add_argument("--in", dest="infile", required=True)
    p_rates.add_argument("--window", type=int, default=100)
    p_rates.add_argument("--out", default="rates.csv")
    p_rates.set_defaults(func=_cmd_rates)

    p_herd = sub.add_parser("herding", help="run kernel herding")
    p_herd.add_argument("--density", default="uniform",
                        help="uniform | random:<n>:<seed> | fourier:<coeff-file>")
    p_herd.add_argument("--rule", default="openloop:1")
    p_herd.add_argument("--iters", type=int, default=1024)
    p_herd.add_argument("--out", default="herding.csv")
    p_herd.set_defaults(func=_cmd_herding)

    p_jaggi = sub.add_parser("jaggi", help="sparse-minimum brute force on the simplex")
    p_jaggi.add_argument("--d", type=int, required=True)
    p_jaggi.add_argument("--out", default=None)
    p_jaggi.set_defaults(func=_cmd_jaggi)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
