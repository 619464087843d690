"""Experiment command line.

    choquet <subcommand> [--config FILE.json] [--out DIR] [--seed N] [--set KEY=VALUE ...]

Each subcommand reads a flat JSON object of settings (defaults below, any
key may be overridden by the file or by ``--set``), runs, and writes
``log.csv`` and ``result.json`` under ``--out``; generative runs also write
``samples.csv`` and ``samples.svg``.  Exit status: 0 on success, 1 on a
configuration or usage error, 2 when the run itself fails.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import net as netmod
from .estimators import CriticConfig, estimate_ct, estimate_vdc
from .measures import (
    EmpiricalMeasure,
    energy_distance,
    eight_gaussians,
    from_csv,
    latent_gaussian,
    moments,
    point_cloud,
    swiss_roll,
    to_csv,
)
from .net import ConstraintProfile, NetShape
from .oracle import BumpSpec, analytic_same_mean, analytic_same_variance, lp_vdc_discrete
from .train import (
    GanConfig,
    PortfolioConfig,
    TrainLog,
    rate_experiment,
    train_ct_gan,
    train_dominance_gan,
    train_portfolio,
    train_wgan,
)


class ConfigError(Exception):
    pass


DEFAULTS = {
    "portfolio": {
        "lam": 1.0, "z_init": 1.0, "z_low": 1.0, "z_high": 2.0, "lr_z": 1e-3, "lr_critic": 1e-3,
        "batch": 512, "steps": 5000, "critic_steps": 1, "hidden": 32, "depth": 3, "k": 4, "C": 1.0,
    },
    "ct-gan": {
        "target": "swiss_roll", "target_csv": None, "epochs": 1500, "critic_epochs": 5,
        "lr_gen": 2e-4, "lr_critic": 1e-2, "batch": 512, "critic_hidden": 32, "critic_depth": 5,
        "critic_k": 2, "C": 1.0, "eval_samples": 8192,
    },
    "dominance-gan": {
        "target": "eight_gaussians", "target_csv": None, "baseline_epochs": 100, "epochs": 1000,
        "critic_epochs": 5, "lam": 10.0, "lam_gp": 10.0, "lam_reg": 0.0, "gp_mode": "clip",
        "lr_gen": 5e-4, "lr_disc": 1e-3, "lr_critic": 1e-2, "batch": 512, "critic_hidden": 8,
        "critic_depth": 3, "critic_k": 4, "C": 1.0, "eval_samples": 32768, "vdc_batch": 4096,
        "warm_start": True,
    },
    "rates": {
        "d": 2, "n_grid": [64, 128, 256, 512, 1024, 2048, 4096], "trials": 5,
        "reference_size": 32768, "hidden": 8, "depth": 3, "k": 4, "lr": 3e-2, "steps": 1000,
        "batch": 512,
    },
    "oracle-check": {"case": "same_variance", "a": 0.3, "C": 1.0, "grid_points": 65537},
    "vdc": {
        "plus": None, "minus": None, "C": 1.0, "hidden": 8, "depth": 3, "k": 4, "lr": 3e-2,
        "steps": 1000, "batch": None, "ct": False, "exact": True,
    },
}

REQUIRED = {"vdc": ("plus", "minus")}
# Numeric settings that also accept null (meaning "off" / full batch).
NULLABLE = {"rates": ("batch",), "dominance-gan": ("vdc_batch",)}

SVG_SIZE = 600
SVG_MARGIN = 0.05
SVG_COLORS = ("#1f77b4", "#d62728")


# -- SVG ----------------------------------------------------------------------

def svg_transform(points: np.ndarray):
    """Affine data-to-viewport map shared by ``emit_svg_scatter``.

    Each axis spans the joint data range widened by 5% on both sides (a
    zero range becomes a unit interval centered on the value); ``x`` maps
    left to right onto ``[0, 600]`` and ``y`` bottom to top.
    """
    lo, hi = points.min(axis=0), points.max(axis=0)
    span = hi - lo
    pad = np.where(span > 0, SVG_MARGIN * span, 0.5)
    lo, hi = lo - pad, hi + pad

    def apply(P):
        u = (P - lo) / (hi - lo) * SVG_SIZE
        return np.stack([u[:, 0], SVG_SIZE - u[:, 1]], axis=1)

    return apply


def emit_svg_scatter(points: EmpiricalMeasure, overlay: EmpiricalMeasure | None, path) -> None:
    """Scatter ``points`` (blue) and optional ``overlay`` (red) into a 600x600 SVG."""
    sets = [points] + ([overlay] if overlay is not None else [])
    if any(m.d != 2 for m in sets):
        raise ValueError("SVG scatter needs 2D points")
    apply = svg_transform(np.vstack([m.points for m in sets]))
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" '
        f'viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">',
        f'<rect x="0" y="0" width="{SVG_SIZE}" height="{SVG_SIZE}" fill="white"/>',
    ]
    for m, color in zip(sets, SVG_COLORS):
        lines.append(f'<g fill="{color}" fill-opacity="0.6">')
        for x, y in apply(m.points):
            lines.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="1.5"/>')
        lines.append("</g>")
    lines.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# -- configuration --------------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(sub: str, path, overrides, seed) -> dict:
    cfg = dict(DEFAULTS[sub])
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        cfg.update(doc)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        cfg[key.strip()] = _parse_value(val)
    unknown = sorted(set(cfg) - set(DEFAULTS[sub]) - {"seed"})
    if unknown:
        raise ConfigError(f"unknown config keys for {sub}: {', '.join(unknown)}")
    for key, default in DEFAULTS[sub].items():
        v = cfg[key]
        if v is None and key in NULLABLE.get(sub, ()):
            continue
        if isinstance(default, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"{key} must be true or false, got {v!r}")
        elif isinstance(default, (int, float)):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{key} must be a number, got {v!r}")
    missing = [k for k in REQUIRED.get(sub, ()) if cfg.get(k) is None]
    if missing:
        raise ConfigError(f"missing config keys for {sub}: {', '.join(missing)}")
    if seed is not None:
        cfg["seed"] = seed
    cfg.setdefault("seed", 0)
    return cfg


def _profile(C, mode="input_convex"):
    return ConstraintProfile.hard(float(C), mode)


def _target(cfg, seed):
    if cfg.get("target_csv"):
        return point_cloud(cfg["target_csv"], seed)
    if cfg["target"] == "swiss_roll":
        return swiss_roll(seed=seed)
    if cfg["target"] == "eight_gaussians":
        return eight_gaussians(seed=seed)
    raise ConfigError(f"unknown target {cfg['target']!r}; use swiss_roll, eight_gaussians or target_csv")


def _build(fn, *args, **kw):
    """Construct a config object, reporting invalid values as configuration errors."""
    try:
        return fn(*args, **kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


# -- subcommands ------------------------------------------------------------------

def run_portfolio(cfg, out: Path) -> dict:
    pc = _build(
        PortfolioConfig, lam=float(cfg["lam"]), z_init=float(cfg["z_init"]),
        z_bounds=(float(cfg["z_low"]), float(cfg["z_high"])), lr_z=float(cfg["lr_z"]),
        lr_critic=float(cfg["lr_critic"]), batch=int(cfg["batch"]), steps=int(cfg["steps"]),
        critic_steps=int(cfg["critic_steps"]),
        critic_shape=_build(NetShape.uniform, 1, int(cfg["hidden"]), int(cfg["depth"]), int(cfg["k"])),
        critic_profile=_profile(cfg["C"], "input_convex_decreasing"), seed=int(cfg["seed"]),
    )
    res, log = train_portfolio(pc)
    log.to_csv(out / "log.csv")
    netmod.save(res.critic, out / "critic.json")
    return {"z_final": res.z, "mean_return": res.mean_return,
            "benchmark_mean": res.benchmark_mean, "final_vdc": res.final_vdc}


def _gan_config(cfg, **extra) -> GanConfig:
    shape = _build(NetShape.uniform, 2, int(cfg["critic_hidden"]), int(cfg["critic_depth"]),
                   int(cfg["critic_k"]))
    return _build(
        GanConfig, critic_shape=shape, critic_profile=_profile(cfg["C"]),
        lr_gen=float(cfg["lr_gen"]), lr_critic=float(cfg["lr_critic"]), epochs=int(cfg["epochs"]),
        critic_epochs=int(cfg["critic_epochs"]), batch=int(cfg["batch"]),
        eval_samples=int(cfg["eval_samples"]), seed=int(cfg["seed"]), **extra,
    )


def _eval_sets(gc: GanConfig, target_seed_sampler, seed: int):
    n = gc.eval_samples
    ref = EmpiricalMeasure.uniform(target_seed_sampler.draw(n))
    Z = latent_gaussian(gc.latent, seed + 1).draw(n)
    return ref, Z


def run_ct_gan(cfg, out: Path) -> dict:
    gc = _gan_config(cfg)
    seed = int(cfg["seed"])
    target = _target(cfg, seed)
    if target.d != 2:
        raise ConfigError("ct-gan runs on 2D targets")
    gen0 = gc.initial_generator()
    gen, log = train_ct_gan(target, gc)
    ref, Z = _eval_sets(gc, _target(cfg, seed + 1000), seed)
    ec = CriticConfig.default(2, profile=_profile(cfg["C"]), seed=seed)
    before = EmpiricalMeasure.uniform(gen0(Z))
    after = EmpiricalMeasure.uniform(gen(Z))
    ct0 = estimate_ct(before, ref, ec).value
    ct1 = estimate_ct(after, ref, ec).value
    log.to_csv(out / "log.csv")
    to_csv(after, out / "samples.csv")
    emit_svg_scatter(ref, after, out / "samples.svg")
    return {"ct_init": ct0, "ct_final": ct1, "ct_ratio": ct1 / ct0 if ct0 > 0 else float("nan"),
            "energy_init": energy_distance(before, ref), "energy_final": energy_distance(after, ref)}


def run_dominance_gan(cfg, out: Path) -> dict:
    extra = dict(lam=float(cfg["lam"]), lam_gp=float(cfg["lam_gp"]), lam_reg=float(cfg["lam_reg"]),
                 gp_mode=cfg["gp_mode"], lr_disc=float(cfg["lr_disc"]),
                 vdc_batch=None if cfg["vdc_batch"] is None else int(cfg["vdc_batch"]))
    gc = _gan_config(cfg, **extra)
    seed = int(cfg["seed"])
    target = _target(cfg, seed)
    if target.d != 2:
        raise ConfigError("dominance-gan runs on 2D targets")
    base_cfg = _build(replace, gc, epochs=int(cfg["baseline_epochs"]), seed=seed + 1)
    baseline, _ = train_wgan(_target(cfg, seed + 1), base_cfg)
    start = baseline.copy() if cfg["warm_start"] else None
    gen, log = train_dominance_gan(target, baseline, gc, generator=start)
    ref, Z = _eval_sets(gc, _target(cfg, seed + 1000), seed)
    G = EmpiricalMeasure.uniform(gen(Z))
    B = EmpiricalMeasure.uniform(baseline(Z))
    vdc = estimate_vdc(G, B, CriticConfig.default(2, profile=_profile(cfg["C"]), seed=seed)).value
    log.to_csv(out / "log.csv")
    to_csv(G, out / "samples.csv")
    emit_svg_scatter(ref, G, out / "samples.svg")
    return {"vdc_vs_baseline": vdc, "second_moment": moments(G)[1],
            "second_moment_baseline": moments(B)[1], "energy": energy_distance(G, ref),
            "energy_baseline": energy_distance(B, ref)}


def run_rates(cfg, out: Path) -> dict:
    shape = _build(NetShape.uniform, int(cfg["d"]), int(cfg["hidden"]), int(cfg["depth"]), int(cfg["k"]))
    batch = None if cfg["batch"] is None else int(cfg["batch"])
    critic = _build(CriticConfig, shape=shape, profile=_profile(1.0), lr=float(cfg["lr"]),
                    inner_steps=int(cfg["steps"]), batch_size=batch)
    try:
        table = rate_experiment(shape, cfg["n_grid"], int(cfg["trials"]), int(cfg["seed"]),
                                int(cfg["reference_size"]), critic)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    log = TrainLog(["n", "mean", "median"])
    for n, mean, med in zip(table.n, table.mean, table.median):
        log.append(n=n, mean=mean, median=med)
    log.to_csv(out / "log.csv")
    return {"slope": table.slope}


def run_oracle_check(cfg, out: Path) -> dict:
    spec = _build(BumpSpec, grid_points=int(cfg["grid_points"]))
    a, C = float(cfg["a"]), float(cfg["C"])
    if cfg["case"] == "same_variance":
        vdc, d_ct = _build(analytic_same_variance, spec, a, C)
        scalars = {"vdc": vdc, "d_ct": d_ct}
    elif cfg["case"] == "same_mean":
        r = _build(analytic_same_mean, spec, a, C)
        scalars = {"vdc": r.vdc_pm, "dct_pm": r.dct_pm, "d_ct": r.d_ct, "degenerate": r.degenerate}
    else:
        raise ConfigError(f"unknown oracle case {cfg['case']!r}; use same_variance or same_mean")
    log = TrainLog(sorted(k for k in scalars if k != "degenerate"))
    log.append(**{k: v for k, v in scalars.items() if k != "degenerate"})
    log.to_csv(out / "log.csv")
    return scalars


def run_vdc(cfg, out: Path) -> dict:
    try:
        plus, minus = from_csv(cfg["plus"]), from_csv(cfg["minus"])
    except OSError as e:
        raise ConfigError(f"cannot read measure: {e}") from e
    if plus.d != minus.d:
        raise ConfigError(f"dimension mismatch: plus has d={plus.d}, minus has d={minus.d}")
    shape = _build(NetShape.uniform, plus.d, int(cfg["hidden"]), int(cfg["depth"]), int(cfg["k"]))
    cc = _build(CriticConfig, shape=shape, profile=_profile(cfg["C"]), lr=float(cfg["lr"]),
                inner_steps=int(cfg["steps"]), batch_size=cfg["batch"], seed=int(cfg["seed"]))
    scalars = {}
    if cfg["ct"]:
        est = estimate_ct(plus, minus, cc)
        scalars.update(ct=est.value, vdc=est.plus_minus.value, vdc_reverse=est.minus_plus.value)
        est.plus_minus.write_trace(out / "log.csv")
    else:
        est = estimate_vdc(plus, minus, cc, trace_path=out / "log.csv")
        scalars["vdc"] = est.value
    if cfg["exact"] and plus.d == 1 and len(np.unique(np.vstack([plus.points, minus.points]))) <= 64:
        lp = lp_vdc_discrete(minus, plus, float(cfg["C"]))
        scalars.update(vdc_exact=lp.value, lp_gap=lp.gap)
    return scalars


COMMANDS = {
    "portfolio": run_portfolio,
    "ct-gan": run_ct_gan,
    "dominance-gan": run_dominance_gan,
    "rates": run_rates,
    "oracle-check": run_oracle_check,
    "vdc": run_vdc,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="choquet", description="Experiments with the Choquet (convex) order.")
    p.add_argument("subcommand", choices=sorted(COMMANDS), metavar="subcommand",
                   help="one of: " + ", ".join(sorted(COMMANDS)))
    p.add_argument("--config", help="JSON file of settings")
    p.add_argument("--out", default=None, help="output directory (default: runs/<subcommand>)")
    p.add_argument("--seed", type=int, default=None, help="seed override")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting (JSON value)")
    return p


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    sub = args.subcommand
    try:
        cfg = load_config(sub, args.config, args.set, args.seed)
        out = Path(args.out if args.out is not None else Path("runs") / sub)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"cannot create output directory {out}: {e}") from e
        scalars = COMMANDS[sub](cfg, out)
    except ConfigError as e:
        print(f"choquet {sub}: config error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - any failure of the run itself
        print(f"choquet {sub}: run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    doc = {"subcommand": sub, "seed": int(cfg["seed"]),
           "scalars": {k: _jsonable(v) for k, v in scalars.items()}}
    with open(out / "result.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(doc["scalars"], sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
