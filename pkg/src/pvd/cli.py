"""Command-line interface.

One executable, `pvd`, with subcommands:

    synth            write synthetic primitive clouds
    train            train a denoiser (unconditional, or conditional with --m-fixed)
    generate         sample point clouds from a checkpoint
    complete         sample completions of a partial cloud
    encode           produce the time-T latent of a completed shape
    interpolate      decode a convex combination of two latents
    eval             set-level generation metrics (1nn / cov / mmd)
    eval-completion  completion metrics (tmd / mmd)
    diffuse-viz      dump reverse-chain snapshots for external viewers

Config precedence: command-line flags override the JSON config file, which
overrides built-in defaults; the resolved config and its hash land in the run
manifest written beside every command's outputs. Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical failure. The environment variable
PVD_THREADS caps torch's thread count (default 1, keeping runs
bit-reproducible).

Seed derivation for multi-sample commands: sample i of k uses seed*k + i, so
distinct samples never share a stream and runs stay reproducible.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import torch

from . import __version__
from . import data as dataio
from .checkpoint import load_checkpoint, restore_model, save_checkpoint
from .completion import CompletionTask, complete_many, interpolate_complete, latent_encode
from .diffusion import generate, generate_many
from .errors import DataError, NumericalError, PvdError, UsageError
from .metrics import MetricReport, coverage, mmd, one_nn_accuracy, tmd
from .pvnet import DenoiserWrap, arch_preset, init_denoiser
from .schedule import schedule_from_config
from .training import TrainConfig, train

TRAIN_DEFAULTS = {
    "arch": "desk",
    "learning_rate": 2e-4,
    "batch_size": 8,
    "total_steps": 1000,
    "seed": 0,
    "m_fixed": 0,
    "grad_clip": None,
    "checkpoint_every": 0,
    "schedule": {"kind": "linear", "T": 1000, "beta_start": 1e-4,
                 "beta_end": 0.01, "warmup_frac": 0.9},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _write_manifest(where: Path, argv, cfg: dict, seed, outputs, t0: float) -> Path:
    manifest = {
        "command": "pvd " + " ".join(argv),
        "config": cfg,
        "config_hash": _config_hash(cfg),
        "seed": seed,
        "code_version": __version__,
        "wall_time_s": round(time.monotonic() - t0, 3),
        "outputs": [str(p) for p in outputs],
    }
    if where.is_dir():
        path = where / "manifest.json"
    else:
        path = where.with_name(where.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _load_json_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise DataError(f"no such config file: {p}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"{p}: invalid JSON ({e})")
    if not isinstance(cfg, dict):
        raise DataError(f"{p}: config must be a JSON object")
    return cfg


def _resolve_train_config(file_cfg: dict, args) -> dict:
    cfg = copy.deepcopy(TRAIN_DEFAULTS)
    unknown = set(file_cfg) - set(cfg)
    if unknown:
        raise DataError(f"unknown config keys: {sorted(unknown)}")
    for key, val in file_cfg.items():
        if key == "schedule":
            bad = set(val) - {"kind", "T", "beta_start", "beta_end", "warmup_frac"}
            if bad:
                raise DataError(f"unknown schedule config keys: {sorted(bad)}")
            cfg["schedule"].update(val)
        else:
            cfg[key] = val
    flag_map = {
        "arch": args.arch, "learning_rate": args.lr, "batch_size": args.batch,
        "total_steps": args.steps, "seed": args.seed, "m_fixed": args.m_fixed,
        "grad_clip": args.grad_clip, "checkpoint_every": args.ckpt_every,
    }
    for key, val in flag_map.items():
        if val is not None:
            cfg[key] = val
    sched_map = {"kind": args.schedule, "T": args.T, "beta_start": args.beta_start,
                 "beta_end": args.beta_end, "warmup_frac": args.warmup_frac}
    for key, val in sched_map.items():
        if val is not None:
            cfg["schedule"][key] = val
    return cfg


def _load_model(ckpt_path):
    ckpt = load_checkpoint(ckpt_path)
    return restore_model(ckpt), ckpt


def _sample_seeds(base: int, k: int) -> list[int]:
    return [base * k + i for i in range(k)]


def _save_outputs(out_dir: Path, stem: str, clouds, fmt: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, c in enumerate(clouds):
        p = out_dir / f"{stem}_{i:03d}.{fmt}"
        dataio.save_cloud(p, c)
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# Subcommands

def cmd_synth(args, argv) -> int:
    t0 = time.monotonic()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    clouds = [dataio.synth_primitives(args.kind, args.n, args.seed + i)
              for i in range(args.count)]
    paths = []
    for i, c in enumerate(clouds):
        p = out / f"{args.kind}_{i:03d}.{args.format}"
        dataio.save_cloud(p, c)
        paths.append(p)
    cfg = {"kind": args.kind, "n": args.n, "count": args.count, "format": args.format}
    _write_manifest(out, argv, cfg, args.seed, paths, t0)
    return 0


def cmd_train(args, argv) -> int:
    t0 = time.monotonic()
    cfg = _resolve_train_config(_load_json_config(args.config), args)
    clouds = dataio.load_dir(args.data)
    sizes = {c.shape[0] for c in clouds}
    if len(sizes) != 1:
        raise DataError(f"training clouds must share N, got sizes {sorted(sizes)}")
    data = np.stack(clouds)
    m_fixed = int(cfg["m_fixed"])
    if not 0 <= m_fixed < data.shape[1]:
        raise UsageError(f"--m-fixed must lie in [0, N), got {m_fixed}")
    sched = schedule_from_config(cfg["schedule"])
    model = init_denoiser(arch_preset(cfg["arch"]), seed=cfg["seed"])
    tconf = TrainConfig(learning_rate=cfg["learning_rate"], batch_size=cfg["batch_size"],
                        total_steps=cfg["total_steps"], seed=cfg["seed"],
                        grad_clip=cfg["grad_clip"],
                        checkpoint_every=cfg["checkpoint_every"])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    periodic = []

    def on_step(step, loss, mdl, state):
        if tconf.checkpoint_every > 0 and step % tconf.checkpoint_every == 0:
            p = out.with_name(out.name + f".step{step:06d}")
            save_checkpoint(p, mdl, sched, step)
            periodic.append(p)

    log = train(model, data, sched, tconf, m_fixed=m_fixed, on_step=on_step)
    save_checkpoint(out, model, sched, tconf.total_steps)
    csv_path = Path(args.loss_csv) if args.loss_csv else out.with_name(out.name + ".loss.csv")
    with open(csv_path, "w") as fh:
        fh.write("step,loss,wall_time\n")
        for step, loss, wall in log:
            fh.write(f"{step},{loss:.10g},{wall:.3f}\n")
    _write_manifest(out, argv, cfg, cfg["seed"], [out, csv_path, *periodic], t0)
    print(f"trained {tconf.total_steps} steps, final loss {log[-1][1]:.6g}, "
          f"checkpoint {out}")
    return 0


def cmd_generate(args, argv) -> int:
    t0 = time.monotonic()
    model, ckpt = _load_model(args.ckpt)
    wrap = DenoiserWrap(model)
    seeds = _sample_seeds(args.seed, args.samples)
    clouds = generate_many(wrap, args.n, ckpt.sched, seeds,
                           final_noise=args.final_noise)
    out = Path(args.out)
    paths = _save_outputs(out, "sample", clouds, args.format)
    cfg = {"ckpt": str(args.ckpt), "n": args.n, "samples": args.samples,
           "final_noise": args.final_noise, "format": args.format,
           "sample_seeds": seeds}
    _write_manifest(out, argv, cfg, args.seed, paths, t0)
    return 0


def cmd_complete(args, argv) -> int:
    t0 = time.monotonic()
    model, ckpt = _load_model(args.ckpt)
    partial = dataio.load_cloud(args.partial)
    task = CompletionTask(z0=partial, n_free=args.n_free)
    wrap = DenoiserWrap(model)
    seeds = _sample_seeds(args.seed, args.samples)
    clouds = complete_many(wrap, task, ckpt.sched, seeds,
                           final_noise=args.final_noise)
    out = Path(args.out)
    paths = _save_outputs(out, "completion", clouds, args.format)
    cfg = {"ckpt": str(args.ckpt), "partial": str(args.partial), "m": task.m,
           "n_free": args.n_free, "samples": args.samples,
           "final_noise": args.final_noise, "sample_seeds": seeds}
    _write_manifest(out, argv, cfg, args.seed, paths, t0)
    return 0


def cmd_encode(args, argv) -> int:
    t0 = time.monotonic()
    ckpt = load_checkpoint(args.ckpt)
    cloud = dataio.load_cloud(args.cloud)
    eps = np.random.default_rng(args.seed).standard_normal(cloud.shape)
    latent = latent_encode(cloud, ckpt.sched, eps)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataio.save_cloud(out, latent)
    cfg = {"ckpt": str(args.ckpt), "cloud": str(args.cloud)}
    _write_manifest(out, argv, cfg, args.seed, [out], t0)
    return 0


def cmd_interpolate(args, argv) -> int:
    t0 = time.monotonic()
    if not 0.0 <= args.lam <= 1.0:
        raise UsageError(f"--lambda must lie in [0, 1], got {args.lam}")
    model, ckpt = _load_model(args.ckpt)
    latent_a = dataio.load_cloud(args.latent_a)
    latent_b = dataio.load_cloud(args.latent_b)
    z0 = dataio.load_cloud(args.partial) if args.partial else np.zeros((0, 3))
    wrap = DenoiserWrap(model)
    cloud = interpolate_complete(wrap, latent_a, latent_b, args.lam, z0,
                                 ckpt.sched, args.seed,
                                 final_noise=args.final_noise)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataio.save_cloud(out, cloud)
    cfg = {"ckpt": str(args.ckpt), "latent_a": str(args.latent_a),
           "latent_b": str(args.latent_b), "lambda": args.lam,
           "partial": str(args.partial) if args.partial else None,
           "final_noise": args.final_noise}
    _write_manifest(out, argv, cfg, args.seed, [out], t0)
    return 0


def cmd_eval(args, argv) -> int:
    t0 = time.monotonic()
    gen_set = dataio.load_dir(args.gen)
    ref_set = dataio.load_dir(args.ref)
    fns = {"1nn": one_nn_accuracy, "cov": coverage, "mmd": mmd}
    value = fns[args.metric](gen_set, ref_set, distance=args.distance)
    report = MetricReport(
        metric=args.metric, distance=args.distance.upper(), value=value,
        protocol={"gen_size": len(gen_set), "ref_size": len(ref_set),
                  "tie_break": "lowest-index", "self_match": "excluded",
                  "scale": 1.0})
    text = report.to_json()
    print(text)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
        cfg = {"gen": str(args.gen), "ref": str(args.ref),
               "metric": args.metric, "distance": args.distance}
        _write_manifest(out, argv, cfg, None, [out], t0)
    return 0


def cmd_eval_completion(args, argv) -> int:
    t0 = time.monotonic()
    completions = dataio.load_dir(args.completions)
    if args.metric == "tmd":
        value = tmd(completions, m_fixed=args.m_fixed)
        protocol = {"k": len(completions), "m_fixed": args.m_fixed,
                    "pairwise": "CD summed over unordered pairs", "scale": 1.0}
        distance = "CD"
    else:
        ref = dataio.load_cloud(args.ref)
        value = mmd(completions, [ref], distance=args.distance)
        protocol = {"k": len(completions), "ref": str(args.ref), "scale": 1.0}
        distance = args.distance.upper()
    report = MetricReport(metric=args.metric, distance=distance, value=value,
                          protocol=protocol)
    text = report.to_json()
    print(text)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
        cfg = {"completions": str(args.completions), "metric": args.metric,
               "m_fixed": args.m_fixed}
        _write_manifest(out, argv, cfg, None, [out], t0)
    return 0


def cmd_diffuse_viz(args, argv) -> int:
    t0 = time.monotonic()
    model, ckpt = _load_model(args.ckpt)
    wrap = DenoiserWrap(model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    def snap(t_level, x):
        if t_level % args.every == 0 or t_level == 0:
            p = out / f"step_{t_level:04d}.xyz"
            dataio.save_xyz(p, x, comment=f"reverse chain state at t={t_level}")
            paths.append(p)

    generate(wrap, args.n, ckpt.sched, args.seed,
             final_noise=args.final_noise, callback=snap)
    cfg = {"ckpt": str(args.ckpt), "n": args.n, "every": args.every,
           "final_noise": args.final_noise}
    _write_manifest(out, argv, cfg, args.seed, paths, t0)
    return 0


# ---------------------------------------------------------------------------
# Parser

def build_parser() -> _Parser:
    p = _Parser(prog="pvd", description="Point-voxel diffusion for 3D point clouds")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="write synthetic primitive clouds")
    sp.add_argument("--kind", required=True, choices=dataio.SHAPE_KINDS)
    sp.add_argument("--n", type=int, default=128)
    sp.add_argument("--count", type=int, default=8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=("xyz", "pvpc"), default="xyz")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_synth)

    tp = sub.add_parser("train", help="train a denoiser")
    tp.add_argument("--config", help="JSON config file")
    tp.add_argument("--data", required=True, help="directory of training clouds")
    tp.add_argument("--out", required=True, help="checkpoint output path")
    tp.add_argument("--arch", choices=("desk", "full"))
    tp.add_argument("--steps", type=int)
    tp.add_argument("--batch", type=int)
    tp.add_argument("--lr", type=float)
    tp.add_argument("--seed", type=int)
    tp.add_argument("--m-fixed", type=int, dest="m_fixed",
                    help="first M rows of every cloud are fixed partial input")
    tp.add_argument("--grad-clip", type=float, dest="grad_clip")
    tp.add_argument("--ckpt-every", type=int, dest="ckpt_every")
    tp.add_argument("--loss-csv", dest="loss_csv")
    tp.add_argument("--schedule", choices=("linear", "warmup"))
    tp.add_argument("--T", type=int, dest="T")
    tp.add_argument("--beta-start", type=float, dest="beta_start")
    tp.add_argument("--beta-end", type=float, dest="beta_end")
    tp.add_argument("--warmup-frac", type=float, dest="warmup_frac")
    tp.set_defaults(fn=cmd_train)

    gp = sub.add_parser("generate", help="sample point clouds from a checkpoint")
    gp.add_argument("--ckpt", required=True)
    gp.add_argument("--n", type=int, default=128)
    gp.add_argument("--samples", type=int, default=1)
    gp.add_argument("--seed", type=int, default=0)
    gp.add_argument("--final-noise", action="store_true", dest="final_noise",
                    help="draw noise at the t=1 step too")
    gp.add_argument("--format", choices=("xyz", "pvpc"), default="xyz")
    gp.add_argument("--out", required=True)
    gp.set_defaults(fn=cmd_generate)

    cp = sub.add_parser("complete", help="sample completions of a partial cloud")
    cp.add_argument("--ckpt", required=True)
    cp.add_argument("--partial", required=True)
    cp.add_argument("--n-free", type=int, required=True, dest="n_free")
    cp.add_argument("--samples", type=int, default=1)
    cp.add_argument("--seed", type=int, default=0)
    cp.add_argument("--final-noise", action="store_true", dest="final_noise")
    cp.add_argument("--format", choices=("xyz", "pvpc"), default="xyz")
    cp.add_argument("--out", required=True)
    cp.set_defaults(fn=cmd_complete)

    ep = sub.add_parser("encode", help="time-T latent of a completed shape")
    ep.add_argument("--ckpt", required=True)
    ep.add_argument("--cloud", required=True)
    ep.add_argument("--seed", type=int, default=0)
    ep.add_argument("--out", required=True)
    ep.set_defaults(fn=cmd_encode)

    ip = sub.add_parser("interpolate", help="decode a convex combination of latents")
    ip.add_argument("--ckpt", required=True)
    ip.add_argument("--latent-a", required=True, dest="latent_a")
    ip.add_argument("--latent-b", required=True, dest="latent_b")
    ip.add_argument("--lambda", type=float, required=True, dest="lam")
    ip.add_argument("--partial", help="fixed rows re-applied each step")
    ip.add_argument("--seed", type=int, default=0)
    ip.add_argument("--final-noise", action="store_true", dest="final_noise")
    ip.add_argument("--out", required=True)
    ip.set_defaults(fn=cmd_interpolate)

    vp = sub.add_parser("eval", help="generation metrics between two cloud sets")
    vp.add_argument("--gen", required=True)
    vp.add_argument("--ref", required=True)
    vp.add_argument("--metric", required=True, choices=("1nn", "cov", "mmd"))
    vp.add_argument("--distance", choices=("cd", "emd"), default="cd")
    vp.add_argument("--out")
    vp.set_defaults(fn=cmd_eval)

    wp = sub.add_parser("eval-completion", help="completion metrics")
    wp.add_argument("--completions", required=True)
    wp.add_argument("--ref", help="reference cloud (for mmd)")
    wp.add_argument("--metric", required=True, choices=("tmd", "mmd"))
    wp.add_argument("--m-fixed", type=int, default=0, dest="m_fixed")
    wp.add_argument("--distance", choices=("cd", "emd"), default="cd")
    wp.add_argument("--out")
    wp.set_defaults(fn=cmd_eval_completion)

    dp = sub.add_parser("diffuse-viz", help="dump reverse-chain snapshots")
    dp.add_argument("--ckpt", required=True)
    dp.add_argument("--n", type=int, default=128)
    dp.add_argument("--seed", type=int, default=0)
    dp.add_argument("--every", type=int, default=100)
    dp.add_argument("--final-noise", action="store_true", dest="final_noise")
    dp.add_argument("--out", required=True)
    dp.set_defaults(fn=cmd_diffuse_viz)

    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    torch.set_num_threads(max(1, int(os.environ.get("PVD_THREADS", "1"))))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "eval-completion" and args.metric == "mmd" and not args.ref:
            raise UsageError("eval-completion --metric mmd requires --ref")
        return args.fn(args, argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
