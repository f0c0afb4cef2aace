"""Command-line interface.

Subcommands: train, restore, grad-check, ablate, metrics, make-data.
Option precedence is built-in defaults < --config JSON file < explicit
flags.  Exit codes: 0 success, 2 configuration/usage, 3 data problems,
4 numerical abort, 5 gradient-check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, NumericsError, ShapeError, UsageError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_GRADCHECK = 5

_DEGRADE_KEYS = ("sigma", "transmission", "airlight", "num_streaks", "streak_length",
                 "angle_deg", "intensity", "gain", "gamma")


def _add_degradation_flags(p: argparse.ArgumentParser):
    p.add_argument("--task", choices=["denoise", "dehaze", "derain", "lowlight", "composite"],
                   help="degradation family (default denoise)")
    p.add_argument("--sigma", type=float, help="gaussian noise sigma, 8-bit units")
    p.add_argument("--transmission", type=float, help="haze transmission in (0,1]")
    p.add_argument("--airlight", type=float, help="haze airlight in [0,1]")
    p.add_argument("--num-streaks", type=int, dest="num_streaks", help="rain streak count")
    p.add_argument("--streak-length", type=float, dest="streak_length", help="rain streak length, px")
    p.add_argument("--angle-deg", type=float, dest="angle_deg", help="rain tilt from vertical, degrees")
    p.add_argument("--intensity", type=float, help="rain streak brightness")
    p.add_argument("--gain", type=float, help="lowlight gain in (0,1]")
    p.add_argument("--gamma", type=float, help="lowlight gamma > 0")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="restorekit",
                                     description="degradation-aware image restoration toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    pt = sub.add_parser("train", help="train a model on synthetic pairs",
                        argument_default=S)
    pt.add_argument("--out", required=True, help="output directory (reports, checkpoints)")
    pt.add_argument("--config", help="JSON file with option defaults")
    pt.add_argument("--size", choices=["tiny", "small", "full"], help="model preset (default tiny)")
    pt.add_argument("--steps", type=int, help="optimizer steps (default 500)")
    pt.add_argument("--batch", type=int, help="batch size (default 8)")
    pt.add_argument("--lr0", type=float, help="peak learning rate (default 2e-4)")
    pt.add_argument("--lr-min", type=float, dest="lr_min", help="final learning rate (default 1e-6)")
    pt.add_argument("--lambda-fourier", type=float, dest="lambda_fourier",
                    help="spectral loss weight (default 0.1)")
    pt.add_argument("--count", type=int, help="training pairs (default 64)")
    pt.add_argument("--holdout", type=int, help="held-out eval pairs (default 16)")
    pt.add_argument("--patch", type=int, help="patch size (default 32)")
    pt.add_argument("--seed", type=int, help="master seed (default 0)")
    pt.add_argument("--precision", choices=["f32", "f64"], help="compute precision (default f32)")
    pt.add_argument("--checkpoint-every", type=int, dest="checkpoint_every",
                    help="periodic checkpoint interval, 0 = final only")
    pt.add_argument("--data", help="directory of clean .ppm images (default: procedural)")
    pt.add_argument("--resume", help="checkpoint stem to resume from")
    _add_degradation_flags(pt)

    pr = sub.add_parser("restore", help="run a checkpoint on one image", argument_default=S)
    pr.add_argument("--checkpoint", required=True, help="checkpoint stem or .json path")
    pr.add_argument("--input", required=True, help="degraded input .ppm")
    pr.add_argument("--output", required=True, help="restored output .ppm")
    pr.add_argument("--reference", help="clean reference .ppm for metrics")

    pg = sub.add_parser("grad-check", help="verify gradients against finite differences",
                        argument_default=S)
    pg.add_argument("--seed", type=int, help="base seed (default 0)")
    pg.add_argument("--only", choices=["all", "primitives", "modules", "model"],
                    help="restrict the check set")
    pg.add_argument("--samples", type=int, help="model parameters to spot-check (default 120)")

    pa = sub.add_parser("ablate", help="build and exercise the module on/off matrix",
                        argument_default=S)
    pa.add_argument("--size", choices=["tiny", "small", "full"], help="base preset (default full)")
    pa.add_argument("--image", type=int, help="square input size (default 32)")
    pa.add_argument("--out", help="write the table as JSON here")
    pa.add_argument("--dry-run", action="store_true", dest="dry_run",
                    help="only build and count parameters, skip forward/backward")

    pm = sub.add_parser("metrics", help="psnr/ssim between two image directories",
                        argument_default=S)
    pm.add_argument("--reference", required=True, help="directory of reference .ppm images")
    pm.add_argument("--candidate", required=True, help="directory of images to score")

    pd = sub.add_parser("make-data", help="write clean/degraded ppm pairs", argument_default=S)
    pd.add_argument("--out", required=True, help="output root directory")
    pd.add_argument("--count", type=int, help="number of images (default 16)")
    pd.add_argument("--height", type=int, help="image height (default 64)")
    pd.add_argument("--width", type=int, help="image width (default 64)")
    pd.add_argument("--seed", type=int, help="master seed (default 0)")
    _add_degradation_flags(pd)
    return parser


def _merge_options(ns: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags; config keys are validated."""
    given = {k: v for k, v in vars(ns).items() if k != "command"}
    merged = dict(defaults)
    config_path = given.pop("config", None)
    if config_path:
        try:
            raw = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {config_path}: invalid JSON ({e})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {config_path}: expected a JSON object")
        for key, value in raw.items():
            if key not in defaults:
                raise ConfigError(f"config file {config_path}: unknown field '{key}'")
            want = defaults[key]
            if want is not None and value is not None:
                ok = isinstance(value, bool) if isinstance(want, bool) else (
                    isinstance(value, (int, float)) if isinstance(want, float) else
                    isinstance(value, int) if isinstance(want, int) else
                    isinstance(value, str))
                if not ok:
                    raise ConfigError(f"config file {config_path}: field '{key}' expects "
                                      f"{type(want).__name__}, got {type(value).__name__}")
            merged[key] = value
    merged.update(given)
    return merged


def _degradation_spec(opts: dict):
    from .degrade import spec_for_task

    overrides = {k: opts.get(k) for k in _DEGRADE_KEYS}
    return spec_for_task(opts["task"], **overrides)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_train(ns) -> int:
    from .degrade import make_patch_set
    from .metrics import psnr
    from .model import RestorationModel, config_by_name
    from .tensor import no_grad
    from .train import TrainConfig, train_loop

    defaults = {"out": None, "size": "tiny", "steps": 500, "batch": 8, "lr0": 2e-4,
                "lr_min": 1e-6, "lambda_fourier": 0.1, "count": 64, "holdout": 16,
                "patch": 32, "seed": 0, "precision": "f32", "checkpoint_every": 0,
                "data": None, "resume": None, "task": "denoise",
                **{k: None for k in _DEGRADE_KEYS}}
    opts = _merge_options(ns, defaults)
    spec = _degradation_spec(opts)
    if opts["patch"] % 8:
        raise ConfigError("patch size must be a multiple of 8")

    dtype = np.float64 if opts["precision"] == "f64" else np.float32
    model = RestorationModel(config_by_name(opts["size"], seed=opts["seed"]), dtype=dtype)
    total = opts["count"] + opts["holdout"]
    pairs = make_patch_set(spec, total, patch=opts["patch"], seed=opts["seed"],
                           clean_dir=opts["data"])
    train_pairs = pairs[:opts["count"]]
    eval_pairs = pairs[opts["count"]:]

    cfg = TrainConfig(steps=opts["steps"], batch_size=opts["batch"], lr0=opts["lr0"],
                      lr_min=opts["lr_min"], lambda_fourier=opts["lambda_fourier"],
                      seed=opts["seed"], checkpoint_every=opts["checkpoint_every"])
    out_dir = Path(opts["out"])

    def log(rec):
        if rec["step"] % 50 == 0 or rec["step"] == cfg.steps - 1:
            print(f"step {rec['step']:5d}  lr {rec['lr']:.3e}  loss {rec['loss']:.5f}")

    report = train_loop(model, train_pairs, cfg, out_dir=out_dir,
                        resume=opts["resume"], log=log)

    summary = {"steps": cfg.steps, "train_pairs": len(train_pairs),
               "wall_time_s": report.wall_time_s,
               "final_loss": report.losses[-1] if report.losses else None,
               "checkpoints": report.checkpoints}
    if eval_pairs:
        deg_db, res_db = [], []
        with no_grad():
            for deg, clean in eval_pairs:
                pred = np.clip(model.forward(deg[None]).data[0], 0.0, 1.0)
                deg_db.append(psnr(deg, clean))
                res_db.append(psnr(pred, clean))
        summary["psnr_degraded"] = float(np.mean(deg_db))
        summary["psnr_restored"] = float(np.mean(res_db))
        summary["psnr_gain_db"] = summary["psnr_restored"] - summary["psnr_degraded"]
        print(f"holdout ({len(eval_pairs)} pairs): degraded {summary['psnr_degraded']:.2f} dB, "
              f"restored {summary['psnr_restored']:.2f} dB "
              f"({summary['psnr_gain_db']:+.2f} dB)")
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=1))
    return EXIT_OK


def _pad_to_multiple(chw: np.ndarray, m: int) -> tuple[np.ndarray, int, int]:
    _, h, w = chw.shape
    ph = (-h) % m
    pw = (-w) % m
    if ph == 0 and pw == 0:
        return chw, h, w
    mode = "reflect" if (ph < h and pw < w) else "edge"
    return np.pad(chw, ((0, 0), (0, ph), (0, pw)), mode=mode), h, w


def cmd_restore(ns) -> int:
    from .checkpoint import load_model
    from .metrics import psnr, ssim
    from .ppm import chw_to_image, image_to_chw, read_ppm, write_ppm
    from .tensor import no_grad

    opts = _merge_options(ns, {"checkpoint": None, "input": None, "output": None,
                               "reference": None})
    model, _, _ = load_model(opts["checkpoint"])
    img = read_ppm(opts["input"])
    chw = image_to_chw(img).astype(model.dtype)
    padded, h, w = _pad_to_multiple(chw, model.DOWNSCALE)
    with no_grad():
        pred = model.forward(padded[None]).data[0]
    if not np.all(np.isfinite(pred)):
        raise NumericsError("restoration produced non-finite pixels")
    restored = np.clip(pred[:, :h, :w], 0.0, 1.0)
    write_ppm(opts["output"], chw_to_image(restored))
    print(f"wrote {opts['output']} ({w}x{h})")
    if opts["reference"]:
        ref = read_ppm(opts["reference"])
        before = psnr(img, ref)
        after = psnr(chw_to_image(restored), ref)
        print(f"psnr {before:.2f} -> {after:.2f} dB   "
              f"ssim {ssim(img, ref):.4f} -> {ssim(chw_to_image(restored), ref):.4f}")
    return EXIT_OK


def cmd_grad_check(ns) -> int:
    from .gradcheck import (MODEL_TOL, MODULE_TOL, PRIMITIVE_TOL, check_model,
                            check_modules, check_primitives)

    opts = _merge_options(ns, {"seed": 0, "only": "all", "samples": 120})
    failures = []

    def report(name: str, err: float, tol: float):
        status = "ok" if err <= tol else "FAIL"
        print(f"{name:28s} {err:.3e}  (tol {tol:.0e})  {status}")
        if err > tol:
            failures.append(name)

    if opts["only"] in ("all", "primitives"):
        for name, err in sorted(check_primitives(opts["seed"]).items()):
            report(f"primitive/{name}", err, PRIMITIVE_TOL)
    if opts["only"] in ("all", "modules"):
        for name, err in check_modules(opts["seed"]).items():
            report(f"module/{name}", err, MODULE_TOL)
    if opts["only"] in ("all", "model"):
        report("model/end_to_end", check_model(opts["seed"], samples=opts["samples"]), MODEL_TOL)
    if failures:
        print(f"{len(failures)} gradient check(s) failed: {', '.join(failures)}")
        return EXIT_GRADCHECK
    print("all gradient checks passed")
    return EXIT_OK


def cmd_ablate(ns) -> int:
    from . import ops
    from .model import RestorationModel, ablation_variants, config_by_name
    from .tensor import Tensor

    opts = _merge_options(ns, {"size": "full", "image": 32, "out": None, "dry_run": False})
    if opts["image"] % 8:
        raise ConfigError("--image must be a multiple of 8")
    base = config_by_name(opts["size"])
    rng = np.random.default_rng(0)
    x = rng.uniform(0.1, 0.9, size=(1, 3, opts["image"], opts["image"]))
    rows = []
    print(f"{'variant':26s} {'params':>12s}  fwd/bwd")
    for label, cfg in ablation_variants(base):
        t0 = time.time()
        model = RestorationModel(cfg)
        row = {"variant": label, "params": model.param_count(),
               "use_agf": cfg.use_agf, "use_cgdm": cfg.use_cgdm, "use_caga": cfg.use_caga,
               "use_adaptive_temp": cfg.wants_temperature(),
               "use_gated_output": cfg.wants_gate()}
        if opts["dry_run"]:
            row["status"] = "built"
        else:
            target = Tensor(np.zeros_like(x, dtype=model.dtype))
            loss = ops.tmean(ops.square(ops.sub(model.forward(x.astype(model.dtype)), target)))
            model.store.zero_grads()
            loss.backward()
            missing = [n for n, p in model.store.items() if p.grad is None]
            if missing:
                raise UsageError(f"variant '{label}': no gradient for {missing[:3]}")
            row["status"] = "ok"
            row["loss"] = float(loss.data)
        row["seconds"] = time.time() - t0
        rows.append(row)
        print(f"{label:26s} {row['params']:12,d}  {row['status']} ({row['seconds']:.1f}s)")
    if opts["out"]:
        Path(opts["out"]).parent.mkdir(parents=True, exist_ok=True)
        Path(opts["out"]).write_text(json.dumps(rows, indent=1))
    return EXIT_OK


def cmd_metrics(ns) -> int:
    from .metrics import psnr, ssim
    from .ppm import read_ppm

    opts = _merge_options(ns, {"reference": None, "candidate": None})
    ref_dir, cand_dir = Path(opts["reference"]), Path(opts["candidate"])
    for d in (ref_dir, cand_dir):
        if not d.is_dir():
            raise DataError(f"not a directory: {d}")
    ref_names = {p.name for p in ref_dir.glob("*.ppm")}
    cand_names = {p.name for p in cand_dir.glob("*.ppm")}
    if not ref_names:
        raise DataError(f"no .ppm files in {ref_dir}")
    orphans = sorted(ref_names ^ cand_names)
    if orphans:
        raise DataError(f"unpaired images ({len(orphans)}): {', '.join(orphans[:5])}")
    p_all, s_all = [], []
    for name in sorted(ref_names):
        a = read_ppm(ref_dir / name)
        b = read_ppm(cand_dir / name)
        if a.shape != b.shape:
            raise DataError(f"{name}: shapes differ {a.shape} vs {b.shape}")
        p, s = psnr(b, a), ssim(b, a)
        p_all.append(p)
        s_all.append(s)
        print(f"{name:24s} psnr {p:8.3f}  ssim {s:.5f}")
    print(f"{'mean':24s} psnr {np.mean(p_all):8.3f}  ssim {np.mean(s_all):.5f}")
    return EXIT_OK


def cmd_make_data(ns) -> int:
    from dataclasses import replace

    from .degrade import degrade, procedural_image
    from .ppm import write_ppm

    defaults = {"out": None, "count": 16, "height": 64, "width": 64, "seed": 0,
                "task": "denoise", **{k: None for k in _DEGRADE_KEYS}}
    opts = _merge_options(ns, defaults)
    if opts["count"] < 1 or opts["height"] < 8 or opts["width"] < 8:
        raise ConfigError("need count >= 1 and height/width >= 8")
    spec = _degradation_spec(opts)
    root = Path(opts["out"])
    clean_dir = root / "clean"
    deg_dir = root / "degraded" / spec.tag()
    rng = np.random.default_rng(opts["seed"])
    for i in range(opts["count"]):
        clean = procedural_image(opts["height"], opts["width"], rng)
        pair_seed = int(rng.integers(0, 2 ** 62))
        degraded = degrade(clean, replace(spec, seed=pair_seed))
        write_ppm(clean_dir / f"img_{i:04d}.ppm", clean)
        write_ppm(deg_dir / f"img_{i:04d}.ppm", degraded)
    print(f"wrote {opts['count']} pairs under {root} ({spec.tag()})")
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "restore": cmd_restore,
    "grad-check": cmd_grad_check,
    "ablate": cmd_ablate,
    "metrics": cmd_metrics,
    "make-data": cmd_make_data,
}


def main(argv=None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    try:
        return _COMMANDS[ns.command](ns)
    except (ConfigError, UsageError, ShapeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericsError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
