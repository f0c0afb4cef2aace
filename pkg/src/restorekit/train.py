"""Training: combined RGB/Fourier L1 loss, Adam, cosine schedule.

The loop is deterministic for a given seed: batch sampling uses one
Generator whose state is checkpointed, so a resumed run consumes the
exact random sequence the uninterrupted run would have.  On a non-finite
loss the failing forward pass is re-run under finite tracing and the
resulting NumericsError names the first offending op.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import ops
from .checkpoint import OPTIM_PREFIX, load_checkpoint, save_model
from .errors import ConfigError, NumericsError, UsageError
from .params import ParamStore
from .tensor import Tensor, finite_trace


@dataclass
class TrainConfig:
    steps: int = 500
    batch_size: int = 8
    lr0: float = 2e-4
    lr_min: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    lambda_fourier: float = 0.1
    seed: int = 0
    checkpoint_every: int = 0   # 0: only the final checkpoint

    def validate(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigError("steps and batch_size must be positive")
        if self.lr0 < 0 or self.lr_min < 0 or self.lr_min > max(self.lr0, 1e-12):
            raise ConfigError("need 0 <= lr_min <= lr0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("betas must lie in [0, 1)")
        if self.lambda_fourier < 0:
            raise ConfigError("lambda_fourier must be >= 0")


def l1_fourier_loss(pred: Tensor, target: Tensor, weight: float = 0.1) -> Tensor:
    """mean|pred - target| + weight * (mean|dRe| + mean|dIm|) over the spectrum."""
    pixel = ops.tmean(ops.absolute(ops.sub(pred, target)))
    if weight == 0:
        return pixel
    sp = ops.fft2d(pred)
    st = ops.fft2d(target)
    spectral = ops.add(ops.tmean(ops.absolute(ops.sub(sp.real, st.real))),
                       ops.tmean(ops.absolute(ops.sub(sp.imag, st.imag))))
    return ops.add(pixel, ops.mul(spectral, weight))


def cosine_lr(t: int, total: int, lr0: float, lr_min: float) -> float:
    """Half-cosine decay from lr0 (t=0) to lr_min (t=total); clamps past the end."""
    if total < 1:
        raise ConfigError("schedule length must be positive")
    t = min(max(t, 0), total)
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + np.cos(np.pi * t / total))


class OptimizerState:
    """Adam first/second moments per parameter plus the step counter."""

    def __init__(self, store: ParamStore):
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in store.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in store.items()}

    def arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for name, arr in self.m.items():
            out[f"m.{name}"] = arr
        for name, arr in self.v.items():
            out[f"v.{name}"] = arr
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray], t: int):
        self.t = t
        for name in self.m:
            self.m[name] = np.array(arrays[f"m.{name}"])
            self.v[name] = np.array(arrays[f"v.{name}"])


def adam_step(store: ParamStore, state: OptimizerState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update, in place on the store's parameters."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name, p in store.items():
        if p.grad is None:
            raise UsageError(f"adam_step: parameter '{name}' has no gradient")
        g = p.grad
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        p.data -= (lr * update).astype(p.data.dtype, copy=False)


@dataclass
class TrainingReport:
    records: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    wall_time_s: float = 0.0

    @property
    def losses(self) -> list:
        return [r["loss"] for r in self.records]


def _stack_batch(pairs, idxs, dtype):
    xs = np.stack([pairs[i][0] for i in idxs]).astype(dtype, copy=False)
    ys = np.stack([pairs[i][1] for i in idxs]).astype(dtype, copy=False)
    return xs, ys


def train_loop(model, pairs, cfg: TrainConfig, out_dir=None, resume=None,
               log=None) -> TrainingReport:
    """Run (or continue) a training run to cfg.steps total optimizer steps.

    pairs: list of (degraded, clean) CHW arrays.  out_dir (optional) gets
    report.jsonl plus ckpt_final and any periodic checkpoints.  resume: a
    checkpoint stem written by a previous run with the same configs.
    """
    cfg.validate()
    if not pairs:
        raise ConfigError("training needs at least one (degraded, clean) pair")
    store = model.store
    state = OptimizerState(store)
    rng = np.random.default_rng(cfg.seed)
    start_step = 0

    if resume is not None:
        manifest, arrays = load_checkpoint(resume)
        ts = manifest.get("train_state") or {}
        if "step" not in ts:
            raise ConfigError(f"checkpoint {resume} has no training state to resume from")
        params = {n: a for n, a in arrays.items() if not n.startswith(OPTIM_PREFIX)}
        store.load_arrays(params)
        optim = {n[len(OPTIM_PREFIX):]: a for n, a in arrays.items() if n.startswith(OPTIM_PREFIX)}
        state.load_arrays(optim, ts["step"])
        rng.bit_generator.state = ts["rng_state"]
        start_step = ts["step"]

    out_dir = Path(out_dir) if out_dir is not None else None
    report_path = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        report_path = out_dir / "report.jsonl"
        if start_step == 0 and report_path.exists():
            report_path.unlink()

    def snapshot(tag: str, step: int) -> Path:
        train_state = {"step": step, "rng_state": rng.bit_generator.state,
                       "train_config": asdict(cfg)}
        stem = save_model(model, out_dir / tag, train_state=train_state,
                          optim_arrays=state.arrays())
        report.checkpoints.append(str(stem))
        return stem

    report = TrainingReport()
    t_start = time.time()
    replace_draw = len(pairs) < cfg.batch_size
    for step in range(start_step, cfg.steps):
        idxs = rng.choice(len(pairs), size=cfg.batch_size, replace=replace_draw)
        xs, ys = _stack_batch(pairs, idxs, store.dtype)
        t0 = time.time()
        pred = model.forward(xs)
        loss = l1_fourier_loss(pred, Tensor(ys), cfg.lambda_fourier)
        loss_val = float(loss.data)
        if not np.isfinite(loss_val):
            # localise the blow-up: re-run the same forward under tracing
            try:
                with finite_trace():
                    l2 = l1_fourier_loss(model.forward(xs), Tensor(ys), cfg.lambda_fourier)
                    float(l2.data)
            except NumericsError as e:
                raise NumericsError(f"training aborted at step {step}: {e}") from None
            raise NumericsError(f"training aborted at step {step}: non-finite loss")
        store.zero_grads()
        loss.backward()
        lr = cosine_lr(step, cfg.steps, cfg.lr0, cfg.lr_min)
        adam_step(store, state, lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
        record = {"step": step, "lr": lr, "loss": loss_val,
                  "wall_ms": (time.time() - t0) * 1000.0}
        report.records.append(record)
        if report_path is not None:
            with report_path.open("a") as fh:
                fh.write(json.dumps(record) + "\n")
        if log is not None:
            log(record)
        done = step + 1
        if out_dir is not None and cfg.checkpoint_every and done % cfg.checkpoint_every == 0 and done < cfg.steps:
            snapshot(f"ckpt_step{done:06d}", done)
    if out_dir is not None:
        snapshot("ckpt_final", cfg.steps)
    report.wall_time_s = time.time() - t_start
    return report
