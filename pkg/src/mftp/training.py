"""Adam training loop, loss bookkeeping, and checkpoint serialization.

Checkpoints are a directory holding `manifest.json` (format tag, dtype,
step, config snapshot, and a name/shape/offset table) plus `params.bin`
with the raw little-endian float64 parameter buffers, so a reload
reproduces forward outputs bit for bit on the same platform.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .data import Scenario, TargetFrame, generate_synthetic, load_scenarios, normalize
from .decoder import PredictionSet
from .losses import LossReport, target_loss, total_loss
from .model import TrajectoryPredictor
from .tensor import Tensor

CHECKPOINT_FORMAT = "mftp-checkpoint-v1"
MANIFEST_NAME = "manifest.json"
PARAMS_NAME = "params.bin"


class Adam:
    """Adam with bias correction; state is kept per parameter name."""

    def __init__(self, params: dict[str, Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            if p.grad is None:
                continue
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad * p.grad
            p.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


@dataclass
class TrainingItem:
    scenario_id: str
    frame: TargetFrame
    gt_local: np.ndarray       # [T_f, 2] target future in the frame


@dataclass
class TrainResult:
    model: TrajectoryPredictor
    log_lines: list[str] = field(default_factory=list)
    first_report: LossReport | None = None
    last_report: LossReport | None = None


def load_training_scenarios(config: Config) -> list[Scenario]:
    if config.data.scenario_path is not None:
        return load_scenarios(config.data.scenario_path)
    return generate_synthetic(config.data.synthetic, seed=config.training.seed)


def build_training_items(scenarios: list[Scenario]) -> list[TrainingItem]:
    items = []
    for s in scenarios:
        norm = normalize(s)
        for frame in norm.frames:
            fut = frame.future[frame.target_index]
            if np.any(fut[:, 2] == 0.0):
                raise ValueError(f"scenario {s.scenario_id}: target "
                                 f"{frame.target_index} future has padded steps; "
                                 "cannot supervise")
            items.append(TrainingItem(scenario_id=s.scenario_id, frame=frame,
                                      gt_local=fut[:, :2].copy()))
    if not items:
        raise ValueError("no training targets in the dataset")
    return items


def _batch_indices(step: int, batch_size: int, n_items: int) -> list[int]:
    start = (step * batch_size) % n_items
    return [(start + i) % n_items for i in range(min(batch_size, n_items))]


def train_step(model: TrajectoryPredictor, optimizer: Adam,
               batch: list[TrainingItem], config: Config) -> LossReport:
    trajs, probs = model.forward_frames([it.frame for it in batch])
    terms = []
    for i, item in enumerate(batch):
        pred = PredictionSet(trajs=trajs[i], probs=probs[i])
        terms.append(target_loss(pred, item.gt_local, config.model.patch_len))
    loss, report = total_loss(terms, config.training.loss_weights())
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return report


def evaluate_loss(model: TrajectoryPredictor, items: list[TrainingItem],
                  config: Config) -> LossReport:
    """Loss over a set of items without touching the parameters."""
    trajs, probs = model.forward_frames([it.frame for it in items])
    terms = []
    for i, item in enumerate(items):
        pred = PredictionSet(trajs=Tensor(trajs.data[i]), probs=Tensor(probs.data[i]))
        terms.append(target_loss(pred, item.gt_local, config.model.patch_len))
    _, report = total_loss(terms, config.training.loss_weights())
    return report


def train(config: Config, out_dir: str | None = None,
          log=None) -> TrainResult:
    """Run the full training loop; deterministic given the config seed."""
    config.validate()
    scenarios = load_training_scenarios(config)
    items = build_training_items(scenarios)
    model = TrajectoryPredictor(config.model, seed=config.training.seed)
    optimizer = Adam(model.parameters(), lr=config.training.learning_rate)

    result = TrainResult(model=model)

    def emit(line: str) -> None:
        result.log_lines.append(line)
        if log is not None:
            log(line)

    emit(f"targets={len(items)} parameters="
         f"{sum(p.size for p in model.parameters().values())}")
    for step in range(config.training.steps):
        batch = [items[i] for i in _batch_indices(step, config.training.batch_size,
                                                  len(items))]
        report = train_step(model, optimizer, batch, config)
        if result.first_report is None:
            result.first_report = report
        result.last_report = report
        emit(report.format_line(step))

    if out_dir is not None:
        ckpt = save_checkpoint(out_dir, model, config, config.training.steps)
        with open(os.path.join(out_dir, "train_log.txt"), "w") as fh:
            fh.write("\n".join(result.log_lines) + "\n")
        if log is not None:
            log(f"checkpoint={ckpt}")       # path stays out of the stored log
    return result


# -- checkpoint io ---------------------------------------------------------------


def save_checkpoint(out_dir: str, model: TrajectoryPredictor, config: Config,
                    step: int) -> str:
    os.makedirs(out_dir, exist_ok=True)
    params = model.parameters()
    entries = []
    blobs = []
    offset = 0
    for name, p in params.items():
        raw = np.ascontiguousarray(p.data, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(p.shape),
                        "offset": offset, "count": int(p.size)})
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "dtype": "<f8",
        "step": step,
        "config": config.to_dict(),
        "params": entries,
    }
    with open(os.path.join(out_dir, PARAMS_NAME), "wb") as fh:
        fh.write(b"".join(blobs))
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=1)
    return out_dir


def load_checkpoint(path: str) -> tuple[TrajectoryPredictor, Config, int]:
    manifest_path = os.path.join(path, MANIFEST_NAME)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{manifest_path}: unknown checkpoint format "
                         f"{manifest.get('format')!r}")
    config = Config.from_dict(manifest["config"])
    config.validate()
    model = TrajectoryPredictor(config.model, seed=config.training.seed)
    params = model.parameters()

    with open(os.path.join(path, PARAMS_NAME), "rb") as fh:
        blob = fh.read()
    seen = set()
    for entry in manifest["params"]:
        name = entry["name"]
        if name not in params:
            raise ValueError(f"checkpoint parameter {name!r} not in model")
        p = params[name]
        if list(p.shape) != entry["shape"]:
            raise ValueError(f"checkpoint parameter {name!r} shape {entry['shape']} "
                             f"!= model shape {list(p.shape)}")
        lo = entry["offset"]
        hi = lo + entry["count"] * 8
        arr = np.frombuffer(blob[lo:hi], dtype="<f8").reshape(entry["shape"])
        p.data = arr.astype(np.float64, copy=True)
        seen.add(name)
    missing = set(params) - seen
    if missing:
        raise ValueError(f"checkpoint missing parameters: {sorted(missing)}")
    return model, config, int(manifest["step"])
