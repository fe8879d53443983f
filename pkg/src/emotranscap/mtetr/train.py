"""Seeded training loop for the transition recognizer."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..clients import FeatureSequence
from ..errors import ShapeError, TrainingError, ValidationError
from .loss import UncertaintyWeighting
from .model import MTETR
from .targets import FrameTargets

log = logging.getLogger(__name__)

Example = tuple[FeatureSequence, FrameTargets]


@dataclass
class TrainConfig:
    epochs: int = 20
    lr: float = 1e-3
    batch_size: int = 8
    seed: int = 0
    weight_decay: float = 0.0
    grad_clip: float | None = 5.0
    pos_weight_cap: float = 100.0
    time_budget_s: float | None = None
    # eval-mode loss over the training set after every epoch; when off, the
    # history records the mean training-step loss instead
    eval_history: bool = True
    bucket_batches: int = 8

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: MTETR
    weighting: UncertaintyWeighting
    history: list[dict] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)
    pos_weight: float = 1.0
    stopped_early: bool = False

    @property
    def losses(self) -> list[float]:
        return [h["total"] for h in self.history]


def _batch(examples: Sequence[Example]):
    lengths = torch.tensor([fs.num_frames for fs, _ in examples], dtype=torch.long)
    T = int(lengths.max())
    D = examples[0][0].dim
    x = torch.zeros(len(examples), T, D)
    dia = torch.zeros(len(examples), T, dtype=torch.long)
    det = torch.zeros(len(examples), T)
    for i, (fs, tg) in enumerate(examples):
        n = fs.num_frames
        x[i, :n] = torch.from_numpy(fs.frames)
        dia[i, :n] = torch.from_numpy(tg.dia)
        det[i, :n] = torch.from_numpy(tg.det)
    valid = torch.arange(T).unsqueeze(0) < lengths.unsqueeze(1)
    return x, lengths, dia, det, valid


def task_losses(model: MTETR, examples: Sequence[Example], pos_weight: float):
    x, lengths, dia, det, valid = _batch(examples)
    dia_logits, det_logits = model(x, lengths)
    l_dia = F.cross_entropy(dia_logits[valid], dia[valid])
    l_det = F.binary_cross_entropy_with_logits(
        det_logits[valid], det[valid], pos_weight=torch.tensor(pos_weight)
    )
    return l_dia, l_det


def combine(model: MTETR, weighting: UncertaintyWeighting, l_dia, l_det):
    if model.config.multitask:
        return weighting(l_dia, l_det)
    return l_dia


def positive_weight(dataset: Sequence[Example], cap: float = 100.0) -> float:
    pos = sum(float(tg.det.sum()) for _, tg in dataset)
    total = sum(len(tg) for _, tg in dataset)
    if pos <= 0:
        return 1.0
    return float(min((total - pos) / pos, cap))


@torch.no_grad()
def evaluate_loss(
    model: MTETR,
    weighting: UncertaintyWeighting,
    dataset: Sequence[Example],
    pos_weight: float,
    batch_size: int = 8,
) -> dict[str, float]:
    """Frame-weighted eval-mode losses over ``dataset``."""
    was = model.training
    model.eval()
    tot = {"dia": 0.0, "det": 0.0, "total": 0.0}
    frames = 0
    try:
        for i in range(0, len(dataset), batch_size):
            chunk = dataset[i : i + batch_size]
            n = sum(len(tg) for _, tg in chunk)
            l_dia, l_det = task_losses(model, chunk, pos_weight)
            total = combine(model, weighting, l_dia, l_det)
            tot["dia"] += float(l_dia) * n
            tot["det"] += float(l_det) * n
            tot["total"] += float(total) * n
            frames += n
    finally:
        model.train(was)
    return {k: v / frames for k, v in tot.items()}


def _batches(dataset, batch_size: int, bucket: int, rng: np.random.Generator) -> list[list[int]]:
    """Shuffled batches of similar length (sorted inside pools of ``bucket`` batches)."""
    order = rng.permutation(len(dataset))
    pool = max(1, bucket) * batch_size
    batches = []
    for i in range(0, len(order), pool):
        chunk = sorted(order[i : i + pool], key=lambda j: len(dataset[j][1]))
        batches.extend(chunk[b : b + batch_size] for b in range(0, len(chunk), batch_size))
    return [batches[i] for i in rng.permutation(len(batches))]


def train(
    model: MTETR,
    dataset: Sequence[Example],
    config: TrainConfig | None = None,
    weighting: UncertaintyWeighting | None = None,
) -> TrainResult:
    """Adam over model + log-variances; history holds eval-mode losses per epoch.

    ``history[0]`` is measured before the first update.  Determinism relies
    on the seed plus single-process CPU execution.
    """
    config = config or TrainConfig()
    if not dataset:
        raise ValidationError("training set is empty", field="dataset")
    for fs, tg in dataset:
        if fs.dim != model.config.in_planes:
            raise ShapeError(f"feature width {fs.dim} != in_planes {model.config.in_planes}")
        if fs.num_frames != len(tg):
            raise ShapeError(f"{fs.num_frames} feature frames but {len(tg)} targets")
    torch.manual_seed(config.seed)
    weighting = weighting or UncertaintyWeighting()
    params = list(model.parameters()) + list(weighting.parameters())
    opt = torch.optim.Adam(params, lr=config.lr, weight_decay=config.weight_decay)
    pos_weight = positive_weight(dataset, config.pos_weight_cap)
    rng = np.random.default_rng(config.seed)
    result = TrainResult(model, weighting, pos_weight=pos_weight)

    def snapshot(epoch: int, steps: list[tuple[float, float, float]]) -> None:
        if config.eval_history or not steps:
            losses = evaluate_loss(model, weighting, dataset, pos_weight, config.batch_size)
        else:
            arr = np.asarray(steps).mean(axis=0)
            losses = {"total": float(arr[0]), "dia": float(arr[1]), "det": float(arr[2])}
        entry = {"epoch": epoch, **losses}
        entry.update(weighting.state())
        if not math.isfinite(entry["total"]):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        result.history.append(entry)
        log.info("epoch %d loss %.4f (dia %.4f det %.4f)", epoch, entry["total"], entry["dia"], entry["det"])

    started = time.monotonic()
    snapshot(0, [])
    for epoch in range(1, config.epochs + 1):
        model.train()
        steps = []
        for batch in _batches(dataset, config.batch_size, config.bucket_batches, rng):
            chunk = [dataset[j] for j in batch]
            l_dia, l_det = task_losses(model, chunk, pos_weight)
            loss = combine(model, weighting, l_dia, l_det)
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite loss in epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            if config.grad_clip:
                torch.nn.utils.clip_grad_norm_(params, config.grad_clip)
            opt.step()
            result.step_losses.append(float(loss.detach()))
            steps.append((float(loss.detach()), float(l_dia.detach()), float(l_det.detach())))
        snapshot(epoch, steps)
        if config.time_budget_s is not None and time.monotonic() - started > config.time_budget_s:
            result.stopped_early = epoch < config.epochs
            break
    model.eval()
    return result
