"""Component-removal and single-task variants of the recognizer."""

from __future__ import annotations

from dataclasses import replace

from .evaluate import evaluate_recognizer
from .model import ModelConfig, build_model
from .train import TrainConfig, train

VARIANTS = {
    "full": {},
    "single_task": {"multitask": False},
    "no_resnet": {"use_resnet": False},
    "no_transformer": {"use_transformer": False},
    "no_rnn": {"use_rnn": False},
}


def run_ablation(base: ModelConfig, train_set, test_set, train_config: TrainConfig, variants=None) -> dict[str, dict]:
    """Train each variant from the same seed; ``train_set``/``test_set`` hold (features, targets, segments)."""
    results = {}
    for name in variants or VARIANTS:
        cfg = replace(base, **VARIANTS[name])
        model = build_model(cfg, train_config.seed)
        fit = train(model, [(f, t) for f, t, _ in train_set], train_config)
        report = evaluate_recognizer(fit.model, test_set)
        results[name] = {**report.to_json(), "final_loss": fit.losses[-1]}
    return results
