"""Single-file checkpoint: versioned header, model config, weights, uncertainty state."""

from __future__ import annotations

from pathlib import Path

import torch

from ..errors import FormatError
from .loss import UncertaintyWeighting
from .model import MTETR, ModelConfig

FORMAT = "emotranscap-mtetr"
VERSION = 1


def save_checkpoint(path, model: MTETR, weighting: UncertaintyWeighting | None = None, meta: dict | None = None) -> None:
    weighting = weighting or UncertaintyWeighting()
    payload = {
        "format": FORMAT,
        "version": VERSION,
        "config": model.config.to_json(),
        "model": model.state_dict(),
        "uncertainty": weighting.state_dict(),
        "meta": dict(meta or {}),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path) -> tuple[MTETR, UncertaintyWeighting, dict]:
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or payload.get("format") != FORMAT:
        raise FormatError(f"{path} is not an MTETR checkpoint")
    if payload.get("version") != VERSION:
        raise FormatError(f"unsupported checkpoint version {payload.get('version')}")
    model = MTETR(ModelConfig.from_json(payload["config"]))
    model.load_state_dict(payload["model"])
    model.eval()
    weighting = UncertaintyWeighting()
    weighting.load_state_dict(payload["uncertainty"])
    return model, weighting, payload.get("meta", {})
