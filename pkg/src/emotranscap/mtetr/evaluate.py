"""Score a trained recognizer on held-out utterances."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..clients import FeatureSequence
from ..core import TimedSegment, segments_plan
from ..metrics import NA, EvalPair, eer, fea, boundaries_from_labels
from .decode import Smoothing, decode
from .model import MTETR, predict
from .targets import FrameTargets, make_frame_targets


@dataclass
class RecognizerReport:
    fea: float
    eer: object
    acc_k: dict[int, float]
    acc: float
    count: int
    predictions: list[list[TimedSegment]] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "FEA": self.fea,
            "EER": None if self.eer is NA else self.eer,
            "Acc_ET": {str(k): v for k, v in self.acc_k.items()},
            "Acc_ET_all": self.acc,
            "utterances": self.count,
        }


def evaluate_recognizer(
    model: MTETR,
    examples: Sequence[tuple[FeatureSequence, FrameTargets, Sequence[TimedSegment]]],
    smoothing: Smoothing | None = None,
    tolerance_frames: int = 5,
) -> RecognizerReport:
    """FEA over the decoded frames, EER over pooled det scores, Acc^k as exact plan match."""
    pred_frames, true_frames = [], []
    det_scores, det_bounds = [], []
    hits: dict[int, list[bool]] = defaultdict(list)
    predictions = []
    offset = 0
    for feats, targets, segs in examples:
        probs, det = predict(model, feats)
        segments = decode(probs, feats.frame_rate, smoothing)
        predictions.append(segments)
        decoded = make_frame_targets(segments, feats.frame_rate, feats.num_frames).dia
        pred_frames.append(decoded)
        true_frames.append(targets.dia)
        det_scores.append(det)
        det_bounds.extend(b + offset for b in boundaries_from_labels(targets.det))
        offset += feats.num_frames
        pair = EvalPair(segments_plan(segments), segments_plan(list(segs)))
        hits[pair.k].append(pair.exact)
    all_hits = [h for v in hits.values() for h in v]
    return RecognizerReport(
        fea=fea(np.concatenate(pred_frames), np.concatenate(true_frames)),
        eer=eer(np.concatenate(det_scores), det_bounds, tolerance_frames),
        acc_k={k: 100.0 * float(np.mean(v)) for k, v in sorted(hits.items())},
        acc=100.0 * float(np.mean(all_hits)) if all_hits else 0.0,
        count=len(examples),
        predictions=predictions,
    )
