"""Class-conditioned Gaussian frame features for offline training checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..clients import FeatureSequence
from ..core import EMOTIONS, TimedSegment, TransitionPlan
from ..planner import enumerate_transition_plans
from .targets import FrameTargets, frame_count, make_frame_targets


@dataclass
class GaussianFeatureGenerator:
    """Frames ~ N(mu_class + speaker_offset, noise^2 I).

    Class means are drawn once from N(0, mean_scale^2 I) using ``seed``.
    """

    dim: int = 768
    frame_rate: float = 50.0
    mean_scale: float = 0.1
    noise: float = 1.0
    speaker_scale: float = 0.02
    min_segment_s: float = 1.0
    max_segment_s: float = 3.0
    seed: int = 0

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        self.means = rng.normal(0.0, self.mean_scale, (len(EMOTIONS), self.dim)).astype(np.float32)

    def segments_for(self, plan: TransitionPlan, rng: np.random.Generator) -> list[TimedSegment]:
        segs, t = [], 0.0
        for e in plan.emotions:
            # whole frames keep segment edges on the frame grid
            n = int(round(rng.uniform(self.min_segment_s, self.max_segment_s) * self.frame_rate))
            d = n / self.frame_rate
            segs.append(TimedSegment(t, t + d, e))
            t += d
        return segs

    def render(self, segments: list[TimedSegment], rng: np.random.Generator) -> FeatureSequence:
        T = frame_count(segments[-1].end_s, self.frame_rate)
        labels = make_frame_targets(segments, self.frame_rate, T).dia
        offset = rng.normal(0.0, self.speaker_scale, self.dim).astype(np.float32)
        noise = rng.standard_normal((T, self.dim), dtype=np.float32) * self.noise
        return FeatureSequence(self.means[labels] + offset + noise, self.frame_rate)

    def sample(self, plan: TransitionPlan, rng: np.random.Generator):
        segs = self.segments_for(plan, rng)
        return self.render(segs, rng), segs

    def dataset(self, n: int, ks=(1, 2, 3), seed: int = 0, dilation_frames: int = 2):
        """``n`` discourses with plans drawn uniformly per k (k cycles through ``ks``)."""
        rng = np.random.default_rng(seed)
        inventory = {k: enumerate_transition_plans(EMOTIONS, k) for k in ks}
        out: list[tuple[FeatureSequence, FrameTargets, list[TimedSegment]]] = []
        for i in range(n):
            k = ks[i % len(ks)]
            plan = inventory[k][rng.integers(len(inventory[k]))]
            feats, segs = self.sample(plan, rng)
            targets = make_frame_targets(segs, self.frame_rate, feats.num_frames, dilation_frames)
            out.append((feats, targets, segs))
        return out
