"""Objective evaluation metrics and dataset statistics."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .attributes import count_text_units
from .audio import Waveform
from .clients import ASRClient, Embedder
from .core import TransitionPlan, UtteranceManifest
from .errors import AlignmentError, EvaluationError, ShapeError


class _NotApplicable:
    """Marker for metrics that are undefined on the given data."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "N/A"

    __str__ = __repr__

    def __bool__(self) -> bool:
        return False


NA = _NotApplicable()


def is_na(value) -> bool:
    return value is NA


def jsonable(value):
    """NA -> None, numpy scalars -> python, recursively."""
    if value is NA:
        return None
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass(frozen=True)
class EvalPair:
    predicted_plan: TransitionPlan
    true_plan: TransitionPlan

    @property
    def k(self) -> int:
        return self.true_plan.transition_count

    @property
    def count_correct(self) -> bool:
        return self.predicted_plan.transition_count == self.k

    @property
    def exact(self) -> bool:
        return self.predicted_plan.emotions == self.true_plan.emotions


def group_by_k(pairs: Iterable[EvalPair]) -> dict[int, list[EvalPair]]:
    groups: dict[int, list[EvalPair]] = defaultdict(list)
    for p in pairs:
        groups[p.k].append(p)
    return dict(sorted(groups.items()))


def acc_etc(pairs: Sequence[EvalPair]) -> float:
    """Percentage of pairs whose predicted transition count is right."""
    if not pairs:
        raise EvaluationError("no pairs to score")
    return 100.0 * sum(p.count_correct for p in pairs) / len(pairs)


def acc_etc_by_k(pairs: Sequence[EvalPair]) -> dict[int, float]:
    if not pairs:
        raise EvaluationError("no pairs to score")
    return {k: acc_etc(g) for k, g in group_by_k(pairs).items()}


def acc_ett(pairs: Sequence[EvalPair]):
    """Exact ordered-sequence accuracy among count-correct pairs, or NA if there are none."""
    good = [p for p in pairs if p.count_correct]
    if not good:
        return NA
    return 100.0 * sum(p.exact for p in good) / len(good)


def exact_sequence_accuracy(pairs: Sequence[EvalPair]) -> float:
    """Unconditional exact-match rate (supplementary to :func:`acc_ett`)."""
    if not pairs:
        raise EvaluationError("no pairs to score")
    return 100.0 * sum(p.exact for p in pairs) / len(pairs)


def fea(predicted: Sequence[int], target: Sequence[int]) -> float:
    """Frame-level 5-way accuracy, in percent."""
    a = np.asarray(predicted)
    b = np.asarray(target)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise EvaluationError("no frames to score")
    return 100.0 * float(np.mean(a == b))


# ---- boundary EER -------------------------------------------------------------

EER_TOLERANCE_FRAMES = 5


def local_peaks(scores: np.ndarray) -> np.ndarray:
    """Indices t with scores[t] >= both neighbours (edges compare one side)."""
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        return np.zeros(0, dtype=np.int64)
    left = np.concatenate([[True], s[1:] >= s[:-1]])
    right = np.concatenate([s[:-1] >= s[1:], [True]])
    return np.flatnonzero(left & right)


def boundaries_from_labels(det: Sequence[float]) -> list[int]:
    """Center frame of every positive run in a (dilated) boundary label track."""
    x = np.asarray(det) > 0.5
    out, t = [], 0
    while t < x.size:
        if x[t]:
            u = t
            while u < x.size and x[u]:
                u += 1
            out.append((t + u - 1) // 2)
            t = u
        else:
            t += 1
    return out


def _outside_mask(T: int, boundaries: Sequence[int], tol: int) -> np.ndarray:
    inside = np.zeros(T, dtype=bool)
    for b in boundaries:
        inside[max(0, b - tol) : b + tol + 1] = True
    return ~inside


def _pick(miss: np.ndarray, fa: np.ndarray) -> float:
    gap = np.abs(miss - fa)
    mean = (miss + fa) / 2
    best = np.lexsort((mean, gap))[0]
    return 100.0 * float(mean[best])


def _rates(miss_counts, n_boundaries, fa_counts, n_outside):
    miss = np.asarray(miss_counts, dtype=float) / n_boundaries
    fa = np.asarray(fa_counts, dtype=float) / n_outside if n_outside else np.zeros(len(fa_counts))
    return miss, fa


def eer(scores: Sequence[float], boundaries: Sequence[int], tolerance_frames: int = EER_TOLERANCE_FRAMES):
    """Boundary-detection equal error rate in percent (NA without true boundaries).

    A detection is a local peak with score >= threshold.  A true boundary is
    missed when no detection lies within ``tolerance_frames``; a false alarm
    is a detection outside every tolerance window, normalized by the number
    of such frames.  Thresholds sweep over the distinct peak scores plus
    +inf; the reported rate is the mean of miss and false-alarm rates at the
    threshold where they are closest.
    """
    s = np.asarray(scores, dtype=float)
    bounds = sorted(set(int(b) for b in boundaries))
    if not bounds:
        return NA
    T = s.size
    peaks = local_peaks(s)
    outside = _outside_mask(T, bounds, tolerance_frames)
    thresholds = np.concatenate([np.unique(s[peaks]), [np.inf]])

    # a boundary is hit for every threshold <= its best nearby peak score
    best = np.full(len(bounds), -np.inf)
    for i, b in enumerate(bounds):
        near = peaks[np.abs(peaks - b) <= tolerance_frames]
        if near.size:
            best[i] = s[near].max()
    best.sort()
    fa_scores = np.sort(s[peaks[outside[peaks]]])
    miss_counts = np.searchsorted(best, thresholds, side="left")
    fa_counts = fa_scores.size - np.searchsorted(fa_scores, thresholds, side="left")
    miss, fa = _rates(miss_counts, len(bounds), fa_counts, int(outside.sum()))
    return _pick(miss, fa)


def eer_bruteforce(scores, boundaries, tolerance_frames: int = EER_TOLERANCE_FRAMES):
    """Reference O(T * thresholds) implementation of :func:`eer`."""
    s = [float(v) for v in scores]
    bounds = sorted(set(int(b) for b in boundaries))
    if not bounds:
        return NA
    T = len(s)
    peaks = [
        t for t in range(T)
        if (t == 0 or s[t] >= s[t - 1]) and (t == T - 1 or s[t] >= s[t + 1])
    ]
    outside = [all(abs(t - b) > tolerance_frames for b in bounds) for t in range(T)]
    n_out = sum(outside)
    thresholds = sorted({s[t] for t in peaks}) + [math.inf]
    miss_counts, fa_counts = [], []
    for th in thresholds:
        detections = [t for t in peaks if s[t] >= th]
        miss_counts.append(
            sum(1 for b in bounds if not any(abs(d - b) <= tolerance_frames for d in detections))
        )
        fa_counts.append(sum(1 for d in detections if outside[d]))
    miss, fa = _rates(miss_counts, len(bounds), fa_counts, n_out)
    return _pick(miss, fa)


# ---- EES ---------------------------------------------------------------------


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aa, bb = float(np.dot(a, a)), float(np.dot(b, b))
    if aa == 0 or bb == 0:
        return 0.0
    # sqrt(aa * bb) == aa exactly when a == b, so identical vectors give 1.0
    return float(np.clip(np.dot(a, b) / math.sqrt(aa * bb), -1.0, 1.0))


def alignment_char_count(text: str) -> int:
    """Characters that an ASR char-timing track is expected to carry."""
    return sum(1 for c in text if c.isalnum())


def ees_boundaries(
    segment_texts: Sequence[str], char_timings: Sequence, duration_s: float
) -> list[tuple[float, float]]:
    """Split [0, duration] at the char timings matching cumulative reference counts."""
    counts = np.cumsum([alignment_char_count(t) for t in segment_texts])
    if len(char_timings) < counts[-1]:
        raise AlignmentError(
            f"ASR produced {len(char_timings)} characters, reference needs {int(counts[-1])}"
        )
    cuts = [0.0]
    for c in counts[:-1]:
        c = int(c)
        if c == 0:
            cuts.append(cuts[-1])
            continue
        left = char_timings[c - 1].end_s
        right = char_timings[c].start_s if c < len(char_timings) else left
        cuts.append(0.5 * (left + right))
    cuts.append(duration_s)
    return list(zip(cuts[:-1], cuts[1:]))


def ees(
    synth: Waveform,
    true_segment_texts: Sequence[str],
    asr_client: ASRClient,
    embedder: Embedder,
    truth_embeddings: Sequence[np.ndarray],
) -> float:
    """Product over segments of cosine(embed(synth segment), truth embedding)."""
    if len(true_segment_texts) != len(truth_embeddings):
        raise ShapeError("one truth embedding per reference segment is required")
    transcript = asr_client.transcribe(synth)
    spans = ees_boundaries(true_segment_texts, transcript.char_timings, synth.duration_s)
    score = 1.0
    for (a, b), ref in zip(spans, truth_embeddings):
        piece = synth.slice_s(a, b)
        if len(piece) < 2:
            raise AlignmentError(f"empty synthesized segment ({a:.3f}, {b:.3f})")
        score *= cosine(embedder.embed(piece), ref)
    return score


def ees_from_cosines(cosines: Iterable[float]) -> float:
    return float(math.prod(cosines))


# ---- dataset statistics --------------------------------------------------------

TRANSITION_HEADERS = {0: "w/o Trans", 1: "One Trans", 2: "Two Trans", 3: "Three Trans"}
STAT_ROWS = (
    "Language",
    "Utterances",
    "Words",
    "Max words per utterance",
    "Min words per utterance",
    "Mean words per utterance",
    "Duration(h)",
    "Max utterance duration(s)",
    "Min utterance duration(s)",
    "Mean utterance duration(s)",
    "Max caption (V_I) length",
    "Min caption (V_I) length",
    "Mean caption (V_I) length",
    "Max caption (V_D) length",
    "Min caption (V_D) length",
    "Mean caption (V_D) length",
    "Emotion Transitions",
    "Speakers",
)
ABSENT = "-"


@dataclass
class StatsTable:
    columns: list[tuple[int, str]]  # (k, language)
    cells: dict[tuple[int, str], dict[str, object]]

    def value(self, row: str, col: tuple[int, str]):
        return self.cells[col][row]

    def header(self) -> list[str]:
        return ["Item"] + [f"{TRANSITION_HEADERS.get(k, f'{k} Trans')}" for k, _ in self.columns]

    def rows(self) -> list[list[str]]:
        out = []
        for row in STAT_ROWS:
            out.append([row] + [_fmt(self.cells[c][row]) for c in self.columns])
        return out

    def to_tsv(self) -> str:
        lines = ["\t".join(self.header())] + ["\t".join(r) for r in self.rows()]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        table = [self.header()] + self.rows()
        widths = [max(len(r[i]) for r in table) for i in range(len(table[0]))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in table]
        lines.insert(2, "-" * len(lines[0]))
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            f"{k}:{lang}": {row: jsonable(self.cells[(k, lang)][row]) for row in STAT_ROWS}
            for k, lang in self.columns
        }


def _fmt(v) -> str:
    if v is None or v is NA:
        return ABSENT
    if isinstance(v, float):
        return f"{v:.2f}"
    if isinstance(v, int):
        return f"{v:,}"
    return str(v)


def _spread(values: list[float], prefix: str, cell: dict, integer: bool) -> None:
    if not values:
        for part in ("Max", "Min", "Mean"):
            cell[f"{part} {prefix}"] = None
        return
    cast = int if integer else float
    cell[f"Max {prefix}"] = cast(max(values))
    cell[f"Min {prefix}"] = cast(min(values))
    cell[f"Mean {prefix}"] = float(np.mean(values))


def dataset_stats(manifests: Sequence[UtteranceManifest]) -> StatsTable:
    """Per (transition count, language) cell of the dataset statistics table.

    Words are whitespace tokens for English and CJK characters for Chinese;
    caption lengths use the same unit.  Missing captions leave their rows absent.
    """
    if not manifests:
        raise EvaluationError("no manifests to summarize")
    groups: dict[tuple[int, str], list[UtteranceManifest]] = defaultdict(list)
    for m in manifests:
        groups[(m.transition_count, m.language)].append(m)
    columns = sorted(groups, key=lambda c: (c[0], c[1]))
    cells = {}
    for col in columns:
        ms = groups[col]
        lang = col[1]
        words = [count_text_units(m.text, lang) for m in ms]
        durs = [m.duration_s for m in ms]
        cell: dict[str, object] = {"Language": lang.upper(), "Utterances": len(ms), "Words": int(sum(words))}
        _spread(words, "words per utterance", cell, integer=True)
        cell["Duration(h)"] = float(sum(durs) / 3600.0)
        _spread(durs, "utterance duration(s)", cell, integer=False)
        for version, attr in (("V_I", "v_i"), ("V_D", "v_d")):
            lengths = [
                count_text_units(getattr(m.captions, attr), lang)
                for m in ms
                if m.captions is not None and getattr(m.captions, attr)
            ]
            _spread(lengths, f"caption ({version}) length", cell, integer=True)
        cell["Emotion Transitions"] = len({m.plan.emotions for m in ms})
        cell["Speakers"] = len({m.speaker_id for m in ms})
        cells[col] = cell
    return StatsTable(columns, cells)
