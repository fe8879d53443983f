"""Stage drivers behind the command-line interface.

Every stage reads and writes plain files under ``config.paths.run_dir`` so
stages can be rerun individually.  All randomness is drawn from named
substreams of ``config.seed``.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__, plotting
from .attributes import AttributeThresholds, analyze_segment, build_attribute_sequence
from .audio import Waveform, read_wav, write_wav
from .captions import compose_with_regeneration, parse_caption_plan, prompt_spec
from .clients import (
    ASRClient,
    Embedder,
    FeatureExtractor,
    FeatureSequence,
    HttpTextGenerator,
    ProfileClassifier,
    SERClient,
    TextGenerator,
    TTSClient,
    load_object,
)
from .config import PipelineConfig
from .core import (
    EMOTIONS,
    CaptionRecord,
    SentenceRecord,
    SpeakerProfile,
    TimedSegment,
    UtteranceManifest,
    segments_plan,
)
from .errors import (
    AlignmentError,
    CompositionError,
    ConsistencyError,
    ValidationError,
)
from .fallback import (
    AlignerASR,
    PitchSER,
    SpectralEmbedder,
    SpectralFeatureExtractor,
    ToneTTS,
    fallback_speaker_profile,
)
from .manifest import read_manifests, write_manifests
from .metrics import (
    NA,
    EvalPair,
    acc_etc,
    acc_ett,
    ees,
    exact_sequence_accuracy,
    group_by_k,
    jsonable,
)
from .metrics import dataset_stats as compute_stats
from .mtetr import (
    ModelConfig,
    Smoothing,
    TrainConfig,
    build_model,
    decode,
    evaluate_recognizer,
    format_segments,
    load_checkpoint,
    make_frame_targets,
    predict,
    save_checkpoint,
    train,
)
from .planner import GenerationRequest, PERSPECTIVES, TopicHierarchy, enumerate_transition_plans, generate_discourse
from .preprocess import (
    AlignmentMap,
    aggregate_segments,
    map_to_original,
    map_to_trimmed,
    remove_silence,
    vad_classify,
)
from .rng import substream, substream_seed
from .speech import (
    ReferenceCatalog,
    concatenate,
    normalize_loudness,
    select_reference,
    synthesize_with_retry,
)
from .ssml import emit_ssml

log = logging.getLogger(__name__)


# ---- clients ---------------------------------------------------------------------


@dataclass
class Clients:
    text: TextGenerator | None
    tts: TTSClient
    ser: SERClient
    asr: ASRClient | None
    features: FeatureExtractor
    embedder: Embedder
    profile: ProfileClassifier | None

    def asr_for(self, text: str) -> ASRClient:
        """Configured ASR, or the known-transcript aligner."""
        return self.asr if self.asr is not None else AlignerASR(text)


def make_clients(cfg: PipelineConfig, offline: bool | None = None) -> Clients:
    c = cfg.clients
    offline = c.offline if offline is None else offline

    def pick(spec: str | None, fallback: Callable[[], Any]):
        return fallback() if offline or not spec else load_object(spec)

    text = None
    if not offline and c.text_endpoint:
        text = HttpTextGenerator(c.text_endpoint, timeout_s=c.text_timeout_s)
    return Clients(
        text=text,
        tts=pick(c.tts, lambda: ToneTTS(sample_rate=cfg.audio.sample_rate)),
        ser=pick(c.ser, PitchSER),
        asr=None if offline or not c.asr else load_object(c.asr),
        features=pick(c.features, lambda: SpectralFeatureExtractor(seed=substream_seed(cfg.seed, "features") % 2**32)),
        embedder=pick(c.embedder, SpectralEmbedder),
        profile=None if offline or not c.profile else load_object(c.profile),
    )


# ---- file helpers ------------------------------------------------------------------


def _write_json(path: Path, obj: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(obj), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def manifests_path(cfg: PipelineConfig) -> Path:
    return cfg.resolve(cfg.paths.manifests)


def load_manifests(cfg: PipelineConfig) -> list[UtteranceManifest]:
    path = manifests_path(cfg)
    if not path.exists():
        raise ValidationError(f"manifest file {path} does not exist", field="paths.manifests")
    manifests = read_manifests(path)
    if not manifests:
        raise ValidationError(f"manifest file {path} is empty", field="paths.manifests")
    return manifests


def _map(cfg: PipelineConfig, fn: Callable, items: Sequence) -> list:
    """Order-preserving map over a worker pool of ``cfg.parallelism`` threads."""
    if cfg.parallelism <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(cfg.parallelism) as pool:
        return list(pool.map(fn, items))


def write_run_metadata(cfg: PipelineConfig, command: str, summary: dict | None = None) -> Path:
    import torch

    path = cfg.run_dir / "run_metadata.json"
    meta = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
    meta.update(
        {
            "config_sha256": cfg.digest(),
            "seed": cfg.seed,
            "versions": {
                "emotranscap": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "torch": torch.__version__,
            },
        }
    )
    meta.setdefault("commands", {})[command] = {
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "summary": jsonable(summary or {}),
    }
    return _write_json(path, meta)


def _catalog(cfg: PipelineConfig) -> ReferenceCatalog:
    if cfg.paths.catalog:
        catalog = ReferenceCatalog.load(cfg.paths.catalog)
    else:
        catalog = ReferenceCatalog.fallback(cfg.dataset.speakers)
    catalog.validate(cfg.dataset.speakers)
    return catalog


# ---- plan ---------------------------------------------------------------------------


def run_plan(cfg: PipelineConfig) -> dict:
    max_k = max(cfg.dataset.transitions)
    inventory = {k: enumerate_transition_plans(EMOTIONS, k) for k in range(max_k + 1)}
    _write_json(cfg.run_dir / "plans.json", {str(k): [p.to_json() for p in v] for k, v in inventory.items()})
    return {"counts": {k: len(v) for k, v in inventory.items()}, "total": sum(map(len, inventory.values()))}


# ---- build-dataset --------------------------------------------------------------------


def _cells(cfg: PipelineConfig) -> list[tuple[int, str]]:
    return [(k, lang) for k in cfg.dataset.transitions for lang in cfg.dataset.languages]


def build_utterance(cfg: PipelineConfig, clients: Clients, index: int, catalog, topics, inventory) -> UtteranceManifest:
    cells = _cells(cfg)
    k, language = cells[index % len(cells)]
    rng = substream(cfg.seed, "build", index)
    plan = inventory[k][int(rng.integers(len(inventory[k])))]
    speaker = cfg.dataset.speakers[int(rng.integers(len(cfg.dataset.speakers)))]
    pairs = topics.pairs()
    topic = pairs[int(rng.integers(len(pairs)))]
    perspective = PERSPECTIVES[int(rng.integers(len(PERSPECTIVES)))]
    seed = substream_seed(cfg.seed, "utterance", index)
    uid = f"utt{index:05d}"

    req = GenerationRequest(topic, plan, perspective, language, seed)
    texts = generate_discourse(clients.text, req, cfg.dataset.generation_attempts, topics)
    results = []
    for j, (text, emotion) in enumerate(zip(texts, plan.emotions)):
        reference = select_reference(catalog, speaker, emotion)
        results.append(
            synthesize_with_retry(
                clients.tts, clients.ser, text, emotion, reference,
                cfg.audio.synthesis_attempts, seed=substream_seed(seed, "tts", j),
            )
        )
    waves = normalize_loudness([r.waveform for r in results])
    discourse, timeline = concatenate(waves, plan.emotions, cfg.audio.ramp_ms)

    audio_dir = Path(cfg.paths.audio_dir) / uid
    write_wav(cfg.run_dir / audio_dir / "discourse.wav", discourse)
    sentences = []
    for j, (text, wav, seg) in enumerate(zip(texts, waves, timeline)):
        ref = audio_dir / f"sentence{j}.wav"
        write_wav(cfg.run_dir / ref, wav)
        sentences.append(SentenceRecord(text, seg.emotion, seg.start_s, seg.end_s, ref.as_posix()))
    profile = fallback_speaker_profile(speaker)
    return UtteranceManifest(
        id=uid,
        language=language,
        speaker_id=speaker,
        plan=plan,
        sentences=tuple(sentences),
        discourse_audio_ref=(audio_dir / "discourse.wav").as_posix(),
        seed=seed,
        extra={
            "topic": list(topic),
            "perspective": perspective,
            "profile": {"gender": profile.gender, "age_bucket": profile.age_bucket},
            "synthesis": [r.provenance for r in results],
        },
    )


def run_build_dataset(cfg: PipelineConfig, clients: Clients) -> dict:
    catalog = _catalog(cfg)
    topics = TopicHierarchy.load(cfg.paths.topics)
    inventory = {k: enumerate_transition_plans(EMOTIONS, k) for k in set(cfg.dataset.transitions)}
    failures: list[dict] = []

    def one(i: int):
        try:
            return build_utterance(cfg, clients, i, catalog, topics, inventory)
        except ConsistencyError as exc:
            failures.append({"index": i, "error": str(exc)})
            log.warning("utterance %d dropped: %s", i, exc)
            return None

    built = [m for m in _map(cfg, one, list(range(cfg.dataset.utterances))) if m is not None]
    if not built:
        raise ValidationError("no utterance survived synthesis", field="dataset")
    write_manifests(manifests_path(cfg), built)
    attempts = [p["attempts"] for m in built for p in m.extra["synthesis"]]
    return {
        "utterances": len(built),
        "dropped": len(failures),
        "sentences": len(attempts),
        "mean_synthesis_attempts": float(np.mean(attempts)),
        "audio_hours": sum(m.duration_s for m in built) / 3600.0,
    }


# ---- preprocess -----------------------------------------------------------------------


def _alignment_path(cfg: PipelineConfig) -> Path:
    return cfg.run_dir / "preprocess" / "alignment.jsonl"


def _trimmed_path(cfg: PipelineConfig, uid: str) -> Path:
    return cfg.run_dir / "preprocess" / f"{uid}.wav"


def preprocess_utterance(cfg: PipelineConfig, m: UtteranceManifest) -> dict:
    wav = read_wav(cfg.run_dir / m.discourse_audio_ref)
    v = cfg.vad
    decisions = vad_classify(wav, v.frame_ms, v.aggressiveness, v.backend)
    spans = aggregate_segments(decisions, v.window_frames, v.trigger_ratio)
    if not spans:
        log.warning("%s: no speech detected, keeping the whole signal", m.id)
        spans = [(0.0, wav.duration_s)]
    trimmed, amap = remove_silence(wav, spans)
    write_wav(_trimmed_path(cfg, m.id), trimmed)
    return {"id": m.id, "kept_spans": amap.to_json(), "original_s": wav.duration_s, "kept_s": amap.total_kept}


def run_preprocess(cfg: PipelineConfig, clients: Clients) -> dict:
    manifests = load_manifests(cfg)
    rows = _map(cfg, lambda m: preprocess_utterance(cfg, m), manifests)
    path = _alignment_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    total = sum(r["original_s"] for r in rows)
    kept = sum(r["kept_s"] for r in rows)
    return {"utterances": len(rows), "removed_s": total - kept, "kept_fraction": kept / total if total else 0.0}


def load_alignments(cfg: PipelineConfig) -> dict[str, AlignmentMap]:
    path = _alignment_path(cfg)
    if not path.exists():
        raise ValidationError("run preprocess first: alignment.jsonl is missing", field="preprocess")
    out = {}
    for line in path.read_text(encoding="utf-8").split("\n"):
        if line.strip():
            row = json.loads(line)
            out[row["id"]] = AlignmentMap.from_json(row["kept_spans"])
    return out


# ---- features and targets --------------------------------------------------------------


def utterance_features(cfg: PipelineConfig, clients: Clients, uid: str) -> FeatureSequence:
    """Features of the trimmed audio, cached under ``features/``."""
    cache = cfg.run_dir / "features" / f"{uid}.npy"
    if cache.exists():
        return FeatureSequence(np.load(cache))
    feats = clients.features.extract(read_wav(_trimmed_path(cfg, uid)))
    cache.parent.mkdir(parents=True, exist_ok=True)
    np.save(cache, feats.frames)
    return feats


def trimmed_segments(m: UtteranceManifest, amap: AlignmentMap, T: int, frame_rate: float) -> list[TimedSegment]:
    """Reference segments moved onto the trimmed timeline and clipped to ``T`` frames."""
    end_total = T / frame_rate
    segs: list[TimedSegment] = []
    for s in m.true_segments():
        a = min(map_to_trimmed(amap, s.start_s), end_total)
        b = min(map_to_trimmed(amap, s.end_s), end_total)
        if b - a <= 1e-9:
            continue
        if segs and segs[-1].emotion == s.emotion:
            segs[-1] = TimedSegment(segs[-1].start_s, b, s.emotion)
        else:
            segs.append(TimedSegment(a, b, s.emotion))
    if not segs:
        raise AlignmentError(f"{m.id}: no reference segment survives trimming")
    segs[0] = TimedSegment(0.0, segs[0].end_s, segs[0].emotion)
    segs[-1] = TimedSegment(segs[-1].start_s, end_total, segs[-1].emotion)
    return segs


def _examples(cfg, clients, manifests, alignments):
    out = []
    for m in manifests:
        feats = utterance_features(cfg, clients, m.id)
        segs = trimmed_segments(m, alignments[m.id], feats.num_frames, feats.frame_rate)
        targets = make_frame_targets(segs, feats.frame_rate, feats.num_frames, cfg.mtetr.dilation_frames)
        out.append((feats, targets, segs))
    return out


def split_ids(cfg: PipelineConfig, ids: Sequence[str]) -> tuple[list[str], list[str]]:
    ids = sorted(ids)
    order = substream(cfg.seed, "split").permutation(len(ids))
    n_hold = int(round(cfg.mtetr.holdout * len(ids))) if len(ids) > 1 else 0
    n_hold = min(max(n_hold, 1 if cfg.mtetr.holdout > 0 and len(ids) > 1 else 0), len(ids) - 1)
    hold = sorted(ids[i] for i in order[:n_hold])
    return [i for i in ids if i not in set(hold)], hold


# ---- train-mtetr -----------------------------------------------------------------------


def run_train(cfg: PipelineConfig, clients: Clients) -> dict:
    manifests = load_manifests(cfg)
    alignments = load_alignments(cfg)
    train_ids, hold_ids = split_ids(cfg, [m.id for m in manifests])
    by_id = {m.id: m for m in manifests}
    train_set = _examples(cfg, clients, [by_id[i] for i in train_ids], alignments)
    dim = train_set[0][0].dim
    mc = cfg.mtetr
    model_cfg = ModelConfig(res_blocks=mc.res_blocks, planes=mc.planes, dropout=mc.dropout, in_planes=dim)
    seed = substream_seed(cfg.seed, "train") % 2**31
    model = build_model(model_cfg, seed)
    fit = train(
        model,
        [(f, t) for f, t, _ in train_set],
        TrainConfig(
            epochs=mc.epochs, lr=mc.lr, batch_size=mc.batch_size, seed=seed, time_budget_s=mc.time_budget_s,
        ),
    )
    ckpt = cfg.resolve(cfg.paths.checkpoint)
    save_checkpoint(
        ckpt, model, fit.weighting,
        meta={"train_ids": train_ids, "holdout_ids": hold_ids, "history": fit.history, "pos_weight": fit.pos_weight},
    )
    log_path = ckpt.parent / "loss_log.tsv"
    keys = ["epoch", "total", "dia", "det", "s_dia", "s_det"]
    log_path.write_text(
        "\t".join(keys) + "\n"
        + "".join("\t".join(f"{h[k]:.6g}" for k in keys) + "\n" for h in fit.history),
        encoding="utf-8",
    )
    plotting.loss_curve(fit.history, ckpt.parent / "loss.png")
    return {
        "train_utterances": len(train_ids),
        "holdout_utterances": len(hold_ids),
        "epochs": len(fit.history) - 1,
        "initial_loss": fit.history[0]["total"],
        "final_loss": fit.history[-1]["total"],
    }


# ---- annotate ------------------------------------------------------------------------------


def predicted_segments(model, feats: FeatureSequence, amap: AlignmentMap, duration_s: float, smoothing: Smoothing):
    """Decoded segments on the original timeline plus the raw trimmed-domain ones."""
    probs, det = predict(model, feats)
    trimmed = decode(probs, feats.frame_rate, smoothing)
    total = amap.total_kept
    cuts = [0.0]
    for s in trimmed[1:]:
        cuts.append(map_to_original(amap, min(s.start_s, total)) if amap.kept_spans else s.start_s)
    cuts.append(duration_s)
    out = []
    for s, a, b in zip(trimmed, cuts, cuts[1:]):
        if b > a:
            out.append(TimedSegment(a, b, s.emotion))
    return out, trimmed, probs, det


def _segment_transcripts(m: UtteranceManifest, segments: Sequence[TimedSegment]) -> list[str]:
    sep = "" if m.language == "zh" else " "
    buckets: list[list[str]] = [[] for _ in segments]
    for s in m.sentences:
        mid = 0.5 * (s.start_s + s.end_s)
        i = next((i for i, seg in enumerate(segments) if seg.start_s <= mid < seg.end_s), len(segments) - 1)
        buckets[i].append(s.text)
    return [sep.join(b) for b in buckets]


def _thresholds(cfg: PipelineConfig, energies: Iterable[float]) -> AttributeThresholds:
    a = cfg.attributes
    base = AttributeThresholds(
        pitch_hz=tuple(a.pitch_bounds),
        energy_db=tuple(a.energy_bounds) if a.energy_bounds else (-30.0, -20.0),
        speed={"en": tuple(a.speed_en), "zh": tuple(a.speed_zh)},
    )
    return base if a.energy_bounds else base.with_energy_tertiles(list(energies))


def _profile(clients: Clients, m: UtteranceManifest, wav: Waveform) -> SpeakerProfile:
    if clients.profile is not None:
        return clients.profile.profile(wav)
    p = m.extra.get("profile") or {}
    return SpeakerProfile(p.get("gender", "unknown"), p.get("age_bucket"))


def run_annotate(cfg: PipelineConfig, clients: Clients) -> dict:
    manifests = load_manifests(cfg)
    alignments = load_alignments(cfg)
    model, _, _ = load_checkpoint(cfg.resolve(cfg.paths.checkpoint))
    smoothing = Smoothing(cfg.mtetr.median_frames, cfg.mtetr.min_segment_s)

    def analyse(m: UtteranceManifest):
        feats = utterance_features(cfg, clients, m.id)
        segs, _, _, _ = predicted_segments(model, feats, alignments[m.id], m.duration_s, smoothing)
        annotation = {"mtetr": format_segments(segs)}
        if segments_plan(segs) != m.plan:
            return m, None, {**annotation, "status": "rejected", "reason": "plan_mismatch"}
        wav = read_wav(cfg.run_dir / m.discourse_audio_ref)
        texts = _segment_transcripts(m, segs)
        analyses = [
            analyze_segment(wav.slice_s(s.start_s, s.end_s), s, t, m.language) for s, t in zip(segs, texts)
        ]
        return m, (segs, analyses, _profile(clients, m, wav)), annotation

    staged = _map(cfg, analyse, manifests)
    thresholds = _thresholds(cfg, [a.energy_db for _, st, _ in staged if st for a in st[1]])

    def compose(item):
        m, st, annotation = item
        if st is None:
            return dataclasses.replace(m, captions=None, attributes=None, extra={**m.extra, "annotation": annotation})
        segs, analyses, profile = st
        attrs = build_attribute_sequence(m, segs, analyses, profile, thresholds)
        seed = substream_seed(cfg.seed, "caption", m.id)
        try:
            vi = compose_with_regeneration(
                clients.text, prompt_spec("V_I", attrs, m.language), attrs, cfg.captioning.max_attempts, seed=seed
            )
            vd = compose_with_regeneration(
                clients.text, prompt_spec("V_D", attrs, m.language), attrs, cfg.captioning.max_attempts, seed=seed
            )
        except CompositionError as exc:
            annotation.update(status="rejected", reason="caption", detail=str(exc))
            return dataclasses.replace(m, captions=None, attributes=attrs, extra={**m.extra, "annotation": annotation})
        lines = [ln for ln in vi.text.splitlines() if ln.strip()]
        ssml = emit_ssml(attrs, m.language, lines if len(lines) == len(attrs) else None)
        annotation.update(status="accepted", caption_attempts={"V_I": vi.attempts, "V_D": vd.attempts})
        return dataclasses.replace(
            m,
            captions=CaptionRecord(vi.text, vd.text, attrs.plan, ssml),
            attributes=attrs,
            extra={**m.extra, "annotation": annotation},
        )

    annotated = _map(cfg, compose, staged)
    write_manifests(manifests_path(cfg), annotated)
    accepted = sum(1 for m in annotated if m.captions is not None)
    return {
        "utterances": len(annotated),
        "accepted": accepted,
        "rejected": len(annotated) - accepted,
        "energy_bounds_db": list(thresholds.energy_db),
    }


# ---- evaluate -------------------------------------------------------------------------------


def _per_k(pairs: Sequence[EvalPair], fn) -> dict[int, Any]:
    return {k: fn(g) for k, g in group_by_k(pairs).items()}


def _ees_for(cfg, clients, catalog, m: UtteranceManifest) -> float:
    plan = parse_caption_plan(m.captions.v_i)
    segments = m.true_segments()
    texts = _segment_transcripts(m, segments)
    wav = read_wav(cfg.run_dir / m.discourse_audio_ref)
    truth = [clients.embedder.embed(wav.slice_s(s.start_s, s.end_s)) for s in segments]
    pieces = []
    emotions = []
    for j, text in enumerate(texts):
        emotion = plan.emotions[min(j, len(plan) - 1)]
        ref = select_reference(catalog, m.speaker_id, emotion)
        pieces.append(clients.tts.synthesize(text, ref, substream_seed(m.seed, "resynth", j)))
        emotions.append(emotion)
    synth, _ = concatenate(normalize_loudness(pieces), emotions)
    return ees(synth, texts, clients.asr_for(m.text), clients.embedder, truth)


def run_evaluate(cfg: PipelineConfig, clients: Clients) -> dict:
    manifests = load_manifests(cfg)
    report: dict[str, Any] = {"utterances": len(manifests)}
    captioned = [m for m in manifests if m.captions is not None]
    report["captioned"] = len(captioned)

    pairs = [EvalPair(parse_caption_plan(m.captions.v_i), m.plan) for m in captioned]
    ks = sorted(set(cfg.dataset.transitions) | {m.transition_count for m in manifests})
    if pairs:
        report["Acc_ETC"] = _per_k(pairs, acc_etc)
        report["Acc_ETT"] = _per_k(pairs, acc_ett)
        report["Acc_ETT_unconditional"] = _per_k(pairs, exact_sequence_accuracy)
        report["Acc_ETC_all"] = acc_etc(pairs)
        report["Acc_ETT_all"] = acc_ett(pairs)
    else:
        report["Acc_ETC"] = {k: NA for k in ks}
        report["Acc_ETT"] = {k: NA for k in ks}

    # recognizer on the held-out split
    ckpt = cfg.resolve(cfg.paths.checkpoint)
    figures = cfg.run_dir / "reports"
    if ckpt.exists():
        model, _, meta = load_checkpoint(ckpt)
        by_id = {m.id: m for m in manifests}
        hold = [by_id[i] for i in meta.get("holdout_ids", []) if i in by_id] or manifests
        examples = _examples(cfg, clients, hold, load_alignments(cfg))
        rec = evaluate_recognizer(
            model, examples, Smoothing(cfg.mtetr.median_frames, cfg.mtetr.min_segment_s),
            cfg.evaluate.eer_tolerance_frames,
        )
        report["FEA"] = rec.fea
        report["EER"] = rec.eer
        report["Acc_ET"] = rec.acc_k
        report["holdout_utterances"] = len(hold)
        feats, targets, _ = examples[0]
        probs, det = predict(model, feats)
        pred = make_frame_targets(rec.predictions[0], feats.frame_rate, feats.num_frames).dia
        plotting.frame_timeline(targets.dia, pred, det, feats.frame_rate, figures / "timeline.png")
        conf = np.zeros((len(EMOTIONS), len(EMOTIONS)), dtype=int)
        for (f, t, _), segs in zip(examples, rec.predictions):
            p = make_frame_targets(segs, f.frame_rate, f.num_frames).dia
            np.add.at(conf, (t.dia, p), 1)
        plotting.confusion(conf, figures / "confusion.png")
    else:
        report["FEA"] = report["EER"] = NA
        report["Acc_ET"] = {k: NA for k in ks}

    # embedding similarity of speech resynthesized from the caption plan
    ees_scores: dict[int, list[float]] = {}
    failures = 0
    if cfg.evaluate.ees and captioned:
        catalog = _catalog(cfg)

        def score(m):
            try:
                return m.transition_count, _ees_for(cfg, clients, catalog, m)
            except AlignmentError as exc:
                log.warning("%s: EES skipped: %s", m.id, exc)
                return m.transition_count, None

        for k, val in _map(cfg, score, captioned):
            if val is None:
                failures += 1
            else:
                ees_scores.setdefault(k, []).append(val)
    report["EES"] = {k: (100.0 * float(np.mean(ees_scores[k])) if ees_scores.get(k) else NA) for k in ks}
    report["EES_failures"] = failures

    _write_json(figures / "metrics.json", report)
    (figures / "metrics.txt").write_text(metrics_text(report, ks), encoding="utf-8")
    bars = {name: {k: v for k, v in report[name].items() if v is not NA} for name in ("Acc_ETC", "Acc_ETT", "EES", "Acc_ET")}
    plotting.per_k_bars(bars, figures / "metrics_by_k.png")
    return report


def _cell(v) -> str:
    if v is None or v is NA:
        return "N/A"
    return f"{v:.2f}"


def metrics_text(report: dict, ks: Sequence[int]) -> str:
    header = ["Metric"] + [f"k={k}" for k in ks]
    rows = [header]
    for name in ("Acc_ETC", "Acc_ETT", "Acc_ETT_unconditional", "EES", "Acc_ET"):
        if name in report:
            rows.append([name] + [_cell(report[name].get(k)) for k in ks])
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "-" * len(lines[0]))
    lines.append("")
    lines.append(f"FEA  {_cell(report.get('FEA'))}")
    lines.append(f"EER  {_cell(report.get('EER'))}")
    lines.append(f"utterances {report['utterances']}, captioned {report['captioned']}")
    return "\n".join(lines) + "\n"


# ---- stats -----------------------------------------------------------------------------------


def run_stats(cfg: PipelineConfig, clients: Clients | None = None) -> dict:
    manifests = load_manifests(cfg)
    table = compute_stats(manifests)
    out = cfg.run_dir / "stats"
    out.mkdir(parents=True, exist_ok=True)
    (out / "stats.tsv").write_text(table.to_tsv(), encoding="utf-8")
    (out / "stats.txt").write_text(table.to_text(), encoding="utf-8")
    _write_json(out / "stats.json", table.to_json())
    groups: dict[str, list[float]] = {}
    for m in manifests:
        groups.setdefault(f"k={m.transition_count} {m.language.upper()}", []).append(m.duration_s)
    plotting.distributions(dict(sorted(groups.items())), out / "durations.png", "utterance duration (s)")
    return {"columns": [f"{k}:{lang}" for k, lang in table.columns], "utterances": len(manifests)}


STAGES = {
    "build-dataset": run_build_dataset,
    "preprocess": run_preprocess,
    "train-mtetr": run_train,
    "annotate": run_annotate,
    "evaluate": run_evaluate,
    "stats": run_stats,
}
