"""Pipeline configuration: YAML file, environment overrides, dumping."""

from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError

ENV_PREFIX = "EMOTRANS_"


@dataclass
class PathsConfig:
    run_dir: str = "runs/default"
    manifests: str = "manifests.jsonl"
    audio_dir: str = "audio"
    checkpoint: str = "checkpoints/mtetr.pt"
    catalog: str | None = None
    topics: str | None = None


@dataclass
class ClientsConfig:
    offline: bool = False
    text_endpoint: str | None = None
    text_timeout_s: float = 60.0
    # "module:factory" specs; None selects the built-in fallback
    tts: str | None = None
    ser: str | None = None
    asr: str | None = None
    features: str | None = None
    embedder: str | None = None
    profile: str | None = None


@dataclass
class DatasetConfig:
    utterances: int = 60
    languages: list[str] = field(default_factory=lambda: ["en", "zh"])
    transitions: list[int] = field(default_factory=lambda: [0, 1, 2, 3])
    speakers: list[str] = field(default_factory=lambda: ["spk01", "spk02", "spk03", "spk04"])
    generation_attempts: int = 3


@dataclass
class AudioConfig:
    sample_rate: int = 16000
    ramp_ms: float = 0.0
    synthesis_attempts: int = 5


@dataclass
class VadConfig:
    backend: str = "energy"
    frame_ms: int = 30
    aggressiveness: int = 2
    window_frames: int = 10
    trigger_ratio: float = 0.9


@dataclass
class MtetrConfig:
    res_blocks: int = 8
    planes: int = 512
    dropout: float = 0.5
    epochs: int = 20
    lr: float = 1e-3
    batch_size: int = 4
    holdout: float = 0.2
    dilation_frames: int = 2
    median_frames: int = 25
    min_segment_s: float = 0.5
    time_budget_s: float | None = None


@dataclass
class AttributesConfig:
    pitch_bounds: list[float] = field(default_factory=lambda: [140.0, 220.0])
    # None derives tertiles from the annotated corpus
    energy_bounds: list[float] | None = None
    speed_en: list[float] = field(default_factory=lambda: [2.5, 4.0])
    speed_zh: list[float] = field(default_factory=lambda: [3.5, 5.5])


@dataclass
class CaptioningConfig:
    max_attempts: int = 3


@dataclass
class EvaluateConfig:
    eer_tolerance_frames: int = 5
    ees: bool = True


@dataclass
class PipelineConfig:
    seed: int = 0
    parallelism: int = 1
    paths: PathsConfig = field(default_factory=PathsConfig)
    clients: ClientsConfig = field(default_factory=ClientsConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    audio: AudioConfig = field(default_factory=AudioConfig)
    vad: VadConfig = field(default_factory=VadConfig)
    mtetr: MtetrConfig = field(default_factory=MtetrConfig)
    attributes: AttributesConfig = field(default_factory=AttributesConfig)
    captioning: CaptioningConfig = field(default_factory=CaptioningConfig)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)

    @property
    def run_dir(self) -> Path:
        return Path(self.paths.run_dir)

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.run_dir / p

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, allow_unicode=True)

    def digest(self) -> str:
        return hashlib.sha256(self.dump().encode("utf-8")).hexdigest()


def _section_classes() -> dict[str, type]:
    return {
        f.name: f.default_factory  # type: ignore[misc]
        for f in dataclasses.fields(PipelineConfig)
        if f.default_factory is not dataclasses.MISSING
    }


def from_dict(data: Mapping[str, Any]) -> PipelineConfig:
    data = dict(data or {})
    sections = _section_classes()
    unknown = set(data) - set(sections) - {"seed", "parallelism"}
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for key in ("seed", "parallelism"):
        if key in data:
            if not isinstance(data[key], int) or isinstance(data[key], bool):
                raise ConfigError(f"{key} must be an integer", field=key)
            kwargs[key] = data[key]
    for name, cls in sections.items():
        values = data.get(name) or {}
        if not isinstance(values, Mapping):
            raise ConfigError(f"section {name!r} must be a mapping", field=name)
        known = {f.name for f in dataclasses.fields(cls)}
        bad = set(values) - known
        if bad:
            raise ConfigError(f"unknown keys {sorted(bad)} in section {name!r}", field=name)
        kwargs[name] = cls(**values)
    cfg = PipelineConfig(**kwargs)
    validate(cfg)
    return cfg


def validate(cfg: PipelineConfig) -> None:
    if cfg.parallelism < 1:
        raise ConfigError("parallelism must be >= 1", field="parallelism")
    if not 0 <= cfg.mtetr.holdout < 1:
        raise ConfigError("mtetr.holdout must be in [0, 1)", field="mtetr.holdout")
    if cfg.vad.backend not in ("energy", "webrtc", "auto"):
        raise ConfigError("vad.backend must be energy, webrtc or auto", field="vad.backend")
    for lang in cfg.dataset.languages:
        if lang not in ("en", "zh"):
            raise ConfigError(f"unsupported language {lang!r}", field="dataset.languages")
    if any(k < 0 for k in cfg.dataset.transitions) or not cfg.dataset.transitions:
        raise ConfigError("dataset.transitions must be non-negative counts", field="dataset.transitions")
    if not cfg.dataset.speakers:
        raise ConfigError("at least one speaker is required", field="dataset.speakers")
    for key in ("catalog", "topics"):
        path = getattr(cfg.paths, key)
        if path is not None and not Path(path).exists():
            raise ConfigError(f"{path} does not exist", field=f"paths.{key}")


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    """``EMOTRANS_<SECTION>_<KEY>=value`` (or ``EMOTRANS_SEED``) as a nested dict.

    Values are parsed as YAML scalars so numbers, booleans and lists work.
    """
    environ = os.environ if environ is None else environ
    sections = _section_classes()
    out: dict[str, Any] = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX) :].lower()
        value = yaml.safe_load(raw) if raw != "" else None
        if rest in ("seed", "parallelism"):
            out[rest] = value
            continue
        for section in sorted(sections, key=len, reverse=True):
            if rest.startswith(section + "_"):
                out.setdefault(section, {})[rest[len(section) + 1 :]] = value
                break
        else:
            raise ConfigError(f"environment override {name} names no known section")
    return out


def merge(base: dict[str, Any], extra: Mapping[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = merge(dict(out[k]), v)
        else:
            out[k] = v
    return out


def load_config(
    path: str | Path | None = None,
    environ: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> PipelineConfig:
    """Defaults < file < environment < explicit overrides (CLI flags).

    A config file must set ``seed`` explicitly.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
        if "seed" not in data:
            raise ConfigError("config file must set a seed", field="seed")
    data = merge(data, env_overrides(environ))
    if overrides:
        data = merge(data, overrides)
    return from_dict(data)
