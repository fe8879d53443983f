"""Transition-plan enumeration, topic hierarchy and discourse generation."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from .clients import TextGenerator
from .core import LANGUAGES, EmotionLabel, TransitionPlan
from .errors import ClientError, GenerationError, RangeError, ValidationError
from .rng import substream

log = logging.getLogger(__name__)

PERSPECTIVES = ("first", "second", "third")
NUM_PRIMARY_TOPICS = 7


def enumerate_transition_plans(
    alphabet: Iterable[EmotionLabel | str], k: int
) -> list[TransitionPlan]:
    """All length-``k+1`` sequences over ``alphabet`` without adjacent repeats.

    Plans come out in lexicographic order of the emotion names, so the
    count is ``|A| * (|A|-1)**k``.
    """
    if k < 0:
        raise RangeError(f"transition count must be >= 0, got {k}", field="k")
    letters = sorted({EmotionLabel.parse(e) for e in alphabet}, key=lambda e: e.value)
    if k >= 1 and len(letters) < 2:
        raise RangeError("need at least two emotions to form a transition", field="alphabet")

    plans: list[TransitionPlan] = []

    def extend(prefix: list[EmotionLabel]) -> None:
        if len(prefix) == k + 1:
            plans.append(TransitionPlan(tuple(prefix)))
            return
        for e in letters:
            if not prefix or prefix[-1] != e:
                prefix.append(e)
                extend(prefix)
                prefix.pop()

    extend([])
    return plans


def plan_inventory(alphabet: Iterable[EmotionLabel | str], max_k: int = 3) -> dict[int, list[TransitionPlan]]:
    alphabet = list(alphabet)
    return {k: enumerate_transition_plans(alphabet, k) for k in range(max_k + 1)}


@dataclass
class TopicHierarchy:
    primary_topics: list[str]
    secondary: dict[str, list[str]]
    translations: dict[str, dict[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.primary_topics) != NUM_PRIMARY_TOPICS:
            raise ValidationError(
                f"expected {NUM_PRIMARY_TOPICS} primary topics, got {len(self.primary_topics)}",
                field="primary_topics",
            )
        for p in self.primary_topics:
            if not self.secondary.get(p):
                raise ValidationError(f"primary topic {p!r} has no secondary topics", "secondary")

    @classmethod
    def load(cls, path: str | Path | None = None) -> "TopicHierarchy":
        if path is None:
            text = resources.files("emotranscap.data").joinpath("topics.json").read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        data = json.loads(text)
        return cls(
            primary_topics=list(data["primary_topics"]),
            secondary={k: list(v) for k, v in data["secondary"].items()},
            translations=data.get("translations", {}),
        )

    def pairs(self) -> list[tuple[str, str]]:
        return [(p, s) for p in self.primary_topics for s in self.secondary[p]]

    def localize(self, name: str, language: str) -> str:
        return self.translations.get(language, {}).get(name, name)


@dataclass(frozen=True)
class GenerationRequest:
    topic: tuple[str, str]
    plan: TransitionPlan
    perspective: str = "first"
    language: str = "en"
    seed: int = 0

    def __post_init__(self):
        if self.perspective not in PERSPECTIVES:
            raise ValidationError(f"perspective must be one of {PERSPECTIVES}", "perspective")
        if self.language not in LANGUAGES:
            raise ValidationError(f"language must be one of {LANGUAGES}", "language")


_PERSPECTIVE_TEXT = {
    "first": "first-person (I / we)",
    "second": "second-person (you)",
    "third": "third-person (he / she / they)",
}
_LANGUAGE_TEXT = {"en": "English", "zh": "Chinese (Simplified Mandarin)"}


def build_generation_prompt(req: GenerationRequest) -> str:
    primary, secondary = req.topic
    n = len(req.plan)
    steps = "\n".join(f"{i + 1}. {e.value}" for i, e in enumerate(req.plan.emotions))
    return (
        "Write a short, semantically coherent spoken discourse.\n"
        f"Topic: {primary} / {secondary}\n"
        f"Narrative perspective: {_PERSPECTIVE_TEXT[req.perspective]}\n"
        f"Number of sentences: {n}\n"
        "Emotion of each sentence, in order:\n"
        f"{steps}\n"
        f"Emotion sequence: {' -> '.join(e.value for e in req.plan.emotions)}\n"
        f"Write the output in {_LANGUAGE_TEXT[req.language]} only.\n"
        "Each sentence must clearly express its emotion through its content, and the "
        "discourse must read naturally from one sentence to the next.\n"
        f"Return exactly {n} line(s), one sentence per line, without numbering or quotes."
    )


# Fallback sentence templates.  Slots: subject, verb agreement, possessive, topic.
_EN_TEMPLATES: dict[EmotionLabel, tuple[str, ...]] = {
    EmotionLabel.ANGRY: (
        "{Subj} {be} furious that the {topic} plans were cancelled without any warning.",
        "{Subj} could not believe how carelessly {poss} {topic} report had been handled.",
        "{Subj} slammed the door because the {topic} meeting ran over again.",
    ),
    EmotionLabel.HAPPY: (
        "{Subj} {be} thrilled when the {topic} results finally came in.",
        "{Subj} laughed out loud as the {topic} event turned into a celebration.",
        "{Poss} whole week brightened after the {topic} news arrived.",
    ),
    EmotionLabel.SAD: (
        "{Subj} quietly packed away {poss} notes from the {topic} project.",
        "{Subj} {be} heartbroken that the {topic} season had ended so soon.",
        "Nothing about the {topic} update could lift {poss} spirits.",
    ),
    EmotionLabel.NEUTRAL: (
        "{Subj} reviewed the {topic} schedule for the coming weeks.",
        "The {topic} session starts at nine and usually lasts two hours.",
        "{Subj} took notes on the {topic} agenda during the morning.",
    ),
    EmotionLabel.SURPRISED: (
        "{Subj} never expected the {topic} committee to call back so soon.",
        "Out of nowhere the {topic} announcement changed everything overnight.",
        "{Subj} gasped when the {topic} numbers appeared on the screen.",
    ),
}

_ZH_TEMPLATES: dict[EmotionLabel, tuple[str, ...]] = {
    EmotionLabel.ANGRY: (
        "{subj}对{topic}计划被突然取消感到非常愤怒。",
        "{subj}简直不敢相信{topic}的报告被处理得这么草率。",
        "因为{topic}会议又一次拖延，{subj}气得摔门而去。",
    ),
    EmotionLabel.HAPPY: (
        "{topic}的结果终于出来了，{subj}高兴得跳了起来。",
        "{topic}活动变成了一场庆祝，{subj}笑得合不拢嘴。",
        "听到{topic}的好消息，{subj}整个星期都很开心。",
    ),
    EmotionLabel.SAD: (
        "{subj}默默收起了关于{topic}项目的笔记。",
        "{topic}赛季这么快就结束了，{subj}心里很难过。",
        "关于{topic}的消息让{subj}提不起精神。",
    ),
    EmotionLabel.NEUTRAL: (
        "{subj}查看了接下来几周的{topic}日程。",
        "{topic}会议九点开始，通常持续两个小时。",
        "{subj}在上午记录了{topic}议程的要点。",
    ),
    EmotionLabel.SURPRISED: (
        "{subj}没想到{topic}委员会这么快就回电话了。",
        "{topic}的公告一夜之间改变了一切，真让人意外。",
        "看到屏幕上的{topic}数据，{subj}惊呆了。",
    ),
}

_EN_PERSON = {
    "first": [dict(Subj="I", be="was", poss="my", Poss="My")],
    "second": [dict(Subj="You", be="were", poss="your", Poss="Your")],
    "third": [
        dict(Subj="She", be="was", poss="her", Poss="Her"),
        dict(Subj="He", be="was", poss="his", Poss="His"),
    ],
}
_ZH_PERSON = {"first": ["我"], "second": ["你"], "third": ["她", "他"]}


def template_discourse(req: GenerationRequest, topics: TopicHierarchy | None = None) -> list[str]:
    """Deterministic one-sentence-per-emotion discourse seeded by ``req.seed``."""
    rng = substream(req.seed, "template-discourse")
    topic = req.topic[1]
    if topics is not None:
        topic = topics.localize(topic, req.language)
    if req.language == "zh":
        subj = _ZH_PERSON[req.perspective][rng.integers(len(_ZH_PERSON[req.perspective]))]
        slots: dict[str, str] = {"subj": subj, "topic": topic}
        table = _ZH_TEMPLATES
    else:
        persons = _EN_PERSON[req.perspective]
        slots = dict(persons[rng.integers(len(persons))], topic=topic)
        table = _EN_TEMPLATES
    out = []
    for e in req.plan.emotions:
        choices = table[e]
        out.append(choices[rng.integers(len(choices))].format(**slots))
    return out


def generate_discourse(
    client: TextGenerator | None,
    req: GenerationRequest,
    max_attempts: int = 3,
    topics: TopicHierarchy | None = None,
) -> list[str]:
    """Return one sentence per plan entry.

    ``client=None`` selects the deterministic template backend.  A client
    answer with the wrong sentence count (or a client error) is retried up to
    ``max_attempts`` times with a derived seed.
    """
    if client is None:
        return template_discourse(req, topics)
    if max_attempts < 1:
        raise RangeError("max_attempts must be >= 1", field="max_attempts")
    prompt = build_generation_prompt(req)
    want = len(req.plan)
    transcripts = []
    for attempt in range(1, max_attempts + 1):
        seed = req.seed if attempt == 1 else int(substream(req.seed, "retry", attempt).integers(2**31))
        try:
            lines = [ln.strip() for ln in client.send(prompt, req.language, seed)]
        except ClientError as exc:
            transcripts.append({"attempt": attempt, "seed": seed, "error": str(exc)})
            log.warning("text generation attempt %d failed: %s", attempt, exc)
            continue
        lines = [ln for ln in lines if ln]
        transcripts.append({"attempt": attempt, "seed": seed, "response": lines})
        if len(lines) == want:
            return lines
        log.info("attempt %d returned %d sentences, wanted %d", attempt, len(lines), want)
    raise GenerationError(
        f"no valid discourse after {max_attempts} attempts (wanted {want} sentences)",
        attempts=transcripts,
    )
