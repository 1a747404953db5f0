"""Shared data model for stories, personas, scripts, and run manifests.

All types are immutable after construction and safe to share across
concurrent pipeline workers. Spans are byte offsets into the UTF-8
encoding of ``Story.raw_text`` so that serialized stories can be checked
byte-exactly against their source.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .util import sha256_text


class ModelError(ValueError):
    """Raised when a domain invariant is violated at construction time."""


@dataclass(frozen=True)
class Sentence:
    """One sentence of a story, anchored to its source bytes."""

    index: int
    text: str
    span: tuple[int, int]  # (start, end) byte offsets into raw_text UTF-8

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ModelError(f"sentence {self.index} has no non-whitespace content")
        if self.span[0] >= self.span[1]:
            raise ModelError(f"sentence {self.index} has an empty span {self.span}")


@dataclass(frozen=True)
class Story:
    """A story plus its deterministic sentence segmentation."""

    id: str
    title: str
    raw_text: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self) -> None:
        if not self.sentences:
            raise ModelError("story has no sentences")
        raw = self.raw_text.encode("utf-8")
        prev_end = 0
        for pos, sentence in enumerate(self.sentences):
            if sentence.index != pos:
                raise ModelError(f"sentence index {sentence.index} != position {pos}")
            start, end = sentence.span
            if start < prev_end:
                raise ModelError(f"sentence {pos} overlaps or reorders spans")
            if raw[start:end].decode("utf-8") != sentence.text:
                raise ModelError(f"sentence {pos} text does not match its span")
            if raw[prev_end:start].decode("utf-8").strip():
                raise ModelError(f"non-whitespace bytes skipped before sentence {pos}")
            prev_end = end
        if raw[prev_end:].decode("utf-8").strip():
            raise ModelError("non-whitespace bytes after the last sentence")

    def sentence_window(self, center: int, radius: int) -> tuple[Sentence, ...]:
        """Sentences within ``radius`` of ``center``, clamped to the story."""
        lo = max(0, center - radius)
        hi = min(len(self.sentences), center + radius + 1)
        return self.sentences[lo:hi]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "raw_text": self.raw_text,
            "sentences": [
                {"index": s.index, "text": s.text, "span": list(s.span)}
                for s in self.sentences
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Story:
        return cls(
            id=data["id"],
            title=data.get("title", ""),
            raw_text=data["raw_text"],
            sentences=tuple(
                Sentence(index=s["index"], text=s["text"], span=tuple(s["span"]))
                for s in data["sentences"]
            ),
        )


# Voice samples are mono PCM at this rate throughout the engine.
SAMPLE_RATE = 24_000
VOICE_SAMPLE_MIN_S = 1.0
VOICE_SAMPLE_MAX_S = 15.0


@dataclass(frozen=True)
class SpeakerPersona:
    """A character's multimodal identity: caption, face, and voice anchor."""

    speaker_id: str
    name_or_role: str
    caption: str
    face_image: bytes
    face_format: str  # e.g. "png"
    face_caption: str
    voice_sample: bytes  # mono PCM 16-bit little-endian at SAMPLE_RATE
    is_narrator: bool = False

    def __post_init__(self) -> None:
        if not self.caption.strip():
            raise ModelError(f"persona {self.speaker_id!r} has an empty caption")
        if not self.face_caption.strip():
            raise ModelError(f"persona {self.speaker_id!r} has an empty face caption")
        if not self.face_image:
            raise ModelError(f"persona {self.speaker_id!r} has no face image")
        duration = self.voice_duration_s
        if not VOICE_SAMPLE_MIN_S <= duration <= VOICE_SAMPLE_MAX_S:
            raise ModelError(
                f"persona {self.speaker_id!r} voice sample is {duration:.2f}s, "
                f"outside [{VOICE_SAMPLE_MIN_S}, {VOICE_SAMPLE_MAX_S}]s"
            )

    @property
    def voice_duration_s(self) -> float:
        return len(self.voice_sample) / 2 / SAMPLE_RATE


def require_one_narrator(personas: list[SpeakerPersona] | tuple[SpeakerPersona, ...]) -> SpeakerPersona:
    narrators = [p for p in personas if p.is_narrator]
    if len(narrators) != 1:
        raise ModelError(f"expected exactly one narrator persona, found {len(narrators)}")
    ids = [p.speaker_id for p in personas]
    if len(set(ids)) != len(ids):
        raise ModelError("duplicate speaker ids in persona set")
    return narrators[0]


@dataclass(frozen=True)
class ScriptLine:
    """One sentence bound to a speaker and a reading direction."""

    sentence_index: int
    speaker_id: str
    instruction: str

    def __post_init__(self) -> None:
        if not self.instruction.strip():
            raise ModelError(f"line {self.sentence_index} has an empty instruction")


@dataclass(frozen=True)
class PersonaRef:
    """Manifest reference to a persona stored on disk."""

    speaker_id: str
    name_or_role: str
    is_narrator: bool
    persona_path: str
    face_path: str
    voice_path: str
    face_sha256: str
    voice_sha256: str
    caption_sha256: str


@dataclass(frozen=True)
class SegmentRef:
    """Manifest reference to one synthesized sentence segment."""

    sentence_index: int
    path: str
    duration_s: float
    start_sample: int  # interior start within the assembled audiobook


@dataclass(frozen=True)
class AudiobookManifest:
    """Complete provenance record of one audiobook run."""

    story_id: str
    personas: tuple[PersonaRef, ...]
    lines: tuple[ScriptLine, ...]
    segments: tuple[SegmentRef, ...]
    total_duration_s: float
    config_fingerprint: str
    backend_ids: dict[str, str]
    status: str = "complete"
    counters: dict[str, int] = field(default_factory=dict)
    parameters: dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.status != "complete":
            return
        if len(self.segments) != len(self.lines):
            raise ModelError(
                f"{len(self.segments)} segments for {len(self.lines)} script lines"
            )
        persona_ids = {p.speaker_id for p in self.personas}
        indices = [seg.sentence_index for seg in self.segments]
        if indices != sorted(set(indices)):
            raise ModelError("segments are not ordered by sentence index")
        for line in self.lines:
            if line.speaker_id not in persona_ids:
                raise ModelError(
                    f"line {line.sentence_index} references unknown persona {line.speaker_id!r}"
                )

    def to_dict(self) -> dict:
        return {
            "story_id": self.story_id,
            "personas": [vars(p) for p in self.personas],
            "lines": [vars(line) for line in self.lines],
            "segments": [vars(seg) for seg in self.segments],
            "total_duration_s": self.total_duration_s,
            "config_fingerprint": self.config_fingerprint,
            "backend_ids": dict(self.backend_ids),
            "status": self.status,
            "counters": dict(self.counters),
            "parameters": dict(self.parameters),
        }

    @classmethod
    def from_dict(cls, data: dict) -> AudiobookManifest:
        return cls(
            story_id=data["story_id"],
            personas=tuple(PersonaRef(**p) for p in data["personas"]),
            lines=tuple(ScriptLine(**line) for line in data["lines"]),
            segments=tuple(SegmentRef(**seg) for seg in data["segments"]),
            total_duration_s=data["total_duration_s"],
            config_fingerprint=data["config_fingerprint"],
            backend_ids=dict(data["backend_ids"]),
            status=data.get("status", "complete"),
            counters=dict(data.get("counters", {})),
            parameters=dict(data.get("parameters", {})),
        )


def story_content_id(raw_text: str) -> str:
    """Default story id when the caller does not supply one."""
    return sha256_text(raw_text)[:12]
