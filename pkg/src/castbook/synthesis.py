"""Sentence-by-sentence synthesis and audiobook assembly.

Within one run, every request for a given speaker carries byte-identical
persona inputs (face image, face caption, voice sample); only the target
text and instruction change per sentence. The request log records the
hashes so this fixedness is auditable after the fact.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .audio import apply_fades, silence
from .backends.base import (
    MODE_SENTENCE_SYNTHESIS,
    InflightCap,
    RetryPolicy,
    TtsBackend,
    TtsRequest,
    synthesize,
)
from .model import SAMPLE_RATE, ScriptLine, SpeakerPersona
from .util import sha256_bytes, sha256_text

log = logging.getLogger(__name__)

DEFAULT_GAP_MS = 250
SPEAKER_CHANGE_GAP_MS = 500
DEFAULT_FADE_MS = 5


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True)
class AudioSegment:
    sentence_index: int
    pcm: bytes  # mono PCM 16-bit at SAMPLE_RATE

    def __post_init__(self) -> None:
        if not self.pcm:
            raise SynthesisError(f"segment {self.sentence_index} has no audio")

    @property
    def duration_s(self) -> float:
        return self.sample_count / SAMPLE_RATE

    @property
    def sample_count(self) -> int:
        return len(self.pcm) // 2


def synthesize_line(
    line: ScriptLine,
    persona: SpeakerPersona,
    tts: TtsBackend,
    text: str,
    retry: RetryPolicy | None = None,
    cap: InflightCap | None = None,
    request_log: list[dict] | None = None,
) -> AudioSegment:
    """Synthesize one script line with the speaker's fixed persona inputs."""
    request = TtsRequest(
        text=text,
        instruction=line.instruction,
        face_image=persona.face_image,
        face_caption=persona.face_caption,
        voice_sample=persona.voice_sample,
        mode=MODE_SENTENCE_SYNTHESIS,
    )
    if request_log is not None:
        request_log.append(
            {
                "stage": "tts",
                "mode": MODE_SENTENCE_SYNTHESIS,
                "sentence_index": line.sentence_index,
                "speaker_id": line.speaker_id,
                "text_sha256": sha256_text(text),
                "instruction": line.instruction,
                "face_image_sha256": sha256_bytes(persona.face_image),
                "face_caption_sha256": sha256_text(persona.face_caption),
                "voice_sample_sha256": sha256_bytes(persona.voice_sample),
            }
        )
    response = synthesize(tts, request, retry=retry, cap=cap)
    return AudioSegment(sentence_index=line.sentence_index, pcm=response.pcm)


def synthesize_script(
    lines: list[ScriptLine],
    personas: list[SpeakerPersona],
    sentence_texts: dict[int, str],
    tts: TtsBackend,
    retry: RetryPolicy | None = None,
    cap: InflightCap | None = None,
    max_workers: int = 4,
) -> tuple[list[AudioSegment], list[dict]]:
    """Synthesize all lines (parallel up to the backend cap), in order.

    Any failed line aborts the whole run; partial audiobooks are never
    assembled. The returned request log is ordered by sentence index
    regardless of completion order.
    """
    by_id = {p.speaker_id: p for p in personas}
    logs: dict[int, list[dict]] = {}

    def run(line: ScriptLine) -> AudioSegment:
        entries: list[dict] = []
        segment = synthesize_line(
            line,
            by_id[line.speaker_id],
            tts,
            sentence_texts[line.sentence_index],
            retry=retry,
            cap=cap,
            request_log=entries,
        )
        logs[line.sentence_index] = entries
        return segment

    ordered = sorted(lines, key=lambda l: l.sentence_index)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        segments = list(pool.map(run, ordered))
    request_log = [entry for index in sorted(logs) for entry in logs[index]]
    return segments, request_log


@dataclass(frozen=True)
class AssemblyResult:
    pcm: bytes
    segment_starts: tuple[int, ...]  # start sample of each segment in the book
    total_duration_s: float
    gap_samples: tuple[int, ...]  # gap inserted after each non-final segment


def assemble(
    segments: list[AudioSegment],
    lines: list[ScriptLine],
    gap_ms: int = DEFAULT_GAP_MS,
    speaker_change_gap_ms: int = SPEAKER_CHANGE_GAP_MS,
    fade_ms: int = DEFAULT_FADE_MS,
) -> AssemblyResult:
    """Concatenate segments in sentence order with inter-sentence gaps.

    A longer pause marks speaker changes; each segment gets a short
    linear fade at both ends so joins never click. Gaps are exact sample
    counts, so the reported total equals the written audio length.
    """
    if not segments:
        raise SynthesisError("empty audiobook: no segments to assemble")
    if len(segments) != len(lines):
        raise SynthesisError(f"{len(segments)} segments for {len(lines)} lines")
    ordered = sorted(segments, key=lambda s: s.sentence_index)
    speaker_by_index = {line.sentence_index: line.speaker_id for line in lines}

    parts: list[bytes] = []
    starts: list[int] = []
    gaps: list[int] = []
    position = 0
    for i, segment in enumerate(ordered):
        starts.append(position)
        parts.append(apply_fades(segment.pcm, fade_ms))
        position += segment.sample_count
        if i + 1 < len(ordered):
            changed = (
                speaker_by_index[segment.sentence_index]
                != speaker_by_index[ordered[i + 1].sentence_index]
            )
            gap = silence(speaker_change_gap_ms if changed else gap_ms)
            gaps.append(len(gap) // 2)
            parts.append(gap)
            position += len(gap) // 2
    pcm = b"".join(parts)
    return AssemblyResult(
        pcm=pcm,
        segment_starts=tuple(starts),
        total_duration_s=len(pcm) / 2 / SAMPLE_RATE,
        gap_samples=tuple(gaps),
    )
