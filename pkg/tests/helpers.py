"""Shared test fixtures: oracle implementations and synthetic story builders.

The turning-point oracle here is a deliberately naive re-statement of the
metric definition (plain loop, no vectorization) so the production
implementation can be checked against it exactly. The trial builders
construct seeded mock casts and scripts used by the ranking properties.
"""

from __future__ import annotations

import random

import numpy as np

from castbook.audio import pcm16_to_float
from castbook.backends.base import (
    MODE_PERSONA_BOOTSTRAP,
    TtsRequest,
)
from castbook.backends.mock import SyntheticVoiceBackend, persona_base_f0
from castbook.evaluation.embedding import cosine_similarity, embed_window
from castbook.evaluation.pitch import PitchContour
from castbook.model import ScriptLine, SpeakerPersona
from castbook.synthesis import assemble, synthesize_script

WORDS = [
    "lantern", "harbor", "mist", "stone", "evening", "signal", "cliff", "quiet",
    "rope", "weather", "northern", "light", "keeper", "tide", "bell", "wind",
]


def brute_force_turning_points(contour: PitchContour) -> int:
    """Literal restatement of the turning-point definition."""
    total = 0
    f0 = list(contour.f0_hz)
    voiced = list(contour.voiced)
    run: list[float] = []
    runs: list[list[float]] = []
    for value, flag in zip(f0, voiced):
        if flag:
            run.append(value)
        elif run:
            runs.append(run)
            run = []
    if run:
        runs.append(run)
    for run in runs:
        if len(run) < 3:
            continue
        previous_sign = 0
        for i in range(1, len(run)):
            diff = run[i] - run[i - 1]
            sign = (diff > 0) - (diff < 0)
            if sign == 0:
                sign = previous_sign  # zero differences inherit the previous sign
            if sign != 0 and previous_sign != 0 and sign != previous_sign:
                total += 1
            if sign != 0:
                previous_sign = sign
    return total


def random_contour(rng: np.random.Generator) -> PitchContour:
    """Random mixed voiced/unvoiced contour, length 3..500 frames."""
    n = int(rng.integers(3, 501))
    voiced = rng.random(n) < rng.uniform(0.3, 0.95)
    f0 = rng.uniform(50.0, 600.0, n)
    # Sprinkle plateaus so zero differences are exercised.
    for _ in range(int(rng.integers(0, 5))):
        start = int(rng.integers(0, n))
        span = int(rng.integers(1, 6))
        f0[start : start + span] = f0[start]
    f0 = np.where(voiced, f0, 0.0)
    return PitchContour(
        frame_hop_s=0.01,
        f0_hz=tuple(float(x) for x in f0),
        voiced=tuple(bool(v) for v in voiced),
    )


def make_tts() -> SyntheticVoiceBackend:
    return SyntheticVoiceBackend()


def bootstrap_pcm(tts: SyntheticVoiceBackend, caption: str, face: bytes) -> bytes:
    response = tts.synthesize(
        TtsRequest(
            text="",
            instruction="",
            face_image=face,
            face_caption=caption,
            voice_sample=b"",
            mode=MODE_PERSONA_BOOTSTRAP,
        )
    )
    return response.pcm


def make_trial_cast(
    rng: random.Random,
    tts: SyntheticVoiceBackend,
    n: int = 5,
    max_cosine: float = 0.85,
) -> list[SpeakerPersona]:
    """Seeded cast with well-separated pitches and timbres.

    Candidates are drawn until their hash pitch lands near an evenly
    spaced target and their probe embedding stays below ``max_cosine``
    against every accepted member, mirroring how distinct real casts
    sound distinct.
    """
    personas: list[SpeakerPersona] = []
    embeddings = []
    for k, target in enumerate(np.linspace(100.0, 240.0, n)):
        while True:
            caption = " ".join(rng.choices(WORDS, k=5)) + f" person {rng.randrange(10**6)}"
            face = f"face-{rng.randrange(10**9)}".encode()
            if abs(persona_base_f0(caption, face) - target) > 8.0:
                continue
            probe = tts.synthesize(
                TtsRequest(
                    text="probe words here now and then",
                    instruction="even tone",
                    face_image=face,
                    face_caption=caption,
                    voice_sample=b"\x00\x00" * 24_000,
                    mode="sentence_synthesis",
                )
            )
            embedding = embed_window(pcm16_to_float(probe.pcm), (0.0, 1.0))
            if any(cosine_similarity(embedding, e) > max_cosine for e in embeddings):
                continue
            embeddings.append(embedding)
            personas.append(
                SpeakerPersona(
                    speaker_id=f"speaker-{k}",
                    name_or_role=f"Speaker {k}",
                    caption=caption,
                    face_image=face,
                    face_format="png",
                    face_caption=caption,
                    voice_sample=bootstrap_pcm(tts, caption, face),
                    is_narrator=(k == 0),
                )
            )
            break
    return personas


def trial_sentence(rng: random.Random, lo: int = 42, hi: int = 52) -> str:
    return " ".join(rng.choices(WORDS, k=rng.randint(lo, hi))).capitalize() + "."


def narration_heavy_pattern(rng: random.Random, n_lines: int, n_speakers: int) -> list[int]:
    """Blocky narration runs with single dialogue interjections."""
    pattern: list[int] = []
    while len(pattern) < n_lines:
        pattern.extend([0] * rng.randint(5, 7))
        pattern.append(rng.randrange(1, n_speakers))
    return pattern[:n_lines]


def render_trial_audiobook(
    personas: list[SpeakerPersona],
    texts: list[str],
    instructions: list[str],
    assignment: list[int],
    tts: SyntheticVoiceBackend,
) -> bytes:
    """Assemble a trial audiobook through the real synthesis path."""
    lines = [
        ScriptLine(sentence_index=i, speaker_id=personas[p].speaker_id, instruction=instr)
        for i, (p, instr) in enumerate(zip(assignment, instructions))
    ]
    segments, _log = synthesize_script(
        lines, personas, {i: t for i, t in enumerate(texts)}, tts
    )
    return assemble(segments, lines).pcm
