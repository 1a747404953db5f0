"""Quantitative audiobook metrics: voice consistency and expressiveness.

Two numbers summarize an audiobook:

* ``speaker_similarity`` — 100 x the mean cosine similarity between
  speaker embeddings of consecutive non-overlapping 10 s windows
  (final partial window truncated). Higher = steadier voices.
* ``turning_points`` — within each maximal voiced run of the pitch
  contour, the number of strict sign changes of the frame-to-frame F0
  difference (zero differences inherit the previous sign), summed over
  runs. Higher = livelier prosody. Reported per audiobook, as a total.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..audio import pcm16_to_float
from ..model import SAMPLE_RATE
from .embedding import EMBEDDING_DIM, SpeakerEmbedding, cosine_similarity, embed_window
from .pitch import (
    DEFAULT_F_MAX_HZ,
    DEFAULT_F_MIN_HZ,
    DEFAULT_FRAME_HOP_S,
    PitchContour,
    extract_pitch,
)

DEFAULT_WINDOW_S = 10.0


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class WindowSimilarity:
    first_window: tuple[float, float]
    second_window: tuple[float, float]
    cosine: float


@dataclass(frozen=True)
class EvalReport:
    """Metric report for one audiobook, plus the parameters that produced it."""

    speaker_similarity: float | None  # in [0, 100]; None when audio too short
    # Engine-computed counts are integers; imported rows for external
    # systems may carry per-sample averages with decimals.
    turning_points: int | float
    per_window: tuple[WindowSimilarity, ...] = ()
    parameters: dict[str, object] = field(default_factory=dict)
    mllm_scores: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.speaker_similarity is not None and not 0.0 <= self.speaker_similarity <= 100.0:
            raise MetricError(f"similarity {self.speaker_similarity} outside [0, 100]")
        if self.turning_points < 0:
            raise MetricError("turning point count cannot be negative")
        for name, score in self.mllm_scores.items():
            if not 1.0 <= score <= 5.0:
                raise MetricError(f"MLLM score {name}={score} outside [1, 5]")

    def to_dict(self) -> dict:
        return {
            "speaker_similarity": self.speaker_similarity,
            "turning_points": self.turning_points,
            "per_window": [
                {
                    "first_window": list(w.first_window),
                    "second_window": list(w.second_window),
                    "cosine": w.cosine,
                }
                for w in self.per_window
            ],
            "parameters": dict(self.parameters),
            "mllm_scores": dict(self.mllm_scores),
        }

    @classmethod
    def from_dict(cls, data: dict) -> EvalReport:
        raw_turning = data["turning_points"]
        return cls(
            speaker_similarity=data.get("speaker_similarity"),
            turning_points=int(raw_turning) if float(raw_turning).is_integer() else float(raw_turning),
            per_window=tuple(
                WindowSimilarity(
                    first_window=tuple(w["first_window"]),
                    second_window=tuple(w["second_window"]),
                    cosine=w["cosine"],
                )
                for w in data.get("per_window", ())
            ),
            parameters=dict(data.get("parameters", {})),
            mllm_scores=dict(data.get("mllm_scores", {})),
        )


def count_turning_points(contour: PitchContour) -> int:
    """Strict sign changes of per-frame F0 differences within voiced runs."""
    total = 0
    for run in contour.voiced_runs():
        if len(run) < 3:
            continue
        diffs = np.diff(run)
        signs = np.sign(diffs).astype(int)
        # Zero differences inherit the previous sign (plateaus are not turns).
        previous = 0
        for k, s in enumerate(signs):
            if s == 0:
                signs[k] = previous
            else:
                previous = s
        active = signs[signs != 0]
        if len(active) >= 2:
            total += int(np.count_nonzero(active[1:] != active[:-1]))
    return total


def speaker_similarity(
    pcm: bytes | np.ndarray,
    window_s: float = DEFAULT_WINDOW_S,
    sample_rate: int = SAMPLE_RATE,
) -> tuple[float, list[WindowSimilarity]]:
    """Average consecutive-window embedding similarity, scaled to [0, 100].

    Windows are non-overlapping; a final partial window is truncated.
    Raises ``MetricError`` when fewer than two full windows fit.
    """
    samples = pcm16_to_float(pcm) if isinstance(pcm, (bytes, bytearray)) else np.asarray(pcm)
    per_window = int(round(window_s * sample_rate))
    n_windows = len(samples) // per_window
    if n_windows < 2:
        raise MetricError(
            f"audio too short for similarity: {len(samples) / sample_rate:.1f}s "
            f"< 2 x {window_s:.0f}s windows"
        )
    embeddings: list[SpeakerEmbedding] = []
    for w in range(n_windows):
        chunk = samples[w * per_window : (w + 1) * per_window]
        span = (w * window_s, (w + 1) * window_s)
        embeddings.append(embed_window(chunk, span, sample_rate))
    details = [
        WindowSimilarity(
            first_window=embeddings[i].window,
            second_window=embeddings[i + 1].window,
            cosine=cosine_similarity(embeddings[i], embeddings[i + 1]),
        )
        for i in range(n_windows - 1)
    ]
    score = 100.0 * float(np.mean([d.cosine for d in details]))
    return min(max(score, 0.0), 100.0), details


def evaluate_audio(
    pcm: bytes,
    window_s: float = DEFAULT_WINDOW_S,
    frame_hop_s: float = DEFAULT_FRAME_HOP_S,
    f_min_hz: float = DEFAULT_F_MIN_HZ,
    f_max_hz: float = DEFAULT_F_MAX_HZ,
    sample_rate: int = SAMPLE_RATE,
) -> EvalReport:
    """Compute both metrics for one audiobook's PCM."""
    contour = extract_pitch(
        pcm,
        frame_hop_s=frame_hop_s,
        f_min_hz=f_min_hz,
        f_max_hz=f_max_hz,
        sample_rate=sample_rate,
    )
    turning = count_turning_points(contour)
    try:
        score, details = speaker_similarity(pcm, window_s, sample_rate)
        similarity: float | None = score
    except MetricError:
        similarity, details = None, []
    return EvalReport(
        speaker_similarity=similarity,
        turning_points=turning,
        per_window=tuple(details),
        parameters={
            "window_s": window_s,
            "frame_hop_s": frame_hop_s,
            "f_min_hz": f_min_hz,
            "f_max_hz": f_max_hz,
            "embedding": f"mfcc-stats-{EMBEDDING_DIM}d",
            "similarity_scale": "100 x mean cosine of consecutive windows",
            "turning_points_scope": "per-audiobook total",
        },
    )
