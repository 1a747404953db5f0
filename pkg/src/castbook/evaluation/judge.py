"""MOS scoring through an audio-capable judge model.

Four questions (character consistency, audio quality, emotion, speaker
identification) are asked one at a time against the audiobook audio.
Long audio is split into chunks the judge can ingest and the per-chunk
scores are averaged. A metric whose answers stay unparseable after one
retry is recorded as absent; the report is still emitted.
"""

from __future__ import annotations

import json
import logging
import re
from importlib import resources

from ..audio import wav_bytes
from ..backends.base import BackendError, JudgeBackend
from ..model import SAMPLE_RATE

log = logging.getLogger(__name__)

MOS_METRICS = ("CharCon", "MOS-Q", "MOS-E", "MOS-S")
DEFAULT_CHUNK_S = 60.0


def default_questions() -> dict[str, str]:
    text = resources.files("castbook.data").joinpath("judge_questions.json").read_text("utf-8")
    return json.loads(text)


_SCORE_RE = re.compile(r"(\d+(?:\.\d+)?)")


def parse_score(text: str) -> float | None:
    """Extract a 1..5 score from judge output (JSON first, then a number)."""
    try:
        payload = json.loads(text)
        if isinstance(payload, dict) and "score" in payload:
            score = float(payload["score"])
            return score if 1.0 <= score <= 5.0 else None
    except (json.JSONDecodeError, TypeError, ValueError):
        pass
    match = _SCORE_RE.search(text)
    if match:
        score = float(match.group(1))
        if 1.0 <= score <= 5.0:
            return score
    return None


def _chunk_pcm(pcm: bytes, chunk_s: float) -> list[bytes]:
    chunk_bytes = int(chunk_s * SAMPLE_RATE) * 2
    if len(pcm) <= chunk_bytes:
        return [pcm]
    return [pcm[offset : offset + chunk_bytes] for offset in range(0, len(pcm), chunk_bytes)]


def mllm_evaluate(
    pcm: bytes,
    judge: JudgeBackend,
    questions: dict[str, str] | None = None,
    chunk_s: float = DEFAULT_CHUNK_S,
) -> dict[str, float]:
    """Ask the judge each MOS question; returns metric -> mean score.

    Metrics with no parseable answer are omitted (with a warning), never
    faked.
    """
    questions = questions or default_questions()
    chunks = _chunk_pcm(pcm, chunk_s)
    scores: dict[str, float] = {}
    for metric in MOS_METRICS:
        question = questions.get(metric)
        if not question:
            log.warning("no judge question configured for %s; skipping", metric)
            continue
        chunk_scores: list[float] = []
        failed = False
        for i, chunk in enumerate(chunks):
            key = f"judge/{metric}" if len(chunks) == 1 else f"judge/{metric}/chunk{i}"
            score = _ask_with_retry(judge, wav_bytes(chunk), question, key)
            if score is None:
                failed = True
                break
            chunk_scores.append(score)
        if failed or not chunk_scores:
            log.warning("judge gave no parseable score for %s; metric absent", metric)
            continue
        scores[metric] = sum(chunk_scores) / len(chunk_scores)
    return scores


def _ask_with_retry(judge: JudgeBackend, wav: bytes, question: str, key: str) -> float | None:
    for attempt_key in (key, key + "/retry"):
        try:
            answer = judge.ask(wav, question, key=attempt_key)
        except BackendError as exc:
            log.warning("judge call failed for %s: %s", attempt_key, exc)
            return None
        score = parse_score(answer)
        if score is not None:
            return score
        log.info("unparseable judge output for %s: %r", attempt_key, answer[:80])
    return None
