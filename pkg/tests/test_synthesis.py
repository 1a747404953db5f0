from __future__ import annotations

import numpy as np
import pytest

from castbook.audio import float_to_pcm16
from castbook.backends.base import RetryPolicy
from castbook.backends.mock import SyntheticVoiceBackend
from castbook.evaluation.pitch import extract_pitch
from castbook.model import SAMPLE_RATE, ScriptLine, SpeakerPersona
from castbook.synthesis import (
    AudioSegment,
    SynthesisError,
    assemble,
    synthesize_line,
    synthesize_script,
)

NO_RETRY = RetryPolicy(sleep=lambda _s: None)


def persona(speaker_id, name, is_narrator=False):
    return SpeakerPersona(
        speaker_id=speaker_id,
        name_or_role=name,
        caption=f"{name} described",
        face_image=b"face-" + speaker_id.encode(),
        face_format="png",
        face_caption=f"portrait photo of {name}",
        voice_sample=b"\x01\x00" * SAMPLE_RATE,
        is_narrator=is_narrator,
    )


P = persona("p", "Pat", True)
Q = persona("q", "Quinn")


def line(index, speaker="p", instruction="Read in an even tone."):
    return ScriptLine(sentence_index=index, speaker_id=speaker, instruction=instruction)


class TestSynthesizeLine:
    def test_mock_duration_formula(self):
        tts = SyntheticVoiceBackend()
        segment = synthesize_line(line(0), P, tts, "Hello there.", retry=NO_RETRY)
        assert segment.duration_s == pytest.approx(0.72, abs=1e-6)

    def test_request_log_carries_fixed_persona_hashes(self):
        tts = SyntheticVoiceBackend()
        log: list[dict] = []
        synthesize_line(line(0), P, tts, "One line.", retry=NO_RETRY, request_log=log)
        synthesize_line(line(1), P, tts, "Another line entirely.", retry=NO_RETRY, request_log=log)
        triples = {
            (e["face_image_sha256"], e["face_caption_sha256"], e["voice_sample_sha256"])
            for e in log
        }
        assert len(triples) == 1
        assert log[0]["mode"] == "sentence_synthesis"

    def test_instruction_modulation_depth_ratio(self):
        tts = SyntheticVoiceBackend()
        text = "The same sentence rendered with two different directions for contrast."
        depths = {}
        for name, instruction in (("excited", "Read with excited energy."),
                                  ("calm", "Read in a calm voice.")):
            segment = synthesize_line(line(0, instruction=instruction), P, tts, text, retry=NO_RETRY)
            voiced = extract_pitch(segment.pcm).voiced_f0()
            depths[name] = (voiced.max() - voiced.min()) / np.median(voiced)
        assert depths["excited"] / depths["calm"] >= 5.0


def seg(index, seconds=1.0, value=0.25):
    return AudioSegment(
        sentence_index=index,
        pcm=float_to_pcm16(np.full(int(seconds * SAMPLE_RATE), value)),
    )


class TestAssemble:
    def test_two_segments_default_gap_arithmetic(self):
        lines = [line(0), line(1)]
        result = assemble([seg(0), seg(1)], lines)
        assert result.total_duration_s == pytest.approx(2.25, abs=1 / SAMPLE_RATE)

    def test_speaker_change_gets_longer_gap(self):
        lines = [line(0, "p"), line(1, "q")]
        result = assemble([seg(0), seg(1)], lines)
        assert result.total_duration_s == pytest.approx(2.5, abs=1 / SAMPLE_RATE)
        assert result.gap_samples == (SAMPLE_RATE // 2,)

    def test_empty_audiobook_rejected(self):
        with pytest.raises(SynthesisError, match="empty audiobook"):
            assemble([], [])

    def test_total_equals_segments_plus_gaps(self):
        lines = [line(i, "p" if i % 3 else "q") for i in range(7)]
        segments = [seg(i, seconds=0.5 + 0.1 * i) for i in range(7)]
        result = assemble(segments, lines)
        expected = sum(s.duration_s for s in segments) + sum(result.gap_samples) / SAMPLE_RATE
        assert result.total_duration_s == pytest.approx(expected, abs=1e-9)

    def test_interior_extraction_is_lossless(self):
        lines = [line(0), line(1, "q")]
        segments = [seg(0, value=0.3), seg(1, value=-0.2)]
        result = assemble(segments, lines, fade_ms=5)
        book = np.frombuffer(result.pcm, dtype="<i2")
        fade_n = SAMPLE_RATE * 5 // 1000
        for segment, start in zip(segments, result.segment_starts):
            interior_book = book[start + fade_n : start + segment.sample_count - fade_n]
            interior_seg = np.frombuffer(segment.pcm, dtype="<i2")[fade_n:-fade_n]
            np.testing.assert_array_equal(interior_book, interior_seg)

    def test_segments_ordered_by_sentence_index(self):
        lines = [line(0), line(1)]
        result = assemble([seg(1), seg(0)], lines)
        assert result.segment_starts[0] == 0


class TestSynthesizeScript:
    def test_parallel_synthesis_preserves_order_and_log(self):
        tts = SyntheticVoiceBackend()
        lines = [line(i, "p" if i % 2 else "q") for i in range(6)]
        texts = {i: f"Sentence number {i} with several words." for i in range(6)}
        segments, log = synthesize_script(lines, [P, Q], texts, tts, retry=NO_RETRY)
        assert [s.sentence_index for s in segments] == list(range(6))
        assert [e["sentence_index"] for e in log] == list(range(6))

    def test_failed_line_aborts_run(self):
        class FailingTts:
            identity = SyntheticVoiceBackend().identity

            def synthesize(self, request):
                raise __import__("castbook.backends.base", fromlist=["BackendError"]).BackendError(
                    "model exploded"
                )

        with pytest.raises(Exception, match="model exploded"):
            synthesize_script(
                [line(0)], [P], {0: "Text."}, FailingTts(), retry=NO_RETRY
            )
