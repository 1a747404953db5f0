from __future__ import annotations

import json
import math

import pytest

from castbook.backends.base import LlmRequest, LlmResponse, RetryPolicy
from castbook.backends.mock import ScriptedLlm, SyntheticVoiceBackend, ProceduralImageBackend
from castbook.model import SpeakerPersona, SAMPLE_RATE
from castbook.script import (
    FALLBACK_INSTRUCTION,
    attribute_speaker,
    build_script,
    generate_instruction,
    is_delivery_instruction,
)
from castbook.segmentation import make_story

NO_RETRY = RetryPolicy(sleep=lambda _s: None)


def persona(speaker_id, name, is_narrator=False):
    return SpeakerPersona(
        speaker_id=speaker_id,
        name_or_role=name,
        caption=f"{name} looks like someone",
        face_image=b"face-" + speaker_id.encode(),
        face_format="png",
        face_caption=f"portrait photo of {name}",
        voice_sample=b"\x00\x00" * SAMPLE_RATE,
        is_narrator=is_narrator,
    )


CAST = [persona("narrator", "Narrator", True), persona("alice", "Alice"), persona("bob", "Bob")]
STORY = make_story(
    '"Hello," said Alice. The room was quiet. "Goodbye," said Bob.', story_id="attr"
)


class RecordingLlm:
    """Wraps a scripted mock and keeps the full requests for inspection."""

    def __init__(self, responses):
        self.inner = ScriptedLlm(responses)
        self.identity = self.inner.identity
        self.requests: list[LlmRequest] = []

    def complete(self, request: LlmRequest) -> LlmResponse:
        self.requests.append(request)
        return self.inner.complete(request)


class TestAttribution:
    def test_dialogue_marker_attribution(self):
        llm = ScriptedLlm({"attribute/attr/0": "Alice"})
        speaker, retried, fell_back = attribute_speaker(
            STORY, STORY.sentences[0], CAST, llm, retry=NO_RETRY
        )
        assert (speaker, retried, fell_back) == ("alice", False, False)

    def test_narration_maps_to_narrator_persona(self):
        llm = ScriptedLlm({"attribute/attr/1": "Narrator"})
        speaker, _, _ = attribute_speaker(STORY, STORY.sentences[1], CAST, llm, retry=NO_RETRY)
        assert speaker == "narrator"

    def test_invalid_then_valid_on_retry(self):
        llm = ScriptedLlm({"attribute/attr/2": "Charlie", "attribute/attr/2/retry": "Bob"})
        speaker, retried, fell_back = attribute_speaker(
            STORY, STORY.sentences[2], CAST, llm, retry=NO_RETRY
        )
        assert (speaker, retried, fell_back) == ("bob", True, False)

    def test_double_failure_falls_back_to_narrator(self):
        llm = ScriptedLlm({"attribute/attr/2": "Charlie", "attribute/attr/2/retry": "Dora"})
        speaker, retried, fell_back = attribute_speaker(
            STORY, STORY.sentences[2], CAST, llm, retry=NO_RETRY
        )
        assert (speaker, retried, fell_back) == ("narrator", True, True)

    def test_answer_normalization(self):
        llm = ScriptedLlm({"attribute/attr/0": '  "alice".  '})
        speaker, _, _ = attribute_speaker(STORY, STORY.sentences[0], CAST, llm, retry=NO_RETRY)
        assert speaker == "alice"

    def test_retry_prompt_includes_correction(self):
        llm = RecordingLlm({"attribute/attr/2": "Charlie", "attribute/attr/2/retry": "Bob"})
        attribute_speaker(STORY, STORY.sentences[2], CAST, llm, retry=NO_RETRY)
        assert len(llm.requests) == 2
        assert "'Charlie'" in llm.requests[1].user_prompt
        assert "not in the cast list" in llm.requests[1].user_prompt


class TestDeliveryFilter:
    def test_vocal_terms_pass(self):
        assert is_delivery_instruction("Use a calm and reassuring tone.")
        assert is_delivery_instruction("Whisper, slowing down.")

    def test_non_speech_content_fails(self):
        assert not is_delivery_instruction("The character wears a red coat.")

    def test_word_boundaries_respected(self):
        assert not is_delivery_instruction("He found a stone by the monotones.")


class TestInstruction:
    def test_paper_style_comforting_line(self):
        llm = ScriptedLlm({"instruction/attr/1": "Use a calm and reassuring tone."})
        instruction, retried, fell_back = generate_instruction(
            STORY, STORY.sentences[1], CAST[0], "", llm, retry=NO_RETRY
        )
        assert instruction == "Use a calm and reassuring tone."
        assert (retried, fell_back) == (False, False)

    def test_first_sentence_prompt_omits_transition(self):
        llm = RecordingLlm({"instruction/attr/0": "Speak in a bright tone."})
        generate_instruction(STORY, STORY.sentences[0], CAST[1], "", llm, retry=NO_RETRY)
        assert "previous" not in llm.requests[0].user_prompt.lower()

    def test_transition_clause_threads_previous_instruction(self):
        llm = RecordingLlm({"instruction/attr/1": "Keep a steady pace."})
        generate_instruction(
            STORY, STORY.sentences[1], CAST[0], "Use a warm tone.", llm, retry=NO_RETRY
        )
        prompt = llm.requests[0].user_prompt
        assert "Use a warm tone." in prompt
        assert "transition" in prompt.lower()

    def test_non_speech_output_consumes_regeneration(self):
        llm = ScriptedLlm(
            {
                "instruction/attr/1": "The character wears a red coat.",
                "instruction/attr/1/retry": "Read in a low, steady voice.",
            }
        )
        instruction, retried, fell_back = generate_instruction(
            STORY, STORY.sentences[1], CAST[0], "", llm, retry=NO_RETRY
        )
        assert instruction == "Read in a low, steady voice."
        assert (retried, fell_back) == (True, False)

    def test_double_failure_uses_fallback(self):
        llm = ScriptedLlm(
            {
                "instruction/attr/1": "Nothing about speaking here.",
                "instruction/attr/1/retry": "x" * 400,
            }
        )
        instruction, retried, fell_back = generate_instruction(
            STORY, STORY.sentences[1], CAST[0], "", llm, retry=NO_RETRY
        )
        assert instruction == FALLBACK_INSTRUCTION
        assert (retried, fell_back) == (True, True)

    def test_multi_sentence_output_trimmed_to_first(self):
        llm = ScriptedLlm(
            {"instruction/attr/1": "Use a hushed tone. Also the coat is red and long."}
        )
        instruction, _, _ = generate_instruction(
            STORY, STORY.sentences[1], CAST[0], "", llm, retry=NO_RETRY
        )
        assert instruction == "Use a hushed tone."


def scripted_for_story(story, speakers, instructions=None):
    responses = {}
    for sentence in story.sentences:
        responses[f"attribute/{story.id}/{sentence.index}"] = speakers[sentence.index]
        text = (
            instructions[sentence.index]
            if instructions
            else "Read in an even, measured tone."
        )
        responses[f"instruction/{story.id}/{sentence.index}"] = text
    return responses


class TestBuildScript:
    def test_three_sentence_story(self):
        llm = ScriptedLlm(scripted_for_story(STORY, ["Alice", "Narrator", "Bob"]))
        lines, counters = build_script(STORY, CAST, llm, retry=NO_RETRY)
        assert [line.speaker_id for line in lines] == ["alice", "narrator", "bob"]
        assert [line.sentence_index for line in lines] == [0, 1, 2]
        assert counters.attribution_fallback == 0

    def test_line_count_always_matches_sentence_count(self):
        import random

        rng = random.Random(175)
        text = " ".join(
            " ".join(rng.choices(["keeper", "tide", "bell", "wind"], k=6)).capitalize() + "."
            for _ in range(175)
        )
        story = make_story(text, story_id="long175")
        llm = ScriptedLlm(scripted_for_story(story, ["Narrator"] * 175))
        lines, counters = build_script(story, CAST, llm, retry=NO_RETRY)
        assert len(lines) == 175
        assert counters.attribution_fallback == 0

    def test_every_tenth_attribution_invalid_counts_fallbacks(self):
        import random

        rng = random.Random(18)
        text = " ".join(
            " ".join(rng.choices(["keeper", "tide", "bell", "wind"], k=6)).capitalize() + "."
            for _ in range(175)
        )
        story = make_story(text, story_id="fuzz175")
        responses = scripted_for_story(story, ["Narrator"] * 175)
        bad_indices = list(range(0, 175, 10))
        for index in bad_indices:
            responses[f"attribute/{story.id}/{index}"] = "Zeke"
            responses[f"attribute/{story.id}/{index}/retry"] = "Mysterious Stranger"
        llm = ScriptedLlm(responses)
        lines, counters = build_script(story, CAST, llm, retry=NO_RETRY)
        cast_ids = {p.speaker_id for p in CAST}
        assert all(line.speaker_id in cast_ids for line in lines)
        assert counters.attribution_fallback == math.ceil(175 / 10) == len(bad_indices)

    def test_determinism_under_mocks(self):
        responses = scripted_for_story(STORY, ["Alice", "Narrator", "Bob"])
        first, _ = build_script(STORY, CAST, ScriptedLlm(responses), retry=NO_RETRY)
        second, _ = build_script(STORY, CAST, ScriptedLlm(responses), retry=NO_RETRY)
        assert first == second

    def test_windowing_recorded_for_long_stories(self):
        llm = ScriptedLlm(scripted_for_story(STORY, ["Alice", "Narrator", "Bob"]))
        _, counters = build_script(STORY, CAST, llm, retry=NO_RETRY, budget_chars=10)
        assert counters.windowed is True
