from __future__ import annotations

import pytest

from castbook.model import (
    AudiobookManifest,
    ModelError,
    PersonaRef,
    SAMPLE_RATE,
    ScriptLine,
    SegmentRef,
    Sentence,
    SpeakerPersona,
    Story,
    require_one_narrator,
)


def _persona(speaker_id="p1", is_narrator=False, voice_seconds=3.0):
    return SpeakerPersona(
        speaker_id=speaker_id,
        name_or_role=speaker_id.title(),
        caption="a test subject",
        face_image=b"png-bytes",
        face_format="png",
        face_caption="portrait photo of a test subject",
        voice_sample=b"\x00\x00" * int(SAMPLE_RATE * voice_seconds),
        is_narrator=is_narrator,
    )


def test_sentence_requires_content():
    with pytest.raises(ModelError):
        Sentence(index=0, text="   ", span=(0, 3))


def test_story_rejects_overlapping_spans():
    text = "One. Two."
    good = Story(
        id="s",
        title="",
        raw_text=text,
        sentences=(
            Sentence(index=0, text="One.", span=(0, 4)),
            Sentence(index=1, text="Two.", span=(5, 9)),
        ),
    )
    assert len(good.sentences) == 2
    with pytest.raises(ModelError):
        Story(
            id="s",
            title="",
            raw_text=text,
            sentences=(
                Sentence(index=0, text="One.", span=(0, 4)),
                Sentence(index=1, text="e. T", span=(2, 6)),
            ),
        )


def test_story_rejects_skipped_content():
    with pytest.raises(ModelError, match="skipped"):
        Story(
            id="s",
            title="",
            raw_text="One. Two.",
            sentences=(Sentence(index=0, text="Two.", span=(5, 9)),),
        )


def test_persona_voice_duration_bounds():
    with pytest.raises(ModelError, match="voice sample"):
        _persona(voice_seconds=0.5)
    with pytest.raises(ModelError, match="voice sample"):
        _persona(voice_seconds=16.0)
    assert _persona(voice_seconds=1.0).voice_duration_s == pytest.approx(1.0)


def test_exactly_one_narrator_enforced():
    with pytest.raises(ModelError, match="narrator"):
        require_one_narrator([_persona("a"), _persona("b")])
    with pytest.raises(ModelError, match="narrator"):
        require_one_narrator([_persona("a", True), _persona("b", True)])
    narrator = require_one_narrator([_persona("a", True), _persona("b")])
    assert narrator.speaker_id == "a"


def test_duplicate_speaker_ids_rejected():
    with pytest.raises(ModelError, match="duplicate"):
        require_one_narrator([_persona("a", True), _persona("a")])


def _manifest(lines, segments, personas=("n",)):
    return AudiobookManifest(
        story_id="s",
        personas=tuple(
            PersonaRef(
                speaker_id=p,
                name_or_role=p,
                is_narrator=(p == "n"),
                persona_path="x",
                face_path="x",
                voice_path="x",
                face_sha256="0" * 64,
                voice_sha256="0" * 64,
                caption_sha256="0" * 64,
            )
            for p in personas
        ),
        lines=tuple(lines),
        segments=tuple(segments),
        total_duration_s=sum(s.duration_s for s in segments),
        config_fingerprint="f",
        backend_ids={"llm": "mock"},
    )


def test_manifest_requires_one_segment_per_line():
    line = ScriptLine(sentence_index=0, speaker_id="n", instruction="Read in a calm tone.")
    seg = SegmentRef(sentence_index=0, path="segments/0.wav", duration_s=1.0, start_sample=0)
    manifest = _manifest([line], [seg])
    assert manifest.total_duration_s == 1.0
    with pytest.raises(ModelError):
        _manifest([line], [])


def test_manifest_rejects_unknown_speaker():
    line = ScriptLine(sentence_index=0, speaker_id="ghost", instruction="Read in a calm tone.")
    seg = SegmentRef(sentence_index=0, path="segments/0.wav", duration_s=1.0, start_sample=0)
    with pytest.raises(ModelError, match="unknown persona"):
        _manifest([line], [seg])


def test_manifest_round_trips_through_dict():
    line = ScriptLine(sentence_index=0, speaker_id="n", instruction="Read in a calm tone.")
    seg = SegmentRef(sentence_index=0, path="segments/0.wav", duration_s=1.0, start_sample=0)
    manifest = _manifest([line], [seg])
    again = AudiobookManifest.from_dict(manifest.to_dict())
    assert again == manifest
