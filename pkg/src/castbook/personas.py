"""Persona construction: speaker extraction, face generation, voice bootstrap.

Every character leaves this module with all three modalities present
(caption, face image, voice sample) or the pipeline errors; partially
built personas are never handed to synthesis.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .backends.base import (
    MODE_PERSONA_BOOTSTRAP,
    ImageBackend,
    ImageRequest,
    InflightCap,
    LlmBackend,
    LlmRequest,
    RetryPolicy,
    SchemaViolationError,
    TtsBackend,
    TtsRequest,
    generate_image,
    llm_complete,
    synthesize,
)
from .backends.mock import read_mock_face_marker
from .model import SpeakerPersona, Story
from .util import sha256_bytes, sha256_text, slugify

log = logging.getLogger(__name__)

MAX_SPEAKERS = 12
DEFAULT_FACE_ATTEMPTS = 4
FACE_CAPTION_TEMPLATE = "portrait photo of {caption}"

SPEAKER_SCHEMA = {
    "type": "object",
    "required": ["narrator", "characters"],
    "properties": {
        "narrator": {
            "type": "object",
            "required": ["name", "caption"],
            "properties": {
                "name": {"type": "string", "minLength": 1},
                "caption": {"type": "string", "minLength": 1},
            },
        },
        "characters": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "caption"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "caption": {"type": "string", "minLength": 1},
                },
            },
        },
    },
}

_EXTRACTION_SYSTEM_PROMPT = (
    "You are a casting director preparing a story for audiobook narration. "
    "Respond with JSON only, matching this shape: "
    '{"narrator": {"name": string, "caption": string}, '
    '"characters": [{"name": string, "caption": string}]}.'
)

_EXTRACTION_USER_TEMPLATE = """Read the story below and list everyone who needs a voice.

1. The narrator: describe the narrator's external features in one sentence,
   detailed enough to paint a portrait. If the story is told in the third
   person, pick the main character and describe them as the narrator.
2. Every character with spoken dialogue: give their name or role and a
   one-sentence description of their external features suitable for a
   portrait. When the story does not describe someone's appearance, infer
   plausible features from their role and context instead of leaving the
   description empty.

Story:
{story}
"""


class PersonaError(RuntimeError):
    pass


@dataclass(frozen=True)
class PersonaDraft:
    name_or_role: str
    caption: str
    is_narrator: bool


def extract_speakers(
    story: Story,
    llm: LlmBackend,
    retry: RetryPolicy | None = None,
    cap: InflightCap | None = None,
    max_speakers: int = MAX_SPEAKERS,
    temperature: float = 0.7,
) -> list[PersonaDraft]:
    """Identify the narrator and every speaking character, with captions."""
    request = LlmRequest(
        system_prompt=_EXTRACTION_SYSTEM_PROMPT,
        user_prompt=_EXTRACTION_USER_TEMPLATE.format(story=story.raw_text),
        temperature=temperature,
        response_format="json",
        json_schema=SPEAKER_SCHEMA,
        key=f"extract_speakers/{story.id}",
    )
    try:
        response = llm_complete(llm, request, retry=retry, cap=cap)
    except SchemaViolationError as exc:
        raise PersonaError(f"speaker extraction failed: {exc}") from exc
    payload = json.loads(response.text)

    drafts = [
        PersonaDraft(
            name_or_role=payload["narrator"]["name"].strip(),
            caption=payload["narrator"]["caption"].strip(),
            is_narrator=True,
        )
    ]
    seen = {drafts[0].name_or_role.casefold()}
    for character in payload["characters"]:
        name = character["name"].strip()
        if name.casefold() in seen:
            continue  # third-person main character doubles as the narrator
        seen.add(name.casefold())
        drafts.append(
            PersonaDraft(name_or_role=name, caption=character["caption"].strip(), is_narrator=False)
        )
    if len(drafts) > max_speakers:
        log.warning(
            "speaker extraction returned %d personas; truncating to %d",
            len(drafts),
            max_speakers,
        )
        drafts = drafts[:max_speakers]
    return drafts


_face_detector = None


def _detector():
    global _face_detector
    if _face_detector is None:
        from skimage import data as skimage_data
        from skimage.feature import Cascade

        _face_detector = Cascade(skimage_data.lbp_frontal_face_cascade_filename())
    return _face_detector


def face_filter(image: bytes) -> bool:
    """True iff the image contains a detectable human face.

    Mock images short-circuit through their embedded marker; everything
    else runs the shipped classical frontal-face cascade. Undecodable
    payloads are rejected with a warning rather than an error.
    """
    marker = read_mock_face_marker(image)
    if marker is not None:
        return marker
    import io

    import numpy as np
    from PIL import Image

    try:
        with Image.open(io.BytesIO(image)) as img:
            rgb = np.asarray(img.convert("RGB"))
    except Exception as exc:
        log.warning("face filter could not decode image: %s", exc)
        return False
    min_side = min(rgb.shape[0], rgb.shape[1])
    found = _detector().detect_multi_scale(
        img=rgb,
        scale_factor=1.2,
        step_ratio=1.3,
        min_size=(max(24, min_side // 8), max(24, min_side // 8)),
        max_size=(min_side, min_side),
    )
    return len(found) > 0


def generate_face_persona(
    draft: PersonaDraft,
    image_backend: ImageBackend,
    max_attempts: int = DEFAULT_FACE_ATTEMPTS,
    base_seed: int = 0,
    size: tuple[int, int] = (512, 512),
    retry: RetryPolicy | None = None,
    cap: InflightCap | None = None,
) -> tuple[bytes, str]:
    """Generate a face image that passes the filter; returns (image, caption).

    Each attempt uses a fresh seed. When every attempt fails the filter,
    raises ``PersonaError`` carrying the per-attempt log.
    """
    face_caption = FACE_CAPTION_TEMPLATE.format(caption=draft.caption)
    attempts: list[dict] = []
    for attempt in range(max_attempts):
        seed = base_seed + attempt
        response = generate_image(
            image_backend,
            ImageRequest(caption=face_caption, seed=seed, size=size),
            retry=retry,
            cap=cap,
        )
        if face_filter(response.image):
            return response.image, face_caption
        attempts.append({"attempt": attempt + 1, "seed": seed, "result": "no face detected"})
        log.info("face attempt %d/%d rejected for %r", attempt + 1, max_attempts, draft.name_or_role)
    raise PersonaError(
        f"no face obtained for {draft.name_or_role!r} after {max_attempts} attempts: "
        + json.dumps(attempts)
    )


def bootstrap_audio_persona(
    face_image: bytes,
    face_caption: str,
    tts: TtsBackend,
    retry: RetryPolicy | None = None,
    cap: InflightCap | None = None,
) -> bytes:
    """Synthesize the persona's anchor voice from face and caption only.

    Uses the masked-input bootstrap mode: the voice-sample conditioning
    input is deliberately absent.
    """
    request = TtsRequest(
        text="",
        instruction="",
        face_image=face_image,
        face_caption=face_caption,
        voice_sample=b"",
        mode=MODE_PERSONA_BOOTSTRAP,
    )
    return synthesize(tts, request, retry=retry, cap=cap).pcm


def _speaker_id(name_or_role: str, taken: set[str]) -> str:
    base = slugify(name_or_role)
    candidate = base
    n = 2
    while candidate in taken:
        candidate = f"{base}-{n}"
        n += 1
    taken.add(candidate)
    return candidate


def build_personas(
    story: Story,
    llm: LlmBackend,
    image_backend: ImageBackend,
    tts: TtsBackend,
    seed: int = 0,
    max_attempts: int = DEFAULT_FACE_ATTEMPTS,
    max_speakers: int = MAX_SPEAKERS,
    image_size: tuple[int, int] = (512, 512),
    extraction_temperature: float = 0.7,
    retry: RetryPolicy | None = None,
    request_log: list[dict] | None = None,
) -> list[SpeakerPersona]:
    """Run the full persona stage: extraction, faces, and voice bootstrap."""
    drafts = extract_speakers(
        story, llm, retry=retry, max_speakers=max_speakers, temperature=extraction_temperature
    )
    taken: set[str] = set()
    personas: list[SpeakerPersona] = []
    for index, draft in enumerate(drafts):
        speaker_id = _speaker_id(draft.name_or_role, taken)
        face_image, face_caption = generate_face_persona(
            draft,
            image_backend,
            max_attempts=max_attempts,
            base_seed=seed + 100 * index,
            size=image_size,
            retry=retry,
        )
        voice = bootstrap_audio_persona(face_image, face_caption, tts, retry=retry)
        if request_log is not None:
            request_log.append(
                {
                    "stage": "tts",
                    "mode": MODE_PERSONA_BOOTSTRAP,
                    "speaker_id": speaker_id,
                    "face_image_sha256": sha256_bytes(face_image),
                    "face_caption_sha256": sha256_text(face_caption),
                    "voice_sample_sha256": sha256_bytes(b""),
                }
            )
        personas.append(
            SpeakerPersona(
                speaker_id=speaker_id,
                name_or_role=draft.name_or_role,
                caption=draft.caption,
                face_image=face_image,
                face_format="png",
                face_caption=face_caption,
                voice_sample=voice,
                is_narrator=draft.is_narrator,
            )
        )
    return personas


class PersonaStore:
    """Disk layout: personas/<speaker_id>/{persona.json, face.png, voice.wav}."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def save(self, personas: list[SpeakerPersona]) -> None:
        from .audio import write_wav

        for order, persona in enumerate(personas):
            folder = self.root / persona.speaker_id
            folder.mkdir(parents=True, exist_ok=True)
            face_path = folder / f"face.{persona.face_format}"
            voice_path = folder / "voice.wav"
            face_path.write_bytes(persona.face_image)
            write_wav(voice_path, persona.voice_sample)
            meta = {
                "order": order,
                "speaker_id": persona.speaker_id,
                "name_or_role": persona.name_or_role,
                "caption": persona.caption,
                "face_caption": persona.face_caption,
                "face_format": persona.face_format,
                "is_narrator": persona.is_narrator,
                "face_sha256": sha256_bytes(persona.face_image),
                "voice_sha256": sha256_bytes(persona.voice_sample),
            }
            (folder / "persona.json").write_text(
                json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )

    def load(self) -> list[SpeakerPersona]:
        from .audio import read_wav

        entries = []
        if not self.root.is_dir():
            raise PersonaError(f"persona store {self.root} does not exist")
        for folder in sorted(self.root.iterdir()):
            meta_path = folder / "persona.json"
            if not meta_path.is_file():
                continue
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            face = (folder / f"face.{meta['face_format']}").read_bytes()
            voice, _rate = read_wav(folder / "voice.wav")
            if sha256_bytes(face) != meta["face_sha256"]:
                raise PersonaError(f"face image hash mismatch in {folder}")
            entries.append(
                (
                    meta.get("order", 0),
                    SpeakerPersona(
                        speaker_id=meta["speaker_id"],
                        name_or_role=meta["name_or_role"],
                        caption=meta["caption"],
                        face_image=face,
                        face_format=meta["face_format"],
                        face_caption=meta["face_caption"],
                        voice_sample=voice,
                        is_narrator=meta["is_narrator"],
                    ),
                )
            )
        if not entries:
            raise PersonaError(f"persona store {self.root} is empty")
        return [persona for _order, persona in sorted(entries, key=lambda e: e[0])]
