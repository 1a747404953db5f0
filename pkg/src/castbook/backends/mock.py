"""Deterministic offline backends.

The mocks are contracts, not conveniences: identical requests must yield
byte-identical responses, and the synthetic TTS voice produces real
harmonic signal so pitch tracking and speaker embeddings downstream are
exercised end to end without any model checkpoint.

Synthetic voice formula:

* base F0 = SHA-256(face_caption + face_image bytes) mapped into
  [85, 255] Hz — one stable voice per persona.
* waveform = three harmonics (amplitudes 1, 0.5, 0.25) of the base F0
  with per-word amplitude envelopes.
* the reading instruction selects vibrato depth/rate from a keyword
  table: "excited" modulates F0 by ±20% at 3 Hz, "calm"/"flat" by ±2%.
"""

from __future__ import annotations

import hashlib
import io
import math
import threading
from collections.abc import Container

import numpy as np
from PIL import Image, ImageDraw
from PIL.PngImagePlugin import PngInfo

from ..audio import float_to_pcm16
from ..model import SAMPLE_RATE
from .base import (
    MODE_PERSONA_BOOTSTRAP,
    BackendError,
    BackendIdentity,
    ImageRequest,
    ImageResponse,
    LlmRequest,
    LlmResponse,
    TtsRequest,
    TtsResponse,
)

MOCK_FACE_MARKER = "mock-face"

BASE_F0_MIN_HZ = 85.0
BASE_F0_MAX_HZ = 255.0
BOOTSTRAP_DURATION_S = 3.0
SECONDS_PER_CHAR = 0.06
MIN_SENTENCE_DURATION_S = 0.5

# (vibrato depth as F0 fraction, vibrato rate Hz); first keyword hit wins.
INSTRUCTION_VIBRATO: tuple[tuple[tuple[str, ...], tuple[float, float]], ...] = (
    (("excited", "thrilled", "exuberant", "frantic"), (0.20, 3.0)),
    (("angry", "furious", "shout", "stern"), (0.16, 2.6)),
    (("joy", "cheerful", "delight", "laugh", "bright"), (0.14, 2.2)),
    (("fear", "anxious", "panic", "urgent", "trembl"), (0.12, 2.8)),
    (("sad", "sorrow", "mournful", "grief", "melanch"), (0.05, 0.9)),
    (("tender", "warm", "gentle", "soothing", "reassur"), (0.04, 1.0)),
    (("whisper", "hushed", "soft", "quiet"), (0.03, 1.0)),
    (("calm", "flat", "steady", "neutral", "even", "measured"), (0.02, 1.0)),
)
DEFAULT_VIBRATO = (0.06, 1.4)
BOOTSTRAP_VIBRATO = (0.03, 1.0)


def vibrato_for_instruction(instruction: str) -> tuple[float, float]:
    lowered = instruction.lower()
    for keywords, params in INSTRUCTION_VIBRATO:
        if any(word in lowered for word in keywords):
            return params
    return DEFAULT_VIBRATO


def _persona_digest(face_caption: str, face_image: bytes) -> bytes:
    return hashlib.sha256(face_caption.encode("utf-8") + face_image).digest()


def persona_base_f0(face_caption: str, face_image: bytes) -> float:
    """Hash the persona's visual identity into a stable base pitch."""
    digest = _persona_digest(face_caption, face_image)
    fraction = int.from_bytes(digest[:8], "big") / float(1 << 64)
    return BASE_F0_MIN_HZ + fraction * (BASE_F0_MAX_HZ - BASE_F0_MIN_HZ)


def _digest_unit(digest: bytes, offset: int) -> float:
    return int.from_bytes(digest[offset : offset + 4], "big") / float(1 << 32)


def persona_harmonics(face_caption: str, face_image: bytes) -> tuple[float, float, float]:
    """Persona-specific harmonic amplitude profile (the voice's timbre)."""
    digest = _persona_digest(face_caption, face_image)
    return (
        0.35 + 0.65 * _digest_unit(digest, 8),  # fundamental
        0.05 + 1.15 * _digest_unit(digest, 12),  # 2nd harmonic
        0.02 + 0.98 * _digest_unit(digest, 16),  # 3rd harmonic
    )


def persona_breath(face_caption: str, face_image: bytes) -> tuple[float, float]:
    """Breath-noise coloring: (spectral tilt exponent, resonance center Hz).

    The -24 dB noise floor gives each voice a broadband signature so
    spectral-envelope embeddings can tell personas apart the way they
    would with real speech.
    """
    digest = _persona_digest(face_caption, face_image)
    tilt = -2.0 + 2.6 * _digest_unit(digest, 20)  # dB-ish slope exponent
    resonance_hz = 2000.0 + 6000.0 * _digest_unit(digest, 24)
    return tilt, resonance_hz


class ScriptedLlm:
    """Lookup-table LLM: request key -> canned response text."""

    def __init__(self, responses: dict[str, str], name: str = "scripted") -> None:
        self.identity = BackendIdentity(stage="llm", kind="mock", name=name)
        self._responses = dict(responses)
        self._lock = threading.Lock()
        self.calls: list[str] = []

    def complete(self, request: LlmRequest) -> LlmResponse:
        with self._lock:
            self.calls.append(request.key)
            if request.key not in self._responses:
                raise BackendError(f"no scripted response for key {request.key!r}")
            return LlmResponse(text=self._responses[request.key])


class ProceduralImageBackend:
    """Draws a deterministic procedural portrait for (caption, seed).

    Seeds listed in ``non_face_seeds`` yield an abstract non-face image,
    which lets tests exercise the face filter's retry path without
    breaking request determinism.
    """

    def __init__(
        self,
        non_face_seeds: Container[int] = frozenset(),
        name: str = "procedural",
    ) -> None:
        self.identity = BackendIdentity(stage="image", kind="mock", name=name)
        self._non_face_seeds = non_face_seeds
        self._lock = threading.Lock()
        self.calls: list[ImageRequest] = []

    def generate(self, request: ImageRequest) -> ImageResponse:
        with self._lock:
            self.calls.append(request)
        digest = hashlib.sha256(
            f"{request.caption}\x00{request.seed}".encode("utf-8")
        ).digest()
        is_face = request.seed not in self._non_face_seeds
        if is_face:
            img = _draw_portrait(digest, request.size)
        else:
            img = _draw_abstract(digest, request.size)
        meta = PngInfo()
        meta.add_text(MOCK_FACE_MARKER, "1" if is_face else "0")
        buf = io.BytesIO()
        img.save(buf, format="PNG", pnginfo=meta)
        return ImageResponse(image=buf.getvalue(), format="png")


def _palette(digest: bytes, offset: int) -> tuple[int, int, int]:
    return (digest[offset % 32], digest[(offset + 1) % 32], digest[(offset + 2) % 32])


def _draw_portrait(digest: bytes, size: tuple[int, int]) -> Image.Image:
    w, h = size
    img = Image.new("RGB", size, _palette(digest, 0))
    draw = ImageDraw.Draw(img)
    skin = (200 + digest[3] % 40, 160 + digest[4] % 50, 130 + digest[5] % 50)
    cx, cy = w // 2, int(h * 0.42)
    rx, ry = int(w * 0.22), int(h * 0.28)
    draw.ellipse((cx - rx, cy - ry, cx + rx, cy + ry), fill=skin)
    # shoulders
    draw.ellipse(
        (cx - int(w * 0.38), int(h * 0.72), cx + int(w * 0.38), int(h * 1.2)),
        fill=_palette(digest, 6),
    )
    eye_dx, eye_y, eye_r = int(rx * 0.45), cy - int(ry * 0.15), max(3, w // 40)
    for ex in (cx - eye_dx, cx + eye_dx):
        draw.ellipse((ex - eye_r, eye_y - eye_r, ex + eye_r, eye_y + eye_r), fill=(30, 30, 35))
    mouth_y = cy + int(ry * 0.45)
    draw.arc(
        (cx - eye_dx, mouth_y - eye_r * 2, cx + eye_dx, mouth_y + eye_r * 2),
        start=digest[7] % 20,
        end=160 + digest[8] % 20,
        fill=(120, 40, 40),
        width=max(2, w // 120),
    )
    return img


def _draw_abstract(digest: bytes, size: tuple[int, int]) -> Image.Image:
    w, h = size
    img = Image.new("RGB", size, _palette(digest, 9))
    draw = ImageDraw.Draw(img)
    for i in range(6):
        x0 = digest[(10 + i) % 32] * w // 255
        y0 = digest[(16 + i) % 32] * h // 255
        draw.rectangle(
            (x0, y0, min(w, x0 + w // 4), min(h, y0 + h // 4)),
            fill=_palette(digest, 12 + 3 * i),
        )
    return img


def read_mock_face_marker(image: bytes) -> bool | None:
    """Returns the embedded face marker, or None for non-mock images."""
    try:
        with Image.open(io.BytesIO(image)) as img:
            value = getattr(img, "text", {}).get(MOCK_FACE_MARKER)
    except Exception:
        return None
    if value is None:
        return None
    return value == "1"


class SyntheticVoiceBackend:
    """Mock multimodal TTS: persona-hash pitch plus instruction vibrato."""

    def __init__(self, name: str = "synthetic-voice") -> None:
        self.identity = BackendIdentity(stage="tts", kind="mock", name=name)
        self._lock = threading.Lock()
        self.calls: list[TtsRequest] = []

    def synthesize(self, request: TtsRequest) -> TtsResponse:
        with self._lock:
            self.calls.append(request)
        base_f0 = persona_base_f0(request.face_caption, request.face_image)
        harmonics = persona_harmonics(request.face_caption, request.face_image)
        breath = persona_breath(request.face_caption, request.face_image)
        if request.mode == MODE_PERSONA_BOOTSTRAP:
            duration_s = BOOTSTRAP_DURATION_S
            depth, rate = BOOTSTRAP_VIBRATO
            envelope_text = request.text or request.face_caption
        else:
            duration_s = max(MIN_SENTENCE_DURATION_S, SECONDS_PER_CHAR * len(request.text))
            depth, rate = vibrato_for_instruction(request.instruction)
            envelope_text = request.text
        noise_seed = hashlib.sha256(
            request.face_caption.encode("utf-8")
            + request.face_image
            + request.text.encode("utf-8")
            + request.instruction.encode("utf-8")
            + request.mode.encode("utf-8")
        ).digest()
        pcm = _render_voice(
            base_f0, harmonics, breath, depth, rate, duration_s, envelope_text, noise_seed
        )
        return TtsResponse(pcm=pcm)


_BREATH_LEVEL = 0.06  # relative to unit harmonic peak (~ -24 dB)


def _render_voice(
    base_f0: float,
    harmonics: tuple[float, float, float],
    breath: tuple[float, float],
    depth: float,
    rate: float,
    duration_s: float,
    text: str,
    noise_seed: bytes,
) -> bytes:
    n = int(round(duration_s * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE
    f0 = base_f0 * (1.0 + depth * np.sin(2.0 * math.pi * rate * t))
    phase = 2.0 * math.pi * np.cumsum(f0) / SAMPLE_RATE
    wave = (
        harmonics[0] * np.sin(phase)
        + harmonics[1] * np.sin(2.0 * phase)
        + harmonics[2] * np.sin(3.0 * phase)
    )
    wave += _BREATH_LEVEL * _colored_noise(n, breath, noise_seed)
    wave *= _word_envelope(text, n)
    peak = np.max(np.abs(wave))
    if peak > 0:
        wave *= 0.4 / peak
    return float_to_pcm16(wave)


def _colored_noise(n: int, breath: tuple[float, float], seed: bytes) -> np.ndarray:
    """Deterministic persona-colored breath: tilt plus resonance, kept above
    the pitch band (high-passed at ~1.6 kHz) so F0 tracking stays clean."""
    tilt, resonance_hz = breath
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(seed[:8], "big")))
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, 1.0 / SAMPLE_RATE)
    shape = (np.maximum(freqs, 1600.0) / 4000.0) ** tilt
    shape *= 1.0 + 3.0 * np.exp(-0.5 * ((freqs - resonance_hz) / 600.0) ** 2)
    shape *= 1.0 / (1.0 + np.exp(-(freqs - 1600.0) / 150.0))  # high-pass knee
    colored = np.fft.irfft(spectrum * shape, n)
    rms = np.sqrt(np.mean(colored**2))
    return colored / rms if rms > 0 else colored


def _word_envelope(text: str, n_samples: int) -> np.ndarray:
    """Per-word loudness contour: raised-cosine swell per word.

    Transitions are smooth so the amplitude modulation stays out of the
    pitch tracker's way; words only shape loudness, never voicing.
    """
    words = [w for w in text.split() if w] or ["x"]
    weights = np.array([len(w) + 1 for w in words], dtype=np.float64)
    edges = np.round(np.concatenate(([0.0], np.cumsum(weights))) / weights.sum() * n_samples)
    envelope = np.full(n_samples, 0.6)
    for k in range(len(words)):
        lo, hi = int(edges[k]), int(edges[k + 1])
        if hi <= lo:
            continue
        phase = np.linspace(0.0, math.pi, hi - lo)
        envelope[lo:hi] = 0.6 + 0.4 * np.sin(phase)
    return envelope


class ScriptedJudge:
    """Lookup-table audio judge: request key -> canned answer text."""

    def __init__(self, responses: dict[str, str], name: str = "scripted-judge") -> None:
        self.identity = BackendIdentity(stage="mllm_judge", kind="mock", name=name)
        self._responses = dict(responses)
        self._lock = threading.Lock()
        self.calls: list[tuple[str, int]] = []  # (key, wav byte length)

    def ask(self, wav_data: bytes, question: str, key: str = "") -> str:
        with self._lock:
            self.calls.append((key, len(wav_data)))
            if key not in self._responses:
                raise BackendError(f"no scripted judge response for key {key!r}")
            return self._responses[key]
