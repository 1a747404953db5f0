"""Mono 16-bit PCM helpers: WAV I/O, fades, gaps, resampling.

Everything downstream of the backends operates at ``model.SAMPLE_RATE``
(24 kHz). Backend audio at other rates is resampled on ingestion with a
polyphase windowed-sinc filter.
"""

from __future__ import annotations

import io
import wave
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .model import SAMPLE_RATE


class AudioError(ValueError):
    pass


def float_to_pcm16(samples: np.ndarray) -> bytes:
    clipped = np.clip(samples, -1.0, 1.0)
    return (np.round(clipped * 32767.0)).astype("<i2").tobytes()


def pcm16_to_float(pcm: bytes) -> np.ndarray:
    return np.frombuffer(pcm, dtype="<i2").astype(np.float64) / 32768.0


def pcm_duration_s(pcm: bytes, sample_rate: int = SAMPLE_RATE) -> float:
    return len(pcm) / 2 / sample_rate


def write_wav(path: str | Path, pcm: bytes, sample_rate: int = SAMPLE_RATE) -> None:
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(sample_rate)
        wav.writeframes(pcm)


def wav_bytes(pcm: bytes, sample_rate: int = SAMPLE_RATE) -> bytes:
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(sample_rate)
        wav.writeframes(pcm)
    return buf.getvalue()


def read_wav(source: str | Path | bytes) -> tuple[bytes, int]:
    """Read a WAV file or buffer; returns (mono 16-bit PCM, sample rate).

    Multichannel audio is downmixed by averaging; 8/24/32-bit samples are
    converted to 16-bit.
    """
    if isinstance(source, bytes):
        handle: io.BytesIO | str = io.BytesIO(source)
    else:
        handle = str(source)
    try:
        with wave.open(handle, "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            frames = wav.readframes(wav.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise AudioError(f"cannot read WAV data: {exc}") from exc
    if not frames:
        raise AudioError("WAV contains no audio frames")

    if width == 2 and channels == 1:
        return frames, rate  # already canonical; keep bytes exact

    if width == 2:
        data = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 1:
        data = (np.frombuffer(frames, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif width == 4:
        data = np.frombuffer(frames, dtype="<i4").astype(np.float64) / 2147483648.0
    elif width == 3:
        raw = np.frombuffer(frames, dtype=np.uint8).reshape(-1, 3)
        as_int = (
            raw[:, 0].astype(np.int32)
            | (raw[:, 1].astype(np.int32) << 8)
            | (raw[:, 2].astype(np.int32) << 16)
        )
        as_int = np.where(as_int >= 1 << 23, as_int - (1 << 24), as_int)
        data = as_int.astype(np.float64) / float(1 << 23)
    else:
        raise AudioError(f"unsupported WAV sample width: {width} bytes")

    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    return float_to_pcm16(data), rate


def resample_pcm(pcm: bytes, from_rate: int, to_rate: int = SAMPLE_RATE) -> bytes:
    """Windowed-sinc (polyphase) resampling between integer sample rates."""
    if from_rate == to_rate:
        return pcm
    if from_rate <= 0 or to_rate <= 0:
        raise AudioError(f"invalid sample rates {from_rate} -> {to_rate}")
    samples = pcm16_to_float(pcm)
    g = np.gcd(from_rate, to_rate)
    out = resample_poly(samples, to_rate // g, from_rate // g)
    return float_to_pcm16(out)


def ingest_wav(data: bytes, target_rate: int = SAMPLE_RATE) -> bytes:
    """Decode WAV bytes to canonical mono PCM at ``target_rate``."""
    pcm, rate = read_wav(data)
    return resample_pcm(pcm, rate, target_rate)


def apply_fades(pcm: bytes, fade_ms: int, sample_rate: int = SAMPLE_RATE) -> bytes:
    """Linear fade-in/out over ``fade_ms`` at each end (click suppression)."""
    if fade_ms <= 0:
        return pcm
    samples = np.frombuffer(pcm, dtype="<i2").astype(np.float64)
    n = len(samples)
    fade = min(int(sample_rate * fade_ms / 1000), n // 2)
    if fade == 0:
        return pcm
    ramp = np.linspace(0.0, 1.0, fade, endpoint=False)
    samples[:fade] *= ramp
    samples[-fade:] *= ramp[::-1]
    return np.round(samples).astype("<i2").tobytes()


def silence(duration_ms: int, sample_rate: int = SAMPLE_RATE) -> bytes:
    return b"\x00\x00" * int(round(sample_rate * duration_ms / 1000))
