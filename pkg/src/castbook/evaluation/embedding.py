"""MFCC-statistics speaker embeddings.

Each audio window is summarized by the per-coefficient mean and standard
deviation of its MFCC frames (coefficients 1..13; the 0th, energy-like
coefficient is dropped so uniform gain changes cancel), L2-normalized
into a 26-dimensional unit vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fftpack import dct

from ..model import SAMPLE_RATE

EMBEDDING_DIM = 26
_N_MFCC = 13  # coefficients 1..13
_N_MELS = 40
_FRAME_S = 0.025
_HOP_S = 0.010
_PREEMPHASIS = 0.97


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class SpeakerEmbedding:
    vector: tuple[float, ...]
    window: tuple[float, float]  # (start_s, end_s)

    def __post_init__(self) -> None:
        arr = np.asarray(self.vector)
        if len(arr) != EMBEDDING_DIM:
            raise EmbeddingError(f"expected {EMBEDDING_DIM} dims, got {len(arr)}")
        if not np.all(np.isfinite(arr)):
            raise EmbeddingError("embedding has non-finite components")
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > 1e-6:
            raise EmbeddingError(f"embedding norm {norm} is not 1")


def cosine_similarity(a: SpeakerEmbedding, b: SpeakerEmbedding) -> float:
    return float(np.dot(np.asarray(a.vector), np.asarray(b.vector)))


def _hz_to_mel(hz: np.ndarray | float) -> np.ndarray | float:
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def _mel_to_hz(mel: np.ndarray | float) -> np.ndarray | float:
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def _mel_filterbank(n_fft: int, sample_rate: int) -> np.ndarray:
    bins = n_fft // 2 + 1
    mel_edges = np.linspace(
        _hz_to_mel(0.0), _hz_to_mel(sample_rate / 2.0), _N_MELS + 2
    )
    hz_edges = np.asarray(_mel_to_hz(mel_edges))
    bin_edges = np.floor((n_fft + 1) * hz_edges / sample_rate).astype(int)
    bank = np.zeros((_N_MELS, bins))
    for m in range(1, _N_MELS + 1):
        lo, center, hi = bin_edges[m - 1], bin_edges[m], bin_edges[m + 1]
        if center > lo:
            bank[m - 1, lo:center] = (np.arange(lo, center) - lo) / (center - lo)
        if hi > center:
            bank[m - 1, center:hi] = (hi - np.arange(center, hi)) / (hi - center)
    return bank


def mfcc_frames(samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """MFCC matrix (frames x 13), coefficients 1..13 of each 25 ms frame."""
    frame_len = int(round(_FRAME_S * sample_rate))
    hop = int(round(_HOP_S * sample_rate))
    if len(samples) < frame_len:
        raise EmbeddingError("audio shorter than one MFCC frame")
    emphasized = np.append(samples[0], samples[1:] - _PREEMPHASIS * samples[:-1])
    n_frames = (len(emphasized) - frame_len) // hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(emphasized, frame_len)[::hop][:n_frames]
    n_fft = 1 << int(np.ceil(np.log2(frame_len)))
    windowed = frames * np.hamming(frame_len)
    power = np.abs(np.fft.rfft(windowed, n_fft)) ** 2 / n_fft
    bank = _mel_filterbank(n_fft, sample_rate)
    mel_energy = power @ bank.T
    log_mel = np.log(np.maximum(mel_energy, 1e-12))
    cepstra = dct(log_mel, type=2, axis=1, norm="ortho")
    return cepstra[:, 1 : _N_MFCC + 1]


def embed_window(
    samples: np.ndarray,
    window: tuple[float, float],
    sample_rate: int = SAMPLE_RATE,
) -> SpeakerEmbedding:
    """Summarize one audio window into a unit-normalized embedding."""
    coeffs = mfcc_frames(samples, sample_rate)
    means = coeffs.mean(axis=0)
    stds = coeffs.std(axis=0)
    vector = np.concatenate([means, stds])
    norm = np.linalg.norm(vector)
    if norm == 0.0 or not np.all(np.isfinite(vector)):
        raise EmbeddingError("degenerate audio window for embedding")
    vector = vector / norm
    return SpeakerEmbedding(vector=tuple(vector.tolist()), window=window)
