"""Frame-level fundamental-frequency tracking (YIN difference function).

For each 40 ms analysis window (10 ms hop) the tracker computes the
cumulative mean normalized difference function (CMNDF), picks the first
lag dipping below the aperiodicity threshold (descending to the local
minimum), and refines it by parabolic interpolation. Frames whose best
CMNDF value stays at or above the threshold are unvoiced and carry F0 0.

The implementation is batched: difference functions for all frames are
computed at once via FFT cross-correlation, which keeps full-audiobook
tracking fast enough for the evaluation CLI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import SAMPLE_RATE

DEFAULT_FRAME_HOP_S = 0.010
DEFAULT_WINDOW_S = 0.040
DEFAULT_F_MIN_HZ = 50.0
DEFAULT_F_MAX_HZ = 600.0
APERIODICITY_THRESHOLD = 0.2
_SILENCE_RMS = 1e-4


class PitchError(ValueError):
    pass


@dataclass(frozen=True)
class PitchContour:
    """Per-frame F0 track; unvoiced frames carry f0 = 0."""

    frame_hop_s: float
    f0_hz: tuple[float, ...]
    voiced: tuple[bool, ...]
    f_min_hz: float = DEFAULT_F_MIN_HZ
    f_max_hz: float = DEFAULT_F_MAX_HZ

    def __post_init__(self) -> None:
        if len(self.f0_hz) != len(self.voiced):
            raise PitchError("f0 and voicing tracks differ in length")
        for f0, voiced in zip(self.f0_hz, self.voiced):
            if voiced:
                if not self.f_min_hz <= f0 <= self.f_max_hz:
                    raise PitchError(f"voiced F0 {f0:.2f} outside tracker range")
            elif f0 != 0.0:
                raise PitchError("unvoiced frames must carry f0 = 0")

    def voiced_f0(self) -> np.ndarray:
        return np.asarray(self.f0_hz)[np.asarray(self.voiced)]

    def voiced_runs(self) -> list[np.ndarray]:
        """Maximal runs of consecutive voiced frames, as F0 arrays."""
        voiced = np.asarray(self.voiced)
        f0 = np.asarray(self.f0_hz)
        runs: list[np.ndarray] = []
        start = None
        for i, flag in enumerate(voiced):
            if flag and start is None:
                start = i
            elif not flag and start is not None:
                runs.append(f0[start:i])
                start = None
        if start is not None:
            runs.append(f0[start:])
        return runs


def extract_pitch(
    pcm: bytes | np.ndarray,
    frame_hop_s: float = DEFAULT_FRAME_HOP_S,
    f_min_hz: float = DEFAULT_F_MIN_HZ,
    f_max_hz: float = DEFAULT_F_MAX_HZ,
    window_s: float = DEFAULT_WINDOW_S,
    sample_rate: int = SAMPLE_RATE,
    threshold: float = APERIODICITY_THRESHOLD,
) -> PitchContour:
    """Track F0 over mono PCM (16-bit bytes or float array in [-1, 1])."""
    if isinstance(pcm, (bytes, bytearray)):
        samples = np.frombuffer(pcm, dtype="<i2").astype(np.float64) / 32768.0
    else:
        samples = np.asarray(pcm, dtype=np.float64)
    if len(samples) < int(0.1 * sample_rate):
        raise PitchError("audio shorter than 100 ms")
    if not 0 < f_min_hz < f_max_hz:
        raise PitchError(f"invalid pitch range [{f_min_hz}, {f_max_hz}]")

    # Zero-phase low-pass above the pitch band: high harmonics and breath
    # noise only blur the difference-function dip.
    samples = _lowpass(samples, cutoff_hz=2.2 * f_max_hz, sample_rate=sample_rate)

    window = int(round(window_s * sample_rate))
    hop = int(round(frame_hop_s * sample_rate))
    tau_min = max(2, int(sample_rate / f_max_hz))
    tau_max = int(np.ceil(sample_rate / f_min_hz))
    block = window + tau_max

    if len(samples) < block:
        # Short clips still get one frame by zero-padding the tail.
        samples = np.pad(samples, (0, block - len(samples)))
    n_frames = (len(samples) - block) // hop + 1

    frames = np.lib.stride_tricks.sliding_window_view(samples, block)[::hop][:n_frames]
    cmndf = _batched_cmndf(frames, window, tau_max)

    f0_hz = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    rms = np.sqrt(np.mean(frames[:, :window] ** 2, axis=1))

    region = cmndf[:, tau_min : tau_max + 1]
    below = region < threshold
    has_dip = below.any(axis=1)
    first_dip = np.argmax(below, axis=1)
    best_global = np.argmin(region, axis=1)

    for i in range(n_frames):
        if rms[i] < _SILENCE_RMS:
            continue
        tau = (first_dip[i] if has_dip[i] else best_global[i]) + tau_min
        row = cmndf[i]
        while tau + 1 <= tau_max and row[tau + 1] < row[tau]:
            tau += 1
        if row[tau] >= threshold:
            continue
        f0 = sample_rate / _parabolic_refine(row, tau)
        f0_hz[i] = min(max(f0, f_min_hz), f_max_hz)
        voiced[i] = True

    return PitchContour(
        frame_hop_s=frame_hop_s,
        f0_hz=tuple(f0_hz.tolist()),
        voiced=tuple(voiced.tolist()),
        f_min_hz=f_min_hz,
        f_max_hz=f_max_hz,
    )


def _batched_cmndf(frames: np.ndarray, window: int, tau_max: int) -> np.ndarray:
    """CMNDF rows for every frame; frames have window + tau_max samples."""
    n_frames, block = frames.shape
    fft_len = 1 << int(np.ceil(np.log2(block + window)))

    spectrum_block = np.fft.rfft(frames, fft_len)
    spectrum_win = np.fft.rfft(frames[:, :window], fft_len)
    corr = np.fft.irfft(spectrum_block * np.conj(spectrum_win), fft_len)[:, : tau_max + 1]

    squares = np.concatenate(
        (np.zeros((n_frames, 1)), np.cumsum(frames**2, axis=1)), axis=1
    )
    r0 = squares[:, window] - squares[:, 0]
    r_tau = squares[:, window : window + tau_max + 1] - squares[:, : tau_max + 1]

    diff = np.maximum(r0[:, None] + r_tau - 2.0 * corr, 0.0)
    diff[:, 0] = 0.0

    cumulative = np.cumsum(diff, axis=1)
    taus = np.arange(tau_max + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        cmndf = np.where(cumulative > 0.0, diff * taus / cumulative, 1.0)
    cmndf[:, 0] = 1.0
    return cmndf


def _lowpass(samples: np.ndarray, cutoff_hz: float, sample_rate: int) -> np.ndarray:
    """FFT brick-wall low-pass with a raised-cosine edge (zero phase)."""
    nyquist = sample_rate / 2.0
    if cutoff_hz >= nyquist:
        return samples
    spectrum = np.fft.rfft(samples)
    freqs = np.fft.rfftfreq(len(samples), 1.0 / sample_rate)
    edge_hz = 150.0
    gain = np.clip((cutoff_hz + edge_hz - freqs) / (2.0 * edge_hz), 0.0, 1.0)
    gain = 0.5 - 0.5 * np.cos(np.pi * gain)
    return np.fft.irfft(spectrum * gain, len(samples))


def _parabolic_refine(row: np.ndarray, tau: int) -> float:
    if tau <= 0 or tau + 1 >= len(row):
        return float(tau)
    left, mid, right = row[tau - 1], row[tau], row[tau + 1]
    denom = left - 2.0 * mid + right
    if denom <= 0:
        return float(tau)
    shift = 0.5 * (left - right) / denom
    return float(tau) + float(np.clip(shift, -1.0, 1.0))
