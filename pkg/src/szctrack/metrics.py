"""Acoustic contrast and signal-distortion metrics, time and frequency domain.

All four quantities are mic-count-normalized energy ratios in dB, clamped to
+-200 dB with a 1e-300 denominator floor so outputs stay finite.  Frequency
domain metrics use one unwindowed FFT of the entire reproduced signal; the
reported bins span (0, f_s/2] (DC excluded).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DB_CLAMP = 200.0
POWER_FLOOR = 1e-300


@dataclass(frozen=True)
class MetricsSeries:
    """Per-frame TD traces and per-bin FD spectra for one scheme."""

    td_ac_db: np.ndarray  # (T,)
    td_nsdp_db: np.ndarray  # (T,)
    fd_freqs_hz: np.ndarray  # (B,)
    fd_ac_db: np.ndarray  # (B,)
    fd_nsdp_db: np.ndarray  # (B,)

    def __post_init__(self):
        for name in ("td_ac_db", "td_nsdp_db", "fd_freqs_hz", "fd_ac_db", "fd_nsdp_db"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)
        freqs = self.fd_freqs_hz
        if freqs.size and np.any(np.diff(freqs) <= 0):
            raise ValueError("frequency axis must be strictly increasing")


def _db_ratio(numerator: float, denominator: float) -> float:
    denominator = max(float(denominator), POWER_FLOOR)
    if numerator <= 0.0:
        return -DB_CLAMP
    return float(np.clip(10.0 * np.log10(numerator / denominator), -DB_CLAMP, DB_CLAMP))


def td_ac(bright_frames: np.ndarray, dark_frames: np.ndarray) -> float:
    """Per-frame acoustic contrast in dB, mic-count normalized."""
    bright_frames = np.atleast_2d(np.asarray(bright_frames, dtype=np.float64))
    dark_frames = np.atleast_2d(np.asarray(dark_frames, dtype=np.float64))
    if bright_frames.shape[1] != dark_frames.shape[1]:
        raise ValueError("bright and dark frames must share the frame length")
    num_bright = bright_frames.shape[0]
    num_dark = dark_frames.shape[0]
    return _db_ratio(
        num_dark * float(np.sum(bright_frames**2)),
        num_bright * float(np.sum(dark_frames**2)),
    )


def td_nsdp(bright_frames: np.ndarray, desired_frames: np.ndarray) -> float:
    """Per-frame normalized signal distortion power in dB."""
    bright_frames = np.atleast_2d(np.asarray(bright_frames, dtype=np.float64))
    desired_frames = np.atleast_2d(np.asarray(desired_frames, dtype=np.float64))
    if bright_frames.shape != desired_frames.shape:
        raise ValueError("bright and desired frames must have equal shapes")
    return _db_ratio(
        float(np.sum((bright_frames - desired_frames) ** 2)),
        float(np.sum(desired_frames**2)),
    )


def next_pow2(n: int) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    return 1 << (n - 1).bit_length()


def _spectra(signals: np.ndarray, fft_size: int) -> np.ndarray:
    """Power per rfft bin summed over mics, DC bin dropped: shape (fft_size//2,)."""
    spec = np.fft.rfft(np.atleast_2d(signals), n=fft_size, axis=1)
    power = np.sum(np.abs(spec) ** 2, axis=0)
    return power[1 : fft_size // 2 + 1]


def _fd_bins(num_samples: int, sample_rate_hz: int, fft_size: int | None) -> tuple[int, np.ndarray]:
    nfft = next_pow2(num_samples) if fft_size is None else fft_size
    if nfft < num_samples:
        raise ValueError("fft size must cover the signal length")
    freqs = np.arange(1, nfft // 2 + 1) * (sample_rate_hz / nfft)
    return nfft, freqs


def fd_ac(bright_signals: np.ndarray, dark_signals: np.ndarray, sample_rate_hz: int,
          fft_size: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-bin acoustic contrast over whole signals: (freqs_hz, values_db)."""
    bright_signals = np.atleast_2d(np.asarray(bright_signals, dtype=np.float64))
    dark_signals = np.atleast_2d(np.asarray(dark_signals, dtype=np.float64))
    if bright_signals.shape[1] != dark_signals.shape[1]:
        raise ValueError("bright and dark signals must share the signal length")
    nfft, freqs = _fd_bins(bright_signals.shape[1], sample_rate_hz, fft_size)
    num_bright = bright_signals.shape[0]
    num_dark = dark_signals.shape[0]
    bright_power = _spectra(bright_signals, nfft)
    dark_power = _spectra(dark_signals, nfft)
    values = np.array([
        _db_ratio(num_dark * nb, num_bright * nd)
        for nb, nd in zip(bright_power, dark_power)
    ])
    return freqs, values


def fd_nsdp(bright_signals: np.ndarray, desired_signals: np.ndarray, sample_rate_hz: int,
            fft_size: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-bin normalized signal distortion over whole signals."""
    bright_signals = np.atleast_2d(np.asarray(bright_signals, dtype=np.float64))
    desired_signals = np.atleast_2d(np.asarray(desired_signals, dtype=np.float64))
    if bright_signals.shape != desired_signals.shape:
        raise ValueError("bright and desired signals must have equal shapes")
    nfft, freqs = _fd_bins(bright_signals.shape[1], sample_rate_hz, fft_size)
    error_power = _spectra(bright_signals - desired_signals, nfft)
    desired_power = _spectra(desired_signals, nfft)
    values = np.array([
        _db_ratio(ne, nd) for ne, nd in zip(error_power, desired_power)
    ])
    return freqs, values
