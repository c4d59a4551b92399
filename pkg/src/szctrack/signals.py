"""Input signal generation and raw f64 mono file I/O."""

from __future__ import annotations

from pathlib import Path

import numpy as np

INPUT_KINDS = ("noise", "sweep", "file")


def white_noise(num_samples: int, seed) -> np.ndarray:
    """Unit-variance Gaussian noise from a seeded generator."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal(num_samples)


def log_sweep(num_samples: int, sample_rate_hz: int, start_hz: float = 20.0,
              stop_hz: float | None = None) -> np.ndarray:
    """Exponential sine sweep from start_hz up to just below Nyquist."""
    if stop_hz is None:
        stop_hz = 0.45 * sample_rate_hz
    if not 0 < start_hz < stop_hz <= sample_rate_hz / 2:
        raise ValueError("sweep frequencies must satisfy 0 < start < stop <= f_s/2")
    t = np.arange(num_samples) / sample_rate_hz
    duration = num_samples / sample_rate_hz
    rate = np.log(stop_hz / start_hz)
    phase = 2.0 * np.pi * start_hz * duration / rate * (np.exp(t * rate / duration) - 1.0)
    return np.sin(phase)


def load_raw_signal(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) % 8 != 0:
        raise ValueError(f"{path}: raw f64 file length must be a multiple of 8 bytes")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def save_raw_signal(signal: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(np.asarray(signal, dtype=np.float64).astype("<f8").tobytes())


def make_input(kind: str, num_samples: int, sample_rate_hz: int, seed,
               path: str | Path | None = None) -> np.ndarray:
    """Build the run input signal, truncated/zero-padded to num_samples."""
    if kind == "noise":
        return white_noise(num_samples, seed)
    if kind == "sweep":
        return log_sweep(num_samples, sample_rate_hz)
    if kind == "file":
        if path is None:
            raise ValueError("input kind 'file' requires a path")
        signal = load_raw_signal(path)
        out = np.zeros(num_samples)
        out[: min(num_samples, signal.size)] = signal[:num_samples]
        return out
    raise ValueError(f"unknown input kind '{kind}' (expected one of {INPUT_KINDS})")
