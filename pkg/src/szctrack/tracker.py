"""Audio-only listener tracking via normalized cosine similarity.

Each frame, the observed signals at the observation microphones are compared
with the per-position estimates; similarities are summed over microphones and
the argmax position's control filter is activated for the next frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filterdesign import FilterDictionary
from .runtime import FrameEngine


def default_silence_threshold(frame_length: int) -> float:
    # scaled with frame length so the guard tracks RMS rather than peak level
    return 1e-9 * np.sqrt(frame_length)


@dataclass(frozen=True)
class TrackerDecision:
    """One frame's similarity vector and the selected dictionary position."""

    frame_index: int
    similarities: np.ndarray  # (S,)
    selected: int
    held_previous: bool

    def __post_init__(self):
        sims = np.asarray(self.similarities, dtype=np.float64)
        if sims.ndim != 1 or sims.size < 1:
            raise ValueError("similarities must be a non-empty vector")
        if not np.all(np.isfinite(sims)):
            raise ValueError("similarities contain non-finite values")
        if not 0 <= self.selected < sims.size:
            raise ValueError("selected position out of range")
        object.__setattr__(self, "similarities", sims)


def ncs(observed: np.ndarray, estimated: np.ndarray, silence_threshold: float) -> float:
    """Normalized cosine similarity of two frames, 0 under the silence guard."""
    observed = np.asarray(observed, dtype=np.float64)
    estimated = np.asarray(estimated, dtype=np.float64)
    if observed.shape != estimated.shape:
        raise ValueError("frames must have equal length")
    norm_obs = np.linalg.norm(observed)
    norm_est = np.linalg.norm(estimated)
    if norm_obs < silence_threshold or norm_est < silence_threshold:
        return 0.0
    value = float(observed @ estimated / (norm_obs * norm_est))
    # rounding can push |value| a few ulp past 1
    return float(np.clip(value, -1.0, 1.0))


def total_similarity(observed: np.ndarray, estimates: np.ndarray,
                     silence_threshold: float) -> np.ndarray:
    """Per-position similarity: sum of per-mic NCS values, shape (S,)."""
    observed = np.asarray(observed, dtype=np.float64)
    estimates = np.asarray(estimates, dtype=np.float64)
    if estimates.ndim != 3 or estimates.shape[1:] != observed.shape:
        raise ValueError("estimates must be (S, M_O, N) matching the observed frames")
    num_pos, num_mics = estimates.shape[:2]
    out = np.zeros(num_pos)
    for s in range(num_pos):
        for m in range(num_mics):
            out[s] += ncs(observed[m], estimates[s, m], silence_threshold)
    return out


def select_position(similarities: np.ndarray, previous: int,
                    frame_index: int = 0) -> TrackerDecision:
    """Argmax position; ties go to the previous selection, then lowest index.

    When every similarity is exactly zero (silent frame), the previous
    position is held and the decision is flagged.
    """
    sims = np.asarray(similarities, dtype=np.float64)
    if sims.ndim != 1 or sims.size < 1:
        raise ValueError("similarity vector must be non-empty")
    if not 0 <= previous < sims.size:
        raise ValueError("previous position out of range")
    if np.all(sims == 0.0):
        return TrackerDecision(frame_index, sims, previous, held_previous=True)
    best = sims.max()
    ties = np.flatnonzero(sims == best)
    selected = int(previous) if previous in ties else int(ties[0])
    return TrackerDecision(frame_index, sims, selected, held_previous=False)


def update_filters(decision: TrackerDecision, dictionary: FilterDictionary,
                   engine: FrameEngine) -> None:
    """Activate the selected position's filters for the next frame."""
    if not 0 <= decision.selected < len(dictionary):
        raise ValueError(
            f"dictionary has no entry for position {decision.selected}"
        )
    engine.set_active_filter(dictionary[decision.selected])
