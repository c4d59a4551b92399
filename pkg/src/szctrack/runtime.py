"""Frame-based deployment engine with overlap-add buffering.

The engine consumes non-overlapping input frames of length N, filters them
through the active control filter bank, propagates the loudspeaker frames
through the true-position IRs, and maintains one independent overlap-add
buffer per dictionary position for the estimated observation frames.

Tails are never discarded on a filter or position switch: the tail computed
under the previous filter/position is still added to the next frame (it has
already "left the loudspeakers").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filterdesign import ControlFilterSet
from .irdata import IrSet


def num_frames(num_samples: int, frame_length: int) -> int:
    """Frames needed to cover a signal, final partial frame zero-padded."""
    if frame_length < 1:
        raise ValueError("frame_length must be >= 1")
    return max(1, -(-num_samples // frame_length))


def frame_input(signal: np.ndarray, index: int, frame_length: int) -> np.ndarray:
    """The index-th non-overlapping frame; short reads are zero-padded."""
    if index < 0:
        raise ValueError("frame index must be non-negative")
    signal = np.asarray(signal, dtype=np.float64)
    start = index * frame_length
    chunk = signal[start : start + frame_length]
    if chunk.size == frame_length:
        return chunk.copy()
    out = np.zeros(frame_length)
    out[: chunk.size] = chunk
    return out


@dataclass
class FrameOutputs:
    """All per-frame signals produced by one engine step."""

    loudspeakers: np.ndarray  # (L, N)
    bright: np.ndarray  # (M_B, N)
    dark: np.ndarray  # (M_D, N)
    observation: np.ndarray  # (M_O, N)
    desired: np.ndarray  # (M_B, N)
    estimates: np.ndarray | None = None  # (S, M_O, N)


def _propagate(irs: np.ndarray, frames: np.ndarray, tails: np.ndarray) -> np.ndarray:
    """Overlap-add propagation of (L, N) frames through (M, L, K) IRs.

    ``tails`` (M, K-1) is updated in place.  This single helper is the
    arithmetic path for true propagation, observation estimation and the
    desired signal, so matching inputs produce bit-identical outputs.
    """
    num_mics, num_lsp, k_len = irs.shape
    n = frames.shape[1]
    out = np.empty((num_mics, n))
    for m in range(num_mics):
        acc = np.zeros(n + k_len - 1)
        for l in range(num_lsp):
            acc += np.convolve(irs[m, l], frames[l])
        frame = acc[:n].copy()
        frame[: k_len - 1] += tails[m]
        tails[m] = acc[n:]
        out[m] = frame
    return out


class FrameEngine:
    """Per-frame SZC deployment over a true IR set.

    Parameters
    ----------
    true_irset:
        IR set used for the physical propagation; may cover more positions
        than the dictionary.
    control:
        Initial active control filter bank.
    frame_length:
        Non-overlapping frame size N; requires K <= N+1 and J <= N+1 so every
        tail fits within one frame.
    dictionary_observation_irs:
        Optional (S, M_O, L, K) observation-IR dictionary enabling
        :meth:`estimate_observations`.
    """

    def __init__(self, true_irset: IrSet, control: ControlFilterSet, frame_length: int,
                 dictionary_observation_irs: np.ndarray | None = None,
                 reference_loudspeaker: int = 0, modeling_delay: int = 0):
        manifest = true_irset.manifest
        k_len = manifest.ir_length
        num_lsp, filt_len = control.filters.shape
        if num_lsp != manifest.num_loudspeakers:
            raise ValueError("control filter loudspeaker count does not match the IR set")
        if k_len > frame_length + 1:
            raise ValueError(
                f"IR length {k_len} violates K <= N+1 for frame length {frame_length}"
            )
        if filt_len > frame_length + 1:
            raise ValueError(
                f"filter length {filt_len} violates J <= N+1 for frame length {frame_length}"
            )
        if not 0 <= reference_loudspeaker < num_lsp:
            raise ValueError("reference loudspeaker index out of range")
        if not 0 <= modeling_delay < frame_length:
            raise ValueError("modeling delay must lie in [0, N)")
        self.true_irset = true_irset
        self.frame_length = frame_length
        self.frame_index = 0
        self.reference_loudspeaker = reference_loudspeaker
        self.modeling_delay = modeling_delay
        self._active = control
        self._filter_tails = np.zeros((num_lsp, filt_len - 1))
        self._true_tails = {
            g: np.zeros((manifest.mic_counts[g], k_len - 1))
            for g in ("bright", "dark", "observation")
        }
        self._desired_tails = np.zeros((manifest.mic_counts["bright"], k_len - 1))
        self._desired_delay_line = np.zeros(modeling_delay)
        if dictionary_observation_irs is not None:
            obs = np.asarray(dictionary_observation_irs, dtype=np.float64)
            if obs.ndim != 4 or obs.shape[2] != num_lsp or obs.shape[3] != k_len:
                raise ValueError("dictionary observation IRs must be (S, M_O, L, K)")
            self._dict_obs = obs
            self._estimate_tails = np.zeros((obs.shape[0], obs.shape[1], k_len - 1))
        else:
            self._dict_obs = None
            self._estimate_tails = None

    @property
    def active_filter(self) -> ControlFilterSet:
        return self._active

    def set_active_filter(self, control: ControlFilterSet) -> None:
        """Switch the control filters; existing tails stay (stale-tail rule)."""
        if control.filters.shape != self._active.filters.shape:
            raise ValueError("replacement filter bank must share (L, J)")
        self._active = control

    @property
    def num_dictionary_positions(self) -> int:
        return 0 if self._dict_obs is None else self._dict_obs.shape[0]

    def apply_filters(self, x_frame: np.ndarray) -> np.ndarray:
        """Loudspeaker frames: q_l * x with the previous frame's tail added."""
        n = self.frame_length
        x_frame = np.asarray(x_frame, dtype=np.float64)
        if x_frame.shape != (n,):
            raise ValueError(f"input frame must have length {n}")
        q = self._active.filters
        num_lsp, filt_len = q.shape
        out = np.empty((num_lsp, n))
        for l in range(num_lsp):
            full = np.convolve(q[l], x_frame)
            frame = full[:n].copy()
            frame[: filt_len - 1] += self._filter_tails[l]
            self._filter_tails[l] = full[n:]
            out[l] = frame
        return out

    def propagate_true(self, lsp_frames: np.ndarray, true_position: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """True pressures (bright, dark, observation) at one listener position.

        The position may change only at frame boundaries; tails from the
        previous position are still added.
        """
        self.true_irset.check_position(true_position)
        res = []
        for g in ("bright", "dark", "observation"):
            res.append(_propagate(self.true_irset.irs(true_position, g), lsp_frames,
                                  self._true_tails[g]))
        return res[0], res[1], res[2]

    def estimate_observations(self, lsp_frames: np.ndarray) -> np.ndarray:
        """Estimated observation frames (S, M_O, N), one buffer per position."""
        if self._dict_obs is None:
            raise ValueError("engine was built without a dictionary of observation IRs")
        num_pos, num_mics = self._dict_obs.shape[:2]
        out = np.empty((num_pos, num_mics, self.frame_length))
        for s in range(num_pos):
            out[s] = _propagate(self._dict_obs[s], lsp_frames, self._estimate_tails[s])
        return out

    def desired_frames(self, x_frame: np.ndarray, true_position: int) -> np.ndarray:
        """Bright-zone target: reference loudspeaker alone, input delayed."""
        n = self.frame_length
        x_frame = np.asarray(x_frame, dtype=np.float64)
        if x_frame.shape != (n,):
            raise ValueError(f"input frame must have length {n}")
        self.true_irset.check_position(true_position)
        delay = self.modeling_delay
        if delay > 0:
            delayed = np.concatenate([self._desired_delay_line, x_frame[: n - delay]])
            self._desired_delay_line = x_frame[n - delay :].copy()
        else:
            delayed = x_frame
        ref_irs = self.true_irset.irs(true_position, "bright")[:, self.reference_loudspeaker, :]
        return _propagate(ref_irs[:, None, :], delayed[None, :], self._desired_tails)

    def process(self, x_frame: np.ndarray, true_position: int,
                with_estimates: bool = False) -> FrameOutputs:
        """Run one full frame through the engine and advance the frame index."""
        lsp = self.apply_filters(x_frame)
        bright, dark, observation = self.propagate_true(lsp, true_position)
        desired = self.desired_frames(x_frame, true_position)
        estimates = self.estimate_observations(lsp) if with_estimates else None
        self.frame_index += 1
        return FrameOutputs(
            loudspeakers=lsp,
            bright=bright,
            dark=dark,
            observation=observation,
            desired=desired,
            estimates=estimates,
        )
