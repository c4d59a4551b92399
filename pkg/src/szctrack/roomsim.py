"""Shoebox image-source room simulator producing synthetic IR sets.

Image sources are enumerated on the mirror lattice: each axis contributes an
integer index whose absolute value is the number of reflections on that axis,
so an image with indices (kx, ky, kz) carries |kx|+|ky|+|kz| reflections in
total.  Amplitudes follow beta^reflections / (4 pi d) with per-wall
reflection coefficients, and arrivals are placed at fractional delay
d/c * f_s using linear interpolation across two adjacent samples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .irdata import GROUPS, IrSet, Manifest


@dataclass(frozen=True)
class RoomSpec:
    """Rectangular room with per-wall reflection coefficients.

    ``wall_reflection`` holds six values ordered (x_min, x_max, y_min, y_max,
    z_min, z_max), each in [0, 1).
    """

    dimensions: np.ndarray
    wall_reflection: np.ndarray
    max_image_order: int
    sample_rate_hz: int
    ir_length: int
    speed_of_sound: float = 343.0

    def __post_init__(self):
        dims = np.asarray(self.dimensions, dtype=np.float64)
        if dims.shape != (3,) or np.any(dims <= 0):
            raise ValueError("dimensions must be three positive lengths")
        beta = np.asarray(self.wall_reflection, dtype=np.float64)
        if beta.ndim == 0:
            beta = np.full(6, float(beta))
        if beta.shape != (6,) or np.any(beta < 0) or np.any(beta >= 1):
            raise ValueError("wall_reflection must be six values in [0, 1)")
        object.__setattr__(self, "dimensions", dims)
        object.__setattr__(self, "wall_reflection", beta)
        if self.max_image_order < 0:
            raise ValueError("max_image_order must be >= 0")
        if self.sample_rate_hz < 1 or self.ir_length < 1:
            raise ValueError("sample_rate_hz and ir_length must be >= 1")
        if self.speed_of_sound <= 0:
            raise ValueError("speed_of_sound must be positive")

    def contains(self, point: np.ndarray) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p > 0) and np.all(p < self.dimensions))


@dataclass(frozen=True)
class SceneGeometry:
    """Loudspeaker/microphone layout over a rectangular listener grid.

    Bright and observation microphones are given as offsets from the listener
    position and translate rigidly with it; dark-zone microphones are fixed
    points in the room.  Grid ids run x-fastest: id = iy * nx + ix.
    """

    loudspeakers: np.ndarray  # (L, 3)
    grid_origin: np.ndarray  # (3,)
    grid_spacing: float
    grid_shape: tuple[int, int]  # (nx, ny)
    bright_offsets: np.ndarray  # (M_B, 3)
    observation_offsets: np.ndarray  # (M_O, 3)
    dark_mics: np.ndarray  # (M_D, 3)

    def __post_init__(self):
        for name in ("loudspeakers", "bright_offsets", "observation_offsets", "dark_mics"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
                raise ValueError(f"{name} must be a non-empty (n, 3) array")
            object.__setattr__(self, name, arr)
        origin = np.asarray(self.grid_origin, dtype=np.float64)
        if origin.shape != (3,):
            raise ValueError("grid_origin must be a 3D point")
        object.__setattr__(self, "grid_origin", origin)
        nx, ny = self.grid_shape
        if nx < 1 or ny < 1:
            raise ValueError("grid_shape entries must be >= 1")
        if self.grid_spacing <= 0 and (nx > 1 or ny > 1):
            raise ValueError("grid_spacing must be positive for multi-point grids")

    def positions(self) -> np.ndarray:
        """(S, 3) listener grid positions, id = iy * nx + ix."""
        nx, ny = self.grid_shape
        pts = np.empty((nx * ny, 3))
        for iy in range(ny):
            for ix in range(nx):
                pts[iy * nx + ix] = self.grid_origin + np.array(
                    [ix * self.grid_spacing, iy * self.grid_spacing, 0.0]
                )
        return pts


def _axis_images(coord: float, length: float, order: int):
    """1D mirror lattice: (image coordinate, hits on min wall, hits on max wall)
    for every index k with |k| <= order; |k| is the reflection count."""
    out = []
    for k in range(-order, order + 1):
        r, p = divmod(k, 2)
        if p == 0:
            pos = coord + 2.0 * r * length
        else:
            pos = -coord - 2.0 * r * length
        out.append((abs(k), pos, abs(r + p), abs(r)))
    return out


def enumerate_images(room: RoomSpec, source: np.ndarray, max_order: int | None = None):
    """All image sources up to the reflection order.

    Returns (positions (n, 3), amplitudes (n,)) where amplitude is the product
    of wall reflection coefficients over the reflection path (1/(4 pi d) is
    applied later, per microphone).
    """
    order = room.max_image_order if max_order is None else max_order
    src = np.asarray(source, dtype=np.float64)
    beta = room.wall_reflection
    axes = [
        _axis_images(src[a], room.dimensions[a], order) for a in range(3)
    ]
    positions = []
    amplitudes = []
    for nx, px, lo_x, hi_x in axes[0]:
        for ny, py, lo_y, hi_y in axes[1]:
            if nx + ny > order:
                continue
            for nz, pz, lo_z, hi_z in axes[2]:
                if nx + ny + nz > order:
                    continue
                amp = (
                    beta[0] ** lo_x * beta[1] ** hi_x
                    * beta[2] ** lo_y * beta[3] ** hi_y
                    * beta[4] ** lo_z * beta[5] ** hi_z
                )
                positions.append((px, py, pz))
                amplitudes.append(amp)
    return np.array(positions), np.array(amplitudes)


def simulate_ir(room: RoomSpec, source: np.ndarray, mic: np.ndarray) -> np.ndarray:
    """Length-K impulse response between one source and one microphone.

    Each image contributes amplitude (product of wall betas)/(4 pi d) at the
    fractional sample delay d/c*f_s, linearly split across the two adjacent
    samples; images whose delay falls at or beyond K are dropped.
    """
    src = np.asarray(source, dtype=np.float64)
    pt = np.asarray(mic, dtype=np.float64)
    if not room.contains(src):
        raise ValueError(f"source {src.tolist()} lies outside the room")
    if not room.contains(pt):
        raise ValueError(f"microphone {pt.tolist()} lies outside the room")
    if np.array_equal(src, pt):
        raise ValueError("source and microphone coincide (singular 1/d)")
    positions, amplitudes = enumerate_images(room, src)
    k_len = room.ir_length
    scale = room.sample_rate_hz / room.speed_of_sound
    h = np.zeros(k_len)
    dists = np.linalg.norm(positions - pt[None, :], axis=1)
    for d, amp in zip(dists, amplitudes):
        delay = d * scale
        if delay >= k_len:
            continue
        gain = amp / (4.0 * np.pi * d)
        i0 = int(delay)
        frac = delay - i0
        h[i0] += gain * (1.0 - frac)
        if frac > 0.0 and i0 + 1 < k_len:
            h[i0 + 1] += gain * frac
    return h


def build_scene_irset(room: RoomSpec, geom: SceneGeometry) -> IrSet:
    """Simulate IRs for every (position, group, mic, loudspeaker) quadruple.

    Bright and observation microphone points translate with the listener
    position; dark points stay fixed.  Deterministic given its inputs.
    """
    positions = geom.positions()
    num_positions = positions.shape[0]
    num_lsp = geom.loudspeakers.shape[0]
    counts = {
        "bright": geom.bright_offsets.shape[0],
        "dark": geom.dark_mics.shape[0],
        "observation": geom.observation_offsets.shape[0],
    }
    arrays = {
        g: np.zeros((num_positions, counts[g], num_lsp, room.ir_length)) for g in GROUPS
    }
    for s, listener in enumerate(positions):
        mic_points = {
            "bright": listener[None, :] + geom.bright_offsets,
            "dark": geom.dark_mics,
            "observation": listener[None, :] + geom.observation_offsets,
        }
        for g in GROUPS:
            for m, mic in enumerate(mic_points[g]):
                for l, lsp in enumerate(geom.loudspeakers):
                    arrays[g][s, m, l] = simulate_ir(room, lsp, mic)
    manifest = Manifest(
        sample_rate_hz=room.sample_rate_hz,
        ir_length=room.ir_length,
        num_loudspeakers=num_lsp,
        mic_counts=counts,
        grid=positions,
    )
    return IrSet(
        bright=arrays["bright"],
        dark=arrays["dark"],
        observation=arrays["observation"],
        manifest=manifest,
    )


def save_scene(room: RoomSpec, geom: SceneGeometry, path: str | Path) -> None:
    obj = {
        "room": {
            "dimensions": room.dimensions.tolist(),
            "wall_reflection": room.wall_reflection.tolist(),
            "max_image_order": room.max_image_order,
            "sample_rate_hz": room.sample_rate_hz,
            "ir_length_K": room.ir_length,
            "speed_of_sound": room.speed_of_sound,
        },
        "geometry": {
            "loudspeakers": geom.loudspeakers.tolist(),
            "grid": {
                "origin": geom.grid_origin.tolist(),
                "spacing": geom.grid_spacing,
                "shape": list(geom.grid_shape),
            },
            "bright_mic_offsets": geom.bright_offsets.tolist(),
            "observation_mic_offsets": geom.observation_offsets.tolist(),
            "dark_mics": geom.dark_mics.tolist(),
        },
    }
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_scene(path: str | Path) -> tuple[RoomSpec, SceneGeometry]:
    """Read a scene.json file into (RoomSpec, SceneGeometry)."""
    obj = json.loads(Path(path).read_text())
    r = obj["room"]
    room = RoomSpec(
        dimensions=np.array(r["dimensions"], dtype=np.float64),
        wall_reflection=np.asarray(r["wall_reflection"], dtype=np.float64),
        max_image_order=int(r["max_image_order"]),
        sample_rate_hz=int(r["sample_rate_hz"]),
        ir_length=int(r["ir_length_K"]),
        speed_of_sound=float(r.get("speed_of_sound", 343.0)),
    )
    g = obj["geometry"]
    geom = SceneGeometry(
        loudspeakers=np.array(g["loudspeakers"], dtype=np.float64),
        grid_origin=np.array(g["grid"]["origin"], dtype=np.float64),
        grid_spacing=float(g["grid"]["spacing"]),
        grid_shape=tuple(int(v) for v in g["grid"]["shape"]),
        bright_offsets=np.array(g["bright_mic_offsets"], dtype=np.float64),
        observation_offsets=np.array(g["observation_mic_offsets"], dtype=np.float64),
        dark_mics=np.array(g["dark_mics"], dtype=np.float64),
    )
    return room, geom
