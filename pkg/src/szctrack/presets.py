"""Built-in scenes and configurations.

The "desk" instance is the small canonical fixture used across the test
suite: a 4 x 5 x 3 m room, uniform wall reflection 0.5, image order 2,
8 kHz sampling, 256-sample IRs, 3 loudspeakers, 2 mics per group and a
3 x 3 listener grid at 0.1 m spacing.  The "paper" preset carries the
full-scale dimensions (12 loudspeakers, 48 kHz, 4000-sample IRs, 5 x 3
grid) and is intentionally too heavy for CI.
"""

from __future__ import annotations

import numpy as np

from .roomsim import RoomSpec, SceneGeometry

SCENE_PRESETS = ("desk", "paper")


def desk_scene() -> tuple[RoomSpec, SceneGeometry]:
    room = RoomSpec(
        dimensions=np.array([4.0, 5.0, 3.0]),
        wall_reflection=np.full(6, 0.5),
        max_image_order=2,
        sample_rate_hz=8000,
        ir_length=256,
    )
    geom = SceneGeometry(
        loudspeakers=np.array([
            [1.5, 1.0, 1.2],
            [2.0, 1.0, 1.2],
            [2.5, 1.0, 1.2],
        ]),
        grid_origin=np.array([1.9, 2.5, 1.1]),
        grid_spacing=0.1,
        grid_shape=(3, 3),
        bright_offsets=np.array([
            [0.15, 0.00, 0.15],
            [0.15, 0.10, 0.15],
        ]),
        observation_offsets=np.array([
            [-0.05, 0.35, 0.30],
            [0.05, 0.35, 0.30],
        ]),
        dark_mics=np.array([
            [3.2, 2.6, 1.0],
            [3.2, 2.7, 1.0],
        ]),
    )
    return room, geom


def paper_scene() -> tuple[RoomSpec, SceneGeometry]:
    room = RoomSpec(
        dimensions=np.array([8.0, 7.5, 3.0]),
        wall_reflection=np.full(6, 0.6),
        max_image_order=6,
        sample_rate_hz=48000,
        ir_length=4000,
    )
    # 10-speaker line array plus 2 elevated rear speakers; 10 bright mics in
    # a grid beside the listener, 12 fixed dark mics off to the side, 4
    # observation mics behind the listener.
    line = np.array([[2.0 + 0.1 * i, 1.5, 1.21] for i in range(10)])
    rear = np.array([[2.22, 4.2, 1.6], [2.68, 4.2, 1.6]])
    bright = np.array([
        [0.20 + 0.05 * (i % 5), 0.05 * (i // 5), 0.19] for i in range(10)
    ])
    obs = np.array([
        [-0.075, 0.55, 0.45],
        [0.075, 0.55, 0.45],
        [-0.075, 0.55, 0.56],
        [0.075, 0.55, 0.56],
    ])
    dark = np.array([
        [4.5 + 0.1 * (i % 4), 3.0 + 0.1 * (i // 4), 1.02] for i in range(12)
    ])
    geom = SceneGeometry(
        loudspeakers=np.vstack([line, rear]),
        grid_origin=np.array([2.25, 3.3, 1.1]),
        grid_spacing=0.1,
        grid_shape=(5, 3),
        bright_offsets=bright,
        observation_offsets=obs,
        dark_mics=dark,
    )
    return room, geom


def get_scene(name: str) -> tuple[RoomSpec, SceneGeometry]:
    if name == "desk":
        return desk_scene()
    if name == "paper":
        return paper_scene()
    raise ValueError(f"unknown scene preset '{name}' (expected one of {SCENE_PRESETS})")


def checkerboard_subset(grid_shape: tuple[int, int]) -> tuple[int, ...]:
    """Alternating grid positions (even ix+iy): 5 of a 3x3 grid, 8 of a 5x3."""
    nx, ny = grid_shape
    return tuple(
        iy * nx + ix for iy in range(ny) for ix in range(nx) if (ix + iy) % 2 == 0
    )


def desk_trajectory_positions() -> tuple[int, ...]:
    """Default 4-stop trajectory on the 3x3 desk grid."""
    return (0, 8, 4, 6)


def paper_trajectory_positions() -> tuple[int, ...]:
    """4-stop trajectory on the 5x3 grid, starting at grid point (2, 1)."""
    return (7, 3, 12, 9)
