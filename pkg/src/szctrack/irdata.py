"""Impulse-response dataset model and bit-exact on-disk persistence.

An :class:`IrSet` holds one impulse response per (listener position,
microphone group, microphone, loudspeaker) quadruple.  Positions are dense
integer ids in ``[0, S)``; the three microphone groups are ``bright``,
``dark`` and ``observation``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

GROUPS = ("bright", "dark", "observation")
SCHEMA_VERSION = 1

MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class Manifest:
    """Shape and geometry metadata for an IR set."""

    sample_rate_hz: int
    ir_length: int
    num_loudspeakers: int
    mic_counts: dict[str, int]
    grid: np.ndarray  # (S, 3) listener positions in meters
    source_ids: tuple[int, ...] = ()
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        if grid.ndim != 2 or grid.shape[1] != 3 or grid.shape[0] < 1:
            raise ValueError(f"grid must be (S, 3) with S >= 1, got {grid.shape}")
        object.__setattr__(self, "grid", grid)
        if not self.source_ids:
            object.__setattr__(self, "source_ids", tuple(range(grid.shape[0])))
        if len(self.source_ids) != grid.shape[0]:
            raise ValueError("source_ids length does not match grid")
        if len(set(self.source_ids)) != len(self.source_ids):
            raise ValueError("source_ids must be unique")
        if self.sample_rate_hz < 1 or self.ir_length < 1 or self.num_loudspeakers < 1:
            raise ValueError("sample rate, IR length and loudspeaker count must be >= 1")
        for g in GROUPS:
            if self.mic_counts.get(g, 0) < 1:
                raise ValueError(f"mic count for group '{g}' must be >= 1")
        if len({tuple(row) for row in grid}) != grid.shape[0]:
            raise ValueError("grid positions must be distinct")

    @property
    def num_positions(self) -> int:
        return self.grid.shape[0]

    def samples_per_position(self) -> int:
        mics = sum(self.mic_counts[g] for g in GROUPS)
        return mics * self.num_loudspeakers * self.ir_length


@dataclass(frozen=True)
class IrSet:
    """Immutable IR dataset; arrays are (S, M_group, L, K) per group."""

    bright: np.ndarray
    dark: np.ndarray
    observation: np.ndarray
    manifest: Manifest

    def __post_init__(self):
        m = self.manifest
        for name in GROUPS:
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            expected = (m.num_positions, m.mic_counts[name], m.num_loudspeakers, m.ir_length)
            if arr.shape != expected:
                raise ValueError(f"{name} array has shape {arr.shape}, expected {expected}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} array contains non-finite samples")
            object.__setattr__(self, name, arr)

    def group(self, name: str) -> np.ndarray:
        if name not in GROUPS:
            raise ValueError(f"unknown microphone group '{name}'")
        return getattr(self, name)

    def irs(self, position: int, group: str) -> np.ndarray:
        """(M, L, K) view for one position and group."""
        self.check_position(position)
        return self.group(group)[position]

    def check_position(self, position: int) -> None:
        if not 0 <= position < self.manifest.num_positions:
            raise ValueError(
                f"position {position} out of range [0, {self.manifest.num_positions})"
            )

    @property
    def num_positions(self) -> int:
        return self.manifest.num_positions


def _position_file(index: int) -> str:
    return f"pos_{index}.f64"


def _manifest_to_json(m: Manifest) -> dict:
    return {
        "schema_version": m.schema_version,
        "sample_rate_hz": m.sample_rate_hz,
        "ir_length_K": m.ir_length,
        "num_loudspeakers": m.num_loudspeakers,
        "mics": {g: m.mic_counts[g] for g in GROUPS},
        "grid": [
            {"id": i, "x": float(p[0]), "y": float(p[1]), "z": float(p[2])}
            for i, p in enumerate(m.grid)
        ],
        "source_ids": list(m.source_ids),
    }


def _manifest_from_json(obj: dict) -> Manifest:
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unknown schema_version {version!r}")
    grid_entries = sorted(obj["grid"], key=lambda e: e["id"])
    if [e["id"] for e in grid_entries] != list(range(len(grid_entries))):
        raise ValueError("grid ids must be dense integers starting at 0")
    grid = np.array([[e["x"], e["y"], e["z"]] for e in grid_entries], dtype=np.float64)
    source_ids = tuple(obj.get("source_ids", range(len(grid_entries))))
    return Manifest(
        sample_rate_hz=int(obj["sample_rate_hz"]),
        ir_length=int(obj["ir_length_K"]),
        num_loudspeakers=int(obj["num_loudspeakers"]),
        mic_counts={g: int(obj["mics"][g]) for g in GROUPS},
        grid=grid,
        source_ids=source_ids,
    )


def save_irset(irset: IrSet, path: str | Path) -> None:
    """Write manifest.json plus one raw little-endian f64 file per position.

    Sample order within each position file is [group][mic][loudspeaker][sample]
    with groups in (bright, dark, observation) order; round-trip through
    :func:`load_irset` is bit-exact.
    """
    for g in GROUPS:
        if not np.all(np.isfinite(irset.group(g))):
            raise ValueError(f"{g} array contains non-finite samples")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / MANIFEST_FILE
    try:
        manifest_path.write_text(
            json.dumps(_manifest_to_json(irset.manifest), indent=2, sort_keys=True) + "\n"
        )
    except OSError as exc:
        raise OSError(f"failed to write {manifest_path}: {exc}") from exc
    for s in range(irset.num_positions):
        blob = np.concatenate([irset.group(g)[s].ravel() for g in GROUPS])
        target = out / _position_file(s)
        try:
            target.write_bytes(blob.astype("<f8").tobytes())
        except OSError as exc:
            raise OSError(f"failed to write {target}: {exc}") from exc


def load_irset(path: str | Path) -> IrSet:
    """Load an IR set saved by :func:`save_irset`; fails on any inconsistency."""
    root = Path(path)
    manifest_path = root / MANIFEST_FILE
    if not manifest_path.is_file():
        raise FileNotFoundError(f"missing manifest file {manifest_path}")
    manifest = _manifest_from_json(json.loads(manifest_path.read_text()))
    per_group: dict[str, list[np.ndarray]] = {g: [] for g in GROUPS}
    expected_bytes = manifest.samples_per_position() * 8
    for s in range(manifest.num_positions):
        target = root / _position_file(s)
        if not target.is_file():
            raise FileNotFoundError(f"missing position file {target}")
        raw = target.read_bytes()
        if len(raw) != expected_bytes:
            raise ValueError(
                f"size mismatch in {target}: got {len(raw)} bytes, expected {expected_bytes}"
            )
        flat = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        offset = 0
        for g in GROUPS:
            shape = (manifest.mic_counts[g], manifest.num_loudspeakers, manifest.ir_length)
            count = int(np.prod(shape))
            per_group[g].append(flat[offset : offset + count].reshape(shape))
            offset += count
    arrays = {g: np.stack(per_group[g], axis=0) for g in GROUPS}
    return IrSet(
        bright=arrays["bright"],
        dark=arrays["dark"],
        observation=arrays["observation"],
        manifest=manifest,
    )


def subset_positions(irset: IrSet, keep: list[int] | tuple[int, ...]) -> IrSet:
    """Restrict an IR set to the given positions, re-indexed densely.

    The original ids of the kept positions are retained in the returned
    manifest's ``source_ids`` so callers can map dense indices back.
    """
    keep = list(keep)
    if not keep:
        raise ValueError("keep list must be non-empty")
    if len(set(keep)) != len(keep):
        raise ValueError("keep list contains duplicates")
    for k in keep:
        irset.check_position(k)
    m = irset.manifest
    new_manifest = replace(
        m,
        grid=m.grid[keep].copy(),
        source_ids=tuple(m.source_ids[k] for k in keep),
    )
    return IrSet(
        bright=irset.bright[keep].copy(),
        dark=irset.dark[keep].copy(),
        observation=irset.observation[keep].copy(),
        manifest=new_manifest,
    )
