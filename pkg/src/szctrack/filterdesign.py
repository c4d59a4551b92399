"""Control-filter design: zone covariances, ACC, PM and mix-data filters.

All designs operate on the stacked filter vector of length L*J (loudspeaker
major: filter taps of loudspeaker 0 first).  Zone covariances are assembled
as H^T H with H the horizontal stack of per-loudspeaker convolution
matrices, summed over the zone's microphones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .irdata import IrSet

DICT_MANIFEST_FILE = "dict_manifest.json"
DICT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ConvolutionMatrix:
    """Implicit Toeplitz operator mapping a length-J filter to h * q."""

    ir: np.ndarray
    filter_length: int

    def __post_init__(self):
        ir = np.asarray(self.ir, dtype=np.float64)
        if ir.ndim != 1 or ir.size < 1:
            raise ValueError("ir must be a non-empty 1D array")
        if self.filter_length < 1:
            raise ValueError("filter_length must be >= 1")
        object.__setattr__(self, "ir", ir)

    @property
    def output_length(self) -> int:
        return self.ir.size + self.filter_length - 1

    def apply(self, taps: np.ndarray) -> np.ndarray:
        taps = np.asarray(taps, dtype=np.float64)
        if taps.shape != (self.filter_length,):
            raise ValueError(f"filter must have length {self.filter_length}")
        return np.convolve(self.ir, taps)

    def toarray(self) -> np.ndarray:
        """Dense (K+J-1, J) matrix; column c is the IR shifted down c samples."""
        out = np.zeros((self.output_length, self.filter_length))
        for c in range(self.filter_length):
            out[c : c + self.ir.size, c] = self.ir
        return out


@dataclass(frozen=True)
class ZoneCovariance:
    """Symmetric PSD L*J x L*J spatial covariance for one zone."""

    matrix: np.ndarray
    zone: str
    position: int | None

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("covariance matrix must be square")
        scale = max(np.abs(mat).max(), 1.0)
        if np.abs(mat - mat.T).max() > 1e-12 * scale:
            raise ValueError("covariance matrix is not symmetric")
        object.__setattr__(self, "matrix", mat)


@dataclass(frozen=True)
class DesiredPressure:
    """Per-bright-mic target pressure vectors of length K+J-1."""

    targets: np.ndarray  # (M_B, K+J-1)
    reference_loudspeaker: int
    delay: int

    def energy(self) -> float:
        return float(np.sum(self.targets**2))


@dataclass(frozen=True)
class ControlFilterSet:
    """One bank of L control filters of length J plus its design metadata.

    ``position`` is a dense grid index, or the string ``"mix"`` for filters
    designed on position-averaged statistics.
    """

    filters: np.ndarray  # (L, J)
    method: str  # "acc" | "pm"
    position: int | str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.filters, dtype=np.float64)
        if f.ndim != 2:
            raise ValueError("filters must be a (L, J) array")
        if not np.all(np.isfinite(f)):
            raise ValueError("filters contain non-finite coefficients")
        object.__setattr__(self, "filters", f)
        if self.method not in ("acc", "pm"):
            raise ValueError(f"unknown design method '{self.method}'")

    @property
    def stacked(self) -> np.ndarray:
        return self.filters.ravel()

    @classmethod
    def from_stacked(cls, q: np.ndarray, num_loudspeakers: int, method: str,
                     position: int | str, params: dict | None = None) -> "ControlFilterSet":
        q = np.asarray(q, dtype=np.float64)
        if q.size % num_loudspeakers != 0:
            raise ValueError("stacked length is not a multiple of the loudspeaker count")
        return cls(q.reshape(num_loudspeakers, -1), method, position, params or {})


@dataclass(frozen=True)
class FilterDictionary:
    """Complete per-position bank of control filter sets."""

    entries: tuple[ControlFilterSet, ...]
    method: str
    source_ids: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.entries:
            raise ValueError("dictionary must contain at least one entry")
        shape = self.entries[0].filters.shape
        for e in self.entries:
            if e.filters.shape != shape:
                raise ValueError("all dictionary entries must share (L, J)")
        if not self.source_ids:
            object.__setattr__(self, "source_ids", tuple(range(len(self.entries))))
        if len(self.source_ids) != len(self.entries):
            raise ValueError("source_ids length must match entries")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, position: int) -> ControlFilterSet:
        return self.entries[position]

    @property
    def filter_shape(self) -> tuple[int, int]:
        return self.entries[0].filters.shape


def build_conv_matrix(ir: np.ndarray, filter_length: int) -> ConvolutionMatrix:
    return ConvolutionMatrix(ir=ir, filter_length=filter_length)


def _gram_blocks(irs: np.ndarray, filter_length: int) -> np.ndarray:
    """Sum over mics of H^T H for one position's (M, L, K) IRs.

    Block (a, b) of H^T H is Toeplitz in the lag i-j of the cross-correlation
    g_ab(t) = sum_k h_a[k] h_b[k+t]; blocks are assembled from correlations
    summed over microphones and mirrored so the result is exactly symmetric.
    """
    num_mics, num_lsp, k_len = irs.shape
    j_len = filter_length
    out = np.zeros((num_lsp * j_len, num_lsp * j_len))
    for a in range(num_lsp):
        for b in range(a, num_lsp):
            xc = np.zeros(2 * k_len - 1)
            for m in range(num_mics):
                # full correlation: index K-1+t holds g_ab(t)
                xc += np.correlate(irs[m, b], irs[m, a], mode="full")
            col = xc[k_len - 1 : k_len - 1 + j_len]
            if a == b:
                # autocorrelation is even; reuse the column for exact symmetry
                block = scipy.linalg.toeplitz(col, col)
            else:
                row = xc[k_len - j_len : k_len][::-1]
                block = scipy.linalg.toeplitz(col, row)
            out[a * j_len : (a + 1) * j_len, b * j_len : (b + 1) * j_len] = block
            if a != b:
                out[b * j_len : (b + 1) * j_len, a * j_len : (a + 1) * j_len] = block.T
    return out


def zone_covariance(irset: IrSet, position: int, group: str, filter_length: int) -> ZoneCovariance:
    """Spatial covariance H^T H summed over one zone's microphones."""
    if group not in ("bright", "dark"):
        raise ValueError(f"covariance group must be 'bright' or 'dark', got '{group}'")
    irs = irset.irs(position, group)
    return ZoneCovariance(
        matrix=_gram_blocks(irs, filter_length), zone=group, position=position
    )


def desired_pressure(irset: IrSet, position: int, reference_loudspeaker: int,
                     delay: int, filter_length: int) -> DesiredPressure:
    """Target bright-zone pressure: the reference loudspeaker's IR delayed.

    Each bright mic's target is its IR from the reference loudspeaker shifted
    by ``delay`` samples and zero-padded to length K+J-1.
    """
    if not 0 <= delay <= filter_length - 1:
        raise ValueError(f"delay must lie in [0, {filter_length - 1}], got {delay}")
    irs = irset.irs(position, "bright")
    num_mics, num_lsp, k_len = irs.shape
    if not 0 <= reference_loudspeaker < num_lsp:
        raise ValueError(f"reference loudspeaker {reference_loudspeaker} out of range")
    targets = np.zeros((num_mics, k_len + filter_length - 1))
    targets[:, delay : delay + k_len] = irs[:, reference_loudspeaker, :]
    return DesiredPressure(targets=targets, reference_loudspeaker=reference_loudspeaker,
                           delay=delay)


def cross_vector(irset: IrSet, position: int, desired: DesiredPressure,
                 filter_length: int) -> np.ndarray:
    """Stacked H^T d summed over bright mics (length L*J)."""
    irs = irset.irs(position, "bright")
    num_mics, num_lsp, k_len = irs.shape
    if desired.targets.shape != (num_mics, k_len + filter_length - 1):
        raise ValueError("desired pressure shape is inconsistent with the IR set")
    out = np.zeros(num_lsp * filter_length)
    for m in range(num_mics):
        for l in range(num_lsp):
            # valid correlation of d with h gives (H^T d)[i] = sum_k d[k+i] h[k]
            out[l * filter_length : (l + 1) * filter_length] += np.correlate(
                desired.targets[m], irs[m, l], mode="valid"
            )
    return out


def design_pm(bright: ZoneCovariance, dark: ZoneCovariance, cross: np.ndarray,
              zeta: float, ridge: float, num_loudspeakers: int = 1,
              position: int | str = 0,
              extra_params: dict | None = None) -> ControlFilterSet:
    """Weighted pressure-matching filter via the regularized normal equations.

    Solves ((1-zeta) R_B + zeta R_D + ridge I) q = (1-zeta) H^T d with a
    symmetric positive-definite factorization and verifies the residual.
    """
    if not 0.0 <= zeta <= 1.0:
        raise ValueError("zeta must lie in [0, 1]")
    if ridge <= 0.0:
        raise ValueError("ridge must be positive")
    n = bright.matrix.shape[0]
    if dark.matrix.shape[0] != n or cross.shape != (n,):
        raise ValueError("covariance/cross-vector dimensions do not match")
    system = (1.0 - zeta) * bright.matrix + zeta * dark.matrix + ridge * np.eye(n)
    rhs = (1.0 - zeta) * cross
    try:
        factor = scipy.linalg.cho_factor(system, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            f"PM system is not positive definite despite ridge={ridge:g} "
            f"(condition estimate {np.linalg.cond(system):.3e})"
        ) from exc
    q = scipy.linalg.cho_solve(factor, rhs)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm > 0:
        residual = np.linalg.norm(system @ q - rhs)
        if residual > 1e-8 * rhs_norm:
            raise ValueError(
                f"PM solve residual {residual:.3e} exceeds 1e-8 * |rhs| "
                f"(condition estimate {np.linalg.cond(system):.3e})"
            )
    params = {"zeta": zeta, "ridge": ridge}
    params.update(extra_params or {})
    return ControlFilterSet.from_stacked(q, num_loudspeakers, "pm", position, params)


def design_acc(bright: ZoneCovariance, dark: ZoneCovariance, ridge: float,
               power_target: float, num_loudspeakers: int = 1,
               position: int | str = 0,
               extra_params: dict | None = None) -> ControlFilterSet:
    """Acoustic-contrast filter: principal eigenvector of (R_B, R_D + ridge I).

    The generalized problem is reduced through the Cholesky factor C of
    R_D + ridge I to a symmetric standard eigenproblem on C^-1 R_B C^-T and
    back-transformed.  The sign is fixed so the largest-magnitude coefficient
    is positive and the result is scaled so q^T R_B q equals power_target.
    """
    if ridge <= 0.0:
        raise ValueError("ridge must be positive")
    if power_target <= 0.0:
        raise ValueError("power_target must be positive")
    n = bright.matrix.shape[0]
    regularized = dark.matrix + ridge * np.eye(n)
    try:
        chol = np.linalg.cholesky(regularized)
    except np.linalg.LinAlgError as exc:
        raise ValueError("dark covariance plus ridge is not positive definite") from exc
    half = scipy.linalg.solve_triangular(chol, bright.matrix, lower=True)
    reduced = scipy.linalg.solve_triangular(chol, half.T, lower=True)
    reduced = 0.5 * (reduced + reduced.T)
    eigvals, eigvecs = scipy.linalg.eigh(reduced)
    mu = float(eigvals[-1])
    q = scipy.linalg.solve_triangular(chol.T, eigvecs[:, -1], lower=False)
    lead = q[np.argmax(np.abs(q))]
    if lead < 0:
        q = -q
    bq = bright.matrix @ q
    residual = np.linalg.norm(bq - mu * (regularized @ q))
    scale = np.linalg.norm(bq)
    if scale > 0 and residual > 1e-8 * scale:
        raise ValueError(f"generalized eigen-residual {residual:.3e} exceeds 1e-8 relative")
    bright_energy = float(q @ bq)
    if bright_energy <= 0.0:
        raise ValueError("bright-zone energy of the contrast filter is zero; cannot scale")
    q = q * np.sqrt(power_target / bright_energy)
    params = {"ridge": ridge, "power_target": power_target, "eigenvalue": mu}
    params.update(extra_params or {})
    return ControlFilterSet.from_stacked(q, num_loudspeakers, "acc", position, params)


@dataclass(frozen=True)
class DesignParams:
    """Common parameters for per-position and mix designs."""

    method: str  # "acc" | "pm"
    filter_length: int
    ridge: float = 1e-5
    zeta: float = 0.5
    reference_loudspeaker: int = 0
    modeling_delay: int | None = None  # None -> filter_length // 2

    def __post_init__(self):
        if self.method not in ("acc", "pm"):
            raise ValueError(f"unknown design method '{self.method}'")
        if self.filter_length < 1:
            raise ValueError("filter_length must be >= 1")
        if self.ridge <= 0:
            raise ValueError("ridge must be positive")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError("zeta must lie in [0, 1]")

    @property
    def delay(self) -> int:
        return self.filter_length // 2 if self.modeling_delay is None else self.modeling_delay


def average_covariances(covariances: list[ZoneCovariance]) -> ZoneCovariance:
    """Elementwise mean of per-position covariances (the mix-data statistic)."""
    if not covariances:
        raise ValueError("cannot average an empty covariance list")
    zone = covariances[0].zone
    stack = np.stack([c.matrix for c in covariances], axis=0)
    return ZoneCovariance(matrix=stack.mean(axis=0), zone=zone, position=None)


def design_position_filter(irset: IrSet, position: int, params: DesignParams) -> ControlFilterSet:
    """Design the ACC or PM filter for one listener position."""
    bright = zone_covariance(irset, position, "bright", params.filter_length)
    dark = zone_covariance(irset, position, "dark", params.filter_length)
    desired = desired_pressure(irset, position, params.reference_loudspeaker,
                               params.delay, params.filter_length)
    num_lsp = irset.manifest.num_loudspeakers
    extra = {"reference_loudspeaker": params.reference_loudspeaker, "delay": params.delay}
    if params.method == "pm":
        cross = cross_vector(irset, position, desired, params.filter_length)
        return design_pm(bright, dark, cross, params.zeta, params.ridge, num_lsp,
                         position, extra)
    return design_acc(bright, dark, params.ridge, desired.energy(), num_lsp,
                      position, extra)


def design_mix(irset: IrSet, params: DesignParams,
               positions: list[int] | None = None) -> ControlFilterSet:
    """Mix-data filter: one design on position-averaged covariances.

    Covariances (and, for PM, cross vectors) are averaged elementwise over
    the given positions; the ACC power target is the mean desired-pressure
    energy over the same positions.
    """
    if positions is None:
        positions = list(range(irset.num_positions))
    if not positions:
        raise ValueError("design_mix needs at least one position")
    brights = [zone_covariance(irset, s, "bright", params.filter_length) for s in positions]
    darks = [zone_covariance(irset, s, "dark", params.filter_length) for s in positions]
    bright_mix = average_covariances(brights)
    dark_mix = average_covariances(darks)
    desireds = [
        desired_pressure(irset, s, params.reference_loudspeaker, params.delay,
                         params.filter_length)
        for s in positions
    ]
    num_lsp = irset.manifest.num_loudspeakers
    extra = {"reference_loudspeaker": params.reference_loudspeaker, "delay": params.delay}
    if params.method == "pm":
        crosses = [
            cross_vector(irset, s, d, params.filter_length)
            for s, d in zip(positions, desireds)
        ]
        cross_mix = np.stack(crosses, axis=0).mean(axis=0)
        return design_pm(bright_mix, dark_mix, cross_mix, params.zeta, params.ridge,
                         num_lsp, "mix", extra)
    power = float(np.mean([d.energy() for d in desireds]))
    return design_acc(bright_mix, dark_mix, params.ridge, power, num_lsp, "mix", extra)


def build_dictionaries(irset: IrSet, params: DesignParams) -> tuple[FilterDictionary, np.ndarray]:
    """Per-position filter dictionary plus the observation-IR dictionary.

    The observation-IR dictionary is a view into the IR set's observation
    group (no copy); entry s matches the filter designed for position s.
    """
    entries = tuple(
        design_position_filter(irset, s, params) for s in range(irset.num_positions)
    )
    dictionary = FilterDictionary(entries=entries, method=params.method,
                                  source_ids=irset.manifest.source_ids)
    return dictionary, irset.observation


def save_dictionary(dictionary: FilterDictionary, params: DesignParams,
                    path: str | Path) -> None:
    """Persist a dictionary as dict_<method>.f64 plus dict_manifest.json."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    num_lsp, filt_len = dictionary.filter_shape
    blob = np.concatenate([e.filters.ravel() for e in dictionary.entries])
    (out / f"dict_{dictionary.method}.f64").write_bytes(blob.astype("<f8").tobytes())
    manifest = {
        "schema_version": DICT_SCHEMA_VERSION,
        "method": dictionary.method,
        "num_positions": len(dictionary),
        "num_loudspeakers": num_lsp,
        "filter_length_J": filt_len,
        "lambda": params.ridge,
        "zeta": params.zeta,
        "l_ref": params.reference_loudspeaker,
        "delta": params.delay,
        "source_ids": list(dictionary.source_ids),
        "entry_params": [
            {k: v for k, v in e.params.items()} for e in dictionary.entries
        ],
    }
    (out / DICT_MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_dictionary(path: str | Path) -> tuple[FilterDictionary, DesignParams]:
    root = Path(path)
    manifest_path = root / DICT_MANIFEST_FILE
    if not manifest_path.is_file():
        raise FileNotFoundError(f"missing dictionary manifest {manifest_path}")
    obj = json.loads(manifest_path.read_text())
    if obj.get("schema_version") != DICT_SCHEMA_VERSION:
        raise ValueError(f"unknown dictionary schema_version {obj.get('schema_version')!r}")
    method = obj["method"]
    num_positions = int(obj["num_positions"])
    num_lsp = int(obj["num_loudspeakers"])
    filt_len = int(obj["filter_length_J"])
    data_path = root / f"dict_{method}.f64"
    if not data_path.is_file():
        raise FileNotFoundError(f"missing dictionary data file {data_path}")
    raw = data_path.read_bytes()
    expected = num_positions * num_lsp * filt_len * 8
    if len(raw) != expected:
        raise ValueError(
            f"size mismatch in {data_path}: got {len(raw)} bytes, expected {expected}"
        )
    flat = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    filters = flat.reshape(num_positions, num_lsp, filt_len)
    entry_params = obj.get("entry_params") or [{} for _ in range(num_positions)]
    entries = tuple(
        ControlFilterSet(filters[s], method, s, entry_params[s])
        for s in range(num_positions)
    )
    params = DesignParams(
        method=method,
        filter_length=filt_len,
        ridge=float(obj["lambda"]),
        zeta=float(obj["zeta"]),
        reference_loudspeaker=int(obj["l_ref"]),
        modeling_delay=int(obj["delta"]),
    )
    dictionary = FilterDictionary(entries=entries, method=method,
                                  source_ids=tuple(obj.get("source_ids", range(num_positions))))
    return dictionary, params
