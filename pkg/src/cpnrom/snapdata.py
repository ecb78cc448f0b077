"""Snapshot matrices, weighted inner products, and snapshot file I/O.

A snapshot set is a ``D x m`` matrix whose columns are sampled states
``u^(1), ..., u^(m)``, together with an optional diagonal weight vector
defining the inner product ``<u, v> = sum_j w_j u_j v_j``.  All error
measures in the package are taken with respect to this inner product.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SnapshotSet",
    "XGeometry",
    "x_inner",
    "x_norm",
    "column_norms",
    "empirical_zero_error",
    "save_snapshots",
    "load_snapshots",
]

_MAGIC = b"SNP1"
_VERSION = 1


@dataclass(frozen=True)
class SnapshotSet:
    """Immutable collection of state snapshots.

    Parameters
    ----------
    states : (D, m) ndarray
        Column ``k`` holds the k-th sampled state. Stored as float64.
    norm_weights : (D,) ndarray or None
        Strictly positive diagonal of the weight matrix defining the
        inner product. ``None`` means the Euclidean inner product.
    """

    states: np.ndarray
    norm_weights: np.ndarray | None = None

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim != 2:
            raise ValueError(f"states must be a 2-d array, got ndim={states.ndim}")
        if states.shape[0] < 1 or states.shape[1] < 1:
            raise ValueError(f"states must be nonempty, got shape {states.shape}")
        if not np.all(np.isfinite(states)):
            raise ValueError("states contain non-finite entries")
        object.__setattr__(self, "states", states)
        if self.norm_weights is not None:
            w = np.asarray(self.norm_weights, dtype=np.float64)
            if w.shape != (states.shape[0],):
                raise ValueError(
                    f"norm_weights shape {w.shape} does not match state dimension {states.shape[0]}"
                )
            if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
                raise ValueError("norm_weights must be finite and strictly positive")
            object.__setattr__(self, "norm_weights", w)

    @property
    def dim_state(self) -> int:
        return self.states.shape[0]

    @property
    def num_samples(self) -> int:
        return self.states.shape[1]

    def geometry(self) -> "XGeometry":
        return XGeometry.from_weights(self.dim_state, self.norm_weights)


@dataclass(frozen=True)
class XGeometry:
    """Square roots of the diagonal inner-product weights.

    Scaling a vector elementwise by ``sqrt_weights`` turns the weighted
    inner product into the Euclidean one, which is how every algorithm in
    the package uses it.
    """

    sqrt_weights: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sqrt_weights, dtype=np.float64)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("sqrt_weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(s)) or np.any(s <= 0.0):
            raise ValueError("sqrt_weights must be finite and strictly positive")
        object.__setattr__(self, "sqrt_weights", s)

    @classmethod
    def from_weights(cls, dim: int, weights: np.ndarray | None) -> "XGeometry":
        if weights is None:
            return cls(np.ones(dim))
        return cls(np.sqrt(np.asarray(weights, dtype=np.float64)))

    @property
    def dim(self) -> int:
        return self.sqrt_weights.size

    def scale(self, arr: np.ndarray) -> np.ndarray:
        """Multiply rows (axis 0) of ``arr`` by the square-root weights."""
        if arr.shape[0] != self.dim:
            raise ValueError(f"array has leading dimension {arr.shape[0]}, expected {self.dim}")
        if arr.ndim == 1:
            return self.sqrt_weights * arr
        return self.sqrt_weights[:, None] * arr


def x_inner(geom: XGeometry, u: np.ndarray, v: np.ndarray) -> float:
    """Weighted inner product ``sum_j w_j u_j v_j``."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != (geom.dim,) or v.shape != (geom.dim,):
        raise ValueError(
            f"vectors of shape {u.shape} and {v.shape} do not match geometry dimension {geom.dim}"
        )
    return float(np.dot(geom.sqrt_weights * u, geom.sqrt_weights * v))


def x_norm(geom: XGeometry, u: np.ndarray) -> float:
    """Norm induced by :func:`x_inner`."""
    return float(np.linalg.norm(geom.scale(np.asarray(u, dtype=np.float64))))


def column_norms(geom: XGeometry, arr: np.ndarray) -> np.ndarray:
    """Weighted norms of all columns of a ``D x m`` array at once."""
    return np.linalg.norm(geom.scale(arr), axis=0)


def empirical_zero_error(
    snapshots: SnapshotSet, geom: XGeometry, setting: str
) -> float:
    """Size of the raw snapshot set against which errors are made relative.

    ``"ms"`` returns the root of the *unnormalized* sum of squared norms
    (the discrete measure is the plain counting measure); ``"wc"`` returns
    the largest snapshot norm.
    """
    norms = column_norms(geom, snapshots.states)
    if setting == "ms":
        return float(np.sqrt(np.sum(norms**2)))
    if setting == "wc":
        return float(np.max(norms))
    raise ValueError(f"setting must be 'ms' or 'wc', got {setting!r}")


# Snapshot file formats =======================================================
#
# Binary "SNP1": magic 'SNP1' | u32 LE version=1 | u64 LE D | u64 LE m |
# u8 has_weights | [D float64 LE weights] | D*m float64 LE column-major.
# CSV: D rows x m columns, comma separated, no header.


def save_snapshots(snapshots: SnapshotSet, path, fmt: str = "binary") -> None:
    """Write a snapshot set to ``path`` in the given format."""
    if fmt == "binary":
        d, m = snapshots.states.shape
        has_w = snapshots.norm_weights is not None
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<IQQB", _VERSION, d, m, 1 if has_w else 0))
            if has_w:
                fh.write(snapshots.norm_weights.astype("<f8").tobytes())
            fh.write(snapshots.states.astype("<f8").tobytes(order="F"))
    elif fmt == "csv":
        np.savetxt(path, snapshots.states, delimiter=",")
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")


def load_snapshots(path, fmt: str = "binary") -> SnapshotSet:
    """Read a snapshot set written by :func:`save_snapshots`.

    Binary loads are bit-exact round trips of the stored states.
    """
    if fmt == "binary":
        return _load_binary(path)
    if fmt == "csv":
        states = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
        return SnapshotSet(states)
    raise ValueError(f"unknown snapshot format {fmt!r}")


def _load_binary(path) -> SnapshotSet:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise ValueError(f"bad magic {raw[:4]!r}, expected {_MAGIC!r}")
    if len(raw) < 4 + struct.calcsize("<IQQB"):
        raise ValueError("truncated header")
    version, d, m, has_w = struct.unpack_from("<IQQB", raw, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported snapshot format version {version}")
    off = 4 + struct.calcsize("<IQQB")
    weights = None
    if has_w not in (0, 1):
        raise ValueError(f"invalid has_weights byte {has_w}")
    if has_w:
        end = off + 8 * d
        if len(raw) < end:
            raise ValueError("payload shorter than weight block")
        weights = np.frombuffer(raw[off:end], dtype="<f8").copy()
        off = end
    need = d * m * 8
    if len(raw) - off < need:
        raise ValueError(f"payload shorter than D*m*8 bytes ({len(raw) - off} < {need})")
    states = np.frombuffer(raw[off : off + need], dtype="<f8").reshape((d, m), order="F").copy()
    return SnapshotSet(states, weights)
