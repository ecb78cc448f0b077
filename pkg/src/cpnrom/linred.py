"""Linear reduction: orthonormal bases, truncation ranks, projections.

Two constructions are provided for the reduced space.  ``empirical_pca``
takes dominant left singular vectors of the (optionally centered, weight
scaled) snapshot matrix and is optimal for mean-squared error.
``greedy_basis`` repeatedly orthonormalizes the worst-approximated sample
and targets the worst-case error.  Both return bases whose columns are
orthonormal in the weighted inner product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .snapdata import SnapshotSet, XGeometry, column_norms, empirical_zero_error

__all__ = [
    "ReducedBasis",
    "empirical_pca",
    "greedy_basis",
    "custom_basis",
    "select_truncation",
    "project_coeffs",
    "coefficient_matrix",
    "residual_profile",
]


@dataclass(frozen=True)
class ReducedBasis:
    """Affine offset plus a weighted-orthonormal column basis.

    Attributes
    ----------
    offset : (D,) ndarray
        Vector subtracted from every snapshot before projecting.
    basis : (D, R) ndarray
        Orthonormal columns in the weighted inner product.
    spectrum : (R,) or (R+1,) ndarray
        PCA mode: singular values of the scaled snapshot matrix.
        Greedy mode: worst residual norm before each extension step, with
        the final entry being the worst residual of the completed basis.
    mode : str
        ``"pca"``, ``"greedy"``, or ``"custom"``.
    """

    offset: np.ndarray
    basis: np.ndarray
    spectrum: np.ndarray
    mode: str

    @property
    def dim_state(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def empirical_pca(snapshots: SnapshotSet, geom: XGeometry, center: bool = True) -> ReducedBasis:
    """Principal directions of the snapshot set under the weighted norm.

    The columns of the returned basis are left singular vectors of the
    weight-scaled (and centered, if requested) snapshot matrix mapped back
    to the original coordinates, so they are orthonormal in the weighted
    inner product.  The spectrum holds the corresponding singular values.
    """
    states = snapshots.states
    d, m = states.shape
    if center:
        if m < 2:
            raise ValueError("centering requires at least two snapshots")
        offset = states.mean(axis=1)
    else:
        offset = np.zeros(d)
    scaled = geom.scale(states - offset[:, None])
    if not np.all(np.isfinite(scaled)):
        raise ValueError("non-finite values in scaled snapshot matrix")
    if d < m:
        # SVD of the transpose costs the same but keeps LAPACK on the short side.
        vt, s, ut = np.linalg.svd(scaled.T, full_matrices=False)
        u = ut.T
    else:
        u, s, _ = np.linalg.svd(scaled, full_matrices=False)
    phi = u / geom.sqrt_weights[:, None]
    return ReducedBasis(offset=offset, basis=phi, spectrum=s, mode="pca")


def greedy_basis(snapshots: SnapshotSet, geom: XGeometry, center: bool = True) -> ReducedBasis:
    """Worst-case oriented basis grown one sample at a time.

    Each step selects the sample with the largest residual norm (ties go
    to the smallest sample index), orthonormalizes it against the current
    basis, and records the residual level.  Selection is exact over the
    finite sample set.  Stops at full rank or when the worst residual
    falls below ``1e-13`` times the largest snapshot norm.
    """
    states = snapshots.states
    d, m = states.shape
    offset = states.mean(axis=1) if center else np.zeros(d)
    scale0 = empirical_zero_error(snapshots, geom, "wc")
    tol = 1e-13 * scale0

    resid = geom.scale(states - offset[:, None])  # orthonormality bookkeeping in scaled coords
    q_cols = []
    deltas = []
    max_rank = min(d, m)
    for _ in range(max_rank):
        norms = np.linalg.norm(resid, axis=0)
        pick = int(np.argmax(norms))
        worst = float(norms[pick])
        deltas.append(worst)
        if worst < tol or worst == 0.0:
            break
        q = resid[:, pick].copy()
        # Orthonormalize twice against the accepted columns to stabilize the Gram matrix.
        for _pass in range(2):
            for prev in q_cols:
                q -= prev * np.dot(prev, q)
        nq = np.linalg.norm(q)
        if nq < tol:
            break
        q /= nq
        q_cols.append(q)
        resid -= q[:, None] * (q @ resid)
    else:
        deltas.append(float(np.max(np.linalg.norm(resid, axis=0))))

    qmat = np.column_stack(q_cols) if q_cols else np.zeros((d, 0))
    phi = qmat / geom.sqrt_weights[:, None]
    return ReducedBasis(offset=offset, basis=phi, spectrum=np.array(deltas), mode="greedy")


def custom_basis(offset: np.ndarray, basis: np.ndarray, geom: XGeometry) -> ReducedBasis:
    """Wrap a user-supplied basis, checking weighted orthonormality."""
    offset = np.asarray(offset, dtype=np.float64)
    basis = np.asarray(basis, dtype=np.float64)
    gram = (geom.scale(basis)).T @ geom.scale(basis)
    if not np.allclose(gram, np.eye(basis.shape[1]), atol=1e-10):
        raise ValueError("supplied basis columns are not orthonormal in the weighted inner product")
    return ReducedBasis(offset=offset, basis=basis, spectrum=np.zeros(0), mode="custom")


def coefficient_matrix(basis: ReducedBasis, states: np.ndarray, geom: XGeometry,
                       rank: int | None = None) -> np.ndarray:
    """All projection coefficients at once: entry (i, k) is the weighted
    inner product of basis column i with column k of ``states - offset``."""
    r = basis.rank if rank is None else rank
    centered = states - basis.offset[:, None]
    return basis.basis[:, :r].T @ (geom.sqrt_weights[:, None] ** 2 * centered)


def project_coeffs(basis: ReducedBasis, rank: int, u: np.ndarray, geom: XGeometry) -> np.ndarray:
    """Coefficients of ``u - offset`` on the first ``rank`` basis columns."""
    if rank > basis.rank:
        raise ValueError(f"rank {rank} exceeds basis rank {basis.rank}")
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (basis.dim_state,):
        raise ValueError(f"vector shape {u.shape} does not match state dimension {basis.dim_state}")
    return coefficient_matrix(basis, u[:, None], geom, rank)[:, 0]


def residual_profile(basis: ReducedBasis, snapshots: SnapshotSet, geom: XGeometry,
                     setting: str) -> np.ndarray:
    """Projection error for every truncation rank ``N = 0 .. rank``.

    Entry ``N`` is the root of the summed squared residual norms (``ms``)
    or the largest residual norm (``wc``) after projecting the centered
    snapshots onto the leading ``N`` basis columns.  Computed by
    deflating the scaled snapshot matrix one column at a time, which
    stays accurate down to machine precision (no difference-of-squares
    cancellation) and is valid for any orthonormal basis.
    """
    if setting not in ("ms", "wc"):
        raise ValueError(f"setting must be 'ms' or 'wc', got {setting!r}")
    resid = geom.scale(snapshots.states - basis.offset[:, None])
    q = geom.scale(basis.basis)
    out = np.empty(basis.rank + 1)

    def level(r):
        sq = np.einsum("ij,ij->j", r, r)
        return np.sqrt(np.sum(sq)) if setting == "ms" else np.sqrt(np.max(sq))

    out[0] = level(resid)
    for i in range(basis.rank):
        resid -= q[:, i:i + 1] * (q[:, i] @ resid)
        out[i + 1] = level(resid)
    return out


def select_truncation(basis: ReducedBasis, snapshots: SnapshotSet, geom: XGeometry,
                      setting: str, epsilon: float, beta: float) -> int:
    """Smallest rank whose projection error is within the linear budget.

    The budget is ``beta * epsilon`` times the raw snapshot size in the
    requested error measure.  Raises if even the full basis cannot meet
    it.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    target = beta * epsilon * empirical_zero_error(snapshots, geom, setting)
    profile = residual_profile(basis, snapshots, geom, setting)
    hits = np.nonzero(profile <= target)[0]
    if hits.size == 0:
        raise ValueError(
            "epsilon budget requires N > rank; decrease beta or epsilon"
        )
    return int(hits[0])
