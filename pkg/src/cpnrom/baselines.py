"""Reference methods to compare against: plain linear projection and the
quadratic-manifold decoder with ridge-regularized feature regression."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .cpn import CpnModel, Metrics, evaluate
from .linred import coefficient_matrix, empirical_pca
from .snapdata import SnapshotSet, XGeometry

__all__ = ["QuadraticModel", "fit_linear", "fit_quadratic", "quadratic_metrics"]

DEFAULT_RIDGE_GRID = tuple(10.0 ** np.arange(-10, 1))


def fit_linear(snapshots: SnapshotSet, geom: XGeometry | None = None,
               n: int = 2, center: bool = True) -> CpnModel:
    """Rank-``n`` projection onto the principal directions.

    Returned as a model with an empty decoder DAG, so encoding,
    decoding, evaluation, and serialization behave like any other model.
    """
    if geom is None:
        geom = snapshots.geometry()
    basis = empirical_pca(snapshots, geom, center=center)
    if n > basis.rank:
        raise ValueError(f"n={n} exceeds the rank {basis.rank} of the snapshot set")
    model = CpnModel(
        offset=basis.offset.copy(),
        basis=basis.basis[:, :n].copy(),
        sqrt_weights=geom.sqrt_weights.copy(),
        encoder_indices=tuple(range(1, n + 1)),
        nodes=(),
        setting="ms",
        method="linear",
    )
    return model


def _quadratic_features(a: np.ndarray) -> np.ndarray:
    """Products ``a_i a_j`` for ``i <= j`` (lexicographic pair order),
    one column per sample."""
    n = a.shape[0]
    rows = [a[i] * a[j] for i in range(n) for j in range(i, n)]
    return np.vstack(rows) if rows else np.zeros((0, a.shape[1]))


@dataclass(frozen=True)
class QuadraticModel:
    """Decoder ``offset + Phi_lin a + Phi_quad z(a)`` with quadratic
    features ``z(a) = (a_i a_j)_{i <= j}`` and a linear projection
    encoder."""

    offset: np.ndarray
    basis_lin: np.ndarray
    basis_quad: np.ndarray
    sqrt_weights: np.ndarray
    ridge: float
    method: str = "quadratic"
    setting: str = "ms"

    @property
    def dim_state(self) -> int:
        return self.basis_lin.shape[0]

    @property
    def n(self) -> int:
        return self.basis_lin.shape[1]

    @property
    def N(self) -> int:
        # dimension of the affine space carrying the reconstruction
        n = self.n
        return n * (n + 3) // 2

    def encode_states(self, states: np.ndarray) -> np.ndarray:
        centered = states - self.offset[:, None]
        return self.basis_lin.T @ (self.sqrt_weights[:, None] ** 2 * centered)

    def decode_coeffs(self, a: np.ndarray) -> np.ndarray:
        return (
            self.offset[:, None]
            + self.basis_lin @ a
            + self.basis_quad @ _quadratic_features(a)
        )

    def reconstruct(self, states: np.ndarray) -> np.ndarray:
        return self.decode_coeffs(self.encode_states(states))


def fit_quadratic(snapshots: SnapshotSet, geom: XGeometry | None = None,
                  n: int = 2, ridge_grid=DEFAULT_RIDGE_GRID, cv_folds: int = 5,
                  seed: int = 0, center: bool = True) -> QuadraticModel:
    """Fit the quadratic-manifold decoder.

    The linear part is the rank-``n`` principal basis; the residual of
    the linear reconstruction is regressed on the quadratic features
    with an l2 penalty.  The penalty is picked from ``ridge_grid`` by
    ``cv_folds``-fold cross-validation on the residual (fold assignment
    drawn from ``seed``).  All output rows share one Gram factorization
    per candidate penalty.
    """
    if geom is None:
        geom = snapshots.geometry()
    if not len(ridge_grid):
        raise ValueError("ridge grid must not be empty")
    basis = empirical_pca(snapshots, geom, center=center)
    if n > basis.rank:
        raise ValueError(f"n={n} exceeds the rank {basis.rank} of the snapshot set")
    states = snapshots.states
    m = states.shape[1]

    a = coefficient_matrix(basis, states, geom, n)  # (n, m)
    z = _quadratic_features(a)  # (q, m)
    resid = states - basis.offset[:, None] - basis.basis[:, :n] @ a  # (D, m)

    q = z.shape[0]
    rng = np.random.default_rng(seed)
    folds = rng.permuted(np.arange(m) % cv_folds)

    def solve_weights(zs, rs, lam):
        gram = zs @ zs.T + lam * np.eye(q)
        chol = cho_factor(gram)
        return cho_solve(chol, zs @ rs.T).T  # (D, q)

    best_lam, best_score = None, np.inf
    for lam in ridge_grid:
        score = 0.0
        for f in range(cv_folds):
            hold = folds == f
            if not np.any(hold) or np.all(hold):
                continue
            w = solve_weights(z[:, ~hold], resid[:, ~hold], lam)
            score += float(np.sum((resid[:, hold] - w @ z[:, hold]) ** 2))
        if score < best_score:
            best_lam, best_score = float(lam), score

    weights = solve_weights(z, resid, best_lam)
    return QuadraticModel(
        offset=basis.offset.copy(),
        basis_lin=basis.basis[:, :n].copy(),
        basis_quad=weights,
        sqrt_weights=geom.sqrt_weights.copy(),
        ridge=best_lam,
    )


def quadratic_metrics(model: QuadraticModel, snapshots: SnapshotSet,
                      geom: XGeometry | None = None, setting: str = "ms") -> Metrics:
    """Relative reconstruction error of a quadratic model."""
    t_start = time.perf_counter()
    if geom is None:
        geom = XGeometry(model.sqrt_weights)
    states = snapshots.states
    recon = model.reconstruct(states)
    w = geom.sqrt_weights[:, None]
    err = np.linalg.norm(w * (states - recon), axis=0)
    base = np.linalg.norm(w * states, axis=0)
    if setting == "wc":
        re = float(np.max(err) / np.max(base))
    else:
        re = float(np.sqrt(np.sum(err**2) / np.sum(base**2)))
    return Metrics(re=re, per_coefficient={}, n=model.n, N=model.N, n_comp=0,
                   wall_time=time.perf_counter() - t_start)
