"""Sparse multivariate polynomial least squares.

Fitting happens in four stages: a downward-closed multi-index set fixes
the background polynomial space; inputs are affinely mapped onto
``[-1, 1]^d`` boxes estimated from the samples and expanded in
tensorized orthonormal Legendre polynomials; an l1 (lasso) homotopy of
least-angle type produces a path of candidate supports; each support is
refit by ordinary least squares and scored with the closed-form
leave-one-out error, the smallest of which wins.

The module also provides empirical Lipschitz norms of fitted maps under
a mixed norm that rescales selected coordinates by their own Lipschitz
constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "MultiIndexSet",
    "PolynomialModel",
    "build_index_set",
    "is_downward_closed",
    "legendre_eval",
    "estimate_box",
    "fit_sparse",
    "lipschitz_estimate",
]

INDEX_SET_CAP = 20000
_DEGENERATE_HAT = 1e-10  # leverage this close to 1 makes LOO meaningless


# Multi-index sets ============================================================

@dataclass(frozen=True)
class MultiIndexSet:
    """Ordered, downward-closed set of multi-indices.

    ``indices`` is graded lexicographic: sorted by total degree first,
    then lexicographically.
    """

    dim: int
    indices: tuple
    kind: str
    degree: int
    interaction: int | None = None

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)


def _enum_total(d: int, p: int) -> list:
    out = []

    def rec(prefix, rem):
        if len(prefix) == d:
            out.append(prefix)
            return
        for k in range(rem + 1):
            rec(prefix + (k,), rem - k)

    rec((), p)
    return out


def _enum_hyperbolic(d: int, p: int, cap: int) -> list:
    out = []

    def rec(prefix, budget):
        if len(prefix) == d:
            out.append(prefix)
            if len(out) > cap:
                raise ValueError(
                    f"index set exceeds cap of {cap} indices; use a smaller degree than {p}"
                )
            return
        for k in range(budget):
            rec(prefix + (k,), budget // (k + 1))

    rec((), p + 1)
    return out


def _enum_partial(d: int, p: int, l: int) -> list:
    out = []

    def rec(prefix, slots):
        if len(prefix) == d:
            out.append(prefix)
            return
        rec(prefix + (0,), slots)
        if slots > 0:
            for k in range(1, p + 1):
                rec(prefix + (k,), slots - 1)

    rec((), l)
    return out


def build_index_set(dim: int, kind: str, degree: int,
                    interaction: int | None = None,
                    cap: int = INDEX_SET_CAP) -> MultiIndexSet:
    """Enumerate a structured multi-index set in graded-lex order.

    Supported kinds: ``"total"`` (total degree at most ``degree``),
    ``"hyperbolic"`` (product of ``lambda_j + 1`` at most ``degree + 1``),
    and ``"partial"`` (componentwise degree at most ``degree`` with at
    most ``interaction`` active coordinates).  Raises if the set would
    exceed ``cap`` indices.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if kind == "total":
        n = math.comb(degree + dim, dim)
        if n > cap:
            raise ValueError(
                f"index set would have {n} > {cap} indices; use a smaller degree than {degree}"
            )
        idx = _enum_total(dim, degree)
    elif kind == "hyperbolic":
        idx = _enum_hyperbolic(dim, degree, cap)
    elif kind == "partial":
        if interaction is None:
            raise ValueError("partial-degree sets need an interaction order")
        l = min(interaction, dim)
        n = sum(math.comb(dim, k) * degree**k for k in range(l + 1))
        if n > cap:
            raise ValueError(
                f"index set would have {n} > {cap} indices; use a smaller degree than {degree}"
                " or a smaller interaction order"
            )
        idx = _enum_partial(dim, degree, l)
    else:
        raise ValueError(f"unknown index set kind {kind!r}")
    idx.sort(key=lambda lam: (sum(lam), lam))
    return MultiIndexSet(dim=dim, indices=tuple(idx), kind=kind, degree=degree,
                         interaction=interaction)


def is_downward_closed(indices) -> bool:
    """Check that every componentwise-smaller neighbor is present."""
    have = set(map(tuple, indices))
    for lam in have:
        for j, k in enumerate(lam):
            if k > 0 and lam[:j] + (k - 1,) + lam[j + 1:] not in have:
                return False
    return True


# Legendre bases ==============================================================

def legendre_eval(k: int, t):
    """L2-orthonormal Legendre polynomial of degree ``k`` at ``t``.

    Normalized so that the squared average over the uniform measure on
    ``[-1, 1]`` is one, i.e. ``sqrt(2k + 1)`` times the classical
    polynomial.  Arguments outside ``[-1, 1]`` are evaluated as plain
    polynomial extrapolation.
    """
    if k < 0:
        raise ValueError("degree must be nonnegative")
    t_arr = np.asarray(t, dtype=np.float64)
    if k == 0:
        val = np.ones_like(t_arr)
    else:
        p_prev = np.ones_like(t_arr)
        p = t_arr.copy()
        for n in range(1, k):
            p, p_prev = ((2 * n + 1) * t_arr * p - n * p_prev) / (n + 1), p
        val = p
    val = np.sqrt(2 * k + 1) * val
    return float(val) if np.isscalar(t) or t_arr.ndim == 0 else val


def _legendre_table(t: np.ndarray, kmax: int) -> np.ndarray:
    """Values of all orthonormal degrees 0..kmax; shape (kmax+1,) + t.shape."""
    table = np.empty((kmax + 1,) + t.shape)
    table[0] = 1.0
    if kmax >= 1:
        table[1] = t
    for n in range(1, kmax):
        table[n + 1] = ((2 * n + 1) * t * table[n] - n * table[n - 1]) / (n + 1)
    for k in range(kmax + 1):
        table[k] *= np.sqrt(2 * k + 1)
    return table


# Input boxes =================================================================

def estimate_box(samples: np.ndarray):
    """Componentwise sample ranges ``[lo_j, hi_j]`` and a mask of
    numerically constant coordinates (mapped to 0 by the scalings)."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    lo = samples.min(axis=0)
    hi = samples.max(axis=0)
    constant = (hi - lo) <= 1e-12 * np.maximum(1.0, np.abs(lo))
    return lo, hi, constant


def _scale_to_box(x: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                  constant: np.ndarray) -> np.ndarray:
    span = np.where(constant, 1.0, hi - lo)
    t = (2.0 * x - (hi + lo)) / span
    t[:, constant] = 0.0
    return t


# Polynomial models ===========================================================

@dataclass(frozen=True)
class PolynomialModel:
    """Sparse polynomial in an orthonormal Legendre basis on a box.

    ``indices`` is the retained support (not necessarily downward
    closed after sparsification); ``coeffs`` are aligned with it.
    Coordinates flagged in ``constant_mask`` never appear with positive
    degree and are mapped to the box center.
    """

    dim: int
    indices: tuple
    coeffs: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    constant_mask: np.ndarray

    def __post_init__(self):
        if len(self.indices) != len(self.coeffs):
            raise ValueError("one coefficient per index required")
        if len(self.coeffs) and not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite coefficients")
        for lam in self.indices:
            if any(k > 0 and self.constant_mask[j] for j, k in enumerate(lam)):
                raise ValueError("index touches a constant coordinate")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at rows of ``x`` (shape (m, dim)); extrapolates
        freely outside the fitted box."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} input columns, got {x.shape[1]}")
        if not self.indices:
            return np.zeros(x.shape[0])
        t = _scale_to_box(x, self.box_lo, self.box_hi, self.constant_mask)
        psi = _design_matrix(self.indices, t)
        return psi @ self.coeffs


def _design_matrix(indices, t: np.ndarray) -> np.ndarray:
    """Tensor-product Legendre design matrix for scaled inputs ``t``."""
    m = t.shape[0]
    kmax = max((max(lam) for lam in indices), default=0)
    table = _legendre_table(t, kmax)  # (kmax+1, m, d)
    psi = np.ones((m, len(indices)))
    for pos, lam in enumerate(indices):
        col = None
        for j, k in enumerate(lam):
            if k:
                col = table[k, :, j] if col is None else col * table[k, :, j]
        if col is not None:
            psi[:, pos] = col
    return psi


# Lasso homotopy with leave-one-out scoring ===================================

def _loo_from_hat(y: np.ndarray, yhat: np.ndarray, h: np.ndarray) -> float:
    """Closed-form leave-one-out RMS from leverages; infinite when a
    leverage reaches one (interpolating support)."""
    denom = 1.0 - h
    if np.any(denom <= _DEGENERATE_HAT):
        return np.inf
    return float(np.sqrt(np.mean(((y - yhat) / denom) ** 2)))


def _homotopy_supports(psi: np.ndarray, y: np.ndarray, max_active: int):
    """Run the lasso-modified least-angle homotopy on the columns of
    ``psi`` and score every distinct support along the path.

    Returns a list of ``(support, loo, criterion)`` triples in discovery
    order, starting with the empty support.  ``loo`` is the closed-form
    leave-one-out RMS of the least-squares refit; ``criterion`` is the
    complexity-corrected variant ``loo * sqrt(m / (m - s) *
    (1 + trace((Psi_S^T Psi_S)^{-1})))`` that penalizes large and
    ill-conditioned supports.  Correlation ties break toward the smaller
    column index, and a column dropped by the lasso rule may not
    re-enter at the very next event.  The path stops at ``max_active``
    active columns, at a numerically dependent column, or when the
    regularization level is exhausted.
    """
    m, p = psi.shape
    results = [((), _loo_from_hat(y, np.zeros(m), np.zeros(m)), _loo_from_hat(y, np.zeros(m), np.zeros(m)))]
    if max_active <= 0 or p == 0:
        return results

    c = psi.T @ y
    mu = float(np.max(np.abs(c)))
    mu_floor = 1e-12 * mu
    if mu <= 0.0 or not np.isfinite(mu):
        return results

    cap = max_active
    q_store = np.empty((m, cap))
    r_store = np.zeros((cap, cap))
    rinv = np.zeros((cap, cap))  # inverse of the R factor, kept in sync
    z = np.empty(cap)  # Q^T y
    active: list[int] = []
    signs: list[float] = []
    beta = np.zeros(p)
    seen = {()}
    banned = -1
    j0 = int(np.argmax(np.abs(c)))
    pending_add = (j0, 1.0 if c[j0] >= 0 else -1.0)

    def qr_append(j: int) -> bool:
        s = len(active)
        v = psi[:, j]
        if s:
            w = q_store[:, :s].T @ v
            q = v - q_store[:, :s] @ w
            w2 = q_store[:, :s].T @ q  # second pass for orthogonality
            q = q - q_store[:, :s] @ w2
            w = w + w2
        else:
            w = np.zeros(0)
            q = v.copy()
        rho = np.linalg.norm(q)
        if rho <= 1e-10 * max(np.linalg.norm(v), 1e-300):
            return False
        q /= rho
        q_store[:, s] = q
        r_store[:s, s] = w
        r_store[s, s] = rho
        rinv[:s, s] = -(rinv[:s, :s] @ w) / rho
        rinv[s, s] = 1.0 / rho
        z[s] = q @ y
        return True

    def qr_rebuild():
        s = len(active)
        if s:
            qm, rm = np.linalg.qr(psi[:, active])
            q_store[:, :s] = qm
            r_store[:s, :s] = rm
            rinv[:s, :s] = solve_triangular(rm, np.eye(s), lower=False)
            z[:s] = qm.T @ y

    def record_support():
        s = len(active)
        support = tuple(sorted(active))
        if support not in seen:
            seen.add(support)
            h = np.einsum("ij,ij->i", q_store[:, :s], q_store[:, :s])
            yhat = q_store[:, :s] @ z[:s]
            loo = _loo_from_hat(y, yhat, h)
            # trace of the inverse Gram from the inverse R factor
            trace_inv = float(np.sum(rinv[:s, :s] ** 2))
            if s < m and np.isfinite(loo):
                crit = loo * np.sqrt(m / (m - s) * (1.0 + trace_inv))
            else:
                crit = np.inf
            results.append((support, loo, crit))

    for _ in range(4 * cap + 16):
        if pending_add is not None:
            j, sgn = pending_add
            pending_add = None
            if not qr_append(j):
                break
            active.append(j)
            signs.append(sgn)
        record_support()
        s = len(active)
        if s >= cap:
            break

        r = r_store[:s, :s]
        sg = np.array(signs)
        w1 = solve_triangular(r, sg, trans="T", lower=False)
        u = q_store[:, :s] @ w1  # = Psi_A G_A^{-1} sg, directional fit change
        d = solve_triangular(r, w1, lower=False)
        a = psi.T @ u
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(d))):
            break

        # Smallest positive step among: inactive column joining the
        # equicorrelation set (either boundary), active coefficient
        # crossing zero (lasso drop), regularization hitting zero.
        inact = np.ones(p, dtype=bool)
        for jj in active:
            inact[jj] = False
        if 0 <= banned < p:
            inact[banned] = False
        best_step = mu
        event = ("end", -1, 0.0)
        idx_in = np.nonzero(inact)[0]
        for bnd in (1.0, -1.0):
            if not idx_in.size:
                break
            denom = 1.0 - bnd * a[idx_in]
            num = mu - bnd * c[idx_in]
            with np.errstate(divide="ignore", invalid="ignore"):
                steps = np.where(denom > 1e-14, num / denom, np.inf)
            steps = np.where(steps > 1e-14 * mu, steps, np.inf)
            k = int(np.argmin(steps))
            if steps[k] < best_step - 1e-18 or (
                event[0] == "add" and steps[k] <= best_step * (1 + 1e-12)
                and idx_in[k] < event[1]
            ):
                best_step = float(steps[k])
                event = ("add", int(idx_in[k]), bnd)
        ba = beta[active]
        with np.errstate(divide="ignore", invalid="ignore"):
            drop_steps = np.where(d * ba < 0.0, -ba / d, np.inf)
        if drop_steps.size:
            k = int(np.argmin(drop_steps))
            if drop_steps[k] < best_step * (1 - 1e-12):
                best_step = float(drop_steps[k])
                event = ("drop", int(active[k]), 0.0)

        beta[active] += best_step * d
        c -= best_step * a
        mu -= best_step
        banned = -1

        kind, j, bnd = event
        if kind == "end" or mu <= mu_floor:
            break
        if kind == "add":
            pending_add = (j, bnd)
        else:
            pos = active.index(j)
            active.pop(pos)
            signs.pop(pos)
            beta[j] = 0.0
            banned = j
            qr_rebuild()
            record_support()
    return results


def _min_norm_lstsq(psi: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-norm least squares with singular values below
    ``1e-12 * sigma_max`` discarded."""
    coef, _, _, _ = np.linalg.lstsq(psi, y, rcond=1e-12)
    return coef


def fit_sparse(x: np.ndarray, y: np.ndarray, kind: str = "hyperbolic",
               degree: int = 5, interaction: int | None = None,
               seed=None, cap: int = INDEX_SET_CAP):
    """Fit a sparse polynomial to samples ``(x, y)``.

    Builds the background index set, drops indices touching constant
    input coordinates, runs the lasso homotopy (active set capped at
    ``min(m // 2, |set|)``), refits each candidate support by ordinary
    least squares, and keeps the support with the smallest
    complexity-corrected leave-one-out error, ties going to the smaller
    support.  The whole procedure is deterministic; ``seed`` is accepted
    for interface stability and unused.

    Returns ``(model, loo_error)`` with the plain leave-one-out error of
    the winning support.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    m, d = x.shape
    if y.shape != (m,):
        raise ValueError(f"targets of shape {y.shape} do not match {m} samples")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in training data")

    lo, hi, constant = estimate_box(x)
    full = build_index_set(d, kind, degree, interaction, cap=cap)
    indices = tuple(
        lam for lam in full
        if not any(k > 0 and constant[j] for j, k in enumerate(lam))
    )
    t = _scale_to_box(x, lo, hi, constant)
    psi = _design_matrix(indices, t)

    max_active = min(m // 2, len(indices))
    scored = _homotopy_supports(psi, y, max_active)

    best_support, best_loo, best_crit = (), np.inf, np.inf
    first = True
    for support, loo, crit in scored:
        if first or crit < best_crit or (crit == best_crit and len(support) < len(best_support)):
            best_support, best_loo, best_crit = support, loo, crit
            first = False

    cols = list(best_support)
    coeffs = _min_norm_lstsq(psi[:, cols], y) if cols else np.zeros(0)
    model = PolynomialModel(
        dim=d,
        indices=tuple(indices[i] for i in cols),
        coeffs=coeffs,
        box_lo=lo,
        box_hi=hi,
        constant_mask=constant,
    )
    return model, best_loo


# Empirical Lipschitz norms ===================================================

def lipschitz_estimate(model, inputs: np.ndarray,
                       decoded_gamma: np.ndarray | None = None,
                       pair_budget: int = 500_000, seed: int = 0) -> float:
    """Largest difference quotient of ``model`` over sample pairs.

    The denominator is a mixed norm of the input difference: the
    Euclidean norm over plain (encoder) coordinates versus, for each
    coordinate carrying a positive weight in ``decoded_gamma``, the
    absolute difference divided by that weight; the maximum of the two
    parts.  ``decoded_gamma`` entries of NaN (or ``None`` altogether)
    mark plain coordinates.

    All ``m (m - 1) / 2`` pairs are used when affordable within
    ``pair_budget``; otherwise that many pairs are drawn uniformly from
    the seeded generator.  Pairs with denominator below ``1e-13`` are
    skipped; fewer than two distinct samples give 0.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    m, d = inputs.shape
    if m < 2:
        return 0.0
    if decoded_gamma is None:
        dec = np.zeros(d, dtype=bool)
        gam = np.ones(d)
    else:
        decoded_gamma = np.asarray(decoded_gamma, dtype=np.float64)
        dec = ~np.isnan(decoded_gamma)
        if np.any(decoded_gamma[dec] <= 0.0):
            raise ValueError("decoded coordinate weights must be positive")
        gam = np.where(dec, decoded_gamma, 1.0)
    enc = ~dec

    values = np.asarray(model.evaluate(inputs) if hasattr(model, "evaluate")
                        else model(inputs), dtype=np.float64)
    n_all = m * (m - 1) // 2
    if n_all <= pair_budget:
        ii, jj = np.triu_indices(m, k=1)
    else:
        rng = np.random.default_rng(seed)
        ii = rng.integers(0, m, size=pair_budget)
        jj = rng.integers(0, m, size=pair_budget)
        keep = ii != jj
        ii, jj = ii[keep], jj[keep]

    best = 0.0
    chunk = 200_000
    for start in range(0, ii.size, chunk):
        si, sj = ii[start:start + chunk], jj[start:start + chunk]
        diff = inputs[si] - inputs[sj]
        enc_norm = np.linalg.norm(diff[:, enc], axis=1) if np.any(enc) else np.zeros(si.size)
        if np.any(dec):
            dec_norm = np.max(np.abs(diff[:, dec]) / gam[dec], axis=1)
        else:
            dec_norm = np.zeros(si.size)
        denom = np.maximum(enc_norm, dec_norm)
        num = np.abs(values[si] - values[sj])
        ok = denom >= 1e-13
        if np.any(ok):
            best = max(best, float(np.max(num[ok] / denom[ok])))
    return best
