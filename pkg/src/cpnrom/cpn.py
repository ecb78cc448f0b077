"""Encoder/decoder pairs with a composed sparse-polynomial decoder.

The encoder is linear: it projects a state onto a subset ``I`` of an
orthonormal basis.  The decoder reconstructs every remaining coordinate
``i`` by a polynomial ``f_i`` whose inputs are encoder coordinates and
previously reconstructed coordinates (a feed-forward DAG), then maps the
full coefficient vector back through the basis.

``fit_adaptive`` builds the pair so that the relative training error
stays below a prescribed ``epsilon`` (mean-squared or worst-case) and
the decoder satisfies a prescribed Lipschitz bound ``L``.  Both targets
are enforced through running budgets: the available error and Lipschitz
slack is split across the still-unfitted coordinates with weights
proportional to ``i**alpha``, a coordinate is accepted only when its fit
meets its share, and coordinates that keep failing eventually join the
encoder instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .linred import (
    ReducedBasis,
    coefficient_matrix,
    empirical_pca,
    greedy_basis,
    residual_profile,
    select_truncation,
)
from .polyfit import PolynomialModel, fit_sparse, lipschitz_estimate
from .snapdata import SnapshotSet, XGeometry, empirical_zero_error

__all__ = [
    "FitConfig",
    "CoefficientNode",
    "CpnModel",
    "BudgetState",
    "Metrics",
    "update_budgets",
    "fit_adaptive",
    "encode",
    "decode",
    "encode_matrix",
    "decode_matrix",
    "evaluate",
    "decoder_lipschitz_check",
]


@dataclass(frozen=True)
class FitConfig:
    """Targets and knobs for :func:`fit_adaptive`.

    ``beta`` splits the error budget between the linear truncation and
    the coefficient fits (defaults: ``1/sqrt(2)`` mean-squared, ``1/2``
    worst-case).  ``alpha`` shapes the per-coordinate budget weights
    ``i**alpha``.  The starting encoder dimension is ``n0`` when given,
    else derived from ``eps0`` (smallest dimension whose relative
    projection error is below it), else 1.
    """

    epsilon: float
    setting: str = "ms"
    beta: float | None = None
    alpha: float = 1.0
    lipschitz: float = 100.0
    degree: int = 5
    index_kind: str = "hyperbolic"
    interaction: int | None = None
    eps0: float | None = None
    n0: int | None = None
    conservative_budgets: bool = False
    center: bool = True
    seed: int = 0
    pair_budget: int = 500_000

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.setting not in ("ms", "wc"):
            raise ValueError(f"setting must be 'ms' or 'wc', got {self.setting!r}")
        if self.beta is not None and not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.alpha < 0.0:
            raise ValueError("alpha must be nonnegative")
        if self.lipschitz <= 1.0:
            raise ValueError("lipschitz bound must exceed 1 (the encoder alone is 1-Lipschitz)")
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        if self.eps0 is not None and not self.epsilon <= self.eps0 <= 1.0:
            raise ValueError("eps0 must lie between epsilon and 1")
        if self.n0 is not None and self.n0 < 1:
            raise ValueError("n0 must be at least 1")
        if self.pair_budget < 1:
            raise ValueError("pair_budget must be positive")

    @property
    def resolved_beta(self) -> float:
        if self.beta is not None:
            return self.beta
        return 1.0 / np.sqrt(2.0) if self.setting == "ms" else 0.5


@dataclass(frozen=True)
class CoefficientNode:
    """One reconstructed coordinate of the decoder DAG.

    ``input_set`` lists the coordinates feeding the polynomial, all
    strictly smaller than ``index``; decoded members refer to nodes
    accepted earlier.  ``eps``/``gamma`` are the achieved training error
    and empirical Lipschitz norm, ``bound_*`` the budgets they were
    accepted against, ``omega``/``tilde_omega`` the weights frozen at
    acceptance.
    """

    index: int
    input_set: tuple
    poly: PolynomialModel
    eps: float
    gamma: float
    omega: float
    tilde_omega: float
    bound_eps: float
    bound_gamma: float


@dataclass(frozen=True)
class Metrics:
    """Evaluation summary: relative error in the model's setting,
    per-coordinate errors for reconstructed coefficients, dimensions,
    maximum composition depth, and elapsed wall time."""

    re: float
    per_coefficient: dict
    n: int
    N: int
    n_comp: int
    wall_time: float


@dataclass(frozen=True)
class CpnModel:
    """Fitted encoder/decoder pair.

    ``encoder_indices`` (ascending, 1-based) select the coordinates
    returned by the encoder; ``nodes`` hold the reconstructed ones in
    acceptance (topological) order.  The stored basis is truncated to
    the selected dimension ``N``.
    """

    offset: np.ndarray
    basis: np.ndarray
    sqrt_weights: np.ndarray
    encoder_indices: tuple
    nodes: tuple
    setting: str
    config: FitConfig | None = None
    achieved: Metrics | None = None
    method: str = "cpn"

    @property
    def dim_state(self) -> int:
        return self.basis.shape[0]

    @property
    def n(self) -> int:
        return len(self.encoder_indices)

    @property
    def N(self) -> int:
        return self.basis.shape[1]

    def geometry(self) -> XGeometry:
        return XGeometry(self.sqrt_weights)

    def composition_depth(self) -> int:
        depth = {}
        for node in self.nodes:
            depth[node.index] = 1 + max(
                (depth[j] for j in node.input_set if j in depth), default=0
            )
        return max(depth.values(), default=0)

    def lipschitz_certificate(self) -> float:
        return float(np.sqrt(1.0 + sum(node.gamma**2 for node in self.nodes)))


# Encoding / decoding =========================================================

def encode_matrix(model: CpnModel, states: np.ndarray) -> np.ndarray:
    """Encoder coordinates for every column of ``states``."""
    states = np.asarray(states, dtype=np.float64)
    if states.shape[0] != model.dim_state:
        raise ValueError(
            f"states have dimension {states.shape[0]}, model expects {model.dim_state}"
        )
    cols = [i - 1 for i in model.encoder_indices]
    centered = states - model.offset[:, None]
    return model.basis[:, cols].T @ (model.sqrt_weights[:, None] ** 2 * centered)


def encode(model: CpnModel, u: np.ndarray) -> np.ndarray:
    """Project ``u`` onto the encoder coordinates (ascending order)."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (model.dim_state,):
        raise ValueError(f"state shape {u.shape} does not match dimension {model.dim_state}")
    return encode_matrix(model, u[:, None])[:, 0]


def _coefficient_dag(model: CpnModel, a: np.ndarray) -> np.ndarray:
    """Full (N, k) coefficient array: encoder rows copied from ``a``,
    node rows evaluated in topological order."""
    n_cols = a.shape[1]
    coeffs = np.zeros((model.N, n_cols))
    for row, i in enumerate(model.encoder_indices):
        coeffs[i - 1] = a[row]
    for node in model.nodes:
        x = coeffs[[j - 1 for j in node.input_set]].T
        coeffs[node.index - 1] = node.poly.evaluate(x)
    return coeffs


def decode_matrix(model: CpnModel, a: np.ndarray) -> np.ndarray:
    """Reconstruct states from encoder coordinates (one per column)."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape[0] != model.n:
        raise ValueError(f"coefficient rows {a.shape[0]} do not match encoder size {model.n}")
    coeffs = _coefficient_dag(model, a)
    return model.offset[:, None] + model.basis @ coeffs


def decode(model: CpnModel, a: np.ndarray) -> np.ndarray:
    """Reconstruct a single state from its encoder coordinates."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (model.n,):
        raise ValueError(f"coefficient shape {a.shape} does not match encoder size {model.n}")
    return decode_matrix(model, a[:, None])[:, 0]


# Budgets =====================================================================

@dataclass(frozen=True)
class BudgetState:
    """Pending coordinates plus the records of already-accepted ones."""

    pending: tuple
    accepted_eps: tuple = ()
    accepted_gamma: tuple = ()
    accepted_omega: tuple = ()
    accepted_tilde_omega: tuple = ()


def update_budgets(state: BudgetState, cfg: FitConfig, e0: float) -> dict:
    """Per-coordinate error and Lipschitz bounds for the pending set.

    Returns ``{i: (bound_eps, bound_gamma, omega, tilde_omega)}``.  The
    default scheme redistributes the remaining slack (total budget minus
    what accepted nodes actually used); the conservative variant never
    recycles slack and instead shrinks the weight pool by the weights
    frozen at earlier acceptances.
    """
    pending = sorted(state.pending)
    if not pending:
        return {}
    beta = cfg.resolved_beta
    weights = np.array([float(i) ** cfg.alpha for i in pending])
    weights /= weights.sum()

    if cfg.setting == "ms":
        total_eps = (1.0 - beta**2) * cfg.epsilon**2 * e0**2
        used_eps = sum(e**2 for e in state.accepted_eps)
    else:
        total_eps = (1.0 - beta) * cfg.epsilon * e0
        used_eps = sum(state.accepted_eps)
    total_gam = cfg.lipschitz**2 - 1.0
    used_gam = sum(g**2 for g in state.accepted_gamma)

    out = {}
    if cfg.conservative_budgets:
        pool_eps = 1.0 - sum(state.accepted_omega)
        pool_gam = 1.0 - sum(state.accepted_tilde_omega)
        if pool_eps <= 0.0 or pool_gam <= 0.0:
            raise RuntimeError("accepted errors exhausted budget")
        for w, i in zip(weights, pending):
            om = w * pool_eps
            tom = w * pool_gam
            if cfg.setting == "ms":
                bar_eps = float(np.sqrt(om * total_eps))
            else:
                bar_eps = float(om * total_eps)
            bar_gam = float(np.sqrt(tom * total_gam))
            out[i] = (bar_eps, bar_gam, float(om), float(tom))
    else:
        slack_eps = total_eps - used_eps
        slack_gam = total_gam - used_gam
        if slack_eps <= 0.0 or slack_gam <= 0.0:
            raise RuntimeError("accepted errors exhausted budget")
        for w, i in zip(weights, pending):
            if cfg.setting == "ms":
                bar_eps = float(np.sqrt(w * slack_eps))
            else:
                bar_eps = float(w * slack_eps)
            bar_gam = float(np.sqrt(w * slack_gam))
            out[i] = (bar_eps, bar_gam, float(w), float(w))
    return out


# Adaptive construction =======================================================

def _node_seed(base_seed: int, step: int, index: int) -> int:
    return int(np.random.SeedSequence((base_seed, step, index)).generate_state(1)[0])


def fit_adaptive(snapshots: SnapshotSet, config: FitConfig,
                 geom: XGeometry | None = None,
                 basis: ReducedBasis | None = None):
    """Construct an encoder/decoder pair meeting the configured targets.

    Returns ``(model, trace)``.  The trace is a list of per-step records
    ``{"step", "k", "inputs", "encoder", "learned", "promoted"}``
    documenting which coordinates were reconstructed at each step and
    which were promoted into the encoder.

    The loop follows the budget logic of :func:`update_budgets`: at each
    step every pending coordinate is fitted on its current input set; a
    fit within both its error and Lipschitz bounds is accepted and its
    in-sample predictions become available as inputs for later
    coordinates.  A failing coordinate gains the next coordinate as an
    extra input, and when the next coordinate is itself still pending it
    joins the encoder instead.
    """
    t_start = time.perf_counter()
    if geom is None:
        geom = snapshots.geometry()
    setting = config.setting
    e0 = empirical_zero_error(snapshots, geom, setting)

    if basis is None:
        if setting == "ms":
            basis = empirical_pca(snapshots, geom, center=config.center)
        else:
            basis = greedy_basis(snapshots, geom, center=config.center)
    n_sel = select_truncation(basis, snapshots, geom, setting,
                              config.epsilon, config.resolved_beta)

    if config.n0 is not None:
        if config.n0 > n_sel:
            raise ValueError(f"n0={config.n0} exceeds the selected dimension N={n_sel}")
        n0 = config.n0
    elif config.eps0 is not None:
        profile = residual_profile(basis, snapshots, geom, setting)
        hits = np.nonzero(profile <= config.eps0 * e0)[0]
        n0 = int(hits[0]) if hits.size else n_sel
        n0 = max(min(n0, n_sel), min(1, n_sel))
    else:
        n0 = min(1, n_sel)

    coeffs_all = coefficient_matrix(basis, snapshots.states, geom, n_sel)  # (N, m)
    encoder = list(range(1, n0 + 1))
    pending = set(range(n0 + 1, n_sel + 1))
    input_sets = {i: list(encoder) for i in pending}
    g_values = {j: coeffs_all[j - 1] for j in encoder}
    node_gamma: dict[int, float] = {}

    nodes: list[CoefficientNode] = []
    acc_eps: list[float] = []
    acc_gamma: list[float] = []
    acc_omega: list[float] = []
    acc_tomega: list[float] = []
    trace: list[dict] = []

    k = n0
    step = 0
    while pending:
        step += 1
        if k >= n_sel:
            raise RuntimeError("pending coordinates remain beyond the last basis index")
        bounds = update_budgets(
            BudgetState(tuple(sorted(pending)), tuple(acc_eps), tuple(acc_gamma),
                        tuple(acc_omega), tuple(acc_tomega)),
            config, e0,
        )
        learned: list[tuple] = []
        for i in sorted(pending):
            s_i = input_sets[i]
            x = np.column_stack([g_values[j] for j in s_i])
            y = coeffs_all[i - 1]
            poly, _loo = fit_sparse(
                x, y, kind=config.index_kind, degree=config.degree,
                interaction=config.interaction,
            )
            predictions = poly.evaluate(x)
            resid = y - predictions
            eps_i = float(np.sqrt(np.sum(resid**2))) if setting == "ms" \
                else float(np.max(np.abs(resid)))
            decoded = [j in node_gamma for j in s_i]
            dg = None
            if any(decoded):
                dg = np.array([node_gamma.get(j, np.nan) for j in s_i])
            gamma_i = lipschitz_estimate(
                poly, x, decoded_gamma=dg, pair_budget=config.pair_budget,
                seed=_node_seed(config.seed, step, i),
            )
            bar_eps, bar_gam, omega, tomega = bounds[i]
            if eps_i <= bar_eps and gamma_i <= bar_gam:
                node = CoefficientNode(
                    index=i, input_set=tuple(s_i), poly=poly, eps=eps_i,
                    gamma=gamma_i, omega=omega, tilde_omega=tomega,
                    bound_eps=bar_eps, bound_gamma=bar_gam,
                )
                learned.append((node, predictions))
            elif k + 1 != i:
                input_sets[i].append(k + 1)

        for node, predictions in learned:
            nodes.append(node)
            pending.discard(node.index)
            del input_sets[node.index]
            g_values[node.index] = predictions
            node_gamma[node.index] = node.gamma
            acc_eps.append(node.eps)
            acc_gamma.append(node.gamma)
            acc_omega.append(node.omega)
            acc_tomega.append(node.tilde_omega)

        promoted = None
        if (k + 1) in pending:
            pending.discard(k + 1)
            del input_sets[k + 1]
            encoder.append(k + 1)
            g_values[k + 1] = coeffs_all[k]
            promoted = k + 1

        trace.append({
            "step": step,
            "k": k,
            "inputs": list(range(1, k + 1)),
            "encoder": list(encoder),
            "learned": [node.index for node, _ in learned],
            "promoted": promoted,
        })
        k += 1

    model = CpnModel(
        offset=basis.offset.copy(),
        basis=basis.basis[:, :n_sel].copy(),
        sqrt_weights=geom.sqrt_weights.copy(),
        encoder_indices=tuple(encoder),
        nodes=tuple(nodes),
        setting=setting,
        config=config,
    )
    achieved = evaluate(model, snapshots, geom)
    achieved = replace(achieved, wall_time=time.perf_counter() - t_start)
    model = replace(model, achieved=achieved)
    if achieved.re > config.epsilon:
        raise RuntimeError(
            f"constructed model misses the target: RE={achieved.re:.3e} > {config.epsilon:.3e}"
        )
    return model, trace


# Evaluation ==================================================================

def evaluate(model: CpnModel, snapshots: SnapshotSet,
             geom: XGeometry | None = None) -> Metrics:
    """Relative error of ``decode(encode(.))`` over a snapshot set,
    plus per-coordinate errors of the reconstructed coefficients."""
    t_start = time.perf_counter()
    if geom is None:
        geom = model.geometry()
    states = snapshots.states
    if states.shape[0] != model.dim_state:
        raise ValueError("snapshot dimension does not match the model")

    scaled_w = geom.sqrt_weights[:, None]
    a = encode_matrix(model, states)
    coeffs = _coefficient_dag(model, a)
    recon = model.offset[:, None] + model.basis @ coeffs
    err = np.linalg.norm(scaled_w * (states - recon), axis=0)
    base = np.linalg.norm(scaled_w * states, axis=0)
    if model.setting == "wc":
        re = float(np.max(err) / np.max(base))
    else:
        re = float(np.sqrt(np.sum(err**2) / np.sum(base**2)))

    basis_full = ReducedBasis(model.offset, model.basis, np.zeros(0), "custom")
    true_coeffs = coefficient_matrix(basis_full, states, geom)
    denom = np.sqrt(np.sum(base**2))
    per_coeff = {
        node.index: float(
            np.sqrt(np.sum((true_coeffs[node.index - 1] - coeffs[node.index - 1]) ** 2)) / denom
        )
        for node in model.nodes
    }
    return Metrics(
        re=re,
        per_coefficient=per_coeff,
        n=model.n,
        N=model.N,
        n_comp=model.composition_depth(),
        wall_time=time.perf_counter() - t_start,
    )


def decoder_lipschitz_check(model: CpnModel, states: np.ndarray,
                            pair_budget: int = 500_000, seed: int = 0):
    """Certificate and empirical Lipschitz constant of the decoder.

    Returns ``(certificate, empirical)`` where the certificate is
    ``sqrt(1 + sum gamma_i^2)`` over the stored node estimates and the
    empirical value is the largest ratio of reconstruction distance
    (weighted norm) to encoder-coordinate distance over sampled pairs.
    """
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2 or states.shape[1] < 2:
        raise ValueError("need at least two states")
    cert = model.lipschitz_certificate()
    a = encode_matrix(model, states)
    recon = decode_matrix(model, a)
    scaled = model.sqrt_weights[:, None] * recon
    m = states.shape[1]
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
    chunk = 100_000
    for start in range(0, ii.size, chunk):
        si, sj = ii[start:start + chunk], jj[start:start + chunk]
        num = np.linalg.norm(scaled[:, si] - scaled[:, sj], axis=0)
        den = np.linalg.norm(a[:, si] - a[:, sj], axis=0)
        ok = den >= 1e-13
        if np.any(ok):
            best = max(best, float(np.max(num[ok] / den[ok])))
    return cert, best
