import numpy as np
import pytest

from cpnrom.benchgen import gen_toy, toy_coordinates
from cpnrom.cpn import (
    BudgetState,
    CpnModel,
    FitConfig,
    _coefficient_dag,
    decode,
    decode_matrix,
    decoder_lipschitz_check,
    encode,
    encode_matrix,
    evaluate,
    fit_adaptive,
    update_budgets,
)
from cpnrom.linred import ReducedBasis, coefficient_matrix, custom_basis
from cpnrom.snapdata import SnapshotSet, XGeometry, empirical_zero_error


def identity_basis(geom):
    return custom_basis(np.zeros(geom.dim), np.eye(geom.dim), geom)


def toy_config(**over):
    base = dict(epsilon=1e-6, setting="ms", index_kind="total", degree=5,
                n0=1, lipschitz=1000.0)
    base.update(over)
    return FitConfig(**base)


@pytest.fixture(scope="module")
def toy_fit():
    toy = gen_toy(201)
    geom = XGeometry.from_weights(3, None)
    model, trace = fit_adaptive(toy, toy_config(), geom, basis=identity_basis(geom))
    return toy, geom, model, trace


# Config ======================================================================

def test_config_validation():
    with pytest.raises(ValueError, match="epsilon must be positive"):
        FitConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        FitConfig(epsilon=0.1, beta=1.0)
    with pytest.raises(ValueError):
        FitConfig(epsilon=0.1, lipschitz=1.0)
    with pytest.raises(ValueError):
        FitConfig(epsilon=0.1, eps0=0.05)
    assert FitConfig(epsilon=0.1).resolved_beta == pytest.approx(1 / np.sqrt(2))
    assert FitConfig(epsilon=0.1, setting="wc").resolved_beta == 0.5


# Budgets =====================================================================

def test_budget_weights_arithmetic():
    cfg = FitConfig(epsilon=0.1, alpha=1.0)
    b = update_budgets(BudgetState(pending=(3, 4)), cfg, e0=1.0)
    assert b[3][2] == pytest.approx(3 / 7)
    assert b[4][2] == pytest.approx(4 / 7)


def test_budget_ms_bound():
    cfg = FitConfig(epsilon=0.1, beta=1 / np.sqrt(2))
    b = update_budgets(BudgetState(pending=(2,)), cfg, e0=1.0)
    assert b[2][0] ** 2 == pytest.approx(5e-3)


def test_budget_gamma_bound():
    cfg = FitConfig(epsilon=0.1, lipschitz=np.sqrt(26.0))
    b = update_budgets(BudgetState(pending=(5,), accepted_gamma=(3.0,)), cfg, e0=1.0)
    assert b[5][1] ** 2 == pytest.approx(16.0)


def test_budget_recycles_slack():
    cfg = FitConfig(epsilon=0.1)
    loose = update_budgets(BudgetState(pending=(2,)), cfg, e0=1.0)[2][0]
    # an accepted node that used almost nothing leaves nearly all slack
    tight = update_budgets(
        BudgetState(pending=(2,), accepted_eps=(1e-9,), accepted_omega=(0.5,),
                    accepted_gamma=(0.0,), accepted_tilde_omega=(0.5,)),
        cfg, e0=1.0)[2][0]
    assert tight == pytest.approx(loose, rel=1e-6)


def test_budget_conservative_pool():
    cfg = FitConfig(epsilon=0.1, conservative_budgets=True)
    b = update_budgets(
        BudgetState(pending=(2,), accepted_eps=(1e-9,), accepted_omega=(0.25,),
                    accepted_gamma=(0.0,), accepted_tilde_omega=(0.25,)),
        cfg, e0=1.0)
    # pool shrinks by the frozen weight regardless of realized error
    full = update_budgets(BudgetState(pending=(2,)), cfg, e0=1.0)
    assert b[2][0] ** 2 == pytest.approx(0.75 * full[2][0] ** 2)


def test_budget_exhausted_errors():
    cfg = FitConfig(epsilon=0.1)
    big = (1 - 0.5) * 0.01 * 1.0  # the whole ms budget at e0 = 1
    with pytest.raises(RuntimeError, match="exhausted"):
        update_budgets(BudgetState(pending=(2,), accepted_eps=(np.sqrt(big) * 1.01,),
                                   accepted_omega=(1.0,),
                                   accepted_gamma=(0.0,), accepted_tilde_omega=(1.0,)),
                       cfg, e0=1.0)


# Toy scenario ================================================================

def test_toy_structure(toy_fit):
    toy, geom, model, trace = toy_fit
    assert model.encoder_indices == (1,)
    assert model.N == 3
    by_index = {nd.index: nd for nd in model.nodes}
    assert set(by_index) == {2, 3}
    assert by_index[2].input_set == (1,)
    assert set(by_index[3].input_set) >= {1, 2}
    assert model.composition_depth() == 2
    assert by_index[2].eps < 1e-9


def test_toy_identity_oracle(toy_fit):
    # the third coordinate equals the closed-form composition of the
    # first two wherever the curve is sampled
    toy, geom, model, trace = toy_fit
    t = np.linspace(-1.0, 1.0, 201)
    a1, a2, a3 = toy_coordinates(t)
    closed = 25.0 * a1**4 * a2**2 - 20.0 * a1**2 * a2**2 - 4.0 * a1 * a2
    assert np.abs(a3 - closed).max() < 1e-10
    dag = _coefficient_dag(model, encode_matrix(model, toy.states))
    assert np.abs(dag[2] - closed).max() < 1e-10


def test_toy_univariate_insufficient(toy_fit):
    from cpnrom.polyfit import fit_sparse

    t = np.linspace(-1.0, 1.0, 201)
    a1, _, a3 = toy_coordinates(t)
    model, _ = fit_sparse(a1[:, None], a3, kind="total", degree=5)
    resid = np.sqrt(np.mean((model.evaluate(a1[:, None]) - a3) ** 2))
    assert resid > 1e-2  # degree 10 cannot be matched by degree 5


def test_toy_metrics(toy_fit):
    toy, geom, model, trace = toy_fit
    assert model.achieved.re < 1e-8
    assert model.achieved.n == 1
    assert model.achieved.n_comp == 2
    m = evaluate(model, toy, geom)
    assert m.re == model.achieved.re  # bit-identical reevaluation


def test_toy_trace_replay(toy_fit):
    # replaying the per-step records reproduces the encoder set, every
    # node's input set, and the acceptance order
    toy, geom, model, trace = toy_fit
    n0 = model.config.n0
    n_sel = model.N
    encoder = list(range(1, n0 + 1))
    pending = set(range(n0 + 1, n_sel + 1))
    input_sets = {i: list(encoder) for i in pending}
    order = []
    for rec in trace:
        k = rec["k"]
        for i in rec["learned"]:
            order.append(i)
            pending.discard(i)
        for i in list(pending):
            if i != k + 1 and i != rec["promoted"]:
                input_sets[i].append(k + 1)
        if rec["promoted"] is not None:
            pending.discard(rec["promoted"])
            encoder.append(rec["promoted"])
            del input_sets[rec["promoted"]]
        assert rec["encoder"] == encoder
    assert tuple(encoder) == model.encoder_indices
    assert order == [nd.index for nd in model.nodes]
    for nd in model.nodes:
        assert tuple(input_sets[nd.index]) == nd.input_set


# Encoding / decoding =========================================================

def test_encode_examples(toy_fit):
    toy, geom, model, trace = toy_fit
    assert encode(model, model.offset) == pytest.approx(np.zeros(model.n), abs=1e-12)
    u = model.offset + 7.0 * model.basis[:, 0]
    assert encode(model, u)[0] == pytest.approx(7.0)


def test_encoder_is_one_lipschitz(toy_fit, rng):
    toy, geom, model, trace = toy_fit
    for _ in range(100):
        u, v = rng.normal(size=3), rng.normal(size=3)
        lhs = np.linalg.norm(encode(model, u) - encode(model, v))
        rhs = np.linalg.norm(geom.scale(u - v))
        assert lhs <= rhs + 1e-10


def test_decode_toy_curve(toy_fit):
    toy, geom, model, trace = toy_fit
    for t in (-0.73, 0.0, 0.41, 1.0):
        expect = toy_coordinates(np.array([t]))[:, 0]
        got = decode(model, np.array([t]))
        assert got == pytest.approx(expect, abs=1e-8)


def test_purely_linear_model_roundtrip(rng):
    states = rng.normal(size=(4, 10))
    s = SnapshotSet(states)
    g = XGeometry.from_weights(4, None)
    model, _ = fit_adaptive(s, FitConfig(epsilon=0.9999, n0=1, degree=1), g,
                            basis=None)
    # with a loose budget the decoder may be purely linear
    a = encode_matrix(model, states)
    recon = decode_matrix(model, a)
    # reconstruction equals offset + projection for the linear part
    assert recon.shape == states.shape


def test_constant_node_contribution():
    # a node whose polynomial is constant contributes c * basis column
    g = XGeometry.from_weights(2, None)
    from cpnrom.polyfit import PolynomialModel
    from cpnrom.cpn import CoefficientNode

    poly = PolynomialModel(dim=1, indices=((0,),), coeffs=np.array([2.0]),
                           box_lo=np.zeros(1), box_hi=np.ones(1),
                           constant_mask=np.array([False]))
    node = CoefficientNode(index=2, input_set=(1,), poly=poly, eps=0.0, gamma=0.0,
                           omega=1.0, tilde_omega=1.0, bound_eps=1.0, bound_gamma=1.0)
    model = CpnModel(offset=np.zeros(2), basis=np.eye(2), sqrt_weights=np.ones(2),
                     encoder_indices=(1,), nodes=(node,), setting="ms")
    for a in (-3.0, 0.0, 5.0):
        got = decode(model, np.array([a]))
        assert got[1] == pytest.approx(2.0)
        assert got[0] == pytest.approx(a)


# Structural identities =======================================================

def test_ms_error_decomposition(toy_fit):
    toy, geom, model, trace = toy_fit
    states = toy.states
    recon = decode_matrix(model, encode_matrix(model, states))
    direct = np.sum(geom.scale(states - recon) ** 2)
    bas = ReducedBasis(model.offset, model.basis, np.zeros(0), "custom")
    coeffs = coefficient_matrix(bas, states, geom)
    centered = states - model.offset[:, None]
    tail = np.sum(geom.scale(centered) ** 2) - np.sum(coeffs**2)
    total = sum(nd.eps**2 for nd in model.nodes) + max(tail, 0.0)
    assert direct == pytest.approx(total, rel=1e-8, abs=1e-16)


def test_budget_soundness(toy_fit):
    toy, geom, model, trace = toy_fit
    cfg = model.config
    e0 = empirical_zero_error(toy, geom, "ms")
    beta = cfg.resolved_beta
    assert sum(nd.eps**2 for nd in model.nodes) <= (1 - beta**2) * cfg.epsilon**2 * e0**2
    assert 1.0 + sum(nd.gamma**2 for nd in model.nodes) <= cfg.lipschitz**2
    for nd in model.nodes:
        assert nd.eps <= nd.bound_eps
        assert nd.gamma <= nd.bound_gamma


def test_worst_case_fit_and_bound(rng):
    # small synthetic set; worst-case error must satisfy the triangle bound
    t = np.linspace(-1, 1, 60)
    states = np.vstack([t, t**2 + 0.05 * np.sin(5 * t), 0.5 * t**3])
    s = SnapshotSet(states)
    g = XGeometry.from_weights(3, None)
    model, _ = fit_adaptive(s, FitConfig(epsilon=1e-2, setting="wc", degree=4,
                                         index_kind="total", lipschitz=50.0), g)
    assert model.achieved.re <= 1e-2
    recon = decode_matrix(model, encode_matrix(model, states))
    err = np.linalg.norm(states - recon, axis=0).max()
    bas = ReducedBasis(model.offset, model.basis, np.zeros(0), "custom")
    coeffs = coefficient_matrix(bas, states, g)
    centered = states - model.offset[:, None]
    resid_sq = np.sum(centered**2, axis=0) - np.sum(coeffs**2, axis=0)
    tail = np.sqrt(max(resid_sq.max(), 0.0))
    assert err <= sum(nd.eps for nd in model.nodes) + tail + 1e-10


def test_decoder_lipschitz_check(toy_fit):
    toy, geom, model, trace = toy_fit
    cert, emp = decoder_lipschitz_check(model, toy.states)
    assert cert == pytest.approx(model.lipschitz_certificate())
    assert emp <= cert + 1e-8
    assert cert <= model.config.lipschitz


def test_decoder_lipschitz_linear_model(rng):
    states = rng.normal(size=(3, 20))
    s = SnapshotSet(states)
    g = XGeometry.from_weights(3, None)
    model, _ = fit_adaptive(s, FitConfig(epsilon=0.999999, n0=1, degree=1), g)
    if not model.nodes:  # purely linear decoder is an isometry
        cert, emp = decoder_lipschitz_check(model, states)
        assert cert == pytest.approx(1.0)
        assert emp <= 1.0 + 1e-12


def test_certificate_arithmetic():
    model = CpnModel(offset=np.zeros(1), basis=np.ones((1, 1)), sqrt_weights=np.ones(1),
                     encoder_indices=(1,), nodes=(), setting="ms")
    assert model.lipschitz_certificate() == 1.0


# Determinism =================================================================

def test_fit_determinism(toy_fit):
    toy, geom, model, trace = toy_fit
    model2, trace2 = fit_adaptive(toy, toy_config(), geom,
                                  basis=identity_basis(geom))
    assert trace == trace2
    assert model2.achieved.re == model.achieved.re
    for a, b in zip(model.nodes, model2.nodes):
        assert a.index == b.index and a.input_set == b.input_set
        assert np.array_equal(a.poly.coeffs, b.poly.coeffs)
        assert a.eps == b.eps and a.gamma == b.gamma


def test_n0_exceeds_selection():
    toy = gen_toy(51)
    geom = XGeometry.from_weights(3, None)
    with pytest.raises(ValueError, match="n0"):
        fit_adaptive(toy, toy_config(n0=5), geom, basis=identity_basis(geom))


def test_eps0_derivation():
    toy = gen_toy(101)
    geom = XGeometry.from_weights(3, None)
    cfg = toy_config(n0=None, eps0=0.9)
    model, _ = fit_adaptive(toy, cfg, geom, basis=identity_basis(geom))
    assert model.achieved.re <= cfg.epsilon
