import numpy as np
import pytest

from cpnrom.snapdata import (
    SnapshotSet,
    XGeometry,
    empirical_zero_error,
    load_snapshots,
    save_snapshots,
    x_inner,
    x_norm,
)


def geom(w):
    return XGeometry.from_weights(len(w), np.asarray(w, float)) if w is not None else None


def test_x_inner_examples():
    g = XGeometry.from_weights(2, None)
    assert x_inner(g, np.array([3.0, 4.0]), np.array([3.0, 4.0])) == pytest.approx(25.0)
    g2 = XGeometry.from_weights(2, np.array([2.0, 1.0]))
    assert x_inner(g2, np.array([1.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(2.0)
    assert x_inner(g2, np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_x_inner_symmetry_and_positivity(rng):
    for _ in range(20):
        d = int(rng.integers(1, 8))
        w = rng.uniform(0.1, 3.0, d)
        g = XGeometry.from_weights(d, w)
        u, v = rng.normal(size=d), rng.normal(size=d)
        assert x_inner(g, u, v) == pytest.approx(x_inner(g, v, u), rel=1e-14)
        if np.any(u != 0):
            assert x_inner(g, u, u) > 0


def test_x_inner_dimension_mismatch():
    g = XGeometry.from_weights(2, None)
    with pytest.raises(ValueError):
        x_inner(g, np.ones(3), np.ones(2))


def test_zero_error_examples():
    s = SnapshotSet(np.array([[3.0], [4.0]]))
    g = s.geometry()
    assert empirical_zero_error(s, g, "ms") == pytest.approx(5.0)
    s2 = SnapshotSet(np.array([[3.0, 0.0], [4.0, 1.0]]))
    assert empirical_zero_error(s2, s2.geometry(), "wc") == pytest.approx(5.0)
    s3 = SnapshotSet(np.eye(2))
    assert empirical_zero_error(s3, s3.geometry(), "ms") == pytest.approx(np.sqrt(2.0))


def test_zero_error_matches_inner_products(rng):
    states = rng.normal(size=(5, 7))
    w = rng.uniform(0.5, 2.0, 5)
    s = SnapshotSet(states, w)
    g = s.geometry()
    direct = sum(x_inner(g, states[:, k], states[:, k]) for k in range(7))
    assert empirical_zero_error(s, g, "ms") ** 2 == pytest.approx(direct, rel=1e-12)


def test_invariants_on_construction():
    with pytest.raises(ValueError):
        SnapshotSet(np.array([[np.nan, 1.0]]))
    with pytest.raises(ValueError):
        SnapshotSet(np.ones((2, 2)), norm_weights=np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        SnapshotSet(np.ones(3))  # not 2-d


def test_binary_round_trip(tmp_path, rng):
    states = rng.normal(size=(4, 6))
    w = rng.uniform(0.5, 2.0, 4)
    s = SnapshotSet(states, w)
    path = tmp_path / "snap.snp"
    save_snapshots(s, path)
    back = load_snapshots(path)
    assert np.array_equal(back.states, s.states)  # bit exact
    assert np.array_equal(back.norm_weights, w)


def test_binary_header_layout(tmp_path):
    s = SnapshotSet(np.arange(6.0).reshape(2, 3, order="F"))
    path = tmp_path / "snap.snp"
    save_snapshots(s, path)
    raw = path.read_bytes()
    assert raw[:4] == b"SNP1"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:16], "little") == 2  # D
    assert int.from_bytes(raw[16:24], "little") == 3  # m
    assert raw[24] == 0  # no weights
    payload = np.frombuffer(raw[25:], dtype="<f8")
    # column-major: first two doubles are column 0
    assert np.array_equal(payload[:2], s.states[:, 0])


def test_truncated_payload_errors(tmp_path):
    s = SnapshotSet(np.ones((2, 3)))
    path = tmp_path / "snap.snp"
    save_snapshots(s, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="shorter than D\\*m\\*8"):
        load_snapshots(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.snp"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic"):
        load_snapshots(path)


def test_csv_round_trip(tmp_path):
    s = SnapshotSet(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
    path = tmp_path / "snap.csv"
    save_snapshots(s, path, fmt="csv")
    back = load_snapshots(path, fmt="csv")
    assert back.states.shape == (2, 3)
    assert np.allclose(back.states, s.states, rtol=0, atol=0)


def test_csv_single_row(tmp_path):
    path = tmp_path / "row.csv"
    path.write_text("1.5,2.5,3.5\n")
    back = load_snapshots(path, fmt="csv")
    assert back.states.shape == (1, 3)


def test_norm_helper():
    g = XGeometry.from_weights(2, np.array([4.0, 1.0]))
    assert x_norm(g, np.array([1.0, 0.0])) == pytest.approx(2.0)
