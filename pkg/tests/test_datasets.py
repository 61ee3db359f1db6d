import math

import numpy as np
import pytest
from scipy.optimize import linprog

from scedae.core import derive_rng, pairwise_sq_dists
from scedae.datasets import (
    Dataset,
    LiftingTransform,
    gen_chainlink,
    gen_gaussian_classes,
    gen_lsun,
    gen_tetra,
    lift,
    lift_dataset,
    load_binary,
    load_csv,
    load_matrix,
    make_lifting,
    preprocess,
    rescale_unit,
    save_binary,
    save_csv,
)


def linearly_separable(x, y):
    # feasibility of y_i (w . x_i + b) >= 1
    s = np.where(y == 0, -1.0, 1.0)
    a_ub = -s[:, None] * np.hstack([x, np.ones((len(x), 1))])
    res = linprog(np.zeros(x.shape[1] + 1), A_ub=a_ub, b_ub=-np.ones(len(x)),
                  bounds=[(None, None)] * (x.shape[1] + 1), method="highs")
    return res.status == 0


def knn_vote(x, y, k=10):
    d = pairwise_sq_dists(x, x)
    np.fill_diagonal(d, np.inf)
    nn = np.argsort(d, axis=1, kind="stable")[:, :k]
    return np.array([np.bincount(y[row], minlength=y.max() + 1).argmax() for row in nn])


def test_shapes_and_cluster_counts():
    for gen, shape, k in ((gen_tetra, (400, 3), 4), (gen_chainlink, (1000, 3), 2), (gen_lsun, (400, 2), 3)):
        for seed in (0, 1):
            ds = gen(seed)
            assert ds.x.shape == shape and ds.k_true == k
            assert sorted(np.unique(ds.labels)) == list(range(k))
    g = gen_gaussian_classes(0)
    assert g.x.shape == (2000, 3) and np.bincount(g.labels).tolist() == [200] * 10


def test_generators_deterministic_and_seed_sensitive():
    a, b, c = gen_lsun(3), gen_lsun(3), gen_lsun(4)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.x, c.x)


def test_chainlink_not_linearly_separable():
    ds = gen_chainlink(0)
    assert not linearly_separable(ds.x, ds.labels)
    # the oracle itself does accept a separable case
    assert linearly_separable(np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([0, 1]))


def test_tetra_vertices_are_regular():
    ds = gen_tetra(0)
    means = np.array([ds.x[ds.labels == j].mean(axis=0) for j in range(4)])
    d = np.sqrt(pairwise_sq_dists(means, means))[np.triu_indices(4, 1)]
    assert d.max() - d.min() < 0.2 and abs(d.mean() - math.sqrt(8)) < 0.15


def test_lift_scalar_oracle():
    w = np.array([[1.0, -2.0], [0.5, 1.0]])
    u = np.array([[2.0, -1.0], [0.0, 3.0], [-1.0, 1.0]])
    h = np.array([[0.3, -0.4]])
    sig = lambda t: 1 / (1 + math.exp(-t))
    inner = [sig(w[a, 0] * 0.3 + w[a, 1] * -0.4) for a in range(2)]
    stack = [sig(sum(u[b, a] * inner[a] for a in range(2))) for b in range(3)]
    np.testing.assert_allclose(lift(h, LiftingTransform(w, u, "sigmoid_stack"))[0], stack, rtol=1e-14)
    np.testing.assert_allclose(lift(h, LiftingTransform(w, u, "sigmoid_squared"))[0],
                               [sig(v) ** 2 for v in inner], rtol=1e-14)
    np.testing.assert_allclose(lift(h, LiftingTransform(w, u, "tan_sigmoid"))[0],
                               [math.tan(v) for v in inner], rtol=1e-14)
    zero = lift(np.zeros((1, 2)), LiftingTransform(w, u, "sigmoid_stack"))[0]
    np.testing.assert_allclose(zero, [sig(0.5 * u[b].sum()) for b in range(3)], rtol=1e-14)
    with pytest.raises(ValueError):
        lift(np.zeros((1, 3)), LiftingTransform(w, u))


def test_lifted_shapes_range_and_neighbourhoods():
    ds = gen_tetra(0)
    for kind, dim in (("sigmoid_stack", 100), ("sigmoid_squared", 10), ("tan_sigmoid", 10)):
        up = lift_dataset(ds, kind, 0)
        assert up.x.shape == (400, dim)
        if kind == "sigmoid_stack":
            assert up.x.min() > 0 and up.x.max() < 1
        agree = (knn_vote(ds.x, ds.labels) == knn_vote(up.x, ds.labels)).mean()
        assert agree >= 0.9, kind
    with pytest.raises(ValueError):
        make_lifting(5, "sigmoid_stack", derive_rng(0))


def test_rescale_and_preprocess():
    np.testing.assert_array_equal(rescale_unit(np.array([[0, 255]]), 255), [[0.0, 1.0]])
    np.testing.assert_array_equal(rescale_unit(np.array([[0, 100]]), 100), [[0.0, 1.0]])
    m = np.array([[0.2, 3.0]])
    np.testing.assert_array_equal(rescale_unit(m, 1), m)
    with pytest.raises(ValueError):
        rescale_unit(m, 0)
    out = preprocess(np.array([[3.0, 4.0], [0.0, 0.0]]))
    np.testing.assert_allclose(out, [[0.6, 0.8], [0.0, 0.0]])


def test_binary_round_trip_and_errors(tmp_path):
    x = np.random.default_rng(0).standard_normal((7, 3))
    save_binary(x, tmp_path / "m.bin")
    back = load_binary(tmp_path / "m.bin")
    assert back.x.tobytes() == x.tobytes() and back.labels is None
    ds = Dataset("d", x, np.array([0, 1, 2, 0, 1, 2, 0]))
    save_binary(ds, tmp_path / "d.bin")
    np.testing.assert_array_equal(load_matrix(tmp_path / "d.bin").labels, ds.labels)
    data = (tmp_path / "d.bin").read_bytes()
    (tmp_path / "trunc.bin").write_bytes(data[:-1])
    with pytest.raises(ValueError, match="bytes"):
        load_binary(tmp_path / "trunc.bin")
    bad = bytearray(data)
    bad[21:29] = np.array([np.nan]).tobytes()
    (tmp_path / "nan.bin").write_bytes(bytes(bad))
    with pytest.raises(ValueError, match="row 0, column 0"):
        load_binary(tmp_path / "nan.bin")


def test_csv_round_trip_and_errors(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x0,x1,label\n0.5,1.5,0\n2,3,1\n")
    ds = load_csv(p)
    np.testing.assert_array_equal(ds.x, [[0.5, 1.5], [2.0, 3.0]])
    np.testing.assert_array_equal(ds.labels, [0, 1])
    p.write_text("x0,x1,label\n0.5,1.5,0\n2,3\n")
    with pytest.raises(ValueError, match="row 3"):
        load_csv(p)
    p.write_text("x0,x1\n0.5,abc\n")
    with pytest.raises(ValueError, match="row 2, column x1"):
        load_csv(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        load_csv(p)
    src = gen_lsun(0)
    save_csv(src, tmp_path / "l.csv")
    back = load_matrix(tmp_path / "l.csv")
    assert back.x.tobytes() == src.x.tobytes()
    np.testing.assert_array_equal(back.labels, src.labels)
