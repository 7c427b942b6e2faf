import numpy as np
import pytest
import scipy.sparse as sp

from seqrefine import tensor as tt
from seqrefine.encoder import ShortTermConfig, encode_interval, normalize_adjacency
from seqrefine.tensor import Tensor, grad_check


def lrelu(x):
    return np.where(x > 0, x, 0.2 * x)


def test_single_edge_normalises_to_one():
    A = normalize_adjacency(sp.csr_matrix(np.array([[1.0]])))
    assert A.toarray()[0, 0] == 1.0


def test_two_neighbours_get_inverse_sqrt_two():
    A = normalize_adjacency(sp.csr_matrix(np.array([[1.0, 1.0]]))).toarray()
    np.testing.assert_allclose(A, [[1 / np.sqrt(2), 1 / np.sqrt(2)]], rtol=1e-15)


def test_empty_interval_normalises_to_zero():
    A = normalize_adjacency(sp.csr_matrix((3, 4)))
    assert A.nnz == 0 and A.shape == (3, 4)


def test_zero_graph_is_identity_per_layer():
    rng = np.random.default_rng(0)
    Eu, Ev = Tensor(rng.normal(size=(3, 4))), Tensor(rng.normal(size=(5, 4)))
    eu, ev = encode_interval(sp.csr_matrix((3, 5)), Eu, Ev, ShortTermConfig(d=4, layers=1))
    np.testing.assert_array_equal(eu.data, Eu.data)
    np.testing.assert_array_equal(ev.data, Ev.data)
    eu, _ = encode_interval(sp.csr_matrix((3, 5)), Eu, Ev, ShortTermConfig(d=4, layers=3))
    np.testing.assert_array_equal(eu.data, np.hstack([Eu.data] * 3))


def test_two_node_message_passing_by_hand():
    adj = normalize_adjacency(sp.csr_matrix(np.array([[1.0]])))
    eu0, ev0 = np.array([[0.5, -1.0]]), np.array([[2.0, 0.3]])
    # layer 1
    eu1 = lrelu(ev0) + eu0
    ev1 = lrelu(eu0) + ev0
    # layer 2
    eu2 = lrelu(ev1) + eu1
    ev2 = lrelu(eu1) + ev1
    got_u, got_v = encode_interval(adj, Tensor(eu0), Tensor(ev0), ShortTermConfig(d=2, layers=2))
    np.testing.assert_allclose(got_u.data, np.hstack([eu1, eu2]), rtol=1e-15)
    np.testing.assert_allclose(got_v.data, np.hstack([ev1, ev2]), rtol=1e-15)


def random_graph(rng, I=5, J=6):
    A = (rng.random((I, J)) < 0.5).astype(float)
    return normalize_adjacency(sp.csr_matrix(A))


@pytest.mark.parametrize("layers", [1, 2, 3])
def test_output_width_is_layers_times_d(layers):
    rng = np.random.default_rng(1)
    eu, ev = encode_interval(random_graph(rng), Tensor(rng.normal(size=(5, 3))), Tensor(rng.normal(size=(6, 3))),
                             ShortTermConfig(d=3, layers=layers))
    assert eu.shape == (5, 3 * layers) and ev.shape == (6, 3 * layers)


def test_eval_mode_is_deterministic_even_with_dropout_configured():
    rng = np.random.default_rng(2)
    adj, Eu, Ev = random_graph(rng), Tensor(rng.normal(size=(5, 4))), Tensor(rng.normal(size=(6, 4)))
    cfg = ShortTermConfig(d=4, edge_dropout=0.5, message_dropout=0.5)
    a = encode_interval(adj, Eu, Ev, cfg, training=False)[0].data
    b = encode_interval(adj, Eu, Ev, cfg, training=False)[0].data
    np.testing.assert_array_equal(a, b)


def test_user_permutation_equivariance():
    rng = np.random.default_rng(3)
    A = (rng.random((5, 6)) < 0.5).astype(float)
    Eu, Ev = rng.normal(size=(5, 4)), rng.normal(size=(6, 4))
    perm = rng.permutation(5)
    cfg = ShortTermConfig(d=4)
    base = encode_interval(normalize_adjacency(sp.csr_matrix(A)), Tensor(Eu), Tensor(Ev), cfg)[0].data
    moved = encode_interval(normalize_adjacency(sp.csr_matrix(A[perm])), Tensor(Eu[perm]), Tensor(Ev), cfg)[0].data
    np.testing.assert_allclose(moved, base[perm], rtol=1e-13)


def test_embedding_gradients_match_finite_differences():
    rng = np.random.default_rng(4)
    adj = random_graph(rng)
    Eu = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    Ev = Tensor(rng.normal(size=(6, 3)), requires_grad=True)
    cfg = ShortTermConfig(d=3, layers=2)

    def f():
        eu, ev = encode_interval(adj, Eu, Ev, cfg)
        return tt.sum(tt.tanh(eu)) + tt.sum(ev * ev)

    assert grad_check(f, [Eu, Ev]) < 1e-4


def test_shape_mismatch_is_reported():
    with pytest.raises(tt.ShapeError):
        encode_interval(sp.csr_matrix((2, 3)), Tensor(np.zeros((2, 4))), Tensor(np.zeros((5, 4))),
                        ShortTermConfig(d=4))


@pytest.mark.parametrize("kwargs", [{"layers": 0}, {"layers": 4}, {"edge_dropout": 1.0}, {"d": 0}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ShortTermConfig(**kwargs)
