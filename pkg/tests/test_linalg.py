import numpy as np
import pytest
import scipy.sparse as sp

from conftest import dense_laplacian, numeric_grad, random_graph, rel_err
from svga import linalg as la
from svga.graph import gmrf_information_matrix


def test_spmm_identity_and_average():
    b = np.arange(6.0).reshape(3, 2)
    np.testing.assert_array_equal(la.spmm(sp.identity(3, format="csr"), b), b)
    s = sp.csr_matrix([[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_allclose(la.spmm(s, np.array([[1.0], [3.0]])), [[2.0], [2.0]])


def test_spmm_dense_oracle(rng):
    s = sp.random(8, 8, density=0.4, random_state=3, format="csr")
    b = rng.normal(size=(8, 5))
    assert np.max(np.abs(la.spmm(s, b) - s.toarray() @ b)) < 1e-12


def test_shape_errors():
    with pytest.raises(ValueError):
        la.spmm(sp.identity(3, format="csr"), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        la.matmul(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        la.add_bias(np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(ValueError):
        la.trace_quadratic(sp.identity(3, format="csr"), np.zeros((2, 1)))


def test_row_unit_normalize():
    np.testing.assert_allclose(la.row_unit_normalize(np.array([[3.0, 4.0]])), [[0.6, 0.8]])
    np.testing.assert_array_equal(la.row_unit_normalize(np.zeros((1, 2))), [[0.0, 0.0]])


def test_dropout_identity_and_scaling(rng):
    x = rng.normal(size=(5, 4))
    out, mask = la.dropout(x, 0.0, True, rng)
    assert out is x and mask is None
    out, mask = la.dropout(x, 0.5, False, rng)
    assert out is x
    out, mask = la.dropout(np.ones((200, 200)), 0.5, True, rng)
    assert set(np.unique(out)) <= {0.0, 2.0}
    assert abs(out.mean() - 1.0) < 0.02
    with pytest.raises(ValueError):
        la.dropout(x, 1.0, True, rng)


def _check_kernel(forward, backward, x, rng, points=10):
    """Compare the analytic adjoint of ``sum(w * forward(x))`` with finite differences."""
    for _ in range(points):
        x[...] = rng.normal(size=x.shape)
        w = rng.normal(size=forward(x).shape)
        analytic = backward(x, w)
        numeric = numeric_grad(lambda: np.sum(w * forward(x)), x)
        assert rel_err(analytic, numeric) < 1e-4


def test_relu_adjoint(rng):
    x = np.zeros((4, 3))
    for _ in range(10):
        x[...] = rng.normal(size=x.shape)
        x[np.abs(x) < 1e-2] = 0.5  # keep away from the kink
        w = rng.normal(size=x.shape)
        numeric = numeric_grad(lambda: np.sum(w * la.relu(x)), x)
        assert rel_err(la.relu_backward(x, w), numeric) < 1e-6


def test_matmul_adjoint(rng):
    a, b = rng.normal(size=(4, 3)), rng.normal(size=(3, 2))
    for _ in range(10):
        a[...] = rng.normal(size=a.shape)
        b[...] = rng.normal(size=b.shape)
        w = rng.normal(size=(4, 2))
        ga, gb = la.matmul_backward(a, b, w)
        assert rel_err(ga, numeric_grad(lambda: np.sum(w * la.matmul(a, b)), a)) < 1e-4
        assert rel_err(gb, numeric_grad(lambda: np.sum(w * la.matmul(a, b)), b)) < 1e-4


def test_spmm_adjoint(rng):
    s = sp.random(6, 6, density=0.5, random_state=1, format="csr")
    _check_kernel(lambda x: la.spmm(s, x), lambda x, w: la.spmm_backward(s, w), np.zeros((6, 3)), rng)


def test_add_bias_adjoint(rng):
    x = rng.normal(size=(5, 3))
    b = np.zeros(3)
    for _ in range(10):
        b[...] = rng.normal(size=3)
        w = rng.normal(size=(5, 3))
        gx, gb = la.add_bias_backward(w)
        assert rel_err(gb, numeric_grad(lambda: np.sum(w * la.add_bias(x, b)), b)) < 1e-4
        assert rel_err(gx, numeric_grad(lambda: np.sum(w * la.add_bias(x, b)), x)) < 1e-4


def test_dropout_adjoint(rng):
    x = rng.normal(size=(6, 4))
    _, mask = la.dropout(x, 0.5, True, rng)
    fwd = lambda t: t * mask  # noqa: E731
    _check_kernel(fwd, lambda t, w: la.dropout_backward(mask, w), x, rng)


def test_row_unit_normalize_adjoint(rng):
    _check_kernel(la.row_unit_normalize, la.row_unit_normalize_backward, np.zeros((5, 4)), rng)


def test_sigmoid_adjoint(rng):
    _check_kernel(la.sigmoid, lambda x, w: la.sigmoid_backward(la.sigmoid(x), w), np.zeros((4, 4)), rng)


def test_sigmoid_extremes():
    out = la.sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    np.testing.assert_allclose(out, [0.0, 0.5, 1.0])


def test_log_softmax_adjoint(rng):
    _check_kernel(
        la.log_softmax_rows,
        lambda x, w: la.log_softmax_rows_backward(la.log_softmax_rows(x), w),
        np.zeros((4, 5)),
        rng,
    )


def test_trace_quadratic_values(rng):
    k2 = sp.csr_matrix([[1.0, -1.0], [-1.0, 1.0]])
    assert la.trace_quadratic(k2, np.zeros((2, 3))) == 0.0
    assert la.trace_quadratic(k2, np.array([[1.0], [1.0]])) == 0.0
    g = random_graph(rng, 6, 0.5)
    k = gmrf_information_matrix(g)
    e = rng.normal(size=(6, 3))
    dense = np.trace(e.T @ dense_laplacian(g) @ e)
    assert abs(la.trace_quadratic(k, e) - dense) < 1e-10


def test_trace_quadratic_adjoint(rng):
    k = gmrf_information_matrix(random_graph(rng, 7, 0.4))
    e = np.zeros((7, 3))
    for _ in range(10):
        e[...] = rng.normal(size=e.shape)
        numeric = numeric_grad(lambda: la.trace_quadratic(k, e), e)
        assert rel_err(la.trace_quadratic_backward(k, e), numeric) < 1e-4


def test_cholesky_closed_forms(rng):
    l, jitter = la.cholesky(np.eye(3))
    np.testing.assert_array_equal(l, np.eye(3))
    assert jitter == 0.0
    l, _ = la.cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
    np.testing.assert_allclose(l, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-15)
    a = rng.normal(size=(16, 16))
    m = a @ a.T + 16 * np.eye(16)
    l, _ = la.cholesky(m)
    assert np.max(np.abs(l @ l.T - m)) < 1e-10


def test_cholesky_jitter_escalation():
    # rank-deficient PSD matrix: plain factorization fails, a tiny jitter fixes it
    v = np.array([[1.0], [1.0]])
    l, jitter = la.cholesky(v @ v.T)
    assert 1e-10 <= jitter <= 1e-4
    np.testing.assert_allclose(l @ l.T, v @ v.T + jitter * np.eye(2), atol=1e-12)
    with pytest.raises(la.NumericalError):
        la.cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_logdet_gram_values():
    assert la.logdet_gram(np.zeros((4, 3)), 0.5) == 0.0
    assert la.logdet_gram(np.array([[1.0]]), 1.0) == pytest.approx(np.log(2.0), abs=1e-15)
    with pytest.raises(ValueError):
        la.logdet_gram(np.ones((2, 2)), 0.0)


@pytest.mark.parametrize("n,d", [(1, 1), (5, 3), (20, 4), (64, 8), (10, 16)])
def test_logdet_gram_determinant_lemma(rng, n, d):
    e = rng.normal(size=(n, d))
    beta = float(rng.uniform(0.1, 2.0))
    dense = np.linalg.slogdet(beta * np.eye(n) + e @ e.T)[1]
    assert abs(dense - (la.logdet_gram(e, beta) + n * np.log(beta))) < 1e-8


def test_logdet_gram_adjoint(rng):
    e = np.zeros((6, 3))
    for _ in range(10):
        e[...] = rng.normal(size=e.shape)
        beta = float(rng.uniform(0.2, 2.0))
        numeric = numeric_grad(lambda: la.logdet_gram(e, beta), e)
        assert rel_err(la.logdet_gram_backward(e, beta), numeric) < 1e-4
        value, grad = la.logdet_gram_and_grad(e, beta)
        assert value == la.logdet_gram(e, beta)
        np.testing.assert_allclose(grad, la.logdet_gram_backward(e, beta))
