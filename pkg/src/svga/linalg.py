"""Numeric kernels with hand-written adjoints.

The SVGA computation graph is fixed, so instead of a tape every kernel comes
as a forward function plus a ``*_backward`` that maps the gradient of the
output to gradients of the inputs. Forward functions are pure; the caller
keeps whatever the backward needs.

Set ``SVGA_DEBUG=1`` to check every kernel output for NaN/Inf.
"""
from __future__ import annotations

import os

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

DEBUG = os.environ.get("SVGA_DEBUG", "") not in ("", "0")

NORM_EPS = 1e-12
JITTER_START = 1e-10
JITTER_MAX = 1e-4


class NumericalError(ArithmeticError):
    """A kernel produced non-finite values or a factorization failed."""


def _checked(x, name):
    if DEBUG and not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite values in output of {name}")
    return x


def _require(cond, msg):
    if not cond:
        raise ValueError(msg)


def spmm(s: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    _require(s.shape[1] == b.shape[0], f"spmm shape mismatch {s.shape} x {b.shape}")
    return _checked(np.asarray(s @ b), "spmm")


def spmm_backward(s: sp.spmatrix, grad: np.ndarray) -> np.ndarray:
    return np.asarray(s.T @ grad)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require(a.shape[1] == b.shape[0], f"matmul shape mismatch {a.shape} x {b.shape}")
    return _checked(a @ b, "matmul")


def matmul_backward(a, b, grad):
    """Returns ``(d/da, d/db)``."""
    return grad @ b.T, a.T @ grad


def add_bias(x: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require(x.shape[1] == b.shape[-1], f"bias of length {b.shape[-1]} for {x.shape[1]} columns")
    return x + b


def add_bias_backward(grad):
    return grad, grad.sum(axis=0)


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, grad):
    return grad * (x > 0)


def dropout(x, p: float, training: bool, rng: np.random.Generator | None):
    """Inverted dropout. Returns ``(out, mask)``; ``mask`` is None when inactive."""
    _require(0.0 <= p < 1.0, f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return x * mask, mask


def dropout_backward(mask, grad):
    return grad if mask is None else grad * mask


def row_unit_normalize(x, eps: float = NORM_EPS):
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return _checked(x / np.maximum(norms, eps), "row_unit_normalize")


def row_unit_normalize_backward(x, grad, eps: float = NORM_EPS):
    # J = (I - z_hat z_hat^T) / max(|z|, eps) per row
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    scale = np.maximum(norms, eps)
    zhat = x / scale
    proj = np.sum(zhat * grad, axis=1, keepdims=True)
    small = norms < eps
    return np.where(small, grad, grad - zhat * proj) / scale


def sigmoid(x):
    # two-branch form avoids overflow in exp
    out = np.empty_like(x, dtype=np.result_type(x, np.float32))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(out, grad):
    return grad * out * (1.0 - out)


def log_softmax_rows(x):
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def log_softmax_rows_backward(out, grad):
    return grad - np.exp(out) * grad.sum(axis=1, keepdims=True)


def trace_quadratic(k: sp.spmatrix, e: np.ndarray) -> float:
    """``tr(E^T K E)`` touching only the stored entries of ``K``."""
    _require(k.shape[0] == k.shape[1] == e.shape[0], f"trace_quadratic shape mismatch {k.shape}, {e.shape}")
    return float(np.sum(e * np.asarray(k @ e)))


def trace_quadratic_backward(k: sp.spmatrix, e: np.ndarray, grad: float = 1.0):
    # K is symmetric, so d/dE tr(E^T K E) = 2 K E
    return 2.0 * grad * np.asarray(k @ e)


def cholesky(m: np.ndarray):
    """Lower Cholesky factor of symmetric ``m`` with jitter escalation.

    Tries ``m`` as given, then adds ``1e-10 * I`` and grows the jitter
    tenfold up to ``1e-4``. Returns ``(L, jitter)``.
    """
    _require(m.ndim == 2 and m.shape[0] == m.shape[1], f"cholesky needs a square matrix, got {m.shape}")
    jitter = 0.0
    eye = np.eye(m.shape[0], dtype=m.dtype)
    while True:
        try:
            return la.cholesky(m + jitter * eye, lower=True, check_finite=True), jitter
        except (la.LinAlgError, ValueError):
            jitter = JITTER_START if jitter == 0.0 else jitter * 10
            if jitter > JITTER_MAX * (1 + 1e-9):
                raise NumericalError("matrix is not positive definite even with maximum jitter") from None


def _gram_factor(e, beta):
    _require(beta > 0, f"beta must be positive, got {beta}")
    d = e.shape[1]
    m = np.eye(d, dtype=e.dtype) + (e.T @ e) / beta
    return cholesky(m)[0]


def logdet_gram(e: np.ndarray, beta: float) -> float:
    """``log|I_d + E^T E / beta|`` through a d x d Cholesky factor."""
    chol = _gram_factor(e, beta)
    return float(2.0 * np.sum(np.log(np.diag(chol))))


def logdet_gram_backward(e: np.ndarray, beta: float, grad: float = 1.0):
    """``2/beta * E (I + E^T E / beta)^-1`` scaled by ``grad``."""
    chol = _gram_factor(e, beta)
    m_inv_et = la.cho_solve((chol, True), e.T)
    return (2.0 * grad / beta) * m_inv_et.T


def logdet_gram_and_grad(e: np.ndarray, beta: float):
    """Value and gradient of :func:`logdet_gram` from a single factorization."""
    chol = _gram_factor(e, beta)
    value = float(2.0 * np.sum(np.log(np.diag(chol))))
    return value, (2.0 / beta) * la.cho_solve((chol, True), e.T).T
