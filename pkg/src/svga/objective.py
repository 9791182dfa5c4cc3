"""Loss terms and their gradients.

All functions return ``(value, grad...)`` with values shaped as losses to
minimize. Reductions are sums over nodes unless ``reduction="mean"``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import linalg as la
from . import model as mdl

FEATURE_KINDS = ("binary", "continuous", "categorical")


@dataclass
class LossBreakdown:
    l_x: float
    l_y: float
    l_reg: float
    total: float


@dataclass
class Batch:
    """Training targets: observed feature rows and (optionally) observed labels."""

    feat_nodes: np.ndarray
    x: np.ndarray
    kind: str
    alpha_ber: float = 0.5
    label_nodes: np.ndarray | None = None
    labels: np.ndarray | None = None


def _rows(a, mask):
    if mask is None:
        return a
    return a[mask]


def _softplus(t):
    return np.logaddexp(0.0, t)


def zero_ratio(x) -> float:
    """Fraction of zero entries, the positive-class weight of the binary loss."""
    x = np.asarray(x)
    return float(np.count_nonzero(x == 0) / x.size)


def loss_features(xhat, x, mask=None, kind="binary", alpha_ber=0.5, reduction="sum"):
    """Feature reconstruction loss over the rows selected by ``mask``.

    ``binary``: class-weighted BCE on ``sigmoid(xhat)`` with weight
    ``alpha_ber`` on ones and ``1 - alpha_ber`` on zeros. ``continuous``:
    squared error. ``categorical``: cross-entropy against one-hot rows.
    Returns ``(loss, grad)`` with ``grad`` shaped like ``xhat``.
    """
    xh = _rows(xhat, mask)
    xt = _rows(x, mask)
    if xh.shape[0] == 0:
        raise ValueError("feature mask selects no nodes")
    if kind == "binary":
        if not (0.0 < alpha_ber < 1.0):
            raise ValueError(f"alpha_ber must be in (0, 1), got {alpha_ber}")
        if not np.all((xt == 0) | (xt == 1)):
            raise ValueError("binary loss needs 0/1 features")
        # log sigmoid(t) = -softplus(-t); log(1 - sigmoid(t)) = -softplus(t)
        loss = np.sum(alpha_ber * xt * _softplus(-xh) + (1 - alpha_ber) * (1 - xt) * _softplus(xh))
        p = la.sigmoid(xh)
        g = -alpha_ber * xt * (1 - p) + (1 - alpha_ber) * (1 - xt) * p
    elif kind == "continuous":
        diff = xh - xt
        loss = np.sum(diff**2)
        g = 2.0 * diff
    elif kind == "categorical":
        if np.any(xt < 0) or not np.allclose(xt.sum(axis=1), 1.0):
            raise ValueError("categorical loss needs one-hot rows")
        logp = la.log_softmax_rows(xh)
        loss = -np.sum(xt * logp)
        g = np.exp(logp) * xt.sum(axis=1, keepdims=True) - xt
    else:
        raise ValueError(f"unknown feature kind {kind!r}")
    if reduction == "mean":
        loss, g = loss / xh.shape[0], g / xh.shape[0]
    if mask is None:
        return float(loss), g
    full = np.zeros_like(xhat)
    full[mask] = g
    return float(loss), full


def loss_labels(yhat, labels, mask=None, reduction="sum"):
    """Softmax cross-entropy on the labelled rows; zero when none are labelled."""
    labels = np.asarray(labels)
    if mask is not None:
        idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask)
    else:
        idx = np.arange(yhat.shape[0])
    grad = np.zeros_like(yhat)
    if len(idx) == 0:
        return 0.0, grad
    y = labels[idx] if len(labels) == yhat.shape[0] else labels
    c = yhat.shape[1]
    if np.any(y < 0) or np.any(y >= c):
        raise ValueError(f"label outside [0, {c})")
    logp = la.log_softmax_rows(yhat[idx])
    loss = -np.sum(logp[np.arange(len(idx)), y])
    g = np.exp(logp)
    g[np.arange(len(idx)), y] -= 1.0
    if reduction == "mean":
        loss, g = loss / len(idx), g / len(idx)
    grad[idx] = g
    return float(loss), grad


def loss_gmrf(e, prior: sp.spmatrix, alpha_logdet=0.5, beta=1.0):
    """``tr(E^T K E) - alpha * log|I + E^T E / beta|`` and its gradient in E."""
    if alpha_logdet <= 0:
        raise ValueError("alpha_logdet must be positive")
    tr = la.trace_quadratic(prior, e)
    logdet, g_logdet = la.logdet_gram_and_grad(e, beta)
    value = tr - alpha_logdet * logdet
    grad = la.trace_quadratic_backward(prior, e) - alpha_logdet * g_logdet
    return value, grad


def kl_structured(u, v, prior: sp.spmatrix, beta=1.0, d=None):
    """KL divergence of ``N(U, beta I + V V^T)`` from the GMRF prior, minus a constant.

    Computes ``0.5 (tr(U^T K U) + d (tr(K Sigma) - log|Sigma|))`` with
    ``tr(K Sigma) = beta tr(K) + tr(V^T K V)`` and
    ``log|Sigma| = log|I_r + V^T V / beta| + n log beta``.
    The dropped constant is ``-0.5 d (n + log|K|)``; it needs a nonsingular
    ``K`` to be finite, so an exact comparison uses ``K + jitter I``.
    Returns ``(value, dU, dV)``.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    n = u.shape[0]
    d = u.shape[1] if d is None else d
    tr_u = la.trace_quadratic(prior, u)
    tr_v = la.trace_quadratic(prior, v)
    tr_k = float(prior.diagonal().sum())
    logdet, g_logdet = la.logdet_gram_and_grad(v, beta)
    log_sigma = logdet + n * np.log(beta)
    value = 0.5 * (tr_u + d * (beta * tr_k + tr_v - log_sigma))
    g_u = 0.5 * la.trace_quadratic_backward(prior, u)
    g_v = 0.5 * d * (la.trace_quadratic_backward(prior, v) - g_logdet)
    return value, g_u, g_v


def total_objective(params, state: mdl.ForwardState, batch: Batch, adj, prior, config):
    """Loss breakdown and gradients for every parameter tensor.

    ``config`` supplies ``variant`` (det | noreg | stoch), ``lam``,
    ``alpha_logdet``, ``beta`` and ``reduction``. The stochastic variant adds
    the structured KL term without a weight.
    """
    reduction = getattr(config, "reduction", "sum")
    z = state.z
    grads = {}
    g_z = np.zeros_like(z)

    zf = z[batch.feat_nodes]
    xhat = mdl.decode_features(params, zf)
    l_x, g_xhat = loss_features(xhat, batch.x, None, batch.kind, batch.alpha_ber, reduction)
    grads["Wx"], grads["bx"], g_zf = mdl.decode_backward(zf, params["Wx"], g_xhat)
    g_z[batch.feat_nodes] += g_zf

    l_y = 0.0
    grads["Wy"] = np.zeros_like(params["Wy"])
    grads["by"] = np.zeros_like(params["by"])
    if batch.label_nodes is not None and len(batch.label_nodes) and params["Wy"].shape[0]:
        zl = z[batch.label_nodes]
        yhat = mdl.decode_labels(params, zl)
        l_y, g_yhat = loss_labels(yhat, batch.labels, None, reduction)
        grads["Wy"], grads["by"], g_zl = mdl.decode_backward(zl, params["Wy"], g_yhat)
        g_z[batch.label_nodes] += g_zl

    if config.variant == "stoch":
        l_reg, g_u_kl, g_v_kl = kl_structured(state.e, state.v, prior, config.beta)
        g_u, g_v = mdl.sample_backward(state, g_z)
        grads.update(mdl.encode_backward(params, adj, state, g_u + g_u_kl, g_v + g_v_kl))
        total = l_x + l_y + l_reg
    elif config.variant == "det":
        l_reg, g_e = loss_gmrf(state.e, prior, config.alpha_logdet, config.beta)
        if config.lam != 0.0:
            g_z = g_z + config.lam * g_e
        grads.update(mdl.encode_backward(params, adj, state, g_z))
        total = l_x + l_y + config.lam * l_reg
    elif config.variant == "noreg":
        l_reg = 0.0
        grads.update(mdl.encode_backward(params, adj, state, g_z))
        total = l_x + l_y
    else:
        raise ValueError(f"unknown variant {config.variant!r}")
    return LossBreakdown(l_x=l_x, l_y=l_y, l_reg=l_reg, total=total), grads
