"""GCN encoder on identity node inputs and linear feature/label decoders.

Parameters live in a plain ``dict`` of numpy arrays keyed by name, in the
fixed order of :data:`TENSOR_ORDER`. The stochastic variant adds a second
encoder head whose tensors carry a ``_sigma`` suffix.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linalg as la

TENSOR_ORDER = ("W1", "b1", "W2", "b2", "Wx", "bx", "Wy", "by")
SIGMA_ORDER = ("W1_sigma", "b1_sigma", "W2_sigma", "b2_sigma")
CHECKPOINT_MAGIC = b"SVGA1"

ModelParams = dict


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape, dtype=np.float64):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype, copy=False)


def init_params(n: int, d: int, m: int, c: int, variant: str = "det", seed=0, dtype=np.float64) -> ModelParams:
    """Glorot-uniform weights and zero biases.

    ``seed`` may be an int or a ``numpy.random.Generator``. With ``c == 0``
    the label decoder is created empty.
    """
    if min(n, d, m) <= 0 or c < 0:
        raise ValueError(f"dimensions must be positive, got n={n} d={d} m={m} c={c}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = {
        "W1": glorot_uniform(rng, n, d, (n, d), dtype),
        "b1": np.zeros(d, dtype),
        "W2": glorot_uniform(rng, d, d, (d, d), dtype),
        "b2": np.zeros(d, dtype),
        "Wx": glorot_uniform(rng, d, m, (m, d), dtype),
        "bx": np.zeros(m, dtype),
        "Wy": glorot_uniform(rng, d, c, (c, d), dtype) if c else np.zeros((0, d), dtype),
        "by": np.zeros(c, dtype),
    }
    if variant == "stoch":
        params["W1_sigma"] = glorot_uniform(rng, n, d, (n, d), dtype)
        params["b1_sigma"] = np.zeros(d, dtype)
        params["W2_sigma"] = glorot_uniform(rng, d, d, (d, d), dtype)
        params["b2_sigma"] = np.zeros(d, dtype)
    return params


@dataclass
class ForwardState:
    """Encoder output plus what the reverse pass needs.

    ``e`` is E for the deterministic model and U for the stochastic one, and
    ``z`` is the latent matrix fed to the decoders (``z is e`` when
    deterministic).
    """

    e: np.ndarray
    z: np.ndarray
    v: np.ndarray | None = None
    cache: dict = field(default_factory=dict, repr=False)


def _head(params, adj, dropout, unit_norm, training, rng, suffix=""):
    w1, b1 = params["W1" + suffix], params["b1" + suffix]
    w2, b2 = params["W2" + suffix], params["b2" + suffix]
    # identity input: A_hat @ I @ W1 == A_hat @ W1
    p1 = la.add_bias(la.spmm(adj, w1), b1)
    h = la.relu(p1)
    hd, mask = la.dropout(h, dropout, training, rng)
    q = la.matmul(hd, w2)
    p2 = la.add_bias(la.spmm(adj, q), b2)
    out = la.row_unit_normalize(p2) if unit_norm else p2
    if not np.all(np.isfinite(out)):
        raise la.NumericalError("encoder produced non-finite embeddings")
    return out, dict(p1=p1, hd=hd, mask=mask, p2=p2, unit_norm=unit_norm)


def _head_backward(params, adj, cache, grad, suffix=""):
    if cache["unit_norm"]:
        grad = la.row_unit_normalize_backward(cache["p2"], grad)
    g_q, g_b2 = la.add_bias_backward(grad)
    g_q = la.spmm_backward(adj, g_q)
    g_hd, g_w2 = la.matmul_backward(cache["hd"], params["W2" + suffix], g_q)
    g_h = la.dropout_backward(cache["mask"], g_hd)
    g_p1 = la.relu_backward(cache["p1"], g_h)
    g_aw1, g_b1 = la.add_bias_backward(g_p1)
    return {
        "W1" + suffix: la.spmm_backward(adj, g_aw1),
        "b1" + suffix: g_b1,
        "W2" + suffix: g_w2,
        "b2" + suffix: g_b2,
    }


def encode(params, adj: sp.spmatrix, config, training: bool = False, rng=None) -> ForwardState:
    """``E = unitnorm(A_hat dropout(relu(A_hat W1 + b1)) W2 + b2)``.

    ``config`` needs ``dropout`` and ``unit_norm`` attributes.
    """
    e, cache = _head(params, adj, config.dropout, config.unit_norm, training, rng)
    return ForwardState(e=e, z=e, cache={"mu": cache})


def encode_stochastic(params, adj, config, training: bool = False, rng=None, sample_rng=None) -> ForwardState:
    """Two encoder heads and a reparametrized sample ``Z = U + sqrt(beta) M1 + V M2``.

    ``V`` keeps the first ``config.r`` columns of the second head and is
    never unit-normalized. Dropout draws come from ``rng``; ``M1`` and ``M2``
    from ``sample_rng`` (defaults to ``rng``).
    """
    beta = config.beta
    if beta <= 0:
        raise ValueError("beta must be positive")
    u, cache_mu = _head(params, adj, config.dropout, config.unit_norm, training, rng)
    d = u.shape[1]
    r = config.r or d
    if r > d:
        raise ValueError(f"rank r={r} exceeds latent size d={d}")
    v_full, cache_sigma = _head(params, adj, config.dropout, False, training, rng, "_sigma")
    v = v_full[:, :r]
    sample_rng = rng if sample_rng is None else sample_rng
    m1 = sample_rng.standard_normal(u.shape).astype(u.dtype, copy=False)
    m2 = sample_rng.standard_normal((r, d)).astype(u.dtype, copy=False)
    z = u + np.sqrt(beta) * m1 + v @ m2
    return ForwardState(e=u, z=z, v=v, cache={"mu": cache_mu, "sigma": cache_sigma, "m2": m2, "r": r})


def encode_backward(params, adj, state: ForwardState, grad_e, grad_v=None) -> dict:
    """Gradients of the encoder parameters given dL/dE (or dL/dU and dL/dV)."""
    grads = _head_backward(params, adj, state.cache["mu"], grad_e)
    if "sigma" in state.cache:
        g_full = np.zeros_like(state.cache["sigma"]["p2"])
        if grad_v is not None:
            g_full[:, : state.cache["r"]] = grad_v
        grads.update(_head_backward(params, adj, state.cache["sigma"], g_full, "_sigma"))
    return grads


def sample_backward(state: ForwardState, grad_z):
    """Split dL/dZ of the reparametrized sample into (dL/dU, dL/dV)."""
    return grad_z, grad_z @ state.cache["m2"].T


def decode_features(params, z):
    """Raw feature logits ``Z Wx^T + bx``."""
    return la.add_bias(la.matmul(z, params["Wx"].T), params["bx"])


def decode_labels(params, z):
    return la.add_bias(la.matmul(z, params["Wy"].T), params["by"])


def decode_backward(z, w, grad_out):
    """Returns ``(dW, db, dZ)`` for an affine decoder ``Z W^T + b``."""
    return grad_out.T @ z, grad_out.sum(axis=0), grad_out @ w


def save_checkpoint(params: ModelParams, path) -> None:
    """Write all tensors as ``SVGA1`` followed by (name, rows, cols, float64 LE data) records."""
    names = [k for k in TENSOR_ORDER + SIGMA_ORDER if k in params]
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        for name in names:
            arr = np.asarray(params[name], dtype="<f8")
            rows, cols = (1, arr.shape[0]) if arr.ndim == 1 else arr.shape
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<QQ", rows, cols))
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not an SVGA checkpoint")
    pos = len(CHECKPOINT_MAGIC)
    params = {}
    while pos < len(data):
        (name_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        rows, cols = struct.unpack_from("<QQ", data, pos)
        pos += 16
        count = rows * cols
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=pos).astype(np.float64)
        pos += 8 * count
        params[name] = arr if name.startswith("b") else arr.reshape(rows, cols)
    return params
