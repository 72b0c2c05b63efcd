"""Contextualized token representations from frozen layered embeddings.

Two stages: a learned scalar mix over encoder layers, then windowed
dot-product self-attention with an additive mask that zeroes out all
attention beyond a +/- ``window`` token band. Neither stage has learned
projections.
"""
from __future__ import annotations

import numpy as np

from .autograd import NumericError, Parameter, Tensor, add, matmul, mul, reduce_sum, reshape, softmax, transpose
from .embeddings import LayeredEmbeddings

DEFAULT_WINDOW = 10


def scalar_mix(emb: LayeredEmbeddings, layer_logits: Parameter, gamma: Parameter) -> Tensor:
    """Mix layers: gamma * sum_j softmax(layer_logits)_j * x[:, j, :]."""
    if layer_logits.data.shape != (emb.layers,):
        raise ValueError(
            f"scalar mix has {layer_logits.data.shape[0] if layer_logits.data.ndim == 1 else '?'} "
            f"layer weights but embeddings have {emb.layers} layers"
        )
    if gamma.data.shape != ():
        raise ValueError("gamma must be a scalar parameter")
    weights = softmax(layer_logits, axis=0)  # (L,)
    stacked = Tensor(emb.values)  # (n, L, d), constant leaf
    weighted = mul(stacked, reshape(weights, (1, emb.layers, 1)))
    mixed = reduce_sum(weighted, axis=1)  # (n, d)
    return mul(mixed, gamma)


def mask_attention_with_weights(hidden: Tensor, window: int) -> tuple[Tensor, Tensor]:
    """Windowed self-attention; also returns the attention rows.

    C = softmax(H H^T / sqrt(d) + M) H with M[i, j] = 0 iff |i - j| <
    window, else -inf. The diagonal is always inside the window, so no row
    is fully masked.
    """
    if window < 1:
        raise ValueError("attention window must be >= 1")
    if not np.all(np.isfinite(hidden.data)):
        raise NumericError("mask attention received non-finite inputs")
    n, dim = hidden.shape
    idx = np.arange(n)
    mask = np.where(np.abs(idx[:, None] - idx[None, :]) < window, 0.0, -np.inf)
    assert np.all(np.diag(mask) == 0.0)
    scores = mul(matmul(hidden, transpose(hidden)), Tensor(1.0 / np.sqrt(dim)))
    weights = softmax(add(scores, Tensor(mask)), axis=1)
    return matmul(weights, hidden), weights


def mask_attention(hidden: Tensor, window: int = DEFAULT_WINDOW) -> Tensor:
    attended, _ = mask_attention_with_weights(hidden, window)
    return attended
