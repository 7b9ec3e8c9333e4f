"""Small transformer encoder with [CLS] pooling.

Post-layer-norm blocks (attention + residual + LN, then FFN + residual + LN),
learned positional embeddings, additive -1e9 attention mask on padded
positions. The row at position 0 ([CLS]) is the review embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import DimensionError, ParameterError
from .textproc import TokenizedReview

MASK_NEG = -1e9


@dataclass
class TextEncoderConfig:
    vocab_size: int
    d_model: int = 32
    n_layers: int = 2
    n_heads: int = 2
    d_ff: int = 64
    max_len: int = 16
    dropout_p: float = 0.1

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ParameterError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if min(self.vocab_size, self.d_model, self.n_layers, self.n_heads,
               self.d_ff, self.max_len) < 1:
            raise ParameterError("all text encoder extents must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ParameterError(f"dropout_p must be in [0, 1), got {self.dropout_p}")


def paper_scale_text_config(vocab_size: int) -> TextEncoderConfig:
    """BERT-base-shaped preset (768/12/12/3072, 128 tokens)."""
    return TextEncoderConfig(vocab_size=vocab_size, d_model=768, n_layers=12,
                             n_heads=12, d_ff=3072, max_len=128, dropout_p=0.1)


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)


def init_text_encoder(cfg: TextEncoderConfig, rng: np.random.Generator,
                      dtype=np.float32) -> dict[str, Tensor]:
    """Scaled-uniform linear weights, normal(0, 0.02) embeddings, unit LN gains."""
    d, ff = cfg.d_model, cfg.d_ff
    p: dict[str, Tensor] = {}

    def param(name, arr):
        p[name] = Tensor(arr, requires_grad=True, dtype=dtype)

    param("tok_emb", rng.normal(0.0, 0.02, size=(cfg.vocab_size, d)))
    param("pos_emb", rng.normal(0.0, 0.02, size=(cfg.max_len, d)))
    for i in range(cfg.n_layers):
        for proj in ("wq", "wk", "wv", "wo"):
            param(f"l{i}.{proj}", _xavier(rng, d, d, dtype))
        param(f"l{i}.ffn_w1", _xavier(rng, d, ff, dtype))
        param(f"l{i}.ffn_b1", np.zeros(ff))
        param(f"l{i}.ffn_w2", _xavier(rng, ff, d, dtype))
        param(f"l{i}.ffn_b2", np.zeros(d))
        param(f"l{i}.ln1_g", np.ones(d))
        param(f"l{i}.ln1_b", np.zeros(d))
        param(f"l{i}.ln2_g", np.ones(d))
        param(f"l{i}.ln2_b", np.zeros(d))
    return p


def encoder_block(x: Tensor, mask, params: dict[str, Tensor], layer: int,
                  cfg: TextEncoderConfig, training: bool = False,
                  rng: np.random.Generator | None = None) -> Tensor:
    """One post-LN transformer block over an L x d_model sequence."""
    seq_len, d = x.data.shape
    if d != cfg.d_model:
        raise DimensionError(f"block input width {d} != d_model {cfg.d_model}")
    dh = cfg.d_model // cfg.n_heads
    pre = f"l{layer}."

    q = ag.matmul(x, params[pre + "wq"])
    k = ag.matmul(x, params[pre + "wk"])
    v = ag.matmul(x, params[pre + "wv"])

    mask_arr = np.asarray(mask, dtype=x.data.dtype)
    # additive bias on key positions: masked columns get -1e9 before softmax
    bias = np.broadcast_to((1.0 - mask_arr) * MASK_NEG, (seq_len, seq_len)).astype(x.data.dtype)

    head_ctx = None
    for h in range(cfg.n_heads):
        lo, hi = h * dh, (h + 1) * dh
        qh = ag.slice_cols(q, lo, hi)
        kh = ag.slice_cols(k, lo, hi)
        vh = ag.slice_cols(v, lo, hi)
        scores = ag.scale(ag.matmul(qh, ag.transpose(kh)), 1.0 / math.sqrt(dh))
        attn = ag.softmax(ag.add_const(scores, bias))
        ctx = ag.matmul(attn, vh)
        head_ctx = ctx if head_ctx is None else ag.concat_cols(head_ctx, ctx)

    attn_out = ag.matmul(head_ctx, params[pre + "wo"])
    attn_out = ag.dropout(attn_out, cfg.dropout_p, training, rng)
    y = ag.layer_norm(ag.add(x, attn_out), params[pre + "ln1_g"], params[pre + "ln1_b"])

    hidden = ag.relu(ag.add_bias(ag.matmul(y, params[pre + "ffn_w1"]),
                                 params[pre + "ffn_b1"]))
    ffn_out = ag.add_bias(ag.matmul(hidden, params[pre + "ffn_w2"]),
                          params[pre + "ffn_b2"])
    ffn_out = ag.dropout(ffn_out, cfg.dropout_p, training, rng)
    return ag.layer_norm(ag.add(y, ffn_out), params[pre + "ln2_g"], params[pre + "ln2_b"])


def encode_text(params: dict[str, Tensor], cfg: TextEncoderConfig,
                review: TokenizedReview, training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
    """Embed, run all blocks, return the [CLS]-position row (length d_model)."""
    if len(review.ids) != cfg.max_len:
        raise DimensionError(
            f"review length {len(review.ids)} != configured max_len {cfg.max_len}"
        )
    x = ag.add(ag.embedding_lookup(params["tok_emb"], review.ids), params["pos_emb"])
    for i in range(cfg.n_layers):
        x = encoder_block(x, review.mask, params, i, cfg, training, rng)
    return ag.take_row(x, 0)
