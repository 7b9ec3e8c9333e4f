"""Finite-difference oracle suite behind the ``gradcheck`` subcommand.

Each component check builds a tiny instance of one layer type in float64 and
compares autodiff gradients against central differences (threshold 1e-6).
The final check runs the full fused model in float32 against a float64
finite-difference twin (threshold 1e-3, since f32 forward noise dominates).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor, grad_check
from .fusion import FusionConfig, classify_batch, init_fusion
from .image_encoder import ImageEncoderConfig, init_image_encoder, residual_block
from .model import ReviewClassifier
from .text_encoder import TextEncoderConfig, encoder_block, init_text_encoder
from .textproc import TokenizedReview

F64_THRESHOLD = 1e-6
F32_THRESHOLD = 1e-3


@dataclass
class CheckResult:
    name: str
    error: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.error < self.threshold


def _weighted_sum(t: Tensor, rng: np.random.Generator) -> Tensor:
    w = Tensor(rng.normal(size=t.data.shape))
    return ag.tsum(ag.mul(t, w))


def _check_matmul(rng):
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    w = rng.normal(size=(3, 5))
    return grad_check(lambda: ag.tsum(ag.mul(ag.matmul(a, b), Tensor(w))),
                      [a, b])


def _check_conv2d(rng):
    x = Tensor(rng.normal(size=(2, 6, 6)), requires_grad=True)
    k = Tensor(rng.normal(size=(3, 2, 3, 3)), requires_grad=True)
    return grad_check(lambda: _weighted_sum(ag.conv2d(x, k, stride=2, pad=1),
                                            np.random.default_rng(0)),
                      [x, k])


def _check_layer_norm(rng):
    x = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
    g = Tensor(rng.normal(size=6), requires_grad=True)
    b = Tensor(rng.normal(size=6), requires_grad=True)
    w = rng.normal(size=(4, 6))
    return grad_check(
        lambda: ag.tsum(ag.mul(ag.layer_norm(x, g, b), Tensor(w))), [x, g, b])


def _check_attention_block(rng):
    cfg = TextEncoderConfig(vocab_size=11, d_model=8, n_layers=1, n_heads=2,
                            d_ff=12, max_len=5, dropout_p=0.0)
    p = init_text_encoder(cfg, rng, dtype=np.float64)
    x = Tensor(rng.normal(size=(5, 8)), requires_grad=True)
    mask = np.array([1, 1, 1, 1, 0])  # one PAD position
    w = rng.normal(size=(5, 8))
    block_params = [v for k, v in p.items() if k.startswith("l0.")]
    return grad_check(
        lambda: ag.tsum(ag.mul(encoder_block(x, mask, p, 0, cfg), Tensor(w))),
        block_params + [x])


def _check_residual_block(rng):
    cfg = ImageEncoderConfig(input_side=5, stem_channels=2,
                             stages=[(1, 3, 2)], d_out=3)
    p = init_image_encoder(cfg, rng, dtype=np.float64)
    p["s0.b0.norm2_g"].data[:] = 0.6  # off zero so both convs participate
    x = Tensor(rng.normal(size=(2, 5, 5)), requires_grad=True)
    w = rng.normal(size=(3, 3, 3))
    block_params = [v for k, v in p.items() if k.startswith("s0.b0.")]
    return grad_check(
        lambda: ag.tsum(ag.mul(residual_block(x, p, "s0.b0.", stride=2),
                               Tensor(w))),
        block_params + [x])


def _check_embedding(rng):
    table = Tensor(rng.normal(size=(7, 4)), requires_grad=True)
    ids = [0, 3, 3, 6]  # repeated id exercises scatter-add
    w = rng.normal(size=(4, 4))
    return grad_check(
        lambda: ag.tsum(ag.mul(ag.embedding_lookup(table, ids), Tensor(w))),
        [table])


def _check_cross_entropy(rng):
    logits = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    return grad_check(lambda: ag.cross_entropy(logits, [0, 1, 1, 0]), [logits])


def _check_fusion_head(rng):
    cfg = FusionConfig(d_text=4, d_img=3, d_hidden=5, dropout_p=0.0)
    p = init_fusion(cfg, rng, dtype=np.float64)
    x = Tensor(rng.normal(size=(3, 7)), requires_grad=True)
    return grad_check(
        lambda: ag.cross_entropy(classify_batch(p, cfg, x), [0, 1, 1]),
        list(p.values()) + [x])


def _full_model_pair(seed):
    text_cfg = TextEncoderConfig(vocab_size=12, d_model=8, n_layers=1,
                                 n_heads=2, d_ff=12, max_len=6, dropout_p=0.0)
    image_cfg = ImageEncoderConfig(input_side=8, stem_channels=3,
                                   stages=[(1, 3, 1), (1, 4, 2)], d_out=4)
    m32 = ReviewClassifier("fused", text_cfg, image_cfg, d_hidden=6,
                           dropout_p=0.0, seed=seed, dtype=np.float32)
    m64 = ReviewClassifier("fused", text_cfg, image_cfg, d_hidden=6,
                           dropout_p=0.0, seed=seed, dtype=np.float64)
    # move the zero-init branch gains off the ReLU kink: finite differences
    # are only valid away from non-smooth points
    for m in (m32, m64):
        for name, t in m.params.items():
            if name.endswith("norm2_g"):
                t.data[:] = 0.5
    return m32, m64


def _check_full_model_f32(rng, corrupt=False):
    m32, m64 = _full_model_pair(int(rng.integers(0, 2 ** 31)))
    reviews = [
        TokenizedReview(ids=[2, 5, 7, 4, 3, 0], mask=[1, 1, 1, 1, 1, 0],
                        true_length=3),
        TokenizedReview(ids=[2, 9, 3, 0, 0, 0], mask=[1, 1, 1, 0, 0, 0],
                        true_length=1),
    ]
    imgs = rng.normal(size=(2, 3, 8, 8))
    labels = [1, 0]

    def f32():
        logits = m32.forward_batch(reviews, Tensor(imgs.astype(np.float32)))
        return ag.cross_entropy(logits, labels)

    def f64():
        logits = m64.forward_batch(reviews, Tensor(imgs))
        loss = ag.cross_entropy(logits, labels)
        return ag.scale(loss, 1.01) if corrupt else loss

    # float32 noise floor: parameters whose true gradient is ~0 keep a
    # ~1e-10 rounding residue that is meaningless against the f64 oracle
    return grad_check(f32, m32.params.values(),
                      fd_f=f64, fd_params=m64.params.values(), floor=1e-5)


_F64_CHECKS = [
    ("matmul", _check_matmul),
    ("conv2d", _check_conv2d),
    ("layer_norm", _check_layer_norm),
    ("attention_block", _check_attention_block),
    ("residual_block", _check_residual_block),
    ("embedding", _check_embedding),
    ("cross_entropy", _check_cross_entropy),
    ("fusion_head", _check_fusion_head),
]


def run_gradcheck(seed: int = 0, corrupt: bool = False) -> list[CheckResult]:
    """Run every component check plus the full-model check; never raises on
    threshold breaches — callers inspect ``CheckResult.passed``.

    ``corrupt`` is a test hook that deliberately mismatches the full-model
    finite-difference twin, to prove the harness can fail.
    """
    def best_of(fn, idx, threshold, **kw):
        # the contract holds at random points *away from kinks*; a draw can
        # land with a ReLU pre-activation inside the FD step, so retry on a
        # fresh substream before declaring failure
        best = np.inf
        for attempt in range(3):
            rng = np.random.default_rng([seed, idx, attempt])
            best = min(best, float(fn(rng, **kw)))
            if best < threshold:
                break
        return best

    results = []
    for i, (name, fn) in enumerate(_F64_CHECKS):
        results.append(CheckResult(name, best_of(fn, i, F64_THRESHOLD),
                                   F64_THRESHOLD))
    results.append(CheckResult(
        "full_model_f32",
        best_of(_check_full_model_f32, len(_F64_CHECKS), F32_THRESHOLD,
                corrupt=corrupt),
        F32_THRESHOLD))
    return results
