"""Concatenation fusion and the binary classification head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import DimensionError, ParameterError
from .text_encoder import _xavier


@dataclass
class FusionConfig:
    d_text: int
    d_img: int
    d_hidden: int = 32
    dropout_p: float = 0.3
    n_classes: int = 2

    def __post_init__(self):
        if self.d_text < 0 or self.d_img < 0 or self.d_text + self.d_img < 1:
            raise ParameterError("fused input dimension must be positive")
        if self.d_hidden < 1 or self.n_classes != 2:
            raise ParameterError("d_hidden must be positive and n_classes 2")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ParameterError(f"dropout_p must be in [0, 1), got {self.dropout_p}")

    @property
    def d_in(self) -> int:
        return self.d_text + self.d_img


def paper_scale_fusion_config() -> FusionConfig:
    return FusionConfig(d_text=768, d_img=2048, d_hidden=512, dropout_p=0.3)


def init_fusion(cfg: FusionConfig, rng: np.random.Generator,
                dtype=np.float32) -> dict[str, Tensor]:
    """Scaled-uniform weights, zero biases."""
    return {
        "head.w1": Tensor(_xavier(rng, cfg.d_in, cfg.d_hidden, dtype),
                          requires_grad=True),
        "head.b1": Tensor(np.zeros(cfg.d_hidden), requires_grad=True, dtype=dtype),
        "head.w2": Tensor(_xavier(rng, cfg.d_hidden, cfg.n_classes, dtype),
                          requires_grad=True),
        "head.b2": Tensor(np.zeros(cfg.n_classes), requires_grad=True, dtype=dtype),
    }


def fuse(text_vec: Tensor, img_vec: Tensor, cfg: FusionConfig) -> Tensor:
    """Concatenate text features then image features (fixed order)."""
    if text_vec.data.shape != (cfg.d_text,) or img_vec.data.shape != (cfg.d_img,):
        raise DimensionError(
            f"fuse: got {text_vec.data.shape} + {img_vec.data.shape}, "
            f"expected ({cfg.d_text},) + ({cfg.d_img},)"
        )
    return ag.concat(text_vec, img_vec)


def classify_batch(params: dict[str, Tensor], cfg: FusionConfig, fused: Tensor,
                   training: bool = False,
                   rng: np.random.Generator | None = None) -> Tensor:
    """B x d_in fused features -> B x 2 logits (linear, ReLU, dropout, linear)."""
    if fused.data.ndim != 2 or fused.data.shape[1] != cfg.d_in:
        raise DimensionError(
            f"classify: fused shape {fused.data.shape}, expected (B, {cfg.d_in})"
        )
    hidden = ag.relu(ag.add_bias(ag.matmul(fused, params["head.w1"]),
                                 params["head.b1"]))
    hidden = ag.dropout(hidden, cfg.dropout_p, training, rng)
    return ag.add_bias(ag.matmul(hidden, params["head.w2"]), params["head.b2"])


def classify(params: dict[str, Tensor], cfg: FusionConfig, fused: Tensor,
             training: bool = False,
             rng: np.random.Generator | None = None) -> Tensor:
    """Single-sample variant: length d_in vector -> length-2 logits."""
    if fused.data.shape != (cfg.d_in,):
        raise DimensionError(
            f"classify: fused length {fused.data.shape}, expected ({cfg.d_in},)"
        )
    batched = ag.reshape(fused, (1, cfg.d_in))
    return ag.take_row(classify_batch(params, cfg, batched, training, rng), 0)


def predict_label(logits) -> int:
    """Argmax over the two logits; exact tie goes to class 0 (fake)."""
    arr = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    if arr.shape != (2,):
        raise DimensionError(f"predict_label expects 2 logits, got shape {arr.shape}")
    return 1 if arr[1] > arr[0] else 0
