"""Small residual CNN with global average pooling.

Basic two-conv blocks (3x3 / 3x3) with per-channel spatial normalization
instead of batch norm, so evaluation is fully deterministic. The last norm
gain of every residual branch starts at zero, making each block an identity
map at initialization. Stride-2 blocks and channel changes use a 1x1
projection shortcut.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import DimensionError, ParameterError


@dataclass
class ImageEncoderConfig:
    input_side: int = 32
    stem_channels: int = 16
    # (blocks, channels, stride of the stage's first block)
    stages: list[tuple[int, int, int]] = field(
        default_factory=lambda: [(2, 16, 1), (2, 32, 2), (2, 64, 2)])
    d_out: int = 64

    def __post_init__(self):
        self.stages = [tuple(s) for s in self.stages]
        for blocks, channels, stride in self.stages:
            if stride not in (1, 2):
                raise ParameterError(f"stage stride must be 1 or 2, got {stride}")
            if blocks < 1 or channels < 1:
                raise ParameterError("stage blocks/channels must be positive")
        if self.stages[-1][1] != self.d_out:
            raise ParameterError(
                f"final stage channels {self.stages[-1][1]} must equal d_out {self.d_out}"
            )


def paper_scale_image_config() -> ImageEncoderConfig:
    """ResNet-50-shaped contract: 224 input, 2048-d pooled output."""
    return ImageEncoderConfig(input_side=224, stem_channels=64,
                              stages=[(2, 256, 1), (2, 512, 2), (2, 1024, 2),
                                      (2, 2048, 2)],
                              d_out=2048)


def _he_conv(rng: np.random.Generator, c_out: int, c_in: int, k: int, dtype) -> np.ndarray:
    std = math.sqrt(2.0 / (c_in * k * k))
    return rng.normal(0.0, std, size=(c_out, c_in, k, k)).astype(dtype)


def init_image_encoder(cfg: ImageEncoderConfig, rng: np.random.Generator,
                       dtype=np.float32) -> dict[str, Tensor]:
    """He-normal conv kernels; unit norm gains except zero final branch gains."""
    p: dict[str, Tensor] = {}

    def param(name, arr):
        p[name] = Tensor(arr, requires_grad=True, dtype=dtype)

    param("stem.conv", _he_conv(rng, cfg.stem_channels, 3, 3, dtype))
    param("stem.norm_g", np.ones(cfg.stem_channels))
    param("stem.norm_b", np.zeros(cfg.stem_channels))
    c_in = cfg.stem_channels
    for si, (blocks, channels, stride) in enumerate(cfg.stages):
        for bi in range(blocks):
            pre = f"s{si}.b{bi}."
            blk_stride = stride if bi == 0 else 1
            param(pre + "conv1", _he_conv(rng, channels, c_in, 3, dtype))
            param(pre + "norm1_g", np.ones(channels))
            param(pre + "norm1_b", np.zeros(channels))
            param(pre + "conv2", _he_conv(rng, channels, channels, 3, dtype))
            # zero gain: the residual branch starts as a no-op
            param(pre + "norm2_g", np.zeros(channels))
            param(pre + "norm2_b", np.zeros(channels))
            if blk_stride != 1 or channels != c_in:
                param(pre + "proj", _he_conv(rng, channels, c_in, 1, dtype))
            c_in = channels
    return p


def residual_block(x: Tensor, params: dict[str, Tensor], prefix: str,
                   stride: int = 1) -> Tensor:
    """conv3x3 -> norm -> relu -> conv3x3 -> norm, plus (projected) shortcut, relu."""
    h = ag.conv2d(x, params[prefix + "conv1"], stride=stride, pad=1)
    h = ag.relu(ag.channel_norm(h, params[prefix + "norm1_g"], params[prefix + "norm1_b"]))
    h = ag.conv2d(h, params[prefix + "conv2"], stride=1, pad=1)
    h = ag.channel_norm(h, params[prefix + "norm2_g"], params[prefix + "norm2_b"])
    if prefix + "proj" in params:
        shortcut = ag.conv2d(x, params[prefix + "proj"], stride=stride, pad=0)
    else:
        shortcut = x
    return ag.relu(ag.add(h, shortcut))


def encode_image(params: dict[str, Tensor], cfg: ImageEncoderConfig,
                 img: Tensor) -> Tensor:
    """Normalized image (3 x S x S, or batched B x 3 x S x S) -> pooled d_out vector."""
    side = img.data.shape[-1]
    if img.data.shape[-2:] != (cfg.input_side, cfg.input_side):
        raise DimensionError(
            f"input side {img.data.shape[-2:]} != configured {cfg.input_side}"
        )
    if side != img.data.shape[-2]:
        raise DimensionError("input must be square")
    x = ag.conv2d(img, params["stem.conv"], stride=1, pad=1)
    x = ag.relu(ag.channel_norm(x, params["stem.norm_g"], params["stem.norm_b"]))
    for si, (blocks, channels, stride) in enumerate(cfg.stages):
        for bi in range(blocks):
            x = residual_block(x, params, f"s{si}.b{bi}.",
                               stride=stride if bi == 0 else 1)
    return ag.global_avg_pool(x)
