"""The end-to-end classifier: encoders + head, in fused or unimodal modes.

Parameters from all submodels live in one flat name -> Tensor dict with
"text."/"img."/"head." prefixes, which is also the serialization order.
"""

from __future__ import annotations

from dataclasses import asdict

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ContractError
from .fusion import FusionConfig, classify_batch, init_fusion
from .image_encoder import ImageEncoderConfig, encode_image, init_image_encoder
from .text_encoder import TextEncoderConfig, encode_text, init_text_encoder
from .textproc import TokenizedReview

MODES = ("text_only", "image_only", "fused")


class ReviewClassifier:
    """Fused or unimodal review classifier over tokenized text + image tensors."""

    def __init__(self, mode: str,
                 text_cfg: TextEncoderConfig | None,
                 image_cfg: ImageEncoderConfig | None,
                 d_hidden: int = 32, dropout_p: float = 0.3,
                 seed: int = 0, dtype=np.float32):
        if mode not in MODES:
            raise ContractError(f"unknown mode {mode!r}, expected one of {MODES}")
        if mode in ("text_only", "fused") and text_cfg is None:
            raise ContractError(f"mode {mode} requires a text encoder config")
        if mode in ("image_only", "fused") and image_cfg is None:
            raise ContractError(f"mode {mode} requires an image encoder config")
        self.mode = mode
        self.text_cfg = text_cfg if mode != "image_only" else None
        self.image_cfg = image_cfg if mode != "text_only" else None
        d_text = self.text_cfg.d_model if self.text_cfg else 0
        d_img = self.image_cfg.d_out if self.image_cfg else 0
        self.fusion_cfg = FusionConfig(d_text=d_text, d_img=d_img,
                                       d_hidden=d_hidden, dropout_p=dropout_p)
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}
        if self.text_cfg:
            for k, v in init_text_encoder(self.text_cfg, rng, dtype).items():
                self.params["text." + k] = v
        if self.image_cfg:
            for k, v in init_image_encoder(self.image_cfg, rng, dtype).items():
                self.params["img." + k] = v
        for k, v in init_fusion(self.fusion_cfg, rng, dtype).items():
            self.params[k] = v

    def _sub(self, prefix: str) -> dict[str, Tensor]:
        n = len(prefix)
        return {k[n:]: v for k, v in self.params.items() if k.startswith(prefix)}

    def encode_batch(self, reviews: list[TokenizedReview] | None,
                     images: Tensor | None, training: bool = False,
                     rng: np.random.Generator | None = None) -> Tensor:
        """Return the B x d_in pre-head representation (encoders only)."""
        feats = None
        if self.text_cfg is not None:
            if reviews is None:
                raise ContractError(f"mode {self.mode} needs tokenized text")
            tp = self._sub("text.")
            rows = [encode_text(tp, self.text_cfg, r, training, rng)
                    for r in reviews]
            feats = ag.stack_rows(rows)
        if self.image_cfg is not None:
            if images is None:
                raise ContractError(f"mode {self.mode} needs image tensors")
            img_feats = encode_image(self._sub("img."), self.image_cfg, images)
            feats = img_feats if feats is None else ag.concat_cols(feats, img_feats)
        return feats

    def forward_batch(self, reviews: list[TokenizedReview] | None,
                      images: Tensor | None, training: bool = False,
                      rng: np.random.Generator | None = None) -> Tensor:
        """Return B x 2 logits for a batch of samples."""
        feats = self.encode_batch(reviews, images, training, rng)
        return classify_batch(self.params, self.fusion_cfg, feats, training, rng)

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def decay_exempt(self, name: str) -> bool:
        """Norm gains/biases and all bias vectors skip weight decay."""
        leaf = name.rsplit(".", 1)[-1]
        return ("norm" in leaf or leaf.startswith(("ln", "b1", "b2"))
                or leaf.startswith("ffn_b"))

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.params.items()}

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        if set(arrays) != set(self.params):
            missing = set(self.params) ^ set(arrays)
            raise ContractError(f"parameter name mismatch: {sorted(missing)[:5]}")
        for k, t in self.params.items():
            if arrays[k].shape != t.data.shape:
                raise ContractError(
                    f"shape mismatch for {k}: {arrays[k].shape} vs {t.data.shape}"
                )
            t.data = arrays[k].astype(t.data.dtype, copy=True)

    def config_dict(self) -> dict:
        return {
            "mode": self.mode,
            "text_cfg": asdict(self.text_cfg) if self.text_cfg else None,
            "image_cfg": asdict(self.image_cfg) if self.image_cfg else None,
            "d_hidden": self.fusion_cfg.d_hidden,
            "dropout_p": self.fusion_cfg.dropout_p,
        }

    @classmethod
    def from_config(cls, cfg: dict, seed: int = 0, dtype=np.float32) -> "ReviewClassifier":
        text_cfg = TextEncoderConfig(**cfg["text_cfg"]) if cfg.get("text_cfg") else None
        image_cfg = (ImageEncoderConfig(**cfg["image_cfg"])
                     if cfg.get("image_cfg") else None)
        return cls(cfg["mode"], text_cfg, image_cfg,
                   d_hidden=cfg.get("d_hidden", 32),
                   dropout_p=cfg.get("dropout_p", 0.3), seed=seed, dtype=dtype)
