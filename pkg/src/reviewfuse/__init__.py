"""reviewfuse: multimodal fake-review classification built from scratch.

Text is encoded by a small transformer ([CLS] pooling), images by a small
residual CNN (global average pooling); the two embeddings are concatenated
and classified by a two-layer head. Everything runs on a numpy-backed
reverse-mode autodiff core, trained with Adam + decoupled weight decay and
validation-accuracy early stopping, on a calibrated synthetic corpus.
"""

from .autograd import Tensor, grad_check, no_grad

__all__ = ["Tensor", "grad_check", "no_grad"]

__version__ = "0.1.0"
