"""Adam with decoupled weight decay, the epoch loop, and early stopping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor, cross_entropy
from .bundle import ModelBundle
from .errors import ContractError, ParameterError, TrainingDivergenceError
from .model import ReviewClassifier


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 0.01
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ParameterError(f"lr must be > 0, got {self.lr}")
        if self.patience < 1 or self.max_epochs < 1 or self.batch_size < 1:
            raise ParameterError("patience, max_epochs and batch_size must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ParameterError("beta1/beta2 must be in [0, 1)")


class AdamState:
    """Per-parameter first/second moment buffers plus the shared step count."""

    def __init__(self):
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0


def adam_step(params: dict[str, Tensor], state: AdamState, cfg: TrainConfig,
              decay_exempt=None) -> None:
    """One optimizer step from the gradients currently stored on ``params``.

    Decoupled weight decay shrinks non-exempt parameters before the Adam
    update; bias correction makes the very first step ~ -lr * sign(g).
    """
    state.t += 1
    bc1 = 1.0 - cfg.beta1 ** state.t
    bc2 = 1.0 - cfg.beta2 ** state.t
    for name, p in params.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ContractError(
                f"gradient shape {g.shape} != parameter shape {p.data.shape} for {name}"
            )
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        if cfg.weight_decay and not (decay_exempt and decay_exempt(name)):
            p.data *= (1.0 - cfg.lr * cfg.weight_decay)
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p.data -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps_adam)


def train_epoch(model: ReviewClassifier, dataset, state: AdamState,
                cfg: TrainConfig, epoch: int) -> float:
    """One pass over deterministically shuffled batches; returns mean loss."""
    rng = np.random.default_rng([cfg.seed, epoch, 0xD0])
    total_loss = 0.0
    total_n = 0
    for bi, (reviews, images, labels) in enumerate(
            dataset.batches(cfg.batch_size, cfg.seed, epoch)):
        logits = model.forward_batch(reviews, images, training=True, rng=rng)
        loss = cross_entropy(logits, labels)
        val = loss.item()
        if not math.isfinite(val):
            raise TrainingDivergenceError(
                f"non-finite loss {val} at epoch {epoch}, batch {bi}"
            )
        model.zero_grad()
        loss.backward()
        adam_step(model.params, state, cfg, model.decay_exempt)
        total_loss += val * len(labels)
        total_n += len(labels)
    if total_n == 0:
        raise ContractError("train_epoch got an empty dataset")
    return total_loss / total_n


def evaluate_accuracy(model: ReviewClassifier, dataset, batch_size: int = 64) -> float:
    """Fraction correct in eval mode (dropout off, no graph recording)."""
    correct = 0
    total = 0
    with ag.no_grad():
        for reviews, images, labels in dataset.batches(batch_size, seed=0,
                                                       epoch=0, shuffle=False):
            logits = model.forward_batch(reviews, images, training=False)
            preds = (logits.data[:, 1] > logits.data[:, 0]).astype(int)
            correct += int((preds == np.asarray(labels)).sum())
            total += len(labels)
    if total == 0:
        raise ContractError("evaluate_accuracy got an empty dataset")
    return correct / total


@dataclass
class TrainReport:
    train_losses: list[float] = field(default_factory=list)
    val_accuracies: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based
    stop_reason: str = ""

    def to_dict(self) -> dict:
        return {
            "train_losses": self.train_losses,
            "val_accuracies": self.val_accuracies,
            "best_epoch": self.best_epoch,
            "stop_reason": self.stop_reason,
        }


def fit(model: ReviewClassifier, train_data, val_data, cfg: TrainConfig,
        epoch_fn=None, val_fn=None,
        log=None) -> tuple[TrainReport, dict[str, np.ndarray]]:
    """Train with validation-accuracy early stopping.

    Keeps a copy of the best-so-far parameters; stops after ``patience``
    consecutive epochs without strict improvement, or at max_epochs. The
    model is left holding (and the second return value is) the best-epoch
    parameters, not the last ones. ``epoch_fn``/``val_fn`` exist so tests
    can script the loop.
    """
    state = AdamState()
    if epoch_fn is None:
        epoch_fn = lambda epoch: train_epoch(model, train_data, state, cfg, epoch)
    if val_fn is None:
        val_fn = lambda: evaluate_accuracy(model, val_data)

    report = TrainReport()
    best_acc = -1.0
    best_state: dict[str, np.ndarray] = {
        k: v.copy() for k, v in model.state_arrays().items()
    }
    bad_epochs = 0
    for epoch in range(1, cfg.max_epochs + 1):
        loss = epoch_fn(epoch)
        acc = val_fn()
        report.train_losses.append(loss)
        report.val_accuracies.append(acc)
        if log:
            log(f"epoch {epoch}: train_loss={loss:.4f} val_acc={acc:.4f}")
        if acc > best_acc:
            best_acc = acc
            report.best_epoch = epoch
            best_state = {k: v.copy() for k, v in model.state_arrays().items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                report.stop_reason = "early_stop"
                break
    else:
        report.stop_reason = "max_epochs"
    model.load_state(best_state)
    return report, best_state


def model_to_bundle(model: ReviewClassifier, extra_config: dict | None = None) -> ModelBundle:
    config = {"model": model.config_dict()}
    if extra_config:
        config.update(extra_config)
    return ModelBundle(tensors={k: v.data.astype(np.float32)
                                for k, v in model.params.items()},
                       config=config)


def model_from_bundle(bundle: ModelBundle, dtype=np.float32) -> ReviewClassifier:
    model = ReviewClassifier.from_config(bundle.config["model"], dtype=dtype)
    model.load_state(bundle.tensors)
    return model
