"""Two-stage training (loaders, then classifier) and evaluation."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from ._validation import check_positive_int
from .data import Dataset, stratified_indices
from .exceptions import ContractError
from .model import (
    EncodedBatch,
    ModelSpec,
    TrainableParams,
    batch_loss_and_gradients,
    cross_entropy,
    encode,
    forward_batch,
    init_params,
)
from .optim import AdamState, adam_step

__all__ = ["AdamState", "Metrics", "Stage", "TrainConfig", "adam_step", "evaluate", "fit", "fit_loaders",
           "metrics_from_predictions", "write_history_csv"]

log = logging.getLogger(__name__)


class Stage(str, Enum):
    LOADER = "loader"
    CLASSIFIER = "classifier"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    lr: float = 0.01
    seed: int = 0
    stage: Stage = Stage.CLASSIFIER
    validation_fraction: float = 0.2

    def __post_init__(self):
        check_positive_int(self.epochs, "epochs")
        check_positive_int(self.batch_size, "batch_size")
        object.__setattr__(self, "stage", Stage(self.stage))
        if not 0 <= self.validation_fraction < 1:
            raise ContractError("validation_fraction must be in [0, 1)")


@dataclass
class Metrics:
    accuracy: float
    per_class_accuracy: np.ndarray
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    confusion: Optional[np.ndarray] = None  # rows: true class, cols: predicted
    class_counts: Optional[np.ndarray] = None
    val_loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    val_accuracy_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    best_epoch: Optional[int] = None
    loss: Optional[float] = None

    @property
    def best_val_loss_history(self) -> np.ndarray:
        return np.minimum.accumulate(self.val_loss_history) if len(self.val_loss_history) else self.val_loss_history


def metrics_from_predictions(y_true, y_pred, n_classes: int, loss=None) -> Metrics:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.size == 0:
        raise ContractError("cannot score an empty dataset")
    if y_true.shape != y_pred.shape:
        raise ContractError("label and prediction counts differ")
    if y_true.min() < 0 or y_true.max() >= n_classes:
        raise ContractError(f"labels fall outside the model's {n_classes} classes")
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(confusion, (y_true, y_pred), 1)
    counts = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(counts > 0, np.diag(confusion) / np.maximum(counts, 1), np.nan)
    accuracy = float(np.trace(confusion) / counts.sum())
    return Metrics(accuracy, per_class, confusion=confusion, class_counts=counts, loss=loss)


def _as_xy(dataset):
    if isinstance(dataset, Dataset):
        return dataset.X, dataset.y
    X, y = dataset
    return np.asarray(X, dtype=float), np.asarray(y, dtype=int)


def evaluate(model: ModelSpec, params: TrainableParams, dataset, encoded: Optional[EncodedBatch] = None) -> Metrics:
    """Exact-expectation predictions scored against the labels."""
    if isinstance(dataset, Dataset) and len(dataset) == 0:
        raise ContractError("cannot evaluate on an empty dataset")
    X, y = _as_xy(dataset)
    if len(y) == 0:
        raise ContractError("cannot evaluate on an empty dataset")
    if y.min() < 0 or y.max() >= model.n_classes:
        raise ContractError(f"dataset labels fall outside the model's {model.n_classes} classes")
    probs = forward_batch(model, encoded if encoded is not None else encode(model, X), params)
    loss = float(cross_entropy(probs, y).mean())
    return metrics_from_predictions(y, probs.argmax(axis=1), model.n_classes, loss=loss)


def fit_loaders(model: ModelSpec, dataset) -> EncodedBatch:
    """Loader stage: train (AAE/BAE) or bind (PAE) the loading segment of every image."""
    X, _ = _as_xy(dataset)
    return encode(model, X)


def _validation_indices(y, fraction, seed):
    idx = np.arange(len(y))
    if fraction == 0:
        return idx, idx
    if np.bincount(y)[np.unique(y)].min() < 2:
        log.info("too few samples per class for a validation split; validating on the training set")
        return idx, idx
    train, val = stratified_indices(y, (1 - fraction, fraction), seed)
    return np.array(train), np.array(val)


def fit(model: ModelSpec, dataset, config: Optional[TrainConfig] = None, encoded: Optional[EncodedBatch] = None,
        init: Optional[TrainableParams] = None):
    """Train processing angles and readout weights with Adam.

    Runs the loader stage first when ``encoded`` is not given; loader
    parameters are never touched afterwards. Returns the parameters with the
    lowest validation loss and the metrics of that epoch.
    """
    config = config or TrainConfig()
    if config.stage is not Stage.CLASSIFIER:
        raise ContractError("fit trains the classifier stage; use fit_loaders for the loader stage")
    X, y = _as_xy(dataset)
    if len(y) == 0:
        raise ContractError("cannot train on an empty dataset")
    if y.min() < 0 or y.max() >= model.n_classes:
        raise ContractError(f"labels fall outside the model's {model.n_classes} classes")
    if encoded is None:
        encoded = encode(model, X)
    elif len(encoded) != len(y):
        raise ContractError("encoded batch and labels differ in length")

    train_idx, val_idx = _validation_indices(y, config.validation_fraction, config.seed)
    enc_train, enc_val = encoded.subset(train_idx), encoded.subset(val_idx)
    y_train, y_val = y[train_idx], y[val_idx]

    rng = np.random.default_rng(config.seed)
    params = init.copy() if init is not None else init_params(model, config.seed)
    flat = params.flatten()
    adam = AdamState.like(flat, lr=config.lr)
    batch = min(config.batch_size, len(train_idx))

    train_hist, val_hist, acc_hist = [], [], []
    best = (np.inf, params.copy(), 0, None)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_idx))
        losses = []
        for start in range(0, len(order), batch):
            rows = order[start : start + batch]
            current = TrainableParams.unflatten(model, flat)
            loss, grads = batch_loss_and_gradients(model, enc_train.subset(rows), y_train[rows], current)
            losses.append(loss * len(rows))
            adam, flat = adam_step(adam, flat, grads.flatten())
        params = TrainableParams.unflatten(model, flat)
        probs = forward_batch(model, enc_val, params)
        val_loss = float(cross_entropy(probs, y_val).mean())
        val_acc = float(np.mean(probs.argmax(axis=1) == y_val))
        train_hist.append(sum(losses) / len(order))
        val_hist.append(val_loss)
        acc_hist.append(val_acc)
        log.info("epoch %d train %.4f val %.4f acc %.3f", epoch, train_hist[-1], val_loss, val_acc)
        if val_loss < best[0]:
            best = (val_loss, params.copy(), epoch, probs)

    best_loss, best_params, best_epoch, best_probs = best
    metrics = metrics_from_predictions(y_val, best_probs.argmax(axis=1), model.n_classes, loss=best_loss)
    metrics.loss_history = np.array(train_hist)
    metrics.val_loss_history = np.array(val_hist)
    metrics.val_accuracy_history = np.array(acc_hist)
    metrics.best_epoch = best_epoch
    return best_params, metrics


def write_history_csv(metrics: Metrics, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_loss", "val_acc"])
        for i, (tl, vl, va) in enumerate(
            zip(metrics.loss_history, metrics.val_loss_history, metrics.val_accuracy_history), start=1
        ):
            w.writerow([i, repr(float(tl)), repr(float(vl)), repr(float(va))])
