"""scikit-learn compatible wrapper around the functional API."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_images, enum_value
from .encoders import LoaderConfig, pae_plan
from .exceptions import ContractError
from .model import (
    ProcessingConfig,
    amplitude_plan,
    assemble,
    encode,
    expectations,
    forward_batch,
)
from .train import TrainConfig, fit


class QuantumImageClassifier(ClassifierMixin, BaseEstimator):
    """Variational quantum classifier for grayscale images.

    ``X`` is ``(n_samples, height, width)`` with pixels in [0, 1], or flat
    ``(n_samples, height * width)`` when ``image_shape`` is set.

    Parameters
    ----------
    scheme : {"pae", "aae", "bae"}
    n_qubits : int
        Register size for PAE; ignored by the amplitude schemes, whose size
        follows from the image (AAE) or the block grid (BAE).
    grid : (rows, cols)
        Block grid for BAE.
    layers : int or None
        Processing layers. ``None`` picks 3, or the number of uploading
        layers for PAE when that is larger.
    """

    def __init__(self, scheme="pae", n_qubits=10, image_shape=None, grid=(2, 2), layers=None,
                 connectivity="line", entangler="cx", brickwork=False, measured_qubits=None,
                 loader_layers=6, loader_steps=400, loader_lr=0.05, epochs=30, batch_size=16, lr=0.01,
                 validation_fraction=0.2, scaling="clip", random_state=0):
        self.scheme = scheme
        self.n_qubits = n_qubits
        self.image_shape = image_shape
        self.grid = grid
        self.layers = layers
        self.connectivity = connectivity
        self.entangler = entangler
        self.brickwork = brickwork
        self.measured_qubits = measured_qubits
        self.loader_layers = loader_layers
        self.loader_steps = loader_steps
        self.loader_lr = loader_lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.validation_fraction = validation_fraction
        self.scaling = scaling
        self.random_state = random_state

    def _build(self, shape, n_classes):
        scheme = enum_value(self.scheme)
        loader = LoaderConfig(self.loader_layers, self.loader_steps, self.loader_lr, seed=self.random_state)
        if scheme == "pae":
            plan = pae_plan(shape[0] * shape[1], self.n_qubits, shape, self.scaling)
            layers = self.layers or max(3, plan.n_upload_layers)
        elif scheme in ("aae", "bae"):
            plan = amplitude_plan(shape, (1, 1) if scheme == "aae" else tuple(self.grid), loader)
            layers = self.layers or 3
        else:
            raise ContractError(f"unknown scheme {self.scheme!r}")
        proc = ProcessingConfig(layers, self.connectivity, self.entangler, self.brickwork)
        return assemble(scheme, plan, proc, n_classes, self.measured_qubits)

    def _images(self, X, shape=None):
        return check_images(X, shape if shape is not None else self.image_shape)

    def fit(self, X, y):
        X = self._images(X)
        y = np.asarray(y)
        if y.shape != (len(X),):
            raise ContractError(f"expected {len(X)} labels, got shape {y.shape}")
        self.classes_, codes = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ContractError("need samples from at least two classes")
        self.model_ = self._build(X.shape[1:], len(self.classes_))
        config = TrainConfig(self.epochs, self.batch_size, self.lr, self.random_state,
                             validation_fraction=self.validation_fraction)
        self.params_, self.metrics_ = fit(self.model_, (X, codes), config)
        self.n_features_in_ = X.shape[1] * X.shape[2]
        return self

    def _encoded(self, X):
        check_is_fitted(self, "params_")
        return encode(self.model_, self._images(X, self.model_.image_shape))

    def transform(self, X):
        """Measured ``<Z>`` values, the features fed to the readout head."""
        return expectations(self.model_, self._encoded(X), self.params_)

    def predict_proba(self, X):
        return forward_batch(self.model_, self._encoded(X), self.params_)

    def predict(self, X):
        check_is_fitted(self, "params_")
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
