"""Input checks shared by the estimators and the functional API."""
from __future__ import annotations

import numpy as np

from .exceptions import ContractError


def as_pixels(image) -> np.ndarray:
    """Return the 2-D float pixel grid of an image-like object.

    Accepts an object with a ``pixels`` attribute (``ImageTensor``) or anything
    convertible to a 2-D array.
    """
    pixels = getattr(image, "pixels", image)
    pixels = np.asarray(pixels, dtype=float)
    if pixels.ndim != 2 or 0 in pixels.shape:
        raise ContractError(f"expected a non-empty 2-D pixel grid, got shape {pixels.shape}")
    if not np.all(np.isfinite(pixels)):
        raise ContractError("image contains non-finite pixels")
    return pixels


def check_images(X, shape=None) -> np.ndarray:
    """Validate a stack of grayscale images, ``(n_samples, height, width)``.

    Flat ``(n_samples, height * width)`` input is accepted when ``shape`` is
    given.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and shape is not None and X.shape[1] == shape[0] * shape[1]:
        X = X.reshape(len(X), *shape)
    if X.ndim != 3:
        raise ContractError(f"expected images of shape (n_samples, height, width), got {X.shape}")
    if len(X) == 0:
        raise ContractError("no images given")
    if shape is not None and X.shape[1:] != tuple(shape):
        raise ContractError(f"images have shape {X.shape[1:]}, model expects {tuple(shape)}")
    if not np.all(np.isfinite(X)):
        raise ContractError("images contain non-finite pixels")
    return X


def check_positive_int(value, name, minimum=1) -> int:
    if int(value) != value or value < minimum:
        raise ContractError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def enum_value(value) -> str:
    """Lower-case string form of a plain string or a str-valued Enum member."""
    return str(getattr(value, "value", value)).lower()
