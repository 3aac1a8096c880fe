"""Image ingestion, preprocessing, synthetic datasets and splits."""
from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._validation import check_positive_int, enum_value
from .exceptions import ContractError, DegenerateInputError

log = logging.getLogger(__name__)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
IMAGE_SUFFIXES = (".png", ".pgm", ".ppm", ".bmp")


@dataclass(frozen=True)
class ImageTensor:
    pixels: np.ndarray
    label: int = 0
    source_id: str = ""

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=float)
        if pixels.ndim != 2 or 0 in pixels.shape:
            raise ContractError(f"pixels must be a non-empty 2-D grid, got {pixels.shape}")
        if not np.all(np.isfinite(pixels)) or pixels.min() < 0 or pixels.max() > 1:
            raise ContractError(f"pixels of {self.source_id or 'image'} must be finite and in [0, 1]")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def shape(self):
        return self.pixels.shape


class SplitTag(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass
class Dataset:
    samples: list
    class_names: list
    split_tag: SplitTag = SplitTag.TRAIN
    errors: list = field(default_factory=list)

    def __post_init__(self):
        self.split_tag = SplitTag(self.split_tag)
        for s in self.samples:
            if not 0 <= s.label < len(self.class_names):
                raise ContractError(f"{s.source_id}: label {s.label} outside {len(self.class_names)} classes")

    def __len__(self):
        return len(self.samples)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def X(self) -> np.ndarray:
        if not self.samples:
            raise ContractError("dataset is empty")
        shapes = {s.shape for s in self.samples}
        if len(shapes) > 1:
            raise ContractError(f"images have mixed shapes {sorted(shapes)}; preprocess them first")
        return np.stack([s.pixels for s in self.samples])

    @property
    def y(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=int)

    def subset(self, indices, split_tag=None) -> "Dataset":
        return Dataset([self.samples[i] for i in indices], list(self.class_names), split_tag or self.split_tag)

    def map(self, fn) -> "Dataset":
        return Dataset([fn(s) for s in self.samples], list(self.class_names), self.split_tag, list(self.errors))


# ---------------------------------------------------------------------------
# reading


def to_grayscale(array) -> np.ndarray:
    """Luminance (ITU-R 601) of an RGB/RGBA array; 2-D input is returned as float."""
    a = np.asarray(array, dtype=float)
    if a.ndim == 2:
        return a
    if a.ndim == 3 and a.shape[2] in (3, 4):
        return a[..., :3] @ np.array(LUMA_WEIGHTS)
    raise ContractError(f"cannot convert array of shape {a.shape} to grayscale")


def read_image(path) -> np.ndarray:
    """Read a raster file as a grayscale float grid in [0, 1]."""
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("P", "LA", "PA", "CMYK", "YCbCr", "1"):
            im = im.convert("RGBA" if "A" in im.mode else "RGB")
        arr = np.asarray(im)
    if arr.dtype == np.uint8:
        scale = 255.0
    elif arr.dtype.kind in "iu":
        scale = 65535.0 if arr.max() <= 65535 else float(arr.max())
    else:
        scale = 1.0
    return np.clip(to_grayscale(arr) / scale, 0.0, 1.0)


def ingest_directory(path, class_subdirs: Optional[Sequence[str]] = None) -> Dataset:
    """Load ``path/<class>/*.{png,pgm,ppm,bmp}``.

    Classes are labelled in lexicographic order of their directory names.
    Unreadable files are logged and recorded in ``Dataset.errors``; the rest
    of the directory is still ingested.
    """
    root = Path(path)
    if not root.is_dir():
        raise ContractError(f"{root} is not a directory")
    names = sorted(class_subdirs) if class_subdirs is not None else sorted(
        p.name for p in root.iterdir() if p.is_dir()
    )
    if len(names) < 2:
        raise ContractError(f"need at least two class directories under {root}, found {names}")
    samples, errors = [], []
    for label, name in enumerate(names):
        files = sorted(
            p for p in (root / name).iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        ) if (root / name).is_dir() else []
        loaded = 0
        for f in files:
            try:
                pixels = read_image(f)
            except Exception as exc:  # any decoder failure is per-file
                log.warning("skipping %s: %s", f, exc)
                errors.append((str(f), str(exc)))
                continue
            samples.append(ImageTensor(pixels, label, f"{name}/{f.name}"))
            loaded += 1
        if loaded == 0:
            raise ContractError(f"class directory {root / name} has no readable images")
    return Dataset(samples, names, SplitTag.TRAIN, errors)


def write_image_directory(dataset: Dataset, root) -> list:
    """Write each sample as a 16-bit grayscale PNG under ``root/<class>/``."""
    from PIL import Image

    root = Path(root)
    written = []
    for i, s in enumerate(dataset.samples):
        d = root / dataset.class_names[s.label]
        d.mkdir(parents=True, exist_ok=True)
        name = Path(s.source_id).name or f"img_{i:05d}"
        f = d / (Path(name).stem + ".png")
        Image.fromarray(np.round(s.pixels * 65535).astype(np.uint16)).save(f)
        written.append(f)
    return written


# ---------------------------------------------------------------------------
# preprocessing


def center_crop_divisible(pixels, target) -> np.ndarray:
    (H, W), (h, w) = pixels.shape, target
    Hc, Wc = (H // h) * h, (W // w) * w
    top, left = (H - Hc) // 2, (W - Wc) // 2
    return pixels[top : top + Hc, left : left + Wc]


def average_pool(pixels, target) -> np.ndarray:
    h, w = target
    H, W = pixels.shape
    return pixels.reshape(h, H // h, w, W // w).mean(axis=(1, 3))


def preprocess(image, target, rescale: bool = True) -> ImageTensor:
    """Grayscale, average-pool to ``target = (h, w)`` and rescale by the max.

    Source regions that do not divide evenly are center-cropped to the largest
    divisible region first.
    """
    label = getattr(image, "label", 0)
    source_id = getattr(image, "source_id", "")
    pixels = to_grayscale(getattr(image, "pixels", image))
    h, w = (int(t) for t in target)
    if h < 1 or w < 1:
        raise ContractError(f"target {target} must be positive")
    if h > pixels.shape[0] or w > pixels.shape[1]:
        raise ContractError(f"cannot upscale {pixels.shape} to {(h, w)}")
    pooled = average_pool(center_crop_divisible(pixels, (h, w)), (h, w))
    if rescale:
        peak = pooled.max()
        if peak <= 0:
            raise DegenerateInputError(f"{source_id or 'image'} is black after pooling")
        pooled = pooled / peak
    return ImageTensor(np.clip(pooled, 0.0, 1.0), label, source_id)


def amplitude_side(n_qubits: int) -> tuple:
    """Square downsampling target ``2**(N/2) x 2**(N/2)`` for an N-qubit amplitude register.

    Odd N gets the extra factor of two on the width.
    """
    check_positive_int(n_qubits, "n_qubits")
    return (1 << (n_qubits // 2), 1 << (n_qubits - n_qubits // 2))


# ---------------------------------------------------------------------------
# synthetic data


class SyntheticKind(str, Enum):
    BRIGHT_VS_DARK = "bright_vs_dark"
    GRADIENT_4CLASS = "gradient_4class"


def _ramp(shape, orientation):
    h, w = shape
    cols = np.linspace(0.05, 0.95, w)
    rows = np.linspace(0.05, 0.95, h)
    if orientation == "left_to_right":
        return np.tile(cols, (h, 1))
    if orientation == "right_to_left":
        return np.tile(cols[::-1], (h, 1))
    if orientation == "top_to_bottom":
        return np.tile(rows[:, None], (1, w))
    return np.tile(rows[::-1, None], (1, w))


def make_synthetic(kind, n_per_class: int, shape=(16, 16), noise: float = 0.1, seed=0) -> Dataset:
    """Desk-scale stand-in datasets.

    ``bright_vs_dark``: constant 0.75 vs 0.25 images; ``gradient_4class``:
    linear ramps in four orientations. Both add uniform noise in
    ``[-noise, noise]`` and clip to [0, 1].
    """
    kind = SyntheticKind(enum_value(kind))
    check_positive_int(n_per_class, "n_per_class")
    shape = tuple(int(s) for s in shape)
    rng = np.random.default_rng(seed)
    if kind is SyntheticKind.BRIGHT_VS_DARK:
        names = ["bright", "dark"]
        templates = [np.full(shape, 0.75), np.full(shape, 0.25)]
    else:
        names = ["left_to_right", "right_to_left", "top_to_bottom", "bottom_to_top"]
        templates = [_ramp(shape, o) for o in names]
    samples = []
    for label, (name, base) in enumerate(zip(names, templates)):
        for i in range(n_per_class):
            pixels = base + rng.uniform(-noise, noise, shape) if noise else base.copy()
            samples.append(ImageTensor(np.clip(pixels, 0.0, 1.0), label, f"{name}/{i:05d}"))
    return Dataset(samples, names, SplitTag.TRAIN)


def smooth_image(shape=(16, 16), center=(0.6, 0.4), width=0.35, floor=0.15) -> np.ndarray:
    """A smooth test image: a broad Gaussian bump on a diagonal ramp."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    yy, xx = yy / max(h - 1, 1), xx / max(w - 1, 1)
    bump = np.exp(-((yy - center[0]) ** 2 + (xx - center[1]) ** 2) / (2 * width ** 2))
    img = floor + 0.5 * (xx + yy) / 2 + bump
    return img / img.max()


# ---------------------------------------------------------------------------
# splits


def _allocate(n, fractions):
    raw = np.asarray(fractions) * n
    counts = np.floor(raw).astype(int)
    remainder = n - counts.sum()
    order = sorted(range(len(fractions)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def stratified_indices(labels, fractions, seed=0, class_names=None) -> list:
    """Index lists of a stratified, seeded partition; see :func:`split`."""
    fractions = [float(f) for f in fractions]
    if not fractions or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise ContractError(f"fractions must be positive and sum to 1, got {fractions}")
    labels = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    parts = [[] for _ in fractions]
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < len(fractions):
            name = class_names[c] if class_names is not None else c
            raise ContractError(f"class {name!r} has {idx.size} samples, fewer than {len(fractions)} splits")
        idx = rng.permutation(idx)
        counts = _allocate(idx.size, fractions)
        while (counts == 0).any():
            counts[np.argmax(counts)] -= 1
            counts[np.argmin(counts)] += 1
        for part, chunk in zip(parts, np.split(idx, np.cumsum(counts)[:-1])):
            part.extend(chunk.tolist())
    return [sorted(p) for p in parts]


def split(dataset: Dataset, fractions=(0.6, 0.2, 0.2), seed=0) -> tuple:
    """Stratified, seeded partition into ``len(fractions)`` disjoint datasets.

    Per class, sizes follow the largest-remainder rounding of
    ``fraction * class_count``; every part gets at least one sample of every
    class present.
    """
    parts = stratified_indices(dataset.y, fractions, seed, dataset.class_names)
    tags = [SplitTag.TRAIN, SplitTag.VAL, SplitTag.TEST]
    return tuple(dataset.subset(p, tags[min(i, 2)]) for i, p in enumerate(parts))


# ---------------------------------------------------------------------------
# binary tensor cache
#
# little-endian layout:
#   magic b"QSIT" | u16 version | u32 n_images | u32 n_classes
#   n_classes x (u16 name length, utf-8 name)
#   n_images  x (i32 label, u32 height, u32 width, u16 id length, utf-8 id,
#                height*width float64 pixels, row-major)

CACHE_MAGIC = b"QSIT"
CACHE_VERSION = 1


def save_tensor_cache(dataset: Dataset, path) -> None:
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC + struct.pack("<HII", CACHE_VERSION, len(dataset), dataset.n_classes))
        for name in dataset.class_names:
            raw = name.encode()
            fh.write(struct.pack("<H", len(raw)) + raw)
        for s in dataset.samples:
            raw = s.source_id.encode()
            h, w = s.shape
            fh.write(struct.pack("<iIIH", s.label, h, w, len(raw)) + raw)
            fh.write(np.ascontiguousarray(s.pixels, dtype="<f8").tobytes())


def load_tensor_cache(path) -> Dataset:
    data = Path(path).read_bytes()
    if data[:4] != CACHE_MAGIC:
        raise ContractError(f"{path} is not a qscene tensor cache")
    version, n, n_classes = struct.unpack_from("<HII", data, 4)
    if version != CACHE_VERSION:
        raise ContractError(f"unsupported tensor cache version {version}")
    off = 14
    names = []
    try:
        for _ in range(n_classes):
            (ln,) = struct.unpack_from("<H", data, off)
            names.append(data[off + 2 : off + 2 + ln].decode())
            off += 2 + ln
        samples = []
        for _ in range(n):
            label, h, w, ln = struct.unpack_from("<iIIH", data, off)
            off += 14
            sid = data[off : off + ln].decode()
            off += ln
            pixels = np.frombuffer(data, dtype="<f8", count=h * w, offset=off).reshape(h, w)
            off += 8 * h * w
            samples.append(ImageTensor(pixels.copy(), label, sid))
    except (struct.error, ValueError) as exc:
        raise ContractError(f"{path} is truncated or malformed: {exc}") from None
    return Dataset(samples, names, SplitTag.TRAIN)
