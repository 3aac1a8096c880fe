"""Classifier assembly, forward pass and gradients.

A model is a loading segment (trained amplitude loaders or angle-bound
uploading layers), a hardware-efficient processing circuit, Z readout on a
few qubits and a linear + softmax head. Block-encoded models simulate every
block on its own register; nothing entangles blocks, so the product state
never has to be formed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from ._validation import as_pixels, check_images, check_positive_int, enum_value
from .ansatz import Connectivity, ConnectivityKind, build_hea, hea_layer
from .encoders import (
    BlockPartition,
    LoaderConfig,
    PaePlan,
    block_layout,
    build_loader_ansatz,
    normalize_vector,
    qubits_for_pixels,
    train_loaders,
)
from .exceptions import ContractError, DegenerateInputError, NumericalError
from .simulator import (
    CircuitProgram,
    Gate,
    adjoint_vjp,
    combine_programs,
    expectations_z,
    run_batch,
    z_signs,
)

__all__ = [
    "AmplitudePlan", "Connectivity", "EncodedBatch", "ModelSpec", "ProcessingConfig",
    "TrainableParams", "amplitude_plan", "assemble", "block_states", "build_hea", "cross_entropy", "encode",
    "forward", "forward_batch", "init_params", "loss_and_gradients", "predict", "softmax",
]

SCHEMES = ("aae", "bae", "pae")
PROB_FLOOR = 1e-15
ROWS_PER_CHUNK_AMPLITUDES = 1 << 20


@dataclass(frozen=True)
class AmplitudePlan:
    """How pixels become amplitudes: one register (AAE) or one per block (BAE)."""

    image_shape: tuple
    partition: BlockPartition
    loader: LoaderConfig = LoaderConfig()

    @property
    def block_qubits(self) -> int:
        return self.partition.qubits_per_block

    @property
    def n_blocks(self) -> int:
        return self.partition.n_blocks

    def ansatz(self) -> CircuitProgram:
        return build_loader_ansatz(self.block_qubits, self.loader.layers)

    def targets(self, images) -> np.ndarray:
        """Normalised block amplitudes, shape ``(n_images, n_blocks, 2**q)``."""
        images = check_images(images, self.image_shape)
        rows, cols = self.partition.grid
        bh, bw = self.partition.block_pixel_shape
        n = len(images)
        blocks = images.reshape(n, rows, bh, cols, bw).transpose(0, 1, 3, 2, 4)
        blocks = blocks.reshape(n, rows * cols, bh * bw)
        if np.any(blocks < 0):
            raise ContractError("pixels must be nonnegative for amplitude encoding")
        out = np.zeros((n, rows * cols, 1 << self.block_qubits))
        out[:, :, : bh * bw] = blocks
        norms = np.linalg.norm(out, axis=2, keepdims=True)
        if np.any(norms == 0):
            i, b = np.argwhere(norms[:, :, 0] == 0)[0]
            raise DegenerateInputError(f"image {i}, block {b} is all zeros")
        return out / norms


def amplitude_plan(image_shape, grid=(1, 1), loader: Optional[LoaderConfig] = None) -> AmplitudePlan:
    image_shape = tuple(int(s) for s in image_shape)
    grid = tuple(int(g) for g in grid)
    if grid == (1, 1):
        pixels = image_shape[0] * image_shape[1]
        part = BlockPartition((1, 1), qubits_for_pixels(pixels), 1, image_shape)
    else:
        part = block_layout(image_shape, grid)
    return AmplitudePlan(image_shape, part, loader or LoaderConfig())


@dataclass(frozen=True)
class ProcessingConfig:
    layers: int = 3
    connectivity: str = "line"
    entangler: str = "cx"
    brickwork: bool = False

    def __post_init__(self):
        check_positive_int(self.layers, "processing layers")
        object.__setattr__(self, "connectivity", ConnectivityKind(enum_value(self.connectivity)).value)
        if enum_value(self.entangler) not in ("cx", "cz", "rzz"):
            raise ContractError(f"unsupported entangler {self.entangler!r}")
        object.__setattr__(self, "entangler", enum_value(self.entangler))


@dataclass
class ModelSpec:
    scheme: str
    image_shape: tuple
    block_qubits: int
    n_blocks: int
    processing: CircuitProgram  # one block's circuit; PAE includes data-driven upload gates
    measured_local: tuple  # qubits read out in each block, local indices
    n_classes: int
    plan: Union[AmplitudePlan, PaePlan]
    processing_config: ProcessingConfig = field(default_factory=ProcessingConfig)

    @property
    def n_qubits(self) -> int:
        return self.block_qubits * self.n_blocks

    @property
    def measured_qubits(self) -> tuple:
        return tuple(b * self.block_qubits + q for b in range(self.n_blocks) for q in self.measured_local)

    @property
    def n_measured(self) -> int:
        return self.n_blocks * len(self.measured_local)

    @property
    def n_quantum_params(self) -> int:
        return self.n_blocks * self.processing.n_params

    @property
    def n_params(self) -> int:
        """Trainable parameter count: processing angles plus readout weights and bias."""
        return self.n_quantum_params + self.n_classes * (self.n_measured + 1)


@dataclass
class TrainableParams:
    quantum: np.ndarray
    weights: np.ndarray  # (n_classes, n_measured)
    bias: np.ndarray  # (n_classes,)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.quantum.ravel(), self.weights.ravel(), self.bias.ravel()])

    @classmethod
    def unflatten(cls, model: ModelSpec, vector) -> "TrainableParams":
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (model.n_params,):
            raise ContractError(f"expected {model.n_params} parameters, got {vector.shape}")
        nq, C, M = model.n_quantum_params, model.n_classes, model.n_measured
        return cls(vector[:nq].copy(), vector[nq : nq + C * M].reshape(C, M).copy(), vector[nq + C * M :].copy())

    def copy(self) -> "TrainableParams":
        return TrainableParams(self.quantum.copy(), self.weights.copy(), self.bias.copy())


def _pae_program(plan: PaePlan, proc: ProcessingConfig) -> CircuitProgram:
    n = plan.n_qubits
    conn = Connectivity(proc.connectivity, n) if n >= 3 or proc.connectivity != "ring" else Connectivity("line", n)
    gates, slot = [], 0
    for layer in range(proc.layers):
        if layer < plan.n_upload_layers:
            gates.extend(plan.upload_gates(layer))
        slot = hea_layer(gates, n, layer, conn, proc.entangler, proc.brickwork, ("ry", "rz"), slot)
    return CircuitProgram(n, gates, slot, loading_boundary=0, n_data=plan.n_slots)


def assemble(scheme: str, plan, processing: Optional[ProcessingConfig] = None, n_classes: int = 2,
             measured_qubits: Optional[Sequence[int]] = None) -> ModelSpec:
    """Build a classifier from a loading plan and a processing configuration.

    AAE and PAE read out the first two qubits by default; BAE always reads
    qubit 0 (the most significant) of each block. PAE needs at least as many
    processing layers as uploading layers; uploads are interleaved one-to-one
    with the first processing layers.
    """
    scheme = enum_value(scheme)
    processing = processing or ProcessingConfig()
    if scheme not in SCHEMES:
        raise ContractError(f"unknown scheme {scheme!r}")
    if n_classes < 2:
        raise ContractError("a classifier needs at least two classes")

    if scheme == "pae":
        if not isinstance(plan, PaePlan):
            raise ContractError("PAE models take a PaePlan")
        if processing.layers < plan.n_upload_layers:
            raise ContractError(
                f"PAE needs >= {plan.n_upload_layers} processing layers, got {processing.layers}"
            )
        program = _pae_program(plan, processing)
        q, blocks = plan.n_qubits, 1
        image_shape = plan.image_shape or (1, plan.pixel_count)
    else:
        if not isinstance(plan, AmplitudePlan):
            raise ContractError(f"{scheme.upper()} models take an AmplitudePlan")
        if scheme == "aae" and plan.n_blocks != 1:
            raise ContractError("AAE uses a single register; use scheme 'bae' for a block grid")
        q, blocks, image_shape = plan.block_qubits, plan.n_blocks, plan.image_shape
        conn = processing.connectivity
        if conn == "ring" and q < 3:
            conn = "line"
        program = build_hea(q, processing.layers, Connectivity(conn, q), processing.entangler, processing.brickwork)
        program.loading_boundary = 0

    if scheme == "bae":
        if measured_qubits is not None and tuple(measured_qubits) != tuple(b * q for b in range(blocks)):
            raise ContractError("BAE measures the most significant qubit of every block")
        local = (0,)
    elif measured_qubits is None:
        local = tuple(range(min(2, q)))
    else:
        local = tuple(int(m) for m in measured_qubits)
        if len(set(local)) != len(local) or not all(0 <= m < q for m in local) or not local:
            raise ContractError(f"measured qubits {measured_qubits} must be distinct and in [0, {q})")
    return ModelSpec(scheme, tuple(image_shape), q, blocks, program, local, n_classes, plan, processing)


def init_params(model: ModelSpec, seed=0) -> TrainableParams:
    rng = np.random.default_rng(seed)
    quantum = rng.uniform(-0.1, 0.1, model.n_quantum_params)
    weights = rng.uniform(-0.5, 0.5, (model.n_classes, model.n_measured))
    return TrainableParams(quantum, weights, np.zeros(model.n_classes))


# ---------------------------------------------------------------------------
# encoding


@dataclass
class EncodedBatch:
    """Loaded inputs for a batch of images.

    AAE/BAE: ``states`` holds the prepared block states ``(N, n_blocks, 2**q)``
    and ``loader_params`` the frozen loader angles. PAE: ``angles`` holds
    the data vectors ``(N, n_slots)``.
    """

    scheme: str
    states: Optional[np.ndarray] = None
    loader_params: Optional[np.ndarray] = None
    fidelity: Optional[np.ndarray] = None
    angles: Optional[np.ndarray] = None

    def __len__(self):
        arr = self.angles if self.angles is not None else self.states
        return len(arr)

    def subset(self, idx) -> "EncodedBatch":
        pick = lambda a: None if a is None else a[idx]
        return EncodedBatch(self.scheme, pick(self.states), pick(self.loader_params), pick(self.fidelity),
                            pick(self.angles))


def encode(model: ModelSpec, images) -> EncodedBatch:
    """Run the loading stage for a stack of images.

    Amplitude loaders are trained here (one per block per image, batched);
    the result depends only on the image and the loader configuration.
    """
    images = check_images(images, model.image_shape)
    if model.scheme == "pae":
        plan = model.plan
        return EncodedBatch("pae", angles=np.stack([plan.angles(img) for img in images]))
    plan = model.plan
    targets = plan.targets(images)
    n, b, dim = targets.shape
    flat = targets.reshape(n * b, dim)
    ansatz = plan.ansatz()
    schedule = plan.loader.schedule(plan.block_qubits)
    chunk = max(1, (1 << 16) // dim)
    params, states, fid = [], [], []
    for start in range(0, n * b, chunk):
        res = train_loaders(flat[start : start + chunk], ansatz, schedule, plan.loader)
        params.append(res.params)
        states.append(res.states)
        fid.append(res.fidelity)
    return EncodedBatch(
        model.scheme,
        states=np.concatenate(states).reshape(n, b, dim),
        loader_params=np.concatenate(params).reshape(n, b, -1),
        fidelity=np.concatenate(fid).reshape(n, b),
    )


def _as_encoded(model, images) -> EncodedBatch:
    if isinstance(images, EncodedBatch):
        return images
    images = np.asarray(getattr(images, "pixels", images), dtype=float)
    if images.ndim == 2:
        images = images[None]
    return encode(model, images)


# ---------------------------------------------------------------------------
# forward / backward


def _chunks(model, n):
    per_row = model.n_blocks << model.block_qubits
    size = max(1, ROWS_PER_CHUNK_AMPLITUDES // per_row)
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def _simulate(model, enc, quantum, rows):
    """Final processing states for rows ``rows`` of ``enc``: ``(n*b, 2**q)``."""
    prog = model.processing
    if model.scheme == "pae":
        return run_batch(prog, quantum, data=enc.angles[rows]), quantum, enc.angles[rows]
    states = enc.states[rows]
    n, b, dim = states.shape
    if b == 1:
        params = quantum
    else:
        params = np.tile(quantum.reshape(b, prog.n_params), (n, 1))
    return run_batch(prog, params, initial=states.reshape(n * b, dim)), params, None


def _check_quantum(model, params: TrainableParams):
    if params.quantum.shape != (model.n_quantum_params,):
        raise ContractError(f"expected {model.n_quantum_params} quantum parameters, got {params.quantum.shape}")
    if params.weights.shape != (model.n_classes, model.n_measured) or params.bias.shape != (model.n_classes,):
        raise ContractError("readout weights or bias have the wrong shape")


def expectations(model: ModelSpec, encoded: EncodedBatch, params: TrainableParams) -> np.ndarray:
    """``<Z>`` of every measured qubit, shape ``(N, n_measured)`` in block order."""
    _check_quantum(model, params)
    out = []
    for rows in _chunks(model, len(encoded)):
        psi, _, _ = _simulate(model, encoded, params.quantum, rows)
        e = expectations_z(psi, model.block_qubits, model.measured_local)
        out.append(e.reshape(-1, model.n_measured))
    return np.concatenate(out)


def block_states(model: ModelSpec, encoded, params: TrainableParams) -> np.ndarray:
    """Final state of every block register, shape ``(N, n_blocks, 2**q)``."""
    encoded = _as_encoded(model, encoded)
    _check_quantum(model, params)
    out = []
    for rows in _chunks(model, len(encoded)):
        psi, _, _ = _simulate(model, encoded, params.quantum, rows)
        out.append(psi.reshape(-1, model.n_blocks, psi.shape[-1]))
    return np.concatenate(out)


def softmax(logits) -> np.ndarray:
    logits = np.asarray(logits, dtype=float)
    z = logits - logits.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def cross_entropy(probs, labels) -> np.ndarray:
    probs = np.atleast_2d(probs)
    labels = np.atleast_1d(labels)
    picked = probs[np.arange(len(labels)), labels]
    loss = -np.log(np.maximum(picked, PROB_FLOOR))
    if not np.all(np.isfinite(loss)):
        raise NumericalError("non-finite cross-entropy")
    return loss


def readout(expect, params: TrainableParams) -> np.ndarray:
    return softmax(expect @ params.weights.T + params.bias)


def forward_batch(model: ModelSpec, encoded, params: TrainableParams) -> np.ndarray:
    encoded = _as_encoded(model, encoded)
    return readout(expectations(model, encoded, params), params)


def forward(model: ModelSpec, image, params: TrainableParams) -> np.ndarray:
    """Class probabilities for one image (or a pre-encoded single-row batch)."""
    if not isinstance(image, EncodedBatch):
        pixels = as_pixels(image)
        if pixels.shape != tuple(model.image_shape):
            raise ContractError(f"image shape {pixels.shape} does not match model {model.image_shape}")
        image = pixels[None]
    return forward_batch(model, image, params)[0]


def predict(model: ModelSpec, image, params: TrainableParams) -> int:
    """Most probable class; ties go to the lowest index."""
    return int(np.argmax(forward(model, image, params)))


def _check_labels(model, labels, n):
    labels = np.atleast_1d(np.asarray(labels))
    if labels.shape != (n,):
        raise ContractError(f"expected {n} labels, got shape {labels.shape}")
    if labels.dtype.kind not in "iu" or labels.min() < 0 or labels.max() >= model.n_classes:
        raise ContractError(f"labels must be integers in [0, {model.n_classes})")
    return labels.astype(int)


def batch_loss_and_gradients(model: ModelSpec, encoded: EncodedBatch, labels, params: TrainableParams):
    """Mean cross-entropy over the batch and its gradient.

    Loading parameters are not part of ``params`` and receive no gradient.
    """
    _check_quantum(model, params)
    labels = _check_labels(model, labels, len(encoded))
    prog, b = model.processing, model.n_blocks
    signs = z_signs(model.block_qubits, model.measured_local)
    total_loss = 0.0
    g_q = np.zeros(model.n_quantum_params)
    g_w = np.zeros_like(params.weights)
    g_b = np.zeros_like(params.bias)
    for rows in _chunks(model, len(encoded)):
        psi, rparams, data = _simulate(model, encoded, params.quantum, rows)
        e = expectations_z(psi, model.block_qubits, model.measured_local).reshape(-1, model.n_measured)
        probs = readout(e, params)
        y = labels[rows]
        total_loss += cross_entropy(probs, y).sum()
        d_logits = probs.copy()
        d_logits[np.arange(len(y)), y] -= 1.0
        g_w += d_logits.T @ e
        g_b += d_logits.sum(axis=0)
        d_e = (d_logits @ params.weights).reshape(len(psi), len(model.measured_local))
        lam = psi * (d_e @ signs)
        grads = adjoint_vjp(prog, rparams, psi, lam, data)
        if b == 1:
            g_q += grads.sum(axis=0)
        else:
            g_q += grads.reshape(-1, b * prog.n_params).sum(axis=0)
    n = len(encoded)
    grads = TrainableParams(g_q / n, g_w / n, g_b / n)
    return total_loss / n, grads


def loss_and_gradients(model: ModelSpec, image, label, params: TrainableParams):
    """Cross-entropy of one image (or a mean over an encoded batch) and its gradients."""
    if isinstance(image, EncodedBatch):
        return batch_loss_and_gradients(model, image, label, params)
    return batch_loss_and_gradients(model, _as_encoded(model, image), [int(label)], params)


# ---------------------------------------------------------------------------
# whole-circuit views


def full_program(model: ModelSpec, encoded: Optional[EncodedBatch] = None, row: int = 0) -> CircuitProgram:
    """The complete circuit on all ``n_qubits`` with trainable processing slots.

    With ``encoded`` the loading segment of image ``row`` is bound in front
    (AAE/BAE loaders at their trained angles, PAE uploads at the pixel
    angles). Without it only the processing segment is returned, PAE upload
    gates dropped.
    """
    if model.scheme == "pae":
        if encoded is None:
            return model.processing.without_data_gates()
        prog = model.processing
        bound = []
        for g in prog.gates:
            if g.data_slot is not None:
                g = Gate(g.kind, g.targets, fixed_angle=float(encoded.angles[row, g.data_slot]))
            bound.append(g)
        return CircuitProgram(prog.n_qubits, bound, prog.n_params, 0)
    processing = combine_programs([model.processing] * model.n_blocks)
    if encoded is None:
        return processing
    ansatz = model.plan.ansatz()
    loaders = combine_programs([ansatz.bind(encoded.loader_params[row, k]) for k in range(model.n_blocks)])
    gates = loaders.gates + processing.gates
    return CircuitProgram(model.n_qubits, gates, processing.n_params, loading_boundary=len(loaders.gates))
