"""Turning images into loading circuits.

Amplitude encoding (one register) and block amplitude encoding (one register
per image block) train a shallow RY+CX loader per image against the
normalised pixel vector by minimising KL(target || prepared) over
measurement probabilities, activating the most significant qubits first.
Piecewise angle encoding binds pixels directly to RY-RZ-RY rotation angles
spread over several uploading layers.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import as_pixels, check_positive_int, is_power_of_two
from .ansatz import Connectivity, build_hea
from .exceptions import ContractError, DegenerateInputError, NumericalError
from .optim import AdamState, adam_step
from .simulator import MAX_QUBITS, CircuitProgram, Gate, adjoint_vjp, run_batch

log = logging.getLogger(__name__)

KL_EPS = 1e-12


@dataclass
class TargetAmplitudes:
    values: np.ndarray
    source_shape: tuple

    @property
    def n_qubits(self) -> int:
        return len(self.values).bit_length() - 1

    @property
    def probabilities(self) -> np.ndarray:
        return self.values ** 2


def normalize_vector(v) -> TargetAmplitudes:
    """Zero-pad to the next power of two (at least 2) and scale to unit norm."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0 or not np.any(v):
        raise DegenerateInputError("cannot normalise an all-zero vector")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ContractError("amplitude targets must be finite and nonnegative")
    size = max(2, 1 << (v.size - 1).bit_length())
    padded = np.zeros(size)
    padded[: v.size] = v
    return TargetAmplitudes(padded / np.linalg.norm(padded), (v.size,))


def qubits_for_pixels(pixel_count: int) -> int:
    return max(1, math.ceil(math.log2(pixel_count)))


def image_to_target(image) -> TargetAmplitudes:
    """Row-major flatten, pad and normalise; needs ceil(log2(pixels)) qubits."""
    pixels = as_pixels(image)
    if pixels.size > 1 << MAX_QUBITS:
        raise ContractError(f"{pixels.size} pixels exceed the 2**{MAX_QUBITS} limit")
    target = normalize_vector(pixels.ravel())
    target.source_shape = pixels.shape
    return target


@dataclass(frozen=True)
class BlockPartition:
    grid: tuple
    qubits_per_block: int
    n_blocks: int
    block_pixel_shape: tuple

    @property
    def total_qubits(self) -> int:
        return self.qubits_per_block * self.n_blocks


def block_layout(image_shape, grid) -> BlockPartition:
    """Partition arithmetic only; no pixels are touched."""
    (h, w), (rows, cols) = image_shape, grid
    if rows < 1 or cols < 1:
        raise ContractError(f"grid must be positive, got {grid}")
    if h % rows or w % cols:
        raise ContractError(f"image {h}x{w} is not divisible by grid {rows}x{cols}")
    bh, bw = h // rows, w // cols
    if not is_power_of_two(bh * bw) or bh * bw < 2:
        raise ContractError(f"block of {bh}x{bw} pixels is not a power of two >= 2")
    return BlockPartition((rows, cols), (bh * bw).bit_length() - 1, rows * cols, (bh, bw))


def partition_blocks(image, grid):
    """Split an image into row-major blocks, each normalised on its own."""
    pixels = as_pixels(image)
    part = block_layout(pixels.shape, grid)
    bh, bw = part.block_pixel_shape
    targets = []
    for r in range(part.grid[0]):
        for c in range(part.grid[1]):
            block = pixels[r * bh : (r + 1) * bh, c * bw : (c + 1) * bw]
            try:
                t = normalize_vector(block.ravel())
            except DegenerateInputError:
                raise DegenerateInputError(f"block ({r}, {c}) is all zeros") from None
            t.source_shape = (bh, bw)
            targets.append(t)
    return part, targets


@dataclass(frozen=True)
class HierarchicalSchedule:
    stages: tuple  # ((active_qubits, steps), ...)

    def __post_init__(self):
        counts = [a for a, _ in self.stages]
        if not counts or any(b <= a for a, b in zip(counts, counts[1:])):
            raise ContractError(f"active qubit counts must strictly increase: {counts}")

    @property
    def n_qubits(self) -> int:
        return self.stages[-1][0]

    @property
    def total_steps(self) -> int:
        return sum(s for _, s in self.stages)


def build_hierarchical_schedule(n_qubits: int, n_stages: int, epochs_per_stage: int) -> HierarchicalSchedule:
    """Stage k (1-based) trains the ceil(k * n / n_stages) most significant qubits."""
    check_positive_int(n_qubits, "n_qubits")
    check_positive_int(epochs_per_stage, "epochs_per_stage")
    if not 1 <= n_stages <= n_qubits:
        raise ContractError(f"n_stages must be in [1, {n_qubits}], got {n_stages}")
    return HierarchicalSchedule(
        tuple((math.ceil(k * n_qubits / n_stages), epochs_per_stage) for k in range(1, n_stages + 1))
    )


@dataclass(frozen=True)
class LoaderConfig:
    """Settings for training amplitude loaders.

    ``steps`` is the total Adam budget, split evenly over the stages.
    ``init="uniform"`` starts the first RY layer at pi/2 (the uniform
    superposition); ``"zeros"`` starts every angle at 0.
    """

    layers: int = 6
    steps: int = 400
    lr: float = 0.05
    n_stages: Optional[int] = None
    seed: int = 0
    init: str = "uniform"
    init_scale: float = 0.1

    def stages_for(self, n_qubits: int) -> int:
        if self.n_stages is not None:
            return min(self.n_stages, n_qubits)
        return max(1, math.ceil(n_qubits / 4))

    def schedule(self, n_qubits: int) -> HierarchicalSchedule:
        stages = self.stages_for(n_qubits)
        return build_hierarchical_schedule(n_qubits, stages, max(1, self.steps // stages))


def build_loader_ansatz(n_qubits: int, layers: int = 6) -> CircuitProgram:
    """RY + CX-chain layers closed by a final RY layer (real amplitudes only)."""
    body = build_hea(n_qubits, layers, Connectivity("line", n_qubits), "cx", rotations=("ry",))
    gates = list(body.gates)
    slot = body.n_params
    for q in range(n_qubits):
        gates.append(Gate("ry", (q,), param_slot=slot))
        slot += 1
    return CircuitProgram(n_qubits, gates, slot, loading_boundary=len(gates))


def initial_loader_params(ansatz: CircuitProgram, config: LoaderConfig) -> np.ndarray:
    rng = np.random.default_rng(config.seed)
    params = rng.uniform(-config.init_scale, config.init_scale, ansatz.n_params)
    if config.init == "zeros":
        return np.zeros(ansatz.n_params)
    if config.init != "uniform":
        raise ContractError(f"unknown loader init {config.init!r}")
    first = {}
    for g in ansatz.gates:
        if g.kind.value == "ry" and g.targets[0] not in first:
            first[g.targets[0]] = g.param_slot
    params[list(first.values())] += math.pi / 2
    return params


def kl_divergence(target_probs, prepared_probs, eps: float = KL_EPS) -> np.ndarray:
    """KL(target || prepared) along the last axis with 0 log 0 = 0.

    Prepared probabilities are clamped below at ``eps``.
    """
    t = np.asarray(target_probs, dtype=float)
    p = np.maximum(np.asarray(prepared_probs, dtype=float), eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(t > 0, t * (np.log(np.where(t > 0, t, 1.0)) - np.log(p)), 0.0)
    return terms.sum(axis=-1)


def _restrict(ansatz: CircuitProgram, active: int) -> CircuitProgram:
    gates = [g for g in ansatz.gates if max(g.targets) < active]
    return CircuitProgram(active, gates, ansatz.n_params)


def _marginal(probs, n_qubits, active):
    return probs.reshape(probs.shape[0], 1 << active, 1 << (n_qubits - active)).sum(axis=2)


@dataclass
class LoaderResult:
    params: np.ndarray
    loss_history: np.ndarray  # KL before each step; per stage, concatenated
    stage_of_step: np.ndarray
    best_loss_history: np.ndarray  # running minimum within each stage
    final_loss: np.ndarray
    fidelity: np.ndarray
    states: np.ndarray = field(repr=False, default=None)


def train_loaders(targets, ansatz: CircuitProgram, schedule: HierarchicalSchedule, config: LoaderConfig,
                  init=None) -> LoaderResult:
    """Train one loader per row of ``targets`` (shape ``(B, 2**n)``) in a single batch.

    Rows are independent: each keeps its own parameters and Adam moments,
    so the result for a row does not depend on what else is in the batch.
    Parameters are returned at the lowest full-register loss seen.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    n = ansatz.n_qubits
    if targets.shape[1] != 1 << n:
        raise ContractError(f"target has {targets.shape[1]} amplitudes, ansatz needs {1 << n}")
    if schedule.n_qubits != n:
        raise ContractError("schedule does not end on the full register")
    B = targets.shape[0]
    t_probs = targets ** 2
    params = np.tile(initial_loader_params(ansatz, config) if init is None else np.asarray(init, float), (B, 1))

    losses, stage_ids, best_trace = [], [], []
    best_loss = best_params = None
    for stage, (active, steps) in enumerate(schedule.stages):
        prog = _restrict(ansatz, active)
        t_stage = _marginal(t_probs, n, active)
        final_stage = stage == len(schedule.stages) - 1
        adam = AdamState.like(params, lr=config.lr)
        stage_best = np.full(B, np.inf)
        stage_best_params = params.copy()
        for it in range(steps + 1):
            psi = run_batch(prog, params)
            p = np.abs(psi) ** 2
            loss = kl_divergence(t_stage, p)
            if not np.all(np.isfinite(loss)):
                raise NumericalError(f"non-finite KL loss at stage {stage}, iteration {it}")
            better = loss < stage_best
            stage_best = np.where(better, loss, stage_best)
            stage_best_params[better] = params[better]
            if it == steps:
                break
            losses.append(loss)
            stage_ids.append(stage)
            best_trace.append(stage_best.copy())
            # dKL/dp_i = -t_i / p_i above the clamp, 0 below it
            weights = np.where(p > KL_EPS, -t_stage / np.maximum(p, KL_EPS), 0.0)
            grads = adjoint_vjp(prog, params, psi, psi * weights)
            adam, params = adam_step(adam, params, grads)
        params = stage_best_params
        log.debug("loader stage %d (%d qubits): best KL %s", stage, active, stage_best.max())
        if final_stage:
            best_loss, best_params = stage_best, stage_best_params

    states = run_batch(ansatz, best_params)
    fidelity = np.abs(np.einsum("bi,bi->b", targets, states)) ** 2
    return LoaderResult(
        params=best_params,
        loss_history=np.array(losses).reshape(-1, B),
        stage_of_step=np.array(stage_ids, dtype=int),
        best_loss_history=np.array(best_trace).reshape(-1, B),
        final_loss=best_loss,
        fidelity=fidelity,
        states=states,
    )


def train_loader(target: TargetAmplitudes, ansatz: CircuitProgram, schedule: Optional[HierarchicalSchedule] = None,
                 opt_config: Optional[LoaderConfig] = None, init=None) -> LoaderResult:
    """Train a single loader; see :func:`train_loaders`."""
    config = opt_config or LoaderConfig()
    if target.n_qubits != ansatz.n_qubits:
        raise ContractError(f"target needs {target.n_qubits} qubits, ansatz has {ansatz.n_qubits}")
    schedule = schedule or config.schedule(ansatz.n_qubits)
    res = train_loaders(target.values[None, :], ansatz, schedule, config, init=init)
    return LoaderResult(
        params=res.params[0],
        loss_history=res.loss_history[:, 0],
        stage_of_step=res.stage_of_step,
        best_loss_history=res.best_loss_history[:, 0],
        final_loss=float(res.final_loss[0]),
        fidelity=float(res.fidelity[0]),
        states=res.states[0],
    )


# ---------------------------------------------------------------------------
# piecewise angle encoding

ROTATION_POSITIONS = ("ry", "rz", "ry")


@dataclass(frozen=True)
class PaePlan:
    """Pixel -> rotation-angle assignment for piecewise angle encoding.

    Pixel ``i`` (row-major) drives uploading layer ``i // (3 n)``, qubit
    ``(i // 3) % n`` and position ``i % 3`` of the RY-RZ-RY triplet, which
    is also slot ``i`` of the data vector fed to the circuit.
    """

    n_qubits: int
    pixel_count: int
    n_upload_layers: int
    angle_scale: float = math.pi
    image_shape: Optional[tuple] = None
    scaling: str = "clip"

    @property
    def n_slots(self) -> int:
        return 3 * self.n_qubits * self.n_upload_layers

    def assignment(self, pixel: int) -> tuple:
        if not 0 <= pixel < self.pixel_count:
            raise ContractError(f"pixel {pixel} outside [0, {self.pixel_count})")
        layer, rest = divmod(pixel, 3 * self.n_qubits)
        qubit, pos = divmod(rest, 3)
        return layer, qubit, pos

    @property
    def angle_assignment(self) -> dict:
        return {i: self.assignment(i) for i in range(self.pixel_count)}

    def upload_gates(self, layer: int, data_offset: int = 0) -> list:
        base = 3 * self.n_qubits * layer
        return [
            Gate(kind, (q,), data_slot=data_offset + base + 3 * q + pos)
            for q in range(self.n_qubits)
            for pos, kind in enumerate(ROTATION_POSITIONS)
        ]

    def angles(self, image) -> np.ndarray:
        """Data vector of length ``n_slots``; unfilled positions stay at 0."""
        pixels = as_pixels(image).ravel()
        if pixels.size != self.pixel_count:
            raise ContractError(f"image has {pixels.size} pixels, plan expects {self.pixel_count}")
        pixels = scale_pixels(pixels, self.scaling)
        out = np.zeros(self.n_slots)
        out[: self.pixel_count] = self.angle_scale * pixels
        return out


def scale_pixels(pixels, scaling: str = "clip") -> np.ndarray:
    """Map pixels to [0, 1] before multiplying by the angle scale.

    ``"clip"`` clips to [0, 1] and keeps absolute intensity; ``"minmax"``
    stretches each image to span [0, 1] (constant images map to 0).
    """
    pixels = np.asarray(pixels, dtype=float)
    if scaling == "clip":
        return np.clip(pixels, 0.0, 1.0)
    if scaling == "minmax":
        lo, hi = pixels.min(), pixels.max()
        return np.zeros_like(pixels) if hi == lo else (pixels - lo) / (hi - lo)
    raise ContractError(f"unknown pixel scaling {scaling!r}")


def pae_plan(pixel_count: int, n_qubits: int, image_shape=None, scaling: str = "clip") -> PaePlan:
    check_positive_int(pixel_count, "pixel_count")
    check_positive_int(n_qubits, "n_qubits")
    layers = math.ceil(pixel_count / (3 * n_qubits))
    return PaePlan(n_qubits, pixel_count, layers, math.pi, image_shape and tuple(image_shape), scaling)
