"""Dense statevector simulation with exact Z expectations, shot sampling and
adjoint-mode gradients.

Amplitude ordering: qubit 0 is the most significant bit of the basis index,
so a state of ``n`` qubits reshaped to ``(2,) * n`` has qubit ``q`` on axis
``q``.

Rotation conventions (also written into exported QASM headers)::

    RX(t) = exp(-i t X / 2)    RY(t) = exp(-i t Y / 2)    RZ(t) = exp(-i t Z / 2)
    RZZ(t) = exp(-i t Z(x)Z / 2)

Internally every routine works on batches of shape ``(B, 2**n)``. Angles may
be shared across the batch (scalars) or per batch row (arrays of shape
``(B,)``), which lets one sweep simulate many images or many independent
loader circuits at once.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .exceptions import CapacityError, ContractError, UnsupportedGateError

MAX_QUBITS = 30


class GateKind(str, Enum):
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    CX = "cx"
    CZ = "cz"
    RZZ = "rzz"
    H = "h"


PARAMETERIZED = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.RZZ})
TWO_QUBIT = frozenset({GateKind.CX, GateKind.CZ, GateKind.RZZ})


@dataclass(frozen=True)
class Gate:
    """One gate of a program.

    A parameterized gate reads its angle from exactly one source:
    ``param_slot`` (trainable parameter vector), ``data_slot`` (per-image
    data vector, used by angle encoding) or ``fixed_angle`` (bound radians).
    For CX the first target is the control.
    """

    kind: GateKind
    targets: tuple
    param_slot: Optional[int] = None
    fixed_angle: Optional[float] = None
    data_slot: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        arity = 2 if self.kind in TWO_QUBIT else 1
        if len(self.targets) != arity:
            raise ContractError(
                f"{self.kind.value} takes {arity} target(s), got {self.targets}"
            )
        if arity == 2 and self.targets[0] == self.targets[1]:
            raise ContractError(f"{self.kind.value} targets must be distinct: {self.targets}")
        if min(self.targets) < 0:
            raise ContractError(f"negative qubit index in {self.targets}")
        sources = sum(
            x is not None for x in (self.param_slot, self.fixed_angle, self.data_slot)
        )
        if self.kind in PARAMETERIZED:
            if sources != 1:
                raise ContractError(
                    f"{self.kind.value} needs exactly one of param_slot, data_slot, fixed_angle"
                )
        elif sources:
            raise ContractError(f"{self.kind.value} takes no angle")
        if self.fixed_angle is not None:
            object.__setattr__(self, "fixed_angle", float(self.fixed_angle))

    @property
    def parameterized(self) -> bool:
        return self.kind in PARAMETERIZED

    @property
    def trainable(self) -> bool:
        return self.param_slot is not None


@dataclass
class CircuitProgram:
    """Ordered gate list over ``n_qubits`` with ``n_params`` trainable slots.

    ``loading_boundary`` is the index of the first processing gate; gates before
    it form the loading segment. ``n_data`` is the length of the per-image data
    vector read by ``data_slot`` gates.
    """

    n_qubits: int
    gates: list = field(default_factory=list)
    n_params: int = 0
    loading_boundary: int = 0
    n_data: int = 0

    def __post_init__(self):
        self.gates = list(self.gates)
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CapacityError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        for g in self.gates:
            if max(g.targets) >= self.n_qubits:
                raise ContractError(f"gate {g} targets a qubit outside [0, {self.n_qubits})")
            if g.param_slot is not None and not 0 <= g.param_slot < self.n_params:
                raise ContractError(f"param_slot {g.param_slot} outside [0, {self.n_params})")
            if g.data_slot is not None and not 0 <= g.data_slot < self.n_data:
                raise ContractError(f"data_slot {g.data_slot} outside [0, {self.n_data})")
        if not 0 <= self.loading_boundary <= len(self.gates):
            raise ContractError("loading_boundary outside the gate list")

    def __len__(self):
        return len(self.gates)

    def bind(self, params=None, data=None) -> "CircuitProgram":
        """Return an equivalent program whose angles are all fixed."""
        params = _check_params(self, params)
        data = _check_data(self, data)
        gates = []
        for g in self.gates:
            if g.param_slot is not None:
                g = Gate(g.kind, g.targets, fixed_angle=float(params[g.param_slot]))
            elif g.data_slot is not None:
                g = Gate(g.kind, g.targets, fixed_angle=float(data[g.data_slot]))
            gates.append(g)
        return CircuitProgram(self.n_qubits, gates, 0, self.loading_boundary)

    def without_data_gates(self) -> "CircuitProgram":
        """Drop every gate fed by the data vector, keeping trainable slots."""
        gates = [g for g in self.gates if g.data_slot is None]
        return CircuitProgram(self.n_qubits, gates, self.n_params, 0)


@dataclass
class Statevector:
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        size = self.amplitudes.shape[0] if self.amplitudes.ndim == 1 else 0
        if size < 2 or size & (size - 1):
            raise ContractError(
                f"statevector length must be a power of two >= 2, got shape {self.amplitudes.shape}"
            )

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def init_state(n_qubits: int) -> Statevector:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(amps)


# ---------------------------------------------------------------------------
# batched kernels


def _bcast(angle, ndim):
    if np.ndim(angle) == 0:
        return float(angle)
    return np.reshape(angle, (-1,) + (1,) * (ndim - 1))


def _pair_view(psi, n, a, b):
    lo, hi = (a, b) if a < b else (b, a)
    v = psi.reshape(psi.shape[0], 1 << lo, 2, 1 << (hi - lo - 1), 2, 1 << (n - hi - 1))

    def sl(bit_a, bit_b):
        bits = {a: bit_a, b: bit_b}
        return v[:, :, bits[lo], :, bits[hi], :]

    return sl


def _apply(psi, n, kind, targets, angle):
    """Apply one gate in place to a ``(B, 2**n)`` batch."""
    B = psi.shape[0]
    if kind in TWO_QUBIT:
        sl = _pair_view(psi, n, targets[0], targets[1])
        if kind is GateKind.CX:
            x0, x1 = sl(1, 0), sl(1, 1)
            tmp = x0.copy()
            x0[...] = x1
            x1[...] = tmp
        elif kind is GateKind.CZ:
            sl(1, 1)[...] *= -1.0
        else:
            ph = np.exp(-0.5j * _bcast(angle, 4))
            cph = np.conj(ph)
            sl(0, 0)[...] *= ph
            sl(1, 1)[...] *= ph
            sl(0, 1)[...] *= cph
            sl(1, 0)[...] *= cph
        return psi

    q = targets[0]
    v = psi.reshape(B, 1 << q, 2, 1 << (n - q - 1))
    a0 = v[:, :, 0, :]
    a1 = v[:, :, 1, :]
    if kind is GateKind.RZ:
        ph = np.exp(-0.5j * _bcast(angle, 3))
        a0 *= ph
        a1 *= np.conj(ph)
    elif kind is GateKind.RY:
        t = _bcast(angle, 3)
        c, s = np.cos(0.5 * t), np.sin(0.5 * t)
        t0 = a0.copy()
        a0 *= c
        a0 -= s * a1
        a1 *= c
        a1 += s * t0
    elif kind is GateKind.RX:
        t = _bcast(angle, 3)
        c, s = np.cos(0.5 * t), -1j * np.sin(0.5 * t)
        t0 = a0.copy()
        a0 *= c
        a0 += s * a1
        a1 *= c
        a1 += s * t0
    elif kind is GateKind.H:
        t0 = a0.copy()
        a0 += a1
        a0 *= _SQRT_HALF
        a1 *= -1.0
        a1 += t0
        a1 *= _SQRT_HALF
    else:  # pragma: no cover - GateKind is closed
        raise UnsupportedGateError(kind)
    return psi


_SQRT_HALF = float(np.sqrt(0.5))


def _apply_generator(phi, n, kind, targets):
    """Return ``G @ phi`` for the Pauli generator of a rotation gate."""
    out = phi.copy()
    B = phi.shape[0]
    if kind is GateKind.RZZ:
        sl = _pair_view(out, n, targets[0], targets[1])
        sl(0, 1)[...] *= -1.0
        sl(1, 0)[...] *= -1.0
        return out
    if kind not in PARAMETERIZED:
        raise UnsupportedGateError(f"{kind.value} has no known generator")
    q = targets[0]
    src = phi.reshape(B, 1 << q, 2, 1 << (n - q - 1))
    v = out.reshape(B, 1 << q, 2, 1 << (n - q - 1))
    if kind is GateKind.RZ:
        v[:, :, 1, :] *= -1.0
    elif kind is GateKind.RX:
        v[:, :, 0, :] = src[:, :, 1, :]
        v[:, :, 1, :] = src[:, :, 0, :]
    else:  # RY
        v[:, :, 0, :] = -1j * src[:, :, 1, :]
        v[:, :, 1, :] = 1j * src[:, :, 0, :]
    return out


def _negate(angle):
    return None if angle is None else -angle


def _check_params(program, params):
    if params is None:
        params = np.zeros(0)
    params = np.asarray(params, dtype=float)
    if params.shape[-1:] != (program.n_params,) and not (
        program.n_params == 0 and params.size == 0
    ):
        raise ContractError(
            f"expected {program.n_params} parameters, got shape {params.shape}"
        )
    return params


def _check_data(program, data):
    if program.n_data == 0:
        return data
    if data is None:
        raise ContractError(f"program reads a data vector of length {program.n_data}")
    data = np.asarray(data, dtype=float)
    if data.shape[-1] != program.n_data:
        raise ContractError(f"expected data of length {program.n_data}, got shape {data.shape}")
    return data


def gate_angles(program: CircuitProgram, params=None, data=None) -> list:
    """Resolve the angle of every gate (``None`` for H/CX/CZ).

    Each entry is a float or, when ``params``/``data`` carry a batch axis, an
    array of shape ``(B,)``.
    """
    params = _check_params(program, params)
    data = _check_data(program, data)
    out = []
    for g in program.gates:
        if g.param_slot is not None:
            out.append(params[..., g.param_slot])
        elif g.data_slot is not None:
            out.append(data[..., g.data_slot])
        else:
            out.append(g.fixed_angle)
    return out


def _batch_size(*arrays):
    sizes = {a.shape[0] for a in arrays if a is not None and np.ndim(a) == 2}
    if len(sizes) > 1:
        raise ContractError(f"inconsistent batch sizes {sorted(sizes)}")
    return sizes.pop() if sizes else 1


def run_batch(program: CircuitProgram, params=None, data=None, initial=None) -> np.ndarray:
    """Simulate a batch and return final amplitudes of shape ``(B, 2**n)``.

    ``params`` is ``(n_params,)`` or ``(B, n_params)``; ``data`` is
    ``(n_data,)`` or ``(B, n_data)``; ``initial`` is ``(B, 2**n)`` or ``None``
    for the all-zeros state.
    """
    n = program.n_qubits
    params = _check_params(program, params)
    data = _check_data(program, data)
    if initial is not None:
        initial = np.asarray(initial, dtype=np.complex128)
        if initial.ndim == 1:
            initial = initial[None, :]
        if initial.shape[1] != 1 << n:
            raise ContractError(f"initial state has {initial.shape[1]} amplitudes, expected {1 << n}")
    B = _batch_size(params, data, initial)
    if initial is None:
        psi = np.zeros((B, 1 << n), dtype=np.complex128)
        psi[:, 0] = 1.0
    else:
        psi = np.array(np.broadcast_to(initial, (B, 1 << n)), dtype=np.complex128, order="C")
    for g, a in zip(program.gates, gate_angles(program, params, data)):
        _apply(psi, n, g.kind, g.targets, a)
    return psi


def adjoint_vjp(program: CircuitProgram, params, final, adjoint, data=None) -> np.ndarray:
    """Backward sweep returning ``d<psi|O|psi>/d params`` per batch row.

    ``final`` holds the forward result ``psi`` and ``adjoint`` holds ``O psi``
    for a Hermitian observable ``O``; both have shape ``(B, 2**n)`` and are not
    modified. Returns ``(B, n_params)``. Only three working vectors per row are
    alive at any time: the forward state, the adjoint state and one
    generator product.
    """
    n = program.n_qubits
    angles = gate_angles(program, params, data)
    phi = np.array(final, dtype=np.complex128, order="C")
    lam = np.array(adjoint, dtype=np.complex128, order="C")
    if phi.ndim == 1:
        phi, lam = phi[None, :], lam[None, :]
    grads = np.zeros((phi.shape[0], program.n_params))
    trainable = [i for i, g in enumerate(program.gates) if g.param_slot is not None]
    if not trainable:
        return grads
    for i in range(len(program.gates) - 1, trainable[0] - 1, -1):
        g = program.gates[i]
        if g.param_slot is not None:
            gphi = _apply_generator(phi, n, g.kind, g.targets)
            grads[:, g.param_slot] += np.einsum("bi,bi->b", lam.conj(), gphi).imag
        a = _negate(angles[i])
        _apply(phi, n, g.kind, g.targets, a)
        _apply(lam, n, g.kind, g.targets, a)
    return grads


@functools.lru_cache(maxsize=64)
def z_signs(n_qubits: int, qubits: tuple) -> np.ndarray:
    """``(len(qubits), 2**n)`` table of Z eigenvalues (+1 for bit 0, -1 for bit 1)."""
    idx = np.arange(1 << n_qubits)
    rows = [1.0 - 2.0 * ((idx >> (n_qubits - 1 - q)) & 1) for q in qubits]
    out = np.array(rows, dtype=float).reshape(len(qubits), 1 << n_qubits)
    out.setflags(write=False)
    return out


def expectations_z(psi: np.ndarray, n_qubits: int, qubits: Sequence[int]) -> np.ndarray:
    """Batched ``<Z_q>``: ``(B, 2**n)`` amplitudes -> ``(B, len(qubits))``."""
    probs = np.abs(np.atleast_2d(psi)) ** 2
    return probs @ z_signs(n_qubits, tuple(qubits)).T


# ---------------------------------------------------------------------------
# single-state API


def _check_qubit(state_n, qubit):
    if not 0 <= int(qubit) < state_n:
        raise ContractError(f"qubit {qubit} outside [0, {state_n})")


def apply_gate(state: Statevector, gate: Gate, angle: Optional[float] = None) -> Statevector:
    """Return ``gate`` applied to ``state``; the input is left untouched.

    Parameterized gates take ``angle`` or, failing that, their own
    ``fixed_angle``.
    """
    n = state.n_qubits
    for t in gate.targets:
        _check_qubit(n, t)
    if gate.parameterized:
        if angle is None:
            angle = gate.fixed_angle
        if angle is None:
            raise ContractError(f"{gate.kind.value} requires an angle")
    elif angle is not None:
        raise ContractError(f"{gate.kind.value} takes no angle")
    psi = state.amplitudes[None, :].copy()
    _apply(psi, n, gate.kind, gate.targets, angle)
    return Statevector(psi[0])


def run_circuit(program: CircuitProgram, params=None, *, data=None, initial_state=None) -> Statevector:
    params = _check_params(program, params)
    if params.ndim != 1:
        raise ContractError("run_circuit takes a single parameter vector")
    if initial_state is not None and isinstance(initial_state, Statevector):
        initial_state = initial_state.amplitudes
    return Statevector(run_batch(program, params, data, initial_state)[0])


def expectation_z(state: Statevector, qubit: int) -> float:
    _check_qubit(state.n_qubits, qubit)
    return float(expectations_z(state.amplitudes, state.n_qubits, (int(qubit),))[0, 0])


def zero_probabilities(state: Statevector, qubits: Sequence[int]) -> np.ndarray:
    """Exact ``P(qubit = 0)`` for each requested qubit."""
    for q in qubits:
        _check_qubit(state.n_qubits, q)
    e = expectations_z(state.amplitudes, state.n_qubits, tuple(qubits))[0]
    return (e + 1.0) / 2.0


def sample_shots(state: Statevector, qubits: Sequence[int], shots: int, seed=None) -> np.ndarray:
    """Draw ``shots`` bitstrings and count the 0-outcomes of each qubit.

    Returns an integer array aligned with ``qubits``; ``counts / shots`` is the
    estimator of ``P(qubit = 0)``.
    """
    if int(shots) < 1:
        raise ContractError(f"shots must be >= 1, got {shots}")
    n = state.n_qubits
    for q in qubits:
        _check_qubit(n, q)
    rng = np.random.default_rng(seed)
    probs = state.probabilities()
    probs = probs / probs.sum()
    hits = rng.multinomial(int(shots), probs)
    zero = z_signs(n, tuple(int(q) for q in qubits)) > 0
    return (zero * hits).sum(axis=1).astype(np.int64)


def adjoint_gradients(
    program: CircuitProgram,
    params,
    observed_qubits: Sequence[int],
    *,
    data=None,
    initial_state=None,
) -> np.ndarray:
    """Jacobian ``d<Z_q>/d theta_k`` with shape ``(len(observed_qubits), n_params)``.

    One forward simulation, then one backward sweep per observed qubit; all
    sweeps run together as rows of a single batch.
    """
    params = _check_params(program, params)
    qubits = tuple(int(q) for q in observed_qubits)
    for q in qubits:
        _check_qubit(program.n_qubits, q)
    for g in program.gates:
        if g.param_slot is not None and g.kind not in PARAMETERIZED:
            raise UnsupportedGateError(f"{g.kind} has no known generator")
    if not qubits or program.n_params == 0:
        return np.zeros((len(qubits), program.n_params))
    if isinstance(initial_state, Statevector):
        initial_state = initial_state.amplitudes
    psi = run_batch(program, params, data, initial_state)
    phi = np.repeat(psi, len(qubits), axis=0)
    lam = phi * z_signs(program.n_qubits, qubits)
    return adjoint_vjp(program, params, phi, lam, data)


def combine_programs(programs: Sequence[CircuitProgram]) -> CircuitProgram:
    """Place programs on disjoint consecutive registers, first program on the
    most significant qubits. Parameter and data slots are concatenated."""
    gates, nq, np_, nd = [], 0, 0, 0
    for p in programs:
        for g in p.gates:
            gates.append(
                replace(
                    g,
                    targets=tuple(t + nq for t in g.targets),
                    param_slot=None if g.param_slot is None else g.param_slot + np_,
                    data_slot=None if g.data_slot is None else g.data_slot + nd,
                )
            )
        nq += p.n_qubits
        np_ += p.n_params
        nd += p.n_data
    return CircuitProgram(nq, gates, np_, 0, nd)
