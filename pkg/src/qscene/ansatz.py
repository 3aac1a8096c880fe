"""Hardware-efficient ansatz construction."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ._validation import enum_value
from .exceptions import ContractError
from .simulator import CircuitProgram, Gate, GateKind


class ConnectivityKind(str, Enum):
    ALL_TO_ALL = "all_to_all"
    RING = "ring"
    LINE = "line"


@dataclass(frozen=True)
class Connectivity:
    kind: ConnectivityKind
    n_qubits: int

    def __post_init__(self):
        object.__setattr__(self, "kind", ConnectivityKind(enum_value(self.kind)))
        if self.n_qubits < 1:
            raise ContractError("connectivity needs at least one qubit")
        if self.kind is ConnectivityKind.RING and self.n_qubits < 3:
            raise ContractError("ring connectivity requires at least 3 qubits")

    def edges(self) -> list:
        n = self.n_qubits
        if self.kind is ConnectivityKind.ALL_TO_ALL:
            return [(i, j) for i in range(n) for j in range(i + 1, n)]
        edges = [(i, i + 1) for i in range(n - 1)]
        if self.kind is ConnectivityKind.RING:
            edges.append((n - 1, 0))
        return edges

    def layer_edges(self, layer: int, brickwork: bool) -> list:
        """Edges entangled in circuit layer ``layer``.

        With brickwork, even layers use the edges at even positions of
        :meth:`edges` and odd layers the rest.
        """
        edges = self.edges()
        if not brickwork:
            return edges
        return edges[layer % 2 :: 2]


def _as_connectivity(connectivity, n_qubits):
    if connectivity is None:
        return Connectivity(ConnectivityKind.LINE, n_qubits)
    if isinstance(connectivity, Connectivity):
        if connectivity.n_qubits != n_qubits:
            raise ContractError("connectivity qubit count does not match the circuit")
        return connectivity
    return Connectivity(connectivity, n_qubits)


def hea_layer(gates, n_qubits, layer, connectivity, entangler, brickwork, rotations, next_slot):
    """Append one HEA layer to ``gates``; return the next free parameter slot."""
    for q in range(n_qubits):
        for kind in rotations:
            gates.append(Gate(kind, (q,), param_slot=next_slot))
            next_slot += 1
    ent = GateKind(enum_value(entangler))
    for a, b in connectivity.layer_edges(layer, brickwork):
        if ent is GateKind.RZZ:
            gates.append(Gate(ent, (a, b), param_slot=next_slot))
            next_slot += 1
        else:
            gates.append(Gate(ent, (a, b)))
    return next_slot


def build_hea(
    n_qubits: int,
    layers: int,
    connectivity=None,
    entangler="cx",
    brickwork: bool = False,
    rotations=("ry", "rz"),
) -> CircuitProgram:
    """Layers of single-qubit rotations followed by entanglers on the edges.

    Every rotation has its own parameter slot, and so does every RZZ
    entangler. CX/CZ entanglers are fixed.
    """
    if layers < 1:
        raise ContractError(f"layers must be >= 1, got {layers}")
    entangler = enum_value(entangler)
    if entangler not in ("cx", "cz", "rzz"):
        raise ContractError(f"unsupported entangler {entangler!r}")
    conn = _as_connectivity(connectivity, n_qubits)
    gates, slot = [], 0
    for layer in range(layers):
        slot = hea_layer(gates, n_qubits, layer, conn, entangler, brickwork, rotations, slot)
    return CircuitProgram(n_qubits, gates, slot)
