"""Deployment tooling: QASM 2.0 exchange, gate statistics, finite-shot
inference, the random-guessing baseline and model persistence."""
from __future__ import annotations

import ast
import csv
import hashlib
import json
import math
import operator
import re
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import stats

from ._validation import enum_value
from .encoders import LoaderConfig, PaePlan
from .exceptions import (
    ContractError,
    CorruptionError,
    IncompatibleVersionError,
    ModelFormatError,
    QasmParseError,
    SchemeMismatchError,
    UnsupportedFeatureError,
    UnsupportedGateError,
)
from .model import (
    EncodedBatch,
    ModelSpec,
    ProcessingConfig,
    TrainableParams,
    amplitude_plan,
    assemble,
    block_states,
    encode,
    readout,
)
from .simulator import CircuitProgram, Gate, GateKind, Statevector, sample_shots, zero_probabilities

__all__ = [
    "BaselineQuantile", "DeviationReport", "GateStats", "export_qasm", "gate_stats", "import_qasm",
    "load_model", "random_baseline_quantile", "save_model", "shot_inference", "write_deviation_csv",
]

CONVENTIONS = (
    "rx/ry/rz(t) = exp(-i t P / 2); rzz(t) = exp(-i t Z(x)Z / 2); "
    "q[0] is the most significant bit of the basis index"
)

# ---------------------------------------------------------------------------
# QASM

_QASM_NAMES = {k: k.value for k in GateKind}
_UNSUPPORTED = {"measure", "creg", "barrier", "reset", "if", "opaque", "gate", "u", "u1", "u2", "u3", "U", "CX"}


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def export_qasm(program: CircuitProgram, params=None, data=None) -> str:
    """Serialise ``program`` with every angle bound to a decimal literal."""
    bound = program.bind(params, data)
    lines = [
        "OPENQASM 2.0;",
        'include "qelib1.inc";',
        f"// conventions: {CONVENTIONS}",
        f"qreg q[{bound.n_qubits}];",
    ]
    for g in bound.gates:
        if g.kind not in _QASM_NAMES:
            raise UnsupportedGateError(f"gate kind {g.kind!r} has no QASM form")
        name = _QASM_NAMES[g.kind]
        args = ",".join(f"q[{t}]" for t in g.targets)
        if g.parameterized:
            lines.append(f"{name}({_fmt(g.fixed_angle)}) {args};")
        else:
            lines.append(f"{name} {args};")
    return "\n".join(lines) + "\n"


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _eval_angle(node):
    if isinstance(node, ast.Expression):
        return _eval_angle(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_angle(node.left), _eval_angle(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_angle(node.operand))
    raise ValueError


def _parse_angle(token: str, line: int, column: int) -> float:
    try:
        value = _eval_angle(ast.parse(token.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError, RecursionError):
        raise QasmParseError(f"malformed angle {token.strip()!r}", line, column) from None
    if not math.isfinite(value):
        raise QasmParseError(f"non-finite angle {token.strip()!r}", line, column)
    return value


_STATEMENT = re.compile(
    r"^(?P<name>[A-Za-z_]\w*)\s*(?:\((?P<angle>[^()]*(?:\([^()]*\)[^()]*)*)\))?\s*(?P<args>.*)$", re.S
)
_QARG = re.compile(r"^\s*(?P<reg>[A-Za-z_]\w*)\s*\[\s*(?P<idx>\d+)\s*\]\s*$")


def _statements(text):
    """Yield ``(statement, line, column)`` with comments stripped."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        code = raw.split("//", 1)[0]
        pos = 0
        while True:
            end = code.find(";", pos)
            chunk = code[pos:] if end < 0 else code[pos:end]
            stripped = chunk.strip()
            if stripped:
                col = pos + len(chunk) - len(chunk.lstrip()) + 1
                if end < 0:
                    raise QasmParseError(f"missing ';' after {stripped!r}", lineno, col)
                yield stripped, lineno, col
            if end < 0:
                break
            pos = end + 1


def import_qasm(text: str) -> CircuitProgram:
    """Parse the QASM subset written by :func:`export_qasm` into a bound program."""
    n_qubits, reg, gates = None, None, []
    saw_header = False
    for stmt, line, col in _statements(text):
        keyword = re.split(r"[\s(\[]", stmt, 1)[0]
        if keyword == "OPENQASM":
            if stmt.split()[1:] != ["2.0"]:
                raise UnsupportedFeatureError(f"only OPENQASM 2.0 is supported, got {stmt!r}", line, col)
            saw_header = True
            continue
        if not saw_header:
            raise QasmParseError("expected 'OPENQASM 2.0;' header", line, col)
        if keyword == "include":
            continue
        if keyword in _UNSUPPORTED:
            raise UnsupportedFeatureError(f"'{keyword}' is not supported", line, col)
        if keyword == "qreg":
            m = re.fullmatch(r"qreg\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]", stmt)
            if not m:
                raise QasmParseError(f"malformed register declaration {stmt!r}", line, col)
            if reg is not None:
                raise UnsupportedFeatureError("only one quantum register is supported", line, col)
            reg, n_qubits = m.group(1), int(m.group(2))
            continue
        m = _STATEMENT.match(stmt)
        try:
            kind = GateKind(keyword)
        except ValueError:
            raise UnsupportedFeatureError(f"gate '{keyword}' is not supported", line, col) from None
        if reg is None:
            raise QasmParseError(f"gate '{keyword}' before any qreg declaration", line, col)
        angle_text = m.group("angle") if m else None
        targets = []
        for arg in (m.group("args").split(",") if m and m.group("args") else []):
            qm = _QARG.match(arg)
            if not qm or qm.group("reg") != reg:
                raise QasmParseError(f"malformed qubit argument {arg.strip()!r}", line, col)
            idx = int(qm.group("idx"))
            if idx >= n_qubits:
                raise QasmParseError(f"qubit index {idx} outside register of size {n_qubits}", line, col)
            targets.append(idx)
        angle = None
        if kind in (GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.RZZ):
            if angle_text is None:
                raise QasmParseError(f"gate '{keyword}' needs an angle", line, col)
            angle = _parse_angle(angle_text, line, col + stmt.index("(") + 1)
        elif angle_text is not None:
            raise QasmParseError(f"gate '{keyword}' takes no angle", line, col)
        try:
            gates.append(Gate(kind, tuple(targets), fixed_angle=angle))
        except ContractError as exc:
            raise QasmParseError(str(exc), line, col) from None
    if n_qubits is None:
        raise QasmParseError("no qreg declaration found")
    return CircuitProgram(n_qubits, gates, 0)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class GateStats:
    n_1q: int
    n_2q: int
    depth: int
    per_kind: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.n_1q + self.n_2q


def gate_stats(program: CircuitProgram) -> GateStats:
    """Gate counts and greedy logical depth: each gate sits one layer after
    the latest gate already on any of its qubits."""
    level = [0] * program.n_qubits
    per_kind, n_1q, n_2q = {}, 0, 0
    for g in program.gates:
        d = max(level[t] for t in g.targets) + 1
        for t in g.targets:
            level[t] = d
        per_kind[g.kind.value] = per_kind.get(g.kind.value, 0) + 1
        if len(g.targets) == 1:
            n_1q += 1
        else:
            n_2q += 1
    return GateStats(n_1q, n_2q, max(level, default=0), per_kind)


# ---------------------------------------------------------------------------
# finite-shot inference


@dataclass(frozen=True)
class DeviationReport:
    p_sim: np.ndarray
    p_expt: np.ndarray
    l1: float
    shots: int

    @classmethod
    def from_probabilities(cls, p_sim, p_expt, shots: int) -> "DeviationReport":
        p_sim = np.asarray(p_sim, dtype=float)
        p_expt = np.asarray(p_expt, dtype=float)
        if p_sim.shape != p_expt.shape:
            raise ContractError("simulated and estimated probabilities differ in length")
        return cls(p_sim, p_expt, float(np.abs(p_sim - p_expt).sum()), int(shots))


def write_deviation_csv(report: DeviationReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["qubit", "p_sim", "p_expt"])
        for i, (a, b) in enumerate(zip(report.p_sim, report.p_expt)):
            w.writerow([i, repr(float(a)), repr(float(b))])


def shot_inference(model: ModelSpec, params: TrainableParams, image, shots: int, seed=None):
    """Estimate every measured ``P(0)`` from ``shots`` samples per block.

    Returns the :class:`DeviationReport` and the class predicted by feeding
    the estimated ``<Z> = 2P - 1`` through the readout head.
    """
    if int(shots) < 1:
        raise ContractError(f"shots must be >= 1, got {shots}")
    if not isinstance(image, EncodedBatch):
        image = encode(model, np.asarray(getattr(image, "pixels", image), dtype=float)[None])
    states = block_states(model, image, params)[0]
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = root.spawn(model.n_blocks)
    p_sim, p_expt = [], []
    for k in range(model.n_blocks):
        sv = Statevector(states[k])
        p_sim.append(zero_probabilities(sv, model.measured_local))
        counts = sample_shots(sv, model.measured_local, int(shots), seed=np.random.default_rng(streams[k]))
        p_expt.append(counts / int(shots))
    report = DeviationReport.from_probabilities(np.concatenate(p_sim), np.concatenate(p_expt), shots)
    probs = readout((2.0 * report.p_expt - 1.0)[None], params)[0]
    return report, int(np.argmax(probs))


# ---------------------------------------------------------------------------
# random-guessing baseline


class BaselineQuantile(NamedTuple):
    monte_carlo: float
    exact: float


def random_baseline_quantile(n_images: int, p_success: float, quantile: float, trials: int = 100_000,
                             seed=0) -> BaselineQuantile:
    """Accuracy a random guesser stays below with probability ``quantile``.

    The Monte Carlo value uses the inverted empirical CDF of ``trials``
    Binomial draws; ``exact`` inverts the Binomial CDF directly.
    """
    if int(n_images) < 1:
        raise ContractError("n_images must be >= 1")
    if not 0 < p_success < 1 or not 0 < quantile < 1:
        raise ContractError("p_success and quantile must lie in (0, 1)")
    if int(trials) < 1:
        raise ContractError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    draws = rng.binomial(int(n_images), p_success, int(trials)) / n_images
    mc = float(np.quantile(draws, quantile, method="inverted_cdf"))
    exact = float(stats.binom.ppf(quantile, int(n_images), p_success)) / n_images
    return BaselineQuantile(mc, exact)


# ---------------------------------------------------------------------------
# model persistence

MODEL_MAGIC = "qscene-model"
MODEL_VERSION = 1


def _plan_record(model: ModelSpec) -> dict:
    plan = model.plan
    if isinstance(plan, PaePlan):
        rec = asdict(plan)
        rec["image_shape"] = list(plan.image_shape) if plan.image_shape else None
        return rec
    return {"grid": list(plan.partition.grid), "loader": asdict(plan.loader)}


def _plan_from_record(scheme, image_shape, rec):
    if scheme == "pae":
        rec = dict(rec)
        rec["image_shape"] = tuple(rec["image_shape"]) if rec["image_shape"] else None
        return PaePlan(**rec)
    return amplitude_plan(image_shape, tuple(rec["grid"]), LoaderConfig(**rec["loader"]))


def save_model(model: ModelSpec, params: TrainableParams, path, *, seed=None, metadata: Optional[dict] = None) -> None:
    """Write a versioned, checksummed text artifact (see README for layout)."""
    body = {
        "scheme": model.scheme,
        "image_shape": list(model.image_shape),
        "n_classes": model.n_classes,
        "block_qubits": model.block_qubits,
        "n_blocks": model.n_blocks,
        "measured_local": list(model.measured_local),
        "processing": asdict(model.processing_config),
        "plan": _plan_record(model),
        "seed": seed,
        "conventions": CONVENTIONS,
        "metadata": metadata or {},
        "params": {
            "quantum": [float(x) for x in params.quantum],
            "weights": [[float(x) for x in row] for row in params.weights],
            "bias": [float(x) for x in params.bias],
        },
    }
    text = json.dumps(body, indent=1, allow_nan=False) + "\n"
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{MODEL_MAGIC} {MODEL_VERSION}\nsha256 {digest}\n{text}")


def load_model(path, expected_scheme: Optional[str] = None, with_metadata: bool = False):
    """Read an artifact written by :func:`save_model`.

    Returns ``(model, params)``, plus the metadata dict when
    ``with_metadata`` is set.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise CorruptionError(f"{path}: not a text model artifact") from None
    first, _, rest = text.partition("\n")
    parts = first.split()
    if len(parts) != 2 or parts[0] != MODEL_MAGIC:
        raise CorruptionError(f"{path}: missing '{MODEL_MAGIC}' header")
    if parts[1] != str(MODEL_VERSION):
        raise IncompatibleVersionError(f"{path}: format version {parts[1]}, this build reads {MODEL_VERSION}")
    check, _, body_text = rest.partition("\n")
    check = check.split()
    if len(check) != 2 or check[0] != "sha256":
        raise CorruptionError(f"{path}: missing checksum line")
    if hashlib.sha256(body_text.encode("utf-8")).hexdigest() != check[1]:
        raise CorruptionError(f"{path}: checksum mismatch (truncated or edited file)")
    try:
        body = json.loads(body_text)
        scheme = body["scheme"]
        if expected_scheme is not None and scheme != enum_value(expected_scheme):
            raise SchemeMismatchError(f"{path}: artifact holds a {scheme.upper()} model, expected "
                                      f"{str(expected_scheme).upper()}")
        image_shape = tuple(body["image_shape"])
        plan = _plan_from_record(scheme, image_shape, body["plan"])
        measured = body["measured_local"]
        model = assemble(scheme, plan, ProcessingConfig(**body["processing"]), body["n_classes"],
                         None if scheme == "bae" else measured)
        p = body["params"]
        params = TrainableParams(np.array(p["quantum"], dtype=float),
                                 np.array(p["weights"], dtype=float).reshape(model.n_classes, model.n_measured),
                                 np.array(p["bias"], dtype=float))
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptionError(f"{path}: malformed model body ({exc})") from None
    if params.quantum.shape != (model.n_quantum_params,) or params.bias.shape != (model.n_classes,):
        raise CorruptionError(f"{path}: parameter blocks do not match the model structure")
    if with_metadata:
        meta = dict(body.get("metadata") or {})
        meta.setdefault("seed", body.get("seed"))
        return model, params, meta
    return model, params
