"""Quantum image classification toolkit.

Statevector simulation with adjoint gradients, amplitude and angle image
encoders, variational classifiers trained with Adam, and deployment
helpers (QASM, shot-noise inference, model artifacts).
"""
from .ansatz import Connectivity, build_hea
from .data import Dataset, ImageTensor, ingest_directory, make_synthetic, preprocess, split
from .encoders import LoaderConfig, PaePlan, pae_plan, train_loader
from .estimator import QuantumImageClassifier
from .exceptions import (
    ContractError,
    CorruptionError,
    IncompatibleVersionError,
    NumericalError,
    QasmParseError,
    QSceneError,
    SchemeMismatchError,
    UnsupportedFeatureError,
)
from .hwio import export_qasm, gate_stats, import_qasm, load_model, random_baseline_quantile, save_model, shot_inference
from .model import ModelSpec, ProcessingConfig, TrainableParams, amplitude_plan, assemble, encode, forward, predict
from .simulator import CircuitProgram, Gate, GateKind, Statevector, adjoint_gradients, run_circuit
from .train import TrainConfig, evaluate, fit

__version__ = "0.1.0"
