import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference, dense_run, dense_z
from qscene.ansatz import Connectivity, build_hea
from qscene.encoders import LoaderConfig, pae_plan
from qscene.exceptions import ContractError
from qscene.model import (
    ProcessingConfig,
    TrainableParams,
    amplitude_plan,
    assemble,
    batch_loss_and_gradients,
    cross_entropy,
    encode,
    expectations,
    forward,
    forward_batch,
    full_program,
    init_params,
    loss_and_gradients,
    predict,
    readout,
    softmax,
)
from qscene.simulator import GateKind, expectation_z, run_circuit

FAST_LOADER = LoaderConfig(layers=2, steps=20)


def _count(program, kind):
    return sum(g.kind is GateKind(kind) for g in program.gates)


class TestBuildHea:
    def test_line_single_layer(self):
        p = build_hea(4, 1, Connectivity("line", 4), "cx")
        assert p.n_params == 8 and _count(p, "cx") == 3

    def test_ring_brickwork(self):
        p = build_hea(12, 2, Connectivity("ring", 12), "cx", brickwork=True)
        assert p.n_params == 48 and _count(p, "cx") == 12
        cx_layers = []
        layer = -1
        for g in p.gates:
            if g.kind is GateKind.RY and g.targets == (0,):
                layer += 1
                cx_layers.append(0)
            if g.kind is GateKind.CX:
                cx_layers[layer] += 1
        assert cx_layers == [6, 6]

    def test_single_qubit(self):
        p = build_hea(1, 3, Connectivity("line", 1), "cx")
        assert p.n_params == 6 and len([g for g in p.gates if len(g.targets) == 2]) == 0

    def test_rzz_slots(self):
        p = build_hea(4, 2, Connectivity("line", 4), "rzz")
        assert p.n_params == 2 * 4 * 2 + _count(p, "rzz")
        assert len({g.param_slot for g in p.gates if g.trainable}) == p.n_params

    def test_ring_needs_three(self):
        with pytest.raises(ContractError):
            Connectivity("ring", 2)

    @given(n=st.integers(2, 8), layers=st.integers(1, 4), kind=st.sampled_from(["line", "ring", "all_to_all"]),
           brick=st.booleans())
    def test_parameter_count(self, n, layers, kind, brick):
        if kind == "ring" and n < 3:
            return
        p = build_hea(n, layers, Connectivity(kind, n), "cx", brickwork=brick)
        assert p.n_params == 2 * n * layers


class TestAssemble:
    def test_bae_four_blocks_of_fourteen(self):
        model = assemble("bae", amplitude_plan((256, 256), (2, 2)), n_classes=4)
        assert model.n_qubits == 56 and model.n_measured == 4
        assert model.measured_qubits == (0, 14, 28, 42)

    def test_bae_six_blocks_of_twelve(self):
        model = assemble("bae", amplitude_plan((128, 192), (2, 3)), n_classes=2)
        assert model.n_qubits == 72 and model.n_measured == 6

    def test_pae_interleaves(self):
        plan = pae_plan(384, 16, (16, 24))
        model = assemble("pae", plan, ProcessingConfig(layers=8))
        kinds = ["U" if g.data_slot is not None else "P" for g in model.processing.gates]
        runs = [kinds[0]]
        for k in kinds[1:]:
            if k != runs[-1]:
                runs.append(k)
        assert runs == ["U", "P"] * 8

    def test_pae_too_few_layers(self):
        with pytest.raises(ContractError):
            assemble("pae", pae_plan(384, 16), ProcessingConfig(layers=7))

    def test_default_measured(self):
        assert assemble("pae", pae_plan(12, 4), ProcessingConfig(layers=1)).measured_qubits == (0, 1)
        assert assemble("aae", amplitude_plan((4, 4))).measured_qubits == (0, 1)

    def test_bae_rejects_other_readout(self):
        with pytest.raises(ContractError):
            assemble("bae", amplitude_plan((4, 4), (2, 2)), measured_qubits=[1, 3, 5, 7])

    def test_param_count_matches_flatten(self):
        model = assemble("bae", amplitude_plan((8, 8), (2, 2)), ProcessingConfig(layers=2), n_classes=3)
        assert init_params(model).flatten().size == model.n_params


class TestSoftmax:
    def test_closed_form(self):
        np.testing.assert_allclose(softmax([math.log(3), 0]), [0.75, 0.25], atol=1e-15)

    def test_uniform_four_class_loss(self):
        probs = softmax(np.zeros(4))
        assert abs(cross_entropy(probs, [2])[0] - math.log(4)) < 1e-12

    @settings(max_examples=200)
    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=8), st.floats(-100, 100))
    def test_properties(self, logits, shift):
        p = softmax(logits)
        assert abs(p.sum() - 1) < 1e-12
        assert np.all((p > 0) & (p <= 1))
        np.testing.assert_allclose(softmax(np.array(logits) + shift), p, atol=1e-12)

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.floats(0.01, 100))
    def test_positive_scaling_keeps_argmax(self, logits, c):
        logits = np.array(logits)
        if np.sum(logits == logits.max()) > 1:
            return
        assert np.argmax(softmax(c * logits)) == np.argmax(softmax(logits))


def _toy_pae():
    plan = pae_plan(4, 2, (2, 2))
    model = assemble("pae", plan, ProcessingConfig(layers=2, entangler="cz"))
    rng = np.random.default_rng(2)
    params = TrainableParams(rng.uniform(-2, 2, model.n_quantum_params), rng.normal(size=(2, 2)),
                             rng.normal(size=2))
    return model, params


class TestForward:
    def test_zero_readout_is_uniform(self):
        model = assemble("pae", pae_plan(4, 2, (2, 2)), ProcessingConfig(layers=1))
        params = init_params(model)
        params.weights[:] = 0
        np.testing.assert_allclose(forward(model, np.full((2, 2), 0.3), params), [0.5, 0.5], atol=1e-15)

    def test_toy_model_matches_dense_oracle(self):
        model, params = _toy_pae()
        image = np.array([[0.1, 0.7], [0.4, 0.9]])
        psi = dense_run(model.processing, params.quantum, model.plan.angles(image))
        e = np.array([dense_z(psi, q, 2) for q in model.measured_qubits])
        logits = params.weights @ e + params.bias
        expected = np.exp(logits) / np.exp(logits).sum()
        np.testing.assert_allclose(forward(model, image, params), expected, atol=1e-10)

    def test_shape_mismatch(self):
        model, params = _toy_pae()
        with pytest.raises(ContractError):
            forward(model, np.ones((3, 3)), params)

    @pytest.mark.parametrize("probs, expected", [([0.9, 0.1], 0), ([0.5, 0.5], 0), ([0.1, 0.2, 0.6, 0.1], 2)])
    def test_predict(self, probs, expected):
        model = assemble("pae", pae_plan(4, 2, (2, 2)), ProcessingConfig(layers=1), n_classes=len(probs))
        params = init_params(model)
        params.weights[:] = 0
        params.bias = np.log(probs)
        assert predict(model, np.full((2, 2), 0.5), params) == expected

    def test_probabilities_sum_to_one(self):
        model, params = _toy_pae()
        imgs = np.random.default_rng(0).uniform(0, 1, (20, 2, 2))
        np.testing.assert_allclose(forward_batch(model, imgs, params).sum(axis=1), 1, atol=1e-12)


class TestGradients:
    def test_perfect_prediction(self):
        model, params = _toy_pae()
        params.weights[:] = 0
        params.bias = np.array([800.0, 0.0])
        loss, grads = loss_and_gradients(model, np.full((2, 2), 0.5), 0, params)
        assert loss == 0.0
        assert np.all(grads.weights == 0) and np.all(grads.bias == 0)

    def test_uniform_four_class(self):
        model = assemble("pae", pae_plan(4, 2, (2, 2)), ProcessingConfig(layers=1), n_classes=4)
        params = init_params(model)
        params.weights[:] = 0
        loss, _ = loss_and_gradients(model, np.full((2, 2), 0.5), 3, params)
        assert abs(loss - math.log(4)) < 1e-12

    def test_bad_label(self):
        model, params = _toy_pae()
        with pytest.raises(ContractError):
            loss_and_gradients(model, np.full((2, 2), 0.5), 2, params)

    @pytest.mark.parametrize("scheme", ["pae", "aae", "bae"])
    def test_finite_differences_all_parameters(self, scheme):
        rng = np.random.default_rng(11)
        if scheme == "pae":
            model = assemble("pae", pae_plan(24, 6, (4, 6)), ProcessingConfig(layers=2, connectivity="ring"), 3)
            images = rng.uniform(0, 1, (3, 4, 6))
        elif scheme == "aae":
            model = assemble("aae", amplitude_plan((8, 8), loader=FAST_LOADER), ProcessingConfig(layers=2), 3)
            images = rng.uniform(0.1, 1, (3, 8, 8))
        else:
            model = assemble("bae", amplitude_plan((4, 8), (2, 2), FAST_LOADER),
                             ProcessingConfig(layers=2, entangler="rzz"), 3)
            images = rng.uniform(0.1, 1, (3, 4, 8))
        labels = np.array([0, 2, 1])
        params = init_params(model, 4)
        params.quantum = rng.uniform(-np.pi, np.pi, model.n_quantum_params)
        enc = encode(model, images)
        _, grads = batch_loss_and_gradients(model, enc, labels, params)

        def loss(vec):
            return batch_loss_and_gradients(model, enc, labels, TrainableParams.unflatten(model, vec))[0]

        fd = central_difference(loss, params.flatten(), 1e-5)
        assert np.max(np.abs(fd - grads.flatten())) < 1e-6

    def test_loader_parameters_get_no_gradient(self):
        model = assemble("bae", amplitude_plan((4, 4), (2, 2), FAST_LOADER), ProcessingConfig(layers=1))
        params = init_params(model)
        enc = encode(model, np.random.default_rng(0).uniform(0.1, 1, (2, 4, 4)))
        before = enc.loader_params.copy()
        _, grads = batch_loss_and_gradients(model, enc, [0, 1], params)
        assert grads.quantum.shape == (model.n_quantum_params,)
        assert grads.flatten().shape == (model.n_params,)
        np.testing.assert_array_equal(enc.loader_params, before)


def test_bae_blocks_match_joint_circuit():
    model = assemble("bae", amplitude_plan((4, 8), (2, 2), FAST_LOADER), ProcessingConfig(layers=2), 2)
    assert model.n_qubits == 12
    rng = np.random.default_rng(9)
    params = init_params(model, 1)
    params.quantum = rng.uniform(-1, 1, model.n_quantum_params)
    images = rng.uniform(0.1, 1, (2, 4, 8))
    enc = encode(model, images)
    split = expectations(model, enc, params)
    for row in range(2):
        prog = full_program(model, enc, row)
        state = run_circuit(prog, params.quantum)
        joint = [expectation_z(state, q) for q in model.measured_qubits]
        np.testing.assert_allclose(split[row], joint, atol=1e-10)
        probs = readout(np.array(joint)[None], params)[0]
        np.testing.assert_allclose(forward_batch(model, enc.subset([row]), params)[0], probs, atol=1e-10)


def test_full_program_pae_binds_pixels():
    model, params = _toy_pae()
    image = np.array([[0.2, 0.4], [0.6, 0.8]])
    enc = encode(model, image[None])
    state = run_circuit(full_program(model, enc, 0), params.quantum)
    e = [expectation_z(state, q) for q in model.measured_qubits]
    np.testing.assert_allclose(expectations(model, enc, params)[0], e, atol=1e-12)
