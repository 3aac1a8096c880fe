import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import binomial_quantile, random_program
from qscene.encoders import LoaderConfig, pae_plan
from qscene.exceptions import (
    ContractError,
    CorruptionError,
    IncompatibleVersionError,
    QasmParseError,
    SchemeMismatchError,
    UnsupportedFeatureError,
)
from qscene.hwio import (
    DeviationReport,
    export_qasm,
    gate_stats,
    import_qasm,
    load_model,
    random_baseline_quantile,
    save_model,
    shot_inference,
    write_deviation_csv,
)
from qscene.model import ProcessingConfig, amplitude_plan, assemble, encode, forward_batch, init_params
from qscene.simulator import CircuitProgram, Gate, run_circuit

FAST_LOADER = LoaderConfig(layers=2, steps=20)


class TestQasm:
    def test_single_ry(self):
        prog = CircuitProgram(1, [Gate("ry", (0,), param_slot=0)], 1)
        assert "ry(1.5707963267948966) q[0];" in export_qasm(prog, [math.pi / 2])

    def test_empty_program(self):
        text = export_qasm(CircuitProgram(3, [], 0))
        assert "qreg q[3];" in text and text.startswith("OPENQASM 2.0;")
        back = import_qasm(text)
        assert back.n_qubits == 3 and back.gates == []

    def test_header_records_conventions(self):
        text = export_qasm(CircuitProgram(1, [], 0))
        assert "exp(-i t P / 2)" in text

    @pytest.mark.parametrize("seed", range(10))
    def test_round_trip_resimulates(self, seed):
        rng = np.random.default_rng(seed)
        prog = random_program(rng, 5, 40)
        params = rng.uniform(-np.pi, np.pi, prog.n_params)
        back = import_qasm(export_qasm(prog, params))
        a = run_circuit(prog, params).amplitudes
        b = run_circuit(back).amplitudes
        assert np.linalg.norm(a - b) < 1e-10

    def test_structurally_equal(self):
        rng = np.random.default_rng(1)
        prog = random_program(rng, 4, 25)
        params = rng.normal(size=prog.n_params)
        back = import_qasm(export_qasm(prog, params))
        assert back.gates == prog.bind(params).gates

    def test_pi_expressions(self):
        text = 'OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[2];\nrx(-pi/4) q[1]; rzz(2*pi - 0.5) q[0],q[1];\n'
        prog = import_qasm(text)
        assert prog.gates[0].fixed_angle == -math.pi / 4
        assert prog.gates[1].fixed_angle == 2 * math.pi - 0.5

    @pytest.mark.parametrize("stmt", ["measure q[0] -> c[0];", "creg c[1];", "barrier q[0];", "reset q[0];"])
    def test_unsupported(self, stmt):
        with pytest.raises(UnsupportedFeatureError) as info:
            import_qasm(f"OPENQASM 2.0;\nqreg q[1];\n{stmt}\n")
        assert info.value.line == 3

    def test_malformed_angle(self):
        with pytest.raises(QasmParseError) as info:
            import_qasm("OPENQASM 2.0;\nqreg q[1];\nry(1.5x) q[0];\n")
        assert "1.5x" in str(info.value)
        assert (info.value.line, info.value.column) == (3, 4)

    def test_bad_qubit(self):
        with pytest.raises(QasmParseError):
            import_qasm("OPENQASM 2.0;\nqreg q[1];\nh q[1];\n")

    def test_unbound_parameters(self):
        with pytest.raises(ContractError):
            export_qasm(CircuitProgram(1, [Gate("rx", (0,), param_slot=0)], 1))

    def test_code_injection_rejected(self):
        with pytest.raises(QasmParseError):
            import_qasm("OPENQASM 2.0;\nqreg q[1];\nrx(__import__('os')) q[0];\n")


class TestGateStats:
    def test_empty(self):
        s = gate_stats(CircuitProgram(2, [], 0))
        assert (s.n_1q, s.n_2q, s.depth) == (0, 0, 0)

    def test_cx_line(self):
        prog = CircuitProgram(3, [Gate("cx", (0, 1)), Gate("cx", (1, 2)), Gate("cx", (0, 1))], 0)
        s = gate_stats(prog)
        assert (s.n_2q, s.depth) == (3, 3)

    def test_parallel(self):
        s = gate_stats(CircuitProgram(4, [Gate("cx", (0, 1)), Gate("cz", (2, 3))], 0))
        assert s.depth == 1 and s.per_kind == {"cx": 1, "cz": 1}

    @given(st.integers(0, 10**6), st.integers(1, 6), st.integers(0, 40))
    def test_invariants(self, seed, n, count):
        prog = random_program(np.random.default_rng(seed), n, count)
        s = gate_stats(prog)
        assert s.n_1q + s.n_2q == len(prog.gates)
        assert s.depth <= len(prog.gates)

    def test_single_qubit_chain(self):
        gates = [Gate("h", (0,))] * 7
        assert gate_stats(CircuitProgram(2, gates, 0)).depth == 7


def _bae_model():
    model = assemble("bae", amplitude_plan((4, 8), (2, 2), FAST_LOADER), ProcessingConfig(layers=2), 2)
    params = init_params(model, 3)
    params.quantum = np.random.default_rng(3).uniform(-1, 1, model.n_quantum_params)
    return model, params


class TestShots:
    def test_many_shots_converge(self):
        model, params = _bae_model()
        assert model.n_measured == 4
        img = np.random.default_rng(0).uniform(0.1, 1, (4, 8))
        report, _ = shot_inference(model, params, img, 10**6, seed=1)
        assert report.l1 < 0.01

    def test_deterministic_state(self):
        model = assemble("pae", pae_plan(4, 2, (2, 2)), ProcessingConfig(layers=1))
        params = init_params(model)
        params.quantum[:] = 0
        report, pred = shot_inference(model, params, np.zeros((2, 2)), 17, seed=0)
        np.testing.assert_array_equal(report.p_sim, [1, 1])
        assert report.l1 == 0
        assert pred == int(np.argmax(params.weights.sum(axis=1) + params.bias))

    def test_prediction_from_estimates(self):
        model, params = _bae_model()
        img = np.random.default_rng(2).uniform(0.1, 1, (4, 8))
        report, pred = shot_inference(model, params, img, 50, seed=4)
        logits = params.weights @ (2 * report.p_expt - 1) + params.bias
        assert pred == int(np.argmax(logits))
        assert report.l1 == pytest.approx(np.abs(report.p_sim - report.p_expt).sum(), abs=0)

    def test_seeded(self):
        model, params = _bae_model()
        img = np.random.default_rng(2).uniform(0.1, 1, (4, 8))
        a, _ = shot_inference(model, params, img, 100, seed=9)
        b, _ = shot_inference(model, params, img, 100, seed=9)
        np.testing.assert_array_equal(a.p_expt, b.p_expt)

    def test_needs_shots(self):
        model, params = _bae_model()
        with pytest.raises(ContractError):
            shot_inference(model, params, np.ones((4, 8)), 0)

    def test_csv(self, tmp_path):
        report = DeviationReport.from_probabilities([0.5, 0.25], [0.5, 0.5], 4)
        assert report.l1 == 0.25
        write_deviation_csv(report, tmp_path / "d.csv")
        rows = list(csv.reader(open(tmp_path / "d.csv")))
        assert rows == [["qubit", "p_sim", "p_expt"], ["0", "0.5", "0.5"], ["1", "0.25", "0.5"]]


class TestBaseline:
    def test_exact_matches_oracle(self):
        res = random_baseline_quantile(100, 0.5, 0.99, trials=200_000, seed=0)
        assert res.exact == binomial_quantile(100, 0.5, 0.99) / 100 == 0.62
        assert abs(res.monte_carlo - res.exact) <= 0.01

    @settings(max_examples=15, deadline=None)
    @given(n=st.integers(10, 200), p=st.floats(0.05, 0.95), q=st.floats(0.05, 0.95))
    def test_exact_is_cdf_inversion(self, n, p, q):
        res = random_baseline_quantile(n, p, q, trials=1000)
        assert res.exact == binomial_quantile(n, p, q) / n

    def test_median(self):
        res = random_baseline_quantile(60, 0.5, 0.5, trials=100_000, seed=3)
        assert abs(res.monte_carlo - 0.5) <= 1 / 60

    @pytest.mark.parametrize("p, q", [(0, 0.5), (1, 0.5), (0.5, 0), (0.5, 1)])
    def test_bad_arguments(self, p, q):
        with pytest.raises(ContractError):
            random_baseline_quantile(10, p, q)


class TestPersistence:
    @pytest.mark.parametrize("scheme", ["pae", "bae"])
    def test_round_trip(self, tmp_path, scheme):
        rng = np.random.default_rng(0)
        if scheme == "pae":
            model = assemble("pae", pae_plan(16, 3, (4, 4)), ProcessingConfig(layers=2, brickwork=True), 3)
            images = rng.uniform(0, 1, (10, 4, 4))
        else:
            model, _ = _bae_model()
            images = rng.uniform(0.1, 1, (10, 4, 8))
        params = init_params(model, 5)
        params.quantum = rng.uniform(-3, 3, model.n_quantum_params)
        path = tmp_path / "m.qmod"
        save_model(model, params, path, seed=5)
        model2, params2 = load_model(path)
        assert params2.flatten().tobytes() == params.flatten().tobytes()
        a = forward_batch(model, encode(model, images), params)
        b = forward_batch(model2, encode(model2, images), params2)
        assert np.max(np.abs(a - b)) < 1e-12

    def test_truncated(self, tmp_path):
        model, params = _bae_model()
        path = tmp_path / "m.qmod"
        save_model(model, params, path)
        path.write_text(path.read_text()[:-40])
        with pytest.raises(CorruptionError):
            load_model(path)

    def test_edited(self, tmp_path):
        model, params = _bae_model()
        path = tmp_path / "m.qmod"
        save_model(model, params, path)
        path.write_text(path.read_text().replace('"n_classes": 2', '"n_classes": 3'))
        with pytest.raises(CorruptionError):
            load_model(path)

    def test_scheme_mismatch(self, tmp_path):
        model, params = _bae_model()
        path = tmp_path / "m.qmod"
        save_model(model, params, path)
        with pytest.raises(SchemeMismatchError):
            load_model(path, expected_scheme="aae")

    def test_version(self, tmp_path):
        model, params = _bae_model()
        path = tmp_path / "m.qmod"
        save_model(model, params, path)
        path.write_text(path.read_text().replace("qscene-model 1", "qscene-model 2", 1))
        with pytest.raises(IncompatibleVersionError):
            load_model(path)

    def test_metadata(self, tmp_path):
        model, params = _bae_model()
        save_model(model, params, tmp_path / "m.qmod", seed=11, metadata={"class_names": ["a", "b"]})
        _, _, meta = load_model(tmp_path / "m.qmod", with_metadata=True)
        assert meta == {"class_names": ["a", "b"], "seed": 11}
