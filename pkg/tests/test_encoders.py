import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dense_run
from qscene.data import smooth_image
from qscene.encoders import (
    HierarchicalSchedule,
    LoaderConfig,
    block_layout,
    build_hierarchical_schedule,
    build_loader_ansatz,
    image_to_target,
    kl_divergence,
    normalize_vector,
    pae_plan,
    partition_blocks,
    train_loader,
    train_loaders,
)
from qscene.exceptions import ContractError, DegenerateInputError
from qscene.simulator import combine_programs, run_circuit


class TestNormalize:
    def test_unit_vector(self):
        np.testing.assert_allclose(normalize_vector([1, 0, 0, 0]).values, [1, 0, 0, 0])

    def test_three_four_five(self):
        np.testing.assert_allclose(normalize_vector([3, 4]).values, [0.6, 0.8], atol=1e-15)

    def test_padding(self):
        s = 1 / math.sqrt(3)
        t = normalize_vector([1, 1, 1])
        np.testing.assert_allclose(t.values, [s, s, s, 0], atol=1e-15)
        assert t.n_qubits == 2

    def test_zero_vector(self):
        with pytest.raises(DegenerateInputError):
            normalize_vector([0, 0, 0])

    @given(st.lists(st.floats(0, 1e3), min_size=1, max_size=70).filter(lambda v: max(v) > 1e-3))
    def test_norm_is_one(self, v):
        t = normalize_vector(v)
        assert abs(np.sum(t.values ** 2) - 1) < 1e-12
        assert np.all(t.values >= 0)
        assert len(t.values) & (len(t.values) - 1) == 0


class TestImageTarget:
    def test_large_image_qubits(self):
        assert image_to_target(np.ones((2048, 1024)) * 0.5).n_qubits == 21

    def test_two_by_two(self):
        t = image_to_target(np.array([[1.0, 0], [0, 0]]))
        np.testing.assert_array_equal(t.values, [1, 0, 0, 0])
        assert t.n_qubits == 2

    def test_three_by_three_pads(self):
        img = np.arange(1, 10, dtype=float).reshape(3, 3) / 9
        t = image_to_target(img)
        assert t.values.shape == (16,) and t.n_qubits == 4
        expected = np.zeros(16)
        expected[:9] = img.ravel()
        np.testing.assert_allclose(t.values, expected / np.linalg.norm(expected), atol=1e-15)

    def test_black_image(self):
        with pytest.raises(DegenerateInputError):
            image_to_target(np.zeros((4, 4)))


class TestPartition:
    @pytest.mark.parametrize(
        "grid, blocks, q, total",
        [((1, 1), 1, 21, 21), ((4, 2), 8, 18, 144), ((8, 4), 32, 16, 512)],
    )
    def test_large_image_layouts(self, grid, blocks, q, total):
        part = block_layout((2048, 1024), grid)
        assert (part.n_blocks, part.qubits_per_block, part.total_qubits) == (blocks, q, total)

    def test_small_grid(self):
        img = np.arange(1, 17, dtype=float).reshape(4, 4) / 16
        part, targets = partition_blocks(img, (2, 2))
        assert part.n_blocks == 4 and part.qubits_per_block == 2 and part.block_pixel_shape == (2, 2)
        top_right = img[:2, 2:].ravel()
        np.testing.assert_allclose(targets[1].values, top_right / np.linalg.norm(top_right))
        for t in targets:
            assert abs(np.sum(t.values ** 2) - 1) < 1e-12

    def test_32x32(self):
        part = block_layout((32, 32), (2, 2))
        assert (part.block_pixel_shape, part.qubits_per_block, part.total_qubits) == ((16, 16), 8, 32)

    def test_non_divisible(self):
        with pytest.raises(ContractError):
            block_layout((10, 8), (3, 2))

    def test_non_power_of_two_block(self):
        with pytest.raises(ContractError):
            block_layout((6, 4), (2, 2))

    def test_zero_block(self):
        img = np.ones((4, 4))
        img[2:, :2] = 0
        with pytest.raises(DegenerateInputError):
            partition_blocks(img, (2, 2))


class TestSchedule:
    def test_single_stage(self):
        assert build_hierarchical_schedule(8, 1, 10).stages == ((8, 10),)

    @pytest.mark.parametrize("n, s, active", [(8, 4, [2, 4, 6, 8]), (21, 3, [7, 14, 21])])
    def test_active_counts(self, n, s, active):
        assert [a for a, _ in build_hierarchical_schedule(n, s, 5).stages] == active

    def test_too_many_stages(self):
        with pytest.raises(ContractError):
            build_hierarchical_schedule(3, 4, 10)

    @given(n=st.integers(1, 30), data=st.data())
    def test_strictly_increasing(self, n, data):
        s = data.draw(st.integers(1, n))
        active = [a for a, _ in build_hierarchical_schedule(n, s, 1).stages]
        assert all(b > a for a, b in zip(active, active[1:]))
        assert active[-1] == n and len(active) == s


class TestLoader:
    def test_zero_target_starts_at_zero_loss(self):
        target = normalize_vector([1] + [0] * 7)
        cfg = LoaderConfig(layers=2, steps=5, init="zeros")
        res = train_loader(target, build_loader_ansatz(3, 2), build_hierarchical_schedule(3, 1, 5), cfg)
        assert res.loss_history[0] == 0.0
        assert res.fidelity == pytest.approx(1.0, abs=1e-12)

    def test_smooth_four_qubit_image(self):
        target = image_to_target(smooth_image((4, 4)))
        cfg = LoaderConfig(layers=6, steps=500, lr=0.05)
        res = train_loader(target, build_loader_ansatz(4, 6), cfg.schedule(4), cfg)
        assert res.fidelity >= 0.99

    def test_random_target_plateaus_but_stays_finite(self):
        rng = np.random.default_rng(3)
        target = normalize_vector(rng.uniform(0, 1, 256))
        cfg = LoaderConfig(layers=2, steps=120, lr=0.05, n_stages=2)
        res = train_loader(target, build_loader_ansatz(8, 2), cfg.schedule(8), cfg)
        assert np.all(np.isfinite(res.loss_history))
        assert res.fidelity < 1
        for stage in np.unique(res.stage_of_step):
            best = res.best_loss_history[res.stage_of_step == stage]
            assert np.all(np.diff(best) <= 0)
        last = res.loss_history[res.stage_of_step == res.stage_of_step[-1]]
        assert res.final_loss <= last[0]

    def test_frozen_parameters_untouched_in_early_stage(self):
        ansatz = build_loader_ansatz(4, 2)
        cfg = LoaderConfig(layers=2, steps=30, n_stages=2)
        init = np.random.default_rng(0).uniform(-1, 1, ansatz.n_params)
        # no steps in the final stage isolates the first one
        sched = HierarchicalSchedule(((2, 30), (4, 0)))
        res = train_loaders(normalize_vector(np.arange(1, 17.0)).values, ansatz, sched, cfg, init=init)
        frozen = sorted({g.param_slot for g in ansatz.gates if g.trainable and max(g.targets) >= 2})
        trained = sorted({g.param_slot for g in ansatz.gates if g.trainable and max(g.targets) < 2})
        np.testing.assert_array_equal(res.params[0, frozen], init[frozen])
        assert np.any(res.params[0, trained] != init[trained])

    def test_deterministic(self):
        target = image_to_target(smooth_image((4, 4)))
        cfg = LoaderConfig(layers=3, steps=50)
        a = train_loader(target, build_loader_ansatz(4, 3), None, cfg)
        b = train_loader(target, build_loader_ansatz(4, 3), None, cfg)
        np.testing.assert_array_equal(a.params, b.params)

    def test_rows_independent_of_batch(self):
        rng = np.random.default_rng(1)
        targets = np.stack([normalize_vector(rng.uniform(0.1, 1, 8)).values for _ in range(3)])
        ansatz = build_loader_ansatz(3, 2)
        cfg = LoaderConfig(layers=2, steps=40)
        both = train_loaders(targets, ansatz, cfg.schedule(3), cfg)
        alone = train_loaders(targets[1:2], ansatz, cfg.schedule(3), cfg)
        np.testing.assert_allclose(both.params[1], alone.params[0], atol=1e-12)


class TestKL:
    @given(st.lists(st.floats(0, 1), min_size=4, max_size=4).filter(lambda v: sum(v) > 0.1),
           st.lists(st.floats(0, 1), min_size=4, max_size=4).filter(lambda v: sum(v) > 0.1))
    def test_nonnegative(self, t, p):
        t = np.array(t) / np.sum(t)
        p = np.array(p) / np.sum(p)
        assert kl_divergence(t, p) >= -1e-12

    def test_zero_iff_equal(self):
        p = np.array([0.1, 0.2, 0.3, 0.4])
        assert kl_divergence(p, p) == pytest.approx(0, abs=1e-15)
        assert kl_divergence(p, p[::-1]) > 0

    def test_target_zero_contributes_nothing(self):
        assert kl_divergence([1.0, 0.0], [1.0, 0.0]) == 0.0


def test_bae_product_matches_joint_simulation():
    rng = np.random.default_rng(5)
    img = rng.uniform(0.1, 1, (4, 8))
    part, targets = partition_blocks(img, (2, 2))
    assert part.total_qubits == 12
    ansatz = build_loader_ansatz(part.qubits_per_block, 3)
    cfg = LoaderConfig(layers=3, steps=60)
    results = [train_loader(t, ansatz, None, cfg) for t in targets]
    product = np.array([1.0 + 0j])
    for r in results:
        product = np.kron(product, run_circuit(ansatz, r.params).amplitudes)
    joint = combine_programs([ansatz] * part.n_blocks)
    psi = run_circuit(joint, np.concatenate([r.params for r in results])).amplitudes
    assert 1 - abs(np.vdot(product, psi)) ** 2 < 1e-8


def test_bae_product_dense_oracle_small():
    img = np.random.default_rng(6).uniform(0.1, 1, (4, 4))
    part, targets = partition_blocks(img, (2, 2))
    ansatz = build_loader_ansatz(2, 2)
    cfg = LoaderConfig(layers=2, steps=40)
    params = [train_loader(t, ansatz, None, cfg).params for t in targets]
    product = np.array([1.0 + 0j])
    for p in params:
        product = np.kron(product, dense_run(ansatz, p))
    joint = combine_programs([ansatz] * 4)
    psi = dense_run(joint, np.concatenate(params))
    assert 1 - abs(np.vdot(product, psi)) ** 2 < 1e-8


class TestPaePlan:
    def test_384_pixels_16_qubits(self):
        assert pae_plan(384, 16).n_upload_layers == 8

    def test_one_triplet(self):
        plan = pae_plan(3, 1)
        assert plan.n_upload_layers == 1
        assert [plan.assignment(i) for i in range(3)] == [(0, 0, 0), (0, 0, 1), (0, 0, 2)]

    def test_partial_last_layer(self):
        plan = pae_plan(4, 1)
        assert plan.n_upload_layers == 2
        assert plan.assignment(3) == (1, 0, 0)
        angles = plan.angles(np.array([[1.0, 0.5, 0.25, 1.0]]))
        np.testing.assert_allclose(angles, [math.pi, math.pi / 2, math.pi / 4, math.pi, 0, 0])

    def test_upload_gate_kinds(self):
        gates = pae_plan(6, 2).upload_gates(0)
        assert [g.kind.value for g in gates] == ["ry", "rz", "ry"] * 2
        assert [g.data_slot for g in gates] == list(range(6))

    @given(pixels=st.integers(1, 600), qubits=st.integers(1, 20))
    def test_assignment_is_bijection(self, pixels, qubits):
        plan = pae_plan(pixels, qubits)
        assert plan.n_upload_layers == math.ceil(pixels / (3 * qubits))
        seen = {plan.assignment(i) for i in range(pixels)}
        assert len(seen) == pixels
        assert all(0 <= layer < plan.n_upload_layers and 0 <= q < qubits and pos in (0, 1, 2)
                   for layer, q, pos in seen)

    def test_minmax_scaling_option(self):
        plan = pae_plan(4, 2, scaling="minmax")
        angles = plan.angles(np.array([[0.2, 0.4], [0.6, 0.2]]))
        np.testing.assert_allclose(angles[:4], [0, math.pi / 2, math.pi, 0], atol=1e-15)
