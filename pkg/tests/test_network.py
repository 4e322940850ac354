"""Xavier init, hard-constraint envelopes, and ansatz jets."""

import numpy as np
import pytest

from nnpde import autodiff as ad
from nnpde.errors import ConfigurationError, DomainError
from nnpde.network import (
    AnsatzSpec,
    NetworkConfig,
    ansatz_forward,
    ansatz_values,
    envelope_jet,
    eval_ansatz,
    init_xavier,
)

from conftest import fd_jet


class TestXavierInit:
    def test_hidden_weight_bound(self):
        cfg = NetworkConfig(input_dim=1, hidden_layers=3, width=50)
        params = init_xavier(cfg, seed=42)
        bound = np.sqrt(6.0 / 100.0)  # two successive width-50 layers
        offset = 50 * 1 + 50  # skip the input layer block
        W2 = params.flat[offset : offset + 2500]
        assert bound == pytest.approx(0.24495, abs=1e-5)
        assert np.all(np.abs(W2) <= bound)

    def test_same_seed_bitwise_identical(self):
        cfg = NetworkConfig(input_dim=2, hidden_layers=2, width=13)
        a = init_xavier(cfg, seed=7)
        b = init_xavier(cfg, seed=7)
        assert a.flat.tobytes() == b.flat.tobytes()

    def test_biases_zero(self):
        cfg = NetworkConfig(input_dim=2, hidden_layers=2, width=5)
        params = init_xavier(cfg, seed=3)
        off = 0
        for m, k in cfg.layer_shapes():
            assert np.all(params.flat[off + m * k : off + m * k + m] == 0.0)
            off += m * k + m

    def test_energy_slot(self):
        cfg = NetworkConfig(input_dim=1, hidden_layers=1, width=4)
        params = init_xavier(cfg, seed=0, energy=2.5)
        assert params.has_energy and params.energy == 2.5
        assert params.flat.size == cfg.param_count() + 1

    def test_flat_length_validated(self):
        cfg = NetworkConfig(input_dim=1, hidden_layers=1, width=4)
        with pytest.raises(ConfigurationError):
            from nnpde.network import ParameterSet

            ParameterSet(np.zeros(3), cfg)


class TestEnvelopes:
    def test_fb_zero_on_interval_ends(self):
        cfg = NetworkConfig(input_dim=1)
        params = init_xavier(cfg, seed=1)
        ansatz = AnsatzSpec("fb", lo=(0.0,), hi=(1.0,))
        for x in (0.0, 1.0):
            assert eval_ansatz(params, ansatz, [x]).value == 0.0

    def test_fn_zero_on_node_planes(self):
        # nodes of the third infinite-well state
        cfg = NetworkConfig(input_dim=1)
        params = init_xavier(cfg, seed=2)
        ansatz = AnsatzSpec("fn", lo=(0.0,), hi=(1.0,), node_planes=((1 / 3, 2 / 3),))
        for x in (1 / 3, 2 / 3):
            assert eval_ansatz(params, ansatz, [x]).value == pytest.approx(0.0, abs=5e-17)
        # fn keeps the boundary zeros too (fn includes fb)
        for x in (0.0, 1.0):
            assert eval_ansatz(params, ansatz, [x]).value == 0.0

    def test_raw_variant_is_identity(self):
        cfg = NetworkConfig(input_dim=2)
        params = init_xavier(cfg, seed=3)
        ansatz = AnsatzSpec("bc", lo=(0.0, 0.0), hi=(1.0, 1.0))
        rng = np.random.default_rng(0)
        for _ in range(10):
            x = rng.uniform(0, 1, size=2)
            raw = ad.propagate_jet(params, cfg, x)
            enveloped = eval_ansatz(params, ansatz, x)
            assert enveloped.value == raw.value
            assert np.array_equal(enveloped.grad, raw.grad)
            assert enveloped.lap == raw.lap

    def test_fb_boundary_exactness_2d(self):
        cfg = NetworkConfig(input_dim=2)
        params = init_xavier(cfg, seed=4)
        ansatz = AnsatzSpec("fb", lo=(0.0, 0.0), hi=(1.0, 1.0))
        rng = np.random.default_rng(1)
        pts = rng.uniform(0, 1, size=(1000, 2))
        face = rng.integers(0, 4, size=1000)
        pts[np.arange(1000), face // 2] = (face % 2).astype(float)
        vals = ansatz_values(params.flat, cfg, ansatz, pts)
        assert np.max(np.abs(vals)) == 0.0

    def test_node_plane_outside_domain_rejected(self):
        with pytest.raises(ConfigurationError):
            AnsatzSpec("fn", lo=(0.0,), hi=(1.0,), node_planes=((1.5,),))

    def test_point_outside_domain_rejected(self):
        cfg = NetworkConfig(input_dim=1)
        params = init_xavier(cfg, seed=5)
        ansatz = AnsatzSpec("fb", lo=(0.0,), hi=(1.0,))
        with pytest.raises(DomainError):
            eval_ansatz(params, ansatz, [1.2])


@pytest.mark.parametrize(
    "variant,planes,decay",
    [("fb", (), False), ("fn", ((0.3, 0.6), (0.5,)), False), ("fb", (), True), ("bc", (), True)],
)
def test_product_rule_jet_matches_fd(variant, planes, decay):
    cfg = NetworkConfig(input_dim=2, hidden_layers=2, width=20)
    params = init_xavier(cfg, seed=6)
    ansatz = AnsatzSpec(variant, lo=(0.0, 0.0), hi=(1.0, 1.0), node_planes=planes, decay=decay)
    x = np.array([0.42, 0.77])
    jet = eval_ansatz(params, ansatz, x)
    f = lambda p: ansatz_values(params.flat, cfg, ansatz, p[None, :])[0]
    _, g0, l0 = fd_jet(f, x)
    assert np.max(np.abs(jet.grad - g0)) / (1 + np.max(np.abs(g0))) < 1e-6
    assert abs(jet.lap - l0) / (1 + abs(l0)) < 1e-6


def test_decay_envelope_scale_default():
    # half the truncation radius for a [-6, 6] box
    ansatz = AnsatzSpec("fb", lo=(-6.0,), hi=(6.0,), decay=True)
    assert ansatz.scale() == 3.0
    e, _, _ = envelope_jet(ansatz, np.array([[0.0]]))
    # at the center the fb factor is 1 and the gaussian is 1
    assert e[0] == pytest.approx(1.0, abs=1e-15)


def test_gradient_tangential_to_face_not_forced():
    # fb forces the value to zero on a face, not the full gradient
    cfg = NetworkConfig(input_dim=2)
    params = init_xavier(cfg, seed=8)
    ansatz = AnsatzSpec("fb", lo=(0.0, 0.0), hi=(1.0, 1.0))
    jet = eval_ansatz(params, ansatz, [0.0, 0.37])
    assert jet.value == 0.0
    assert abs(jet.grad[0]) > 0.0  # normal derivative survives


def test_taped_ans_matches_untaped():
    cfg = NetworkConfig(input_dim=2, hidden_layers=2, width=9)
    params = init_xavier(cfg, seed=9)
    ansatz = AnsatzSpec("fb", lo=(0.0, 0.0), hi=(1.0, 1.0))
    X = np.random.default_rng(2).uniform(0.05, 0.95, size=(17, 2))
    u0, J0, L0 = ansatz_forward(params.flat, cfg, ansatz, X, need="lap")
    tape = ad.Tape()
    tv = tape.watch(params.flat)
    u1, J1, L1 = ansatz_forward(tv, cfg, ansatz, X, need="lap")
    assert np.array_equal(u0, ad.value_of(u1))
    assert np.array_equal(J0, ad.value_of(J1))
    assert np.array_equal(L0, ad.value_of(L1))
