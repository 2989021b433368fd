import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerqnn import dense
from layerqnn.model import NetworkConfig, ParamSet
from layerqnn.mps import (
    TruncationWarning,
    apply_mpo,
    build_layer_mpo,
    evolve_trajectory,
    expectation,
    magnetizations,
    mps_from_dense,
    mps_trace,
    product_state_mps,
    sweep_evolve,
    to_dense,
)
from layerqnn.presets import initial_params
from layerqnn.tensor import SvdTruncation


def _bloch(theta, phi):
    return 0.5 * np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


@given(st.floats(0, np.pi), st.floats(0, 2 * np.pi), st.integers(2, 5))
def test_product_state_observables(theta, phi, n):
    b = _bloch(theta, phi)
    state = product_state_mps(b, n)
    assert abs(mps_trace(state) - 1) < 1e-12
    assert np.allclose(magnetizations(state), b, atol=1e-12)


def test_product_state_rejects_bad_radius():
    with pytest.raises(ValueError):
        product_state_mps((0.1, 0.0, 0.0), 3)


def test_vacuum_product_state_dense():
    rho = to_dense(product_state_mps((0, 0, 0.5), 2))
    assert rho[0, 0] == pytest.approx(1.0) and np.abs(rho).sum() == pytest.approx(1.0)


def test_mps_from_dense_round_trip():
    rho = dense.random_product_states(3, 1, 2)[0]
    state = mps_from_dense(rho, 3)
    assert np.allclose(to_dense(state), rho)


def test_expectation_rejects_unknown_axis():
    with pytest.raises(ValueError):
        expectation(product_state_mps((0, 0, 0.5), 2), "w")


def test_layer_mpo_exact_bond_dimension(rng):
    p = ParamSet.random(rng)
    mpo = build_layer_mpo(p, NetworkConfig(6, 1))
    assert max(mpo.bond_dims) == 16


def test_apply_mpo_matches_dense_channel(rng):
    p = ParamSet.random(rng)
    cfg = NetworkConfig(4, 1)
    rho = dense.random_product_states(4, 1, 11)[0]
    out = apply_mpo(mps_from_dense(rho, 4), build_layer_mpo(p, cfg))
    assert np.allclose(to_dense(out), dense.layer_step_dense(p, cfg, rho), atol=1e-12)


def test_sweep_matches_dense_channel(rng):
    p = ParamSet.random(rng)
    cfg = NetworkConfig(4, 1)
    rho = dense.random_product_states(4, 1, 12)[0]
    out = sweep_evolve(mps_from_dense(rho, 4), p, cfg)
    assert np.allclose(to_dense(out), dense.layer_step_dense(p, cfg, rho), atol=1e-12)


@pytest.mark.parametrize("backend", ["mpo", "sweep"])
def test_trajectory_matches_oracle(backend, random_params):
    cfg = NetworkConfig(4, 3)
    for i, p in enumerate(random_params):
        rho = dense.random_product_states(4, 1, 100 + i)[0]
        traj, _ = evolve_trajectory(mps_from_dense(rho, 4), p, cfg, backend=backend, axes="xyz")
        assert np.abs(traj - dense.evolve_dense(p, cfg, rho)).max() < 1e-10


def test_trace_preserving_truncation():
    # at a tight bond cap the plain truncation drifts, the constrained one does not
    p = initial_params("I")
    cfg = NetworkConfig(8, 3)
    mpo = build_layer_mpo(p, cfg, 16)
    start = product_state_mps(_bloch(1.0, 0.4), 8)
    plain = kept = start
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        for _ in range(3):
            plain = apply_mpo(plain, mpo, 6, preserve_trace=False)
            kept = apply_mpo(kept, mpo, 6)
    assert abs(mps_trace(kept) - 1) < 1e-12
    assert abs(mps_trace(plain) - 1) > 1e-8
    assert max(kept.bond_dims) <= 6


def test_bond_cap_and_discarded_weight():
    p = initial_params("I")
    cfg = NetworkConfig(8, 2)
    traj, state = evolve_trajectory(product_state_mps(_bloch(1.0, 0.4), 8), p, cfg, 16, 8)
    assert max(state.bond_dims) <= 8
    assert state.discarded_weight > 0


def test_backends_agree_with_large_bond():
    p = initial_params("I")
    cfg = NetworkConfig(6, 3)
    start = product_state_mps(_bloch(0.9, 2.0), 6)
    a, _ = evolve_trajectory(start, p, cfg, 16, 64, backend="mpo")
    b, _ = evolve_trajectory(start, p, cfg, None, 64, backend="sweep")
    assert np.abs(a - b).max() < 1e-8


def test_alarm_warns():
    p = initial_params("I")
    cfg = NetworkConfig(6, 1)
    state = product_state_mps(_bloch(1.0, 0.4), 6)
    state = apply_mpo(state, build_layer_mpo(p, cfg), None)
    with pytest.warns(TruncationWarning):
        apply_mpo(state, build_layer_mpo(p, cfg), 1, alarm=1e-12)


def test_mismatched_sites():
    with pytest.raises(ValueError):
        apply_mpo(product_state_mps((0, 0, 0.5), 3), build_layer_mpo(ParamSet.zeros(), NetworkConfig(4, 1)))


def test_unvectorized_output_is_density_matrix(rng):
    p = ParamSet.random(rng)
    cfg = NetworkConfig(3, 2)
    _, state = evolve_trajectory(product_state_mps(_bloch(0.3, 0.2), 3), p, cfg, None, None, SvdTruncation())
    rho = to_dense(state)
    assert np.allclose(rho, rho.conj().T) and np.linalg.eigvalsh(rho).min() > -1e-12
