import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerqnn import dense
from layerqnn.model import NetworkConfig
from layerqnn.mps import LayerMps, magnetization_expectation, mps_from_dense, product_state_mps
from layerqnn.presets import initial_params
from layerqnn.sampler import (
    conditional_probabilities,
    estimate_magnetization,
    outcome_probability,
    sample_shot,
    sample_shots,
    shot_stream,
    shot_uniforms,
)
from layerqnn.tensor import NumericalError


def _evolved_state(n=3, steps=2, seed=4):
    cfg = NetworkConfig(n, steps)
    rho = dense.random_product_states(n, 1, seed)[0]
    for _ in range(steps):
        rho = dense.layer_step_dense(initial_params("I"), cfg, rho)
    return rho, mps_from_dense(rho, n)


def _bits(index, n):
    return [1 - 2 * ((index >> (n - 1 - k)) & 1) for k in range(n)]


def test_joint_probability_matches_dense():
    rho, state = _evolved_state()
    probs = dense.x_basis_probabilities(rho, 3)
    for idx, ref in enumerate(probs):
        assert outcome_probability(state, _bits(idx, 3)) == pytest.approx(ref, abs=1e-12)


def test_chain_rule_product_equals_joint():
    rho, state = _evolved_state()
    for idx in range(8):
        m = _bits(idx, 3)
        assert np.prod(conditional_probabilities(state, m)) == pytest.approx(outcome_probability(state, m), abs=1e-12)


def test_empirical_distribution_close_to_born():
    rho, state = _evolved_state()
    out, _ = sample_shots(state, shot_uniforms(5, (), 20000, 3))
    idx = ((1 - out) // 2) @ np.array([4, 2, 1])
    freq = np.bincount(idx, minlength=8) / len(idx)
    assert 0.5 * np.abs(freq - dense.x_basis_probabilities(rho, 3)).sum() < 0.02


def test_plus_state_is_deterministic():
    state = product_state_mps((0.5, 0.0, 0.0), 4)
    assert np.all(sample_shot(state, np.random.default_rng(0)) == 1)
    assert estimate_magnetization(state, 50, 1).estimate == pytest.approx(0.5)


def test_stream_determinism_and_independence():
    a = shot_uniforms(3, (1, 2), 10, 5)
    assert np.array_equal(a, shot_uniforms(3, (1, 2), 10, 5))
    assert not np.array_equal(a, shot_uniforms(3, (1, 3), 10, 5))
    assert np.array_equal(a.reshape(-1), shot_stream(3, 1, 2).random(50))


@given(st.integers(0, 40), st.integers(1, 7))
def test_shot_blocks_are_counter_addressable(first, n):
    full = shot_uniforms(9, (4,), first + 3, n)
    assert np.array_equal(shot_uniforms(9, (4,), 3, n, first_shot=first), full[first:])


def test_estimate_is_mean_of_outcomes():
    _, state = _evolved_state()
    est = estimate_magnetization(state, 300, 2, (0, 1), keep_outcomes=True)
    assert est.estimate == pytest.approx(est.outcomes.mean() / 2)
    assert est.stream == (2, 0, 1)
    assert abs(est.estimate - magnetization_expectation(state)) < 5 * 0.5 / np.sqrt(300 * 3)


def test_trace_guard():
    t = np.array([0.6, 0, 0, 0.6], dtype=complex).reshape(1, 4, 1)
    bad = LayerMps((t, t), center=0)
    with pytest.raises(NumericalError):
        estimate_magnetization(bad, 10, 0)


def test_negative_probability_guard():
    # trace 1 but an unphysical x-basis marginal
    t = np.array([0.5, 2.0, 2.0, 0.5], dtype=complex).reshape(1, 4, 1)
    with pytest.raises(NumericalError):
        sample_shots(LayerMps((t,), center=0), np.zeros((1, 1)))


def test_rejects_zero_shots():
    with pytest.raises(ValueError):
        estimate_magnetization(product_state_mps((0, 0, 0.5), 2), 0, 0)
