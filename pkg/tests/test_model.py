import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerqnn.model import (
    EXCITE,
    PAULI,
    NetworkConfig,
    ParamSet,
    Slot,
    all_slots,
    boundary_gate,
    build_gate,
    layer_gate_maps,
    lindblad_apply,
    lindblad_superoperator,
    local_operators,
    two_site_operator,
)
from layerqnn.presets import A_INITIAL, B_INITIAL, MASK_I, MASK_II, initial_params
from layerqnn.tensor import TRACE_VEC


def test_pauli_conventions():
    assert np.array_equal(PAULI[3], np.diag([1, -1]))
    vac = np.array([1, 0])
    assert np.allclose(PAULI[3] @ vac, vac)
    # EXCITE takes the vacuum to |1>
    assert np.allclose(EXCITE @ vac, [0, 1])


def test_slot_validation():
    assert Slot.make("j", "x", "y", "im") == Slot("j", 1, 2, "im")
    with pytest.raises(ValueError):
        Slot.make("h", "I", "x", "im")
    with pytest.raises(ValueError):
        Slot.make("k", "I", "x")
    assert len(all_slots()) == 48


def test_masks_match_presets():
    assert len(MASK_I) == len(A_INITIAL) == 10
    assert len(MASK_II) == len(B_INITIAL) == 11
    p = initial_params("II")
    assert np.array_equal(p.flat(), B_INITIAL)
    assert p.h[1, 1] == -1.0 and p.j[1, 2] == -1.0


def test_paramset_json_round_trip(rng):
    p = ParamSet.random(rng)
    q = ParamSet.loads(p.dumps())
    assert p == q
    assert ParamSet.from_json(json.loads(json.dumps(p.to_json()))) == p


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=10, max_size=10))
def test_flat_round_trip(values):
    p = ParamSet.from_vector(MASK_I, values)
    assert np.array_equal(p.flat(), values)
    # entries outside the mask stay zero
    assert p.h[1, 2] == 0.0 and p.j[3, 3] == 0


def test_perturbed_touches_one_slot():
    p = initial_params("I")
    q = p.perturbed(7, 0.1)
    diff = q.flat() - p.flat()
    assert np.count_nonzero(diff) == 1 and diff[7] == pytest.approx(0.1)
    assert q.j[0, 2].imag == pytest.approx(-0.9)


def test_paramset_read_only():
    p = ParamSet.zeros()
    with pytest.raises(ValueError):
        p.h[0, 0] = 1.0


def test_network_config_validation():
    with pytest.raises(ValueError):
        NetworkConfig(1, 3)
    with pytest.raises(ValueError):
        NetworkConfig(3, 0)
    with pytest.raises(ValueError):
        NetworkConfig(3, 1, dt=0.0)


def test_two_site_operator_hermitian_for_real_coefficients(rng):
    h = rng.normal(size=(4, 4))
    H = two_site_operator(h)
    assert np.allclose(H, H.conj().T)
    c = np.zeros((4, 4))
    c[0, 0] = 1.0
    assert np.allclose(two_site_operator(c), np.eye(4))


def test_gates_unitary(random_params):
    for p in random_params:
        for g in (build_gate(p, 0.1), boundary_gate(p, 0.1)):
            assert np.abs(g.conj().T @ g - np.eye(len(g))).max() < 1e-12


def test_zero_params_gate_is_swap():
    g = build_gate(ParamSet.zeros(), 0.1)
    # identity evolution followed by the swap of old k and new k
    expected = np.kron(np.eye(2), np.eye(4)[[0, 2, 1, 3]])
    assert np.allclose(g, expected)


def test_boundary_gate_ignores_non_identity_rows(rng):
    p = ParamSet.random(rng)
    h = p.h.copy()
    h[1:] = 0
    j = p.j.copy()
    j[1:] = 0
    assert np.allclose(boundary_gate(p, 0.1), boundary_gate(ParamSet(h, j), 0.1))


def test_layer_gate_maps_trace_preserving(random_params):
    for p in random_params:
        bulk, edge = layer_gate_maps(p, 0.1)
        # tracing both outputs of the bulk map gives the trace of both inputs
        closed = np.einsum("abcd,a,b->cd", bulk, TRACE_VEC, TRACE_VEC)
        assert np.allclose(closed, np.outer(TRACE_VEC, TRACE_VEC))
        assert np.allclose(TRACE_VEC @ edge, TRACE_VEC)


def test_local_operators_boundary_rule(rng):
    p = ParamSet.random(rng)
    hs, js = local_operators(p, 3)
    assert len(hs) == len(js) == 3
    h1 = np.einsum("b,bij->ij", p.h[0], PAULI)
    assert np.allclose(hs[0], np.kron(h1, np.eye(4)))


def test_lindblad_generator_trace_free_and_hermiticity_preserving(rng):
    p = ParamSet.random(rng)
    cfg = NetworkConfig(3, 1)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    rho = a @ a.conj().T
    out = lindblad_apply(p, cfg, rho)
    assert abs(np.trace(out)) < 1e-12
    assert np.allclose(out, out.conj().T)
    L = lindblad_superoperator(p, cfg)
    assert np.allclose(L @ rho.reshape(-1), out.reshape(-1))


def test_lindblad_rejects_large_registers():
    with pytest.raises(ValueError):
        lindblad_apply(ParamSet.zeros(), NetworkConfig(7, 1), np.eye(2**7))
