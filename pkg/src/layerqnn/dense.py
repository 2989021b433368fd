"""Exact small-N reference for the layer channel.

Works on the doubled register literally: the input layer (qubits ``0..N-1``)
is joined by a vacuum layer (``N..2N-1``), the local gates are applied in
network order and the old layer is traced out. Everything here is meant as
a brute-force oracle for the tensor-network engine, not for speed.
"""

from __future__ import annotations

import numpy as np

from .model import PAULI, NetworkConfig, ParamSet, boundary_gate, build_gate, lindblad_superoperator
from .tensor import matrix_exp, permute

__all__ = [
    "MAX_SITES",
    "product_density",
    "random_product_states",
    "layer_isometry",
    "layer_step_dense",
    "build_dense_channel",
    "lindblad_limit_error",
    "magnetizations_dense",
    "evolve_dense",
    "x_basis_probabilities",
]

MAX_SITES = 6
# seed for the Haar-random product states used by the oracle comparisons
ORACLE_SEED = 20240917


def _guard(n_sites: int, limit: int = MAX_SITES):
    if n_sites > limit:
        raise ValueError(f"dense oracle limited to N <= {limit}, got N = {n_sites}")


def product_density(bloch, n_sites: int) -> np.ndarray:
    """``(I/2 + m.sigma)^{(x) N}`` for a Bloch vector of radius 1/2."""
    mx, my, mz = bloch
    site = 0.5 * PAULI[0] + mx * PAULI[1] + my * PAULI[2] + mz * PAULI[3]
    out = np.ones((1, 1), dtype=complex)
    for _ in range(n_sites):
        out = np.kron(out, site)
    return out


def random_product_states(n_sites: int, count: int, seed: int = ORACLE_SEED) -> list[np.ndarray]:
    """Haar-random pure product states (independent sites) as density matrices."""
    rng = np.random.default_rng(seed)
    states = []
    for _ in range(count):
        psi = np.ones(1, dtype=complex)
        for _ in range(n_sites):
            v = rng.normal(size=2) + 1j * rng.normal(size=2)
            psi = np.kron(psi, v / np.linalg.norm(v))
        states.append(np.outer(psi, psi.conj()))
    return states


def _apply_gate(vecs, gate, qubits, n_qubits):
    # vecs: (2,)*n_qubits + (batch,)
    k = len(qubits)
    g = gate.reshape((2,) * (2 * k))
    out = np.tensordot(g, vecs, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(out, list(range(k)), list(qubits))


def layer_isometry(params: ParamSet, config: NetworkConfig) -> np.ndarray:
    """``V`` with ``V|b> = prod_k G_k (|b> (x) |0...0>)``, shape (2^N, 2^N, 2^N)
    indexed ``(old layer, new layer, input)``.

    Gates act in decreasing ``k``: ``G_N`` first, the boundary gate last.
    """
    n = config.n_sites
    _guard(n)
    d = 2**n
    vecs = np.zeros((d, d, d), dtype=complex)
    vecs[np.arange(d), 0, np.arange(d)] = 1.0
    vecs = vecs.reshape((2,) * (2 * n) + (d,))
    bulk = build_gate(params, config.dt)
    for k in range(n - 1, 0, -1):
        vecs = _apply_gate(vecs, bulk, (k - 1, k, n + k), 2 * n)
    vecs = _apply_gate(vecs, boundary_gate(params, config.dt), (0, n), 2 * n)
    return vecs.reshape(d, d, d)


def layer_step_dense(params: ParamSet, config: NetworkConfig, rho) -> np.ndarray:
    """One layer transition of a dense ``2^N x 2^N`` density matrix."""
    _guard(config.n_sites)
    V = layer_isometry(params, config)
    rho = np.asarray(rho, dtype=complex)
    # Tr_old(V rho V^dag)
    return np.einsum("onb,bc,omc->nm", V, rho, V.conj(), optimize=True)


def build_dense_channel(params: ParamSet, config: NetworkConfig) -> np.ndarray:
    """``4^N x 4^N`` superoperator in the interleaved per-qubit vectorization."""
    n = config.n_sites
    _guard(n, 5)
    # Kraus operators K_o = (<o| (x) 1) V
    K = layer_isometry(params, config)
    d = 2**n
    # row-major: sum_o K_o (x) conj(K_o)
    s = np.einsum("oab,ocd->acbd", K, K.conj(), optimize=True).reshape((2,) * (4 * n))
    order = [ax for q in range(n) for ax in (q, n + q)] + [ax for q in range(n) for ax in (2 * n + q, 3 * n + q)]
    return permute(s, order).reshape(d * d, d * d)


def lindblad_limit_error(params: ParamSet, config: NetworkConfig, dt_list, n_states: int = 10) -> list[float]:
    """Max Frobenius distance between one network layer and ``exp(L dt)``.

    Evaluated over ``n_states`` seeded Haar-random product states for each dt.
    """
    n = config.n_sites
    _guard(n, 4)
    states = random_product_states(n, n_states)
    d = 2**n
    errors = []
    for dt in dt_list:
        cfg = NetworkConfig(n, config.n_steps, dt, config.boundary)
        lsup = lindblad_superoperator(params, cfg)
        prop = matrix_exp(lsup, dt)
        err = 0.0
        for rho in states:
            exact = (prop @ rho.reshape(-1)).reshape(d, d)
            err = max(err, float(np.linalg.norm(layer_step_dense(params, cfg, rho) - exact)))
        errors.append(err)
    return errors


def magnetizations_dense(rho, n_sites: int) -> np.ndarray:
    """``(m^x, m^y, m^z)`` with ``m^a = Tr(rho sum_k sigma^a_k) / (2N)``."""
    t = np.asarray(rho).reshape((2,) * (2 * n_sites))
    out = np.zeros(3)
    for k in range(n_sites):
        rest = 2 ** (n_sites - 1)
        red = np.moveaxis(t, (k, n_sites + k), (0, 1)).reshape(2, 2, rest, rest)
        red = np.trace(red, axis1=2, axis2=3)
        for a in range(3):
            out[a] += np.real(np.trace(PAULI[a + 1] @ red))
    return out / (2 * n_sites)


def evolve_dense(params: ParamSet, config: NetworkConfig, rho_in) -> np.ndarray:
    """Per-layer magnetizations, shape ``(L + 1, 3)`` with columns ``x, y, z``."""
    n = config.n_sites
    _guard(n)
    V = layer_isometry(params, config)
    rho = np.asarray(rho_in, dtype=complex)
    traj = [magnetizations_dense(rho, n)]
    for _ in range(config.n_steps):
        rho = np.einsum("onb,bc,omc->nm", V, rho, V.conj(), optimize=True)
        traj.append(magnetizations_dense(rho, n))
    return np.array(traj)


def x_basis_probabilities(rho, n_sites: int) -> np.ndarray:
    """Born probabilities of all x-basis outcome strings.

    Entry ``b`` (binary, site 1 most significant) has bit 0 for outcome +1
    and bit 1 for outcome -1.
    """
    had = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    U = np.ones((1, 1), dtype=complex)
    for _ in range(n_sites):
        U = np.kron(U, had)
    return np.real(np.diag(U @ np.asarray(rho) @ U.conj().T)).copy()
