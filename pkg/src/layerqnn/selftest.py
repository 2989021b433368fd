"""Fast oracle-equivalence and invariant checks behind ``layerqnn selftest``."""

from __future__ import annotations

import numpy as np

from . import dense
from .model import NetworkConfig, ParamSet, boundary_gate, build_gate
from .mps import evolve_trajectory, mps_from_dense
from .presets import initial_params
from .sampler import outcome_probability
from .training import OptimizerState, contrastive_loss, nadam_step

SEED = 20240917


def _gate_unitarity():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(20):
        p = ParamSet.random(rng)
        for g in (build_gate(p, 0.1), boundary_gate(p, 0.1)):
            worst = max(worst, np.abs(g.conj().T @ g - np.eye(len(g))).max())
    return worst <= 1e-10, f"max |G^dag G - I| = {worst:.2e}"


def _trace_preservation():
    rng = np.random.default_rng(SEED + 1)
    worst = 0.0
    net = NetworkConfig(3, 1, 0.1)
    for _ in range(5):
        p = ParamSet.random(rng)
        for rho in dense.random_product_states(3, 3, SEED):
            out = dense.layer_step_dense(p, net, rho)
            worst = max(worst, abs(np.trace(out) - 1))
    return worst <= 1e-10, f"max |Tr - 1| = {worst:.2e}"


def _oracle_equivalence():
    rng = np.random.default_rng(SEED + 2)
    net = NetworkConfig(4, 3, 0.1)
    worst = 0.0
    for _ in range(2):
        p = ParamSet.random(rng)
        rho = dense.random_product_states(4, 1, int(rng.integers(2**31)))[0]
        ref = dense.evolve_dense(p, net, rho)[:, 0]
        for backend in ("mpo", "sweep"):
            traj, _ = evolve_trajectory(mps_from_dense(rho, 4), p, net, None, None, backend=backend)
            worst = max(worst, np.abs(traj - ref).max())
    return worst <= 1e-8, f"max |m^x(tn) - m^x(dense)| = {worst:.2e}"


def _sampler_joint():
    net = NetworkConfig(3, 2, 0.1)
    p = initial_params("I")
    rho = dense.random_product_states(3, 1, SEED)[0]
    for _ in range(net.n_steps):
        rho = dense.layer_step_dense(p, net, rho)
    probs = dense.x_basis_probabilities(rho, 3)
    state = mps_from_dense(rho, 3)
    worst = 0.0
    for idx, ref in enumerate(probs):
        bits = [(idx >> (2 - k)) & 1 for k in range(3)]
        worst = max(worst, abs(outcome_probability(state, [1 - 2 * b for b in bits]) - ref))
    return worst <= 1e-8, f"max joint-probability error = {worst:.2e}"


def _optimizer_and_loss():
    _, f = nadam_step(OptimizerState(0.75, 0.98, 0.05, 1e-7), np.array([2.0]))
    loss = contrastive_loss([0.1, 0.2], ["A", "B"], 0.25)
    ok = abs(f[0] - 3.5 / (2 + 1e-7)) < 1e-12 and abs(loss - 0.01125) < 1e-15
    return ok, f"nadam f1 = {f[0]:.9f}, loss = {loss:.6f}"


CHECKS = (
    ("gate unitarity", _gate_unitarity),
    ("channel trace preservation", _trace_preservation),
    ("tensor networks vs dense oracle", _oracle_equivalence),
    ("sampler joint probability", _sampler_joint),
    ("optimizer and loss examples", _optimizer_and_loss),
)


def run(report=print) -> int:
    """Run every check, report one line each and return the failure count."""
    failures = 0
    for name, check in CHECKS:
        ok, detail = check()
        failures += not ok
        report(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return failures
