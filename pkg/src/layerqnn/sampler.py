"""Finite-shot x-basis measurement of an output layer.

Shots are drawn site by site from the chain-rule factorization of the Born
distribution. For outcome ``m`` on site ``i`` the vectorized site tensor is
projected with

    T^+ = (M^00 + M^01 + M^10 + M^11) / 2
    T^- = (M^00 - M^01 - M^10 + M^11) / 2

and every site to the right is closed with the trace vector.

Randomness comes from a counter-based Philox stream keyed by
``(seed, *key)``. Shot ``s`` consumes the uniforms ``[s*N, (s+1)*N)`` of that
stream, so each shot's draws depend only on the key and the shot index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .mps import LayerMps, mps_trace
from .tensor import TRACE_VEC, NumericalError

__all__ = [
    "ShotEstimate",
    "PROJECTORS",
    "shot_stream",
    "shot_uniforms",
    "sample_shots",
    "sample_shot",
    "estimate_magnetization",
    "outcome_probability",
    "conditional_probabilities",
]

logger = logging.getLogger(__name__)

PROJECTORS = {
    +1: np.array([1, 1, 1, 1], dtype=complex) / 2,
    -1: np.array([1, -1, -1, 1], dtype=complex) / 2,
}
NEGATIVE_TOL = 1e-6
TRACE_TOL = 1e-4


@dataclass(frozen=True)
class ShotEstimate:
    shots: int
    n_sites: int
    estimate: float
    outcomes: np.ndarray | None = None
    stream: tuple = ()
    clamped_mass: float = 0.0


def shot_stream(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the stream ``(seed, *key)``."""
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in key)])
    return np.random.Generator(np.random.Philox(ss))


def shot_uniforms(seed: int, key: tuple, shots: int, n_sites: int, first_shot: int = 0) -> np.ndarray:
    """Uniforms for shots ``first_shot .. first_shot + shots - 1``, shape (shots, N)."""
    bitgen = np.random.Philox(np.random.SeedSequence([int(seed), *(int(k) for k in key)]))
    if first_shot:
        # Philox yields 4 doubles per counter increment (one 64-bit word each)
        start = first_shot * n_sites
        bitgen.advance(start // 4)
        skip = start % 4
    else:
        skip = 0
    draws = np.random.Generator(bitgen).random(shots * n_sites + skip)
    return draws[skip:].reshape(shots, n_sites)


def _site_projections(state: LayerMps):
    tp = [np.tensordot(t, PROJECTORS[+1], axes=(1, 0)) for t in state.tensors]
    tm = [np.tensordot(t, PROJECTORS[-1], axes=(1, 0)) for t in state.tensors]
    return tp, tm


def _right_envs(state: LayerMps):
    envs = [np.ones(1, dtype=complex)]
    for t in reversed(state.tensors):
        envs.append(np.tensordot(t, TRACE_VEC, axes=(1, 0)) @ envs[-1])
    return envs[::-1]  # envs[i] closes sites i..N-1


def _check_trace(state: LayerMps):
    tr = mps_trace(state)
    if abs(tr - 1) > TRACE_TOL:
        raise NumericalError(f"state trace {tr:.6g} deviates from 1 by more than {TRACE_TOL}")


def sample_shots(state: LayerMps, uniforms) -> tuple[np.ndarray, float]:
    """Sample one shot per row of ``uniforms`` (shape (S, N)).

    Returns ``(outcomes, clamped_mass)`` with outcomes in {+1, -1}.
    """
    _check_trace(state)
    u = np.atleast_2d(np.asarray(uniforms, dtype=float))
    n = state.n_sites
    if u.shape[1] != n:
        raise ValueError(f"uniforms have {u.shape[1]} columns, state has {n} sites")
    shots = u.shape[0]
    tp, tm = _site_projections(state)
    right = _right_envs(state)
    left = np.ones((shots, 1), dtype=complex)
    outcomes = np.empty((shots, n), dtype=np.int8)
    clamped = 0.0
    for i in range(n):
        lp = left @ tp[i]
        lm = left @ tm[i]
        ap = (lp @ right[i + 1]).real
        am = (lm @ right[i + 1]).real
        norm = ap + am
        if np.any(norm <= 0):
            raise NumericalError(f"non-positive marginal at site {i}")
        p_plus = ap / norm
        worst = min(p_plus.min(), (1 - p_plus).min())
        if worst < -NEGATIVE_TOL:
            raise NumericalError(f"negative probability {worst:.3e} at site {i}")
        if worst < 0:
            clamped += float(np.sum(np.clip(-p_plus, 0, None) + np.clip(p_plus - 1, 0, None)))
            p_plus = np.clip(p_plus, 0.0, 1.0)
        plus = u[:, i] < p_plus
        outcomes[:, i] = np.where(plus, 1, -1)
        chosen = np.where(plus, ap, am)
        left = np.where(plus[:, None], lp, lm) / chosen[:, None]
    if clamped:
        logger.debug("clamped %.3e probability mass while sampling", clamped)
    return outcomes, clamped


def sample_shot(state: LayerMps, rng: np.random.Generator) -> np.ndarray:
    """One shot: N outcomes in {+1, -1}, left to right."""
    out, _ = sample_shots(state, rng.random((1, state.n_sites)))
    return out[0]


def estimate_magnetization(
    state: LayerMps, shots: int, seed: int, key: tuple = (), keep_outcomes: bool = False
) -> ShotEstimate:
    """``m_S = sum_{s,k} m_k^s / (2 S N)`` from ``shots`` x-basis shots."""
    if shots < 1:
        raise ValueError(f"need at least one shot, got {shots}")
    u = shot_uniforms(seed, key, shots, state.n_sites)
    outcomes, clamped = sample_shots(state, u)
    total = int(outcomes.sum(dtype=np.int64))
    estimate = total / (2 * shots * state.n_sites)
    return ShotEstimate(
        shots,
        state.n_sites,
        estimate,
        outcomes if keep_outcomes else None,
        (int(seed), *key),
        clamped,
    )


def outcome_probability(state: LayerMps, outcomes) -> float:
    """Joint probability ``Tr(P^{m_1} ... P^{m_N} rho)`` by direct contraction."""
    env = np.ones(1, dtype=complex)
    for t, m in zip(state.tensors, outcomes):
        env = env @ np.tensordot(t, PROJECTORS[int(m)], axes=(1, 0))
    return float(env[0].real)


def conditional_probabilities(state: LayerMps, outcomes) -> np.ndarray:
    """``p_i(m_i | m_1..m_{i-1})`` as ratios of partial contractions."""
    right = _right_envs(state)
    env = np.ones(1, dtype=complex)
    probs = []
    for i, (t, m) in enumerate(zip(state.tensors, outcomes)):
        denom = (env @ np.tensordot(t, TRACE_VEC, axes=(1, 0)) @ right[i + 1]).real
        env = env @ np.tensordot(t, PROJECTORS[int(m)], axes=(1, 0))
        probs.append((env @ right[i + 1]).real / denom)
    return np.array(probs)
