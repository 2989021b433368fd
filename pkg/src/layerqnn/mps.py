"""Matrix-product evolution of vectorized layer states.

A layer state is stored as an MPS whose site tensors have shape
``(chi_left, 4, chi_right)``; the physical leg is the vectorized qubit
``|i><j| -> 2i + j``. The layer channel is an MPO with site tensors
``(chi_left, 4_out, 4_in, chi_right)``.

Two independent ways to advance a layer are provided:

``build_layer_mpo`` + ``apply_mpo``
    the channel is compressed into an MPO once per parameter set and then
    zipped into each state.
``sweep_evolve``
    the local gates are applied one by one on the widened (old qubit, fresh
    qubit) chain, tracing out each old qubit as soon as its gate is done.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import NetworkConfig, ParamSet, gate_superoperator, layer_gate_maps
from .tensor import TRACE_VEC, NumericalError, SvdTruncation, gram_truncate, include_direction, svd_truncate

__all__ = [
    "TruncationWarning",
    "LayerMps",
    "LayerMpo",
    "OBSERVABLE_VECS",
    "DEFAULT_ALARM",
    "product_state_mps",
    "identity_mpo",
    "build_layer_mpo",
    "apply_mpo",
    "sweep_evolve",
    "mps_trace",
    "expectation",
    "magnetization_expectation",
    "magnetizations",
    "to_dense",
    "mps_from_dense",
    "evolve_trajectory",
]

DEFAULT_ALARM = 1e-3
# bond cap during the zip-up pass, relative to chi_mps
ZIP_FACTOR = 2
VACUUM_VEC = np.array([1.0, 0.0, 0.0, 0.0], dtype=complex)

# w[2i + j] = sigma[j, i] so that w . vec(rho) = Tr(sigma rho)
OBSERVABLE_VECS = {
    "x": np.array([0, 1, 1, 0], dtype=complex),
    "y": np.array([0, 1j, -1j, 0], dtype=complex),
    "z": np.array([1, 0, 0, -1], dtype=complex),
}


class TruncationWarning(UserWarning):
    """Discarded weight of a single application exceeded the alarm threshold."""


@dataclass(frozen=True)
class LayerMps:
    tensors: tuple
    center: int | None = None
    chi_max: int | None = None
    discarded_weight: float = 0.0

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]


@dataclass(frozen=True)
class LayerMpo:
    tensors: tuple
    chi_max: int | None = None
    discarded_weight: float = 0.0

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[3] for t in self.tensors[:-1]]


def _trunc(chi, trunc: SvdTruncation | None) -> SvdTruncation:
    cutoff = trunc.rel_cutoff if trunc is not None else 1e-12
    rank = chi if chi is not None else (trunc.max_rank if trunc is not None else None)
    return SvdTruncation(rank, cutoff)


def _alarm(weight, threshold, what):
    if threshold is not None and weight > threshold:
        warnings.warn(f"{what}: discarded weight {weight:.3e} exceeds {threshold:.1e}", TruncationWarning, stacklevel=3)


def _left_canonical(tensors):
    """QR sweep left to right on (l, p, r) tensors; the last site carries the norm."""
    out = list(tensors)
    for i in range(len(out) - 1):
        l, p, r = out[i].shape
        q, rr = np.linalg.qr(out[i].reshape(l * p, r))
        out[i] = q.reshape(l, p, -1)
        out[i + 1] = np.tensordot(rr, out[i + 1], axes=(1, 0))
    return out


def _right_canonical(tensors):
    out = list(tensors)
    for i in range(len(out) - 1, 0, -1):
        l, p, r = out[i].shape
        q, rr = np.linalg.qr(out[i].reshape(l, p * r).T)
        out[i] = q.T.reshape(-1, p, r)
        out[i - 1] = np.tensordot(out[i - 1], rr.T, axes=(2, 0))
    return out


def _compress_right_to_left(tensors, trunc: SvdTruncation, preserve_trace: bool = False):
    """SVD sweep from the right on a left-canonical chain; ends with center 0.

    With ``preserve_trace`` every kept right subspace contains the trace
    functional of the sites to its right, so truncation leaves the trace intact.
    """
    out = list(tensors)
    discarded = 0.0
    env = np.ones(1, dtype=complex)
    for i in range(len(out) - 1, 0, -1):
        l, p, r = out[i].shape
        m = out[i].reshape(l, p * r)
        u, s, v, dw = svd_truncate(m, trunc)
        if preserve_trace and dw > 0:
            q = include_direction(v.conj().T, np.kron(TRACE_VEC, env), trunc.max_rank)
            v = q.conj().T
            us = m @ q
            dw = _lost_weight(m, us)
        else:
            us = u * s
        discarded += dw
        out[i] = v.reshape(-1, p, r)
        if preserve_trace:
            env = np.tensordot(out[i], TRACE_VEC, axes=(1, 0)) @ env
        out[i - 1] = np.tensordot(out[i - 1], us, axes=(2, 0))
    return out, discarded


def _lost_weight(full, kept) -> float:
    total = float(np.vdot(full, full).real)
    if total == 0:
        return 0.0
    return max(0.0, 1.0 - float(np.vdot(kept, kept).real) / total)


def product_state_mps(bloch, n_sites: int, chi_max: int | None = None) -> LayerMps:
    """Bond-dimension-1 MPS of ``(I/2 + m.sigma)^{(x) N}``."""
    mx, my, mz = (float(c) for c in bloch)
    radius = np.sqrt(mx * mx + my * my + mz * mz)
    if abs(radius - 0.5) > 1e-10:
        raise ValueError(f"Bloch vector must have length 1/2, got {radius!r}")
    site = np.array([0.5 + mz, mx - 1j * my, mx + 1j * my, 0.5 - mz], dtype=complex).reshape(1, 4, 1)
    return LayerMps(tuple(site.copy() for _ in range(n_sites)), center=0, chi_max=chi_max)


def identity_mpo(n_sites: int) -> LayerMpo:
    eye = np.eye(4, dtype=complex).reshape(1, 4, 4, 1)
    return LayerMpo(tuple(eye.copy() for _ in range(n_sites)))


def build_layer_mpo(
    params: ParamSet,
    config: NetworkConfig,
    chi_mpo: int | None = None,
    trunc: SvdTruncation | None = None,
    alarm: float | None = DEFAULT_ALARM,
) -> LayerMpo:
    """Compress the layer channel into an MPO.

    Gate maps are absorbed into an identity MPO from the right edge inwards
    (``k = N..2`` then the boundary site), splitting each two-site block by
    SVD with the relative cutoff; a final canonical sweep caps the bonds at
    ``chi_mpo``.
    """
    n = config.n_sites
    bulk, edge = layer_gate_maps(params, config.dt)
    cut = SvdTruncation(None, trunc.rel_cutoff if trunc is not None else 1e-12)
    w = list(identity_mpo(n).tensors)
    discarded = 0.0
    for k in range(n - 1, 0, -1):
        theta = np.einsum("laim,mbjr->laibjr", w[k - 1], w[k], optimize=True)
        theta = np.einsum("xyab,laibjr->lxiyjr", bulk, theta, optimize=True)
        l, r = theta.shape[0], theta.shape[-1]
        u, s, v, dw = svd_truncate(theta.reshape(l * 16, 16 * r), cut)
        discarded += dw
        w[k - 1] = (u * s).reshape(l, 4, 4, -1)
        w[k] = v.reshape(-1, 4, 4, r)
    w[0] = np.einsum("xa,laib->lxib", edge, w[0])

    flat = [t.reshape(t.shape[0], 16, t.shape[3]) for t in w]
    flat, dw = _compress_right_to_left(_left_canonical(flat), _trunc(chi_mpo, trunc))
    discarded += dw
    _alarm(discarded, alarm, "build_layer_mpo")
    tensors = tuple(t.reshape(t.shape[0], 4, 4, t.shape[2]) for t in flat)
    return LayerMpo(tensors, chi_max=chi_mpo, discarded_weight=discarded)


def apply_mpo(
    state: LayerMps,
    mpo: LayerMpo,
    chi_mps: int | None = None,
    trunc: SvdTruncation | None = None,
    alarm: float | None = DEFAULT_ALARM,
    preserve_trace: bool = True,
    zip_factor: float = ZIP_FACTOR,
) -> LayerMps:
    """Apply ``mpo`` to ``state`` and recompress.

    Zip-up from the left on the right-canonical state (bonds capped at
    ``zip_factor * chi_mps`` during the zip), then an SVD sweep from the right capping
    at ``chi_mps``. ``preserve_trace`` keeps the trace functional inside every
    truncated subspace (see :func:`include_direction`).
    """
    if state.n_sites != mpo.n_sites:
        raise ValueError(f"MPS has {state.n_sites} sites but MPO has {mpo.n_sites}")
    tr = _trunc(chi_mps, trunc)
    zip_tr = SvdTruncation(None if tr.max_rank is None else max(1, int(zip_factor * tr.max_rank)), tr.rel_cutoff)
    a = state.tensors if state.center == 0 else _right_canonical(state.tensors)
    n = state.n_sites
    out = []
    carry = np.ones((1, 1, 1), dtype=complex)
    env = np.ones(1, dtype=complex)  # left trace environment of the finished sites
    discarded = 0.0
    for i in range(n):
        w = mpo.tensors[i]
        # carry (k, s, w) . A (s, p, r) -> (k, w, p, r)
        t = np.tensordot(carry, a[i], axes=(1, 0))
        # . W (w, q, p, v) -> (k, r, q, v)
        t = np.tensordot(t, w, axes=((1, 2), (0, 2)))
        k, r, q, v = t.shape
        t = t.transpose(0, 2, 1, 3).reshape(k * q, r * v)
        if i == n - 1:
            out.append(t.reshape(k, q, r * v))
            break
        if zip_tr.max_rank is None:
            u, s, vh, dw = svd_truncate(t, zip_tr)
            rest = s[:, None] * vh
        else:
            u, rest, dw = gram_truncate(t, zip_tr)
        if preserve_trace and dw > 0:
            u = include_direction(u, np.kron(env, TRACE_VEC).conj(), zip_tr.max_rank)
            rest = u.conj().T @ t
            dw = _lost_weight(t, rest)
        discarded += dw
        out.append(u.reshape(k, q, -1))
        env = np.kron(env, TRACE_VEC) @ u
        carry = rest.reshape(-1, r, v)
    out, dw = _compress_right_to_left(out, tr, preserve_trace)
    discarded += dw
    _alarm(discarded, alarm, "apply_mpo")
    return LayerMps(tuple(out), center=0, chi_max=chi_mps, discarded_weight=state.discarded_weight + discarded)


def sweep_evolve(
    state: LayerMps,
    params: ParamSet,
    config: NetworkConfig,
    chi_mps: int | None = None,
    trunc: SvdTruncation | None = None,
    alarm: float | None = DEFAULT_ALARM,
    superops=None,
) -> LayerMps:
    """Advance one layer by applying the vectorized gates directly.

    Each site is widened with a vacuum qubit of the new layer just before
    its gate; the 64x64 gate superoperator acts on (old k-1, old k, new k)
    and the old qubit of site ``k`` is traced out right after.
    """
    n = config.n_sites
    if state.n_sites != n:
        raise ValueError(f"MPS has {state.n_sites} sites, config has {n}")
    if superops is None:
        superops = (gate_superoperator(params, config.dt), gate_superoperator(params, config.dt, boundary=True))
    bulk, edge = superops
    tr = _trunc(chi_mps, trunc)
    a = state.tensors if state.center == n - 1 else _left_canonical(state.tensors)
    a = list(a)
    discarded = 0.0
    for k in range(n - 1, 0, -1):
        wide = np.einsum("mbr,c->mbcr", a[k], VACUUM_VEC)
        theta = np.einsum("lam,mbcr->labcr", a[k - 1], wide, optimize=True)
        theta = np.einsum("xyzabc,labcr,y->lxzr", bulk, theta, TRACE_VEC, optimize=True)
        l, r = theta.shape[0], theta.shape[-1]
        u, s, v, dw = svd_truncate(theta.reshape(l * 4, 4 * r), tr)
        discarded += dw
        a[k - 1] = (u * s).reshape(l, 4, -1)
        a[k] = v.reshape(-1, 4, r)
    wide = np.einsum("lar,c->lacr", a[0], VACUUM_VEC)
    a[0] = np.einsum("xzac,lacr,x->lzr", edge, wide, TRACE_VEC, optimize=True)
    _alarm(discarded, alarm, "sweep_evolve")
    return LayerMps(tuple(a), center=0, chi_max=chi_mps, discarded_weight=state.discarded_weight + discarded)


def mps_trace(state: LayerMps) -> complex:
    env = np.ones(1, dtype=complex)
    for t in state.tensors:
        env = env @ np.tensordot(t, TRACE_VEC, axes=(1, 0))
    return complex(env[0])


def expectation(state: LayerMps, axis: str) -> complex:
    """``Tr(m^axis rho)`` with ``m^a = sum_k sigma^a_k / (2N)``, single left-to-right pass."""
    if axis not in OBSERVABLE_VECS:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}")
    obs = OBSERVABLE_VECS[axis]
    env_tr = np.ones(1, dtype=complex)
    env_sum = np.zeros(1, dtype=complex)
    for t in state.tensors:
        t_tr = np.tensordot(t, TRACE_VEC, axes=(1, 0))
        t_obs = np.tensordot(t, obs, axes=(1, 0))
        env_sum = env_sum @ t_tr + env_tr @ t_obs
        env_tr = env_tr @ t_tr
    return complex(env_sum[0]) / (2 * state.n_sites)


def magnetization_expectation(state: LayerMps, axis: str = "x", imag_tol: float = 1e-6) -> float:
    value = expectation(state, axis)
    if abs(value.imag) > imag_tol:
        warnings.warn(f"m^{axis} has imaginary part {value.imag:.2e}", RuntimeWarning, stacklevel=2)
    return value.real


def magnetizations(state: LayerMps) -> np.ndarray:
    return np.array([expectation(state, a).real for a in "xyz"])


def to_dense(state: LayerMps) -> np.ndarray:
    """Contract a small MPS back to a ``2^N x 2^N`` density matrix."""
    n = state.n_sites
    if n > 10:
        raise ValueError("to_dense is for small chains only")
    vec = np.ones((1, 1), dtype=complex)
    for t in state.tensors:
        vec = np.tensordot(vec, t, axes=(1, 0)).reshape(-1, t.shape[2])
    t = vec.reshape((2,) * (2 * n))
    order = [q * 2 for q in range(n)] + [q * 2 + 1 for q in range(n)]
    return np.transpose(t, order).reshape(2**n, 2**n)


def evolve_trajectory(
    state: LayerMps,
    params: ParamSet,
    config: NetworkConfig,
    chi_mpo: int | None = None,
    chi_mps: int | None = None,
    trunc: SvdTruncation | None = None,
    backend: str = "mpo",
    mpo: LayerMpo | None = None,
    axes: str = "x",
    zip_factor: float = ZIP_FACTOR,
):
    """Advance ``config.n_steps`` layers recording magnetizations after each.

    Returns ``(trajectory, final_state)``; ``trajectory`` has shape
    ``(L + 1,)`` for a single axis and ``(L + 1, len(axes))`` otherwise.
    """
    if backend == "mpo":
        if mpo is None:
            mpo = build_layer_mpo(params, config, chi_mpo, trunc)

        def step(s):
            return apply_mpo(s, mpo, chi_mps, trunc, zip_factor=zip_factor)

    elif backend == "sweep":
        ops = (gate_superoperator(params, config.dt), gate_superoperator(params, config.dt, boundary=True))

        def step(s):
            return sweep_evolve(s, params, config, chi_mps, trunc, superops=ops)

    else:
        raise ValueError(f"unknown tensor-network backend {backend!r}")

    def record(s):
        vals = [magnetization_expectation(s, a) for a in axes]
        return vals[0] if len(axes) == 1 else vals

    traj = [record(state)]
    for _ in range(config.n_steps):
        state = step(state)
        if not np.isfinite(state.discarded_weight):
            raise NumericalError("non-finite discarded weight during evolution")
        traj.append(record(state))
    return np.array(traj), state


def mps_from_dense(rho, n_sites: int, trunc: SvdTruncation | None = None) -> LayerMps:
    """Exact (or truncated) MPS of a dense density matrix by successive SVDs."""
    vec = np.asarray(rho, dtype=complex).reshape((2,) * (2 * n_sites))
    order = [ax for q in range(n_sites) for ax in (q, n_sites + q)]
    rest = np.transpose(vec, order).reshape(1, -1)
    tensors = []
    for _ in range(n_sites - 1):
        l = rest.shape[0]
        u, s, v, _ = svd_truncate(rest.reshape(l * 4, -1), trunc)
        tensors.append(u.reshape(l, 4, -1))
        rest = s[:, None] * v
    tensors.append(rest.reshape(rest.shape[0], 4, 1))
    return LayerMps(tuple(tensors), center=n_sites - 1)
