"""Physical building blocks: Pauli strings, parameter sets, local gates and
the Lindblad generator of the layer-to-layer dynamics.

Qubit conventions: ``|0>`` is the vacuum and the +1 eigenstate of
``sigma^z = diag(1, -1)``. Pauli indices are ordered ``I, x, y, z``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .tensor import TRACE_VEC, matrix_exp, superoperator

__all__ = [
    "PAULI",
    "PAULI_LABELS",
    "SIGMA_PLUS",
    "EXCITE",
    "Slot",
    "ParamSet",
    "NetworkConfig",
    "two_site_operator",
    "build_gate",
    "boundary_gate",
    "gate_superoperator",
    "layer_gate_maps",
    "local_operators",
    "lindblad_apply",
    "lindblad_superoperator",
]

PAULI_LABELS = ("I", "x", "y", "z")
PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
# (sigma^x + i sigma^y) / 2 = |0><1|
SIGMA_PLUS = (PAULI[1] + 1j * PAULI[2]) / 2
# |1><0|: the ladder operator that takes the vacuum ancilla to |1>. Coupling
# J to this operator makes J the jump operator of the collision-model limit.
EXCITE = SIGMA_PLUS.conj().T

SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
VACUUM_VEC = np.array([1.0, 0.0, 0.0, 0.0], dtype=complex)

_PAULI_INDEX = {label: i for i, label in enumerate(PAULI_LABELS)}


def _pauli_index(a) -> int:
    if isinstance(a, str):
        return _PAULI_INDEX[a]
    return int(a)


class Slot(NamedTuple):
    """One real degree of freedom of a :class:`ParamSet`."""

    matrix: str  # "h" or "j"
    a1: int
    a2: int
    part: str = "re"  # "re" or "im"

    def to_json(self):
        return {"matrix": self.matrix, "a1": PAULI_LABELS[self.a1], "a2": PAULI_LABELS[self.a2], "part": self.part}

    @classmethod
    def from_json(cls, obj):
        return cls.make(obj["matrix"], obj["a1"], obj["a2"], obj.get("part", "re"))

    @classmethod
    def make(cls, matrix, a1, a2, part="re"):
        if matrix not in ("h", "j"):
            raise ValueError(f"unknown parameter matrix {matrix!r}")
        if part not in ("re", "im"):
            raise ValueError(f"unknown slot part {part!r}")
        if matrix == "h" and part == "im":
            raise ValueError("h is real; it has no imaginary slots")
        return cls(matrix, _pauli_index(a1), _pauli_index(a2), part)


def all_slots() -> tuple[Slot, ...]:
    slots = [Slot("h", a, b) for a in range(4) for b in range(4)]
    slots += [Slot("j", a, b, part) for a in range(4) for b in range(4) for part in ("re", "im")]
    return tuple(slots)


@dataclass(frozen=True)
class ParamSet:
    """Pauli-string coefficients of the Hamiltonian (``h``, real) and jump
    operator (``j``, complex), plus the ordered tuple of trainable slots.

    The flat view (:meth:`flat`) lists the trainable slots in ``mask`` order.
    """

    h: np.ndarray
    j: np.ndarray
    mask: tuple[Slot, ...] = field(default_factory=all_slots)

    def __post_init__(self):
        h = np.array(self.h, dtype=float).reshape(4, 4)
        j = np.array(self.j, dtype=complex).reshape(4, 4)
        h.setflags(write=False)
        j.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "j", j)
        mask = tuple(Slot.make(*s) for s in self.mask)
        if len(set(mask)) != len(mask):
            raise ValueError("mask contains duplicate slots")
        object.__setattr__(self, "mask", mask)

    @classmethod
    def zeros(cls, mask: Iterable | None = None) -> "ParamSet":
        return cls(np.zeros((4, 4)), np.zeros((4, 4), dtype=complex), tuple(mask) if mask is not None else all_slots())

    @classmethod
    def random(cls, rng: np.random.Generator, half_width: float = 0.5) -> "ParamSet":
        """All 48 real coefficients uniform in ``[-half_width, half_width]``."""
        u = lambda: rng.uniform(-half_width, half_width, (4, 4))  # noqa: E731
        h = u()
        return cls(h, u() + 1j * u())

    @classmethod
    def from_vector(cls, mask: Iterable, values) -> "ParamSet":
        """Build a parameter set that is zero outside ``mask``."""
        return cls.zeros(mask).with_flat(values)

    def get(self, slot: Slot) -> float:
        if slot.matrix == "h":
            return float(self.h[slot.a1, slot.a2])
        z = self.j[slot.a1, slot.a2]
        return float(z.real if slot.part == "re" else z.imag)

    def flat(self) -> np.ndarray:
        return np.array([self.get(s) for s in self.mask], dtype=float)

    def with_flat(self, values) -> "ParamSet":
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size != len(self.mask):
            raise ValueError(f"expected {len(self.mask)} values, got {values.size}")
        h = self.h.copy()
        j = self.j.copy()
        for slot, val in zip(self.mask, values):
            if slot.matrix == "h":
                h[slot.a1, slot.a2] = val
            elif slot.part == "re":
                j[slot.a1, slot.a2] = val + 1j * j[slot.a1, slot.a2].imag
            else:
                j[slot.a1, slot.a2] = j[slot.a1, slot.a2].real + 1j * val
        return ParamSet(h, j, self.mask)

    def perturbed(self, index: int, eps: float) -> "ParamSet":
        x = self.flat()
        x[index] += eps
        return self.with_flat(x)

    def to_json(self) -> dict:
        return {
            "h": self.h.tolist(),
            "j_re": self.j.real.tolist(),
            "j_im": self.j.imag.tolist(),
            "mask": [s.to_json() for s in self.mask],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ParamSet":
        j = np.array(obj["j_re"], dtype=float) + 1j * np.array(obj["j_im"], dtype=float)
        return cls(np.array(obj["h"], dtype=float), j, tuple(Slot.from_json(s) for s in obj["mask"]))

    def dumps(self) -> str:
        # repr of a Python float round-trips exactly
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "ParamSet":
        return cls.from_json(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, ParamSet):
            return NotImplemented
        return np.array_equal(self.h, other.h) and np.array_equal(self.j, other.j) and self.mask == other.mask

    __hash__ = None


@dataclass(frozen=True)
class NetworkConfig:
    """Lattice geometry: ``n_sites`` qubits per layer, ``n_steps`` layer
    transitions (``n_steps + 1`` layers) and time step ``dt``."""

    n_sites: int
    n_steps: int
    dt: float = 0.1
    boundary: str = "open"

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError(f"n_sites must be >= 2, got {self.n_sites}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.boundary != "open":
            raise ValueError(f"unsupported boundary rule {self.boundary!r}")


def two_site_operator(coeffs) -> np.ndarray:
    """``sum_{a1,a2} coeffs[a1, a2] sigma^a1 (x) sigma^a2`` as a 4x4 matrix."""
    c = np.asarray(coeffs, dtype=complex).reshape(4, 4)
    return np.einsum("ab,aij,bkl->ikjl", c, PAULI, PAULI).reshape(4, 4)


def _site_operator(coeffs) -> np.ndarray:
    # boundary: the missing left neighbour is the identity, so only a1 = I survives
    return np.einsum("b,bij->ij", np.asarray(coeffs, dtype=complex)[0], PAULI)


def _coupled_gate(H, J, dt):
    n = H.shape[0]
    ham = np.kron(matrix_exp(H, -1j * dt), np.eye(2))
    A = np.kron(J, EXCITE)
    jump = matrix_exp(A + A.conj().T, -1j * np.sqrt(dt))
    swap = np.kron(np.eye(n // 2), SWAP)
    return swap @ jump @ ham


def build_gate(params: ParamSet, dt: float) -> np.ndarray:
    """8x8 local gate on qubits (k-1, l-1), (k, l-1), (k, l), in that order.

    ``SWAP . exp(-i sqrt(dt) (J (x) E + h.c.)) . exp(-i dt H (x) 1)`` with
    ``E = |1><0|`` acting on the fresh layer-``l`` qubit.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    H = two_site_operator(params.h)
    J = two_site_operator(params.j)
    return _coupled_gate(H, J, dt)


def boundary_gate(params: ParamSet, dt: float) -> np.ndarray:
    """4x4 gate for the first site, on qubits (1, l-1), (1, l).

    Same as :func:`build_gate` with every ``a1 != I`` coefficient removed; the
    absent neighbour slot is contracted out.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    H = _site_operator(params.h)
    J = _site_operator(params.j)
    return _coupled_gate(H, J, dt)


def gate_superoperator(params: ParamSet, dt: float, boundary: bool = False) -> np.ndarray:
    """Vectorized gate ``rho -> G rho G^dag`` with 4-dim legs, output legs first."""
    if boundary:
        return superoperator(boundary_gate(params, dt), 2)
    return superoperator(build_gate(params, dt), 3)


def layer_gate_maps(params: ParamSet, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-gate maps on the vectorized layer chain.

    The fresh layer-``l`` qubit enters in the vacuum and the outgoing
    layer-``(l-1)`` qubit of site ``k`` is traced out right after gate ``k``
    (no later gate touches it). Returns

    - ``bulk``: shape (4, 4, 4, 4), legs ``(out k-1, out k, in k-1, in k)``;
    - ``edge``: shape (4, 4), legs ``(out 1, in 1)``.
    """
    s = gate_superoperator(params, dt)  # (o1, o2, n2, i1, i2, m2)
    bulk = np.einsum("abcdef,b,f->acde", s, TRACE_VEC, VACUUM_VEC)
    e = gate_superoperator(params, dt, boundary=True)  # (o1, n1, i1, m1)
    edge = np.einsum("abcd,a,d->bc", e, TRACE_VEC, VACUUM_VEC)
    return bulk, edge


def _embed(op, first: int, width: int, n_sites: int) -> np.ndarray:
    return np.kron(np.kron(np.eye(2**first), op), np.eye(2 ** (n_sites - first - width)))


def local_operators(params: ParamSet, n_sites: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Full-register Hamiltonians ``H_k`` and jump operators ``J_k``, k = 1..N."""
    if n_sites > 6:
        raise ValueError(f"dense operators limited to n_sites <= 6, got {n_sites}")
    hs = [_embed(_site_operator(params.h), 0, 1, n_sites)]
    js = [_embed(_site_operator(params.j), 0, 1, n_sites)]
    H2 = two_site_operator(params.h)
    J2 = two_site_operator(params.j)
    for k in range(1, n_sites):
        hs.append(_embed(H2, k - 1, 2, n_sites))
        js.append(_embed(J2, k - 1, 2, n_sites))
    return hs, js


def lindblad_apply(params: ParamSet, config: NetworkConfig, rho) -> np.ndarray:
    """Lindblad generator applied to a dense layer density matrix."""
    n = config.n_sites
    if n > 6:
        raise ValueError(f"lindblad_apply limited to n_sites <= 6, got {n}")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2**n, 2**n):
        raise ValueError(f"rho has shape {rho.shape}, expected {(2**n, 2**n)}")
    hs, js = local_operators(params, n)
    H = sum(hs)
    out = -1j * (H @ rho - rho @ H)
    for J in js:
        JdJ = J.conj().T @ J
        out += J @ rho @ J.conj().T - 0.5 * (JdJ @ rho + rho @ JdJ)
    return out


def lindblad_superoperator(params: ParamSet, config: NetworkConfig) -> np.ndarray:
    """Row-major matrix of :func:`lindblad_apply`, assembled column by column."""
    d = 2**config.n_sites
    cols = []
    for idx in range(d * d):
        basis = np.zeros(d * d, dtype=complex)
        basis[idx] = 1.0
        cols.append(lindblad_apply(params, config, basis.reshape(d, d)).reshape(-1))
    return np.stack(cols, axis=1)
