"""Dense state-vector simulation.

Conventions: hbar = 1, energies in MeV, times in 1/MeV. Qubit 0 is the most
significant bit of a basis index; in controlled circuits the ancilla is qubit 0.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pauli import PauliOperator, PauliString

NORM_TOL = 1e-9


class StateVector:
    """Normalized complex amplitudes over ``2**n_qubits`` basis states."""

    __slots__ = ("amplitudes", "n_qubits")

    def __init__(self, amplitudes, normalize: bool = True):
        a = np.array(amplitudes, dtype=complex).ravel()
        n = int(round(math.log2(a.shape[0]))) if a.shape[0] else -1
        if n < 0 or 2 ** n != a.shape[0]:
            raise ValueError(f"length {a.shape[0]} is not a power of two")
        if normalize:
            nrm = np.linalg.norm(a)
            if nrm == 0:
                raise ValueError("zero vector cannot be normalized")
            a = a / nrm
        a.setflags(write=False)
        self.amplitudes = a
        self.n_qubits = n

    @classmethod
    def basis_state(cls, n_qubits: int, index: int | str) -> "StateVector":
        if isinstance(index, str):
            if len(index) != n_qubits:
                raise ValueError("bitstring length does not match n_qubits")
            index = int(index, 2)
        a = np.zeros(2 ** n_qubits, dtype=complex)
        a[index] = 1.0
        return cls(a)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(np.kron(self.amplitudes, other.amplitudes), normalize=False)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_qubits": self.n_qubits,
                "real": self.amplitudes.real.tolist(),
                "imag": self.amplitudes.imag.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "StateVector":
        d = json.loads(text)
        return cls(np.array(d["real"]) + 1j * np.array(d["imag"]), normalize=False)

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits})"


def _as_array(v) -> np.ndarray:
    return v.amplitudes if isinstance(v, StateVector) else np.asarray(v, dtype=complex)


# --- Trotterized evolution -------------------------------------------------


@dataclass(frozen=True)
class TrotterPlan:
    """First-order product formula for ``exp(-i H dt)``.

    ``terms`` are applied in list order. :meth:`from_operator` keeps terms that
    flip the same qubits next to each other, groups ordered by their largest
    |coefficient| and terms inside a group by descending |coefficient|, ties
    broken by label. Same-flip terms of a real operator commute, so each group
    is exponentiated exactly and every diagonal symmetry (particle number,
    M, Tz) survives the splitting.
    """

    terms: tuple[tuple[PauliString, float], ...]
    dt: float
    n_qubits: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("Trotter step must be positive")

    @classmethod
    def from_operator(cls, op: PauliOperator, dt: float) -> "TrotterPlan":
        if not op.is_hermitian():
            raise ValueError("Trotterization needs a Hermitian operator (real coefficients)")
        items = [(ps, c.real) for ps, c in op.terms.items()]
        items.sort(key=lambda t: (-abs(t[1]), t[0].letters))
        lead: dict[int, int] = {}
        for rank, (ps, _) in enumerate(items):
            lead.setdefault(ps.masks[0], rank)
        items.sort(key=lambda t: lead[t[0].masks[0]])  # stable: keeps in-group order
        return cls(tuple(items), float(dt), op.n_qubits)

    def operator(self) -> PauliOperator:
        return PauliOperator(self.n_qubits, {ps: c for ps, c in self.terms})

    def adjoint(self) -> "TrotterPlan":
        """Plan whose step is the inverse of this plan's step."""
        return TrotterPlan(tuple((ps, -c) for ps, c in reversed(self.terms)), self.dt, self.n_qubits)

    def steps_for(self, t: float) -> tuple[int, float]:
        k = int(round(t / self.dt))
        return k, t - k * self.dt

    def _compiled(self):
        cache = self.__dict__.get("_cache")
        if cache is None:
            cache = []
            idx = np.arange(2 ** self.n_qubits)
            for ps, c in self.terms:
                x, z = ps.masks
                single = PauliOperator(self.n_qubits, {(x, z): 1.0})
                (_, d), = single._diagonals()
                cache.append((idx ^ x, d, c))
            object.__setattr__(self, "_cache", cache)
        return cache


def _apply_step(plan: TrotterPlan, a: np.ndarray) -> np.ndarray:
    # exp(-i c dt P) = cos(c dt) I - i sin(c dt) P
    for perm, d, c in plan._compiled():
        theta = c * plan.dt
        pa = np.empty_like(a)
        if a.ndim == 1:
            pa[perm] = d * a
        else:
            pa[perm] = d[:, None] * a
        a = math.cos(theta) * a - 1j * math.sin(theta) * pa
    return a


def trotter_step(plan: TrotterPlan, v) -> StateVector:
    a = _as_array(v)
    if a.shape[0] != 2 ** plan.n_qubits:
        raise ValueError("dimension mismatch between plan and state")
    return StateVector(_apply_step(plan, a), normalize=False)


def evolve(plan: TrotterPlan, v, t: float) -> StateVector:
    """Apply ``round(t/dt)`` Trotter steps; a grid residual above 1e-9 warns."""
    if t < 0:
        raise ValueError("negative evolution time; use the adjoint plan instead")
    a = _as_array(v)
    if a.shape[0] != 2 ** plan.n_qubits:
        raise ValueError("dimension mismatch between plan and state")
    k, residual = plan.steps_for(t)
    if abs(residual) > 1e-9:
        warnings.warn(f"t={t} is off the Trotter grid by {residual:.3g}", stacklevel=2)
    for _ in range(k):
        a = _apply_step(plan, a)
    return StateVector(a, normalize=False)


class ExactPropagator:
    """``exp(-i H t)`` from a dense eigendecomposition (n <= 12)."""

    def __init__(self, op: PauliOperator):
        if op.n_qubits > 12:
            raise ValueError("exact evolution limited to 12 qubits")
        self.n_qubits = op.n_qubits
        self.energies, self.vectors = np.linalg.eigh(op.to_matrix())

    def apply(self, a: np.ndarray, t: float) -> np.ndarray:
        coeffs = self.vectors.conj().T @ a
        return self.vectors @ (np.exp(-1j * self.energies * t) * coeffs)


class Evolver:
    """Realizes ``exp(-i H t)`` for either backend, in both time directions.

    With the Trotter backend the backward direction uses the adjoint step, so
    forward and backward evolutions are exact inverses of each other. Times off
    the ``trotter_dt`` grid are split into equal steps no longer than ``trotter_dt``.
    """

    def __init__(self, op: PauliOperator, backend: str = "trotter", trotter_dt: float = 0.05):
        if backend not in ("trotter", "exact"):
            raise ValueError(f"unknown backend {backend!r}")
        self.operator = op
        self.backend = backend
        self.n_qubits = op.n_qubits
        if backend == "trotter":
            self.plan = TrotterPlan.from_operator(op, trotter_dt)
            self._adjoint = self.plan.adjoint()
        else:
            self.plan = None
            self._exact = ExactPropagator(op)

    def _shortened(self, dt: float, backward: bool) -> TrotterPlan:
        key = (round(dt, 12), backward)
        cache = self.__dict__.setdefault("_plans", {})
        if key not in cache:
            base = self._adjoint if backward else self.plan
            cache[key] = TrotterPlan(base.terms, dt, base.n_qubits)
        return cache[key]

    def propagate(self, v, t: float) -> np.ndarray:
        """Realized ``exp(-i H t) v`` for any sign of ``t``."""
        a = _as_array(v)
        if self.backend == "exact":
            return self._exact.apply(a, t)
        k, residual = self.plan.steps_for(abs(t))
        if abs(residual) > 1e-9:
            # off the grid: ceil(|t|/dt) equal steps, none longer than dt
            k = max(1, math.ceil(abs(t) / self.plan.dt - 1e-9))
            plan = self._shortened(abs(t) / k, t < 0)
        else:
            plan = self.plan if t >= 0 else self._adjoint
        for _ in range(k):
            a = _apply_step(plan, a)
        return a

    def evolve(self, v, t: float) -> StateVector:
        return StateVector(self.propagate(v, t), normalize=False)


def controlled_evolve(evolver: Evolver, v, t: float, ancilla: int = 0) -> StateVector:
    """Apply the register evolution ``exp(-i H t)`` when the ancilla (qubit 0) is |1>."""
    if ancilla != 0:
        raise ValueError("the ancilla must be qubit 0")
    a = np.array(_as_array(v))
    if a.shape[0] != 2 ** (evolver.n_qubits + 1):
        raise ValueError("controlled evolution expects 1 + n qubits")
    half = a.shape[0] // 2
    a[half:] = evolver.propagate(a[half:], t)
    return StateVector(a, normalize=False)


# --- gates, Cliffords and sampling ----------------------------------------

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
PHASE_S = np.array([[1, 0], [0, 1j]], dtype=complex)


def apply_single_qubit(v, gate: np.ndarray, qubit: int) -> StateVector:
    a = _as_array(v)
    n = int(round(math.log2(a.shape[0])))
    t = a.reshape((2,) * n)
    t = np.moveaxis(np.tensordot(gate, t, axes=([1], [qubit])), 0, qubit)
    return StateVector(t.reshape(-1), normalize=False)


def apply_local_unitaries(a: np.ndarray, gates: Sequence[np.ndarray] | np.ndarray, first_qubit: int = 0) -> np.ndarray:
    """Apply one 2x2 unitary per qubit, starting at ``first_qubit``.

    ``a`` may carry a leading batch axis matching a batch of gates with shape
    ``(batch, n_gates, 2, 2)``.
    """
    gates = np.asarray(gates)
    batched = gates.ndim == 4
    if batched:
        batch, dim = gates.shape[0], a.shape[-1]
        n = int(round(math.log2(dim)))
        t = np.broadcast_to(a, (batch, dim))
        for k in range(gates.shape[1]):
            q = first_qubit + k
            t = t.reshape(batch, 2 ** q, 2, 2 ** (n - q - 1))
            g = gates[:, k, :, :, None, None]
            lo, hi = t[:, :, 0], t[:, :, 1]
            t = np.stack([g[:, 0, 0] * lo + g[:, 0, 1] * hi, g[:, 1, 0] * lo + g[:, 1, 1] * hi], axis=2)
        return t.reshape(batch, dim)
    n = int(round(math.log2(a.shape[0])))
    t = a.reshape((2,) * n)
    for k, g in enumerate(gates):
        q = first_qubit + k
        t = np.moveaxis(np.tensordot(g, t, axes=([1], [q])), 0, q)
    return t.reshape(-1)


def apply_clifford(c, v) -> StateVector:
    """Apply a CliffordDescription to the whole register of ``v``."""
    a = _as_array(v)
    if 2 ** c.n_qubits != a.shape[0]:
        raise ValueError("Clifford and state sizes differ")
    if c.kind == "local":
        return StateVector(apply_local_unitaries(a, c.local_unitaries()), normalize=False)
    return StateVector(c.unitary() @ a, normalize=False)


def sample_z(v, rng: np.random.Generator, shots: int | None = None):
    """Computational-basis outcomes (integers) drawn with probability |amplitude|^2."""
    p = np.abs(_as_array(v)) ** 2
    p = p / p.sum()
    if shots is None:
        return int(rng.choice(p.shape[0], p=p))
    return rng.choice(p.shape[0], size=shots, p=p)


def sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One outcome per row of a (batch, dim) probability array."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    out = (cdf < u[:, None]).sum(axis=1)
    return np.minimum(out, probs.shape[1] - 1)
