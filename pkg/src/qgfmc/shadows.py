"""Ancilla-assisted classical shadows of off-diagonal operators |b1><b0|.

One round prepares ``(|0>|b0> + |1>|b1>)/sqrt(2)``, applies a readout gate
``F`` to the ancilla (``H`` for the real part, ``H S`` for the imaginary part), a
random Clifford ``C`` to the register and measures everything in Z. With
``sign = (-1)^{z0}`` the signed inverted snapshots average to

* real part: ``(|b1><b0| + |b0><b1|) / 2``
* imag part: ``i (|b1><b0| - |b0><b1|) / 2``

so ``|b1><b0| = R - i I``. In the time-evolution circuit ``b0 = phi`` and
``b1 = exp(i H tau) phi``, giving ``Tr(O X) = <phi|O exp(i H tau)|phi>``.

Snapshots are inverted with the standard convention ``M^{-1}(C^dagger|z><z|C)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import stim

from .clifford import (
    random_tableau,
    single_qubit_cliffords,
    tableau_from_dict,
    tableau_to_dict,
    tableau_unitary,
    z_readout_table,
)
from .pauli import PauliOperator
from .simulator import (
    HADAMARD,
    PHASE_S,
    Evolver,
    StateVector,
    apply_local_unitaries,
    controlled_evolve,
    sample_rows,
)

REAL, IMAG = "real", "imag"
LOCAL, GLOBAL = "local", "global"
PARTS = (REAL, IMAG)
DENSE_LIMIT = 12
_CHUNK = 4096
# largest (3^n settings) x (2^(n+1) outcomes) table sampled directly
_SETTING_TABLE_LIMIT = 2 ** 25
# register bases measured by the local ensemble: X, Y, Z (outcome 0 is the +1 eigenvalue)
_BASIS_ROTATIONS = np.array([HADAMARD, HADAMARD @ PHASE_S.conj(), np.eye(2)])


class ShadowError(ValueError):
    pass


# --- Clifford descriptions -------------------------------------------------


@dataclass(frozen=True, eq=False)
class CliffordDescription:
    kind: str
    n_qubits: int
    local: tuple[int, ...] | None = None
    tableau: stim.Tableau | None = None

    def __post_init__(self):
        if self.kind == LOCAL:
            if self.local is None or len(self.local) != self.n_qubits:
                raise ValueError("local Clifford needs one index per qubit")
            if any(not 0 <= c < 24 for c in self.local):
                raise ValueError("single-qubit Clifford index must be in 0..23")
        elif self.kind == GLOBAL:
            if self.tableau is None or len(self.tableau) != self.n_qubits:
                raise ValueError("global Clifford needs an n-qubit tableau")
        else:
            raise ValueError(f"unknown Clifford kind {self.kind!r}")

    @classmethod
    def identity(cls, n: int) -> "CliffordDescription":
        return cls(LOCAL, n, local=(0,) * n)

    @classmethod
    def random(cls, n: int, kind: str, rng: np.random.Generator) -> "CliffordDescription":
        if kind == LOCAL:
            return cls(LOCAL, n, local=tuple(rng.integers(24, size=n).tolist()))
        return cls(GLOBAL, n, tableau=random_tableau(n, rng))

    def local_unitaries(self) -> np.ndarray:
        if self.kind != LOCAL:
            raise ShadowError("not a local Clifford")
        return single_qubit_cliffords()[list(self.local)]

    def unitary(self) -> np.ndarray:
        if self.kind == GLOBAL:
            return tableau_unitary(self.tableau)
        u = np.ones((1, 1), dtype=complex)
        for g in self.local_unitaries():
            u = np.kron(u, g)
        return u

    def inverse(self) -> "CliffordDescription":
        if self.kind == GLOBAL:
            return CliffordDescription(GLOBAL, self.n_qubits, tableau=self.tableau.inverse())
        mats = single_qubit_cliffords()
        out = []
        for c in self.local:
            inv = mats[c].conj().T
            for k, m in enumerate(mats):
                if abs(abs(np.trace(m.conj().T @ inv)) - 2) < 1e-9:
                    out.append(k)
                    break
        return CliffordDescription(LOCAL, self.n_qubits, local=tuple(out))

    def to_dict(self) -> dict:
        if self.kind == LOCAL:
            return {"kind": LOCAL, "local": list(self.local)}
        return {"kind": GLOBAL, "tableau": tableau_to_dict(self.tableau)}

    @classmethod
    def from_dict(cls, d: dict, n: int) -> "CliffordDescription":
        if d["kind"] == LOCAL:
            return cls(LOCAL, n, local=tuple(d["local"]))
        return cls(GLOBAL, n, tableau=tableau_from_dict(d["tableau"]))


@dataclass(frozen=True)
class Snapshot:
    sign: int
    part: str
    clifford: CliffordDescription
    outcome: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("snapshot sign must be +1 or -1")
        if self.part not in PARTS:
            raise ValueError(f"part must be one of {PARTS}")

    @property
    def n_qubits(self) -> int:
        return self.clifford.n_qubits

    @property
    def bitstring(self) -> str:
        return format(self.outcome, f"0{self.n_qubits}b")


@dataclass
class _PartRecord:
    signs: np.ndarray
    outcomes: np.ndarray
    local: np.ndarray | None = None
    tableaus: list | None = None

    def __len__(self) -> int:
        return len(self.signs)

    def take(self, idx) -> "_PartRecord":
        return _PartRecord(
            self.signs[idx],
            self.outcomes[idx],
            None if self.local is None else self.local[idx],
            None if self.tableaus is None else [self.tableaus[k] for k in np.arange(len(self))[idx]],
        )

    @classmethod
    def concat(cls, recs: Sequence["_PartRecord"]) -> "_PartRecord":
        loc = None if recs[0].local is None else np.concatenate([r.local for r in recs])
        tabs = None if recs[0].tableaus is None else [t for r in recs for t in r.tableaus]
        return cls(
            np.concatenate([r.signs for r in recs]), np.concatenate([r.outcomes for r in recs]), loc, tabs
        )


@dataclass
class ShadowEstimate:
    """Signed snapshots for one ordered pair of Krylov indices.

    Stored column-wise per part; :meth:`snapshots` yields :class:`Snapshot` views.
    """

    i: int
    j: int
    n_qubits: int
    ensemble: str
    records: dict[str, _PartRecord] = field(default_factory=dict)

    @property
    def n_shots(self) -> int:
        sizes = {len(r) for r in self.records.values()}
        if len(sizes) > 1:
            raise ShadowError("real and imaginary parts hold different shot counts")
        return sizes.pop() if sizes else 0

    def snapshots(self, part: str | None = None) -> Iterator[Snapshot]:
        for p in PARTS if part is None else (part,):
            rec = self.records.get(p)
            if rec is None:
                continue
            for k in range(len(rec)):
                if rec.local is not None:
                    cl = CliffordDescription(LOCAL, self.n_qubits, local=tuple(int(c) for c in rec.local[k]))
                else:
                    cl = CliffordDescription(GLOBAL, self.n_qubits, tableau=rec.tableaus[k])
                yield Snapshot(int(rec.signs[k]), p, cl, int(rec.outcomes[k]))

    @classmethod
    def from_snapshots(cls, i: int, j: int, snaps: Iterable[Snapshot]) -> "ShadowEstimate":
        snaps = list(snaps)
        if not snaps:
            raise ShadowError("no snapshots")
        n = snaps[0].n_qubits
        ens = snaps[0].clifford.kind
        est = cls(i, j, n, ens)
        for p in PARTS:
            group = [s for s in snaps if s.part == p]
            if not group:
                continue
            signs = np.array([s.sign for s in group], dtype=np.int8)
            outcomes = np.array([s.outcome for s in group], dtype=np.int64)
            if ens == LOCAL:
                est.records[p] = _PartRecord(signs, outcomes, np.array([s.clifford.local for s in group], dtype=np.uint8))
            else:
                est.records[p] = _PartRecord(signs, outcomes, tableaus=[s.clifford.tableau for s in group])
        return est

    def subset(self, n: int) -> "ShadowEstimate":
        """The first ``n`` rounds of each part."""
        return ShadowEstimate(self.i, self.j, self.n_qubits, self.ensemble,
                              {p: r.take(slice(0, n)) for p, r in self.records.items()})

    def split(self, n_groups: int) -> list["ShadowEstimate"]:
        size = self.n_shots // n_groups
        return [
            ShadowEstimate(self.i, self.j, self.n_qubits, self.ensemble,
                           {p: r.take(slice(g * size, (g + 1) * size)) for p, r in self.records.items()})
            for g in range(n_groups)
        ]


# --- circuit preparation ---------------------------------------------------


def _readout(part: str) -> np.ndarray:
    if part == REAL:
        return HADAMARD
    if part == IMAG:
        return HADAMARD @ PHASE_S
    raise ValueError(f"part must be one of {PARTS}")


def two_branch_state(branch0, branch1, part: str) -> StateVector:
    """``F`` on the ancilla of ``(|0>|b0> + |1>|b1>)/sqrt(2)``; ancilla is qubit 0."""
    a0 = branch0.amplitudes if isinstance(branch0, StateVector) else np.asarray(branch0, complex)
    a1 = branch1.amplitudes if isinstance(branch1, StateVector) else np.asarray(branch1, complex)
    if a0.shape != a1.shape:
        raise ValueError("branch states differ in size")
    f = _readout(part)
    top = (f[0, 0] * a0 + f[0, 1] * a1) / math.sqrt(2)
    bottom = (f[1, 0] * a0 + f[1, 1] * a1) / math.sqrt(2)
    return StateVector(np.concatenate([top, bottom]), normalize=False)


def hadamard_test_state(phi, tau: float, part: str, evolver: Evolver) -> StateVector:
    """Circuit state before the register Clifford for ``rho_ij`` with ``tau = t_i - t_j``.

    Runs ancilla Hadamard, controlled ``exp(i H tau)`` and the readout gate on the
    simulator.
    """
    a = phi.amplitudes if isinstance(phi, StateVector) else np.asarray(phi, complex)
    v = np.concatenate([a, np.zeros_like(a)])
    half = a.shape[0]
    # Hadamard on the ancilla of |0>|phi>
    v = np.concatenate([v[:half] / math.sqrt(2), v[:half] / math.sqrt(2)])
    v = controlled_evolve(evolver, v, -tau).amplitudes
    f = _readout(part)
    top = f[0, 0] * v[:half] + f[0, 1] * v[half:]
    bottom = f[1, 0] * v[:half] + f[1, 1] * v[half:]
    return StateVector(np.concatenate([top, bottom]), normalize=False)


def sample_rounds(
    circuit: StateVector, part: str, n_rounds: int, ensemble: str, rng: np.random.Generator
) -> _PartRecord:
    """Random register Cliffords plus a full Z measurement, ``n_rounds`` times."""
    n = circuit.n_qubits - 1
    reg_dim = 2 ** n
    amps = circuit.amplitudes
    signs, outcomes, locs, tabs = [], [], [], []
    if ensemble == LOCAL:
        if 3 ** n * 2 * reg_dim <= _SETTING_TABLE_LIMIT and 3 ** n <= n_rounds:
            return _sample_settings(amps, n, n_rounds, rng)
        mats = single_qubit_cliffords()
        done = 0
        while done < n_rounds:
            b = min(_CHUNK, n_rounds - done)
            idx = rng.integers(24, size=(b, n))
            out = apply_local_unitaries(amps, mats[idx], first_qubit=1)
            full = sample_rows(np.abs(out) ** 2, rng)
            signs.append(np.where(full >= reg_dim, -1, 1).astype(np.int8))
            outcomes.append((full % reg_dim).astype(np.int64))
            locs.append(idx.astype(np.uint8))
            done += b
        return _PartRecord(np.concatenate(signs), np.concatenate(outcomes), np.concatenate(locs))
    if ensemble != GLOBAL:
        raise ValueError(f"unknown ensemble {ensemble!r}")
    top, bottom = amps[:reg_dim], amps[reg_dim:]
    for _ in range(n_rounds):
        t = random_tableau(n, rng)
        u = tableau_unitary(t)
        p = np.concatenate([np.abs(u @ top) ** 2, np.abs(u @ bottom) ** 2])
        full = int(sample_rows(p[None, :], rng)[0])
        signs.append(-1 if full >= reg_dim else 1)
        outcomes.append(full % reg_dim)
        tabs.append(t)
    return _PartRecord(np.array(signs, dtype=np.int8), np.array(outcomes, dtype=np.int64), tableaus=tabs)


def _setting_probabilities(amps: np.ndarray, n: int) -> np.ndarray:
    """Outcome probabilities of the (ancilla, register) state for every register
    basis setting in {X, Y, Z}^n; row index is base-3 with qubit 1 most significant."""
    t = amps.reshape(1, 2, 2 ** n)
    r = _BASIS_ROTATIONS
    for q in range(n):
        t = t.reshape(t.shape[0], 2, 2 ** q, 2, 2 ** (n - q - 1))
        lo, hi = t[:, :, :, 0], t[:, :, :, 1]
        t = np.stack([
            np.stack([r[a, 0, 0] * lo + r[a, 0, 1] * hi, r[a, 1, 0] * lo + r[a, 1, 1] * hi], axis=3)
            for a in range(3)
        ], axis=1)
        t = t.reshape(-1, 2, 2 ** n)
    return np.abs(t.reshape(3 ** n, 2 ** (n + 1))) ** 2


def _sample_settings(amps: np.ndarray, n: int, n_rounds: int, rng: np.random.Generator) -> _PartRecord:
    """Local-ensemble rounds drawn from the per-setting outcome table.

    A single-qubit Clifford with ``C^dag Z C = s P`` measures ``P``; its Z
    outcome is the ``P`` outcome flipped when ``s = -1``.
    """
    reg_dim = 2 ** n
    probs = _setting_probabilities(amps, n)
    table = z_readout_table()[:, 1:]
    axis_of = np.abs(table).argmax(axis=1)
    flip_of = (table[np.arange(24), axis_of] < 0).astype(np.int64)
    pow3 = 3 ** np.arange(n - 1, -1, -1)
    pow2 = 1 << np.arange(n - 1, -1, -1)
    signs, outcomes, locs = [], [], []
    done = 0
    while done < n_rounds:
        b = min(_CHUNK, n_rounds - done)
        idx = rng.integers(24, size=(b, n))
        full = sample_rows(probs[(axis_of[idx] * pow3).sum(axis=1)], rng)
        signs.append(np.where(full >= reg_dim, -1, 1).astype(np.int8))
        outcomes.append(((full % reg_dim) ^ (flip_of[idx] * pow2).sum(axis=1)).astype(np.int64))
        locs.append(idx.astype(np.uint8))
        done += b
    return _PartRecord(np.concatenate(signs), np.concatenate(outcomes), np.concatenate(locs))


def shadow_round(
    phi, tau: float, part: str, ensemble: str, rng: np.random.Generator, evolver: Evolver
) -> Snapshot:
    """A single round of the time-evolution circuit."""
    rec = sample_rounds(hadamard_test_state(phi, tau, part, evolver), part, 1, ensemble, rng)
    n = evolver.n_qubits
    if rec.local is not None:
        cl = CliffordDescription(LOCAL, n, local=tuple(int(c) for c in rec.local[0]))
    else:
        cl = CliffordDescription(GLOBAL, n, tableau=rec.tableaus[0])
    return Snapshot(int(rec.signs[0]), part, cl, int(rec.outcomes[0]))


def collect_pair(
    phi, tau: float, n_shots: int, ensemble: str, rng: np.random.Generator, evolver: Evolver,
    i: int = 0, j: int = 0,
) -> ShadowEstimate:
    """Both parts of the time-evolution circuit for ``rho_ij``, ``n_shots`` rounds each."""
    est = ShadowEstimate(i, j, evolver.n_qubits, ensemble)
    for part in PARTS:
        circ = hadamard_test_state(phi, tau, part, evolver)
        est.records[part] = sample_rounds(circ, part, n_shots, ensemble, rng)
    return est


def collect_branches(
    branch0, branch1, n_shots: int, ensemble: str, rng: np.random.Generator, i: int = 0, j: int = 0
) -> ShadowEstimate:
    """Both parts for ``|branch1><branch0|`` using directly prepared branch states."""
    n = int(round(math.log2(len(branch0.amplitudes if isinstance(branch0, StateVector) else branch0))))
    est = ShadowEstimate(i, j, n, ensemble)
    for part in PARTS:
        est.records[part] = sample_rounds(two_branch_state(branch0, branch1, part), part, n_shots, ensemble, rng)
    return est


# --- inversion and estimation ----------------------------------------------


def inverse_channel(snapshot: Snapshot) -> np.ndarray:
    """Dense ``M^{-1}(C^dagger |z><z| C)`` (sign not applied)."""
    n = snapshot.n_qubits
    if n > DENSE_LIMIT:
        raise ShadowError(f"dense snapshots limited to {DENSE_LIMIT} qubits")
    cl = snapshot.clifford
    if cl.kind == LOCAL:
        out = np.ones((1, 1), dtype=complex)
        for k, g in enumerate(cl.local_unitaries()):
            bit = (snapshot.outcome >> (n - 1 - k)) & 1
            u = g.conj().T[:, bit]
            out = np.kron(out, 3 * np.outer(u, u.conj()) - np.eye(2))
        return out
    u = cl.unitary().conj().T[:, snapshot.outcome]
    return (2 ** n + 1) * np.outer(u, u.conj()) - np.eye(2 ** n)


def _letters(obs: PauliOperator) -> tuple[np.ndarray, np.ndarray]:
    """Per-term letter codes (0=I, 1=X, 2=Y, 3=Z) by qubit, and coefficients."""
    n = obs.n_qubits
    codes, coeffs = [], []
    for (x, z), c in obs.mask_terms().items():
        row = []
        for q in range(n):
            bit = n - 1 - q
            bx, bz = (x >> bit) & 1, (z >> bit) & 1
            row.append({(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}[(bx, bz)])
        codes.append(row)
        coeffs.append(c)
    return np.array(codes, dtype=np.int64).reshape(len(codes), n), np.array(coeffs, dtype=complex)


def _parity(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    for k in (32, 16, 8, 4, 2, 1):
        x ^= x >> k
    return x & 1


def snapshot_values(est: ShadowEstimate, obs: PauliOperator | None, part: str) -> np.ndarray:
    """Per-round ``sign * Tr(O M^{-1}(snapshot))``; ``obs=None`` is the identity."""
    rec = est.records.get(part)
    if rec is None or len(rec) == 0:
        raise ShadowError(f"no {part} snapshots")
    signs = rec.signs.astype(float)
    if obs is None:
        return signs.astype(complex)
    if obs.n_qubits != est.n_qubits:
        raise ValueError("observable and snapshots act on different qubit counts")
    n = est.n_qubits
    if rec.local is not None:
        # a round contributes to term P only if every active qubit measured P's axis
        table = z_readout_table()[:, 1:]
        loc = rec.local.astype(np.int64)
        axis = np.abs(table).argmax(axis=1)
        flip = (table[np.arange(24), axis] < 0).astype(np.int64)
        shift2 = 2 * np.arange(n - 1, -1, -1)
        shift1 = np.arange(n - 1, -1, -1)
        setting = ((axis[loc] + 1) << shift2).sum(axis=1)
        eff = rec.outcomes ^ (flip[loc] << shift1).sum(axis=1)
        codes, coeffs = _letters(obs)
        total = np.zeros(len(rec), dtype=complex)
        for row, c in zip(codes, coeffs):
            active = row != 0
            if not active.any():
                total += c
                continue
            want = int((row << shift2).sum())
            mask2 = int((3 * active << shift2).sum())
            mask1 = int((active.astype(np.int64) << shift1).sum())
            hit = (setting & mask2) == want
            total += c * 3.0 ** active.sum() * hit * (1 - 2 * _parity(eff & mask1))
        return signs * total
    trace = obs.trace()
    out = np.empty(len(rec), dtype=complex)
    for k, (t, z) in enumerate(zip(rec.tableaus, rec.outcomes)):
        u = tableau_unitary(t).conj().T[:, z]
        out[k] = (2 ** n + 1) * np.vdot(u, obs.apply(u)) - trace
    return signs * out


def estimate_offdiagonal(est: ShadowEstimate, obs: PauliOperator | None = None) -> complex:
    """Shadow estimate of ``Tr(O |b1><b0|)``; for the evolution circuit this is
    ``<phi|O exp(i H tau)|phi>`` (``O = H`` gives ``H_ij``, ``obs=None`` gives ``S_ij``).

    The ``H S`` readout measures ``-Im``, hence the minus sign on the imaginary part.
    """
    if est.n_shots == 0:
        raise ShadowError("empty shadow estimate")
    re = snapshot_values(est, obs, REAL).mean()
    im = snapshot_values(est, obs, IMAG).mean()
    return complex(re - 1j * im)


def estimate_with_error(est: ShadowEstimate, obs: PauliOperator | None = None) -> tuple[complex, float]:
    """Estimate plus its standard error ``sqrt((Var R + Var I) / N)``."""
    r = snapshot_values(est, obs, REAL)
    i = snapshot_values(est, obs, IMAG)
    n = len(r)
    err = math.sqrt((np.var(r, ddof=1) + np.var(i, ddof=1)) / n) if n > 1 else float("inf")
    return complex(r.mean() - 1j * i.mean()), err


def estimate_operator(est: ShadowEstimate) -> np.ndarray:
    """Dense reconstruction of ``|b1><b0|`` from all snapshots (n <= DENSE_LIMIT)."""
    n = est.n_qubits
    if n > DENSE_LIMIT:
        raise ShadowError(f"dense reconstruction limited to {DENSE_LIMIT} qubits")
    parts = {}
    for part in PARTS:
        rec = est.records[part]
        acc = np.zeros((2 ** n, 2 ** n), dtype=complex)
        if rec.local is not None:
            mats = single_qubit_cliffords()
            # single-qubit inverted snapshots for each (clifford, bit)
            kets = mats.conj().transpose(0, 2, 1)  # C^dagger, columns are C^dagger|b>
            singles = 3 * np.einsum("cib,cjb->cbij", kets, kets.conj()) - np.eye(2)
            bits = (rec.outcomes[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
            for start in range(0, len(rec), _CHUNK):
                sl = slice(start, start + _CHUNK)
                loc = rec.local[sl].astype(np.int64)
                b = bits[sl]
                prod = singles[loc[:, 0], b[:, 0]]
                for k in range(1, n):
                    m = singles[loc[:, k], b[:, k]]
                    prod = np.einsum("sij,skl->sikjl", prod, m).reshape(prod.shape[0], prod.shape[1] * 2, -1)
                acc += np.tensordot(rec.signs[sl].astype(float), prod, axes=(0, 0))
        else:
            for snap in est.snapshots(part):
                acc += snap.sign * inverse_channel(snap)
        parts[part] = acc / len(rec)
    return parts[REAL] - 1j * parts[IMAG]


# --- variance accounting ---------------------------------------------------


def shadow_norm_bound(obs: PauliOperator | None, ensemble: str = LOCAL, n_qubits: int | None = None) -> float:
    """Upper bound on the squared shadow norm of ``obs``.

    Local ensemble: ``(sum_P |c_P| 3^{w(P)/2})^2`` (triangle inequality over
    Pauli terms, each with squared norm ``3^w``). Global ensemble:
    ``(|Tr O|/d + sqrt(3 Tr(O_0^2)))^2`` with ``O_0`` the traceless part.
    """
    if obs is None:
        return 1.0
    if ensemble == LOCAL:
        total = 0.0
        for ps, c in obs.terms.items():
            total += abs(c) * 3.0 ** (ps.weight / 2)
        return total ** 2
    if ensemble == GLOBAL:
        d = 2 ** obs.n_qubits
        ident = abs(obs.mask_terms().get((0, 0), 0.0))
        traceless_sq = d * sum(abs(c) ** 2 for k, c in obs.mask_terms().items() if k != (0, 0))
        return (ident + math.sqrt(3 * traceless_sq)) ** 2
    raise ValueError(f"unknown ensemble {ensemble!r}")


def variance_bound(obs: PauliOperator | None, n_shots: int, ensemble: str = LOCAL) -> float:
    """``2 ||O||_shadow^2 / N`` for the complex N-shot estimator."""
    return 2.0 * shadow_norm_bound(obs, ensemble) / n_shots


# --- archive ---------------------------------------------------------------


def write_snapshot_archive(path: str | Path, estimates: Iterable[ShadowEstimate]) -> None:
    """JSON lines, one record per round."""
    with open(path, "w", encoding="utf-8") as fh:
        for est in estimates:
            for snap in est.snapshots():
                rec = {
                    "i": est.i,
                    "j": est.j,
                    "n_qubits": est.n_qubits,
                    "sign": snap.sign,
                    "part": snap.part,
                    "clifford": snap.clifford.to_dict(),
                    "outcome": snap.bitstring,
                }
                fh.write(json.dumps(rec) + "\n")


def read_snapshot_archive(path: str | Path) -> list[ShadowEstimate]:
    groups: dict[tuple[int, int], list[Snapshot]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            n = d["n_qubits"]
            snap = Snapshot(d["sign"], d["part"], CliffordDescription.from_dict(d["clifford"], n), int(d["outcome"], 2))
            groups.setdefault((d["i"], d["j"]), []).append(snap)
    return [ShadowEstimate.from_snapshots(i, j, s) for (i, j), s in groups.items()]
