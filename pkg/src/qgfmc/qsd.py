"""Real-time Krylov subspace diagonalization with shadow-estimated matrices.

Basis states are ``psi_i = U(t_i) phi`` with ``t_i = i * dt`` for
``i = 0 .. n-1``, where ``U(t)`` is the realized evolution (Trotter or exact).
Matrix elements follow the circuit quantity ``<phi|O U(t_j - t_i)|phi>``; the
Hamiltonian diagonal is ``<phi|H|phi>`` and the overlap diagonal is 1.

Excited states use a filtered basis ``(I - rho_prev) psi_i``. Vectors of all
runs in a chain live in one *union basis* (the Krylov states of every run), so
the filter is a Gram projection needing only overlaps between runs.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .pauli import JORDAN_WIGNER, PauliOperator, bk_basis_permutation, ladder_operator, _scheme
from .shadows import (
    LOCAL,
    ShadowEstimate,
    collect_branches,
    collect_pair,
    estimate_with_error,
)
from .simulator import Evolver, StateVector

log = logging.getLogger(__name__)

EXACT_THRESHOLD = 1e-10
MIN_SHADOW_THRESHOLD = 1e-6
WORKERS_ENV = "QGFMC_WORKERS"


class QSDError(RuntimeError):
    pass


class FilterError(QSDError):
    pass


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


# --- initial states --------------------------------------------------------


@dataclass(frozen=True)
class HartreeFock:
    """Lowest-energy independent-particle filling.

    ``candidates`` restricts the search to allowed configurations (a symmetry
    sector); ties in the summed single-particle energy go to the configuration
    filling lower mode indices.
    """

    particles: int
    energies: tuple[float, ...]
    candidates: tuple[int, ...] | None = None
    scheme: str = JORDAN_WIGNER

    @property
    def n_modes(self) -> int:
        return len(self.energies)

    def to_dict(self) -> dict:
        return {"kind": "hartree_fock", "particles": self.particles, "scheme": self.scheme}


@dataclass(frozen=True)
class ExcitationOnHF:
    """``exp(theta (a_i a_j^dag - a_j a_i^dag)) |HF>``."""

    hf: HartreeFock
    i: int
    j: int
    theta: float = 1.0

    def to_dict(self) -> dict:
        return {"kind": "excitation", "i": self.i, "j": self.j, "theta": self.theta, "hf": self.hf.to_dict()}


@dataclass(frozen=True, eq=False)
class ExplicitState:
    amplitudes: np.ndarray

    def to_dict(self) -> dict:
        return {"kind": "explicit", "n_qubits": int(math.log2(len(self.amplitudes)))}


def hartree_fock_config(prep: HartreeFock) -> int:
    n = prep.n_modes
    if not 0 <= prep.particles <= n:
        raise ValueError(f"{prep.particles} particles do not fit in {n} modes")
    eps = np.asarray(prep.energies, dtype=float)
    if prep.candidates is None:
        order = sorted(range(n), key=lambda k: (eps[k], k))
        return sum(1 << (n - 1 - k) for k in order[: prep.particles])
    best, best_key = None, None
    for x in prep.candidates:
        occ = [k for k in range(n) if (x >> (n - 1 - k)) & 1]
        if len(occ) != prep.particles:
            continue
        key = (round(float(eps[occ].sum()), 12), -x)
        if best_key is None or key < best_key:
            best, best_key = int(x), key
    if best is None:
        raise ValueError("no candidate configuration holds the requested particle number")
    return best


def excitation_generator(n: int, i: int, j: int, scheme: str = JORDAN_WIGNER) -> PauliOperator:
    """``a_i a_j^dag - a_j a_i^dag`` on ``n`` qubits."""
    ai = ladder_operator(i, n, False, scheme)
    aj = ladder_operator(j, n, False, scheme)
    return ai @ aj.adjoint() - aj @ ai.adjoint()


def prepare_initial_state(prep) -> StateVector:
    if isinstance(prep, ExplicitState):
        return StateVector(prep.amplitudes)
    if isinstance(prep, HartreeFock):
        n = prep.n_modes
        x = hartree_fock_config(prep)
        if _scheme(prep.scheme) != JORDAN_WIGNER:
            x = int(bk_basis_permutation(n)[x])
        return StateVector.basis_state(n, x)
    if isinstance(prep, ExcitationOnHF):
        hf = prepare_initial_state(prep.hf).amplitudes
        n = prep.hf.n_modes
        for m in (prep.i, prep.j):
            if not 0 <= m < n:
                raise ValueError(f"excitation mode {m} out of range for {n} modes")
        g = excitation_generator(n, prep.i, prep.j, prep.hf.scheme)
        if len(g) == 0:
            return StateVector(hf)
        # G^3 = -G on the two-mode block, so exp(theta G) closes in G and G^2
        gv = g.apply(hf)
        g2v = g.apply(gv)
        th = prep.theta
        return StateVector(hf + math.sin(th) * gv + (1 - math.cos(th)) * g2v)
    raise TypeError(f"unsupported preparation {type(prep).__name__}")


# --- specs and modes -------------------------------------------------------


@dataclass(frozen=True)
class SubspaceSpec:
    n: int
    dt: float
    prep: object

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("subspace dimension must be at least 1")
        if not self.dt > 0:
            raise ValueError("time step must be positive")

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n)

    def to_dict(self) -> dict:
        return {"n": self.n, "dt": self.dt, "prep": self.prep.to_dict()}


@dataclass(frozen=True)
class Mode:
    """``Mode.exact()`` or ``Mode.shadow(n_shots, ensemble)``."""

    kind: str = "exact"
    n_shots: int = 0
    ensemble: str = LOCAL

    @classmethod
    def exact(cls) -> "Mode":
        return cls("exact")

    @classmethod
    def shadow(cls, n_shots: int, ensemble: str = LOCAL) -> "Mode":
        if n_shots < 2:
            raise ValueError("shadow mode needs at least 2 shots per part")
        return cls("shadow", int(n_shots), ensemble)

    @property
    def is_exact(self) -> bool:
        return self.kind == "exact"

    def label(self) -> str:
        return "exact" if self.is_exact else f"shadow({self.n_shots},{self.ensemble})"


@dataclass
class SubspaceMatrices:
    hs: np.ndarray
    s: np.ndarray
    provenance: str
    noise: float = 0.0
    shadows: dict = field(default_factory=dict)

    def hermitized(self) -> "SubspaceMatrices":
        return SubspaceMatrices(
            0.5 * (self.hs + self.hs.conj().T), 0.5 * (self.s + self.s.conj().T),
            self.provenance, self.noise, self.shadows,
        )


@dataclass(frozen=True)
class EigenSolution:
    energies: np.ndarray
    vectors: np.ndarray
    s_eigenvalues: np.ndarray
    retained: int
    threshold: float

    def report(self) -> dict:
        return {
            "threshold": self.threshold,
            "s_eigenvalues": self.s_eigenvalues.tolist(),
            "retained": self.retained,
        }


def solve_generalized_eig(
    hs, s=None, threshold: float = EXACT_THRESHOLD, herm_tol: float = 1e-6
) -> EigenSolution:
    """Regularized ``Hs c = E S c``: drop S eigenvalues below ``threshold * max``."""
    if isinstance(hs, SubspaceMatrices):
        hs, s = hs.hs, hs.s
    hs = np.atleast_2d(np.asarray(hs, dtype=complex))
    s = np.atleast_2d(np.asarray(s, dtype=complex))
    if hs.shape != s.shape or hs.shape[0] != hs.shape[1]:
        raise ValueError("Hs and S must be square and equally sized")
    for name, m in (("Hs", hs), ("S", s)):
        dev = np.abs(m - m.conj().T).max()
        if dev > herm_tol * max(1.0, np.abs(m).max()):
            raise QSDError(f"{name} is not Hermitian within tolerance (deviation {dev:.3g})")
    hs = 0.5 * (hs + hs.conj().T)
    s = 0.5 * (s + s.conj().T)
    lam, vec = np.linalg.eigh(s)
    keep = lam > threshold * lam.max() if lam.max() > 0 else np.zeros_like(lam, dtype=bool)
    if not keep.any():
        raise QSDError("every overlap eigenvalue falls below the threshold")
    x = vec[:, keep] / np.sqrt(lam[keep])
    h_red = x.conj().T @ hs @ x
    e, y = np.linalg.eigh(0.5 * (h_red + h_red.conj().T))
    c = x @ y
    return EigenSolution(e, c, lam, int(keep.sum()), threshold)


# --- Krylov chain ----------------------------------------------------------


@dataclass
class _Run:
    spec: SubspaceSpec
    phi: np.ndarray
    offset: int


@dataclass
class TrialStateDescription:
    """A solved run: coefficients on its own Krylov states and on the union basis."""

    coefficients: np.ndarray
    energy: float
    spec: SubspaceSpec
    union_vector: np.ndarray
    runs: tuple[SubspaceSpec, ...]
    matrices: SubspaceMatrices
    solution: EigenSolution
    filters: tuple["TrialStateDescription", ...] = ()
    mode: Mode = field(default_factory=Mode.exact)
    chain: "KrylovChain | None" = field(default=None, repr=False)

    @property
    def level(self) -> int:
        return len(self.filters)

    def state(self) -> np.ndarray:
        """Amplitudes of the trial state from the simulated Krylov states."""
        if self.chain is None:
            raise QSDError("trial description is detached from its Krylov chain")
        return self.chain.union_states(len(self.runs)) @ self.union_vector

    def manifest(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "mode": self.mode.label(),
            "level": self.level,
            "energy": self.energy,
            "energies": self.solution.energies.tolist(),
            "coefficients": {"re": self.coefficients.real.tolist(), "im": self.coefficients.imag.tolist()},
            "eigen": self.solution.report(),
            "noise": self.matrices.noise,
        }


class KrylovChain:
    """Krylov runs sharing one Hamiltonian, evolver and estimation mode.

    Holds the union-basis Gram and Hamiltonian blocks as runs are added; the
    block between runs ``a`` and ``b`` is estimated once and reused.
    """

    def __init__(
        self,
        hamiltonian: PauliOperator,
        mode: Mode | None = None,
        evolver: Evolver | None = None,
        seed: int | None = 0,
        threshold: float | None = None,
    ):
        self.hamiltonian = hamiltonian
        self.mode = mode or Mode.exact()
        self.evolver = evolver or Evolver(hamiltonian, "exact" if hamiltonian.n_qubits <= 12 else "trotter")
        if self.evolver.n_qubits != hamiltonian.n_qubits:
            raise ValueError("evolver and Hamiltonian act on different qubit counts")
        self.seed = seed
        self.threshold = threshold
        self.runs: list[_Run] = []
        self.trials: list[TrialStateDescription] = []
        self._g: dict[tuple[int, int], np.ndarray] = {}
        self._h: dict[tuple[int, int], np.ndarray] = {}
        self._err: dict[tuple[int, int], np.ndarray] = {}
        self._states: dict[int, np.ndarray] = {}
        self.shadows: dict[tuple[int, int, int, int], ShadowEstimate] = {}

    # -- basis states
    def krylov_states(self, r: int) -> np.ndarray:
        """Columns ``U(t_i) phi`` of run ``r``."""
        if r not in self._states:
            run = self.runs[r]
            self._states[r] = np.array([self.evolver.propagate(run.phi, t) for t in run.spec.times()]).T
        return self._states[r]

    def union_states(self, n_runs: int) -> np.ndarray:
        return np.hstack([self.krylov_states(r) for r in range(n_runs)])

    # -- matrix elements
    def _rng(self, a: int, b: int, i: int, j: int) -> np.random.Generator:
        key = (a, b, i, j)
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))

    @property
    def toeplitz(self) -> bool:
        """Whether elements may use ``U(t_i)^dag H U(t_j) = H U(t_j - t_i)``.

        Only exact evolution commutes with ``H``; a product formula needs both
        branches evolved separately to keep the pencil a true Gram pair.
        """
        return self.evolver.backend == "exact"

    def _branches(self, a: int, b: int, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        ra, rb = self.runs[a], self.runs[b]
        if self.toeplitz:
            delta = rb.spec.times()[j] - ra.spec.times()[i]
            return ra.phi, self.evolver.propagate(rb.phi, delta)
        return self.krylov_states(a)[:, i], self.krylov_states(b)[:, j]

    def _exact_element(self, a: int, b: int, i: int, j: int) -> tuple[complex, complex]:
        left, right = self._branches(a, b, i, j)
        return complex(np.vdot(left, self.hamiltonian.apply(right))), complex(np.vdot(left, right))

    def _shadow_element(self, a: int, b: int, i: int, j: int):
        ra, rb = self.runs[a], self.runs[b]
        rng = self._rng(a, b, i, j)
        if a == b and self.toeplitz:
            # tau = t_i - t_j for the time-evolution circuit
            delta = rb.spec.times()[j] - ra.spec.times()[i]
            est = collect_pair(ra.phi, -delta, self.mode.n_shots, self.mode.ensemble, rng, self.evolver, i, j)
        else:
            left, right = self._branches(a, b, i, j)
            est = collect_branches(left, right, self.mode.n_shots, self.mode.ensemble, rng, i, j)
        h, h_err = estimate_with_error(est, self.hamiltonian)
        s, s_err = estimate_with_error(est, None)
        return h, s, h_err, s_err, est

    def _block(self, a: int, b: int) -> None:
        if (a, b) in self._g:
            return
        na, nb = self.runs[a].spec.n, self.runs[b].spec.n
        g = np.zeros((na, nb), dtype=complex)
        h = np.zeros((na, nb), dtype=complex)
        err = np.zeros((na, nb))
        if a == b:
            phi = self.runs[a].phi
            e_phi = float(np.vdot(phi, self.hamiltonian.apply(phi)).real)
            for i in range(na):
                if not self.toeplitz and i > 0:
                    psi = self.krylov_states(a)[:, i]
                    e_phi = float(np.vdot(psi, self.hamiltonian.apply(psi)).real)
                g[i, i], h[i, i] = 1.0, e_phi
            pairs = [(i, j) for i in range(na) for j in range(i + 1, na)]
        else:
            pairs = [(i, j) for i in range(na) for j in range(nb)]
        if self.mode.is_exact:
            for i, j in pairs:
                h[i, j], g[i, j] = self._exact_element(a, b, i, j)
        else:
            jobs = worker_count()
            results = Parallel(n_jobs=jobs, prefer="threads")(
                delayed(self._shadow_element)(a, b, i, j) for i, j in pairs
            ) if jobs > 1 else [self._shadow_element(a, b, i, j) for i, j in pairs]
            for (i, j), (hv, sv, _, s_err, est) in zip(pairs, results):
                h[i, j], g[i, j], err[i, j] = hv, sv, s_err
                self.shadows[(a, b, i, j)] = est
        if a == b:
            iu = np.triu_indices(na, 1)
            h[iu[1], iu[0]] = h[iu].conj()
            g[iu[1], iu[0]] = g[iu].conj()
            err[iu[1], iu[0]] = err[iu]
        self._g[(a, b)], self._h[(a, b)], self._err[(a, b)] = g, h, err
        self._g[(b, a)], self._h[(b, a)], self._err[(b, a)] = g.conj().T, h.conj().T, err.T

    def union_matrices(self, n_runs: int) -> tuple[np.ndarray, np.ndarray, float]:
        for a in range(n_runs):
            for b in range(a, n_runs):
                self._block(a, b)
        g = np.block([[self._g[(a, b)] for b in range(n_runs)] for a in range(n_runs)])
        h = np.block([[self._h[(a, b)] for b in range(n_runs)] for a in range(n_runs)])
        noise = max(float(self._err[(a, b)].max(initial=0.0)) for a in range(n_runs) for b in range(n_runs))
        return h, g, noise

    # -- solving
    def _threshold(self, noise: float) -> float:
        if self.threshold is not None:
            return self.threshold
        if self.mode.is_exact:
            return EXACT_THRESHOLD
        return max(MIN_SHADOW_THRESHOLD, 3.0 * noise)

    def add_run(self, spec: SubspaceSpec, level: int | None = None) -> TrialStateDescription:
        """Solve a new run filtered against every earlier trial (or the first ``level``)."""
        phi = prepare_initial_state(spec.prep).amplitudes
        if phi.shape[0] != 2 ** self.hamiltonian.n_qubits:
            raise ValueError("initial state and Hamiltonian act on different qubit counts")
        offset = sum(r.spec.n for r in self.runs)
        self.runs.append(_Run(spec, phi, offset))
        r = len(self.runs) - 1
        filters = tuple(self.trials if level is None else self.trials[:level])
        h_b, g_b, noise = self.union_matrices(r + 1)
        dim = g_b.shape[0]
        u = np.zeros((dim, spec.n), dtype=complex)
        u[offset:offset + spec.n, :] = np.eye(spec.n)
        for f in filters:
            fv = np.zeros(dim, dtype=complex)
            fv[: f.union_vector.shape[0]] = f.union_vector
            u = u - np.outer(fv, fv.conj() @ g_b @ u)
        s_t = u.conj().T @ g_b @ u
        h_t = u.conj().T @ h_b @ u
        mats = SubspaceMatrices(h_t, s_t, self.mode.label(), noise,
                                {k: v for k, v in self.shadows.items() if k[0] == r or k[1] == r})
        thr = self._threshold(noise)
        try:
            sol = solve_generalized_eig(h_t, s_t, thr, herm_tol=np.inf)
        except QSDError as exc:
            if filters:
                raise FilterError(f"the filter annihilates the subspace: {exc}") from exc
            raise
        c = sol.vectors[:, 0]
        trial = TrialStateDescription(
            coefficients=c,
            energy=float(sol.energies[0]),
            spec=spec,
            union_vector=u @ c,
            runs=tuple(run.spec for run in self.runs),
            matrices=mats,
            solution=sol,
            filters=filters,
            mode=self.mode,
            chain=self,
        )
        self.trials.append(trial)
        log.info("run %d (%s): energy %.6f, retained %d/%d", r, self.mode.label(), trial.energy, sol.retained, spec.n)
        return trial

    def dense_filtered_matrices(self, r: int, level: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Cross-check path: materialize ``(I - rho)`` from simulated states (exact quantities)."""
        filters = self.trials[: r if level is None else level]
        vecs = self.krylov_states(r).copy()
        for f in filters:
            phi_f = f.state()
            vecs = vecs - np.outer(phi_f, phi_f.conj() @ vecs)
        hv = np.array([self.hamiltonian.apply(v) for v in vecs.T]).T
        return vecs.conj().T @ hv, vecs.conj().T @ vecs


def build_subspace_matrices(
    spec: SubspaceSpec, hamiltonian: PauliOperator, mode: Mode | None = None,
    evolver: Evolver | None = None, seed: int | None = 0,
) -> SubspaceMatrices:
    chain = KrylovChain(hamiltonian, mode, evolver, seed)
    phi = prepare_initial_state(spec.prep).amplitudes
    if phi.shape[0] != 2 ** hamiltonian.n_qubits:
        raise ValueError("initial state and Hamiltonian act on different qubit counts")
    chain.runs.append(_Run(spec, phi, 0))
    h, g, noise = chain.union_matrices(1)
    return SubspaceMatrices(h, g, chain.mode.label(), noise, dict(chain.shadows))


def ground_trial(
    spec: SubspaceSpec, hamiltonian: PauliOperator, mode: Mode | None = None,
    evolver: Evolver | None = None, seed: int | None = 0, threshold: float | None = None,
) -> TrialStateDescription:
    chain = KrylovChain(hamiltonian, mode, evolver, seed, threshold)
    return chain.add_run(spec)


def excited_trial(
    spec: SubspaceSpec, hamiltonian: PauliOperator, mode: Mode | None,
    ground_filter: TrialStateDescription,
) -> TrialStateDescription:
    """Lowest state of ``spec``'s run filtered against ``ground_filter`` and its own filters."""
    chain = ground_filter.chain
    if chain is None:
        raise QSDError("the ground filter carries no Krylov chain")
    if chain.hamiltonian is not hamiltonian and chain.hamiltonian.mask_terms() != hamiltonian.mask_terms():
        raise ValueError("the ground filter was built for a different Hamiltonian")
    if mode is not None and mode != chain.mode:
        raise ValueError("the excited run must use the ground run's estimation mode")
    level = chain.trials.index(ground_filter) + 1
    if level != len(chain.trials):
        raise QSDError("the ground filter is not the most recent run of its chain")
    return chain.add_run(spec)


def excited_chain(
    specs: Sequence[SubspaceSpec], hamiltonian: PauliOperator, mode: Mode | None = None,
    evolver: Evolver | None = None, seed: int | None = 0, threshold: float | None = None,
) -> list[TrialStateDescription]:
    if not specs:
        raise ValueError("empty chain")
    chain = KrylovChain(hamiltonian, mode, evolver, seed, threshold)
    return [chain.add_run(spec) for spec in specs]


def write_manifest(path: str | Path, trials: Sequence[TrialStateDescription]) -> None:
    Path(path).write_text(json.dumps({"runs": [t.manifest() for t in trials]}, indent=2) + "\n", encoding="utf-8")
