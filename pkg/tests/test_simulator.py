import numpy as np
import pytest
from scipy import stats
from scipy.linalg import expm

from qgfmc import oracle
from qgfmc.pauli import PauliOperator
from qgfmc.pipeline import build_system
from qgfmc.shadows import LOCAL, CliffordDescription
from qgfmc.simulator import (
    HADAMARD,
    Evolver,
    StateVector,
    TrotterPlan,
    apply_clifford,
    apply_single_qubit,
    controlled_evolve,
    evolve,
    sample_z,
    trotter_step,
)
from qgfmc.toys import random_interaction, random_pauli_hamiltonian

TWO_TERM = PauliOperator(2, {"XI": 1.0, "ZZ": 0.7})


def _random_state(rng, n):
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return v / np.linalg.norm(v)


def test_single_term_step_is_exact(rng):
    op = PauliOperator(2, {"XY": 0.8})
    v = _random_state(rng, 2)
    out = trotter_step(TrotterPlan.from_operator(op, 0.3), v).amplitudes
    assert np.abs(out - expm(-0.3j * op.to_matrix()) @ v).max() < 1e-12


def test_zero_time_is_identity(rng):
    v = _random_state(rng, 2)
    plan = TrotterPlan.from_operator(TWO_TERM, 0.1)
    assert np.allclose(evolve(plan, v, 0.0).amplitudes, v)
    with pytest.raises(ValueError):
        TrotterPlan.from_operator(TWO_TERM, 0.0)


def test_step_error_ratio_per_halving(rng):
    v = _random_state(rng, 2)
    errs = []
    for dt in (0.2, 0.1, 0.05):
        exact = expm(-1j * dt * TWO_TERM.to_matrix()) @ v
        errs.append(np.linalg.norm(trotter_step(TrotterPlan.from_operator(TWO_TERM, dt), v).amplitudes - exact))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert ratios == pytest.approx([4.0, 4.0], rel=0.1)


def test_eigenstate_picks_up_phase_only():
    op = random_pauli_hamiltonian(3, np.random.default_rng(0), 8)
    w, vecs = np.linalg.eigh(op.to_matrix())
    out = Evolver(op, "exact").propagate(vecs[:, 2], 1.7)
    assert abs(abs(np.vdot(vecs[:, 2], out)) - 1) < 1e-9


def test_overlap_error_within_trotter_bound(rng):
    op = random_pauli_hamiltonian(3, rng, 6)
    v = _random_state(rng, 3)
    t = 1.0
    for dt in (0.1, 0.05):
        approx = np.vdot(v, evolve(TrotterPlan.from_operator(op, dt), v, t).amplitudes)
        exact = np.vdot(v, oracle.exact_evolution(op, v, t))
        comm = sum(abs(a) * abs(b) for a in op.terms.values() for b in op.terms.values())
        assert abs(approx - exact) <= comm * dt * t


def test_off_grid_time_warns():
    plan = TrotterPlan.from_operator(TWO_TERM, 0.1)
    with pytest.warns(UserWarning, match="off the Trotter grid"):
        evolve(plan, np.array([1, 0, 0, 0], dtype=complex), 0.25)


def test_backward_trotter_inverts_forward(rng):
    ev = Evolver(random_pauli_hamiltonian(3, rng, 6), "trotter", 0.1)
    v = _random_state(rng, 3)
    for t in (0.3, 0.37):
        assert np.allclose(ev.propagate(ev.propagate(v, t), -t), v, atol=1e-12)


def test_trotter_conserves_particle_sector():
    system = build_system(random_interaction(seed=1), "n", 2, 0, orbitals=("0d5/2", "1s1/2"))
    ev = Evolver(system.pauli, "trotter", 0.1)
    phi = system.embed(system.hf_vector())
    out = ev.propagate(phi, 2.0)
    assert np.linalg.norm(system.restrict(out)) == pytest.approx(1.0, abs=1e-12)


def test_norm_preserved(rng):
    ev = Evolver(random_pauli_hamiltonian(4, rng, 10), "trotter", 0.05)
    v = _random_state(rng, 4)
    assert np.linalg.norm(ev.propagate(v, 1.0)) == pytest.approx(1.0, abs=1e-9)


def test_controlled_evolution(rng):
    op = random_pauli_hamiltonian(2, rng, 5)
    ev = Evolver(op, "exact")
    v = _random_state(rng, 2)
    zero = np.concatenate([v, np.zeros(4)])
    one = np.concatenate([np.zeros(4), v])
    assert np.allclose(controlled_evolve(ev, zero, 0.4).amplitudes, zero)
    assert np.allclose(controlled_evolve(ev, one, 0.4).amplitudes[4:], oracle.exact_evolution(op, v, 0.4))
    plus = (zero + one) / np.sqrt(2)
    block = np.block([[np.eye(4), np.zeros((4, 4))], [np.zeros((4, 4)), expm(-0.4j * op.to_matrix())]])
    assert np.abs(controlled_evolve(ev, plus, 0.4).amplitudes - block @ plus).max() < 1e-9


def test_hadamard_sampling():
    v = apply_single_qubit(StateVector.basis_state(1, 0), HADAMARD, 0)
    shots = sample_z(v, np.random.default_rng(1), 10 ** 5)
    freq = np.mean(shots == 0)
    assert abs(freq - 0.5) < 5 * np.sqrt(0.25 / 10 ** 5)


def test_identity_clifford(rng):
    v = _random_state(rng, 3)
    assert np.allclose(apply_clifford(CliffordDescription.identity(3), v).amplitudes, v)


def test_random_local_clifford_sampling_distribution(rng):
    v = _random_state(rng, 4)
    c = CliffordDescription.random(4, LOCAL, rng)
    out = apply_clifford(c, v).amplitudes
    p = np.abs(out) ** 2
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    counts = np.bincount(sample_z(out, rng, 20000), minlength=16)
    assert stats.chisquare(counts, 20000 * p).pvalue > 1e-3
