import numpy as np
import pytest
from scipy.linalg import eigh, expm

from qgfmc import oracle
from qgfmc.clifford import random_tableau, tableau_unitary
from qgfmc.pauli import PauliOperator
from qgfmc.pipeline import build_system
from qgfmc.qsd import (
    ExcitationOnHF,
    ExplicitState,
    FilterError,
    HartreeFock,
    KrylovChain,
    Mode,
    QSDError,
    SubspaceSpec,
    build_subspace_matrices,
    excitation_generator,
    excited_chain,
    excited_trial,
    ground_trial,
    prepare_initial_state,
    solve_generalized_eig,
)
from qgfmc.simulator import Evolver
from qgfmc.toys import random_interaction, random_pauli_hamiltonian


def _explicit(v):
    v = np.asarray(v, dtype=complex)
    return ExplicitState(v / np.linalg.norm(v))


def test_clifford_unitaries_are_exact():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3):
        u = tableau_unitary(random_tableau(n, rng))
        assert np.abs(u @ u.conj().T - np.eye(2 ** n)).max() < 1e-14


def test_one_dimensional_subspace(rng):
    op = random_pauli_hamiltonian(2, rng, 5)
    prep = _explicit(rng.normal(size=4))
    mats = build_subspace_matrices(SubspaceSpec(1, 0.5, prep), op)
    phi = prep.amplitudes
    assert mats.s == pytest.approx(np.ones((1, 1)))
    assert mats.hs[0, 0] == pytest.approx(np.vdot(phi, op.apply(phi)))


def test_eigenstate_gives_proportional_matrices():
    op = random_pauli_hamiltonian(2, np.random.default_rng(1), 5)
    w, v = np.linalg.eigh(op.to_matrix())
    mats = build_subspace_matrices(SubspaceSpec(3, 0.4, ExplicitState(v[:, 1].astype(complex))), op)
    assert np.abs(mats.hs - w[1] * mats.s).max() < 1e-9


@pytest.mark.parametrize("backend", ["exact", "trotter"])
def test_matrices_match_dense_oracle(backend):
    rng = np.random.default_rng(2)
    op = random_pauli_hamiltonian(3, rng, 8)
    prep = _explicit(rng.normal(size=8) + 1j * rng.normal(size=8))
    dt = 0.3
    ev = Evolver(op, backend, 0.01)
    mats = build_subspace_matrices(SubspaceSpec(4, dt, prep), op, evolver=ev)
    hs, s = oracle.krylov_matrices(op, prep.amplitudes, dt, 4)
    tol = 1e-9 if backend == "exact" else 5e-2
    assert np.abs(mats.hs - hs).max() < tol and np.abs(mats.s - s).max() < tol
    # the Trotter pencil stays a Gram pair of actual states
    assert np.linalg.eigvalsh(mats.s).min() > -1e-12


def test_solver_examples(rng):
    sol = solve_generalized_eig(np.diag([2.0, 5.0]), np.eye(2))
    assert sol.energies == pytest.approx([2.0, 5.0])
    assert np.allclose(np.abs(sol.vectors), np.eye(2))
    sol1 = solve_generalized_eig(np.array([[6.0]]), np.array([[2.0]]))
    assert sol1.energies == pytest.approx([3.0])
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    hs = a + a.conj().T
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    s = b @ b.conj().T + 4 * np.eye(4)
    sol = solve_generalized_eig(hs, s)
    assert np.abs(sol.energies - eigh(hs, s, eigvals_only=True)).max() < 1e-10
    c = sol.vectors
    assert np.allclose(c.conj().T @ s @ c, np.eye(4), atol=1e-10)


def test_solver_threshold_and_errors():
    s = np.diag([1.0, 1e-14])
    sol = solve_generalized_eig(np.diag([1.0, -100.0]), s)
    assert sol.retained == 1 and sol.energies == pytest.approx([1.0])
    with pytest.raises(QSDError):
        solve_generalized_eig(np.eye(2), np.zeros((2, 2)))
    with pytest.raises(QSDError):
        solve_generalized_eig(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2))


def test_minus_z_with_plus_state():
    op = PauliOperator(1, {"Z": -1.0})
    trial = ground_trial(SubspaceSpec(2, 0.5, _explicit([1, 1])), op)
    assert trial.energy == pytest.approx(-1.0, abs=1e-10)


def test_ground_state_input_needs_one_vector():
    op = random_pauli_hamiltonian(2, np.random.default_rng(3), 5)
    w, v = np.linalg.eigh(op.to_matrix())
    trial = ground_trial(SubspaceSpec(1, 0.5, ExplicitState(v[:, 0].astype(complex))), op)
    assert trial.energy == pytest.approx(w[0], abs=1e-12)


def test_orthogonal_excited_start_is_unfiltered():
    op = random_pauli_hamiltonian(2, np.random.default_rng(4), 5)
    w, v = np.linalg.eigh(op.to_matrix())
    g = ground_trial(SubspaceSpec(1, 0.5, ExplicitState(v[:, 0].astype(complex))), op)
    prep = _explicit(v[:, 1] + v[:, 2])
    filtered = excited_trial(SubspaceSpec(2, 0.7, prep), op, Mode.exact(), g)
    plain = ground_trial(SubspaceSpec(2, 0.7, prep), op)
    assert filtered.energy == pytest.approx(plain.energy, abs=1e-9)


def test_two_level_excited():
    op = PauliOperator(1, {"I": 0.5, "Z": -0.5})  # diag(0, 1)
    g = ground_trial(SubspaceSpec(1, 0.5, _explicit([1, 0])), op)
    e = excited_trial(SubspaceSpec(1, 0.5, _explicit([0, 1])), op, None, g)
    assert (g.energy, e.energy) == pytest.approx((0.0, 1.0), abs=1e-12)


def test_excited_filter_bound_and_convergence():
    rng = np.random.default_rng(5)
    op = random_pauli_hamiltonian(3, rng, 10)
    w = np.linalg.eigvalsh(op.to_matrix())
    pg, pe = _explicit(rng.normal(size=8)), _explicit(rng.normal(size=8))
    energies = []
    for n in (2, 4, 8):
        chain = KrylovChain(op)
        chain.add_run(SubspaceSpec(8, 1.1, pg))
        energies.append(chain.add_run(SubspaceSpec(n, 1.1, pe)).energy)
    assert min(energies) >= w[1] - 1e-8
    assert energies[-1] == pytest.approx(w[1], abs=1e-8)
    assert np.all(np.diff(energies) <= 1e-8)


def test_chain_composition():
    op = random_pauli_hamiltonian(2, np.random.default_rng(6), 5)
    pg, pe = _explicit([1, 1, 0, 1]), _explicit([0, 1, 1, 0])
    single = excited_chain([SubspaceSpec(3, 0.6, pg)], op)
    assert single[0].energy == pytest.approx(ground_trial(SubspaceSpec(3, 0.6, pg), op).energy, abs=1e-12)
    pair = excited_chain([SubspaceSpec(3, 0.6, pg), SubspaceSpec(3, 0.6, pe)], op)
    g = ground_trial(SubspaceSpec(3, 0.6, pg), op)
    e = excited_trial(SubspaceSpec(3, 0.6, pe), op, None, g)
    assert [t.energy for t in pair] == pytest.approx([g.energy, e.energy], abs=1e-10)


def test_three_level_chain():
    op = PauliOperator(2, {"II": 1.0, "ZI": -0.5, "IZ": -1.5})  # diag(-1, 2, 0, 3)
    specs = [SubspaceSpec(4, 0.7, _explicit([1, 1, 1, 1]))] * 3
    energies = [t.energy for t in excited_chain(specs, op)]
    assert energies == pytest.approx([-1.0, 0.0, 2.0], abs=1e-8)


def test_chain_exhausts_subspace():
    op = PauliOperator(1, {"Z": 1.0})
    specs = [SubspaceSpec(2, 0.7, _explicit([1, 1]))] * 3
    with pytest.raises(FilterError):
        excited_chain(specs, op)


def test_hartree_fock_and_excitation():
    hf = HartreeFock(1, (-1.0, 0.5))
    assert np.allclose(np.abs(prepare_initial_state(hf).amplitudes), [0, 0, 1, 0])  # |10>
    same = ExcitationOnHF(hf, 0, 0)
    assert np.allclose(prepare_initial_state(same).amplitudes, prepare_initial_state(hf).amplitudes)
    ex = ExcitationOnHF(hf, 0, 1, 0.4)
    gen = excitation_generator(2, 0, 1).to_matrix()
    ref = expm(0.4 * gen) @ prepare_initial_state(hf).amplitudes
    assert np.abs(prepare_initial_state(ex).amplitudes - ref).max() < 1e-12
    assert np.allclose(gen, -gen.conj().T)


def test_sector_ground_and_variational_bound():
    system = build_system(random_interaction(seed=2), "n", 2, 0, orbitals=("0d5/2", "1s1/2"))
    e0 = np.linalg.eigvalsh(system.hamiltonian.toarray())[0]
    hf = system.hartree_fock()
    energies = [ground_trial(SubspaceSpec(n, 0.3, hf), system.pauli).energy for n in range(1, 7)]
    assert min(energies) >= e0 - 1e-10
    assert np.all(np.diff(energies) <= 1e-10)


@pytest.mark.slow
def test_shadow_mode_close_to_exact_mode(monkeypatch):
    monkeypatch.setenv("QGFMC_WORKERS", "4")
    system = build_system(random_interaction(seed=2), "n", 2, 0, orbitals=("0d5/2", "1s1/2"))
    spec = SubspaceSpec(4, 0.3, system.hartree_fock())
    exact = ground_trial(spec, system.pauli).energy
    energies = [ground_trial(spec, system.pauli, Mode.shadow(10 ** 5), seed=s).energy for s in range(4)]
    spread = np.std(energies, ddof=1)
    assert abs(np.mean(energies) - exact) < 5 * max(spread, 1e-3)


def test_shadow_chain_is_deterministic():
    op = random_pauli_hamiltonian(2, np.random.default_rng(7), 4)
    spec = SubspaceSpec(2, 0.5, _explicit([1, 0, 1, 0]))
    a = ground_trial(spec, op, Mode.shadow(200), seed=3).energy
    b = ground_trial(spec, op, Mode.shadow(200), seed=3).energy
    assert a == b
