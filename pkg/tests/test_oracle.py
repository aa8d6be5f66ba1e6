import numpy as np
import pytest

from qgfmc import oracle
from qgfmc.pauli import PauliOperator
from qgfmc.shell_model import SparseHamiltonian


def test_diagonal_spectrum():
    res = oracle.exact_spectrum(np.diag([3.0, 1.0, 2.0]), vectors=True)
    assert res.eigenvalues == pytest.approx([1.0, 2.0, 3.0])
    assert res.ground == 1.0
    assert np.allclose(np.abs(res.eigenvectors[:, 0]), [0, 1, 0])


def test_two_level_spectrum_and_residuals(rng):
    res = oracle.exact_spectrum(np.array([[0.0, -1.0], [-1.0, 0.0]]))
    assert res.eigenvalues == pytest.approx([-1.0, 1.0])
    a = rng.normal(size=(6, 6))
    h = a + a.T
    res = oracle.exact_spectrum(h, k=3, vectors=True)
    for e, v in zip(res.eigenvalues, res.eigenvectors.T):
        assert np.linalg.norm(h @ v - e * v) < 1e-10


def test_sparse_and_pauli_inputs_agree(rng):
    a = rng.normal(size=(4, 4))
    h = a + a.T
    sparse = oracle.exact_spectrum(SparseHamiltonian.from_dense(h)).eigenvalues
    assert sparse == pytest.approx(np.linalg.eigvalsh(h))
    z = oracle.exact_spectrum(PauliOperator(1, {"Z": 2.0})).eigenvalues
    assert z == pytest.approx([-2.0, 2.0])


def test_rejects_non_hermitian():
    with pytest.raises(ValueError):
        oracle.exact_spectrum(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_exact_evolution_examples():
    v = np.array([0.6, 0.8j])
    assert np.allclose(oracle.exact_evolution(np.diag([1.0, 2.0]), v, 0.0), v)
    z = PauliOperator(1, {"Z": 1.0})
    out = oracle.exact_evolution(z, np.array([1.0, 0.0]), 0.5)
    assert out == pytest.approx([np.exp(-0.5j), 0.0])


def test_fixed_node_spectrum_of_sign_free_matrix(rng):
    a = -np.abs(rng.normal(size=(6, 6)))
    h = (a + a.T) / 2 + np.diag(rng.normal(size=6))
    for gamma in (0.0, 0.5):
        fn = oracle.fixed_node_spectrum(h, 10.0, gamma).eigenvalues
        assert fn == pytest.approx(oracle.exact_spectrum(h).eigenvalues, abs=1e-12)


def test_fixed_node_operator_example():
    eff = oracle.fixed_node_operator(np.array([[0.0, 1.0], [1.0, 0.0]]), 2.0, 1.0)
    assert np.allclose(eff, [[2.0, -1.0], [-1.0, 2.0]])


def test_krylov_matrices_first_row(rng):
    a = rng.normal(size=(4, 4))
    h = a + a.T
    phi = np.ones(4) / 2
    hs, s = oracle.krylov_matrices(h, phi, 0.2, 3)
    assert s[0, 0] == pytest.approx(1.0) and hs[0, 0] == pytest.approx(phi @ h @ phi)
    assert oracle.generalized_eigenvalues(hs, s)[0] >= np.linalg.eigvalsh(h)[0] - 1e-10


def test_accessible_spectrum():
    h = np.diag([0.0, 1.0, 1.0, 2.0])
    assert oracle.accessible_spectrum(h, [1.0, 1.0, 0.0, 0.0]).tolist() == pytest.approx([0.0, 1.0])
    both = oracle.accessible_spectrum(h, [[0, 1, 0, 0], [0, 0, 1, 1]])
    assert both.tolist() == pytest.approx([1.0, 1.0, 2.0])
