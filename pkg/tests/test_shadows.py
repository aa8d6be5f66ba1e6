import numpy as np
import pytest

from qgfmc import oracle
from qgfmc.pauli import PauliOperator
from qgfmc.shadows import (
    GLOBAL,
    IMAG,
    LOCAL,
    REAL,
    CliffordDescription,
    Snapshot,
    collect_branches,
    collect_pair,
    estimate_offdiagonal,
    estimate_operator,
    estimate_with_error,
    hadamard_test_state,
    inverse_channel,
    read_snapshot_archive,
    shadow_norm_bound,
    shadow_round,
    snapshot_values,
    variance_bound,
    write_snapshot_archive,
)
from qgfmc.simulator import Evolver
from qgfmc.toys import random_pauli_hamiltonian


def _state(rng, n):
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return v / np.linalg.norm(v)


def test_zero_delay_real_part_has_positive_sign(rng):
    op = random_pauli_hamiltonian(2, rng, 4)
    ev = Evolver(op, "exact")
    phi = _state(rng, 2)
    for _ in range(50):
        snap = shadow_round(phi, 0.0, REAL, LOCAL, rng, ev)
        assert snap.sign == 1
        assert len(snap.bitstring) == 2


def test_round_shape_contract(rng):
    op = random_pauli_hamiltonian(3, rng, 4)
    snap = shadow_round(_state(rng, 3), 0.4, IMAG, GLOBAL, rng, Evolver(op, "exact"))
    assert snap.sign in (-1, 1) and len(snap.bitstring) == 3 and snap.part == IMAG


def test_sign_expectation_matches_branch_probabilities(rng):
    op = random_pauli_hamiltonian(2, rng, 5)
    ev = Evolver(op, "exact")
    phi = _state(rng, 2)
    tau = 0.9
    circ = hadamard_test_state(phi, tau, REAL, ev).amplitudes
    p_plus = np.sum(np.abs(circ[:4]) ** 2)
    predicted = 2 * p_plus - 1
    # also equals Re <phi|exp(i H tau)|phi>
    assert predicted == pytest.approx(np.vdot(phi, oracle.exact_evolution(op, phi, -tau)).real, abs=1e-12)
    est = collect_pair(phi, tau, 10 ** 4, LOCAL, rng, ev)
    signs = snapshot_values(est, None, REAL).real
    assert abs(signs.mean() - predicted) < 5 * signs.std(ddof=1) / np.sqrt(len(signs))


def test_inverse_channel_single_qubit():
    snap = Snapshot(1, REAL, CliffordDescription.identity(1), 0)
    assert np.allclose(inverse_channel(snap), np.diag([2.0, -1.0]))


@pytest.mark.parametrize("kind", [LOCAL, GLOBAL])
def test_inverted_snapshots_have_unit_trace(rng, kind):
    for _ in range(10):
        snap = Snapshot(1, REAL, CliffordDescription.random(3, kind, rng), int(rng.integers(8)))
        assert np.trace(inverse_channel(snap)) == pytest.approx(1.0, abs=1e-12)


def test_averaged_snapshots_reproduce_density_matrix():
    rng = np.random.default_rng(8)
    phi = _state(rng, 2)
    est = collect_branches(phi, phi, 10 ** 5, LOCAL, rng)
    rho = np.outer(phi, phi.conj())
    groups = np.array([estimate_operator(g) for g in est.split(20)])
    mean = groups.mean(axis=0)
    sigma = groups.std(axis=0, ddof=1) / np.sqrt(len(groups))
    assert np.allclose(mean, estimate_operator(est), atol=1e-12)
    assert np.all(np.abs(mean - rho) < 5 * sigma + 1e-12)


def test_local_and_dense_paths_agree(rng):
    op = random_pauli_hamiltonian(2, rng, 5)
    a, b = _state(rng, 2), _state(rng, 2)
    est = collect_branches(a, b, 500, LOCAL, rng)
    dense = estimate_operator(est)
    assert estimate_offdiagonal(est, op) == pytest.approx(np.trace(op.to_matrix() @ dense), abs=1e-10)


def test_identity_estimate_of_diagonal_overlap(rng):
    op = random_pauli_hamiltonian(2, rng, 4)
    phi = _state(rng, 2)
    est = collect_pair(phi, 0.0, 2000, LOCAL, rng, Evolver(op, "exact"))
    s, err = estimate_with_error(est, None)
    assert abs(s - 1.0) < 5 * err + 1e-12


@pytest.mark.parametrize("kind", [LOCAL, GLOBAL])
def test_hamiltonian_element_within_five_sigma(kind):
    rng = np.random.default_rng(11)
    op = random_pauli_hamiltonian(3, rng, 8)
    phi = _state(rng, 3)
    tau = 0.7
    shots = 10 ** 4 if kind == LOCAL else 2000
    est = collect_pair(phi, tau, shots, kind, rng, Evolver(op, "exact"))
    value, err = estimate_with_error(est, op)
    exact = np.vdot(phi, oracle.exact_evolution(op, op.to_matrix() @ phi, -tau))
    assert abs(value - exact) < 5 * err


def test_shadow_norm_closed_forms():
    z0 = PauliOperator(2, {"ZI": 1.0})
    assert shadow_norm_bound(z0, LOCAL) == pytest.approx(3.0)
    assert shadow_norm_bound(None, LOCAL) == 1.0
    assert variance_bound(z0, 100, LOCAL) == pytest.approx(0.06)
    with pytest.raises(ValueError):
        shadow_norm_bound(z0, "bogus")


def test_identity_variance_bound_dominates(rng):
    op = random_pauli_hamiltonian(2, rng, 4)
    ev = Evolver(op, "exact")
    phi = _state(rng, 2)
    vals = [estimate_offdiagonal(collect_pair(phi, 0.5, 100, LOCAL, np.random.default_rng(r), ev)) for r in range(200)]
    var = np.var(vals, ddof=1)
    assert var <= variance_bound(None, 100, LOCAL)


def test_archive_round_trip(tmp_path, rng):
    a, b = _state(rng, 2), _state(rng, 2)
    ests = [collect_branches(a, b, 50, LOCAL, rng, 0, 1), collect_branches(a, b, 5, GLOBAL, rng, 1, 0)]
    path = tmp_path / "shadows.json"
    write_snapshot_archive(path, ests)
    back = read_snapshot_archive(path)
    op = random_pauli_hamiltonian(2, rng, 3)
    for x, y in zip(ests, back):
        assert (x.i, x.j, x.ensemble) == (y.i, y.j, y.ensemble)
        assert estimate_offdiagonal(x, op) == pytest.approx(estimate_offdiagonal(y, op), abs=1e-12)
