import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from qgfmc import FixedNodeGFMC, QSDTrialState, build_system
from qgfmc.gfmc import TrialStateHandle
from qgfmc.toys import random_interaction


@pytest.fixture(scope="module")
def system():
    return build_system(random_interaction(seed=1), "n", 2, 0, orbitals=("0d5/2", "1s1/2"))


def test_params_round_trip():
    est = FixedNodeGFMC(n_walkers=10, gamma=0.5)
    assert est.get_params()["gamma"] == 0.5
    est.set_params(n_steps=7)
    assert clone(est).get_params()["n_steps"] == 7
    assert QSDTrialState(n=3).get_params()["n"] == 3


def test_unfitted_errors():
    with pytest.raises(NotFittedError):
        FixedNodeGFMC().score()
    with pytest.raises(NotFittedError):
        QSDTrialState().transform()


@pytest.mark.parametrize("bad", [{"n_walkers": 0}, {"n_steps": 2.5}, {"seed": -1}, {"seed": True}])
def test_gfmc_hyperparameter_validation(bad):
    with pytest.raises(ValueError):
        FixedNodeGFMC(**bad).fit(np.diag([1.0, 2.0]))


def test_hamiltonian_validation():
    est = FixedNodeGFMC(n_walkers=5, n_steps=5)
    with pytest.raises(ValueError):
        est.fit(np.ones((2, 3)))
    with pytest.raises(ValueError):
        est.fit(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        est.fit(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        est.fit(np.diag([1.0, 2.0]), trial=[1.0, 0.0, 0.0])


def test_gfmc_fit_and_paired_score(system):
    est = FixedNodeGFMC(n_walkers=100, n_steps=200, seed=2).fit(system)
    assert np.isfinite(est.lambda_) and np.isfinite(est.energy_)
    w, v = np.linalg.eigh(system.hamiltonian.toarray())
    again = est.score(v[:, 0])
    assert again.value == pytest.approx(w[0], abs=1e-9)
    assert est.score().value == est.energy_
    assert est.score(TrialStateHandle.uniform(system.basis.dim)).value == est.energy_


def test_qsd_fit_transform_and_handle(system):
    qsd = QSDTrialState(n=4, dt=0.3, level=1).fit(system)
    rows = qsd.transform()
    assert rows.shape == (2, system.basis.dim)
    assert np.all(np.diff(qsd.energies_) > 0)
    w = np.linalg.eigvalsh(system.hamiltonian.toarray())
    assert qsd.energies_[0] >= w[0] - 1e-10
    est = FixedNodeGFMC(n_walkers=100, n_steps=200).fit(system, trial=qsd.handle(0))
    assert np.isfinite(est.energy_)


def test_qsd_validation(system):
    with pytest.raises(ValueError):
        QSDTrialState(n=0).fit(system)
    with pytest.raises(ValueError):
        QSDTrialState(dt=-1.0).fit(system)
    with pytest.raises(ValueError):
        QSDTrialState(level=-1).fit(system)
