"""Estimator-style wrappers around the functional QSD and fnGFMC code.

``fit`` runs the expensive stage and stores results in trailing-underscore
attributes; constructor arguments are plain hyperparameters, so ``get_params``
and ``set_params`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import (
    check_hamiltonian,
    check_is_fitted,
    check_positive_float,
    check_positive_int,
    check_seed,
    check_vector,
)
from .gfmc import EnergyEstimate, FixedNodeParams, TrialStateHandle, mixed_energy, walk_populations
from .qsd import Mode
from .shadows import LOCAL
from .simulator import Evolver


class QSDTrialState(BaseEstimator):
    """Quantum trial states for levels ``0..level`` of a shell-model sector."""

    def __init__(self, n=4, dt=0.3, level=1, shots=None, ensemble=LOCAL, backend="exact",
                 trotter_dt=0.05, seed=0, theta=1.0, modes=None):
        self.n = n
        self.dt = dt
        self.level = level
        self.shots = shots
        self.ensemble = ensemble
        self.backend = backend
        self.trotter_dt = trotter_dt
        self.seed = seed
        self.theta = theta
        self.modes = modes

    def _mode(self) -> Mode:
        if self.shots is None:
            return Mode.exact()
        return Mode.shadow(check_positive_int(self.shots, "shots"), self.ensemble)

    def fit(self, system, y=None):
        from .pipeline import quantum_chain

        check_positive_int(self.n, "n")
        check_positive_float(self.dt, "dt")
        check_seed(self.seed)
        if self.level < 0:
            raise ValueError("level must be nonnegative")
        evolver = Evolver(system.pauli, self.backend, self.trotter_dt)
        self.trials_ = quantum_chain(system, self.level, self.n, self.dt, self._mode(), evolver,
                                     self.seed, self.theta, self.modes)
        self.energies_ = np.array([t.energy for t in self.trials_])
        self.energy_ = float(self.energies_[-1])
        self.system_ = system
        return self

    def transform(self, system=None):
        """Trial amplitudes over the sector basis, one row per level."""
        check_is_fitted(self, ("trials_",))
        system = system or self.system_
        return np.array([system.restrict(t.state()) for t in self.trials_])

    def handle(self, level: int | None = None) -> TrialStateHandle:
        from .pipeline import quantum_handle

        check_is_fitted(self, ("trials_",))
        return quantum_handle(self.system_, self.trials_[self.level if level is None else level])


class FixedNodeGFMC(BaseEstimator):
    """Fixed-node walk; ``score`` re-evaluates further trials on the stored paths."""

    def __init__(self, lam=None, gamma=0.0, n_walkers=1000, n_steps=1000, equilibration=0.1,
                 seed=0, history=20, n_populations=1, population_control=True):
        self.lam = lam
        self.gamma = gamma
        self.n_walkers = n_walkers
        self.n_steps = n_steps
        self.equilibration = equilibration
        self.seed = seed
        self.history = history
        self.n_populations = n_populations
        self.population_control = population_control

    def _params(self) -> FixedNodeParams:
        return FixedNodeParams(
            lam=self.lam, gamma=self.gamma, n_walkers=check_positive_int(self.n_walkers, "n_walkers"),
            n_steps=check_positive_int(self.n_steps, "n_steps"), equilibration=self.equilibration,
            seed=check_seed(self.seed), history=self.history, population_control=self.population_control,
            n_populations=check_positive_int(self.n_populations, "n_populations"),
        )

    def fit(self, H, trial=None, initial=None):
        h = check_hamiltonian(H)
        params = self._params().resolved(h)
        if initial is not None:
            initial = np.abs(check_vector(initial, h.dim, "initial")).real
        self.hamiltonian_ = h
        self.lambda_ = params.lam
        self.trajectories_ = walk_populations(h, params, initial)
        self.estimate_ = self._score(trial)
        self.energy_ = self.estimate_.value
        self.stderr_ = self.estimate_.stderr
        return self

    def _score(self, trial) -> EnergyEstimate:
        h = self.hamiltonian_
        if trial is None:
            trial = TrialStateHandle.uniform(h.dim)
        elif not isinstance(trial, TrialStateHandle):
            trial = TrialStateHandle.classical(check_vector(trial, h.dim, "trial"))
        return mixed_energy(h, trial, self.trajectories_, self.history)

    def score(self, trial=None) -> EnergyEstimate:
        """Mixed estimate for ``trial`` on the fitted trajectories (a paired comparison)."""
        check_is_fitted(self, ("trajectories_",))
        return self._score(trial)
