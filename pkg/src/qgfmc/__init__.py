"""Quantum-computed trial states for fixed-node Green's function Monte Carlo.

Nuclear shell-model Hamiltonians are mapped to qubits, a Krylov subspace of
time-evolved reference states is measured with classical shadows, and the
resulting trial states guide a fixed-node GFMC walk in the Slater-determinant
basis.
"""

from .estimators import FixedNodeGFMC, QSDTrialState
from .gfmc import EnergyEstimate, FixedNodeParams, TrialStateHandle, mixed_energy, run_fngfmc
from .oracle import exact_spectrum, fixed_node_spectrum
from .pauli import PauliOperator, map_fermion_operator
from .pipeline import ShellSystem, build_system
from .qsd import ExcitationOnHF, HartreeFock, KrylovChain, Mode, SubspaceSpec, excited_chain
from .shell_model import build_hamiltonian, enumerate_basis, parse_interaction_file
from .simulator import Evolver, StateVector

__version__ = "0.1.0"

__all__ = [
    "Evolver",
    "EnergyEstimate",
    "ExcitationOnHF",
    "FixedNodeGFMC",
    "FixedNodeParams",
    "HartreeFock",
    "KrylovChain",
    "Mode",
    "PauliOperator",
    "QSDTrialState",
    "ShellSystem",
    "StateVector",
    "SubspaceSpec",
    "TrialStateHandle",
    "build_hamiltonian",
    "build_system",
    "enumerate_basis",
    "exact_spectrum",
    "excited_chain",
    "fixed_node_spectrum",
    "map_fermion_operator",
    "mixed_energy",
    "parse_interaction_file",
    "run_fngfmc",
]
