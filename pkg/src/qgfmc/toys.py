"""Seeded random test problems: matrices, Pauli operators, fermionic models, interactions."""

from __future__ import annotations

import itertools

import numpy as np

from .pauli import PauliOperator, map_fermion_operator
from .shell_model import InteractionData, Orbital, TwoBodyElement

# commonly quoted sd-shell single-particle energies (MeV), used as a realistic scale
SD_SPE = {"0d5/2": -3.9478, "1s1/2": -3.1635, "0d3/2": 1.6465}


def random_symmetric(
    dim: int, rng: np.random.Generator, density: float = 0.3, sign_free: bool = False, diag_scale: float = 2.0
) -> np.ndarray:
    """Sparse real symmetric matrix; ``sign_free`` makes every off-diagonal entry <= 0."""
    a = rng.normal(size=(dim, dim)) * (rng.random((dim, dim)) < density)
    a = np.triu(a, 1)
    if sign_free:
        a = -np.abs(a)
    return a + a.T + np.diag(diag_scale * rng.normal(size=dim))


def random_pauli_hamiltonian(n: int, rng: np.random.Generator, n_terms: int = 10) -> PauliOperator:
    terms: dict[str, float] = {}
    for _ in range(n_terms):
        s = "".join(rng.choice(list("IXYZ"), n))
        terms[s] = terms.get(s, 0.0) + float(rng.normal())
    return PauliOperator(n, terms)


def random_fermion_monomials(n_modes: int, rng: np.random.Generator, two_body: float = 0.5):
    """Hermitian number-conserving one- and two-body monomials with real coefficients."""
    out = []
    h1 = rng.normal(size=(n_modes, n_modes))
    h1 = 0.5 * (h1 + h1.T)
    for p in range(n_modes):
        for q in range(n_modes):
            out.append((((p, True), (q, False)), float(h1[p, q])))
    pairs = list(itertools.combinations(range(n_modes), 2))
    for (p, q), (r, s) in itertools.combinations_with_replacement(pairs, 2):
        v = float(two_body * rng.normal())
        out.append((((p, True), (q, True), (s, False), (r, False)), v))
        if (p, q) != (r, s):
            out.append((((r, True), (s, True), (q, False), (p, False)), v))
    return out


def random_fermion_hamiltonian(n_modes: int, rng: np.random.Generator, scheme: str = "jw") -> PauliOperator:
    return map_fermion_operator(n_modes, random_fermion_monomials(n_modes, rng), scheme).real()


def random_interaction(
    labels=("0d5/2", "1s1/2", "0d3/2"), seed: int = 0, pairing: float = -2.0, scale: float = 1.0,
    spe: dict | None = None,
) -> InteractionData:
    """sd-style interaction with seeded random TBMEs.

    Diagonal ``J=0, T=1`` pairs get an attractive shift ``pairing``; every other
    allowed element is Gaussian with width ``scale``. Not a fitted interaction.
    """
    rng = np.random.default_rng(seed)
    orbitals = tuple(Orbital.parse(x) for x in labels)
    spe = spe or SD_SPE
    energies = {o: float(spe.get(o.label, rng.normal())) for o in orbitals}
    n = len(orbitals)
    pair_list = [(a, b) for a in range(n) for b in range(a, n)]
    tbme = []
    for T in (0, 1):
        jmax = max(o.j2 for o in orbitals)
        for J in range(jmax + 1):
            allowed = [
                (a, b) for a, b in pair_list
                if abs(orbitals[a].j2 - orbitals[b].j2) <= 2 * J <= orbitals[a].j2 + orbitals[b].j2
                and not (a == b and (J + T) % 2 == 0)
            ]
            for i, (a, b) in enumerate(allowed):
                for c, d in allowed[i:]:
                    v = scale * rng.normal()
                    if (a, b) == (c, d) and J == 0 and T == 1:
                        v += pairing
                    tbme.append(TwoBodyElement(a, b, c, d, J, T, round(float(v), 4)))
    return InteractionData(orbitals, energies, tuple(tbme))
