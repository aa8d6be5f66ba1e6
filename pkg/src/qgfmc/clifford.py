"""Single-qubit Clifford table and seeded uniform n-qubit Clifford sampling."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import stim

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)
_PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _canonical(u: np.ndarray) -> np.ndarray:
    flat = u.ravel()
    k = int(np.flatnonzero(np.abs(flat) > 1e-9)[0])
    return u * (abs(flat[k]) / flat[k])


def _key(u: np.ndarray) -> tuple:
    return tuple(np.round(_canonical(u).ravel(), 8).tolist())


@lru_cache(maxsize=None)
def single_qubit_cliffords() -> np.ndarray:
    """The 24 single-qubit Cliffords modulo phase, identity first, shape (24, 2, 2)."""
    found = {_key(np.eye(2)): np.eye(2, dtype=complex)}
    frontier = [np.eye(2, dtype=complex)]
    while frontier:
        nxt = []
        for u in frontier:
            for g in (_H, _S):
                w = _canonical(g @ u)
                k = _key(w)
                if k not in found:
                    found[k] = w
                    nxt.append(w)
        frontier = nxt
    mats = np.array(list(found.values()))
    mats.setflags(write=False)
    if mats.shape[0] != 24:
        raise RuntimeError("single-qubit Clifford enumeration failed")
    return mats


@lru_cache(maxsize=None)
def z_readout_table() -> np.ndarray:
    """``table[c, p]`` = s when ``C P C^dagger = s Z`` for Pauli p in (I, X, Y, Z), else 0.

    Column 0 (identity) is 1. Multiplied by (-1)^bit this is <bit|C P C^dagger|bit>.
    """
    mats = single_qubit_cliffords()
    table = np.zeros((24, 4))
    table[:, 0] = 1.0
    z = _PAULIS["Z"]
    for c, u in enumerate(mats):
        for p, name in enumerate("XYZ", start=1):
            img = u @ _PAULIS[name] @ u.conj().T
            s = np.trace(img @ z).real / 2
            if abs(abs(s) - 1) < 1e-9:
                table[c, p] = round(s)
    table.setflags(write=False)
    return table


# --- uniform n-qubit Cliffords (Bravyi-Maslov canonical form) --------------


def _sample_quantum_mallows(n: int, rng: np.random.Generator):
    had = np.zeros(n, dtype=bool)
    perm = np.zeros(n, dtype=int)
    remaining = list(range(n))
    for i in range(n):
        m = n - i
        eps = 4.0 ** (-m)
        r = rng.uniform(0, 1)
        index = -int(math.ceil(math.log2(r + (1 - r) * eps)))
        had[i] = index < m
        k = index if index < m else 2 * m - index - 1
        perm[i] = remaining.pop(k)
    return had, perm


def _fill_lower(mat: np.ndarray, rng: np.random.Generator, symmetric: bool = False) -> None:
    n = mat.shape[0]
    rows, cols = np.tril_indices(n, -1)
    bits = rng.integers(2, size=rows.size, dtype=np.int8)
    mat[rows, cols] = bits
    if symmetric:
        mat[cols, rows] = bits


def _inverse_lower_mod2(mat: np.ndarray) -> np.ndarray:
    n = mat.shape[0]
    inv = np.eye(n, dtype=np.int8)
    # forward substitution over GF(2); unit diagonal
    for i in range(n):
        for k in range(i):
            if mat[i, k]:
                inv[i] ^= inv[k]
    return inv


def random_tableau(n: int, rng: np.random.Generator) -> stim.Tableau:
    """Uniformly random n-qubit Clifford (Bravyi & Maslov 2020) from a seeded generator."""
    had, perm = _sample_quantum_mallows(n, rng)
    gamma1 = np.diag(rng.integers(2, size=n, dtype=np.int8))
    gamma2 = np.diag(rng.integers(2, size=n, dtype=np.int8))
    delta1 = np.eye(n, dtype=np.int8)
    delta2 = np.eye(n, dtype=np.int8)
    _fill_lower(gamma1, rng, symmetric=True)
    _fill_lower(gamma2, rng, symmetric=True)
    _fill_lower(delta1, rng)
    _fill_lower(delta2, rng)
    zero = np.zeros((n, n), dtype=np.int8)
    table1 = np.block([[delta1, zero], [(gamma1 @ delta1) % 2, _inverse_lower_mod2(delta1).T]])
    table2 = np.block([[delta2, zero], [(gamma2 @ delta2) % 2, _inverse_lower_mod2(delta2).T]])
    # the permutation and Hadamard layer sit between the two Hadamard-free layers
    middle = table1[np.concatenate([perm, n + perm])]
    inds = np.flatnonzero(had)
    lhs = np.concatenate([inds, inds + n])
    rhs = np.concatenate([inds + n, inds])
    middle[lhs, :] = middle[rhs, :]
    sym = (table2 @ middle) % 2
    signs = rng.integers(2, size=2 * n).astype(bool)
    sym = sym.astype(bool)
    return stim.Tableau.from_numpy(
        x2x=sym[:n, :n],
        x2z=sym[:n, n:],
        z2x=sym[n:, :n],
        z2z=sym[n:, n:],
        x_signs=signs[:n],
        z_signs=signs[n:],
    )


def tableau_to_dict(t: stim.Tableau) -> dict:
    x2x, x2z, z2x, z2z, xs, zs = t.to_numpy()
    return {
        "x2x": x2x.astype(int).tolist(),
        "x2z": x2z.astype(int).tolist(),
        "z2x": z2x.astype(int).tolist(),
        "z2z": z2z.astype(int).tolist(),
        "x_signs": xs.astype(int).tolist(),
        "z_signs": zs.astype(int).tolist(),
    }


def tableau_from_dict(d: dict) -> stim.Tableau:
    arr = {k: np.array(v, dtype=bool) for k, v in d.items()}
    return stim.Tableau.from_numpy(**arr)


def tableau_unitary(t: stim.Tableau) -> np.ndarray:
    """Big-endian unitary of ``t`` in double precision.

    stim returns single precision; every entry of a Clifford unitary is
    ``2^(-k/2)`` times an eighth root of unity, so the entries are snapped back.
    """
    u = np.asarray(t.to_unitary_matrix(endian="big"), dtype=complex)
    mag = np.abs(u)
    nz = mag > 1e-3
    k = np.rint(-2 * np.log2(mag[nz]))
    phase = np.rint(np.angle(u[nz]) / (np.pi / 4))
    out = np.zeros_like(u)
    out[nz] = 2.0 ** (-k / 2) * np.exp(1j * np.pi / 4 * phase)
    return out
