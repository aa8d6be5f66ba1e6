"""Brute-force ground truth.

Everything here takes a deliberately different path from the production code:
dense Hermitian eigensolves instead of sparse walks, scaling-and-squaring
exponentials instead of product formulas, and an element-by-element
construction of the fixed-node operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_CUTOFF = 2 ** 14


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    def __post_init__(self):
        if np.any(np.diff(self.eigenvalues) < 0):
            raise ValueError("eigenvalues must be ascending")

    @property
    def ground(self) -> float:
        return float(self.eigenvalues[0])


def _as_matrix(h):
    """Dense or scipy-sparse matrix for any supported operator type."""
    if hasattr(h, "to_matrix"):  # PauliOperator
        return h.to_matrix()
    if hasattr(h, "matrix") and sp.issparse(h.matrix):  # SparseHamiltonian
        return h.matrix
    if sp.issparse(h):
        return h
    return np.asarray(h)


def exact_spectrum(h, k: int | None = None, vectors: bool = False, atol: float = 1e-10) -> SpectrumResult:
    """The ``k`` lowest eigenpairs (all when ``k`` is None)."""
    m = _as_matrix(h)
    dim = m.shape[0]
    if m.shape != (dim, dim):
        raise ValueError("operator is not square")
    diff = m - m.conj().T
    dev = abs(diff).max() if dim else 0.0
    if dev > atol:
        raise ValueError(f"operator is not Hermitian (max deviation {dev:.3g})")
    if dim <= DENSE_CUTOFF or (k is not None and k >= dim - 1):
        dense = m.toarray() if sp.issparse(m) else m
        w, v = np.linalg.eigh(dense)
    else:
        kk = 6 if k is None else k
        w, v = spla.eigsh(sp.csr_matrix(m), k=kk, which="SA", tol=1e-12)
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    if k is not None:
        w, v = w[:k], v[:, :k]
    return SpectrumResult(np.asarray(w, dtype=float), v if vectors else None)


def exact_evolution(h, v, t: float) -> np.ndarray:
    """``expm(-i H t) v`` by Pade scaling and squaring."""
    m = _as_matrix(h)
    dense = m.toarray() if sp.issparse(m) else np.asarray(m)
    a = v.amplitudes if hasattr(v, "amplitudes") else np.asarray(v, dtype=complex)
    return sla.expm(-1j * t * dense) @ a


def fixed_node_operator(h, lam: float, gamma: float = 0.0) -> np.ndarray:
    """Dense ``Lambda I - G^fn`` built entry by entry."""
    m = _as_matrix(h)
    a = np.asarray(m.toarray() if sp.issparse(m) else m, dtype=float)
    dim = a.shape[0]
    g = np.zeros_like(a)
    for col in range(dim):
        vsf = 0.0
        for row in range(dim):
            if row == col:
                continue
            if a[row, col] > 0:
                vsf += a[row, col]
                g[row, col] = gamma * a[row, col]
            else:
                g[row, col] = -a[row, col]
        g[col, col] = lam - a[col, col] - (1 + gamma) * vsf
    return lam * np.eye(dim) - g


def fixed_node_spectrum(h, lam: float, gamma: float = 0.0, k: int | None = None) -> SpectrumResult:
    """Spectrum of the effective fixed-node Hamiltonian ``Lambda I - G^fn``."""
    eff = fixed_node_operator(h, lam, gamma)
    eff = 0.5 * (eff + eff.T)
    return exact_spectrum(eff, k)


def krylov_matrices(h, phi, dt: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``<psi_i|H|psi_j>`` and ``<psi_i|psi_j>`` with ``psi_i = expm(-i H i dt) phi``."""
    m = _as_matrix(h)
    dense = m.toarray() if sp.issparse(m) else np.asarray(m)
    a = phi.amplitudes if hasattr(phi, "amplitudes") else np.asarray(phi, dtype=complex)
    basis = np.array([sla.expm(-1j * i * dt * dense) @ a for i in range(n)]).T
    return basis.conj().T @ dense @ basis, basis.conj().T @ basis


def generalized_eigenvalues(hs: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of the pencil ``(Hs, S)`` for positive-definite ``S``."""
    return sla.eigh(hs, s, eigvals_only=True)


def two_particle_coupled_spectrum(data, m2: int, tz2: int, species: str = "np", neutron_tz2: int = 1) -> np.ndarray:
    """Two-particle energies from coupled ``|ab; J T>`` blocks, no Clebsch-Gordan algebra.

    Every (J, T) block with ``2J >= |m2|`` and ``2T >= |tz2|`` contributes its
    eigenvalues once to the ``(m2, tz2)`` sector. TBMEs are taken as normalized.
    Single-species spaces only admit ``T = 1`` with the matching ``tz2``.
    """
    orbs = data.orbitals
    allowed_t = [0, 1] if species == "np" else [1]
    if species in ("n", "p"):
        want = 2 * (neutron_tz2 if species == "n" else -neutron_tz2)
        if tz2 != want:
            return np.array([])
    v = {}
    for el in data.tbme:
        v[(el.a, el.b, el.c, el.d, el.J, el.T)] = el.V
        v[(el.c, el.d, el.a, el.b, el.J, el.T)] = el.V
    energies = []
    for T in allowed_t:
        if 2 * T < abs(tz2):
            continue
        jmax = max(o.j2 for o in orbs)
        for J in range(0, jmax + 1):
            if 2 * J < abs(m2):
                continue
            pairs = []
            for a in range(len(orbs)):
                for b in range(a, len(orbs)):
                    ja, jb = orbs[a].j2, orbs[b].j2
                    if not abs(ja - jb) <= 2 * J <= ja + jb:
                        continue
                    if a == b and (J + T) % 2 == 0:
                        continue
                    pairs.append((a, b))
            if not pairs:
                continue
            block = np.zeros((len(pairs), len(pairs)))
            for p, (a, b) in enumerate(pairs):
                block[p, p] += data.spe[orbs[a]] + data.spe[orbs[b]]
                for q, (c, d) in enumerate(pairs):
                    block[p, q] += v.get((a, b, c, d, J, T), 0.0)
            energies.extend(np.linalg.eigvalsh(block).tolist())
    return np.sort(np.array(energies))


def accessible_spectrum(h, vectors, cluster_tol: float = 1e-8, overlap_tol: float = 1e-10) -> np.ndarray:
    """Eigenvalues whose eigenspaces the given start vectors reach.

    Each degenerate cluster contributes the rank of the start vectors projected
    onto it, so the result is the spectrum of ``H`` on the smallest invariant
    subspace containing every start vector.
    """
    m = _as_matrix(h)
    dense = m.toarray() if sp.issparse(m) else np.asarray(m)
    w, v = np.linalg.eigh(dense)
    starts = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if starts.shape[1] != dense.shape[0]:
        starts = starts.T
    coeffs = v.conj().T @ starts.T  # eigenbasis x starts
    out = []
    lo = 0
    while lo < len(w):
        hi = lo + 1
        while hi < len(w) and w[hi] - w[hi - 1] < cluster_tol:
            hi += 1
        block = coeffs[lo:hi]
        sv = np.linalg.svd(block, compute_uv=False)
        rank = int(np.sum(sv > overlap_tol))
        out.extend([float(w[lo:hi].mean())] * rank)
        lo = hi
    return np.array(out)
