"""Input checks shared by the estimator layer and the command line."""

from __future__ import annotations

import numbers

import numpy as np
import scipy.sparse as sp

from .shell_model import SparseHamiltonian


def check_hamiltonian(h, atol: float = 1e-10) -> SparseHamiltonian:
    """Coerce ``h`` to a real symmetric ``SparseHamiltonian`` or raise ``ValueError``."""
    if isinstance(h, SparseHamiltonian):
        out = h
    elif hasattr(h, "hamiltonian") and isinstance(h.hamiltonian, SparseHamiltonian):
        out = h.hamiltonian
    else:
        m = h if sp.issparse(h) else np.asarray(h)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        if np.iscomplexobj(m):
            imag = abs(m.imag).max() if m.size else 0.0
            if imag > atol:
                raise ValueError("Hamiltonian must be real")
            m = m.real
        out = SparseHamiltonian(sp.csr_matrix(m, dtype=float))
    data = out.matrix.data
    if not np.all(np.isfinite(data)):
        raise ValueError("Hamiltonian has non-finite entries")
    if out.dim == 0:
        raise ValueError("Hamiltonian is empty")
    if not out.is_hermitian(atol):
        raise ValueError("Hamiltonian is not symmetric")
    return out


def check_vector(v, dim: int, name: str = "vector") -> np.ndarray:
    a = np.asarray(v, dtype=complex).ravel()
    if a.shape[0] != dim:
        raise ValueError(f"{name} has length {a.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(a)) or not np.any(a):
        raise ValueError(f"{name} must be finite and nonzero")
    return a


def check_seed(seed) -> int:
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, numbers.Integral) or seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed!r}")
    return int(seed)


def check_positive_int(value, name: str) -> int:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_positive_float(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive number, got {value!r}")
    return float(value)


def check_is_fitted(est, attributes: tuple[str, ...]) -> None:
    from sklearn.exceptions import NotFittedError

    if not all(hasattr(est, a) for a in attributes):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")
