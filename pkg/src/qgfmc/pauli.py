"""Pauli strings, weighted Pauli sums and fermion-to-qubit encodings.

A Pauli string on ``n`` qubits is stored as two bit masks ``(x, z)`` and
denotes ``i^{|x & z|} X^x Z^z``, so ``x & z`` marks the ``Y`` letters. Qubit ``q``
is bit ``n - 1 - q`` of a mask and of a computational basis index (qubit 0 is the
most significant / leftmost position).
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

PRUNE = 1e-12

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True, order=True)
class PauliString:
    letters: str

    def __post_init__(self):
        if not self.letters or set(self.letters) - set("IXYZ"):
            raise ValueError(f"invalid Pauli string {self.letters!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def masks(self) -> tuple[int, int]:
        x = z = 0
        for ch in self.letters:
            bx, bz = _LETTER_BITS[ch]
            x = (x << 1) | bx
            z = (z << 1) | bz
        return x, z

    @property
    def weight(self) -> int:
        return sum(ch != "I" for ch in self.letters)

    @classmethod
    def from_masks(cls, x: int, z: int, n: int) -> "PauliString":
        out = []
        for q in range(n):
            bit = n - 1 - q
            out.append("IZXY"[((x >> bit) & 1) * 2 + ((z >> bit) & 1)])
        return cls("".join(out))

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        s = ["I"] * n
        s[qubit] = letter
        return cls("".join(s))

    def __str__(self) -> str:
        return self.letters


class PauliOperator:
    """Sum of Pauli strings with complex coefficients.

    Instances are treated as immutable; every arithmetic operation returns a new
    operator with coefficients below ``PRUNE`` removed.
    """

    __slots__ = ("n_qubits", "_terms", "_diag_cache")

    def __init__(self, n_qubits: int, terms: Mapping | None = None):
        self.n_qubits = int(n_qubits)
        clean: dict[tuple[int, int], complex] = {}
        for key, c in (terms or {}).items():
            if isinstance(key, str):
                key = PauliString(key)
            if isinstance(key, PauliString):
                if key.n_qubits != self.n_qubits:
                    raise ValueError("Pauli string length does not match n_qubits")
                key = key.masks
            c = complex(c)
            if abs(c) >= PRUNE:
                clean[key] = clean.get(key, 0.0) + c
        self._terms = {k: v for k, v in clean.items() if abs(v) >= PRUNE}
        self._diag_cache = None

    # -- constructors ------------------------------------------------------
    @classmethod
    def identity(cls, n: int, coeff: complex = 1.0) -> "PauliOperator":
        return cls(n, {(0, 0): coeff})

    @classmethod
    def from_list(cls, items: Iterable[tuple[complex, str]]) -> "PauliOperator":
        items = list(items)
        n = len(items[0][1])
        acc: dict[str, complex] = defaultdict(complex)
        for c, s in items:
            acc[s] += c
        return cls(n, acc)

    # -- views -------------------------------------------------------------
    @property
    def terms(self) -> dict[PauliString, complex]:
        return {PauliString.from_masks(x, z, self.n_qubits): c for (x, z), c in self._terms.items()}

    def mask_terms(self) -> dict[tuple[int, int], complex]:
        return dict(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __repr__(self) -> str:
        return f"PauliOperator(n_qubits={self.n_qubits}, n_terms={len(self)})"

    def coefficient(self, letters: str) -> complex:
        return self._terms.get(PauliString(letters).masks, 0.0)

    def is_hermitian(self, atol: float = PRUNE) -> bool:
        return all(abs(c.imag) <= atol for c in self._terms.values())

    # -- algebra -----------------------------------------------------------
    def __add__(self, other: "PauliOperator") -> "PauliOperator":
        if not isinstance(other, PauliOperator):
            return NotImplemented
        self._check(other)
        acc = dict(self._terms)
        for k, c in other._terms.items():
            acc[k] = acc.get(k, 0.0) + c
        return PauliOperator(self.n_qubits, acc)

    def __sub__(self, other: "PauliOperator") -> "PauliOperator":
        return self + (-1.0) * other

    def __neg__(self) -> "PauliOperator":
        return (-1.0) * self

    def __mul__(self, scalar) -> "PauliOperator":
        if isinstance(scalar, PauliOperator):
            return self @ scalar
        return PauliOperator(self.n_qubits, {k: scalar * c for k, c in self._terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, other: "PauliOperator") -> "PauliOperator":
        if not isinstance(other, PauliOperator):
            return NotImplemented
        self._check(other)
        acc: dict[tuple[int, int], complex] = defaultdict(complex)
        for (x1, z1), c1 in self._terms.items():
            a1 = _popcount(x1 & z1)
            for (x2, z2), c2 in other._terms.items():
                x, z = x1 ^ x2, z1 ^ z2
                power = a1 + _popcount(x2 & z2) + 2 * _popcount(z1 & x2) - _popcount(x & z)
                acc[(x, z)] += c1 * c2 * (1j ** (power % 4))
        return PauliOperator(self.n_qubits, acc)

    def adjoint(self) -> "PauliOperator":
        return PauliOperator(self.n_qubits, {k: c.conjugate() for k, c in self._terms.items()})

    def real(self) -> "PauliOperator":
        return PauliOperator(self.n_qubits, {k: c.real for k, c in self._terms.items()})

    def _check(self, other: "PauliOperator") -> None:
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit counts differ")

    # -- numerics ----------------------------------------------------------
    def _diagonals(self) -> list[tuple[int, np.ndarray]]:
        """Per distinct X-mask, the diagonal phase vector d(b) with P|b> = d(b)|b ^ x>."""
        if self._diag_cache is None:
            idx = np.arange(2 ** self.n_qubits, dtype=np.int64)
            grouped: dict[int, np.ndarray] = {}
            for (x, z), c in self._terms.items():
                parity = _parity_array(idx & z)
                phase = c * (1j ** (_popcount(x & z) % 4))
                vec = phase * (1 - 2 * parity)
                grouped[x] = grouped[x] + vec if x in grouped else vec.astype(complex)
            self._diag_cache = list(grouped.items())
        return self._diag_cache

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[0] != 2 ** self.n_qubits:
            raise ValueError(f"vector of length {v.shape[0]} on {self.n_qubits} qubits")
        out = np.zeros(v.shape, dtype=complex)
        idx = np.arange(v.shape[0])
        for x, d in self._diagonals():
            if v.ndim == 1:
                out[idx ^ x] += d * v
            else:
                out[idx ^ x] += d[:, None] * v
        return out

    def to_matrix(self) -> np.ndarray:
        dim = 2 ** self.n_qubits
        if self.n_qubits > 14:
            raise ValueError("refusing to materialize a dense matrix above 14 qubits")
        m = np.zeros((dim, dim), dtype=complex)
        idx = np.arange(dim)
        for x, d in self._diagonals():
            m[idx ^ x, idx] += d
        return m

    def expectation(self, v: np.ndarray) -> complex:
        v = np.asarray(v)
        return complex(np.vdot(v, self.apply(v)))

    def trace(self) -> complex:
        return self._terms.get((0, 0), 0.0) * 2 ** self.n_qubits

    def norm_terms(self) -> float:
        """Sum of absolute coefficients (an upper bound on the spectral norm)."""
        return float(sum(abs(c) for c in self._terms.values()))

    # -- text dump ---------------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for ps, c in sorted(self.terms.items(), key=lambda kv: kv[0].letters):
            lines.append(f"{c.real:.17g}{c.imag:+.17g}i {ps.letters}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, n_qubits: int | None = None) -> "PauliOperator":
        items = []
        for raw in text.splitlines():
            raw = raw.strip()
            if not raw or raw.startswith("#"):
                continue
            coeff, letters = raw.split()
            items.append((_parse_complex(coeff), letters))
        if not items:
            if n_qubits is None:
                raise ValueError("empty dump needs n_qubits")
            return cls(n_qubits)
        return cls.from_list(items)


_COMPLEX_RE = re.compile(r"^([+-]?[^+-]+(?:e[+-]\d+)?)([+-][^+-]+(?:e[+-]\d+)?)i$", re.I)


def _parse_complex(s: str) -> complex:
    m = _COMPLEX_RE.match(s)
    if m is None:
        return complex(float(s))
    return complex(float(m.group(1)), float(m.group(2)))


def _parity_array(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    p = np.zeros_like(a)
    while np.any(a):
        p ^= a & 1
        a >>= 1
    return p


def pauli_apply(op: PauliOperator, v):
    """Return ``op @ v`` for a raw amplitude array or a StateVector."""
    from .simulator import StateVector

    if isinstance(v, StateVector):
        if v.n_qubits != op.n_qubits:
            raise ValueError("dimension mismatch between operator and state")
        return StateVector(op.apply(v.amplitudes), normalize=False)
    return op.apply(v)


# --- fermion encodings -----------------------------------------------------

JORDAN_WIGNER = "jw"
BRAVYI_KITAEV = "bk"
_SCHEME_ALIASES = {
    "jw": JORDAN_WIGNER,
    "jordanwigner": JORDAN_WIGNER,
    "jordan-wigner": JORDAN_WIGNER,
    "bk": BRAVYI_KITAEV,
    "bravyikitaev": BRAVYI_KITAEV,
    "bravyi-kitaev": BRAVYI_KITAEV,
}


def _scheme(name: str) -> str:
    try:
        return _SCHEME_ALIASES[name.lower().replace("_", "")]
    except KeyError:
        raise ValueError(f"unknown encoding {name!r}") from None


def bk_update_set(j: int, n: int) -> set[int]:
    """Qubits whose stored parity includes mode ``j`` (``j`` itself included)."""
    out = set()
    k = j + 1
    while k <= n:
        out.add(k - 1)
        k += k & -k
    return out


def bk_parity_set(j: int) -> set[int]:
    """Qubits whose parities combine to the occupation parity of modes ``< j``."""
    out = set()
    k = j
    while k > 0:
        out.add(k - 1)
        k &= k - 1
    return out


def bk_occupation_set(j: int) -> set[int]:
    """Qubits whose parities combine to the occupation of mode ``j``."""
    out = {j}
    k = j + 1
    parent = k & (k - 1)
    k -= 1
    while k != parent:
        out.add(k - 1)
        k &= k - 1
    return out


def _mask(qubits: Iterable[int], n: int) -> int:
    m = 0
    for q in qubits:
        m |= 1 << (n - 1 - q)
    return m


def ladder_operator(mode: int, n: int, creation: bool, scheme: str = JORDAN_WIGNER) -> PauliOperator:
    """Qubit image of ``a+_mode`` (``creation=True``) or ``a_mode``."""
    if not 0 <= mode < n:
        raise ValueError(f"mode {mode} out of range for {n} modes")
    scheme = _scheme(scheme)
    if scheme == JORDAN_WIGNER:
        update, parity, occ = {mode}, set(range(mode)), {mode}
    else:
        update, parity, occ = bk_update_set(mode, n), bk_parity_set(mode), bk_occupation_set(mode)
    # a+ = Z_P X_U (1 + Z_O)/2 ; X_j Z_j = -i Y_j
    x_u = _mask(update, n)
    first = PauliOperator(n, {(x_u, _mask(parity, n)): 0.5})
    z_rest = _mask(parity ^ (occ - {mode}), n)
    y_bit = _mask([mode], n)
    # key (x_u, z_rest | y_bit) is the string carrying Y on qubit j
    second = PauliOperator(n, {(x_u, z_rest | y_bit): -0.5j})
    op = first + second
    return op if creation else op.adjoint()


def map_fermion_operator(
    n_modes: int,
    monomials: Sequence[tuple[Sequence[tuple[int, bool]], complex]],
    scheme: str = JORDAN_WIGNER,
) -> PauliOperator:
    """Map a sum of ladder-operator products to a PauliOperator.

    Each monomial is ``(((mode, is_creation), ...), coeff)`` read left to right as
    an operator product.
    """
    cache: dict[tuple[int, bool], PauliOperator] = {}
    acc: dict[tuple[int, int], complex] = defaultdict(complex)
    for ops, coeff in monomials:
        term = PauliOperator.identity(n_modes, coeff)
        for mode, dagger in ops:
            key = (mode, bool(dagger))
            if key not in cache:
                cache[key] = ladder_operator(mode, n_modes, bool(dagger), scheme)
            term = term @ cache[key]
        for k, c in term._terms.items():
            acc[k] += c
    return PauliOperator(n_modes, acc)


def bk_basis_permutation(n: int) -> np.ndarray:
    """``perm[occupation_index] = bk_index`` for computational basis states."""
    rows = [bk_update_set(k, n) for k in range(n)]
    perm = np.empty(2 ** n, dtype=np.int64)
    for idx in range(2 ** n):
        b = 0
        for k in range(n):
            if (idx >> (n - 1 - k)) & 1:
                b ^= _mask(rows[k], n)
        perm[idx] = b
    return perm


def occupation_amplitudes(amplitudes: np.ndarray, scheme: str) -> np.ndarray:
    """Re-express encoded amplitudes in the occupation-number basis."""
    amplitudes = np.asarray(amplitudes)
    if _scheme(scheme) == JORDAN_WIGNER:
        return amplitudes
    n = int(np.log2(amplitudes.shape[0]))
    return amplitudes[bk_basis_permutation(n)]


def encoded_amplitudes(occupation: np.ndarray, scheme: str) -> np.ndarray:
    occupation = np.asarray(occupation)
    if _scheme(scheme) == JORDAN_WIGNER:
        return occupation
    n = int(np.log2(occupation.shape[0]))
    out = np.empty_like(occupation)
    out[bk_basis_permutation(n)] = occupation
    return out
