"""Valence-space shell-model Hamiltonians in the M-scheme.

Single-particle states are ordered by ``(tz2, orbital index, m2)``. A
configuration is an integer whose bit ``n_modes - 1 - k`` holds the occupation
of mode ``k``, so mode 0 is the leftmost character of the printed bitstring.
This is the same layout the state-vector simulator uses for qubits, which makes
the Jordan-Wigner image of a configuration the computational basis state with
the same integer label.
"""

from __future__ import annotations

import itertools
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

L_LETTERS = "spdfg"
STORE_THRESHOLD = 1e-12
NEUTRON_TZ2 = +1

_LABEL_RE = re.compile(r"^(\d+)([spdfg])(\d+)/2$")


class InteractionFileError(ValueError):
    """Raised for malformed interaction files; carries the offending line."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


class EmptyBasisError(ValueError):
    """No configuration satisfies the requested constraints."""


class BasisMismatchError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Orbital:
    n: int
    l: int
    j2: int

    def __post_init__(self):
        if self.n < 0 or self.l < 0:
            raise ValueError(f"negative quantum number in {self!r}")
        if self.j2 < 1 or self.j2 not in (2 * self.l - 1, 2 * self.l + 1):
            raise ValueError(f"j2={self.j2} incompatible with l={self.l}")

    @property
    def label(self) -> str:
        return f"{self.n}{L_LETTERS[self.l]}{self.j2}/2"

    @property
    def degeneracy(self) -> int:
        return self.j2 + 1

    @classmethod
    def parse(cls, label: str) -> "Orbital":
        m = _LABEL_RE.match(label.strip())
        if m is None:
            raise ValueError(f"bad orbital label {label!r}")
        return cls(int(m.group(1)), L_LETTERS.index(m.group(2)), int(m.group(3)))

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class SingleParticleState:
    orbital_index: int
    orbital: Orbital
    m2: int
    tz2: int

    def __post_init__(self):
        if abs(self.m2) > self.orbital.j2 or (self.m2 - self.orbital.j2) % 2:
            raise ValueError(f"m2={self.m2} invalid for j2={self.orbital.j2}")
        if self.tz2 not in (-1, 1):
            raise ValueError("tz2 must be +1 or -1")


@dataclass(frozen=True)
class TwoBodyElement:
    a: int
    b: int
    c: int
    d: int
    J: int
    T: int
    V: float


@dataclass(frozen=True)
class InteractionData:
    orbitals: tuple[Orbital, ...]
    spe: dict[Orbital, float]
    tbme: tuple[TwoBodyElement, ...] = ()

    def __post_init__(self):
        for orb in self.orbitals:
            if orb not in self.spe:
                raise ValueError(f"no single-particle energy for {orb}")
        n = len(self.orbitals)
        for el in self.tbme:
            if not all(0 <= k < n for k in (el.a, el.b, el.c, el.d)):
                raise ValueError(f"TBME refers to an unknown orbital: {el}")
            _check_tbme_quantum_numbers(self.orbitals, el)

    def restrict(self, labels: Iterable[str | Orbital]) -> "InteractionData":
        """Keep only the listed orbitals (in their original order) and the TBMEs among them."""
        keep = {Orbital.parse(x) if isinstance(x, str) else x for x in labels}
        missing = keep - set(self.orbitals)
        if missing:
            raise ValueError(f"orbitals not in interaction: {sorted(map(str, missing))}")
        old = [k for k, o in enumerate(self.orbitals) if o in keep]
        remap = {k: i for i, k in enumerate(old)}
        tbme = tuple(
            TwoBodyElement(remap[e.a], remap[e.b], remap[e.c], remap[e.d], e.J, e.T, e.V)
            for e in self.tbme
            if all(k in remap for k in (e.a, e.b, e.c, e.d))
        )
        orbitals = tuple(self.orbitals[k] for k in old)
        return InteractionData(orbitals, {o: self.spe[o] for o in orbitals}, tbme)


def _check_tbme_quantum_numbers(orbitals: Sequence[Orbital], el: TwoBodyElement) -> None:
    if el.T not in (0, 1):
        raise ValueError(f"T must be 0 or 1, got {el.T}")
    if el.J < 0:
        raise ValueError(f"negative J in {el}")
    for x, y in ((el.a, el.b), (el.c, el.d)):
        j2x, j2y = orbitals[x].j2, orbitals[y].j2
        if not abs(j2x - j2y) <= 2 * el.J <= j2x + j2y:
            raise ValueError(
                f"triangle rule violated: J={el.J} with j={j2x}/2, {j2y}/2"
            )


def parse_interaction_file(path: str | Path) -> InteractionData:
    """Read ``SPE``/``TBME`` records.

    Orbitals are introduced by their ``SPE`` line and keep file order. TBMEs must
    satisfy ``a <= b`` and ``c <= d`` in that order, and each ``(ab;cd)`` pair may
    appear once (its conjugate ``(cd;ab)`` is implied).
    """
    orbitals: list[Orbital] = []
    spe: dict[Orbital, float] = {}
    raw_tbme: list[tuple[int, list[str]]] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        key = fields[0].upper()
        if key == "SPE":
            if len(fields) != 3:
                raise InteractionFileError("expected 'SPE <label> <energy>'", lineno)
            orb = _parse_label(fields[1], lineno)
            if orb in spe:
                raise InteractionFileError(f"duplicate SPE for {orb}", lineno)
            orbitals.append(orb)
            spe[orb] = _parse_float(fields[2], lineno)
        elif key == "TBME":
            if len(fields) != 8:
                raise InteractionFileError("expected 'TBME a b c d J T V'", lineno)
            raw_tbme.append((lineno, fields[1:]))
        else:
            raise InteractionFileError(f"unknown record {fields[0]!r}", lineno)

    index = {o: k for k, o in enumerate(orbitals)}
    tbme: list[TwoBodyElement] = []
    seen: set[tuple[int, ...]] = set()
    for lineno, f in raw_tbme:
        idx = []
        for lab in f[:4]:
            orb = _parse_label(lab, lineno)
            if orb not in index:
                raise InteractionFileError(f"orbital {lab} has no SPE line", lineno)
            idx.append(index[orb])
        try:
            J, T = int(f[4]), int(f[5])
        except ValueError:
            raise InteractionFileError("J and T must be integers", lineno) from None
        el = TwoBodyElement(*idx, J, T, _parse_float(f[6], lineno))
        if el.a > el.b or el.c > el.d:
            raise InteractionFileError("TBME orbitals must satisfy a <= b and c <= d", lineno)
        try:
            _check_tbme_quantum_numbers(orbitals, el)
        except ValueError as exc:
            raise InteractionFileError(str(exc), lineno) from None
        key = (el.a, el.b, el.c, el.d, J, T)
        if key in seen or (el.c, el.d, el.a, el.b, J, T) in seen:
            raise InteractionFileError("duplicate TBME", lineno)
        seen.add(key)
        tbme.append(el)
    return InteractionData(tuple(orbitals), spe, tuple(tbme))


def _parse_label(label: str, lineno: int) -> Orbital:
    try:
        return Orbital.parse(label)
    except ValueError as exc:
        raise InteractionFileError(str(exc), lineno) from None


def _parse_float(s: str, lineno: int) -> float:
    try:
        return float(s)
    except ValueError:
        raise InteractionFileError(f"not a number: {s!r}", lineno) from None


def write_interaction_file(data: InteractionData, path: str | Path) -> None:
    lines = [f"SPE {o.label} {data.spe[o]!r}" for o in data.orbitals]
    for e in data.tbme:
        labs = " ".join(data.orbitals[k].label for k in (e.a, e.b, e.c, e.d))
        lines.append(f"TBME {labs} {e.J} {e.T} {e.V!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- Clebsch-Gordan coefficients -------------------------------------------


@lru_cache(maxsize=None)
def clebsch_gordan(j1: int, m1: int, j2: int, m2: int, J: int, M: int) -> float:
    """<j1 m1, j2 m2 | J M> with every argument given as twice its value.

    Racah's closed form, Condon-Shortley phases. Impossible couplings give 0.
    """
    if M != m1 + m2:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(M) > J:
        return 0.0
    if not abs(j1 - j2) <= J <= j1 + j2:
        return 0.0
    if (j1 + j2 + J) % 2 or (j1 + m1) % 2 or (j2 + m2) % 2 or (J + M) % 2:
        return 0.0
    # integer arguments of the factorials
    a = (j1 + j2 - J) // 2
    b = (j1 - m1) // 2
    c = (j2 + m2) // 2
    d = (J - j2 + m1) // 2
    e = (J - j1 - m2) // 2
    f = math.factorial
    radicand = Fraction(
        (J + 1) * f((J + j1 - j2) // 2) * f((J - j1 + j2) // 2) * f(a),
        f((j1 + j2 + J) // 2 + 1),
    ) * (
        f((J + M) // 2) * f((J - M) // 2) * f(b) * f((j1 + m1) // 2)
        * f((j2 - m2) // 2) * f(c)
    )
    total = Fraction(0)
    for k in range(max(0, -d, -e), min(a, b, c) + 1):
        term = Fraction(1, f(k) * f(a - k) * f(b - k) * f(c - k) * f(d + k) * f(e + k))
        total += -term if k % 2 else term
    return float(total) * math.sqrt(radicand)


# --- configuration basis ---------------------------------------------------


def single_particle_states(
    orbitals: Sequence[Orbital], species: str = "np", neutron_tz2: int = NEUTRON_TZ2
) -> tuple[SingleParticleState, ...]:
    """All (orbital, m2, tz2) states sorted by (tz2, orbital index, m2).

    ``species`` selects neutrons (``"n"``), protons (``"p"``) or both.
    """
    if neutron_tz2 not in (-1, 1):
        raise ValueError("neutron_tz2 must be +1 or -1")
    tz_values = []
    if "n" in species:
        tz_values.append(neutron_tz2)
    if "p" in species:
        tz_values.append(-neutron_tz2)
    if not tz_values or set(species) - set("np"):
        raise ValueError(f"species must be a combination of 'n' and 'p', got {species!r}")
    states = [
        SingleParticleState(k, orb, m2, tz2)
        for tz2 in sorted(tz_values)
        for k, orb in enumerate(orbitals)
        for m2 in range(-orb.j2, orb.j2 + 1, 2)
    ]
    return tuple(states)


@dataclass(frozen=True, eq=False)
class ConfigurationBasis:
    sp_states: tuple[SingleParticleState, ...]
    states: np.ndarray
    particles: int | None = None
    m2: int | None = None
    tz2: int | None = None
    _lookup: dict[int, int] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_lookup", {int(s): i for i, s in enumerate(self.states)})
        self.states.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return len(self.sp_states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def index(self, config: int | str) -> int:
        if isinstance(config, str):
            config = int(config, 2)
        return self._lookup[config]

    def __contains__(self, config: int) -> bool:
        return int(config) in self._lookup

    def bitstring(self, i: int) -> str:
        return format(int(self.states[i]), f"0{self.n_modes}b")

    def occupied(self, config: int) -> list[int]:
        n = self.n_modes
        return [k for k in range(n) if (config >> (n - 1 - k)) & 1]

    def config_of_modes(self, modes: Iterable[int]) -> int:
        n = self.n_modes
        return sum(1 << (n - 1 - k) for k in set(modes))

    def quantum_numbers(self, config: int) -> tuple[int, int, int]:
        occ = self.occupied(config)
        return (
            len(occ),
            sum(self.sp_states[k].m2 for k in occ),
            sum(self.sp_states[k].tz2 for k in occ),
        )


def enumerate_basis(
    sp_states: Sequence[SingleParticleState] | int,
    particles: int | None = None,
    m2: int | None = None,
    tz2: int | None = None,
) -> ConfigurationBasis:
    """All occupation bitstrings satisfying the active constraints, ascending.

    ``sp_states`` may be an integer mode count for bare bitstrings; then only
    the particle-number constraint is meaningful.
    """
    if isinstance(sp_states, int):
        if m2 is not None or tz2 is not None:
            raise ValueError("m2/tz2 constraints need single-particle quantum numbers")
        sp_states = tuple(
            SingleParticleState(0, Orbital(0, 0, 1), 1, 1) for _ in range(sp_states)
        )
    sp_states = tuple(sp_states)
    n = len(sp_states)
    if particles is not None and not 0 <= particles <= n:
        raise EmptyBasisError(f"cannot place {particles} particles in {n} modes")
    counts = [particles] if particles is not None else range(n + 1)
    configs = []
    for count in counts:
        for occ in itertools.combinations(range(n), count):
            if m2 is not None and sum(sp_states[k].m2 for k in occ) != m2:
                continue
            if tz2 is not None and sum(sp_states[k].tz2 for k in occ) != tz2:
                continue
            configs.append(sum(1 << (n - 1 - k) for k in occ))
    if not configs:
        raise EmptyBasisError(
            f"no configurations with particles={particles}, m2={m2}, tz2={tz2}"
        )
    return ConfigurationBasis(sp_states, np.array(sorted(configs), dtype=np.int64), particles, m2, tz2)


# --- Hamiltonian -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SparseHamiltonian:
    """Real symmetric matrix over a configuration basis, stored row-wise (CSR)."""

    matrix: sp.csr_matrix
    basis: ConfigurationBasis | None = None

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=float)
        m.data[np.abs(m.data) < STORE_THRESHOLD] = 0.0
        m.eliminate_zeros()
        m.sort_indices()
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_dense(cls, a, basis=None) -> "SparseHamiltonian":
        return cls(sp.csr_matrix(np.asarray(a, dtype=float)), basis)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rows(self) -> list[list[tuple[int, float]]]:
        m = self.matrix
        return [
            list(zip(m.indices[m.indptr[r]:m.indptr[r + 1]].tolist(),
                     m.data[m.indptr[r]:m.indptr[r + 1]].tolist()))
            for r in range(self.dim)
        ]

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def is_hermitian(self, atol: float = 0.0) -> bool:
        diff = self.matrix - self.matrix.T
        return diff.nnz == 0 or np.max(np.abs(diff.data)) <= atol

    def __matmul__(self, v):
        return self.matrix @ v


def pair_amplitudes(
    sp_states: Sequence[SingleParticleState],
    a: int,
    b: int,
    J: int,
    T: int,
    neutron_tz2: int = NEUTRON_TZ2,
) -> dict[tuple[int, int], list[tuple[int, int, float]]]:
    """Expansion of the coupled pair creator A+_{JM,TMT}(ab).

    Returns ``{(M2, MT2): [(alpha, beta, amplitude), ...]}`` meaning
    ``A+ = sum amplitude * c+_alpha c+_beta`` in that operator order. The isospin
    Clebsch-Gordan factor uses ``tz2 * neutron_tz2`` so that the neutron always
    carries isospin projection +1/2 under the nuclear convention.
    """
    a_states = [k for k, s in enumerate(sp_states) if s.orbital_index == a]
    b_states = [k for k, s in enumerate(sp_states) if s.orbital_index == b]
    if not a_states or not b_states:
        raise BasisMismatchError(f"orbital {a} or {b} absent from the mode list")
    ja = sp_states[a_states[0]].orbital.j2
    jb = sp_states[b_states[0]].orbital.j2
    out: dict[tuple[int, int], list[tuple[int, int, float]]] = defaultdict(list)
    for al in a_states:
        sa = sp_states[al]
        mu_a = sa.tz2 * neutron_tz2
        for be in b_states:
            if al == be:
                continue
            sb = sp_states[be]
            mu_b = sb.tz2 * neutron_tz2
            M = sa.m2 + sb.m2
            MT = mu_a + mu_b
            amp = clebsch_gordan(ja, sa.m2, jb, sb.m2, 2 * J, M) * clebsch_gordan(
                1, mu_a, 1, mu_b, 2 * T, MT
            )
            if amp != 0.0:
                out[(M, MT)].append((al, be, amp))
    return dict(out)


def two_body_terms(
    data: InteractionData,
    sp_states: Sequence[SingleParticleState],
    normalized: bool = True,
    neutron_tz2: int = NEUTRON_TZ2,
) -> dict[tuple[int, int, int, int], float]:
    """Coefficients ``h[p, q, r, s]`` of ``c+_p c+_q c_s c_r`` with p < q and r < s.

    Orbitals absent from ``sp_states`` (e.g. after restricting to a species)
    are skipped.
    """
    present = {s.orbital_index for s in sp_states}
    terms: dict[tuple[int, int, int, int], float] = defaultdict(float)
    cache: dict = {}

    def pairs(x, y, J, T):
        key = (x, y, J, T)
        if key not in cache:
            cache[key] = pair_amplitudes(sp_states, x, y, J, T, neutron_tz2)
        return cache[key]

    for el in data.tbme:
        if not {el.a, el.b, el.c, el.d} <= present:
            continue
        scale = el.V
        if normalized:
            scale /= math.sqrt((1 + (el.a == el.b)) * (1 + (el.c == el.d)))
        blocks = [((el.a, el.b), (el.c, el.d))]
        if (el.a, el.b) != (el.c, el.d):
            blocks.append(((el.c, el.d), (el.a, el.b)))
        for (x, y), (u, w) in blocks:
            create = pairs(x, y, el.J, el.T)
            destroy = pairs(u, w, el.J, el.T)
            for mm, clist in create.items():
                dlist = destroy.get(mm)
                if not dlist:
                    continue
                for p, q, ca in clist:
                    sign_c = 1.0
                    if p > q:
                        p, q, sign_c = q, p, -1.0
                    for r, s, cd in dlist:
                        # (c+_r c+_s)^dagger = c_s c_r
                        sign_d = 1.0
                        if r > s:
                            r, s, sign_d = s, r, -1.0
                        terms[(p, q, r, s)] += scale * sign_c * sign_d * ca * cd
    return {k: v for k, v in terms.items() if abs(v) >= STORE_THRESHOLD}


def one_body_terms(data: InteractionData, sp_states: Sequence[SingleParticleState]) -> np.ndarray:
    return np.array([data.spe[s.orbital] for s in sp_states], dtype=float)


def _check_basis(data: InteractionData, basis: ConfigurationBasis) -> None:
    for s in basis.sp_states:
        if s.orbital_index >= len(data.orbitals) or data.orbitals[s.orbital_index] != s.orbital:
            raise BasisMismatchError(
                f"single-particle state {s} does not belong to the interaction's orbitals"
            )


def build_hamiltonian(
    data: InteractionData,
    basis: ConfigurationBasis,
    normalized: bool = True,
    neutron_tz2: int = NEUTRON_TZ2,
) -> SparseHamiltonian:
    """Assemble <x|H|x'> over ``basis`` from SPEs and coupled TBMEs."""
    _check_basis(data, basis)
    n = basis.n_modes
    eps = one_body_terms(data, basis.sp_states)
    h2 = two_body_terms(data, basis.sp_states, normalized, neutron_tz2)
    by_annihilated: dict[tuple[int, int], list[tuple[int, int, float]]] = defaultdict(list)
    for (p, q, r, s), v in h2.items():
        by_annihilated[(r, s)].append((p, q, v))

    entries: dict[tuple[int, int], float] = defaultdict(float)
    for col, x in enumerate(basis.states.tolist()):
        occ = [k for k in range(n) if (x >> (n - 1 - k)) & 1]
        entries[(col, col)] += float(eps[occ].sum()) if occ else 0.0
        for r, s in itertools.combinations(occ, 2):
            created = by_annihilated.get((r, s))
            if not created:
                continue
            y, sign = _annihilate(x, r, n)
            y, sg = _annihilate(y, s, n)
            sign *= sg
            for p, q, v in created:
                z, s1 = _create(y, q, n)
                if not s1:
                    continue
                z, s2 = _create(z, p, n)
                if not s2:
                    continue
                row = basis._lookup.get(z)
                if row is None:
                    raise BasisMismatchError(
                        "Hamiltonian connects the basis to a configuration outside it; "
                        "the constraints do not match a conserved sector"
                    )
                entries[(row, col)] += sign * s1 * s2 * v
    rows, cols, vals = [], [], []
    for (r, c), v in entries.items():
        if abs(v) >= STORE_THRESHOLD:
            rows.append(r)
            cols.append(c)
            vals.append(v)
    m = sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))
    return SparseHamiltonian(m, basis)


def _parity_before(x: int, k: int, n: int) -> int:
    # occupied modes with index < k live in the bits above position n-1-k
    return bin(x >> (n - k)).count("1") & 1


def _annihilate(x: int, k: int, n: int) -> tuple[int, int]:
    bit = 1 << (n - 1 - k)
    if not x & bit:
        return x, 0
    return x ^ bit, -1 if _parity_before(x, k, n) else 1


def _create(x: int, k: int, n: int) -> tuple[int, int]:
    bit = 1 << (n - 1 - k)
    if x & bit:
        return x, 0
    return x | bit, -1 if _parity_before(x, k, n) else 1


def fermion_monomials(
    data: InteractionData,
    sp_states: Sequence[SingleParticleState],
    normalized: bool = True,
    neutron_tz2: int = NEUTRON_TZ2,
) -> list[tuple[tuple[tuple[int, bool], ...], float]]:
    """The Hamiltonian as ladder-operator monomials ``(((mode, is_creation), ...), coeff)``."""
    eps = one_body_terms(data, sp_states)
    out: list[tuple[tuple[tuple[int, bool], ...], float]] = [
        (((k, True), (k, False)), float(e)) for k, e in enumerate(eps) if e != 0.0
    ]
    for (p, q, r, s), v in two_body_terms(data, sp_states, normalized, neutron_tz2).items():
        out.append((((p, True), (q, True), (s, False), (r, False)), v))
    return out
