import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from qgfmc import oracle
from qgfmc.shell_model import (
    EmptyBasisError,
    InteractionData,
    InteractionFileError,
    Orbital,
    TwoBodyElement,
    build_hamiltonian,
    clebsch_gordan,
    enumerate_basis,
    parse_interaction_file,
    single_particle_states,
    write_interaction_file,
)
from qgfmc.toys import random_interaction


def _write(tmp_path, text):
    p = tmp_path / "x.int"
    p.write_text(text)
    return p


def test_parse_spe_only(tmp_path):
    data = parse_interaction_file(_write(tmp_path, "SPE 0d5/2 -3.9257\n"))
    d52 = Orbital.parse("0d5/2")
    assert data.orbitals == (d52,)
    assert data.spe == {d52: -3.9257}
    assert data.tbme == ()


def test_parse_single_tbme(tmp_path):
    data = parse_interaction_file(_write(tmp_path, "SPE 0d5/2 -3.9\nTBME 0d5/2 0d5/2 0d5/2 0d5/2 0 1 -2.0\n"))
    assert data.tbme == (TwoBodyElement(0, 0, 0, 0, 0, 1, -2.0),)


def test_parse_rejects_triangle_violation(tmp_path):
    with pytest.raises(InteractionFileError, match="line 2"):
        parse_interaction_file(_write(tmp_path, "SPE 0d5/2 -3.9\nTBME 0d5/2 0d5/2 0d5/2 0d5/2 9 1 -2.0\n"))


@pytest.mark.parametrize("text", [
    "SPE 0d5/2\n",
    "SPE 0d5/2 x\n",
    "FOO 1 2\n",
    "SPE 0d5/2 1.0\nTBME 0d5/2 0d3/2 0d5/2 0d5/2 1 1 0.1\n",
    "SPE 0d5/2 1.0\nSPE 0d5/2 2.0\n",
])
def test_parse_rejects_malformed(tmp_path, text):
    with pytest.raises(InteractionFileError):
        parse_interaction_file(_write(tmp_path, text))


def test_interaction_file_round_trip(tmp_path):
    data = random_interaction(seed=3)
    path = tmp_path / "r.int"
    write_interaction_file(data, path)
    back = parse_interaction_file(path)
    assert back.orbitals == data.orbitals and back.spe == data.spe and back.tbme == data.tbme


def _racah_cg(j1, m1, j2, m2, J, M):
    """Racah closed form in exact rationals (arguments are twice-values)."""
    if M != m1 + m2 or not abs(j1 - j2) <= J <= j1 + j2:
        return 0.0
    f = math.factorial
    a, b, c = (j1 + j2 - J) // 2, (j1 - j2 + J) // 2, (-j1 + j2 + J) // 2
    pre = Fraction((J + 1) * f(a) * f(b) * f(c), f((j1 + j2 + J) // 2 + 1))
    pre *= f((j1 + m1) // 2) * f((j1 - m1) // 2) * f((j2 + m2) // 2) * f((j2 - m2) // 2)
    pre *= f((J + M) // 2) * f((J - M) // 2)
    total = Fraction(0)
    for k in range(0, j1 + j2 + J + 1):
        dens = [k, a - k, (j1 - m1) // 2 - k, (j2 + m2) // 2 - k,
                (J - j2 + m1) // 2 + k, (J - j1 - m2) // 2 + k]
        if min(dens) < 0:
            continue
        term = Fraction(1)
        for d in dens:
            term /= f(d)
        total += (-1) ** k * term
    return float(total) * math.sqrt(pre)


def test_clebsch_gordan_examples():
    assert clebsch_gordan(1, 1, 1, -1, 2, 0) == pytest.approx(1 / math.sqrt(2), abs=1e-14)
    assert clebsch_gordan(1, 1, 1, 1, 2, 2) == pytest.approx(1.0, abs=1e-14)
    assert clebsch_gordan(2, 0, 2, 0, 4, 0) == pytest.approx(math.sqrt(2 / 3), abs=1e-14)
    assert clebsch_gordan(1, 1, 1, 1, 2, 0) == 0.0
    assert clebsch_gordan(1, 1, 1, -1, 6, 0) == 0.0


def test_clebsch_gordan_matches_racah():
    for j1, j2 in itertools.product(range(0, 6), repeat=2):
        for J in range(abs(j1 - j2), j1 + j2 + 1, 2):
            for m1 in range(-j1, j1 + 1, 2):
                for m2 in range(-j2, j2 + 1, 2):
                    M = m1 + m2
                    if abs(M) > J:
                        continue
                    assert clebsch_gordan(j1, m1, j2, m2, J, M) == pytest.approx(
                        _racah_cg(j1, m1, j2, m2, J, M), abs=1e-12)


def test_enumerate_small():
    assert enumerate_basis(2, 1).states.tolist() == [0b01, 0b10]
    assert enumerate_basis(4, 4).states.tolist() == [0b1111]
    with pytest.raises(EmptyBasisError):
        enumerate_basis(2, 3)


def test_enumerate_sd_neutrons_brute_force():
    orbs = [Orbital.parse(x) for x in ("0d5/2", "1s1/2", "0d3/2")]
    sps = single_particle_states(orbs, "n")
    assert len(sps) == 12
    count = sum(1 for p, q in itertools.combinations(range(12), 2) if sps[p].m2 + sps[q].m2 == 0)
    basis = enumerate_basis(sps, 2, 0)
    assert basis.dim == count
    assert np.all(np.diff(basis.states) > 0)


def test_single_particle_order():
    sps = single_particle_states([Orbital.parse("0d3/2"), Orbital.parse("1s1/2")], "np")
    keys = [(s.tz2, s.orbital_index, s.m2) for s in sps]
    assert keys == sorted(keys)


def _one_orbital(spe=-1.5, v=-2.0):
    d = Orbital.parse("0d5/2")
    return InteractionData((d,), {d: spe}, (TwoBodyElement(0, 0, 0, 0, 0, 1, v),))


def test_vacuum_and_one_body():
    data = _one_orbital()
    sps = single_particle_states(data.orbitals, "n")
    assert build_hamiltonian(data, enumerate_basis(sps, 0)).toarray().tolist() == [[0.0]]
    h1 = build_hamiltonian(data, enumerate_basis(sps, 1)).toarray()
    assert np.allclose(h1, -1.5 * np.eye(6))


def test_pairing_block_against_coupled_oracle():
    data = _one_orbital(-1.5, -2.0)
    sps = single_particle_states(data.orbitals, "n")
    h = build_hamiltonian(data, enumerate_basis(sps, 2, 0)).toarray()
    w = np.linalg.eigvalsh(h)
    # M=0 of (5/2)^2 holds J = 0, 2, 4; only J = 0 feels the element
    assert w == pytest.approx([-5.0, -3.0, -3.0], abs=1e-12)
    assert w == pytest.approx(oracle.two_particle_coupled_spectrum(data, 0, 2, "n"), abs=1e-12)


def test_unnormalized_convention_scales_identical_orbitals():
    data = _one_orbital(0.0, -2.0)
    sps = single_particle_states(data.orbitals, "n")
    basis = enumerate_basis(sps, 2, 0)
    a = np.linalg.eigvalsh(build_hamiltonian(data, basis, normalized=True).toarray())
    b = np.linalg.eigvalsh(build_hamiltonian(data, basis, normalized=False).toarray())
    assert not np.allclose(a, b)


def test_hermitian_and_sparse():
    data = random_interaction(seed=4)
    sps = single_particle_states(data.orbitals, "n")
    h = build_hamiltonian(data, enumerate_basis(sps, 3, 1))
    assert h.is_hermitian(1e-12)
    assert h.matrix.nnz < h.dim ** 2
