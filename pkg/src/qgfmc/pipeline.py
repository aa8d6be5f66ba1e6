"""End-to-end orchestration: shell-model sector, quantum trials, fnGFMC, oracle lines."""

from __future__ import annotations

import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import oracle
from .gfmc import (
    EnergyEstimate,
    FixedNodeParams,
    TrialStateHandle,
    Trajectory,
    mixed_energy,
    walk_populations,
    write_energy_report,
)
from .pauli import PauliOperator, encoded_amplitudes, map_fermion_operator, occupation_amplitudes
from .qsd import (
    ExcitationOnHF,
    HartreeFock,
    KrylovChain,
    Mode,
    SubspaceSpec,
    TrialStateDescription,
    hartree_fock_config,
    prepare_initial_state,
)
from .shell_model import (
    ConfigurationBasis,
    InteractionData,
    SparseHamiltonian,
    build_hamiltonian,
    enumerate_basis,
    parse_interaction_file,
    fermion_monomials,
    one_body_terms,
    single_particle_states,
)
from .simulator import Evolver

log = logging.getLogger(__name__)


@dataclass
class ShellSystem:
    """A symmetry sector of a valence space in both representations."""

    data: InteractionData
    basis: ConfigurationBasis
    hamiltonian: SparseHamiltonian
    pauli: PauliOperator
    scheme: str = "jw"

    @property
    def n_qubits(self) -> int:
        return self.basis.n_modes

    @property
    def mode_energies(self) -> tuple[float, ...]:
        return tuple(one_body_terms(self.data, self.basis.sp_states).tolist())

    def _pairs_from(self, x: int) -> list[tuple[int, int]]:
        occ = set(self.basis.occupied(x))
        sps = self.basis.sp_states
        return [
            (i, j) for i in sorted(occ) for j in range(self.n_qubits)
            if j not in occ and sps[i].m2 == sps[j].m2 and sps[i].tz2 == sps[j].tz2
        ]

    def hartree_fock(self) -> HartreeFock:
        """Sector HF; degenerate fillings go to the one with most single excitations."""
        eps = np.asarray(self.mode_energies)
        sums = np.array([eps[self.basis.occupied(int(x))].sum() for x in self.basis.states])
        ties = [int(x) for x, e in zip(self.basis.states, sums) if e <= sums.min() + 1e-9]
        best = max(ties, key=lambda x: (len(self._pairs_from(x)), x))
        particles = len(self.basis.occupied(best))
        return HartreeFock(particles, tuple(eps.tolist()), (best,), self.scheme)

    def hf_vector(self) -> np.ndarray:
        v = np.zeros(self.basis.dim)
        v[self.basis.index(hartree_fock_config(self.hartree_fock()))] = 1.0
        return v

    def restrict(self, register: np.ndarray) -> np.ndarray:
        """Encoded register amplitudes -> amplitudes over the sector basis."""
        return occupation_amplitudes(register, self.scheme)[self.basis.states]

    def embed(self, v: np.ndarray) -> np.ndarray:
        reg = np.zeros(2 ** self.n_qubits, dtype=complex)
        reg[self.basis.states] = v
        return encoded_amplitudes(reg, self.scheme)

    def excitation_pairs(self) -> list[tuple[int, int]]:
        """(occupied, empty) mode pairs sharing m2 and tz2, cheapest first."""
        eps = self.mode_energies
        pairs = self._pairs_from(hartree_fock_config(self.hartree_fock()))
        pairs.sort(key=lambda p: (eps[p[1]] - eps[p[0]], p))
        return pairs

    def excitation(self, level: int, theta: float = 1.0, modes: tuple[int, int] | None = None) -> ExcitationOnHF:
        if modes is None:
            pairs = self.excitation_pairs()
            if len(pairs) < level:
                raise ValueError(f"no sector-preserving excitation for level {level}")
            modes = pairs[level - 1]
        return ExcitationOnHF(self.hartree_fock(), modes[0], modes[1], theta)


def build_system(
    data: InteractionData,
    species: str = "n",
    particles: int = 2,
    m2: int | None = 0,
    tz2: int | None = None,
    orbitals: Sequence[str] | None = None,
    normalized: bool = True,
    scheme: str = "jw",
    neutron_tz2: int = 1,
) -> ShellSystem:
    if orbitals:
        data = data.restrict(orbitals)
    sps = single_particle_states(data.orbitals, species, neutron_tz2)
    basis = enumerate_basis(sps, particles, m2, tz2)
    h = build_hamiltonian(data, basis, normalized, neutron_tz2)
    pauli = map_fermion_operator(len(sps), fermion_monomials(data, sps, normalized, neutron_tz2), scheme).real()
    return ShellSystem(data, basis, h, pauli, scheme)


# --- trials ----------------------------------------------------------------


def classical_trial_vectors(system: ShellSystem, level: int, theta: float = 1.0,
                            modes: Sequence[tuple[int, int] | None] | None = None) -> list[np.ndarray]:
    """HF for the ground state, then ``U_k|HF>`` Gram-Schmidt filtered against earlier ones."""
    out = [system.hf_vector().astype(complex)]
    for k in range(1, level + 1):
        m = modes[k - 1] if modes else None
        v = system.restrict(prepare_initial_state(system.excitation(k, theta, m)).amplitudes)
        for f in out:
            v = v - f * np.vdot(f, v)
        nrm = np.linalg.norm(v)
        if nrm < 1e-12:
            raise ValueError(f"classical trial for level {k} vanishes after filtering")
        out.append(v / nrm)
    return out


def quantum_chain(
    system: ShellSystem, level: int, n: int, dt: float, mode: Mode, evolver: Evolver,
    seed: int = 0, theta: float = 1.0, modes: Sequence[tuple[int, int] | None] | None = None,
    threshold: float | None = None,
) -> list[TrialStateDescription]:
    chain = KrylovChain(system.pauli, mode, evolver, seed, threshold)
    specs = [SubspaceSpec(n, dt, system.hartree_fock())]
    for k in range(1, level + 1):
        m = modes[k - 1] if modes else None
        specs.append(SubspaceSpec(n, dt, system.excitation(k, theta, m)))
    return [chain.add_run(s) for s in specs]


def quantum_handle(system: ShellSystem, trial: TrialStateDescription) -> TrialStateHandle:
    return TrialStateHandle.quantum(trial, system.basis, system.hf_vector(), scheme=system.scheme)


# --- walks -----------------------------------------------------------------


@dataclass
class WalkResult:
    params: FixedNodeParams
    trajectories: list[Trajectory]


def walk(h: SparseHamiltonian, params: FixedNodeParams, initial: np.ndarray | None = None) -> WalkResult:
    params = params.resolved(h)
    return WalkResult(params, walk_populations(h, params, initial))


def truncated(t: Trajectory, n: int) -> Trajectory:
    return Trajectory(t.configs[:n], t.weights[:n], t.log_factors, t.equilibration, t.frozen)


def running_energy(
    h: SparseHamiltonian, trial: TrialStateHandle, result: WalkResult, checkpoints: int = 20
) -> list[tuple[int, EnergyEstimate]]:
    """Estimates using the first ``k`` recorded steps at evenly spaced ``k``."""
    total = result.trajectories[0].n_steps
    marks = sorted({max(2, int(round(total * (i + 1) / checkpoints))) for i in range(checkpoints)})
    out = []
    for k in marks:
        if k > total:
            continue
        # partial runs are often unreliable early on; the row records it, so stay quiet
        est = mixed_energy(h, trial, [truncated(t, k) for t in result.trajectories], result.params.history, warn=False)
        out.append((result.params.equilibration_steps() + k, est))
    return out


@dataclass
class OracleLines:
    exact: np.ndarray
    fixed_node: float
    lam: float


def oracle_lines(system: ShellSystem, params: FixedNodeParams, k: int = 4) -> OracleLines:
    params = params.resolved(system.hamiltonian)
    exact = oracle.exact_spectrum(system.hamiltonian, min(k, system.basis.dim)).eigenvalues
    fn = oracle.fixed_node_spectrum(system.hamiltonian, params.lam, params.gamma).ground
    return OracleLines(exact, fn, params.lam)


# --- configured runs -------------------------------------------------------

CSV_VERSION = "qgfmc-csv v1"


class StageError(RuntimeError):
    """Failure inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class ReliabilityError(RuntimeError):
    """Results were written but at least one estimate failed its reliability check."""


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # attribute and re-raise
        raise StageError(name, exc) from exc


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.10g}"
    return str(x)


def write_csv(path: Path, header: list[str], rows: list[list], schema: str) -> None:
    lines = [f"# {CSV_VERSION} {schema}", ",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")


def _jsonable(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def system_from_config(cfg) -> ShellSystem:
    with stage("shell-model"):
        data = parse_interaction_file(cfg.interaction_file)
        return build_system(data, cfg.species, cfg.particles, cfg.m2, cfg.tz2, cfg.orbitals,
                            cfg.normalized, cfg.scheme, cfg.neutron_tz2)


def gfmc_params(cfg, **changes) -> FixedNodeParams:
    p = FixedNodeParams(lam=cfg.lam, gamma=cfg.gamma, n_walkers=cfg.walkers, n_steps=cfg.steps,
                        equilibration=cfg.equilibration, seed=cfg.gfmc_seed, history=cfg.history,
                        n_populations=cfg.populations)
    return replace(p, **changes) if changes else p


def _mode(cfg, shots: int | None = None) -> Mode:
    if cfg.shadow_mode == "exact" and shots is None:
        return Mode.exact()
    return Mode.shadow(shots if shots is not None else cfg.shots[0], cfg.ensemble)


def _evolver(cfg, system: ShellSystem, trotter_dt: float | None = None, backend: str | None = None) -> Evolver:
    backend = backend or cfg.backend
    return Evolver(system.pauli, backend, trotter_dt if trotter_dt is not None else cfg.trotter_dt[0])


def _target(cfg, system: ShellSystem, params: FixedNodeParams) -> OracleLines:
    with stage("oracle"):
        lines = oracle_lines(system, params, max(cfg.exact_levels, cfg.level + 1))
    if len(lines.exact) <= cfg.level:
        raise StageError("oracle", ValueError(f"sector has only {len(lines.exact)} states; level {cfg.level} unavailable"))
    return lines


def _chain(cfg, system, dt, mode, evolver, seed=None) -> list[TrialStateDescription]:
    modes = cfg.modes or None
    return quantum_chain(system, cfg.level, cfg.n, dt, mode, evolver,
                         cfg.shadow_seed if seed is None else seed, cfg.theta, modes)


def _estimate_row(est: EnergyEstimate) -> dict:
    return {"energy": est.value, "stderr": est.stderr, "n_samples": est.n_samples, "reliable": est.reliable,
            "imag": est.imag, "denominator": list(est.denominator)}


def run_build_ham(cfg, out: Path) -> dict:
    system = system_from_config(cfg)
    with stage("output"):
        b = system.basis
        write_csv(out / "basis.csv", ["index", "config", "bits", "m2", "tz2", "particles"],
                  [[i, int(x), b.bitstring(i), *b.quantum_numbers(int(x))[1:], b.quantum_numbers(int(x))[0]]
                   for i, x in enumerate(b.states)], "basis")
        m = system.hamiltonian.matrix.tocoo()
        order = np.lexsort((m.col, m.row))
        write_csv(out / "hamiltonian.csv", ["row", "col", "value"],
                  [[int(m.row[k]), int(m.col[k]), float(m.data[k])] for k in order], "hamiltonian")
        (out / "hamiltonian.pauli").write_text(system.pauli.to_text(), encoding="utf-8")
    summary = {"dim": system.basis.dim, "n_qubits": system.n_qubits, "nnz": int(m.nnz),
               "pauli_terms": len(system.pauli), "hermitian": system.hamiltonian.is_hermitian(1e-12)}
    write_json(out / "build_ham.json", summary)
    return summary


def run_exact(cfg, out: Path) -> dict:
    system = system_from_config(cfg)
    params = gfmc_params(cfg)
    lines = _target(cfg, system, params)
    summary = {"eigenvalues": lines.exact, "fixed_node_ground": lines.fixed_node, "lambda": lines.lam,
               "dim": system.basis.dim}
    write_json(out / "exact.json", summary)
    return summary


def run_qsd(cfg, out: Path) -> dict:
    system = system_from_config(cfg)
    lines = _target(cfg, system, gfmc_params(cfg))
    rows, manifests = [], []
    with stage("qsd"):
        evolver = _evolver(cfg, system)
        for dt in cfg.dt:
            trials = _chain(cfg, system, dt, _mode(cfg), evolver)
            for t in trials:
                rows.append([dt, t.level, t.energy, float(lines.exact[t.level]), t.energy - float(lines.exact[t.level])])
            manifests.append({"dt": dt, "runs": [t.manifest() for t in trials]})
    write_csv(out / "qsd.csv", ["dt", "level", "energy", "exact", "error"], rows, "qsd")
    write_json(out / "qsd.json", {"mode": _mode(cfg).label(), "trials": manifests})
    return {"rows": rows}


def run_gfmc(cfg, out: Path) -> dict:
    """Classical-trial fnGFMC for the target level."""
    system = system_from_config(cfg)
    params = gfmc_params(cfg).resolved(system.hamiltonian)
    lines = _target(cfg, system, params)
    with stage("trial"):
        trial = TrialStateHandle.classical(classical_trial_vectors(system, cfg.level, cfg.theta, cfg.modes or None)[cfg.level])
    with stage("gfmc"):
        res = walk(system.hamiltonian, params)
        est = mixed_energy(system.hamiltonian, trial, res.trajectories, params.history)
    extra = {"exact": float(lines.exact[cfg.level]), "fixed_node_ground": lines.fixed_node, "lambda": params.lam,
             "level": cfg.level}
    write_energy_report(out / "gfmc.json", est, extra)
    if not est.reliable:
        raise ReliabilityError("classical-trial estimate failed the denominator check")
    return {"estimate": est, **extra}


def run_pipeline(cfg, out: Path) -> dict:
    """QSD trials for every ``dt``, then classical and quantum fnGFMC on one shared walk."""
    system = system_from_config(cfg)
    params = gfmc_params(cfg).resolved(system.hamiltonian)
    lines = _target(cfg, system, params)
    exact = float(lines.exact[cfg.level])
    with stage("trial"):
        curves = {"classical": TrialStateHandle.classical(
            classical_trial_vectors(system, cfg.level, cfg.theta, cfg.modes or None)[cfg.level])}
    qsd_info = {}
    with stage("qsd"):
        evolver = _evolver(cfg, system)
        for dt in cfg.dt:
            trials = _chain(cfg, system, dt, _mode(cfg), evolver)
            key = f"quantum_dt={dt:g}"
            curves[key] = quantum_handle(system, trials[-1])
            target = system.restrict(trials[-1].state())
            qsd_info[key] = {"qsd_energy": trials[-1].energy, "reference_note": curves[key].note,
                             "norm": float(np.linalg.norm(target))}
    with stage("gfmc"):
        res = walk(system.hamiltonian, params)
        rows, finals = [], {}
        for name, trial in curves.items():
            for step, est in running_energy(system.hamiltonian, trial, res, cfg.checkpoints):
                rows.append([step, name, est.value, est.stderr, est.n_samples, est.reliable])
            finals[name] = mixed_energy(system.hamiltonian, trial, res.trajectories, params.history)
        steps = sorted({r[0] for r in rows})
        rows += [[s, "exact", exact, 0.0, 0, True] for s in steps]
    with stage("output"):
        write_csv(out / "energy_vs_step.csv", ["step", "curve", "energy", "stderr", "n_samples", "reliable"],
                  rows, "energy-vs-step")
        summary = {
            "level": cfg.level, "exact": exact, "exact_levels": lines.exact, "fixed_node_ground": lines.fixed_node,
            "lambda": params.lam, "dim": system.basis.dim, "n_qubits": system.n_qubits,
            "mode": _mode(cfg).label(), "curves": {k: {**_estimate_row(v), "bias": v.value - exact}
                                                    for k, v in finals.items()},
            "qsd": qsd_info, "config": cfg.items(),
        }
        write_json(out / "summary.json", summary)
    bad = [k for k, v in finals.items() if not v.reliable]
    if bad:
        raise ReliabilityError(f"unreliable estimates: {', '.join(bad)}")
    return summary


def _band(values: np.ndarray) -> tuple[float, float, float, float]:
    mean, sd = float(values.mean()), float(values.std(ddof=1))
    return mean, sd, mean - 2 * sd, mean + 2 * sd


def _repeat_seed(base: int, r: int) -> int:
    return int(np.random.SeedSequence([base, r]).generate_state(1)[0])


def sweep_shots(cfg, out: Path) -> list[list]:
    """Shadow-mode trials per shot count, repeated over seeds, scored on one shared walk."""
    system = system_from_config(cfg)
    params = gfmc_params(cfg).resolved(system.hamiltonian)
    exact = float(_target(cfg, system, params).exact[cfg.level])
    dt = cfg.dt[0]
    with stage("gfmc"):
        res = walk(system.hamiltonian, params)

    def score(trial) -> EnergyEstimate:
        return mixed_energy(system.hamiltonian, quantum_handle(system, trial), res.trajectories, params.history)

    with stage("qsd"):
        evolver = _evolver(cfg, system)
        ref = score(_chain(cfg, system, dt, Mode.exact(), evolver)[-1])
    rows, unreliable = [], 0
    for shots in cfg.shots:
        with stage(f"sweep-shots[{shots}]"):
            ests = []
            for r in range(cfg.repeats):
                trial = _chain(cfg, system, dt, Mode.shadow(shots, cfg.ensemble), evolver,
                               _repeat_seed(cfg.shadow_seed, r))[-1]
                ests.append(score(trial))
            vals = np.array([e.value for e in ests])
            unreliable += sum(not e.reliable for e in ests)
            mean, sd, lo, hi = _band(vals)
            rows.append([shots, mean, float(np.mean([e.stderr for e in ests])), ests[0].n_samples, sd, lo, hi,
                         cfg.repeats, ref.value, exact])
    write_csv(out / "sweep_shots.csv",
              ["shots", "energy", "stderr", "n_samples", "sd", "band_lo", "band_hi", "repeats",
               "exact_mode_energy", "exact"], rows, "sweep-shots")
    if unreliable:
        raise ReliabilityError(f"{unreliable} repeated estimates failed the denominator check")
    return rows


def sweep_trotter(cfg, out: Path) -> list[list]:
    """Trotter-backend trials per step size against the exact-backend trial, on one shared walk."""
    system = system_from_config(cfg)
    params = gfmc_params(cfg).resolved(system.hamiltonian)
    exact = float(_target(cfg, system, params).exact[cfg.level])
    dt = cfg.dt[0]
    with stage("gfmc"):
        res = walk(system.hamiltonian, params)

    def score(trial) -> EnergyEstimate:
        return mixed_energy(system.hamiltonian, quantum_handle(system, trial), res.trajectories, params.history)

    mode = _mode(cfg)
    repeats = 1 if mode.is_exact else cfg.repeats
    with stage("qsd"):
        ref = score(_chain(cfg, system, dt, mode, _evolver(cfg, system, backend="exact"))[-1])
    rows, unreliable = [], 0
    for tdt in cfg.trotter_dt:
        with stage(f"sweep-trotter[{tdt:g}]"):
            ev = _evolver(cfg, system, tdt, backend="trotter")
            ests = [score(_chain(cfg, system, dt, mode, ev, _repeat_seed(cfg.shadow_seed, r))[-1])
                    for r in range(repeats)]
            vals = np.array([e.value for e in ests])
            unreliable += sum(not e.reliable for e in ests)
            mean = float(vals.mean())
            sd = float(vals.std(ddof=1)) if repeats > 1 else 0.0
            rows.append([tdt, mean, float(np.mean([e.stderr for e in ests])), ests[0].n_samples, sd,
                         mean - 2 * sd, mean + 2 * sd, repeats, ref.value, abs(mean - ref.value), exact])
    write_csv(out / "sweep_trotter.csv",
              ["trotter_dt", "energy", "stderr", "n_samples", "sd", "band_lo", "band_hi", "repeats",
               "exact_backend_energy", "abs_diff", "exact"], rows, "sweep-trotter")
    if unreliable:
        raise ReliabilityError(f"{unreliable} estimates failed the denominator check")
    return rows
