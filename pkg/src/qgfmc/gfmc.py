"""Fixed-node Green's function Monte Carlo on a configuration basis.

Walkers carry a configuration and a signed weight. One step moves a walker at
``x`` to ``x'`` with probability ``G_{x'x} / c(x)`` and multiplies its weight
by the column sum ``c(x)``; there is no guiding function. Stochastic
reconfiguration after every step keeps the population fixed; the discarded
global factors re-enter the estimator through a product over the last ``L``
steps (Calandra Buonaura and Sorella), which removes the population-control
bias up to ``L``.

Mixed-estimator energies use the true Hamiltonian in the numerator. For a
uniform trial the column sums of ``H`` and of the effective operator
``Lambda I - G^fn`` coincide, so the estimate converges to the fixed-node
ground energy exactly.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .pauli import occupation_amplitudes
from .shell_model import SparseHamiltonian

log = logging.getLogger(__name__)

RELIABILITY_SIGMAS = 5.0
MIN_BLOCKS = 16


class GFMCError(RuntimeError):
    pass


class LambdaTooSmallError(GFMCError, ValueError):
    pass


# --- parameters ------------------------------------------------------------


@dataclass(frozen=True)
class Walker:
    config: int
    weight: float

    def __post_init__(self):
        if self.config < 0:
            raise ValueError("walker configuration index must be nonnegative")
        if not math.isfinite(self.weight):
            raise ValueError("walker weight must be finite")


@dataclass(frozen=True)
class FixedNodeParams:
    """Fixed-node and sampling settings; ``lam=None`` picks the default shift."""

    lam: float | None = None
    gamma: float = 0.0
    n_walkers: int = 1000
    n_steps: int = 1000
    equilibration: int | float = 0.1
    seed: int = 0
    lam_margin: float = 1.0
    history: int = 20
    population_control: bool = True
    n_populations: int = 1

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.n_walkers < 1 or self.n_steps < 1:
            raise ValueError("walker and step counts must be positive")
        if self.n_populations < 1:
            raise ValueError("need at least one population")
        if self.history < 0:
            raise ValueError("history length must be nonnegative")

    def equilibration_steps(self) -> int:
        eq = self.equilibration
        k = int(round(eq * self.n_steps)) if isinstance(eq, float) and eq < 1 else int(eq)
        if not 0 <= k < self.n_steps:
            raise ValueError("equilibration must leave at least one recorded step")
        return k

    def resolved(self, h: SparseHamiltonian) -> "FixedNodeParams":
        if self.lam is not None:
            return self
        return replace(self, lam=default_lambda(h, self.gamma, self.lam_margin))


@dataclass
class EnergyEstimate:
    value: float
    stderr: float
    n_samples: int
    autocorrelation_note: str = ""
    reliable: bool = True
    imag: float = 0.0
    blocks: list = field(default_factory=list)
    denominator: tuple[float, float] = (0.0, 0.0)
    frozen_walkers: int = 0

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


# --- fixed-node operator ---------------------------------------------------


def _csc(h) -> sp.csc_matrix:
    m = h.matrix if isinstance(h, SparseHamiltonian) else h
    return sp.csc_matrix(m, dtype=float)


def sign_flip_potential(h, x: int) -> float:
    """Sum of positive off-diagonal entries in column ``x``."""
    m = _csc(h)
    if not 0 <= x < m.shape[0]:
        raise IndexError(f"configuration {x} out of range")
    rows = m.indices[m.indptr[x]:m.indptr[x + 1]]
    vals = m.data[m.indptr[x]:m.indptr[x + 1]]
    return float(vals[(rows != x) & (vals > 0)].sum())


def sign_flip_potentials(h) -> np.ndarray:
    m = _csc(h).tocoo()
    mask = (m.row != m.col) & (m.data > 0)
    return np.bincount(m.col[mask], weights=m.data[mask], minlength=m.shape[1])


def default_lambda(h, gamma: float = 0.0, margin: float = 1.0) -> float:
    m = _csc(h)
    return float(np.max(m.diagonal() + (1 + gamma) * sign_flip_potentials(m))) + margin


def fixed_node_green(h, params: FixedNodeParams) -> SparseHamiltonian:
    """``G^fn``: nonnegative by construction, symmetric for symmetric ``H``."""
    params = params.resolved(h) if isinstance(h, SparseHamiltonian) else params
    if params.lam is None:
        params = replace(params, lam=default_lambda(h, params.gamma, params.lam_margin))
    m = _csc(h).tocoo()
    off = m.row != m.col
    neg = off & (m.data <= 0)
    pos = off & (m.data > 0)
    rows = [m.row[neg]]
    cols = [m.col[neg]]
    vals = [-m.data[neg]]
    if params.gamma > 0:
        rows.append(m.row[pos])
        cols.append(m.col[pos])
        vals.append(params.gamma * m.data[pos])
    dim = m.shape[0]
    diag = params.lam - _csc(h).diagonal() - (1 + params.gamma) * sign_flip_potentials(h)
    if np.any(diag < -1e-12):
        worst = int(np.argmin(diag))
        raise LambdaTooSmallError(
            f"Lambda={params.lam} leaves a negative diagonal {diag[worst]:.6g} at configuration {worst}"
        )
    diag = np.maximum(diag, 0.0)
    rows.append(np.arange(dim))
    cols.append(np.arange(dim))
    vals.append(diag)
    g = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    return SparseHamiltonian(g, getattr(h, "basis", None))


def effective_hamiltonian(g: SparseHamiltonian, lam: float) -> np.ndarray:
    return lam * np.eye(g.dim) - g.toarray()


# --- sampling --------------------------------------------------------------


class _ColumnSampler:
    """Draw ``x'`` from column ``x`` of a nonnegative sparse matrix."""

    def __init__(self, g):
        m = _csc(g)
        m.eliminate_zeros()
        self.indptr = m.indptr
        self.rows = m.indices
        self.colsum = np.asarray(m.sum(axis=0)).ravel()
        self.cum = np.cumsum(m.data)
        self.base = np.concatenate([[0.0], self.cum])[m.indptr[:-1]]

    def step(self, x: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        cs = self.colsum[x]
        alive = cs > 0
        u = self.base[x] + rng.random(x.shape[0]) * cs
        k = np.searchsorted(self.cum, u, side="right")
        k = np.clip(k, self.indptr[x], np.maximum(self.indptr[x + 1] - 1, self.indptr[x]))
        new = np.where(alive, self.rows[np.minimum(k, len(self.rows) - 1)], x)
        return new, cs


def population_control(configs, weights=None, target: int | None = None, rng: np.random.Generator | None = None):
    """Stochastic reconfiguration by systematic resampling proportional to |weight|.

    Accepts a list of :class:`Walker` or parallel arrays. New weights are
    ``sign * sum|w| / target`` so every weighted sum is preserved in expectation.
    """
    as_walkers = weights is None
    if as_walkers:
        walkers = list(configs)
        configs = np.array([w.config for w in walkers], dtype=np.int64)
        weights = np.array([w.weight for w in walkers], dtype=float)
    configs = np.asarray(configs)
    weights = np.asarray(weights, dtype=float)
    target = len(configs) if target is None else int(target)
    rng = rng or np.random.default_rng()
    mag = np.abs(weights)
    total = mag.sum()
    if not total > 0:
        raise GFMCError("population control needs nonzero total weight")
    cum = np.cumsum(mag)
    u = (rng.random() + np.arange(target)) * (total / target)
    idx = np.minimum(np.searchsorted(cum, u, side="right"), len(mag) - 1)
    new_c = configs[idx]
    new_w = np.sign(weights[idx]) * (total / target)
    if as_walkers:
        return [Walker(int(c), float(w)) for c, w in zip(new_c, new_w)]
    return new_c, new_w


@dataclass
class Trajectory:
    """Post-equilibration ``configs[k, w]`` and ``weights[k, w]``; ``log_factors``
    holds the log of the global factor removed after *every* step, including
    equilibration."""

    configs: np.ndarray
    weights: np.ndarray
    log_factors: np.ndarray
    equilibration: int
    frozen: int = 0

    @property
    def n_steps(self) -> int:
        return self.configs.shape[0]

    @property
    def n_samples(self) -> int:
        return self.configs.size

    def dump_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("# qgfmc trajectory v1\n")
            wr = csv.writer(fh)
            wr.writerow(["step", "walker", "config", "weight"])
            for k in range(self.n_steps):
                step = self.equilibration + k + 1
                for w in range(self.configs.shape[1]):
                    wr.writerow([step, w, int(self.configs[k, w]), repr(float(self.weights[k, w]))])


def initial_walkers(initial: np.ndarray, n_walkers: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sample walkers from ``|initial|`` with weights carrying the sign."""
    a = np.asarray(initial)
    if np.iscomplexobj(a):
        if np.abs(a.imag).max() > 1e-12 * max(1.0, np.abs(a).max()):
            raise ValueError("initial walker distribution must be real")
        a = a.real
    p = np.abs(a)
    if not p.sum() > 0:
        raise ValueError("initial vector is zero")
    cum = np.cumsum(p)
    x = np.minimum(np.searchsorted(cum, rng.random(n_walkers) * cum[-1], side="right"), len(p) - 1)
    return x.astype(np.int64), np.sign(a[x])


def propagate(
    g, walkers, n_steps: int, rng: np.random.Generator,
    equilibration: int = 0, population_control_on: bool = True,
) -> Trajectory:
    """Power-method walk under ``g``; ``walkers`` is a Walker list or (configs, weights)."""
    if isinstance(walkers, tuple):
        x, w = (np.asarray(walkers[0], dtype=np.int64).copy(), np.asarray(walkers[1], dtype=float).copy())
    else:
        walkers = list(walkers)
        x = np.array([wk.config for wk in walkers], dtype=np.int64)
        w = np.array([wk.weight for wk in walkers], dtype=float)
    if x.size == 0:
        raise ValueError("no walkers")
    sampler = _ColumnSampler(g)
    if np.any(x >= sampler.colsum.shape[0]):
        raise ValueError("walker configuration outside the basis")
    n_walk = x.size
    kept = n_steps - equilibration
    if kept < 1:
        raise ValueError("equilibration consumes every step")
    configs = np.empty((kept, n_walk), dtype=np.int64)
    weights = np.empty((kept, n_walk))
    log_factors = np.empty(n_steps)
    frozen = 0
    for k in range(n_steps):
        x, cs = sampler.step(x, rng)
        w = w * cs
        dead = cs == 0
        if dead.any():
            frozen = max(frozen, int(dead.sum()))
        rec = k - equilibration
        if rec >= 0:
            configs[rec] = x
            weights[rec] = w
        total = np.abs(w).sum()
        if not total > 0:
            raise GFMCError("every walker weight vanished (isolated configurations)")
        factor = total / n_walk
        if population_control_on:
            x, w = population_control(x, w, n_walk, rng)
        w = w / factor
        log_factors[k] = math.log(factor)
    if frozen:
        log.warning("%d walkers sat on zero-sum columns and were frozen with weight 0", frozen)
    return Trajectory(configs, weights, log_factors, equilibration, frozen)


# --- trial states ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrialStateHandle:
    """Trial weights over the basis.

    ``row[x]`` is the quantity whose conjugate enters the estimator denominator:
    ``<phi_T|x>`` for a classical vector, ``Tr[rho_T |x><phi_ref|]`` for a
    quantum trial (times an irrelevant common phase).
    """

    kind: str
    row: np.ndarray
    description: object = None
    reference: np.ndarray | None = None
    note: str = ""

    @classmethod
    def classical(cls, amplitudes) -> "TrialStateHandle":
        a = np.asarray(amplitudes, dtype=complex).ravel()
        if not np.all(np.isfinite(a)) or not np.any(a):
            raise ValueError("trial vector must be finite and nonzero")
        return cls("classical", a)

    @classmethod
    def uniform(cls, dim: int) -> "TrialStateHandle":
        return cls.classical(np.ones(dim))

    @classmethod
    def quantum(
        cls, description, basis, reference, rho: np.ndarray | None = None,
        scheme: str = "jw", min_overlap: float = 1e-8,
    ) -> "TrialStateHandle":
        """Trial from a solved QSD run.

        By default ``rho_T = |phi_T><phi_T|`` with ``phi_T`` assembled from the
        simulated Krylov states; ``rho`` overrides it with any register density
        matrix in the occupation-number basis. ``reference`` is a vector over
        ``basis``. If it barely overlaps the trial, the run's initial state
        (restricted to the basis) is used instead.
        """
        configs = np.asarray(basis.states if hasattr(basis, "states") else basis, dtype=np.int64)
        if rho is None:
            phi_t = occupation_amplitudes(description.state(), scheme)
            dim_reg = phi_t.shape[0]

            def rho_dag(v):
                return phi_t * np.vdot(phi_t, v)
        else:
            dim_reg = rho.shape[0]

            def rho_dag(v):
                return rho.conj().T @ v

        def embed(v) -> np.ndarray:
            reg = np.zeros(dim_reg, dtype=complex)
            reg[configs] = v
            return reg

        # D(x) = Tr[rho_T |x><ref|] = <ref|rho_T|x> = conj((rho_T^dag ref)(x))
        ref = np.asarray(reference, dtype=complex)
        row = rho_dag(embed(ref))[configs]
        note = ""
        if np.linalg.norm(row) < min_overlap:
            if description is None:
                raise GFMCError("reference has no overlap with the trial state")
            run_phi = description.chain.runs[len(description.runs) - 1].phi
            ref = occupation_amplitudes(run_phi, scheme)[configs]
            row = rho_dag(embed(ref))[configs]
            note = "reference switched to the subspace initial state"
            if np.linalg.norm(row) < min_overlap:
                raise GFMCError("neither reference overlaps the trial state")
        return cls("quantum", row, description, ref, note)


def _estimator_terms(h: SparseHamiltonian, trial: TrialStateHandle) -> tuple[np.ndarray, np.ndarray]:
    """Per-configuration numerator ``<T|H|x>`` and denominator ``<T|x>``."""
    row = trial.row
    if row.shape[0] != h.dim:
        raise ValueError("trial vector and Hamiltonian sizes differ")
    num = np.conj(h.matrix.T @ row)  # <T|H|x> = conj(sum_y H_yx T_y) for real H
    return num, np.conj(row)


# --- estimator -------------------------------------------------------------


def _step_weights(t: Trajectory, history: int) -> np.ndarray:
    """Log of the product of the ``history`` global factors preceding each recorded step."""
    c = np.concatenate([[0.0], np.cumsum(t.log_factors)])
    k = t.equilibration + np.arange(t.n_steps)
    # the factor removed after step j scales every later step
    return c[k] - c[np.maximum(k - history, 0)]


def blocking_ratio(a: np.ndarray, b: np.ndarray, min_blocks: int = MIN_BLOCKS) -> tuple[complex, float, list]:
    """Ratio ``sum a / sum b`` with a jackknife error over doubling block sizes.

    Returns the largest error among levels with at least ``min_blocks`` blocks
    (the plateau estimate for correlated series) and the per-level table.
    """
    n = len(a)
    table = []
    size = 1
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = a.sum() / b.sum()
        while n // size >= min(min_blocks, n):
            nb = n // size
            A = a[: nb * size].reshape(nb, size).sum(axis=1)
            B = b[: nb * size].reshape(nb, size).sum(axis=1)
            if nb < 2:
                break
            jk = ((A.sum() - A) / (B.sum() - B)).real
            err = math.sqrt((nb - 1) / nb * np.sum((jk - jk.mean()) ** 2))
            table.append({"block": size, "n_blocks": nb, "stderr": err})
            size *= 2
    err = max((t["stderr"] for t in table), default=float("inf"))
    return ratio, err, table


def _blocked_mean(x: np.ndarray, min_blocks: int = MIN_BLOCKS) -> tuple[float, float]:
    n = len(x)
    err = 0.0
    size = 1
    while n // size >= min(min_blocks, n) and n // size >= 2:
        nb = n // size
        blocks = x[: nb * size].reshape(nb, size).mean(axis=1)
        err = max(err, float(np.std(blocks, ddof=1) / math.sqrt(nb)))
        size *= 2
    return float(x.mean()), err


def mixed_energy(
    h: SparseHamiltonian, trial: TrialStateHandle, trajectory: Trajectory | Sequence[Trajectory],
    history: int = 20, sigmas: float = RELIABILITY_SIGMAS, warn: bool = True,
) -> EnergyEstimate:
    """Mixed estimator over the recorded steps of one or more populations."""
    trajs = [trajectory] if isinstance(trajectory, Trajectory) else list(trajectory)
    num_x, den_x = _estimator_terms(h, trial)
    a = np.zeros(trajs[0].n_steps, dtype=complex)
    b = np.zeros(trajs[0].n_steps, dtype=complex)
    lws = [_step_weights(t, history) for t in trajs]
    top = max(lw.max() for lw in lws)
    for t, lw in zip(trajs, lws):
        if t.n_steps != len(a):
            raise ValueError("populations recorded different step counts")
        scale = np.exp(lw - top)
        a += scale * np.einsum("kw,kw->k", t.weights, num_x[t.configs])
        b += scale * np.einsum("kw,kw->k", t.weights, den_x[t.configs])
    ratio, err, table = blocking_ratio(a, b)
    # project out the common phase of the denominator before testing it
    phase = np.exp(-1j * np.angle(b.sum())) if b.sum() != 0 else 1.0
    d_real = (b * phase).real / len(trajs)
    d_mean, d_err = _blocked_mean(d_real)
    reliable = bool(abs(d_mean) > sigmas * d_err) and math.isfinite(err)
    samples = sum(t.n_samples for t in trajs)
    level = max(table, key=lambda t: t["stderr"])["block"] if table else 0
    note = f"blocking plateau at block size {level} steps over {len(a)} recorded steps"
    if not reliable and warn:
        log.warning("denominator accumulator within %.0f sigma of zero; estimate flagged unreliable", sigmas)
    return EnergyEstimate(
        value=float(ratio.real), stderr=float(err), n_samples=samples, autocorrelation_note=note,
        reliable=reliable, imag=float(ratio.imag), blocks=table,
        denominator=(float(d_mean), float(d_err)), frozen_walkers=sum(t.frozen for t in trajs),
    )


def walk_populations(h: SparseHamiltonian, params: FixedNodeParams, initial: np.ndarray | None = None) -> list[Trajectory]:
    """Propagate ``params.n_populations`` independent populations under ``G^fn``.

    The walk never looks at a trial state, so one set of trajectories can score
    any number of trials. Populations get independent substreams of ``params.seed``.
    """
    params = params.resolved(h)
    initial = np.ones(h.dim) if initial is None else np.asarray(initial)
    if initial.shape[0] != h.dim:
        raise ValueError("initial vector and Hamiltonian sizes differ")
    g = fixed_node_green(h, params)
    eq = params.equilibration_steps()
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_populations)
    per_pop = max(1, params.n_walkers // params.n_populations)

    def one(seq):
        rng = np.random.default_rng(seq)
        walkers = initial_walkers(initial, per_pop, rng)
        return propagate(g, walkers, params.n_steps, rng, eq, params.population_control)

    if params.n_populations > 1:
        from joblib import Parallel, delayed

        return Parallel(n_jobs=params.n_populations, prefer="threads")(delayed(one)(s) for s in seeds)
    return [one(seeds[0])]


def run_fngfmc(
    h: SparseHamiltonian, params: FixedNodeParams, trial: TrialStateHandle | None = None,
    initial: np.ndarray | None = None, return_trajectory: bool = False,
):
    """Build ``G^fn``, walk with population control, and return the mixed estimate.

    ``trial`` defaults to the uniform vector and ``initial`` to the uniform distribution.
    """
    params = params.resolved(h)
    trial = trial or TrialStateHandle.uniform(h.dim)
    trajs = walk_populations(h, params, initial)
    est = mixed_energy(h, trial, trajs, params.history)
    return (est, trajs) if return_trajectory else est


def write_energy_report(path: str | Path, est: EnergyEstimate, extra: dict | None = None) -> None:
    d = asdict(est)
    d["reliability_checks"] = {"denominator_nonzero": est.reliable, "frozen_walkers": est.frozen_walkers}
    if extra:
        d.update(extra)
    Path(path).write_text(json.dumps(d, indent=2) + "\n", encoding="utf-8")
