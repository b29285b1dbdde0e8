"""Quantum-trajectory unraveling of the master equation.

Waiting-time algorithm: a uniform threshold r is drawn, the state evolves
under the non-Hermitian effective Hamiltonian until its squared norm hits r,
a collapse channel is selected with probability proportional to its weight,
and the cycle repeats.  Because the effective Hamiltonian is time
independent, the no-jump propagation is done through its eigendecomposition,
which keeps the cost per jump independent of how widely the rates are
separated; the threshold crossing itself is located by a guarded
secant/bisection iteration.

Every trajectory owns an independent counter-based random stream keyed by
(seed, trajectory index), so results are reproducible bit for bit no matter
how trajectories are distributed over workers.
"""

from __future__ import annotations

import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .collective import ReducedParams, emitter_space, reduced_jump_operators
from .errors import (
    InsufficientSamplesError,
    IntegrationError,
    SpaceMismatchError,
)
from .liouville import build_hamiltonian
from .observables import INTENSITY_FLOOR
from .operators import (
    CompositeSpace,
    SparseOperator,
    SystemParams,
    basis_ket,
    cavity_op,
    collective_op,
    emitter_op,
    identity,
)

Params = Union[SystemParams, ReducedParams]


@dataclass(frozen=True)
class TrajectoryConfig:
    """Ensemble size, time window and randomness of a trajectory run."""

    n_trajectories: int
    t_total: float
    sample_interval: float
    t_burn_in: float = 0.0
    seed: int = 0
    jump_tolerance: float = 1e-12

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if not self.t_total > self.t_burn_in >= 0:
            raise ValueError("need t_total > t_burn_in >= 0")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")
        if self.jump_tolerance <= 0:
            raise ValueError("jump_tolerance must be positive")

    def sample_times(self) -> np.ndarray:
        count = int(np.floor((self.t_total - self.t_burn_in) / self.sample_interval)) + 1
        return self.t_burn_in + self.sample_interval * np.arange(count)


def default_trajectory_config(params: Params, seed: int = 0,
                              n_trajectories: int = 1000) -> TrajectoryConfig:
    """Config with the burn-in set to five times the slowest nonzero rate."""
    if isinstance(params, ReducedParams):
        rates = [params.Gamma, params.gamma, params.pump_px, params.dephasing]
    else:
        rates = [params.kappa, params.gamma, params.pump_px, params.dephasing]
    nonzero = [r for r in rates if r > 0]
    if not nonzero:
        raise ValueError("all rates vanish: no relaxation to average over")
    burn = 5.0 / min(nonzero)
    return TrajectoryConfig(
        n_trajectories=n_trajectories,
        t_total=5.0 * burn,
        sample_interval=burn / 10.0,
        t_burn_in=burn,
        seed=seed,
    )


@dataclass(frozen=True)
class EnsembleEstimate:
    """Ensemble averages with batch-means errors and the jump bookkeeping."""

    means: dict[str, float]
    std_errors: dict[str, float]
    effective_samples: dict[str, int]
    jump_counts: dict[str, int]
    observation_time: float
    n_trajectories: int

    def jump_rate(self, channel: str) -> float:
        """Post-burn-in jump rate of one collapse channel, per trajectory."""
        return self.jump_counts[channel] / (self.observation_time * self.n_trajectories)


@dataclass
class TrajectoryResult:
    """Sampled (normalized) states and the jump record of one trajectory."""

    sample_times: np.ndarray
    states: np.ndarray  # shape (n_samples, dim)
    jump_times: np.ndarray
    jump_channels: list[str]


def jump_operators(space: CompositeSpace, params: Params) -> list[tuple[str, SparseOperator]]:
    """Scaled collapse operators of the model; zero-rate channels are dropped."""
    if isinstance(params, ReducedParams):
        if space != emitter_space(params.n_emitters):
            raise SpaceMismatchError("reduced-model trajectories live on the emitter-only space")
        ops = reduced_jump_operators(params, basis="uncoupled")
    else:
        if space.n_emitters != params.n_emitters:
            raise SpaceMismatchError("space and parameters disagree on the emitter count")
        ops = [("cavity", np.sqrt(params.kappa) * cavity_op(space, "annihilate"))]
        for i in range(space.n_emitters):
            ops.append((f"decay_{i}", np.sqrt(params.gamma) * emitter_op(space, i, "lower")))
            ops.append((f"pump_{i}", np.sqrt(params.pump_px) * emitter_op(space, i, "raise")))
            ops.append((f"dephase_{i}",
                        np.sqrt(params.dephasing / 2.0) * emitter_op(space, i, "z")))
    return [(name, op) for name, op in ops if op.nnz > 0]


def effective_hamiltonian(space: CompositeSpace, params: Params) -> SparseOperator:
    """Non-Hermitian generator of the no-jump evolution, H - (i/2) sum C†C."""
    if isinstance(params, ReducedParams):
        h = 0.0 * identity(emitter_space(params.n_emitters))
    else:
        h = build_hamiltonian(space, params)
    for _, c in jump_operators(space, params):
        h = h - 0.5j * (c.dag() @ c)
    return h


class _Propagator:
    """Exact no-jump propagation of a time-independent effective Hamiltonian.

    Diagonalizes -i H_eff once; a Hermitian generator (pure decay, no
    coherent part) takes the unitary-eigenvector fast path.  An eigenbasis
    condition number beyond ~1e12 means the parameters sit essentially on a
    non-diagonalizable point and the propagation would be garbage, so that
    raises instead of silently degrading.
    """

    COND_ERROR = 1e12

    def __init__(self, h_eff: sp.csc_matrix):
        gen = -1j * h_eff.toarray()
        herm_defect = np.max(np.abs(gen - gen.conj().T)) if gen.size else 0.0
        scale = max(np.max(np.abs(gen)), 1.0)
        if herm_defect <= 1e-13 * scale:
            evals, vecs = np.linalg.eigh(0.5 * (gen + gen.conj().T))
            self.evals = evals.astype(np.complex128)
            self.vecs = vecs
            self.vecs_inv = vecs.conj().T
        else:
            evals, vecs = np.linalg.eig(gen)
            cond = np.linalg.cond(vecs)
            if cond > self.COND_ERROR:
                raise IntegrationError(
                    f"effective Hamiltonian is too close to non-diagonalizable "
                    f"(eigenbasis condition {cond:.2e}); perturb the parameters"
                )
            self.evals = evals
            self.vecs = vecs
            self.vecs_inv = np.linalg.inv(vecs)

    def coefficients(self, psi: np.ndarray) -> np.ndarray:
        return self.vecs_inv @ psi

    def state_at(self, coeff: np.ndarray, dt: float) -> np.ndarray:
        return self.vecs @ (np.exp(self.evals * dt) * coeff)

    def norm_sq(self, coeff: np.ndarray, dt: float) -> float:
        state = self.state_at(coeff, dt)
        return float(np.vdot(state, state).real)


def _find_crossing(norm_sq, threshold: float, t_window: float, ftol: float):
    """Time at which the squared norm first reaches the threshold, or None.

    The squared norm decreases monotonically under no-jump evolution, so a
    doubling bracket followed by secant steps guarded by bisection is enough.
    """
    f_end = norm_sq(t_window) - threshold
    if f_end > 0.0:
        return None
    lo, f_lo = 0.0, 1.0 - threshold
    hi = min(t_window, 1.0)
    f_hi = norm_sq(hi) - threshold
    while f_hi > 0.0:
        lo, f_lo = hi, f_hi
        hi = min(2.0 * hi, t_window)
        f_hi = norm_sq(hi) - threshold
    for _ in range(200):
        if abs(f_hi) <= ftol:
            return hi
        denom = f_hi - f_lo
        t = hi - f_hi * (hi - lo) / denom if denom != 0.0 else 0.5 * (lo + hi)
        if not lo < t < hi:
            t = 0.5 * (lo + hi)
        f_t = norm_sq(t) - threshold
        if abs(f_t) <= ftol or (hi - lo) <= 1e-15 * max(hi, 1.0):
            return t
        if f_t > 0.0:
            lo, f_lo = t, f_t
        else:
            hi, f_hi = t, f_t
    return 0.5 * (lo + hi)


@dataclass
class _Problem:
    propagator: _Propagator
    jump_names: list[str]
    jump_mats: list[sp.csc_matrix]
    psi0: np.ndarray
    dim: int


@lru_cache(maxsize=8)
def _build_problem(params: Params, space: CompositeSpace) -> _Problem:
    jumps = jump_operators(space, params)
    prop = _Propagator(effective_hamiltonian(space, params).data)
    psi0 = basis_ket(space, 0, ())
    return _Problem(
        propagator=prop,
        jump_names=[name for name, _ in jumps],
        jump_mats=[op.data for _, op in jumps],
        psi0=psi0,
        dim=space.dim,
    )


def _stream(seed: int, trajectory_index: int) -> np.random.Generator:
    key = np.array([seed, trajectory_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _simulate(problem: _Problem, config: TrajectoryConfig, trajectory_index: int,
              psi0: np.ndarray | None, collect):
    """Core waiting-time loop; ``collect(time, state, norm_sq)`` sees samples."""
    rng = _stream(config.seed, trajectory_index)
    prop = problem.propagator
    psi = problem.psi0.copy() if psi0 is None else np.asarray(psi0, dtype=np.complex128).copy()
    psi /= np.linalg.norm(psi)
    sample_times = config.sample_times()
    si = 0
    t = 0.0
    jump_times: list[float] = []
    jump_channels: list[int] = []
    has_jumps = len(problem.jump_mats) > 0
    threshold = rng.random()

    while t < config.t_total:
        coeff = prop.coefficients(psi)
        t_window = config.t_total - t
        dt_jump = None
        if has_jumps:
            dt_jump = _find_crossing(lambda dt: prop.norm_sq(coeff, dt), threshold,
                                     t_window, config.jump_tolerance)
        t_stop = t + (t_window if dt_jump is None else dt_jump)
        while si < len(sample_times) and sample_times[si] <= t_stop:
            state = prop.state_at(coeff, sample_times[si] - t)
            collect(sample_times[si], state, float(np.vdot(state, state).real))
            si += 1
        if dt_jump is None:
            break
        state = prop.state_at(coeff, dt_jump)
        weights = np.array([np.linalg.norm(m @ state) ** 2 for m in problem.jump_mats])
        total = weights.sum()
        if total <= 0.0:  # decay-free state reached exactly at threshold roundoff
            break
        pick = int(np.searchsorted(np.cumsum(weights) / total, rng.random(), side="right"))
        pick = min(pick, len(problem.jump_mats) - 1)
        psi = problem.jump_mats[pick] @ state
        psi /= np.linalg.norm(psi)
        t += dt_jump
        jump_times.append(t)
        jump_channels.append(pick)
        threshold = rng.random()

    return np.asarray(jump_times), jump_channels


def run_trajectory(params: Params, space: CompositeSpace, config: TrajectoryConfig,
                   trajectory_index: int, psi0: np.ndarray | None = None
                   ) -> TrajectoryResult:
    """Simulate one trajectory, recording sampled states and the jump record.

    ``psi0`` defaults to the fully de-excited state (vacuum, all emitters in
    the ground state).  Sampled states are normalized.
    """
    problem = _build_problem(params, space)
    sample_times = config.sample_times()
    states = np.zeros((len(sample_times), problem.dim), dtype=np.complex128)
    cursor = {"i": 0}

    def collect(_t, state, norm2):
        states[cursor["i"]] = state / np.sqrt(norm2)
        cursor["i"] += 1

    jump_times, channels = _simulate(problem, config, trajectory_index, psi0, collect)
    names = [problem.jump_names[c] for c in channels]
    return TrajectoryResult(
        sample_times=sample_times,
        states=states[: cursor["i"]],
        jump_times=jump_times,
        jump_channels=names,
    )


# ---------------------------------------------------------------------------
# ensemble estimation
# ---------------------------------------------------------------------------

#: base quantities backing each reported observable: name -> (numerator, denominator)
#: simple averages have no denominator; ratios are estimated as mean/mean**2
_OBSERVABLE_SPECS = {
    "n_a": ("n_a", None),
    "n_J": ("n_J", None),
    "total_nx": ("total_nx", None),
    "g2_cavity": ("aa_moment", "n_a"),
    "g2_collective": ("JJ_moment", "n_J"),
}


def _base_matrices(space: CompositeSpace, needed: list[str]) -> list[sp.csc_matrix]:
    a = cavity_op(space, "annihilate")
    jm = collective_op(space, "J_minus")
    jp = jm.dag()
    nx_total = emitter_op(space, 0, "population")
    for i in range(1, space.n_emitters):
        nx_total = nx_total + emitter_op(space, i, "population")
    table = {
        "n_a": lambda: cavity_op(space, "number"),
        "aa_moment": lambda: a.dag() @ a.dag() @ a @ a,
        "n_J": lambda: jp @ jm,
        "JJ_moment": lambda: jp @ jp @ jm @ jm,
        "total_nx": lambda: nx_total,
    }
    return [table[name]().data for name in needed]


# worker context inherited through fork so matrices and factors are shared
_WORKER: dict = {}


def _trajectory_averages(problem: _Problem, mats: Sequence[sp.csc_matrix],
                         config: TrajectoryConfig, k: int) -> tuple[np.ndarray, np.ndarray, int]:
    sums = np.zeros(len(mats))
    count = {"n": 0}

    def collect(_t, state, norm2):
        for j, m in enumerate(mats):
            sums[j] += float(np.vdot(state, m @ state).real) / norm2
        count["n"] += 1

    jump_times, channels = _simulate(problem, config, k, None, collect)
    post_burn = jump_times >= config.t_burn_in
    jump_counts = np.zeros(len(problem.jump_names), dtype=np.int64)
    for idx, keep in zip(channels, post_burn):
        if keep:
            jump_counts[idx] += 1
    if count["n"] == 0:
        raise InsufficientSamplesError("trajectory produced no samples; widen the time window")
    return sums / count["n"], jump_counts, count["n"]


def _worker_run(k: int):
    return _trajectory_averages(_WORKER["problem"], _WORKER["mats"], _WORKER["config"], k)


def _worker_init(problem, mats, config):
    _WORKER["problem"] = problem
    _WORKER["mats"] = mats
    _WORKER["config"] = config


def estimate_steady(params: Params, space: CompositeSpace, config: TrajectoryConfig,
                    observables: Sequence[str], n_workers: int | None = None
                    ) -> EnsembleEstimate:
    """Ergodic time-plus-ensemble averages of the requested observables.

    Each trajectory contributes one time-averaged batch; means and standard
    errors come from the batch spread, with ratio observables (the
    correlation functions) estimated as a ratio of means and their errors by
    the delta method.  Results are deterministic functions of the seed alone:
    trajectory k draws from a counter-based stream keyed by (seed, k) and the
    reduction runs in index order.
    """
    for name in observables:
        if name not in _OBSERVABLE_SPECS:
            raise ValueError(f"unknown observable {name!r}")
    if config.n_trajectories < 10:
        raise InsufficientSamplesError(
            f"insufficient samples: {config.n_trajectories} trajectories give fewer than "
            f"10 effective batches"
        )

    base_names: list[str] = []
    for name in observables:
        num, den = _OBSERVABLE_SPECS[name]
        for q in (num, den):
            if q is not None and q not in base_names:
                base_names.append(q)

    problem = _build_problem(params, space)
    mats = _base_matrices(space, base_names)

    n_traj = config.n_trajectories
    if n_workers is None or n_workers <= 1:
        rows = [_trajectory_averages(problem, mats, config, k) for k in range(n_traj)]
    else:
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=n_workers, mp_context=ctx,
                                 initializer=_worker_init,
                                 initargs=(problem, mats, config)) as pool:
            chunk = max(1, n_traj // (4 * n_workers))
            rows = list(pool.map(_worker_run, range(n_traj), chunksize=chunk))

    batch = np.vstack([row[0] for row in rows])  # (n_traj, n_base)
    jump_totals = np.sum([row[1] for row in rows], axis=0)
    col = {name: i for i, name in enumerate(base_names)}

    means: dict[str, float] = {}
    errors: dict[str, float] = {}
    ess: dict[str, int] = {}
    for name in observables:
        num, den = _OBSERVABLE_SPECS[name]
        x = batch[:, col[num]]
        if den is None:
            means[name] = float(x.mean())
            spread = float(x.std(ddof=1)) if n_traj > 1 else 0.0
            errors[name] = spread / np.sqrt(n_traj)
        else:
            y = batch[:, col[den]]
            y_mean = float(y.mean())
            if y_mean <= INTENSITY_FLOOR:
                means[name] = float("nan")
                errors[name] = float("nan")
            else:
                x_mean = float(x.mean())
                means[name] = x_mean / y_mean**2
                cov = np.cov(x, y, ddof=1) / n_traj
                dx = 1.0 / y_mean**2
                dy = -2.0 * x_mean / y_mean**3
                var = dx * dx * cov[0, 0] + 2.0 * dx * dy * cov[0, 1] + dy * dy * cov[1, 1]
                errors[name] = float(np.sqrt(max(var, 0.0)))
        ess[name] = n_traj

    return EnsembleEstimate(
        means=means,
        std_errors=errors,
        effective_samples=ess,
        jump_counts={name: int(jump_totals[i]) for i, name in enumerate(problem.jump_names)},
        observation_time=config.t_total - config.t_burn_in,
        n_trajectories=n_traj,
    )
