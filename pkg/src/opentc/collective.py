"""Cavity-eliminated collective model and closed-form correlation results.

When the cavity decay dominates, the mode is eliminated and reappears as a
collective decay channel for the emitters at rate Gamma = 4 g^2 / kappa.
This module builds that reduced generator (in the bare emitter basis or in
the coupled |J, M> basis), constructs the coupled basis itself by recursive
angular-momentum addition, and evaluates the closed-form results for the
two- and three-emitter bunching and for independent emitters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp

from .errors import SpaceMismatchError
from .liouville import Superoperator, dissipator
from .operators import (
    CompositeSpace,
    SparseOperator,
    build_space,
    collective_op,
    emitter_op,
)

#: Px/Gamma above which the weak-pump expansions degrade noticeably
WEAK_PUMP_VALIDITY = 0.1


@dataclass(frozen=True)
class CoupledSpace:
    """Emitter space expressed in the coupled |J, M; copy> basis."""

    n_emitters: int

    @property
    def dim(self) -> int:
        return 2**self.n_emitters


@dataclass(frozen=True)
class CoupledState:
    """Label of one coupled-basis vector: total dipole J, projection M,
    and the 1-based index of the permutation-representation copy."""

    J: float
    M: float
    perm_index: int


@dataclass(frozen=True)
class ReducedParams:
    """Rates of the cavity-eliminated model."""

    n_emitters: int
    Gamma: float
    gamma: float = 0.0
    pump_px: float = 0.0
    dephasing: float = 0.0
    kappa: float | None = None  # retained when derived from the full model

    def __post_init__(self):
        if self.n_emitters < 1:
            raise ValueError("n_emitters must be >= 1")
        if self.Gamma <= 0:
            raise ValueError(f"Gamma must be positive, got {self.Gamma}")
        for name in ("gamma", "pump_px", "dephasing"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def adiabatic_valid(self) -> bool | None:
        """Whether kappa >> N Gamma holds (None when kappa is unknown)."""
        if self.kappa is None:
            return None
        return self.kappa >= 10.0 * self.n_emitters * self.Gamma

    @classmethod
    def from_system(cls, params) -> "ReducedParams":
        """Derive the collective rate from full-model parameters.

        Warns when kappa is not safely above N * Gamma, where eliminating
        the cavity stops being a controlled approximation.
        """
        if params.kappa <= 0:
            raise ValueError("cavity elimination needs kappa > 0")
        gamma_coll = 4.0 * params.coupling_g**2 / params.kappa
        rp = cls(n_emitters=params.n_emitters, Gamma=gamma_coll, gamma=params.gamma,
                 pump_px=params.pump_px, dephasing=params.dephasing, kappa=params.kappa)
        if not rp.adiabatic_valid:
            warnings.warn(
                f"adiabatic elimination marginal: kappa={params.kappa:g} is below "
                f"10*N*Gamma={10 * rp.n_emitters * gamma_coll:g}",
                stacklevel=2,
            )
        return rp


def emitter_space(n_emitters: int) -> CompositeSpace:
    """The 2^N emitter-only space (a composite space with no photon levels)."""
    return build_space(n_emitters, 0)


def degeneracy(N: int, J: float) -> int:
    """Number of permutation-representation copies of total dipole J for N spins."""
    two_j = int(round(2 * J))
    if abs(2 * J - two_j) > 1e-12 or two_j < 0 or two_j > N or (N - two_j) % 2 != 0:
        raise ValueError(f"J={J} is not an admissible total dipole for N={N}")
    k = (N - two_j) // 2
    d = comb(N, k) - (comb(N, k - 1) if k >= 1 else 0)
    return d


def _couple_one_spin(blocks: list[tuple[int, np.ndarray]], position: int
                     ) -> list[tuple[int, np.ndarray]]:
    """Clebsch-Gordan step: add the spin at bit ``position`` to every block.

    Blocks are (2J, columns) with columns ordered M = +J ... -J; vectors are
    indexed by emitter bit patterns of the spins coupled so far.
    """
    out: list[tuple[int, np.ndarray]] = []
    for two_j1, cols in blocks:
        dim_old = cols.shape[0]
        dim_new = 2 * dim_old
        bit = 1 << position

        def embed(column: np.ndarray, excited: bool) -> np.ndarray:
            vec = np.zeros(dim_new)
            idx = np.arange(dim_old)
            vec[idx + (bit if excited else 0)] = column
            return vec

        def old(two_m: int) -> np.ndarray:
            # column for projection m of the parent block, or 0 beyond |J|
            if abs(two_m) > two_j1:
                return np.zeros(dim_old)
            return cols[:, (two_j1 - two_m) // 2]

        denom = 2.0 * (two_j1 + 1)
        for two_j, up in (((two_j1 + 1), True), ((two_j1 - 1), False)):
            if two_j < 0:
                continue
            new_cols = np.zeros((dim_new, two_j + 1))
            for col_idx, two_m in enumerate(range(two_j, -two_j - 2, -2)):
                c_up = np.sqrt((two_j1 + two_m + 1) / denom)
                c_dn = np.sqrt((two_j1 - two_m + 1) / denom)
                if not up:
                    c_up, c_dn = -c_dn, c_up
                new_cols[:, col_idx] = (
                    c_up * embed(old(two_m - 1), excited=True)
                    + c_dn * embed(old(two_m + 1), excited=False)
                )
            out.append((two_j, new_cols))
    return out


@lru_cache(maxsize=16)
def _coupled_basis_cached(N: int) -> tuple[tuple[CoupledState, ...], np.ndarray]:
    blocks = [(1, np.array([[0.0, 1.0], [1.0, 0.0]]))]  # single spin: M=+1/2 -> |e> = bit 1
    for position in range(1, N):
        blocks = _couple_one_spin(blocks, position)

    # highest J first; copies keep their production order (stable sort)
    blocks.sort(key=lambda block: -block[0])

    flip = (2**N - 1) ^ np.arange(2**N)  # global e<->g mirror of bit patterns
    copy_counter: dict[int, int] = {}
    states: list[CoupledState] = []
    columns: list[np.ndarray] = []
    for two_j, cols in blocks:
        copy_counter[two_j] = copy_counter.get(two_j, 0) + 1
        perm_index = copy_counter[two_j]
        for col_idx, two_m in enumerate(range(two_j, -two_j - 2, -2)):
            if two_m < 0:
                # negative projections as the mirror of the positive ones;
                # this is the convention the closed-form results are quoted in
                column = cols[:, (two_j - (-two_m)) // 2][flip]
            else:
                column = cols[:, col_idx]
            states.append(CoupledState(J=two_j / 2.0, M=two_m / 2.0, perm_index=perm_index))
            columns.append(column)
    U = np.column_stack(columns).astype(np.complex128)
    return tuple(states), U


def coupled_basis(N: int, max_emitters: int = 12
                  ) -> tuple[list[CoupledState], np.ndarray]:
    """Ordered coupled basis of N spins and the unitary from the bare basis.

    Column k of the returned matrix is the coupled state ``states[k]``
    expressed over emitter bit patterns.  Emitters are added to the coupling
    chain in index order, so the copy numbering is deterministic.  The dense
    2^N x 2^N transformation caps N.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > max_emitters:
        raise ValueError(f"coupled basis capped at N={max_emitters} (dense 2^N transformation)")
    states, U = _coupled_basis_cached(N)
    return list(states), U.copy()


@lru_cache(maxsize=16)
def coupled_collective_ops(space: CoupledSpace) -> tuple[SparseOperator, SparseOperator]:
    """(J+J-, J+J+J-J-) expressed in the coupled basis."""
    N = space.n_emitters
    _, U = _coupled_basis_cached(N)
    bare = emitter_space(N)
    jm = collective_op(bare, "J_minus").to_array()
    jp = jm.conj().T
    n_j = U.conj().T @ (jp @ jm) @ U
    moment = U.conj().T @ (jp @ jp @ jm @ jm) @ U
    return (SparseOperator(space, sp.csc_matrix(n_j)),
            SparseOperator(space, sp.csc_matrix(moment)))


def reduced_jump_operators(rp: ReducedParams, basis: str = "uncoupled"
                           ) -> list[tuple[str, SparseOperator]]:
    """Scaled collapse operators of the reduced model, tagged by channel name."""
    bare = emitter_space(rp.n_emitters)
    ops: list[tuple[str, SparseOperator]] = []
    ops.append(("collective", np.sqrt(rp.Gamma) * collective_op(bare, "J_minus")))
    for i in range(rp.n_emitters):
        ops.append((f"decay_{i}", np.sqrt(rp.gamma) * emitter_op(bare, i, "lower")))
        ops.append((f"pump_{i}", np.sqrt(rp.pump_px) * emitter_op(bare, i, "raise")))
        ops.append((f"dephase_{i}", np.sqrt(rp.dephasing / 2.0) * emitter_op(bare, i, "z")))
    if basis == "uncoupled":
        return ops
    if basis != "coupled":
        raise ValueError(f"unknown basis {basis!r}")
    space = CoupledSpace(rp.n_emitters)
    _, U = _coupled_basis_cached(rp.n_emitters)
    return [
        (name, SparseOperator(space, sp.csc_matrix(U.conj().T @ op.to_array() @ U)))
        for name, op in ops
    ]


def build_reduced_liouvillian(rp: ReducedParams, basis: str = "uncoupled") -> Superoperator:
    """Generator of the cavity-eliminated master equation.

    ``basis`` selects the representation ("uncoupled" emitter bit patterns or
    the "coupled" |J, M> basis); both give the same physics and are checked
    against each other in the test suite.
    """
    jumps = reduced_jump_operators(rp, basis=basis)
    space = jumps[0][1].space
    total = None
    for _, op in jumps:
        term = dissipator(op, 1.0)  # rates are already inside the scaled operators
        total = term if total is None else total + term
    assert total is not None
    return Superoperator(space, total.data)


# ---------------------------------------------------------------------------
# closed-form results
# ---------------------------------------------------------------------------

def _warn_weak_pump(Gamma: float, Px: float):
    if Px / Gamma > WEAK_PUMP_VALIDITY:
        warnings.warn(
            f"weak-pump expansion used at Px/Gamma = {Px / Gamma:.3g} > "
            f"{WEAK_PUMP_VALIDITY}; accuracy degrades",
            stacklevel=3,
        )


def analytic_g2_two(Gamma: float, Px: float, order: str = "leading") -> float:
    """Closed-form bunching of two emitters in the weak-pump collective regime.

    ``leading`` is (4/9) Gamma/Px; ``series`` adds the constant and the
    first subleading correction, 13/27 - (2/27) Px/Gamma.
    """
    if Px <= 0 or Gamma <= 0:
        raise ValueError("Gamma and Px must be positive")
    _warn_weak_pump(Gamma, Px)
    leading = (4.0 / 9.0) * Gamma / Px
    if order == "leading":
        return leading
    if order == "series":
        return leading + 13.0 / 27.0 - (2.0 / 27.0) * Px / Gamma
    raise ValueError(f"unknown order {order!r}")


@dataclass(frozen=True)
class ThreeEmitterPopulations:
    """Steady-state coupled-basis populations for three emitters, weak pump.

    Ratios are relative to the ground state |3/2, -3/2>; each of the two
    J = 1/2 permutation copies carries the same population.  ``rho_32_m32``
    normalizes the trace (copies counted twice).
    """

    ratio_32_p32: float
    ratio_32_p12: float
    ratio_32_m12: float
    ratio_12_p12: float
    ratio_12_m12: float
    rho_32_m32: float

    def populations(self) -> dict[tuple[float, float], float]:
        """Absolute populations keyed by (J, M); J = 1/2 entries are per copy."""
        base = self.rho_32_m32
        return {
            (1.5, 1.5): self.ratio_32_p32 * base,
            (1.5, 0.5): self.ratio_32_p12 * base,
            (1.5, -0.5): self.ratio_32_m12 * base,
            (1.5, -1.5): base,
            (0.5, 0.5): self.ratio_12_p12 * base,
            (0.5, -0.5): self.ratio_12_m12 * base,
        }


def analytic_n3_populations(Gamma: float, Px: float) -> ThreeEmitterPopulations:
    """Steady-state populations of the three-emitter collective cascade.

    Solves the weak-pump rate hierarchy of the collective decay at rate
    Gamma against pumping at Px, neglecting coherences between copies.
    """
    if Px <= 0 or Gamma <= 0:
        raise ValueError("Gamma and Px must be positive")
    _warn_weak_pump(Gamma, Px)
    x = Px / Gamma
    r_m12 = x
    r_p12 = x * (x + 2.0) / 4.0
    r_half_p = x * (2.0 * x + 5.0) / (1.0 + 6.0 * x)
    r_half_m = (4.0 * x + 3.0) / (1.0 + 6.0 * x)
    r_p32 = x**2 * (42.0 + 29.0 * x + 6.0 * x**2) / (12.0 * (1.0 + 6.0 * x))
    base = 12.0 * (1.0 + 6.0 * x) / (
        84.0 + 306.0 * x + 201.0 * x**2 + 47.0 * x**3 + 6.0 * x**4
    )
    return ThreeEmitterPopulations(
        ratio_32_p32=r_p32,
        ratio_32_p12=r_p12,
        ratio_32_m12=r_m12,
        ratio_12_p12=r_half_p,
        ratio_12_m12=r_half_m,
        rho_32_m32=base,
    )


def g2_from_n3_populations(pops: ThreeEmitterPopulations) -> float:
    """Collective zero-delay correlation from three-emitter populations.

    Ladder matrix elements give <J+J+J-J-> = 12 (rho_{3/2,3/2} + rho_{3/2,1/2})
    and <J+J-> = 3 rho_{3/2,3/2} + 4 rho_{3/2,1/2} + 3 rho_{3/2,-1/2}
    + rho_{1/2,1/2;1} + rho_{1/2,1/2;2}.
    """
    p = pops.populations()
    numerator = 12.0 * (p[(1.5, 1.5)] + p[(1.5, 0.5)])
    intensity = (3.0 * p[(1.5, 1.5)] + 4.0 * p[(1.5, 0.5)] + 3.0 * p[(1.5, -0.5)]
                 + 2.0 * p[(0.5, 0.5)])
    return numerator / intensity**2


def analytic_g2_three(Gamma: float, Px: float) -> float:
    """Closed-form bunching of three emitters in the weak-pump collective regime.

    Evaluates the exact rational function of Px/Gamma; its expansion is
    (14/75) Gamma/Px + 2.067 - 3.501 Px/Gamma + 9.18 (Px/Gamma)^2
    - 23.4 (Px/Gamma)^3 + ...
    """
    return g2_from_n3_populations(analytic_n3_populations(Gamma, Px))


def independent_emitter_g2(N: int, model: str = "quantum") -> float:
    """Zero-delay correlation of N independent single-photon emitters.

    ``quantum`` keeps first-order interference between distinct emitters,
    ``dephased`` drops it (particle-like limit), ``classical_bound`` is the
    lowest value classical fields allow.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if model == "quantum":
        return 2.0 * (1.0 - 1.0 / N)
    if model == "dephased":
        return 1.0 - 1.0 / N
    if model == "classical_bound":
        return 2.0 - 1.0 / N
    raise ValueError(f"unknown model {model!r}")


def independent_g2_tau(intensities, g1_values, g2_values) -> float:
    """Delayed correlation of a factorized ensemble of emitters.

    Combines per-emitter intensities I_i, first-order coherences g1_i(tau)
    and second-order correlations g2_i(tau) into the ensemble value
    [sum_i g2_i I_i^2 + sum_{i != k} I_i I_k (1 + g1_i* g1_k)] / (sum_i I_i)^2.
    """
    I = np.asarray(intensities, dtype=float)
    g1 = np.asarray(g1_values, dtype=np.complex128)
    g2 = np.asarray(g2_values, dtype=float)
    if not (len(I) == len(g1) == len(g2)):
        raise ValueError("intensities, g1_values and g2_values must have equal length")
    if np.any(I <= 0):
        raise ValueError("intensities must be positive")
    weighted_g1 = I * g1
    cross = np.sum(I) ** 2 - np.sum(I**2)                       # sum_{i != k} I_i I_k
    interference = np.abs(np.sum(weighted_g1)) ** 2 - np.sum(np.abs(weighted_g1) ** 2)
    numerator = np.sum(g2 * I**2) + cross + interference
    return float(numerator / np.sum(I) ** 2)
