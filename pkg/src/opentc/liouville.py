"""Lindblad superoperator assembly and solvers.

Density matrices are vectorized by column stacking, so A rho B maps to
(B^T ⊗ A) vec(rho).  The steady state is obtained by replacing one row of
the Liouvillian with the trace constraint and solving the resulting sparse
system directly; positivity is checked, never enforced, because a projected
state would hide truncation bugs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import (
    CutoffConvergenceError,
    IntegrationError,
    NonUniqueSteadyStateError,
    SpaceMismatchError,
    SpaceTooLargeError,
    StateValidationError,
    SteadyStateConvergenceError,
)
from .operators import (
    DEFAULT_VEC_ENTRY_CAP,
    CompositeSpace,
    SparseOperator,
    Space,
    SystemParams,
    build_space,
    cavity_op,
    collective_op,
    emitter_op,
)

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = -1e-8


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Sparse linear map on column-stacked density matrices."""

    space: Space
    data: sp.csc_matrix = field(repr=False)

    def __post_init__(self):
        d2 = self.space.dim**2
        if self.data.shape != (d2, d2):
            raise SpaceMismatchError(
                f"superoperator shape {self.data.shape} does not match dim^2={d2}"
            )

    def __add__(self, other: "Superoperator") -> "Superoperator":
        if self.space != other.space:
            raise SpaceMismatchError("superoperator spaces differ")
        return Superoperator(self.space, (self.data + other.data).tocsc())

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Action on a density matrix, returned as a matrix."""
        d = self.space.dim
        return (self.data @ rho.reshape(-1, order="F")).reshape((d, d), order="F")

    def trace_defect(self) -> float:
        """|vec(1)† L| relative to |L|; zero for a trace-preserving map."""
        d = self.space.dim
        trace_vec = np.zeros(d * d, dtype=np.complex128)
        trace_vec[np.arange(d) * (d + 1)] = 1.0
        left = self.data.conj().T @ trace_vec
        norm_l = spla.norm(self.data)
        return float(np.linalg.norm(left) / norm_l) if norm_l > 0 else 0.0


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace state on a tagged space."""

    space: Space
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=np.complex128))
        if self.matrix.shape != (self.space.dim, self.space.dim):
            raise SpaceMismatchError(
                f"matrix shape {self.matrix.shape} does not match space dim {self.space.dim}"
            )

    def validate(self) -> "DensityMatrix":
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if herm > HERMITICITY_TOL:
            raise StateValidationError(f"Hermiticity violation {herm:.2e}")
        tr = np.trace(self.matrix)
        if abs(tr - 1.0) > TRACE_TOL:
            raise StateValidationError(f"trace {tr} deviates from 1")
        min_eig = float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())
        if min_eig < POSITIVITY_TOL:
            raise StateValidationError(f"negative eigenvalue {min_eig:.2e}")
        return self

    def vec(self) -> np.ndarray:
        return self.matrix.reshape(-1, order="F")


def pure_state(space: Space, ket: np.ndarray) -> DensityMatrix:
    ket = np.asarray(ket, dtype=np.complex128)
    ket = ket / np.linalg.norm(ket)
    return DensityMatrix(space, np.outer(ket, ket.conj()))


def spre(A: SparseOperator) -> sp.csc_matrix:
    return sp.kron(sp.identity(A.space.dim, format="csc"), A.data, format="csc")


def spost(B: SparseOperator) -> sp.csc_matrix:
    return sp.kron(B.data.T, sp.identity(B.space.dim, format="csc"), format="csc")


def sandwich(A: SparseOperator, B: SparseOperator) -> sp.csc_matrix:
    return sp.kron(B.data.T, A.data, format="csc")


def build_hamiltonian(space: CompositeSpace, params: SystemParams) -> SparseOperator:
    """Tavis-Cummings interaction i g (a J+ - J- a†) in the rotating frame.

    Working in the frame rotating at the common transition frequency removes
    the bare-energy terms, which carry no observable content on resonance.
    """
    a = cavity_op(space, "annihilate")
    j_plus = collective_op(space, "J_plus")
    coupling = a @ j_plus
    return 1j * params.coupling_g * (coupling - coupling.dag())


def dissipator(C: SparseOperator, rate: float) -> Superoperator:
    """Lindblad dissipator (rate/2)(2 C rho C† - C†C rho - rho C†C)."""
    if rate < 0:
        raise ValueError(f"dissipator rate must be nonnegative, got {rate}")
    cdc = C.dag() @ C
    data = (rate / 2.0) * (2.0 * sandwich(C, C.dag()) - spre(cdc) - spost(cdc))
    return Superoperator(C.space, data.tocsc())


def commutator_superop(H: SparseOperator) -> Superoperator:
    """-i [H, .] as a superoperator."""
    return Superoperator(H.space, (-1j * (spre(H) - spost(H))).tocsc())


def build_liouvillian(space: CompositeSpace, params: SystemParams) -> Superoperator:
    """Full generator: commutator plus emitter loss/pump, cavity decay, dephasing."""
    L = commutator_superop(build_hamiltonian(space, params))
    L = L + dissipator(cavity_op(space, "annihilate"), params.kappa)
    for i in range(space.n_emitters):
        L = L + dissipator(emitter_op(space, i, "lower"), params.gamma)
        L = L + dissipator(emitter_op(space, i, "raise"), params.pump_px)
        L = L + dissipator(emitter_op(space, i, "z"), params.dephasing / 2.0)
    return L


@dataclass(frozen=True)
class SteadyStateOptions:
    """Tolerances for the steady-state solve.

    ``tol`` bounds the relative residual |L vec(rho)| / (|L| |vec(rho)|).
    ``null_tol`` is the relative threshold under which a second eigenvalue of
    the Liouvillian counts as a second steady state.
    """

    tol: float = 1e-10
    null_tol: float = 1e-9
    arpack_maxiter: int = 20000


def _trace_row_system(L: sp.csc_matrix, dim: int) -> tuple[sp.csc_matrix, np.ndarray, int]:
    """Replace one population row of L by the trace constraint.

    The replaced row is chosen among rows of diagonal density-matrix elements
    only: replacing a coherence row can orphan that coherence column (its only
    coupling may be its own decay), which makes the system structurally
    singular, e.g. under strong dephasing.
    """
    diag_idx = np.arange(dim) * (dim + 1)
    ell_diag = L.diagonal()[diag_idx]
    row = int(diag_idx[int(np.argmax(np.abs(ell_diag)))])

    coo = L.tocoo()
    keep = coo.row != row
    rows = np.concatenate([coo.row[keep], np.full(dim, row)])
    cols = np.concatenate([coo.col[keep], diag_idx])
    data = np.concatenate([coo.data[keep], np.ones(dim, dtype=np.complex128)])
    M = sp.coo_matrix((data, (rows, cols)), shape=L.shape).tocsc()
    b = np.zeros(L.shape[0], dtype=np.complex128)
    b[row] = 1.0
    return M, b, row


def _null_vectors(L: sp.csc_matrix, options: SteadyStateOptions) -> tuple[np.ndarray, np.ndarray]:
    """Smallest-magnitude spectral data of L (dense SVD small, ARPACK large)."""
    n = L.shape[0]
    if n <= 4096:
        _, s, vh = np.linalg.svd(L.toarray())
        return s[::-1], vh.conj()[::-1]  # ascending singular values, matching right vectors
    shift = 1e-12 * max(float(abs(L.diagonal()).max()), 1.0)
    vals, vecs = spla.eigs(L, k=2, sigma=shift, which="LM", maxiter=options.arpack_maxiter)
    order = np.argsort(np.abs(vals))
    return np.abs(vals[order]), vecs[:, order].T


def steady_state(L: Superoperator, options: SteadyStateOptions | None = None) -> DensityMatrix:
    """Null vector of the Liouvillian, normalized to a physical state.

    Raises :class:`NonUniqueSteadyStateError` when a second null direction is
    present at the working tolerance, and
    :class:`SteadyStateConvergenceError` when neither the direct solve nor
    the eigenpair fallback reaches the residual target.
    """
    options = options or SteadyStateOptions()
    dim = L.space.dim
    norm_l = spla.norm(L.data)
    if norm_l == 0:
        raise NonUniqueSteadyStateError("zero Liouvillian: every state is stationary")

    x = None
    try:
        M, b, _ = _trace_row_system(L.data, dim)
        x = spla.splu(M).solve(b)
        if not np.all(np.isfinite(x)):
            x = None
    except RuntimeError:
        x = None

    if x is not None:
        residual = np.linalg.norm(L.data @ x) / (norm_l * np.linalg.norm(x))
        if residual > options.tol:
            x = None

    if x is None:
        # direct solve failed or stalled: diagnose via the smallest eigenpairs
        mags, vecs = _null_vectors(L.data, options)
        scale = norm_l
        null_count = int(np.sum(mags < options.null_tol * scale))
        if null_count > 1:
            raise NonUniqueSteadyStateError(
                f"non-unique steady state: {null_count} null directions at tolerance "
                f"{options.null_tol:g} (smallest magnitudes {mags[:null_count]})"
            )
        x = vecs[0]
        residual = np.linalg.norm(L.data @ x) / (norm_l * np.linalg.norm(x))
        if residual > options.tol:
            raise SteadyStateConvergenceError(
                f"no convergence: steady-state residual {residual:.2e} above tol {options.tol:g}"
            )

    rho = x.reshape((dim, dim), order="F")
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho)
    if abs(tr) < 1e-300:
        raise SteadyStateConvergenceError("no convergence: null vector is traceless")
    rho = rho / tr.real if abs(tr.imag) < abs(tr.real) * 1e-8 else rho / tr
    return DensityMatrix(L.space, rho).validate()


def evolve(L: Superoperator, rho0: DensityMatrix, t_grid: Sequence[float],
           rtol: float = 1e-8, atol: float = 1e-12,
           method: str = "RK45") -> list[DensityMatrix]:
    """Propagate rho0 under L, returning the state at each grid time.

    The default integrator is an adaptive 5th-order embedded pair with dense
    output; pass ``method="BDF"`` for regimes where the cavity decay makes
    the explicit pair step-size limited.
    """
    if rho0.space != L.space:
        raise SpaceMismatchError("initial state lives on a different space")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a nonempty 1d sequence")
    if np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be strictly increasing and nonnegative")

    data = L.data
    y0 = rho0.vec()
    if data.nnz == 0:
        return [DensityMatrix(L.space, rho0.matrix.copy()) for _ in t_grid]

    def rhs(_t, y):
        return data @ y

    t_end = float(t_grid[-1])
    eval_times = t_grid[t_grid > 0]
    states: list[DensityMatrix] = []
    if t_grid[0] == 0.0:
        states.append(DensityMatrix(L.space, rho0.matrix.copy()))
    if len(eval_times) > 0:
        sol = solve_ivp(rhs, (0.0, t_end), y0, method=method, t_eval=eval_times,
                        rtol=rtol, atol=atol)
        if not sol.success:
            t_fail = float(sol.t[-1]) if len(sol.t) else 0.0
            raise IntegrationError(f"integration failed at t={t_fail:g}: {sol.message}", t=t_fail)
        dim = L.space.dim
        for k in range(sol.y.shape[1]):
            rho = sol.y[:, k].reshape((dim, dim), order="F")
            states.append(DensityMatrix(L.space, 0.5 * (rho + rho.conj().T)))
    return states


#: observables tracked by the cutoff scan when the caller does not choose
DEFAULT_CUTOFF_OBSERVABLES = ("n_a", "n_J", "total_nx", "g2_cavity", "g2_collective")


def converge_cutoff(params: SystemParams,
                    observables: Sequence[str] = DEFAULT_CUTOFF_OBSERVABLES,
                    rel_tol: float = 1e-3,
                    max_vec_entries: int = DEFAULT_VEC_ENTRY_CAP,
                    options: SteadyStateOptions | None = None,
                    ) -> tuple[int, DensityMatrix]:
    """Find the smallest photon cutoff with stable steady-state observables.

    A cutoff n passes when every requested observable changes by less than
    ``rel_tol`` (relative) between n and n + 2.  Candidates are scanned
    geometrically and the first passing cutoff is then walked back one step
    at a time.  n = 0 is never accepted while the coherent coupling is on,
    since the cavity then needs at least one photon level.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    from .observables import compute_named  # local import: observables depends on this module

    cache: dict[int, tuple[DensityMatrix, dict[str, float]]] = {}

    def solve_at(n: int) -> tuple[DensityMatrix, dict[str, float]]:
        if n not in cache:
            space = build_space(params.n_emitters, n, max_vec_entries=max_vec_entries)
            rho = steady_state(build_liouvillian(space, params), options)
            values = {name: compute_named(name, rho) for name in observables}
            cache[n] = (rho, values)
        return cache[n]

    def settled(n: int) -> bool:
        _, now = solve_at(n)
        _, ref = solve_at(n + 2)
        for name in observables:
            v_now, v_ref = now[name], ref[name]
            if np.isnan(v_now) and np.isnan(v_ref):
                continue  # e.g. correlations of a dark state stay undefined
            if np.isnan(v_now) != np.isnan(v_ref):
                return False
            if abs(v_ref - v_now) >= rel_tol * max(abs(v_ref), 1e-12):
                return False
        return True

    n_start = 1 if params.coupling_g != 0 else 0
    candidate = n_start
    last_fail = n_start - 1
    while True:
        try:
            if settled(candidate):
                break
            last_fail = candidate
        except SpaceTooLargeError as exc:
            values = {n: vals for n, (_, vals) in sorted(cache.items())[-2:]}
            raise CutoffConvergenceError(
                f"cutoff not converged before the space cap; last observables {values}"
            ) from exc
        candidate = max(candidate + 1, candidate * 2)

    while candidate - 1 > last_fail and settled(candidate - 1):
        candidate -= 1

    return candidate, solve_at(candidate)[0]
