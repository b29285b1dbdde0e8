"""Hilbert spaces and sparse operators for emitters coupled to one cavity mode.

Conventions fixed here and relied on everywhere else:

* basis index = n_photons * 2**N + bits, i.e. the photon number is the slow
  (outermost) index and the emitter bit pattern the fast one;
* bit i of the pattern refers to emitter i, with emitter 0 the least
  significant bit; bit set means the emitter is excited;
* sigma_z has eigenvalue +1 on the excited state;
* sparse matrices are CSC with sorted indices and no explicit zeros, so the
  stored structure is reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np
import scipy.sparse as sp

from .errors import SpaceMismatchError, SpaceTooLargeError

#: default budget for vectorized-Liouvillian entries (dim**2 <= this cap)
DEFAULT_VEC_ENTRY_CAP = 2**22


@dataclass(frozen=True)
class SystemParams:
    """Rates of the open Tavis-Cummings system, in units of the coupling g.

    All dissipative rates must be nonnegative.  ``coupling_g`` is normally 1
    (it sets the unit); zero and negative values are accepted because the
    sign of g is a phase convention with no observable consequence and g = 0
    decouples the cavity entirely, which is useful for calibration runs.
    ``omega`` is the common transition frequency of cavity and emitters; the
    dynamics are computed in the frame rotating at omega, so it never enters
    any matrix and is kept only for bookkeeping.
    """

    n_emitters: int
    kappa: float
    gamma: float = 0.0
    pump_px: float = 0.0
    dephasing: float = 0.0
    coupling_g: float = 1.0
    omega: float = 0.0

    def __post_init__(self):
        if int(self.n_emitters) != self.n_emitters or self.n_emitters < 1:
            raise ValueError(f"n_emitters must be a positive integer, got {self.n_emitters}")
        for name in ("kappa", "gamma", "pump_px", "dephasing"):
            value = getattr(self, name)
            if value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")


@dataclass(frozen=True)
class CompositeSpace:
    """Truncated cavity ⊗ emitters Hilbert space.

    ``n_max`` is the photon-number cutoff (cavity dimension n_max + 1);
    ``n_max = 0`` leaves a one-dimensional photon factor and is how the
    emitter-only space of the cavity-eliminated model is represented.
    """

    n_emitters: int
    n_max: int

    @property
    def dim(self) -> int:
        return (self.n_max + 1) * 2**self.n_emitters

    @property
    def emitter_dim(self) -> int:
        return 2**self.n_emitters

    def encode(self, n_photons: int, bits: int) -> int:
        """Basis index of |n_photons> ⊗ |emitter bit pattern>."""
        if not 0 <= n_photons <= self.n_max:
            raise ValueError(f"photon number {n_photons} outside cutoff {self.n_max}")
        if not 0 <= bits < self.emitter_dim:
            raise ValueError(f"bit pattern {bits} outside {self.n_emitters} emitters")
        return n_photons * self.emitter_dim + bits

    def decode(self, index: int) -> tuple[int, int]:
        """Inverse of :meth:`encode`: index -> (photon number, bit pattern)."""
        if not 0 <= index < self.dim:
            raise ValueError(f"basis index {index} outside dimension {self.dim}")
        return divmod(index, self.emitter_dim)


@dataclass(frozen=True)
class FlatSpace:
    """Unstructured Hilbert space of given dimension (generic operators, tests)."""

    dim: int
    label: str = ""


Space = Union[CompositeSpace, FlatSpace]


def build_space(n_emitters: int, n_max: int,
                max_vec_entries: int = DEFAULT_VEC_ENTRY_CAP) -> CompositeSpace:
    """Construct the composite space, enforcing the superoperator size budget.

    The cap is expressed in vectorized-density-matrix entries (dim**2), since
    that is what bounds every Liouvillian-level computation downstream.
    """
    if n_emitters < 1:
        raise ValueError(f"n_emitters must be >= 1, got {n_emitters}")
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    dim = (n_max + 1) * 2**n_emitters
    if dim * dim > max_vec_entries:
        raise SpaceTooLargeError(
            f"space too large: N={n_emitters}, n_max={n_max} gives dim={dim}, "
            f"dim^2={dim * dim} exceeds the cap of {max_vec_entries} vectorized entries"
        )
    return CompositeSpace(n_emitters=n_emitters, n_max=n_max)


def _canonical(matrix: sp.spmatrix) -> sp.csc_matrix:
    out = sp.csc_matrix(matrix, dtype=np.complex128)
    out.sum_duplicates()
    out.sort_indices()
    out.eliminate_zeros()
    return out


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Complex sparse matrix tagged with the space it acts on."""

    space: Space
    data: sp.csc_matrix = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "data", _canonical(self.data))
        if self.data.shape != (self.space.dim, self.space.dim):
            raise SpaceMismatchError(
                f"matrix shape {self.data.shape} does not match space dim {self.space.dim}"
            )

    def _check(self, other: "SparseOperator"):
        if self.space != other.space:
            raise SpaceMismatchError(f"operator spaces differ: {self.space} vs {other.space}")

    def __matmul__(self, other: "SparseOperator") -> "SparseOperator":
        self._check(other)
        return SparseOperator(self.space, self.data @ other.data)

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        self._check(other)
        return SparseOperator(self.space, self.data + other.data)

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        self._check(other)
        return SparseOperator(self.space, self.data - other.data)

    def __mul__(self, scalar: complex) -> "SparseOperator":
        return SparseOperator(self.space, self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SparseOperator":
        return SparseOperator(self.space, -self.data)

    def dag(self) -> "SparseOperator":
        return SparseOperator(self.space, self.data.conj().T)

    def to_array(self) -> np.ndarray:
        return self.data.toarray()

    def is_hermitian(self, tol: float = 1e-14) -> bool:
        diff = self.data - self.data.conj().T
        return diff.nnz == 0 or np.max(np.abs(diff.data)) <= tol

    @property
    def nnz(self) -> int:
        return self.data.nnz


def identity(space: Space) -> SparseOperator:
    return SparseOperator(space, sp.identity(space.dim, format="csc", dtype=np.complex128))


def _photon_ladder(n_max: int) -> sp.csc_matrix:
    # a |n> = sqrt(n) |n-1>
    return sp.diags(np.sqrt(np.arange(1, n_max + 1)), 1, format="csc").astype(np.complex128)


_LOCAL = {
    # emitter-local 2x2 matrices in the (g, e) = (0, 1) basis
    "lower": np.array([[0, 1], [0, 0]], dtype=np.complex128),    # |g><e|
    "raise": np.array([[0, 0], [1, 0]], dtype=np.complex128),    # |e><g|
    "z": np.array([[-1, 0], [0, 1]], dtype=np.complex128),
    "population": np.array([[0, 0], [0, 1]], dtype=np.complex128),
}


def cavity_op(space: CompositeSpace, kind: str) -> SparseOperator:
    """Cavity operator (a, a† or a†a) embedded in the composite space."""
    a = _photon_ladder(space.n_max)
    if kind == "annihilate":
        photon = a
    elif kind == "create":
        photon = a.conj().T
    elif kind == "number":
        photon = a.conj().T @ a
    else:
        raise ValueError(f"unknown cavity operator kind {kind!r}")
    full = sp.kron(photon, sp.identity(space.emitter_dim, format="csc"), format="csc")
    return SparseOperator(space, full)


def emitter_op(space: CompositeSpace, i: int, kind: str) -> SparseOperator:
    """Single-emitter operator acting on emitter ``i`` only."""
    if not 0 <= i < space.n_emitters:
        raise ValueError(f"emitter index {i} out of range for N={space.n_emitters}")
    if kind not in _LOCAL:
        raise ValueError(f"unknown emitter operator kind {kind!r}")
    local = sp.csc_matrix(_LOCAL[kind])
    # emitter 0 is the least significant bit, hence the rightmost kron factor
    left = sp.identity(2**(space.n_emitters - 1 - i), format="csc")
    right = sp.identity(2**i, format="csc")
    emitters = sp.kron(left, sp.kron(local, right, format="csc"), format="csc")
    full = sp.kron(sp.identity(space.n_max + 1, format="csc"), emitters, format="csc")
    return SparseOperator(space, full)


def collective_op(space: CompositeSpace, kind: str) -> SparseOperator:
    """Collective dipole operator J-, J+ or J+J-."""
    j_minus = emitter_op(space, 0, "lower")
    for i in range(1, space.n_emitters):
        j_minus = j_minus + emitter_op(space, i, "lower")
    if kind == "J_minus":
        return j_minus
    if kind == "J_plus":
        return j_minus.dag()
    if kind == "JpJm":
        return j_minus.dag() @ j_minus
    raise ValueError(f"unknown collective operator kind {kind!r}")


def basis_ket(space: CompositeSpace, n_photons: int = 0,
              excited: Iterable[int] = ()) -> np.ndarray:
    """State vector |n_photons> ⊗ |pattern> with the listed emitters excited."""
    bits = 0
    for i in excited:
        if not 0 <= i < space.n_emitters:
            raise ValueError(f"emitter index {i} out of range for N={space.n_emitters}")
        bits |= 1 << i
    ket = np.zeros(space.dim, dtype=np.complex128)
    ket[space.encode(n_photons, bits)] = 1.0
    return ket
