"""Steady-state observables: populations and second-order photon correlations."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import SiteSymmetryError, SpaceMismatchError, ZeroIntensityError
from .liouville import DensityMatrix, Superoperator, evolve
from .operators import CompositeSpace, SparseOperator, Space, cavity_op, collective_op, emitter_op

INTENSITY_FLOOR = 1e-12
SITE_SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class PopulationSet:
    """Mean cavity photon number, collective dipole intensity, total excitation."""

    n_a: float
    n_J: float
    total_nx: float


def expectation(rho: DensityMatrix, O: SparseOperator) -> complex:
    """Tr(O rho); the imaginary part is a numerical diagnostic for Hermitian O."""
    if rho.space != O.space:
        raise SpaceMismatchError(f"state on {rho.space} but operator on {O.space}")
    return complex((O.data @ rho.matrix).trace())


@lru_cache(maxsize=64)
def _correlation_ops(space: CompositeSpace) -> dict:
    a = cavity_op(space, "annihilate")
    jm = collective_op(space, "J_minus")
    jp = jm.dag()
    return {
        "n_a": cavity_op(space, "number"),
        "aa_moment": a.dag() @ a.dag() @ a @ a,
        "n_J": jp @ jm,
        "JJ_moment": jp @ jp @ jm @ jm,
        "site_pops": tuple(
            emitter_op(space, i, "population") for i in range(space.n_emitters)
        ),
    }


def _collective_moment_ops(space: Space) -> tuple[SparseOperator, SparseOperator]:
    """(J+J-, J+J+J-J-) on a composite space or a coupled-basis space."""
    if isinstance(space, CompositeSpace):
        ops = _correlation_ops(space)
        return ops["n_J"], ops["JJ_moment"]
    from .collective import CoupledSpace, coupled_collective_ops  # avoids an import cycle

    if isinstance(space, CoupledSpace):
        return coupled_collective_ops(space)
    raise SpaceMismatchError(f"no collective dipole operators defined on {space}")


def populations(rho: DensityMatrix, space: CompositeSpace | None = None) -> PopulationSet:
    """The three population measures; per-site values are cross-checked.

    Emitter exchange symmetry of the model makes every site population equal;
    a spread above ``SITE_SYMMETRY_TOL`` indicates an assembly bug and raises.
    """
    if space is not None and space != rho.space:
        raise SpaceMismatchError("explicit space disagrees with the state's space")
    if not isinstance(rho.space, CompositeSpace):
        raise SpaceMismatchError("populations need a cavity+emitters space")
    ops = _correlation_ops(rho.space)
    site = np.array([expectation(rho, op).real for op in ops["site_pops"]])
    if site.max() - site.min() > SITE_SYMMETRY_TOL:
        raise SiteSymmetryError(
            f"per-site populations spread {site.max() - site.min():.2e} "
            f"exceeds {SITE_SYMMETRY_TOL:g}: {site}"
        )
    return PopulationSet(
        n_a=expectation(rho, ops["n_a"]).real,
        n_J=expectation(rho, ops["n_J"]).real,
        total_nx=float(site.mean() * rho.space.n_emitters),
    )


def g2_zero_cavity(rho: DensityMatrix, space: CompositeSpace | None = None,
                   floor: float = INTENSITY_FLOOR) -> float:
    """Zero-delay second-order correlation of the cavity field."""
    if space is not None and space != rho.space:
        raise SpaceMismatchError("explicit space disagrees with the state's space")
    if not isinstance(rho.space, CompositeSpace):
        raise SpaceMismatchError("cavity correlation needs a cavity+emitters space")
    ops = _correlation_ops(rho.space)
    intensity = expectation(rho, ops["n_a"]).real
    if intensity <= floor:
        raise ZeroIntensityError(f"zero intensity: <a†a> = {intensity:.3e} below {floor:g}")
    return expectation(rho, ops["aa_moment"]).real / intensity**2


def g2_zero_collective(rho: DensityMatrix, space: Space | None = None,
                       floor: float = INTENSITY_FLOOR) -> float:
    """Zero-delay second-order correlation of the collective dipole.

    Works on full cavity+emitter states, on emitter-only states of the
    cavity-eliminated model, and on coupled-basis states.
    """
    if space is not None and space != rho.space:
        raise SpaceMismatchError("explicit space disagrees with the state's space")
    n_j, moment = _collective_moment_ops(rho.space)
    intensity = expectation(rho, n_j).real
    if intensity <= floor:
        raise ZeroIntensityError(f"zero intensity: <J+J-> = {intensity:.3e} below {floor:g}")
    return expectation(rho, moment).real / intensity**2


def g2_tau(L: Superoperator, rho_ss: DensityMatrix, A: SparseOperator,
           tau_grid: Sequence[float], floor: float = INTENSITY_FLOOR,
           **evolve_kwargs) -> np.ndarray:
    """Delayed second-order correlation of the field detected through A.

    Quantum regression: the operator-dressed state A rho A† is propagated
    under the same generator and <A†A> is read out along the way.  The
    dressed state is positive with trace equal to the intensity, so it is
    renormalized, propagated as an ordinary state, and rescaled.
    """
    if rho_ss.space != L.space or A.space != L.space:
        raise SpaceMismatchError("state, generator and operator must share one space")
    intensity = expectation(rho_ss, A.dag() @ A).real
    if intensity <= floor:
        raise ZeroIntensityError(f"zero intensity: <A†A> = {intensity:.3e} below {floor:g}")
    chi0 = A.data @ rho_ss.matrix @ A.data.conj().T
    chi0 = 0.5 * (chi0 + chi0.conj().T)
    dressed = DensityMatrix(L.space, chi0 / np.trace(chi0).real)
    readout = A.dag() @ A
    values = []
    for state in evolve(L, dressed, tau_grid, **evolve_kwargs):
        values.append(expectation(state, readout).real / intensity)
    return np.asarray(values)


def compute_named(name: str, rho: DensityMatrix) -> float:
    """Observable registry used by the cutoff scan and the sweep driver.

    Correlations below the intensity floor come back as NaN (undefined), not
    zero, so a vacuum steady state never masquerades as antibunched.
    """
    if name in ("n_a", "n_J", "total_nx"):
        return getattr(populations(rho), name)
    if name == "g2_cavity":
        try:
            return g2_zero_cavity(rho)
        except ZeroIntensityError:
            return float("nan")
    if name == "g2_collective":
        try:
            return g2_zero_collective(rho)
        except ZeroIntensityError:
            return float("nan")
    raise ValueError(f"unknown observable {name!r}")
