"""Shared helpers: reference parameter sets and independent oracle builders."""

import numpy as np

from opentc import SystemParams, build_space
from opentc.mcwf import jump_operators

# weak incoherent drive used throughout the reference figures
WEAK_PUMP = dict(gamma=1e-4, pump_px=1e-3)


def weak_pump_params(n_emitters: int, kappa: float, **overrides) -> SystemParams:
    fields = dict(n_emitters=n_emitters, kappa=kappa, **WEAK_PUMP)
    fields.update(overrides)
    return SystemParams(**fields)


def monolithic_liouvillian(space, params) -> np.ndarray:
    """Independent dense assembly of the generator, column by column.

    Applies the master-equation right-hand side to every matrix unit E_ij
    with plain dense algebra, so it shares no code path with the sparse
    kron-based assembly it cross-checks.
    """
    dim = space.dim
    h = (1j * params.coupling_g).conjugate() * 0  # placeholder to keep dtype complex
    a = np.zeros((space.n_max + 1, space.n_max + 1), dtype=complex)
    for n in range(1, space.n_max + 1):
        a[n - 1, n] = np.sqrt(n)
    eye_e = np.eye(2**space.n_emitters)
    a_full = np.kron(a, eye_e)

    def one_site(local, i):
        mats = []
        for k in range(space.n_emitters - 1, -1, -1):
            mats.append(local if k == i else np.eye(2))
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return np.kron(np.eye(space.n_max + 1), out)

    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    sz = np.diag([-1.0, 1.0]).astype(complex)
    sigmas = [one_site(lower, i) for i in range(space.n_emitters)]
    szs = [one_site(sz, i) for i in range(space.n_emitters)]
    j_minus = sum(sigmas)
    h = 1j * params.coupling_g * (a_full @ j_minus.conj().T - j_minus @ a_full.conj().T)

    collapse = [(np.sqrt(params.kappa), a_full)]
    for i in range(space.n_emitters):
        collapse.append((np.sqrt(params.gamma), sigmas[i]))
        collapse.append((np.sqrt(params.pump_px), sigmas[i].conj().T))
        collapse.append((np.sqrt(params.dephasing / 2.0), szs[i]))

    def rhs(rho):
        out = -1j * (h @ rho - rho @ h)
        for scale, c in collapse:
            cs = scale * c
            cdc = cs.conj().T @ cs
            out += cs @ rho @ cs.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
        return out

    L = np.zeros((dim * dim, dim * dim), dtype=complex)
    for j in range(dim):
        for i in range(dim):
            unit = np.zeros((dim, dim), dtype=complex)
            unit[i, j] = 1.0
            L[:, j * dim + i] = rhs(unit).reshape(-1, order="F")
    return L


def random_liouvillian(rng: np.random.Generator, dim: int):
    """Random Lindblad generator on a flat space (for property tests)."""
    from opentc import FlatSpace, SparseOperator
    from opentc.liouville import commutator_superop, dissipator
    import scipy.sparse as sp

    space = FlatSpace(dim, label=f"rand{dim}")

    def rand_matrix():
        m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        return m

    h = rand_matrix()
    h = SparseOperator(space, sp.csc_matrix(0.5 * (h + h.conj().T)))
    L = commutator_superop(h)
    for _ in range(rng.integers(1, 4)):
        c = SparseOperator(space, sp.csc_matrix(rand_matrix()))
        L = L + dissipator(c, float(rng.uniform(0.1, 2.0)))
    return L


def random_density_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


def mcwf_collapse_set(space, params):
    """Named collapse operators as dense arrays (oracle-side convenience)."""
    return [(name, op.to_array()) for name, op in jump_operators(space, params)]
