import numpy as np
import pytest
import scipy.sparse as sp

from opentc import (
    FlatSpace,
    SparseOperator,
    SystemParams,
    basis_ket,
    build_space,
    cavity_op,
    collective_op,
    emitter_op,
    identity,
)
from opentc.errors import SpaceMismatchError, SpaceTooLargeError


class TestSystemParams:
    @pytest.mark.parametrize("name", ["kappa", "gamma", "pump_px", "dephasing"])
    def test_rejects_negative_rates(self, name):
        fields = dict(n_emitters=2, kappa=1.0)
        fields[name] = -0.1
        with pytest.raises(ValueError, match=name):
            SystemParams(**fields)

    def test_rejects_bad_emitter_count(self):
        with pytest.raises(ValueError):
            SystemParams(n_emitters=0, kappa=1.0)

    def test_omega_is_bookkeeping_only(self):
        p = SystemParams(n_emitters=1, kappa=1.0, omega=123.0)
        assert p.omega == 123.0

    def test_zero_and_negative_coupling_accepted(self):
        # g = 0 decouples the cavity; g -> -g is a phase convention
        SystemParams(n_emitters=1, kappa=1.0, coupling_g=0.0)
        SystemParams(n_emitters=1, kappa=1.0, coupling_g=-1.0)


class TestCompositeSpace:
    def test_dimensions(self):
        assert build_space(2, 3).dim == 16
        assert build_space(1, 0).dim == 2
        assert build_space(5, 15).dim == 512

    def test_index_map_round_trip_exhaustive(self):
        space = build_space(5, 15)
        for idx in range(space.dim):
            n, bits = space.decode(idx)
            assert space.encode(n, bits) == idx
        # and the forward direction covers every (n, bits) pair exactly once
        seen = {space.encode(n, b) for n in range(16) for b in range(32)}
        assert seen == set(range(512))

    def test_encode_bounds(self):
        space = build_space(2, 1)
        with pytest.raises(ValueError):
            space.encode(2, 0)
        with pytest.raises(ValueError):
            space.encode(0, 4)
        with pytest.raises(ValueError):
            space.decode(space.dim)

    def test_space_cap_names_dimensions(self):
        with pytest.raises(SpaceTooLargeError, match=r"N=10.*n_max=63"):
            build_space(10, 63)
        # a custom budget is honored
        with pytest.raises(SpaceTooLargeError):
            build_space(2, 3, max_vec_entries=16 * 16 - 1)


class TestCavityOps:
    def test_annihilate_matrix_elements(self):
        space = build_space(1, 2)
        a = cavity_op(space, "annihilate")
        ket2 = basis_ket(space, 2)
        ket1 = basis_ket(space, 1)
        ket0 = basis_ket(space, 0)
        assert abs(ket1.conj() @ (a.data @ ket2) - np.sqrt(2)) < 1e-15
        assert abs(ket0.conj() @ (a.data @ ket1) - 1.0) < 1e-15
        assert np.linalg.norm(a.data @ ket0) == 0.0

    def test_number_eigenvalue(self):
        space = build_space(2, 3)
        num = cavity_op(space, "number")
        ket = basis_ket(space, 2, excited=(0,))
        assert np.allclose(num.data @ ket, 2.0 * ket)

    def test_create_annihilate_composition_is_number(self):
        # matrix identity on the truncated space
        space = build_space(2, 4)
        composed = cavity_op(space, "create") @ cavity_op(space, "annihilate")
        diff = (composed - cavity_op(space, "number")).data
        assert diff.nnz == 0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            cavity_op(build_space(1, 1), "squeeze")


class TestEmitterOps:
    def test_lower_action(self):
        space = build_space(3, 0)
        low = emitter_op(space, 1, "lower")
        before = basis_ket(space, 0, excited=(0, 1))
        after = basis_ket(space, 0, excited=(0,))
        assert np.allclose(low.data @ before, after)
        assert np.linalg.norm(low.data @ after) == 0.0  # already in the ground state

    def test_distinct_sites_commute(self):
        space = build_space(3, 1)
        raise0 = emitter_op(space, 0, "raise")
        lower2 = emitter_op(space, 2, "lower")
        comm = raise0 @ lower2 - lower2 @ raise0
        assert comm.nnz == 0

    def test_site_anticommutator_is_identity(self):
        space = build_space(2, 1)
        for i in range(2):
            up, down = emitter_op(space, i, "raise"), emitter_op(space, i, "lower")
            anti = up @ down + down @ up
            assert np.max(np.abs((anti - identity(space)).data.toarray())) < 1e-15

    def test_z_eigenvalues(self):
        space = build_space(2, 0)
        z0 = emitter_op(space, 0, "z")
        excited = basis_ket(space, 0, excited=(0,))
        ground = basis_ket(space, 0)
        assert np.allclose(z0.data @ excited, excited)
        assert np.allclose(z0.data @ ground, -ground)

    def test_population_is_raise_lower(self):
        space = build_space(2, 1)
        pop = emitter_op(space, 1, "population")
        composed = emitter_op(space, 1, "raise") @ emitter_op(space, 1, "lower")
        assert (pop - composed).nnz == 0

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            emitter_op(build_space(2, 0), 2, "lower")


class TestCollectiveOps:
    def test_lowering_spreads_excitations(self):
        space = build_space(2, 0)
        jm = collective_op(space, "J_minus")
        both = basis_ket(space, 0, excited=(0, 1))
        expected = basis_ket(space, 0, excited=(1,)) + basis_ket(space, 0, excited=(0,))
        assert np.allclose(jm.data @ both, expected)

    def test_singlet_is_dark(self):
        space = build_space(2, 0)
        jm = collective_op(space, "J_minus")
        singlet = (basis_ket(space, 0, excited=(0,)) - basis_ket(space, 0, excited=(1,))) / np.sqrt(2)
        assert np.linalg.norm(jm.data @ singlet) < 1e-15

    def test_symmetric_state_intensity(self):
        # direct matrix-vector evaluation: <J+J-> on the one-excitation triplet is 2
        space = build_space(2, 0)
        jpjm = collective_op(space, "JpJm")
        sym = (basis_ket(space, 0, excited=(0,)) + basis_ket(space, 0, excited=(1,))) / np.sqrt(2)
        assert abs(sym.conj() @ (jpjm.data @ sym) - 2.0) < 1e-14

    def test_composition_matches_jpjm(self):
        for n, n_max in ((2, 1), (3, 2), (4, 0)):
            space = build_space(n, n_max)
            jm = collective_op(space, "J_minus")
            composed = (jm.dag() @ jm).data
            direct = collective_op(space, "JpJm").data
            diff = composed - direct
            assert diff.nnz == 0 or np.max(np.abs(diff.data)) < 1e-13

    @pytest.mark.parametrize("n", range(1, 7))
    def test_angular_momentum_algebra(self, n):
        space = build_space(n, 0)
        jm = collective_op(space, "J_minus")
        jp = jm.dag()
        jz = 0.5 * emitter_op(space, 0, "z")
        for i in range(1, n):
            jz = jz + 0.5 * emitter_op(space, i, "z")
        comm = (jp @ jm - jm @ jp).data - 2.0 * jz.data
        assert comm.nnz == 0 or np.max(np.abs(comm.data)) < 1e-13


class TestCanonicalForm:
    def test_construction_is_deterministic(self):
        spaces = [build_space(2, 3), build_space(5, 3), build_space(3, 7)]
        for space in spaces:
            assert space.dim <= 4096
            builders = [
                lambda s: cavity_op(s, "annihilate"),
                lambda s: collective_op(s, "JpJm"),
                lambda s: emitter_op(s, 0, "lower"),
            ]
            for make in builders:
                first, second = make(space).data, make(space).data
                assert np.array_equal(first.indptr, second.indptr)
                assert np.array_equal(first.indices, second.indices)
                assert np.array_equal(first.data, second.data)

    def test_canonical_layout(self):
        op = collective_op(build_space(3, 2), "JpJm").data
        assert op.has_sorted_indices
        assert not np.any(op.data == 0)

    def test_hermitian_operators(self):
        space = build_space(3, 2)
        for op in (cavity_op(space, "number"), emitter_op(space, 1, "z"),
                   collective_op(space, "JpJm")):
            assert op.is_hermitian(tol=1e-14)

    def test_space_mismatch_rejected(self):
        a = cavity_op(build_space(1, 2), "annihilate")
        b = cavity_op(build_space(1, 3), "annihilate")
        with pytest.raises(SpaceMismatchError):
            _ = a @ b
        with pytest.raises(SpaceMismatchError):
            _ = a + b

    def test_flat_space_operators(self):
        space = FlatSpace(3, label="demo")
        op = SparseOperator(space, sp.csc_matrix(np.eye(3)))
        assert (op @ op).nnz == 3
        with pytest.raises(SpaceMismatchError):
            SparseOperator(space, sp.csc_matrix(np.eye(4)))
