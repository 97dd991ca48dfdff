import numpy as np
import pytest

from ..analysis import numerical_rank
from ..params import AntennaConfig, IcConfig, derive
from ..precoder import (
    PrecoderError, alignment_block, alignment_unit, build_ic_plan, build_plan, build_Q, draw_phi,
    embedding, subunit_relation, subunit_sources, vec,
)
from ..random_matrices import ComplexGaussianGenerator


class TestAlignmentBlock:
    """Sub-vector construction of one alignment block"""

    def test_replication_without_remainder(self, trial_gen):
        # T=4, L=2: S=1, both sub-vectors carry the same L*T symbols
        s = trial_gen.matrix(8)
        parts = alignment_block(s, 4, 2, 5)
        assert len(parts) == 2
        assert all(p.shape == (10,) for p in parts)
        np.testing.assert_allclose(parts[0], parts[1])
        np.testing.assert_allclose(parts[0], np.kron(np.eye(2), embedding(5, 4)) @ s)

    def test_phi_mixes_first_sub_vector(self, trial_gen):
        # T=5, L=2: remainder 1, S=2
        phi = draw_phi(trial_gen, 5, 2)
        assert phi.shape == (1, 2)
        s = trial_gen.matrix(10)
        parts = alignment_block(s, 5, 2, 5, phi)
        assert [p.shape[0] for p in parts] == [5, 10, 10]
        np.testing.assert_allclose(parts[0], np.kron(phi, np.eye(5)) @ s)

    def test_zero_padding_beyond_T(self, trial_gen):
        s = trial_gen.matrix(3)
        parts = alignment_block(s, 3, 1, 5)
        for p in parts:
            assert np.all(p.reshape(1, 5)[:, 3:] == 0)

    def test_offset_embedding(self, trial_gen):
        s = trial_gen.matrix(3)
        part = alignment_block(s, 3, 1, 9, offset=3)[0]
        assert np.all(part[:3] == 0) and np.all(part[6:] == 0)
        np.testing.assert_allclose(part[3:6], s)

    def test_phi_required_exactly_with_remainder(self, trial_gen):
        with pytest.raises(PrecoderError, match="phi"):
            alignment_block(trial_gen.matrix(10), 5, 2, 5)
        with pytest.raises(PrecoderError, match="phi"):
            alignment_block(trial_gen.matrix(8), 4, 2, 4, np.ones((1, 2)))
        with pytest.raises(PrecoderError, match="rows"):
            alignment_block(trial_gen.matrix(7), 4, 2, 4)


class TestAlignmentUnit:
    """Sub-unit staggering and the Q relation"""

    def test_build_Q(self, trial_gen):
        phi = trial_gen.matrix((1, 2))
        Q = build_Q(phi, 2, 2, 2)
        assert Q.shape == (3, 4)
        np.testing.assert_allclose(Q[:2, :2], np.eye(2))
        np.testing.assert_allclose(Q[2:, 2:], phi)
        with pytest.raises(PrecoderError):
            build_Q(None, 2, 2, 1)
        with pytest.raises(PrecoderError):
            build_Q(phi, 2, 2, 3)

    def test_subunit_sources_cover_every_sub_vector(self):
        U_i, S = 6, 3
        used = sorted(src for k in range(1, S + 2) for src in subunit_sources(U_i, S, k))
        assert used == sorted((m, q) for m in range(U_i) for q in range(S + 1))

    @pytest.mark.parametrize("T, L, M", [(5, 2, 5), (3, 2, 3), (4, 2, 4), (4, 1, 5)])
    def test_last_subunit_relation(self, T, L, M):
        gen = ComplexGaussianGenerator(11)
        phi = draw_phi(gen, T, L)
        S = T // L - 1 if T % L == 0 else T // L
        U_i = S * (T - L)
        blocks = [alignment_block(gen.matrix(L * T), T, L, M, phi) for _ in range(U_i)]
        unit = alignment_unit(blocks, U_i, S)
        assert len(unit) == S + 1
        for k in range(1, S + 1):
            R = subunit_relation(phi, L, S, U_i, M, k)
            np.testing.assert_allclose(R @ unit[S], unit[k - 1], atol=1e-12)

    def test_unit_needs_matching_block_count(self, trial_gen):
        blocks = [alignment_block(trial_gen.matrix(3), 3, 1, 3) for _ in range(2)]
        with pytest.raises(PrecoderError, match="needs 4 blocks"):
            alignment_unit(blocks, 4, 2)


class TestTransmitPlan:
    """Plans for the worked example and other cases"""

    def test_two_user_shapes(self, two_user_config):
        plan = build_plan(two_user_config, seed=3)
        assert plan.n == 14
        assert plan.x.shape == (42,)
        assert plan.beamformers[0].shape == (42, 6)
        assert plan.beamformers[1].shape == (42, 24)
        assert (plan.symbol_count(0), plan.symbol_count(1)) == (6, 24)
        assert set(plan.phi) == {1}
        assert plan.phi[1].shape == (1, 2)

    def test_beamformers_have_full_column_rank(self, two_user_config):
        plan = build_plan(two_user_config, seed=5)
        for user, V in plan.beamformers.items():
            assert numerical_rank(V) == V.shape[1]

    @pytest.mark.parametrize("M, users", [
        (3, [(3, 1), (3, 2)]),
        (4, [(4, 2), (4, 1)]),
        (5, [(5, 2), (5, 1)]),
    ])
    def test_stacked_beamformers_are_independent(self, M, users):
        plan = build_plan(AntennaConfig.from_pairs(M, users), seed=2)
        V = plan.stacked_beamformers()
        assert V.shape[1] == sum(plan.symbol_count(u) for u in plan.served)
        assert numerical_rank(V) == V.shape[1]

    @pytest.mark.parametrize("M, users", [
        (3, [(3, 1), (3, 2)]),
        (4, [(4, 2), (4, 1)]),
        (5, [(5, 2), (5, 1)]),
    ])
    def test_silent_outside_block1_and_own_span(self, M, users):
        plan = build_plan(AntennaConfig.from_pairs(M, users), seed=4)
        scheme = plan.scheme
        for pos, user in enumerate(scheme.members):
            start, end = scheme.span(pos)
            V = plan.beamformers[user].reshape(plan.n, M, -1)
            silent = [t for t in range(plan.n) if not (t < scheme.block1_slots or start <= t < end)]
            assert silent
            assert not np.any(V[silent])
            assert np.any(V[start:end])

    def test_superposition(self, two_user_config):
        plan = build_plan(two_user_config, seed=1)
        total = sum(plan.user_signal(u) for u in plan.served)
        np.testing.assert_allclose(plan.x, total)

    def test_ramp_symbols(self, two_user_config):
        plan = build_plan(two_user_config, ramp=True)
        s = plan.symbols[0]
        np.testing.assert_array_equal(vec(s), np.arange(1, 7))

    def test_determinism(self, two_user_config):
        a = build_plan(two_user_config, seed=9)
        b = build_plan(two_user_config, seed=9)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.phi[1], b.phi[1])

    def test_layout_covers_each_slot_once(self, two_user_config):
        plan = build_plan(two_user_config, seed=0)
        for user in plan.served:
            occupied = sorted(t for block in plan.layout[user]
                              for start, count in block.slots for t in range(start, start + count))
            expected = list(range(4)) + list(range(*plan.scheme.span(user)))
            assert occupied == expected

    def test_redraw_keeps_phi_and_beamformers(self, two_user_config):
        plan = build_plan(two_user_config, seed=2)
        fresh = plan.redraw_symbols(ComplexGaussianGenerator(4))
        assert fresh.phi is plan.phi
        assert fresh.beamformers is plan.beamformers
        assert not np.allclose(fresh.x, plan.x)

    def test_single_user_plan(self):
        config = AntennaConfig.from_pairs(3, [(2, 2), (1, 1)])
        plan = build_plan(config)
        assert plan.trivial
        assert plan.n == 1
        assert plan.served == (0,)
        assert plan.beamformers[0].shape == (3, 2)

    def test_vertex_plan(self):
        config = AntennaConfig.from_pairs(4, [(4, 2), (4, 1)])
        plan = build_plan(config, served=[1])
        assert plan.served == (1,)
        assert plan.n == plan.scheme.n
        assert plan.targets[0] == 0 and plan.targets[1] == 1
        with pytest.raises(PrecoderError):
            build_plan(config, served=[1, 0])

    def test_ic_plan_uses_own_antennas(self, symmetric_ic_config):
        plan = build_ic_plan(symmetric_ic_config, seed=0)
        assert plan.M == 9
        for user in plan.served:
            V = plan.beamformers[user].reshape(plan.n, plan.M, -1)
            own = slice(3 * user, 3 * user + 3)
            mask = np.ones(plan.M, dtype=bool)
            mask[own] = False
            assert np.all(V[:, mask, :] == 0)

    def test_to_dict(self, two_user_config):
        report = build_plan(two_user_config).to_dict()
        assert report["n"] == 14
        assert report["block2_offsets"] == [4, 6]
        assert report["users"][0]["phi"] is None
        assert report["users"][1]["beamformer_shape"] == [42, 24]
