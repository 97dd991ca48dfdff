import json
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import block_diag

from ..params import AntennaConfig, derive, scheme_params
from ..precoder import build_plan
from ..random_matrices import ComplexGaussianGenerator
from ..switching import (
    ScheduleError, assemble_schedule, block1_pattern, block2_desired_pattern,
    block2_interference_pattern, channel_product, draw_channels, simulate,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def golden():
    with open(FIXTURES / "two_user_plan.json", encoding="utf-8") as fh:
        return json.load(fh)


class TestPatterns:
    """Mode patterns of the individual blocks"""

    def test_block1_groups(self):
        scheme = scheme_params((5,), (2,), (0,))
        assert [block1_pattern(scheme, 0, j) for j in (1, 2)] == [(1, 2), (3, 4)]
        with pytest.raises(ScheduleError):
            block1_pattern(scheme, 0, 3)

    def test_desired_pattern_with_remainder(self):
        # T=5, L=2: r=1, patterns cycle through L*S = 4 variants
        scheme = scheme_params((5,), (2,), (0,))
        a = scheme.a[0]
        patterns = [block2_desired_pattern(scheme, 0, a + jj) for jj in range(1, 5)]
        assert patterns == [(5, 1), (5, 2), (5, 3), (5, 4)]

    def test_desired_pattern_without_remainder(self):
        scheme = scheme_params((4,), (2,), (0,))
        assert block2_desired_pattern(scheme, 0, scheme.a[0] + 1) == (3, 4)

    def test_desired_pattern_outside_span(self):
        scheme = scheme_params((5,), (2,), (0,))
        with pytest.raises(ScheduleError, match="outside the block-2 span"):
            block2_desired_pattern(scheme, 0, 1)

    def test_interference_pattern_needs_two_users(self, two_user_config):
        scheme = derive(two_user_config).scheme
        with pytest.raises(ScheduleError):
            block2_interference_pattern(scheme, 0, 0, 7)
        assert block2_interference_pattern(scheme, 0, 1, 7) == (1,)
        assert block2_interference_pattern(scheme, 0, 1, 14) == (2,)


class TestSchedule:
    """Complete schedules"""

    def test_two_user_golden(self, two_user_config, golden):
        schedule = assemble_schedule(derive(two_user_config))
        assert schedule.n == golden["n"]
        for user, expected in golden["patterns"].items():
            assert [list(p) for p in schedule.patterns[int(user) - 1]] == expected

    def test_plan_matches_golden(self, two_user_config, golden):
        plan = build_plan(two_user_config)
        assert plan.x.shape[0] == golden["x_length"]
        assert list(plan.scheme.a) == golden["block2_offsets"]
        for user, shape in golden["beamformer_shapes"].items():
            assert list(plan.beamformers[int(user) - 1].shape) == shape

    def test_schedule_is_channel_independent(self, two_user_config):
        derived = derive(two_user_config)
        assert assemble_schedule(derived).to_dict() == assemble_schedule(derived).to_dict()

    def test_every_pattern_is_valid(self):
        config = AntennaConfig.from_pairs(5, [(5, 1), (4, 2), (5, 1)])
        schedule = assemble_schedule(derive(config))
        for user, per_slot in enumerate(schedule.patterns):
            for modes in per_slot:
                assert len(modes) == config.L[user]
                assert len(set(modes)) == len(modes)
                assert 1 <= min(modes) and max(modes) <= config.N[user]

    def test_rejects_bad_pattern(self, two_user_config):
        schedule = assemble_schedule(derive(two_user_config))
        with pytest.raises(ScheduleError):
            schedule.with_pattern(1, 0, (1, 1))

    def test_selection_matrix(self, two_user_config):
        schedule = assemble_schedule(derive(two_user_config))
        gamma = schedule.selection_matrix(1, 6, 3)
        np.testing.assert_array_equal(gamma, [[0, 0, 1], [1, 0, 0]])

    def test_trivial_schedule(self):
        schedule = assemble_schedule(derive(AntennaConfig.from_pairs(2, [(3, 3)])))
        assert schedule.n == 1
        assert schedule.patterns[0] == ((1, 2, 3),)


class TestSimulate:
    """Received-signal generation"""

    def test_matches_dense_model(self, two_user_config):
        derived = derive(two_user_config)
        plan = build_plan(two_user_config, derived, seed=0)
        schedule = assemble_schedule(derived)
        channels = draw_channels(two_user_config, ComplexGaussianGenerator(1))
        received = simulate(plan, schedule, channels)
        for user in range(2):
            G = block_diag(*[channels[user][schedule.rows(user, t)] for t in range(schedule.n)])
            np.testing.assert_allclose(received.y[user], G @ plan.x, atol=1e-12)
            V = plan.beamformers[user]
            np.testing.assert_allclose(channel_product(schedule, channels, user, V), G @ V, atol=1e-12)

    def test_channel_product_shapes(self, two_user_config):
        derived = derive(two_user_config)
        plan = build_plan(two_user_config, derived)
        schedule = assemble_schedule(derived)
        channels = draw_channels(two_user_config, 6)
        assert channel_product(schedule, channels, 1, np.zeros((42, 0))).shape == (28, 0)
        assert channel_product(schedule, channels, 0, plan.x).shape == (14, 1)
        with pytest.raises(ScheduleError, match="n\\*M"):
            channel_product(schedule, channels, 0, np.zeros((40, 2)))

    def test_block1_interference_is_phi_mixed(self, two_user_config):
        # user 2 reaches user 1 in block 1 as (phi kron h_p) s_j for the mode p selected there
        derived = derive(two_user_config)
        plan = build_plan(two_user_config, derived, seed=8)
        schedule = assemble_schedule(derived)
        H1 = draw_channels(two_user_config, 9)[0]
        phi = plan.phi[1]
        signal = plan.user_signal(1).reshape(plan.n, plan.M)
        seen = set()
        for block in plan.layout[1]:
            start, count = block.slots[0]
            assert count == 1 and start < 4
            h = H1[schedule.rows(0, start)]
            expected = np.kron(phi, h) @ plan.symbols[1][:, block.block]
            np.testing.assert_allclose(h @ signal[start], expected, atol=1e-12)
            seen.add(schedule.patterns[0][start])
        assert seen == {(1,), (2,)}

    def test_segments(self, two_user_config):
        derived = derive(two_user_config)
        plan = build_plan(two_user_config, derived)
        schedule = assemble_schedule(derived)
        received = simulate(plan, schedule, draw_channels(two_user_config, 2))
        assert received.segment(1).shape == (8,)
        assert received.segment(1, 0).shape == (4,)
        assert received.segment(0, 1).shape == (8,)

    def test_channels_are_independent_draws(self, two_user_config):
        channels = draw_channels(two_user_config, 3)
        assert channels[0].shape == (3, 3)
        assert not np.allclose(channels[0], channels[1])

    def test_noise_changes_observation(self, two_user_config):
        derived = derive(two_user_config)
        plan = build_plan(two_user_config, derived)
        schedule = assemble_schedule(derived)
        channels = draw_channels(two_user_config, 4)
        clean = simulate(plan, schedule, channels)
        noisy = simulate(plan, schedule, channels, noise_var=1e-2, source=5)
        gap = np.abs(noisy.y[0] - clean.y[0])
        assert 0 < gap.max() < 1.0

    def test_rejects_mismatched_channels(self, two_user_config):
        derived = derive(two_user_config)
        plan = build_plan(two_user_config, derived)
        schedule = assemble_schedule(derived)
        wrong = draw_channels(AntennaConfig.from_pairs(4, [(3, 1), (3, 2)]), 0)
        with pytest.raises(ScheduleError, match="columns"):
            simulate(plan, schedule, wrong)
        with pytest.raises(ScheduleError, match="channel matrices"):
            simulate(plan, schedule, draw_channels(AntennaConfig.from_pairs(3, [(3, 1)]), 0))
