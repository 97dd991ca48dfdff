from dataclasses import replace
from fractions import Fraction
from itertools import chain

import numpy as np
import pytest

from ..params import AntennaConfig, Case, IcConfig, config_grid, derive, ic_sum_ldof, sum_ldof
from ..precoder import build_plan
from ..random_matrices import TRIAL_STREAM, ComplexGaussianGenerator
from ..receiver import (
    BlindAlignmentSimulator, DecodeError, cancel_interference, decode, generic_decode_oracle, verify_ldof,
)
from ..switching import assemble_schedule, draw_channels, simulate

# simulation closure is run only where the dense beamformers stay small
MAX_SIMULATED_N = 60


@pytest.fixture
def two_user_run(two_user_config):
    derived = derive(two_user_config)
    plan = build_plan(two_user_config, derived, seed=42)
    schedule = assemble_schedule(derived)
    channels = draw_channels(two_user_config, ComplexGaussianGenerator(42, stream=TRIAL_STREAM))
    received = simulate(plan, schedule, channels)
    return plan, schedule, channels, received


class TestCancellation:
    """Block-1 interference removal"""

    def test_removes_other_user_exactly(self, two_user_run):
        plan, schedule, channels, received = two_user_run
        for user in plan.served:
            segments = {u: received.segment(user, u) for u in plan.served}
            cleaned = cancel_interference(user, received.segment(user), segments, plan)
            # what remains is this user's own block-1 contribution
            H = channels[user]
            own = np.concatenate([
                H[schedule.rows(user, t)] @ plan.user_signal(user).reshape(plan.n, plan.M)[t]
                for t in range(4)
            ])
            np.testing.assert_allclose(cleaned, own, atol=1e-10)
            assert not np.allclose(received.segment(user), own)

    def test_missing_segment(self, two_user_run):
        plan, _, _, received = two_user_run
        with pytest.raises(DecodeError, match="missing"):
            cancel_interference(0, received.segment(0), {}, plan)

    def test_wrong_block1_length(self, two_user_run):
        plan, _, _, received = two_user_run
        segments = {u: received.segment(0, u) for u in plan.served}
        with pytest.raises(DecodeError, match="expected 4"):
            cancel_interference(0, received.segment(0)[:3], segments, plan)


class TestDecode:
    """Structured and generic decoders"""

    def test_structured_decode_recovers_symbols(self, two_user_run):
        plan, schedule, channels, received = two_user_run
        for user in plan.served:
            segments = {u: received.segment(user, u) for u in plan.served}
            y0 = cancel_interference(user, received.segment(user), segments, plan)
            outcome = decode(user, y0, segments[user], channels, plan, schedule)
            assert outcome.ok
            assert np.max(np.abs(outcome.symbols - plan.symbols[user])) < 1e-8

    def test_oracle_agrees(self, two_user_run):
        plan, schedule, channels, received = two_user_run
        for user in plan.served:
            oracle = generic_decode_oracle(user, received.y[user], channels, plan, schedule)
            assert oracle.ok
            assert np.max(np.abs(oracle.symbols - plan.symbols[user])) < 1e-6

    def test_corrupted_schedule_breaks_decoding(self, two_user_run):
        plan, schedule, channels, _ = two_user_run
        # user 2 listens to mode 1 twice instead of modes 3 and 1
        broken = schedule.with_pattern(1, 6, (1, 2)).with_pattern(1, 7, (1, 2))
        received = simulate(plan, broken, channels)
        segments = {u: received.segment(1, u) for u in plan.served}
        y0 = cancel_interference(1, received.segment(1), segments, plan)
        outcome = decode(1, y0, segments[1], channels, plan, broken)
        report = verify_ldof(plan, broken, channels)
        assert not report.passed
        assert not outcome.ok or np.max(np.abs(outcome.symbols - plan.symbols[1])) > 1e-6

    def test_verify_ldof(self, two_user_run):
        plan, schedule, channels, _ = two_user_run
        report = verify_ldof(plan, schedule, channels)
        assert report.passed
        assert report.achieved == (Fraction(3, 7), Fraction(12, 7))
        assert report.dimensions == {0: 6, 1: 24}
        assert report.sum_ldof == Fraction(15, 7)


class TestSimulator:
    """End-to-end runs"""

    def test_two_user_trials(self, two_user_config):
        simulator = BlindAlignmentSimulator.for_config(two_user_config, seed=42)
        summary = simulator.run_trials(100, seed=42)
        assert summary.successes >= 99
        assert summary.ldof_ok
        assert summary.sum_ldof == Fraction(15, 7)

    def test_trial_is_reproducible(self, two_user_config):
        simulator = BlindAlignmentSimulator.for_config(two_user_config, seed=1)
        a, b = simulator.run_trial(17), simulator.run_trial(17)
        assert a.to_dict() == b.to_dict()

    @pytest.mark.parametrize("M, users", [
        (3, [(2, 2), (1, 1)]),
        (2, [(3, 3), (2, 1)]),
        (3, [(3, 2), (2, 1)]),
    ])
    def test_single_user_cases(self, M, users):
        config = AntennaConfig.from_pairs(M, users)
        simulator = BlindAlignmentSimulator.for_config(config)
        assert simulator.plan.n == 1
        summary = simulator.run_trials(20)
        assert summary.successes == 20
        assert summary.sum_ldof == sum_ldof(config)

    def test_three_user_config(self):
        config = AntennaConfig.from_pairs(3, [(3, 1), (3, 1), (3, 1)])
        simulator = BlindAlignmentSimulator.for_config(config, seed=3)
        assert simulator.plan.n == 160
        summary = simulator.run_trials(5, seed=3)
        assert summary.successes == 5
        assert summary.sum_ldof == Fraction(9, 5)

    def test_region_vertex_realization(self):
        config = AntennaConfig.from_pairs(4, [(4, 2), (4, 1)])
        for served, expected in (([0], (2, 0)), ([1], (0, 1)), ([0, 1], (Fraction(12, 7), Fraction(4, 7)))):
            simulator = BlindAlignmentSimulator.for_config(config, served=served)
            result = simulator.run_trial(0)
            assert result.success
            assert result.ldof.achieved == tuple(Fraction(v) for v in expected)

    def test_remainder_with_several_sub_units(self):
        # T=5, L=2 gives a remainder and two sub-units per alignment unit
        config = AntennaConfig.from_pairs(5, [(5, 2), (5, 1)])
        vertex = BlindAlignmentSimulator.for_config(config, served=[0])
        assert vertex.plan.n == 10
        assert vertex.run_trials(5).successes == 5
        full = BlindAlignmentSimulator.for_config(config, seed=1)
        assert full.plan.n == 184
        summary = full.run_trials(2, seed=1)
        assert summary.successes == 2
        assert summary.sum_ldof == sum_ldof(config)

    @pytest.mark.parametrize("M, users, served, n, expected", [
        (5, [(5, 3)], [0], 5, Fraction(3)),
        (8, [(8, 3)], [0], 16, Fraction(3)),
        (5, [(5, 3), (5, 1)], None, 88, Fraction(35, 11)),
    ])
    def test_three_stream_users_with_remainder_two(self, M, users, served, n, expected):
        # T mod L = 2 with L = 3: block-2 patterns mix two remainder modes with one group mode
        config = AntennaConfig.from_pairs(M, users)
        simulator = BlindAlignmentSimulator.for_config(config, seed=5, served=served)
        assert simulator.plan.n == n
        summary = simulator.run_trials(5, seed=5)
        assert summary.successes == 5
        assert summary.worst_error < 1e-8
        assert summary.ldof_ok
        assert summary.sum_ldof == expected

    def test_trials_must_agree_on_sum_ldof(self, two_user_config, monkeypatch):
        simulator = BlindAlignmentSimulator.for_config(two_user_config)
        genuine = simulator.run_trial

        def drifting(seed):
            result = genuine(seed)
            if seed % 2:
                ldof = replace(result.ldof, achieved=(Fraction(3, 7), Fraction(1)))
                result = replace(result, ldof=ldof)
            return result

        monkeypatch.setattr(simulator, "run_trial", drifting)
        summary = simulator.run_trials(2)
        assert not summary.ldof_ok
        assert summary.sum_ldof == Fraction(10, 7)

    def test_interference_channel(self):
        config = IcConfig.from_triples([(3, 3, 1)] * 3)
        simulator = BlindAlignmentSimulator.for_ic(config, seed=0)
        assert simulator.plan.n == 160
        summary = simulator.run_trials(100)
        assert summary.successes >= 99
        assert summary.ldof_ok
        assert summary.sum_ldof == ic_sum_ldof(config) == Fraction(9, 5)

    def test_small_interference_channel(self):
        config = IcConfig.from_triples([(2, 2, 1), (2, 2, 1)])
        summary = BlindAlignmentSimulator.for_ic(config).run_trials(10)
        assert summary.successes == 10
        assert summary.sum_ldof == Fraction(4, 3)

    def test_noise_run_reports_error(self, two_user_config):
        simulator = BlindAlignmentSimulator.for_config(two_user_config, noise_var=1e-10)
        result = simulator.run_trial(0)
        assert result.ldof.passed
        assert result.success
        assert 0 < result.max_error < 1e-2


class TestClosure:
    """Symbols per slot match the closed form"""

    def test_bookkeeping_over_grid(self):
        grid = chain(
            config_grid([2, 3], [3, 4, 5, 6], [2, 3, 4, 5, 6], [1, 2, 3]),
            config_grid([4], [4, 6], [2, 3, 4, 5, 6], [1, 2, 3]),
        )
        for config in grid:
            derived = derive(config)
            if derived.case is not Case.CASE3_2:
                continue
            s = derived.scheme
            symbols = sum(s.symbol_count(p) for p in range(s.size))
            assert Fraction(symbols, s.n) == sum_ldof(config)

    def test_simulation_over_small_blocks(self):
        checked = 0
        for config in config_grid([2, 3], [3, 4], [2, 3, 4], [1, 2]):
            derived = derive(config)
            if derived.case is not Case.CASE3_2 or derived.n > MAX_SIMULATED_N:
                continue
            summary = BlindAlignmentSimulator.for_config(config, seed=checked).run_trials(2, seed=checked)
            assert summary.successes == 2, config
            assert summary.sum_ldof == sum_ldof(config), config
            checked += 1
        assert checked > 0
