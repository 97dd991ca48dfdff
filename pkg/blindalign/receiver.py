"""Receiver side: interference cancellation, structured decoding and the
end-to-end simulation driver.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import block_diag
from tqdm import tqdm

from .analysis import column_basis, numerical_rank, proj_dim
from .indexing import IndexContext, f
from .params import AntennaConfig, DerivedParams, IcConfig, derive, ic_derive
from .precoder import TransmitPlan, build_Q, build_plan, build_ic_plan, vec
from .random_matrices import TRIAL_STREAM, ComplexGaussianGenerator
from .switching import (
    ChannelSet, ReceivedSignals, SelectionSchedule, assemble_schedule, draw_channels,
    channel_product, draw_ic_channels, simulate,
)

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12   # per-block systems above this are reported as singular
DECODE_TOL = 1e-8   # max abs symbol error on noiseless runs
ORACLE_TOL = 1e-6   # structured vs generic decoder agreement


class DecodeError(Exception):
    # Raised for inconsistent receiver inputs (never for ill-conditioning)
    pass


def cancel_interference(user: int, y0: np.ndarray, segments: Dict[int, np.ndarray],
                        plan: TransmitPlan) -> np.ndarray:
    """Remove every other user's block-1 contribution from y0.

    ``segments`` maps each other served user to this receiver's observation
    of that user's block-2 span. In the remainder case the block-2
    observation is mapped through (I kron Q kron I_L) first.
    """
    scheme = plan.scheme
    if scheme is None:
        return np.array(y0, copy=True)
    pos = scheme.position(user)
    L_i = plan.L[user]
    seg_len = scheme.U * L_i
    if y0.shape[0] != scheme.block1_slots * L_i:
        raise DecodeError(f"y0 of user {user + 1} has length {y0.shape[0]}, "
                          f"expected {scheme.block1_slots * L_i}")

    ctx = IndexContext.from_scheme(scheme)
    cleaned = np.array(y0, dtype=complex, copy=True)
    relations: Dict[Tuple[int, int], np.ndarray] = {}
    for l in range(1, scheme.W + 1):
        piece = cleaned[(l - 1) * seg_len:l * seg_len]
        for other_pos, other in enumerate(scheme.members):
            if other == user:
                continue
            if other not in segments:
                raise DecodeError(f"missing block-2 observation of user {other + 1}")
            J, k = f(ctx, other_pos + 1, l)
            unit_len = scheme.L[other_pos] * scheme.U_vec[other_pos] * L_i
            source = segments[other][(J - 1) * unit_len:J * unit_len]
            if source.shape[0] != unit_len:
                raise DecodeError(f"block-2 observation of user {other + 1} is too short")
            if scheme.remainder(other_pos):
                if other not in plan.phi:
                    raise DecodeError(f"phi of user {other + 1} is required for cancellation")
                if (other_pos, k) not in relations:
                    S_o, U_o = scheme.S[other_pos], scheme.U_vec[other_pos]
                    Q = build_Q(plan.phi[other], scheme.L[other_pos], S_o, k)
                    relations[(other_pos, k)] = np.kron(np.eye(U_o // S_o), np.kron(Q, np.eye(L_i)))
                R = relations[(other_pos, k)]
                if R.shape != (seg_len, unit_len):
                    raise DecodeError(f"relation for user {other + 1} has shape {R.shape}, "
                                      f"expected {(seg_len, unit_len)}")
                source = R @ source
            elif unit_len != seg_len:
                raise DecodeError(f"unit of user {other + 1} spans {unit_len} samples, expected {seg_len}")
            piece -= source
    return cleaned


@dataclass(frozen=True)
class DecodeOutcome:
    symbols: np.ndarray
    ok: bool
    worst_condition: float


def _trivial_decode(user: int, y: np.ndarray, channels: ChannelSet, plan: TransmitPlan,
                    schedule: SelectionSchedule) -> DecodeOutcome:
    A = channels[user][schedule.rows(user, 0)] @ plan.beamformers[user]
    condition = float(np.linalg.cond(A))
    if condition > COND_LIMIT:
        return DecodeOutcome(np.zeros_like(plan.symbols[user]), False, condition)
    solution, *_ = np.linalg.lstsq(A, y, rcond=None)
    return DecodeOutcome(solution.reshape(plan.symbols[user].shape, order="F"), True, condition)


def decode(user: int, y0_clean: np.ndarray, y_own: np.ndarray, channels: ChannelSet,
           plan: TransmitPlan, schedule: SelectionSchedule) -> DecodeOutcome:
    """Recover a user's symbols block by block from interference-free observations.

    Every alignment block yields one square (L T) x (L T) system: the
    phi-mixed first sub-vector, the remaining block-1 sub-vectors and the
    block-2 sub-vector, each seen through the modes selected in its slots.
    """
    scheme = plan.scheme
    if scheme is None:
        return _trivial_decode(user, y0_clean, channels, plan, schedule)

    pos = scheme.position(user)
    T, L, S = scheme.T[pos], scheme.L[pos], scheme.S[pos]
    L_rx = plan.L[user]
    offset = plan.offsets[user]
    phi = plan.phi.get(user)
    H = channels[user][:, offset:offset + T]
    own_start = scheme.a[pos]

    recovered = np.zeros_like(plan.symbols[user])
    ok, worst = True, 0.0
    for block in plan.layout[user]:
        systems, observations = [], []
        for q, (start, count) in enumerate(block.slots):
            source, base = (y_own, own_start) if q == S else (y0_clean, 0)
            local = block_diag(*[H[schedule.rows(user, t)] for t in range(start, start + count)])
            mix = np.kron(phi, np.eye(T)) if (q == 0 and phi is not None) else np.eye(L * T)
            systems.append(local @ mix)
            observations.append(source[(start - base) * L_rx:(start - base + count) * L_rx])
        B = np.vstack(systems)
        if B.shape != (L * T, L * T):
            raise DecodeError(f"block {block.block} of user {user + 1} gives a {B.shape} system")
        condition = float(np.linalg.cond(B))
        worst = max(worst, condition)
        if condition > COND_LIMIT:
            logger.warning(f"user {user + 1}, block {block.block}: condition number {condition:.3e}")
            ok = False
            continue
        recovered[:, block.block] = np.linalg.solve(B, np.concatenate(observations))
    return DecodeOutcome(recovered, ok, worst)


def generic_decode_oracle(user: int, y: np.ndarray, channels: ChannelSet, plan: TransmitPlan,
                          schedule: SelectionSchedule) -> DecodeOutcome:
    """Zero-force the interference space by projection, then least squares"""
    expected = plan.n * plan.L[user]
    if y.shape[0] != expected:
        raise DecodeError(f"received vector has length {y.shape[0]}, expected {expected}")
    A = channel_product(schedule, channels, user, plan.beamformers[user])
    interference = channel_product(schedule, channels, user, plan.stacked_beamformers(exclude=user))
    Q = column_basis(interference)
    if Q.shape[1]:
        A = A - Q @ (Q.conj().T @ A)
        y = y - Q @ (Q.conj().T @ y)
    if numerical_rank(A) < A.shape[1]:
        return DecodeOutcome(np.zeros_like(plan.symbols[user]), False, float("inf"))
    solution, *_ = np.linalg.lstsq(A, y, rcond=None)
    return DecodeOutcome(solution.reshape(plan.symbols[user].shape, order="F"), True,
                         float(np.linalg.cond(A)))


@dataclass(frozen=True)
class LdofReport:
    achieved: Tuple[Fraction, ...]
    expected: Tuple[Fraction, ...]
    dimensions: Dict[int, int]
    passed: bool

    @property
    def sum_ldof(self) -> Fraction:
        return sum(self.achieved, Fraction(0))


def verify_ldof(plan: TransmitPlan, schedule: SelectionSchedule, channels: ChannelSet) -> LdofReport:
    achieved = [Fraction(0)] * plan.K
    dimensions = {}
    passed = True
    for user in plan.served:
        dim = proj_dim(channel_product(schedule, channels, user, plan.stacked_beamformers(exclude=user)),
                       channel_product(schedule, channels, user, plan.beamformers[user]))
        dimensions[user] = dim
        achieved[user] = Fraction(dim, plan.n)
        if dim != plan.symbol_count(user):
            passed = False
    passed = passed and tuple(achieved) == plan.targets
    return LdofReport(tuple(achieved), plan.targets, dimensions, passed)


@dataclass(frozen=True)
class UserResult:
    user: int
    symbols: int
    max_error: float
    oracle_gap: float
    decoded: bool
    condition: float
    ldof: Fraction


@dataclass(frozen=True)
class SimulationResult:
    seed: int
    n: int
    users: Tuple[UserResult, ...]
    ldof: LdofReport
    recovered: Dict[int, np.ndarray] = field(repr=False)

    @property
    def success(self) -> bool:
        return all(u.decoded for u in self.users) and self.ldof.passed

    @property
    def max_error(self) -> float:
        return max((u.max_error for u in self.users), default=0.0)

    def to_dict(self) -> Dict:
        return {
            "seed": self.seed,
            "n": self.n,
            "success": self.success,
            "max_error": self.max_error,
            "ldof_pass": self.ldof.passed,
            "users": [
                {
                    "user": u.user + 1,
                    "symbols": u.symbols,
                    "max_error": u.max_error,
                    "oracle_gap": u.oracle_gap,
                    "decoded": u.decoded,
                    "ldof": u.ldof,
                }
                for u in self.users
            ],
        }


@dataclass(frozen=True)
class TrialSummary:
    trials: int
    successes: int
    worst_error: float
    ldof_ok: bool
    sum_ldof: Fraction
    failing_seeds: Tuple[int, ...]

    def to_dict(self) -> Dict:
        return {
            "trials": self.trials,
            "successes": self.successes,
            "worst_error": self.worst_error,
            "ldof_ok": self.ldof_ok,
            "sum_ldof": self.sum_ldof,
            "failing_seeds": list(self.failing_seeds),
        }


class BlindAlignmentSimulator:
    """End-to-end pipeline: plan, schedule, channels, cancellation, decoding.

    Phi and the schedule are fixed at construction; every trial draws fresh
    channels and symbols from its own seed.
    """
    DEFAULT_TRIALS = 100

    def __init__(self, derived: DerivedParams, plan: TransmitPlan, schedule: SelectionSchedule,
                 channel_sampler, noise_var: Optional[float] = None, tol: float = DECODE_TOL,
                 log_level: int = logging.INFO):
        self.logger = logging.getLogger(__name__)
        self.logger.setLevel(log_level)
        self.derived = derived
        self.plan = plan
        self.schedule = schedule
        self.channel_sampler = channel_sampler
        self.noise_var = noise_var
        self.tol = tol

    @classmethod
    def for_config(cls, config: AntennaConfig, seed: int = 0, served: Optional[Sequence[int]] = None,
                   **kwargs) -> "BlindAlignmentSimulator":
        derived = derive(config)
        plan = build_plan(config, derived, seed=seed, served=served)
        schedule = assemble_schedule(derived, served=served)
        return cls(derived, plan, schedule, lambda gen: draw_channels(config, gen), **kwargs)

    @classmethod
    def for_ic(cls, config: IcConfig, seed: int = 0, **kwargs) -> "BlindAlignmentSimulator":
        derived = ic_derive(config)
        plan = build_ic_plan(config, seed=seed)
        schedule = assemble_schedule(derived)
        return cls(derived, plan, schedule, lambda gen: draw_ic_channels(config, gen), **kwargs)

    def receive(self, plan: TransmitPlan, channels: ChannelSet, received: ReceivedSignals,
                user: int) -> Tuple[DecodeOutcome, DecodeOutcome]:
        """Structured and oracle decodes of one user"""
        y_full = received.y[user]
        if plan.scheme is None:
            structured = decode(user, y_full, y_full, channels, plan, self.schedule)
        else:
            segments = {other: received.segment(user, other) for other in plan.served}
            y0 = cancel_interference(user, received.segment(user), segments, plan)
            structured = decode(user, y0, segments[user], channels, plan, self.schedule)
        oracle = generic_decode_oracle(user, y_full, channels, plan, self.schedule)
        return structured, oracle

    def run_trial(self, seed: int) -> SimulationResult:
        gen = ComplexGaussianGenerator(seed, stream=TRIAL_STREAM)
        channels = self.channel_sampler(gen)
        plan = self.plan.redraw_symbols(gen)
        received = simulate(plan, self.schedule, channels, self.noise_var, gen)
        ldof = verify_ldof(plan, self.schedule, channels)

        users, recovered = [], {}
        for user in plan.served:
            structured, oracle = self.receive(plan, channels, received, user)
            error = float(np.max(np.abs(structured.symbols - plan.symbols[user])))
            gap = float(np.max(np.abs(structured.symbols - oracle.symbols)))
            # noisy runs report their error; only noiseless runs are held to the tolerance
            if self.noise_var:
                decoded = structured.ok
            else:
                decoded = structured.ok and error < self.tol
            if decoded and not self.noise_var and oracle.ok and gap > ORACLE_TOL:
                self.logger.warning(f"seed {seed}: oracle disagrees with user {user + 1} by {gap:.3e}")
                decoded = False
            recovered[user] = structured.symbols
            users.append(UserResult(
                user=user, symbols=plan.symbol_count(user), max_error=error, oracle_gap=gap,
                decoded=decoded, condition=structured.worst_condition, ldof=ldof.achieved[user],
            ))

        result = SimulationResult(seed=seed, n=plan.n, users=tuple(users), ldof=ldof, recovered=recovered)
        self.logger.debug(f"seed {seed}: success={result.success} max_error={result.max_error:.3e}")
        return result

    def run_trials(self, trials: int = DEFAULT_TRIALS, seed: int = 0,
                   progress: bool = False) -> TrialSummary:
        successes, worst, ldof_ok = 0, 0.0, True
        failing: List[int] = []
        totals: List[Fraction] = []
        for t in tqdm(range(trials), desc="trials", disable=not progress, leave=False):
            result = self.run_trial(seed + t)
            worst = max(worst, result.max_error)
            ldof_ok = ldof_ok and result.ldof.passed
            totals.append(result.ldof.sum_ldof)
            if result.success:
                successes += 1
            else:
                failing.append(seed + t)
        # trials must agree on sum_ldof; the smallest value is reported
        if len(set(totals)) > 1:
            self.logger.warning(f"sum LDoF differs across trials: {sorted(set(totals))}")
            ldof_ok = False
        total = min(totals, default=Fraction(0))
        if failing:
            self.logger.warning(f"{len(failing)} of {trials} trials failed, first seed {failing[0]}")
        return TrialSummary(trials, successes, worst, ldof_ok, total, tuple(failing))
