"""Receive-mode switching schedules and the channel simulation.

Mode indices are 1-based (row numbers of H_k); slots are 1-based in the
pattern functions and 0-based in array storage.
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .indexing import IndexContext, f2, g
from .params import AntennaConfig, Case, DerivedParams, IcConfig, SchemeParams, scheme_params
from .precoder import TransmitPlan
from .random_matrices import ComplexGaussianGenerator, as_generator

logger = logging.getLogger(__name__)

Pattern = Tuple[int, ...]


class ScheduleError(Exception):
    # Raised for out-of-range pattern requests or inconsistent schedules
    pass


@dataclass(frozen=True)
class ChannelSet:
    matrices: Tuple[np.ndarray, ...]  # H_k, N_k x M, constant over the block

    def __getitem__(self, user: int) -> np.ndarray:
        return self.matrices[user]

    def __len__(self) -> int:
        return len(self.matrices)


def draw_channels(config: AntennaConfig, source: Union[int, ComplexGaussianGenerator]) -> ChannelSet:
    gen = as_generator(source)
    return ChannelSet(tuple(gen.matrix((user.N, config.M)) for user in config.users))


def draw_ic_channels(config: IcConfig, source: Union[int, ComplexGaussianGenerator]) -> ChannelSet:
    # H_k = [H_k1 ... H_kK], all cross links i.i.d.
    gen = as_generator(source)
    total = sum(user.M for user in config.users)
    return ChannelSet(tuple(gen.matrix((user.N, total)) for user in config.users))


def block1_pattern(scheme: SchemeParams, pos: int, j: int) -> Pattern:
    L, S = scheme.L[pos], scheme.S[pos]
    if not 1 <= j <= S:
        raise ScheduleError(f"pattern j={j} outside [1, {S}]")
    return tuple(range((j - 1) * L + 1, j * L + 1))


def _check_span(scheme: SchemeParams, pos: int, t: int) -> None:
    start, end = scheme.span(pos)
    if not start < t <= end:
        raise ScheduleError(f"slot t={t} outside the block-2 span [{start + 1}, {end}] "
                            f"of user {scheme.members[pos] + 1}")


def block2_desired_pattern(scheme: SchemeParams, pos: int, t: int) -> Pattern:
    """Modes used by a served user while its own block-2 sub-units arrive.

    With a remainder r = T mod L the pattern cycles through L*S variants: the
    r modes above L*S plus L - r modes of one block-1 group, cyclically
    shifted inside the group.
    """
    _check_span(scheme, pos, t)
    T, L, S = scheme.T[pos], scheme.L[pos], scheme.S[pos]
    tail = tuple(range(L * S + 1, T + 1))
    r = T % L
    if r == 0:
        return tail
    jj = 1 + (t - scheme.a[pos] - 1) % (L * S)
    p = (jj - 1) // L + 1
    k = (jj - 1) % L + 1
    return tail + tuple((p - 1) * L + ((k - 1 + m) % L) + 1 for m in range(L - r))


def block2_interference_pattern(scheme: SchemeParams, pos: int, pos_prime: int, t: int,
                                ctx: Optional[IndexContext] = None) -> Pattern:
    if pos == pos_prime:
        raise ScheduleError("interference pattern needs two distinct users")
    _check_span(scheme, pos_prime, t)
    ctx = ctx or IndexContext.from_scheme(scheme)
    unit = 1 + (t - 1 - scheme.a[pos_prime]) // (scheme.L[pos_prime] * scheme.U_vec[pos_prime])
    return block1_pattern(scheme, pos, f2(ctx, pos + 1, g(ctx, pos_prime + 1, unit, 1)))


@dataclass(frozen=True)
class SelectionSchedule:
    n: int
    L: Tuple[int, ...]
    patterns: Tuple[Tuple[Pattern, ...], ...]  # [user][slot] -> 1-based modes
    block1: Tuple[int, int]                    # half-open slot range
    spans: Dict[int, Tuple[int, int]]          # served user -> block-2 slot range

    def __post_init__(self):
        for user, per_slot in enumerate(self.patterns):
            if len(per_slot) != self.n:
                raise ScheduleError(f"user {user + 1}: {len(per_slot)} slots, expected {self.n}")
            for t, modes in enumerate(per_slot):
                if len(modes) != self.L[user] or len(set(modes)) != len(modes) or min(modes) < 1:
                    raise ScheduleError(f"user {user + 1}, slot {t + 1}: invalid pattern {modes}")

    def rows(self, user: int, t: int) -> np.ndarray:
        # 0-based row indices of H_user selected at 0-based slot t
        return np.asarray(self.patterns[user][t]) - 1

    def selection_matrix(self, user: int, t: int, N: int) -> np.ndarray:
        gamma = np.zeros((self.L[user], N))
        gamma[np.arange(self.L[user]), self.rows(user, t)] = 1.0
        return gamma

    def with_pattern(self, user: int, t: int, modes: Pattern) -> "SelectionSchedule":
        per_slot = list(self.patterns[user])
        per_slot[t] = tuple(modes)
        patterns = list(self.patterns)
        patterns[user] = tuple(per_slot)
        return replace(self, patterns=tuple(patterns))

    def to_dict(self) -> Dict:
        return {
            "n": self.n,
            "block1": list(self.block1),
            "spans": {str(u + 1): list(span) for u, span in sorted(self.spans.items())},
            "patterns": [[list(modes) for modes in per_slot] for per_slot in self.patterns],
        }


def _scheme_schedule(L: Sequence[int], scheme: SchemeParams) -> List[List[Pattern]]:
    ctx = IndexContext.from_scheme(scheme)
    patterns: List[List[Pattern]] = [
        [tuple(range(1, l + 1))] * scheme.n for l in L
    ]
    for pos, user in enumerate(scheme.members):
        slots = patterns[user]
        for t in range(1, scheme.block1_slots + 1):
            l = 1 + (t - 1) // scheme.U
            slots[t - 1] = block1_pattern(scheme, pos, f2(ctx, pos + 1, l))
        for other in range(scheme.size):
            start, end = scheme.span(other)
            for t in range(start + 1, end + 1):
                if other == pos:
                    slots[t - 1] = block2_desired_pattern(scheme, pos, t)
                else:
                    slots[t - 1] = block2_interference_pattern(scheme, pos, other, t, ctx)
    return patterns


def assemble_schedule(derived: DerivedParams, served: Optional[Sequence[int]] = None) -> SelectionSchedule:
    """Channel-independent switching schedule matching ``build_plan``'s choice of scheme"""
    if served is not None:
        scheme = scheme_params(derived.T, derived.L, tuple(served))
    elif derived.case is Case.CASE3_2:
        scheme = derived.scheme
    else:
        scheme = None

    if scheme is None:
        patterns = [[tuple(range(1, l + 1))] for l in derived.L]
        return SelectionSchedule(n=1, L=derived.L, patterns=tuple(map(tuple, patterns)),
                                 block1=(0, 1), spans={})

    patterns = _scheme_schedule(derived.L, scheme)
    spans = {user: scheme.span(pos) for pos, user in enumerate(scheme.members)}
    return SelectionSchedule(
        n=scheme.n, L=derived.L, patterns=tuple(map(tuple, patterns)),
        block1=(0, scheme.block1_slots), spans=spans,
    )


def channel_product(schedule: SelectionSchedule, channels: ChannelSet, user: int, V: np.ndarray) -> np.ndarray:
    """Gamma^n H^n V of one user, slot by slot; shape (n L_k) x V.shape[1]

    The block-diagonal Gamma^n H^n is never formed.
    """
    H = channels[user]
    M = H.shape[1]
    V = np.asarray(V)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] != schedule.n * M:
        raise ScheduleError(f"stack has {V.shape[0]} rows, expected n*M={schedule.n * M}")
    return np.vstack([H[schedule.rows(user, t)] @ V[t * M:(t + 1) * M] for t in range(schedule.n)])


@dataclass(frozen=True)
class ReceivedSignals:
    y: Dict[int, np.ndarray]  # user -> length n L_k, slot-major
    L: Tuple[int, ...]
    block1: Tuple[int, int]
    spans: Dict[int, Tuple[int, int]]

    def segment(self, user: int, source: Optional[int] = None) -> np.ndarray:
        """Block-1 observation when ``source`` is None, else the block-2 span of ``source``"""
        start, end = self.block1 if source is None else self.spans[source]
        L = self.L[user]
        return self.y[user][start * L:end * L]


def simulate(plan: TransmitPlan, schedule: SelectionSchedule, channels: ChannelSet,
             noise_var: Optional[float] = None,
             source: Union[int, ComplexGaussianGenerator] = 0) -> ReceivedSignals:
    if schedule.n != plan.n:
        raise ScheduleError(f"schedule has {schedule.n} slots, plan has {plan.n}")
    if len(channels) != plan.K:
        raise ScheduleError(f"{len(channels)} channel matrices for {plan.K} users")

    gen = as_generator(source) if noise_var else None
    X = plan.x.reshape(plan.n, plan.M)
    received = {}
    for user in range(plan.K):
        H = channels[user]
        if H.shape[1] != plan.M:
            raise ScheduleError(f"H_{user + 1} has {H.shape[1]} columns, expected M={plan.M}")
        if max(max(modes) for modes in schedule.patterns[user]) > H.shape[0]:
            raise ScheduleError(f"user {user + 1}: schedule selects a mode beyond N={H.shape[0]}")
        y = np.concatenate([H[schedule.rows(user, t)] @ X[t] for t in range(plan.n)])
        if gen is not None:
            y = y + np.sqrt(noise_var) * gen.matrix(y.shape)
        received[user] = y

    return ReceivedSignals(y=received, L=plan.L, block1=schedule.block1, spans=dict(schedule.spans))
