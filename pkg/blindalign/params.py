"""Antenna configurations and the closed-form linear-DoF expressions.

Every DoF value is an exact ``Fraction``; floats never enter the formulas.
User indices are 0-based in the Python API and 1-based in reports.
"""
import logging
import numbers
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from itertools import combinations, product
from math import prod
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    # Raised when a configuration violates the model's invariants
    pass


class Case(Enum):
    CASE1 = "Case1"      # M <= L_max
    CASE2 = "Case2"      # M > L_max, no user with T_k > L_max
    CASE3_1 = "Case3_1"  # active set nonempty, eta <= L_max
    CASE3_2 = "Case3_2"  # active set nonempty, eta > L_max


def _check_positive_int(name: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if value < 1:
        raise ConfigError(f"{name}: must be >= 1, got {value}")


@dataclass(frozen=True)
class UserAntennas:
    N: int  # preset modes
    L: int  # RF chains


@dataclass(frozen=True)
class AntennaConfig:
    """Broadcast-channel instance: M transmit antennas, one entry per user"""
    M: int
    users: Tuple[UserAntennas, ...]

    def __post_init__(self):
        _check_positive_int("M", self.M)
        if len(self.users) < 1:
            raise ConfigError("users: at least one user is required")
        for k, user in enumerate(self.users):
            _check_positive_int(f"users[{k}].N", user.N)
            _check_positive_int(f"users[{k}].L", user.L)
            if user.N < user.L:
                raise ConfigError(f"users[{k}]: N={user.N} must be >= L={user.L}")

    @classmethod
    def from_pairs(cls, M: int, pairs: Iterable[Tuple[int, int]]) -> "AntennaConfig":
        return cls(M, tuple(UserAntennas(N, L) for N, L in pairs))

    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def N(self) -> Tuple[int, ...]:
        return tuple(user.N for user in self.users)

    @property
    def L(self) -> Tuple[int, ...]:
        return tuple(user.L for user in self.users)


@dataclass(frozen=True)
class IcUser:
    M: int  # transmit antennas of this user's transmitter
    N: int
    L: int


@dataclass(frozen=True)
class IcConfig:
    """Interference-channel instance, one transmitter per receiver"""
    users: Tuple[IcUser, ...]

    def __post_init__(self):
        if len(self.users) < 1:
            raise ConfigError("users: at least one user is required")
        for k, user in enumerate(self.users):
            for name in ("M", "N", "L"):
                _check_positive_int(f"users[{k}].{name}", getattr(user, name))
            if user.N < user.L:
                raise ConfigError(f"users[{k}]: N={user.N} must be >= L={user.L}")
            if user.M < user.N:
                raise ConfigError(f"users[{k}]: M={user.M} must be >= N={user.N}")

    @classmethod
    def from_triples(cls, triples: Iterable[Tuple[int, int, int]]) -> "IcConfig":
        return cls(tuple(IcUser(M, N, L) for M, N, L in triples))

    @property
    def K(self) -> int:
        return len(self.users)


@dataclass(frozen=True)
class SchemeParams:
    """Block structure of the alignment scheme over a served set.

    ``members`` lists original user indices in served order; all other
    tuples are indexed by position in ``members``. ``a[pos]`` is the number
    of slots preceding that user's block-2 span.
    """
    members: Tuple[int, ...]
    T: Tuple[int, ...]
    L: Tuple[int, ...]
    S: Tuple[int, ...]
    U_vec: Tuple[int, ...]
    W_vec: Tuple[int, ...]
    U: int
    W: int
    n: int
    a: Tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def block1_slots(self) -> int:
        return self.U * self.W

    def remainder(self, pos: int) -> int:
        return self.T[pos] % self.L[pos]

    def span(self, pos: int) -> Tuple[int, int]:
        # half-open 0-based slot range of the block-2 span of a served user
        start = self.a[pos]
        return start, start + self.L[pos] * self.U_vec[pos] * self.W_vec[pos]

    def symbol_count(self, pos: int) -> int:
        return self.L[pos] * self.T[pos] * self.U_vec[pos] * self.W_vec[pos]

    def position(self, user: int) -> int:
        try:
            return self.members.index(user)
        except ValueError:
            raise ConfigError(f"user {user + 1} is not served by this scheme")


@dataclass(frozen=True)
class DerivedParams:
    M: int
    T: Tuple[int, ...]
    L: Tuple[int, ...]
    Lmax: int
    Lambda: Tuple[int, ...]
    eta: Fraction
    case: Case
    scheme: Optional[SchemeParams]
    offsets: Tuple[int, ...]  # first transmit antenna of each user's embedding

    @property
    def K(self) -> int:
        return len(self.T)

    @property
    def to_local(self) -> Dict[int, int]:
        return {user: pos for pos, user in enumerate(self.Lambda)}

    @property
    def S(self) -> Tuple[int, ...]:
        return self.scheme.S if self.scheme else ()

    @property
    def Uvec(self) -> Tuple[int, ...]:
        return self.scheme.U_vec if self.scheme else ()

    @property
    def Wvec(self) -> Tuple[int, ...]:
        return self.scheme.W_vec if self.scheme else ()

    @property
    def U(self) -> Optional[int]:
        return self.scheme.U if self.scheme else None

    @property
    def W(self) -> Optional[int]:
        return self.scheme.W if self.scheme else None

    @property
    def n(self) -> Optional[int]:
        return self.scheme.n if self.scheme else None

    @property
    def a(self) -> Tuple[int, ...]:
        return self.scheme.a if self.scheme else ()

    @property
    def served_user(self) -> int:
        # lowest index among the users with the most RF chains
        return self.L.index(self.Lmax)


def scheme_params(T: Sequence[int], L: Sequence[int], members: Sequence[int]) -> SchemeParams:
    """S/U/W family and block offsets for the users in ``members``"""
    if not members:
        raise ConfigError("served set must be nonempty")
    T_s = tuple(T[k] for k in members)
    L_s = tuple(L[k] for k in members)
    for k, t, l in zip(members, T_s, L_s):
        if t <= l:
            raise ConfigError(f"user {k + 1}: T={t} must exceed L={l} to be served")

    S = tuple(t // l - 1 if t % l == 0 else t // l for t, l in zip(T_s, L_s))
    diffs = tuple(t - l for t, l in zip(T_s, L_s))
    U = prod(diffs)
    W = prod(S)
    U_vec = tuple(s * U // d for s, d in zip(S, diffs))
    W_vec = tuple(W // s for s in S)

    a = []
    offset = U * W
    for l, u_i, w_i in zip(L_s, U_vec, W_vec):
        a.append(offset)
        offset += l * u_i * w_i

    return SchemeParams(
        members=tuple(members), T=T_s, L=L_s, S=S, U_vec=U_vec, W_vec=W_vec,
        U=U, W=W, n=offset, a=tuple(a),
    )


def eta(T: Sequence[int], L: Sequence[int], members: Sequence[int]) -> Fraction:
    if not members:
        return Fraction(0)
    num = sum(Fraction(T[k] * L[k], T[k] - L[k]) for k in members)
    den = 1 + sum(Fraction(L[k], T[k] - L[k]) for k in members)
    return num / den


def _classify(M: int, Lmax: int, Lambda: Sequence[int], eta_value: Fraction) -> Case:
    if M <= Lmax:
        return Case.CASE1
    if not Lambda:
        return Case.CASE2
    if eta_value <= Lmax:
        return Case.CASE3_1
    return Case.CASE3_2


def _derived(M: int, T: Tuple[int, ...], L: Tuple[int, ...], offsets: Tuple[int, ...]) -> DerivedParams:
    Lmax = max(L)
    Lambda = tuple(k for k, t in enumerate(T) if t > Lmax)
    eta_value = eta(T, L, Lambda)
    case = _classify(M, Lmax, Lambda, eta_value)
    scheme = scheme_params(T, L, Lambda) if Lambda else None

    logger.debug(f"T={T} Lmax={Lmax} Lambda={Lambda} eta={eta_value} case={case.value}")
    if scheme:
        logger.debug(f"S={scheme.S} U_vec={scheme.U_vec} W_vec={scheme.W_vec} n={scheme.n}")

    return DerivedParams(
        M=M, T=T, L=L, Lmax=Lmax, Lambda=Lambda, eta=eta_value,
        case=case, scheme=scheme, offsets=offsets,
    )


def derive(config: AntennaConfig) -> DerivedParams:
    T = tuple(min(config.M, user.N) for user in config.users)
    return _derived(config.M, T, config.L, (0,) * config.K)


def ic_derive(config: IcConfig) -> DerivedParams:
    """Broadcast view of an interference channel: T_k = N_k, stacked antennas"""
    offsets = []
    total = 0
    for user in config.users:
        offsets.append(total)
        total += user.M
    T = tuple(user.N for user in config.users)
    L = tuple(user.L for user in config.users)
    return _derived(total, T, L, tuple(offsets))


def vertex_values(T: Sequence[int], L: Sequence[int], members: Sequence[int], K: int) -> Tuple[Fraction, ...]:
    # per-user LDoF when exactly ``members`` are served by the scheme
    values = [Fraction(0)] * K
    if not members:
        return tuple(values)
    den = 1 + sum(Fraction(L[k], T[k] - L[k]) for k in members)
    for k in members:
        values[k] = Fraction(T[k] * L[k], T[k] - L[k]) / den
    return tuple(values)


def ldof_targets(derived: DerivedParams) -> Tuple[Fraction, ...]:
    if derived.case is Case.CASE3_2:
        return vertex_values(derived.T, derived.L, derived.Lambda, derived.K)
    values = [Fraction(0)] * derived.K
    values[derived.served_user] = Fraction(min(derived.M, derived.Lmax))
    return tuple(values)


def sum_ldof(config: AntennaConfig) -> Fraction:
    derived = derive(config)
    return min(Fraction(config.M), max(Fraction(derived.Lmax), derived.eta))


def per_user_ldof(config: AntennaConfig) -> Tuple[Fraction, ...]:
    return ldof_targets(derive(config))


def ic_sum_ldof(config: IcConfig) -> Fraction:
    derived = ic_derive(config)
    return max(Fraction(derived.Lmax), derived.eta)


def symmetric_sum_ldof(M: int, N: int, L: int, K: int) -> Fraction:
    """Sum LDoF of K identical users in closed form"""
    T = min(M, N)
    if T <= L:
        return Fraction(min(M, L))
    return min(Fraction(M), max(Fraction(L), Fraction(K * L * T, T - L + K * L)))


def symmetric_ic_sum_ldof(N: int, L: int, K: int) -> Fraction:
    if N <= L:
        return Fraction(L)
    return max(Fraction(L), Fraction(K * L * N, K * L + N - L))


@dataclass(frozen=True)
class RegionVertex:
    active: Tuple[int, ...]
    values: Tuple[Fraction, ...]
    slacks: Tuple[Fraction, ...]  # 1 - lhs of each region inequality


@dataclass(frozen=True)
class RegionReport:
    """Corner points of the LDoF region plus its defining inequalities.

    Inequality k reads sum_j coefficients[k][j] * d_j <= 1.
    """
    vertices: Tuple[RegionVertex, ...]
    coefficients: Tuple[Tuple[Fraction, ...], ...]

    def contains(self, point: Sequence[Fraction]) -> bool:
        if any(d < 0 for d in point):
            return False
        return all(sum(c * d for c, d in zip(row, point)) <= 1 for row in self.coefficients)


def region_vertices(config: AntennaConfig) -> RegionReport:
    derived = derive(config)
    if config.M <= derived.Lmax:
        raise ConfigError(f"region requires M > L_max (M={config.M}, L_max={derived.Lmax})")
    for k, user in enumerate(config.users):
        if user.N <= derived.Lmax:
            raise ConfigError(
                f"region requires N_k > L_max for every user (users[{k}].N={user.N}, L_max={derived.Lmax})"
            )

    K = config.K
    T, L = derived.T, derived.L
    coefficients = tuple(
        tuple(Fraction(1, L[k]) if j == k else Fraction(1, T[j]) for j in range(K))
        for k in range(K)
    )

    seen: Dict[Tuple[Fraction, ...], RegionVertex] = {}
    for size in range(K + 1):
        for active in combinations(range(K), size):
            values = vertex_values(T, L, active, K)
            if values in seen:
                continue
            slacks = tuple(1 - sum(c * d for c, d in zip(row, values)) for row in coefficients)
            for k, slack in enumerate(slacks):
                if (slack == 0) != (k in active) or slack < 0:
                    raise ConfigError(f"vertex for active set {active} breaks inequality {k + 1}")
            seen[values] = RegionVertex(active=active, values=values, slacks=slacks)

    return RegionReport(vertices=tuple(seen.values()), coefficients=coefficients)


def outside_time_sharing(config: AntennaConfig, point: Sequence[Fraction]) -> bool:
    """True when the point beats time sharing between single-user operating points"""
    return sum(Fraction(d) / user.L for d, user in zip(point, config.users)) > 1


def config_grid(K_values: Iterable[int], M_values: Iterable[int], N_values: Iterable[int],
                L_values: Iterable[int]) -> List[AntennaConfig]:
    """All valid configurations on a rectangular parameter grid (N_k >= L_k)"""
    pairs = [(N, L) for N in N_values for L in L_values if N >= L]
    configs = []
    for K in K_values:
        for M in M_values:
            for users in product(pairs, repeat=K):
                configs.append(AntennaConfig.from_pairs(M, users))
    return configs
