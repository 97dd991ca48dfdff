"""Index functions mapping block-1 segments to alignment units.

All interfaces are 1-based: user positions i within the served set,
segment index l in [1, W], unit j in [1, W_i], sub-unit k in [1, S_i].
"""
from dataclasses import dataclass, field
from itertools import accumulate
from operator import mul
from typing import Tuple

from .params import SchemeParams


class IndexRangeError(Exception):
    # Raised when an index-function argument is outside its domain
    pass


@dataclass(frozen=True)
class IndexContext:
    S: Tuple[int, ...]
    prefix: Tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.S) < 1:
            raise IndexRangeError("S must have at least one entry")
        if any(not isinstance(s, int) or s < 1 for s in self.S):
            raise IndexRangeError(f"S entries must be positive integers, got {self.S}")
        object.__setattr__(self, "S", tuple(self.S))
        # prefix[q] = S_1 * ... * S_q, prefix[0] = 1
        object.__setattr__(self, "prefix", tuple(accumulate(self.S, mul, initial=1)))

    @classmethod
    def from_scheme(cls, scheme: SchemeParams) -> "IndexContext":
        return cls(scheme.S)

    @property
    def size(self) -> int:
        return len(self.S)

    @property
    def W(self) -> int:
        return self.prefix[-1]

    def W_of(self, i: int) -> int:
        self._check_user(i)
        return self.W // self.S[i - 1]

    def _check_user(self, i: int) -> None:
        if not 1 <= i <= self.size:
            raise IndexRangeError(f"user position i={i} outside [1, {self.size}]")


def f(ctx: IndexContext, i: int, l: int) -> Tuple[int, int]:
    """(unit j, sub-unit k) carried by user i in block-1 segment l"""
    ctx._check_user(i)
    if not 1 <= l <= ctx.W:
        raise IndexRangeError(f"segment l={l} outside [1, {ctx.W}]")
    inner, outer = ctx.prefix[i - 1], ctx.prefix[i]
    j = ((l - 1) // outer) * inner + 1 + (l - 1) % inner
    k = ((l - 1) % outer) // inner + 1
    return j, k


def f2(ctx: IndexContext, i: int, l: int) -> int:
    return f(ctx, i, l)[1]


def g(ctx: IndexContext, i: int, j: int, k: int) -> int:
    """Inverse of f: the segment in which user i sends sub-unit k of unit j"""
    ctx._check_user(i)
    if not 1 <= j <= ctx.W_of(i):
        raise IndexRangeError(f"unit j={j} outside [1, {ctx.W_of(i)}]")
    if not 1 <= k <= ctx.S[i - 1]:
        raise IndexRangeError(f"sub-unit k={k} outside [1, {ctx.S[i - 1]}]")
    inner, outer = ctx.prefix[i - 1], ctx.prefix[i]
    return 1 + ((j - 1) // inner) * outer + (j - 1) % inner + (k - 1) * inner


def f2_of_g_closed_form(ctx: IndexContext, i: int, i_prime: int, j: int) -> int:
    """Pattern index of user i while user i' sends any sub-unit of its unit j.

    For i < i' the segment residue must be reduced modulo prefix[i] before
    the division; without that reduction the value can exceed S_i as soon
    as i < i' - 1.
    """
    if i == i_prime:
        raise IndexRangeError("closed form needs two distinct users")
    P = ctx.prefix
    if i < i_prime:
        return ((((j - 1) % P[i_prime - 1]) % P[i]) // P[i - 1]) + 1
    a0 = (j - 1) // P[i_prime - 1]
    return ((a0 % (P[i] // P[i_prime])) // (P[i - 1] // P[i_prime])) + 1


def check_inverse(ctx: IndexContext, i: int) -> bool:
    return all(g(ctx, i, *f(ctx, i, l)) == l for l in range(1, ctx.W + 1))


def check_constancy(ctx: IndexContext, i: int, i_prime: int) -> bool:
    """User i's pattern is constant over all sub-units of each unit of user i'"""
    if i == i_prime:
        raise IndexRangeError(f"check_constancy needs i != i' (got {i})")
    ctx._check_user(i)
    ctx._check_user(i_prime)
    for j in range(1, ctx.W_of(i_prime) + 1):
        values = {f2(ctx, i, g(ctx, i_prime, j, k)) for k in range(1, ctx.S[i_prime - 1] + 1)}
        if len(values) != 1:
            return False
        if values.pop() != f2_of_g_closed_form(ctx, i, i_prime, j):
            return False
    return True
