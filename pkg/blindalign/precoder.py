"""Transmit side of the blind alignment scheme.

Symbols of one user are spread over alignment blocks, grouped into
alignment units and laid out over the two time blocks. Every construction
here is linear in the symbols, so the beamforming matrix of a user is
obtained by running the same construction on the identity.
"""
import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import block_diag

from .indexing import IndexContext, f
from .params import (
    AntennaConfig, Case, DerivedParams, IcConfig, SchemeParams, derive, ic_derive,
    ldof_targets, scheme_params, vertex_values,
)
from .random_matrices import ComplexGaussianGenerator, as_generator

logger = logging.getLogger(__name__)


class PrecoderError(Exception):
    # Raised for inconsistent precoder inputs
    pass


def draw_phi(gen: ComplexGaussianGenerator, T: int, L: int) -> Optional[np.ndarray]:
    r = T % L
    return gen.matrix((r, L)) if r else None


def embedding(M: int, T: int, offset: int = 0) -> np.ndarray:
    """M x T matrix placing T streams on antennas offset..offset+T-1"""
    if offset + T > M:
        raise PrecoderError(f"embedding of {T} streams at offset {offset} exceeds M={M}")
    E = np.zeros((M, T))
    E[offset:offset + T] = np.eye(T)
    return E


def sub_vector_count(T: int, L: int) -> int:
    # S_i + 1
    return T // L if T % L == 0 else T // L + 1


def alignment_block(s_j: np.ndarray, T: int, L: int, M: int,
                    phi: Optional[np.ndarray] = None, offset: int = 0) -> List[np.ndarray]:
    """Split s_j over S+1 sub-vectors; the first one is mixed by phi when T mod L != 0.

    ``s_j`` may also be a matrix whose columns are processed independently.
    """
    s_j = np.asarray(s_j)
    if s_j.shape[0] != L * T:
        raise PrecoderError(f"s_j has {s_j.shape[0]} rows, expected L*T={L * T}")
    r = T % L
    if (phi is None) != (r == 0):
        raise PrecoderError(f"phi must be given exactly when T mod L != 0 (T={T}, L={L})")
    if phi is not None and phi.shape != (r, L):
        raise PrecoderError(f"phi has shape {phi.shape}, expected {(r, L)}")

    E = embedding(M, T, offset)
    base = np.kron(np.eye(L), E) @ s_j
    first = np.kron(phi, E) @ s_j if r else base
    return [first] + [base] * (sub_vector_count(T, L) - 1)


def build_Q(phi: Optional[np.ndarray], L: int, S: int, k: int) -> np.ndarray:
    if phi is None:
        raise PrecoderError("Q is only defined when T mod L != 0")
    if not 1 <= k <= S:
        raise PrecoderError(f"k={k} outside [1, {S}]")
    blocks = [np.eye(L)] * S
    blocks[k - 1] = phi
    return block_diag(*blocks)


def subunit_sources(U_i: int, S: int, k: int) -> List[Tuple[int, int]]:
    """(block, sub-vector) pairs stacked into sub-unit k, both 0-based"""
    if k == S + 1:
        return [(m, S) for m in range(U_i)]
    return [(m, (m + 1 - k) % S) for m in range(U_i)]


def alignment_unit(blocks: Sequence[List[np.ndarray]], U_i: int, S: int) -> List[np.ndarray]:
    """Stack U_i alignment blocks into S+1 sub-units with staggered sub-vectors"""
    if len(blocks) != U_i:
        raise PrecoderError(f"alignment unit needs {U_i} blocks, got {len(blocks)}")
    if any(len(block) != S + 1 for block in blocks):
        raise PrecoderError(f"every alignment block must have {S + 1} sub-vectors")
    return [
        np.concatenate([blocks[m][q] for m, q in subunit_sources(U_i, S, k)], axis=0)
        for k in range(1, S + 2)
    ]


def subunit_relation(phi: Optional[np.ndarray], L: int, S: int, U_i: int, M: int, k: int) -> np.ndarray:
    # maps the last sub-unit onto sub-unit k
    if phi is None:
        return np.eye(L * U_i * M)
    return np.kron(np.eye(U_i // S), np.kron(build_Q(phi, L, S, k), np.eye(M)))


@dataclass(frozen=True)
class BlockSlots:
    """Slots (0-based start, count) of the sub-vectors of one alignment block"""
    block: int
    slots: Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class TransmitPlan:
    M: int
    n: int
    T: Tuple[int, ...]
    L: Tuple[int, ...]
    offsets: Tuple[int, ...]
    scheme: Optional[SchemeParams]
    served: Tuple[int, ...]
    phi: Dict[int, np.ndarray]
    symbols: Dict[int, np.ndarray]
    beamformers: Dict[int, np.ndarray]
    layout: Dict[int, Tuple[BlockSlots, ...]]
    targets: Tuple[Fraction, ...]
    x: np.ndarray

    @property
    def K(self) -> int:
        return len(self.T)

    @property
    def trivial(self) -> bool:
        return self.scheme is None

    def symbol_count(self, user: int) -> int:
        V = self.beamformers.get(user)
        return 0 if V is None else V.shape[1]

    def user_signal(self, user: int) -> np.ndarray:
        return self.beamformers[user] @ vec(self.symbols[user])

    def stacked_beamformers(self, exclude: Optional[int] = None) -> np.ndarray:
        blocks = [self.beamformers[u] for u in self.served if u != exclude]
        if not blocks:
            return np.zeros((self.n * self.M, 0), dtype=complex)
        return np.hstack(blocks)

    def redraw_symbols(self, source: Union[int, ComplexGaussianGenerator], ramp: bool = False) -> "TransmitPlan":
        """Same Phi and beamformers, fresh information symbols"""
        gen = as_generator(source)
        symbols = {u: _draw_symbols(gen, self.symbols[u].shape, ramp) for u in self.served}
        x = sum((self.beamformers[u] @ vec(symbols[u]) for u in self.served),
                np.zeros(self.n * self.M, dtype=complex))
        return replace(self, symbols=symbols, x=x)

    def to_dict(self) -> Dict:
        return {
            "n": self.n,
            "M": self.M,
            "served": [u + 1 for u in self.served],
            "x_length": int(self.x.shape[0]),
            "block2_offsets": list(self.scheme.a) if self.scheme else [],
            "users": [
                {
                    "user": u + 1,
                    "symbols": self.symbol_count(u),
                    "beamformer_shape": list(self.beamformers[u].shape),
                    "phi": None if u not in self.phi else {
                        "real": self.phi[u].real.tolist(),
                        "imag": self.phi[u].imag.tolist(),
                    },
                }
                for u in self.served
            ],
        }


def vec(s: np.ndarray) -> np.ndarray:
    # column-major stacking, column j of s is the j-th alignment block input
    return s.reshape(-1, order="F")


def _draw_symbols(gen: ComplexGaussianGenerator, shape: Tuple[int, int], ramp: bool) -> np.ndarray:
    if ramp:
        count = shape[0] * shape[1]
        return np.arange(1, count + 1, dtype=complex).reshape(shape, order="F")
    return gen.matrix(shape)


def _scheme_beamformer(M: int, scheme: SchemeParams, pos: int, phi: Optional[np.ndarray],
                       offset: int) -> Tuple[np.ndarray, Tuple[BlockSlots, ...]]:
    T, L, S = scheme.T[pos], scheme.L[pos], scheme.S[pos]
    U_i, W_i = scheme.U_vec[pos], scheme.W_vec[pos]
    m_i = scheme.symbol_count(pos)
    r = T % L
    sizes = [r if (q == 0 and r) else L for q in range(S + 1)]

    basis = np.eye(m_i)
    blocks = [
        alignment_block(basis[b * L * T:(b + 1) * L * T], T, L, M, phi, offset)
        for b in range(U_i * W_i)
    ]
    units = [alignment_unit(blocks[J * U_i:(J + 1) * U_i], U_i, S) for J in range(W_i)]

    V = np.zeros((scheme.n * M, m_i), dtype=complex)
    slots: Dict[Tuple[int, int], Tuple[int, int]] = {}
    ctx = IndexContext.from_scheme(scheme)

    cursor = 0
    for l in range(1, scheme.W + 1):
        J, k = f(ctx, pos + 1, l)
        V[cursor * M:(cursor + scheme.U) * M] = units[J - 1][k - 1]
        for m, q in subunit_sources(U_i, S, k):
            slots[((J - 1) * U_i + m, q)] = (cursor, sizes[q])
            cursor += sizes[q]
    if cursor != scheme.block1_slots:
        raise PrecoderError(f"block 1 of user {scheme.members[pos] + 1} fills {cursor} slots")

    cursor, end = scheme.span(pos)
    for J in range(W_i):
        V[cursor * M:(cursor + L * U_i) * M] = units[J][S]
        for m in range(U_i):
            slots[(J * U_i + m, S)] = (cursor, L)
            cursor += L
    if cursor != end:
        raise PrecoderError(f"block 2 of user {scheme.members[pos] + 1} fills {cursor - scheme.a[pos]} slots")

    layout = tuple(
        BlockSlots(block=b, slots=tuple(slots[(b, q)] for q in range(S + 1)))
        for b in range(U_i * W_i)
    )
    return V, layout


def _plan(derived: DerivedParams, seed: int, ramp: bool, served: Optional[Sequence[int]]) -> TransmitPlan:
    gen = ComplexGaussianGenerator(seed)
    M = derived.M

    if served is not None:
        served = tuple(served)
        if not served or list(served) != sorted(set(served)) or not set(served) <= set(range(derived.K)):
            raise PrecoderError(f"served must be a nonempty increasing list of user indices, got {served}")
        scheme = scheme_params(derived.T, derived.L, tuple(served))
        targets = vertex_values(derived.T, derived.L, scheme.members, derived.K)
    elif derived.case is Case.CASE3_2:
        scheme = derived.scheme
        targets = ldof_targets(derived)
    else:
        scheme = None
        targets = ldof_targets(derived)

    if scheme is None:
        user = derived.served_user
        d = min(M, derived.Lmax)
        offset = derived.offsets[user]
        V = np.zeros((M, d), dtype=complex)
        V[offset:offset + d] = np.eye(d)
        symbols = {user: _draw_symbols(gen, (d, 1), ramp)}
        logger.debug(f"single-user plan: user {user + 1}, {d} streams")
        return TransmitPlan(
            M=M, n=1, T=derived.T, L=derived.L, offsets=derived.offsets, scheme=None,
            served=(user,), phi={}, symbols=symbols, beamformers={user: V}, layout={},
            targets=targets, x=V @ vec(symbols[user]),
        )

    phi = {}
    for pos, user in enumerate(scheme.members):
        drawn = draw_phi(gen, scheme.T[pos], scheme.L[pos])
        if drawn is not None:
            phi[user] = drawn

    beamformers, layout, symbols = {}, {}, {}
    x = np.zeros(scheme.n * M, dtype=complex)
    for pos, user in enumerate(scheme.members):
        V, blocks = _scheme_beamformer(M, scheme, pos, phi.get(user), derived.offsets[user])
        s = _draw_symbols(gen, (scheme.L[pos] * scheme.T[pos], scheme.U_vec[pos] * scheme.W_vec[pos]), ramp)
        beamformers[user], layout[user], symbols[user] = V, blocks, s
        x += V @ vec(s)

    logger.debug(f"scheme plan: served={[u + 1 for u in scheme.members]} n={scheme.n} "
                 f"symbols={[beamformers[u].shape[1] for u in scheme.members]}")
    return TransmitPlan(
        M=M, n=scheme.n, T=derived.T, L=derived.L, offsets=derived.offsets, scheme=scheme,
        served=scheme.members, phi=phi, symbols=symbols, beamformers=beamformers,
        layout=layout, targets=targets, x=x,
    )


def build_plan(config: AntennaConfig, derived: Optional[DerivedParams] = None, seed: int = 0,
               ramp: bool = False, served: Optional[Sequence[int]] = None) -> TransmitPlan:
    """Transmit plan for a broadcast configuration.

    ``served`` restricts the scheme to a subset of users (0-based, in
    original order); this realizes one corner point of the LDoF region.
    """
    if derived is None:
        derived = derive(config)
    return _plan(derived, seed, ramp, served)


def build_ic_plan(config: IcConfig, seed: int = 0, ramp: bool = False) -> TransmitPlan:
    """Interference-channel plan: each user's blocks use only its own transmitter"""
    return _plan(ic_derive(config), seed, ramp, None)
