"""Rank utilities, Monte-Carlo checks of the converse rank lemmas, the LP
upper bound and the determinant identities behind eta.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .params import AntennaConfig, derive
from .random_matrices import TRIAL_STREAM, ComplexGaussianGenerator

logger = logging.getLogger(__name__)

RANK_TOL = 1e-9   # relative to the largest singular value
DET_RTOL = 1e-9


class AnalysisError(Exception):
    # Raised when an analysis precondition does not hold
    pass


@dataclass(frozen=True)
class RankReport:
    shape: Tuple[int, int]
    singular_values: np.ndarray  # descending
    rank: int
    tol: float

    def to_dict(self) -> Dict:
        return {
            "shape": list(self.shape),
            "singular_values": [float(s) for s in self.singular_values],
            "rank": self.rank,
            "tol": self.tol,
        }


def rank_report(A: np.ndarray, tol: float = RANK_TOL) -> RankReport:
    A = np.atleast_2d(A)
    if A.size == 0:
        return RankReport(A.shape, np.zeros(0), 0, tol)
    sv = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(sv > tol * sv[0])) if sv[0] > 0 else 0
    return RankReport(A.shape, sv, rank, tol)


def numerical_rank(A: np.ndarray, tol: float = RANK_TOL) -> int:
    return rank_report(A, tol).rank


def column_basis(A: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the numerical column space of A"""
    A = np.atleast_2d(A)
    if A.size == 0:
        return np.zeros((A.shape[0], 0), dtype=complex)
    U, sv, _ = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(sv > tol * sv[0])) if sv[0] > 0 else 0
    return U[:, :rank]


def proj_dim(A: np.ndarray, B: np.ndarray, tol: float = RANK_TOL) -> int:
    """Dimension of R(B) projected onto the orthogonal complement of R(A)"""
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    if A.shape[0] != B.shape[0]:
        raise AnalysisError(f"proj_dim needs equal row counts, got {A.shape[0]} and {B.shape[0]}")
    return numerical_rank(np.hstack([A, B]), tol) - numerical_rank(A, tol)


@dataclass(frozen=True)
class MonteCarloSummary:
    name: str
    trials: int
    passes: int
    failing_seeds: Tuple[int, ...]

    @property
    def ratio(self) -> float:
        return self.passes / self.trials if self.trials else 1.0

    @property
    def passed(self) -> bool:
        return self.passes == self.trials

    def to_dict(self) -> Dict:
        return {
            "suite": self.name,
            "trials": self.trials,
            "passes": self.passes,
            "ratio": self.ratio,
            "failing_seeds": list(self.failing_seeds),
        }


def _run_trials(name: str, trials: int, seed: int, check, progress: bool) -> MonteCarloSummary:
    failing = []
    for t in tqdm(range(trials), desc=name, disable=not progress, leave=False):
        trial_seed = seed + t
        if not check(ComplexGaussianGenerator(trial_seed, stream=TRIAL_STREAM)):
            logger.warning(f"{name}: trial with seed {trial_seed} failed")
            failing.append(trial_seed)
    return MonteCarloSummary(name, trials, trials - len(failing), tuple(failing))


def random_stack(gen: ComplexGaussianGenerator, n: int, M: int, cols: int) -> np.ndarray:
    """Time-extended beamforming stack (nM x cols) with Kronecker structure.

    V = (I_n kron P) R with a random M x p factor P and some silent slots,
    so that ranks are genuinely deficient.
    """
    if cols == 0:
        return np.zeros((n * M, 0), dtype=complex)
    p = gen.integers(1, M + 1)
    V = np.kron(np.eye(n), gen.matrix((M, p))) @ gen.matrix((n * p, cols))
    for t in np.flatnonzero(gen.rng.random(n) < 0.25):
        V[t * M:(t + 1) * M] = 0
    return V


def _kron_rows(G: np.ndarray, n: int) -> np.ndarray:
    return np.kron(np.eye(n), G)


def verify_projection_identity(trials: int = 100, rows: int = 6, seed: int = 0,
                               progress: bool = False) -> MonteCarloSummary:
    """proj_dim agrees with the rank of B after explicit projection"""
    def check(gen: ComplexGaussianGenerator) -> bool:
        A = random_stack(gen, rows // 2, 2, gen.integers(0, rows))
        B = random_stack(gen, rows // 2, 2, gen.integers(1, rows))
        Q = column_basis(A)
        projected = B - Q @ (Q.conj().T @ B)
        # threshold against the scale of B, the projection may vanish entirely
        scale = np.linalg.norm(B, 2)
        sv = np.linalg.svd(projected, compute_uv=False)
        explicit = int(np.sum(sv > RANK_TOL * scale)) if scale > 0 else 0
        d = proj_dim(A, B)
        return d == explicit and d + numerical_rank(A) == numerical_rank(np.hstack([A, B]))

    return _run_trials("proj", trials, seed, check, progress)


def verify_rank_monotonic(trials: int = 100, M: int = 4, N1: int = 4, L1: int = 2, n: int = 6,
                          K: int = 3, seed: int = 0, constant_schedule: bool = False,
                          zero_stack: bool = False, progress: bool = False) -> MonteCarloSummary:
    """Mode switching never shrinks the received interference dimension"""
    if not 1 <= L1 <= N1 or K < 2:
        raise AnalysisError(f"need 1 <= L1 <= N1 and K >= 2 (L1={L1}, N1={N1}, K={K})")

    def check(gen: ComplexGaussianGenerator) -> bool:
        H1 = gen.matrix((N1, M))
        if zero_stack:
            V = np.zeros((n * M, K - 1), dtype=complex)
        else:
            V = np.hstack([random_stack(gen, n, M, gen.integers(1, M + 1)) for _ in range(K - 1)])
        if constant_schedule:
            switched = _kron_rows(H1[:L1], n)
        else:
            switched = np.zeros((n * L1, n * M), dtype=complex)
            for t in range(n):
                rows = np.sort(gen.choice(N1, L1))
                switched[t * L1:(t + 1) * L1, t * M:(t + 1) * M] = H1[rows]
        fixed = _kron_rows(H1[:L1], n)
        return numerical_rank(switched @ V) >= numerical_rank(fixed @ V)

    return _run_trials("rank-monotonic", trials, seed, check, progress)


def verify_rank_chain(trials: int = 100, M: int = 3, deltas: Sequence[int] = (1, 2, 3), n: int = 4,
                      seed: int = 0, zero_last: bool = False, progress: bool = False) -> MonteCarloSummary:
    """Rank-chain inequalities of the extended broadcast channel.

    deltas[i] is the row count of G_{i+1}; they must be nondecreasing.
    """
    deltas = tuple(deltas)
    K = len(deltas)
    if K < 2:
        raise AnalysisError("rank chain needs at least two users")
    if any(d < 1 or d > M for d in deltas) or list(deltas) != sorted(deltas):
        raise AnalysisError(f"deltas must be nondecreasing within [1, M={M}], got {deltas}")

    def check(gen: ComplexGaussianGenerator) -> bool:
        G = [_kron_rows(gen.matrix((d, M)), n) for d in deltas]
        V = [random_stack(gen, n, M, gen.integers(1, M + 1)) for _ in range(K)]
        if zero_last:
            V[-1] = np.zeros_like(V[-1])

        def stack(indices) -> np.ndarray:
            parts = [V[j] for j in indices]
            return np.hstack(parts) if parts else np.zeros((n * M, 0), dtype=complex)

        # 0-based i runs over users 2..K-1
        for i in range(1, K - 1):
            lhs = numerical_rank(G[i - 1] @ stack(range(i, K)))
            rest = numerical_rank(G[i] @ stack(range(i + 1, K)))
            others = [j for j in range(K) if j != i]
            gain = proj_dim(G[i] @ stack(others), G[i] @ V[i])
            if lhs * deltas[i] < (rest + gain) * deltas[i - 1]:
                return False
        lhs = numerical_rank(G[K - 2] @ V[K - 1])
        gain = proj_dim(G[K - 1] @ stack(range(K - 1)), G[K - 1] @ V[K - 1])
        return lhs * deltas[K - 1] >= gain * deltas[K - 2]

    return _run_trials("rank-chain", trials, seed, check, progress)


def verify_stat_equiv(trials: int = 100, rows_i: int = 3, rows_j: int = 3, M: int = 4, m: int = 1,
                      n: int = 4, seed: int = 0, identity_stack: bool = False,
                      progress: bool = False) -> MonteCarloSummary:
    """Equal-size row selections of independent channels see equal ranks"""
    if not 1 <= m <= min(rows_i, rows_j):
        raise AnalysisError(f"m={m} must lie in [1, {min(rows_i, rows_j)}]")

    def check(gen: ComplexGaussianGenerator) -> bool:
        A = gen.matrix((rows_i, M))[np.sort(gen.choice(rows_i, m))]
        B = gen.matrix((rows_j, M))[np.sort(gen.choice(rows_j, m))]
        V = np.eye(n * M) if identity_stack else random_stack(gen, n, M, gen.integers(1, n * M + 1))
        return numerical_rank(_kron_rows(A, n) @ V) == numerical_rank(_kron_rows(B, n) @ V)

    return _run_trials("stat-equiv", trials, seed, check, progress)


def _solve_exact(A: List[List[Fraction]], b: List[Fraction]) -> Optional[List[Fraction]]:
    # Gauss-Jordan over the rationals; None when A is singular
    size = len(A)
    rows = [list(row) + [rhs] for row, rhs in zip(A, b)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if rows[r][col] != 0), None)
        if pivot is None:
            return None
        rows[col], rows[pivot] = rows[pivot], rows[col]
        head = rows[col][col]
        rows[col] = [v / head for v in rows[col]]
        for r in range(size):
            if r != col and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [v - factor * p for v, p in zip(rows[r], rows[col])]
    return [rows[r][size] for r in range(size)]


def lp_constraints(config: AntennaConfig) -> Tuple[List[List[Fraction]], List[Fraction]]:
    """Outer-bound inequalities, one per active user, as (coefficients, rhs)"""
    derived = derive(config)
    if config.M <= derived.Lmax or not derived.Lambda:
        raise AnalysisError(f"LP bound needs M > L_max and a nonempty active set "
                            f"(M={config.M}, L_max={derived.Lmax}, Lambda={list(derived.Lambda)})")
    active = set(derived.Lambda)
    A, b = [], []
    for k in derived.Lambda:
        row = []
        for j in range(config.K):
            if j == k:
                row.append(Fraction(1, derived.L[k]))
            elif j in active:
                row.append(Fraction(1, derived.T[j]))
            else:
                row.append(Fraction(1, derived.Lmax))
        A.append(row)
        b.append(Fraction(1))
    return A, b


def lp_bound(config: AntennaConfig) -> Fraction:
    """Maximum of sum(d) over the outer-bound polytope, by basis enumeration"""
    A, b = lp_constraints(config)
    K = config.K
    # nonnegativity rows d_j >= 0 written as -d_j <= 0
    rows = A + [[Fraction(-1) if j == i else Fraction(0) for j in range(K)] for i in range(K)]
    rhs = b + [Fraction(0)] * K

    best: Optional[Fraction] = None
    for basis in combinations(range(len(rows)), K):
        point = _solve_exact([rows[r] for r in basis], [rhs[r] for r in basis])
        if point is None:
            continue
        if all(sum(c * d for c, d in zip(row, point)) <= limit for row, limit in zip(rows, rhs)):
            value = sum(point)
            if best is None or value > best:
                best = value
    if best is None:
        raise AnalysisError("LP has no basic feasible solution")
    logger.debug(f"LP bound {best} over {len(rows)} constraints")
    return best


def _active_TL(config: AntennaConfig) -> Tuple[List[int], List[int]]:
    derived = derive(config)
    if not derived.Lambda:
        raise AnalysisError("active set is empty")
    T = [derived.T[k] for k in derived.Lambda]
    L = [derived.L[k] for k in derived.Lambda]
    return T, L


def assemble_A1(T: Sequence[int], L: Sequence[int]) -> np.ndarray:
    """1/L_k on the diagonal, 1/T_j elsewhere in column j"""
    size = len(T)
    A = np.empty((size, size))
    for k in range(size):
        for j in range(size):
            A[k, j] = 1.0 / L[k] if j == k else 1.0 / T[j]
    return A


def det_A1_formula(T: Sequence[int], L: Sequence[int]) -> Fraction:
    value = Fraction(1)
    for t, l in zip(T, L):
        value *= Fraction(t - l, t * l)
    return value * (1 + sum(Fraction(l, t - l) for t, l in zip(T, L)))


def det_A1(config: AntennaConfig) -> Tuple[Fraction, float]:
    """Exact determinant and the floating determinant of the assembled matrix"""
    T, L = _active_TL(config)
    return det_A1_formula(T, L), float(np.linalg.det(assemble_A1(T, L)))


def det_matches(exact: Fraction, numeric: float, rtol: float = DET_RTOL) -> bool:
    return abs(numeric - float(exact)) <= rtol * abs(float(exact))


def eta_cramer_check(config: AntennaConfig, rtol: float = DET_RTOL) -> bool:
    """1' A1^{-1} 1 equals eta"""
    T, L = _active_TL(config)
    eta_value = float(derive(config).eta)
    numeric = float(np.sum(np.linalg.solve(assemble_A1(T, L), np.ones(len(T)))))
    return abs(numeric - eta_value) <= rtol * abs(eta_value)
