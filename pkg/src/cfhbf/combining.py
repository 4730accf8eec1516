"""Phase-quantized analog combiners and log-det rate evaluation.

The global combiner is block diagonal, one block F_l (Nr x n_l) per AP, and
is never materialized densely. With block-diagonal F the total rate

    R = log2 det(I + gamma * sum_l H_l^H F_l F_l^H H_l)

only needs K*Nt-dimensional matrices, and the sequential C-HBF construction
splits it exactly into per-AP sub-rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .channel import ChannelRealization, array_response

_LN2 = math.log(2.0)
# eigenvalues below this fraction of the largest are treated as null space
_RANK_TOL = 1e-10


class DegenerateVectorError(ValueError):
    """An all-zero vector cannot be mapped to a phase-only combiner."""


@dataclass(frozen=True)
class PhaseCodebook:
    """Constant-modulus vectors whose phases lie on a uniform b-bit grid."""

    b: int
    n_elems: int

    @property
    def levels(self) -> int:
        return 2 ** self.b

    @property
    def step(self) -> float:
        return 2.0 * math.pi / self.levels

    @property
    def phases(self) -> np.ndarray:
        return self.step * np.arange(self.levels)

    @property
    def magnitude(self) -> float:
        return 1.0 / math.sqrt(self.n_elems)

    def vector(self, indices) -> np.ndarray:
        """Codebook entry built from grid indices (any array shape)."""
        return self.magnitude * np.exp(1j * self.step * np.asarray(indices))

    def indices(self, u: np.ndarray) -> np.ndarray:
        """Nearest grid index for the phase of each entry of ``u``.

        A phase exactly between two grid points goes to the lower one.
        """
        theta = np.mod(np.angle(u), 2.0 * math.pi)
        return np.mod(np.ceil(theta / self.step - 0.5).astype(np.int64), self.levels)

    def contains(self, f: np.ndarray, atol: float = 1e-12) -> bool:
        f = np.asarray(f)
        if not np.allclose(np.abs(f), self.magnitude, rtol=0.0, atol=atol):
            return False
        return bool(np.allclose(self.vector(self.indices(f)), f, rtol=0.0, atol=atol))


def quantize_to_codebook(u: np.ndarray, cb: PhaseCodebook) -> np.ndarray:
    """Closest codebook vector to ``u`` in Euclidean distance.

    ``||u - f||^2`` separates over entries and each term is minimized by the
    grid phase nearest to ``arg(u_i)``, so per-entry rounding is exact.
    Works column-wise on matrices.
    """
    u = np.asarray(u)
    if u.shape[0] != cb.n_elems:
        raise ValueError(f"expected {cb.n_elems} rows, got {u.shape[0]}")
    zero_cols = ~np.any(u != 0, axis=0)
    if np.any(zero_cols):
        raise DegenerateVectorError("cannot quantize an all-zero vector")
    return cb.vector(cb.indices(u))


@dataclass(frozen=True)
class AnalogCombiner:
    blocks: tuple[np.ndarray, ...]

    @property
    def active_counts(self) -> np.ndarray:
        return np.array([blk.shape[1] for blk in self.blocks], dtype=int)

    @property
    def L(self) -> int:
        return len(self.blocks)

    def dense(self) -> np.ndarray:
        """Materialized block-diagonal global combiner; for checks on small instances."""
        from scipy.linalg import block_diag
        return block_diag(*self.blocks)

    def is_valid(self, cb: PhaseCodebook, max_cols: int | None = None) -> bool:
        for blk in self.blocks:
            if blk.shape[0] != cb.n_elems:
                return False
            if max_cols is not None and blk.shape[1] > max_cols:
                return False
            if blk.size and not cb.contains(blk):
                return False
        return True


@dataclass(frozen=True)
class RateBreakdown:
    total_rate: float
    sub_rates: np.ndarray
    gamma: float


def _as_codebook(cb, Nr: int) -> PhaseCodebook:
    return cb if isinstance(cb, PhaseCodebook) else PhaseCodebook(int(cb), Nr)


def log2det_pd(S: np.ndarray) -> float:
    """log2 det of a Hermitian positive-definite matrix via Cholesky."""
    if S.shape[0] == 0:
        return 0.0
    C = np.linalg.cholesky(S)
    return 2.0 * float(np.sum(np.log(np.abs(np.diagonal(C))))) / _LN2


def log2det_gram(S: np.ndarray) -> float:
    """log2 det(I + S^H S) from the singular values of S.

    Forming I + S^H S first loses the unit eigenvalues once S is large and
    rank deficient; the singular values keep them to working precision.
    """
    if S.size == 0:
        return 0.0
    s = np.linalg.svd(S, compute_uv=False)
    return float(np.sum(np.log1p(s * s))) / _LN2


def _fix_phase(U: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    if U.shape[1] == 0:
        return U
    idx = np.argmax(np.abs(U), axis=0)
    pivot = U[idx, np.arange(U.shape[1])]
    mag = np.abs(pivot)
    rot = np.where(mag > 0, pivot.conj() / np.where(mag > 0, mag, 1.0), 1.0)
    return U * rot


def leading_eigvecs(A: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Leading ``n`` eigenpairs of ``A A^H`` (descending), phase-normalized."""
    rows = A.shape[0]
    if n == 0:
        return np.empty((rows, 0), dtype=complex), np.empty(0)
    if n > rows:
        raise ValueError(f"requested {n} eigenvectors of a {rows}-dim matrix")
    lam, U = np.linalg.eigh(A @ A.conj().T)
    return _fix_phase(U[:, ::-1][:, :n]), lam[::-1][:n]


class APBasis:
    """Thin factorization H_l = W_l T_l with orthonormal W_l (Nr x r).

    ``r`` is the numerical rank of H_l, at most K times the number of
    paths and smaller when links are in outage. Leading eigenvectors of
    H_l X H_l^H for any Hermitian X are W_l z with z the leading
    eigenvectors of the r x r matrix T_l X T_l^H.
    """

    __slots__ = ("H", "W", "T", "s")

    def __init__(self, Hl: np.ndarray):
        U, s, Vh = np.linalg.svd(Hl, full_matrices=False)
        r = int(np.count_nonzero(s > _RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
        self.H = Hl
        self.W = U[:, :r]
        self.T = s[:r, None] * Vh[:r]
        self.s = s

    @property
    def rank(self) -> int:
        return self.W.shape[1]


class CHBFKernel:
    """Per-drop data shared by every combiner construction on one channel."""

    def __init__(self, channels: ChannelRealization, gamma: float, cb):
        self.H = channels.H
        self.gamma = gamma
        self.cb = _as_codebook(cb, self.H.shape[1])
        self.bases = [APBasis(Hl) for Hl in self.H]

    @property
    def dim(self) -> int:
        return self.H.shape[2]

    def initial_state(self) -> "SequentialCHBF":
        return SequentialCHBF(self)


class SequentialCHBF:
    """Incremental C-HBF state: AP l's combiner depends on Q_{l-1} only.

    ``advance(l, n_l)`` builds F_l from the leading eigenvectors of
    H_l Q_{l-1}^{-1} H_l^H, records the sub-rate and folds F_l into Q.
    Solves against Q go through its Cholesky factor. The sub-rate
    log2 det(I + gamma B Q^{-1} B^H), B = F_l^H H_l, is evaluated as
    log2 det(Q + gamma B^H B) - log2 det(Q): the same number, but it keeps
    full precision when Q spans many orders of magnitude.
    """

    __slots__ = ("kernel", "Q", "C", "logdet")

    def __init__(self, kernel: CHBFKernel):
        m = kernel.dim
        self.kernel = kernel
        self.Q = np.eye(m, dtype=complex)
        self.C = np.eye(m, dtype=complex)
        self.logdet = 0.0

    def copy(self) -> "SequentialCHBF":
        other = SequentialCHBF.__new__(SequentialCHBF)
        other.kernel, other.Q, other.C, other.logdet = self.kernel, self.Q, self.C, self.logdet
        return other

    def directions(self, l: int, n: int) -> np.ndarray:
        """Unquantized leading eigenvectors of H_l Q^{-1} H_l^H."""
        basis = self.kernel.bases[l]
        if n <= basis.rank:
            Y = solve_triangular(self.C, basis.T.conj().T, lower=True, check_finite=False)
            _, Z = np.linalg.eigh(Y.conj().T @ Y)
            return _fix_phase(basis.W @ Z[:, ::-1][:, :n])
        AH = solve_triangular(self.C, basis.H.conj().T, lower=True, check_finite=False)
        return leading_eigvecs(AH.conj().T, n)[0]

    def advance(self, l: int, n: int) -> tuple[np.ndarray, float]:
        k = self.kernel
        if n == 0:
            return np.empty((k.H.shape[1], 0), dtype=complex), 0.0
        F = quantize_to_codebook(self.directions(l, n), k.cb)
        B = F.conj().T @ k.H[l]
        Q = self.Q + k.gamma * (B.conj().T @ B)
        C = np.linalg.cholesky(Q)
        logdet = 2.0 * float(np.sum(np.log(np.abs(np.diagonal(C))))) / _LN2
        rate = logdet - self.logdet
        self.Q, self.C, self.logdet = Q, C, logdet
        return F, rate


def sub_rate(F: np.ndarray, Hl: np.ndarray, Q: np.ndarray, gamma: float) -> float:
    """log2 det(I + gamma F^H H_l Q^{-1} H_l^H F) evaluated term by term."""
    B = F.conj().T @ Hl
    C = np.linalg.cholesky(Q)
    Y = solve_triangular(C, B.conj().T, lower=True)
    return log2det_pd(np.eye(B.shape[0]) + gamma * (Y.conj().T @ Y))


def chbf(channels: ChannelRealization, n_vec, gamma: float, cb=4,
         kernel: CHBFKernel | None = None) -> tuple[AnalogCombiner, RateBreakdown]:
    """Centralized combiner construction over all APs in index order.

    Returns the combiner and the per-AP sub-rates, whose sum is the total
    log-det rate of the resulting global combiner.
    """
    kernel = kernel or CHBFKernel(channels, gamma, cb)
    n_vec = np.asarray(n_vec, dtype=int)
    if n_vec.shape != (kernel.H.shape[0],):
        raise ValueError("activation vector length must equal L")
    state = kernel.initial_state()
    blocks = []
    for l, n in enumerate(n_vec):
        blocks.append(state.advance(l, int(n))[0])
    # reported sub-rates telescope over cumulative rates of the stacked projections
    root = math.sqrt(kernel.gamma)
    cum, rows = np.zeros(len(n_vec) + 1), []
    for l, F in enumerate(blocks):
        if F.shape[1]:
            rows.append(root * (F.conj().T @ kernel.H[l]))
            cum[l + 1] = log2det_gram(np.vstack(rows))
        else:
            cum[l + 1] = cum[l]
    sub = np.diff(cum)
    return AnalogCombiner(tuple(blocks)), RateBreakdown(float(cum[-1]), sub, kernel.gamma)


def schbf(channels: ChannelRealization, n_vec, cb=4, kernel: CHBFKernel | None = None) -> AnalogCombiner:
    """Per-AP combiners from quantized leading left singular vectors of H_l.

    Equivalent to running the C-HBF step at every AP with Q = I, which is
    how it is computed.
    """
    kernel = kernel or CHBFKernel(channels, 1.0, cb)
    fresh = kernel.initial_state()
    blocks = []
    for l, n in enumerate(np.asarray(n_vec, dtype=int)):
        F, _ = fresh.copy().advance(l, int(n))
        blocks.append(F)
    return AnalogCombiner(tuple(blocks))


def local_singular_vectors(Hl: np.ndarray, n: int) -> np.ndarray:
    """Leading left singular vectors of one AP channel, phase-normalized."""
    U = np.linalg.svd(Hl, full_matrices=False)[0] if n <= min(Hl.shape) else leading_eigvecs(Hl, n)[0]
    return _fix_phase(U[:, :n])


def steering_angles(grid_size: int) -> np.ndarray:
    return np.linspace(-math.pi / 2, math.pi / 2, grid_size)


def beam_steering(channels: ChannelRealization, n_vec, angle_grid_size: int = 1024,
                  cb=4, spacing: float = 0.5, return_angles: bool = False,
                  kernel: CHBFKernel | None = None):
    """Quantized array responses best matched to each leading singular vector."""
    H = channels.H
    Nr = H.shape[1]
    cb = _as_codebook(cb, Nr)
    kernel = kernel or CHBFKernel(channels, 1.0, cb)
    fresh = kernel.initial_state()
    grid = steering_angles(angle_grid_size)
    steer = array_response(grid, Nr, spacing)  # (Nr, G)
    blocks, chosen = [], []
    for l, n in enumerate(np.asarray(n_vec, dtype=int)):
        U = fresh.directions(l, int(n)) if n else np.empty((Nr, 0), dtype=complex)
        best = np.argmax(np.abs(steer.conj().T @ U), axis=0)
        chosen.append(grid[best])
        blocks.append(quantize_to_codebook(steer[:, best], cb) if n else U)
    comb = AnalogCombiner(tuple(blocks))
    return (comb, chosen) if return_angles else comb


def rate_from_projections(projections: Sequence[np.ndarray], m: int, gamma: float) -> float:
    rows = [B for B in projections if B.shape[0]]
    if not rows:
        return 0.0
    return log2det_gram(math.sqrt(gamma) * np.vstack(rows))


def achievable_rate(combiner, channels: ChannelRealization, gamma: float) -> float:
    """Total rate log2 det(I_{K Nt} + gamma sum_l H_l^H F_l F_l^H H_l).

    ``combiner`` is an :class:`AnalogCombiner` or any sequence of per-AP
    matrices with Nr rows.
    """
    blocks = combiner.blocks if isinstance(combiner, AnalogCombiner) else tuple(combiner)
    H = channels.H
    if len(blocks) != H.shape[0]:
        raise ValueError("combiner and channel disagree on the number of APs")
    return rate_from_projections([F.conj().T @ Hl for F, Hl in zip(blocks, H)], H.shape[2], gamma)


def antenna_selection(channels: ChannelRealization, Nr_as: int, gamma: float):
    """Keep the ``Nr_as`` strongest antenna rows of every AP, combine digitally.

    Rows are ranked by Euclidean norm of H_l's rows, ties to the lower
    index. Returns the sorted selected row indices per AP and the total rate.
    """
    H = channels.H
    if not 1 <= Nr_as <= H.shape[1]:
        raise ValueError("need 1 <= Nr_as <= Nr")
    selections = []
    for Hl in H:
        norms = np.linalg.norm(Hl, axis=1)
        order = np.argsort(-norms, kind="stable")
        selections.append(np.sort(order[:Nr_as]))
    rate = rate_from_projections([Hl[sel] for Hl, sel in zip(H, selections)], H.shape[2], gamma)
    return selections, rate


def selection_matrix(selected, Nr: int) -> np.ndarray:
    S = np.zeros((Nr, len(selected)))
    S[np.asarray(selected), np.arange(len(selected))] = 1.0
    return S
