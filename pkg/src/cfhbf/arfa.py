"""Adaptive RF-chain activation: choosing how many chains each AP turns on.

An activation vector ``n`` is feasible when ``0 <= n_l <= N`` and
``sum(n) == L * nbar``. At each AP the active chains always take the
leading combining vectors, so choosing the activation reduces to choosing
the integer counts. Searches over C-HBF (tabu, fast, exhaustive) score
candidates with the full sequential construction; the SC-HBF variants
pick counts from singular values or path losses alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .channel import ChannelRealization
from .combining import AnalogCombiner, CHBFKernel, rate_from_projections, schbf
from .config import ScenarioConfig

MAX_EXHAUSTIVE = 10 ** 6


class FeasibleSetTooLarge(ValueError):
    pass


def uniform_activation(cfg: ScenarioConfig) -> np.ndarray:
    return np.full(cfg.L, cfg.nbar, dtype=int)


def is_feasible(n, N: int, total: int) -> bool:
    n = np.asarray(n)
    return bool(np.all(n >= 0) and np.all(n <= N) and int(n.sum()) == total)


def feasible_count(L: int, N: int, total: int) -> int:
    """Number of integer vectors in [0, N]^L summing to ``total``."""
    ways = [1] + [0] * total
    for _ in range(L):
        nxt = [0] * (total + 1)
        for s, w in enumerate(ways):
            if w:
                for v in range(min(N, total - s) + 1):
                    nxt[s + v] += w
        ways = nxt
    return ways[total]


def feasible_set(L: int, N: int, total: int) -> Iterator[tuple[int, ...]]:
    """All feasible vectors in lexicographic order."""
    def rec(prefix, remaining, slots):
        if slots == 0:
            if remaining == 0:
                yield tuple(prefix)
            return
        lo = max(0, remaining - N * (slots - 1))
        for v in range(lo, min(N, remaining) + 1):
            prefix.append(v)
            yield from rec(prefix, remaining - v, slots - 1)
            prefix.pop()
    yield from rec([], total, L)


@dataclass
class Candidate:
    """One evaluated activation vector with its C-HBF output.

    ``states[l]`` is the sequential C-HBF state before AP ``l``; candidates
    sharing a prefix of ``n`` resume from it.
    """

    n: tuple[int, ...]
    rate: float
    sub_rates: np.ndarray
    blocks: tuple[np.ndarray, ...]
    states: list | None = None

    @property
    def combiner(self) -> AnalogCombiner:
        return AnalogCombiner(self.blocks)


class CHBFEvaluator:
    """Scores activation vectors with C-HBF and counts full evaluations."""

    def __init__(self, channels: ChannelRealization, gamma: float, cb):
        self.kernel = CHBFKernel(channels, gamma, cb)
        self.count = 0

    def evaluate(self, n, base: Candidate | None = None, keep_states: bool = True,
                 count: bool = True) -> Candidate:
        """Score ``n``, resuming from ``base`` where the two vectors first differ.

        The result does not depend on ``base``; it only saves work.
        ``count=False`` rebuilds a vector already scored without counting it.
        """
        n = tuple(int(v) for v in n)
        L = len(n)
        start = 0
        if base is not None and base.states is not None:
            while start < L and n[start] == base.n[start]:
                start += 1
            if start == L:
                start = L - 1
            state = base.states[start].copy()
            blocks = list(base.blocks[:start])
            sub = np.concatenate([base.sub_rates[:start], np.zeros(L - start)])
            states = base.states[:start + 1] if keep_states else None
        else:
            state = self.kernel.initial_state()
            blocks, sub = [], np.zeros(L)
            states = [state.copy()] if keep_states else None
        for l in range(start, L):
            F, sub[l] = state.advance(l, n[l])
            blocks.append(F)
            if keep_states and l + 1 < L:
                states.append(state.copy())
        self.count += int(count)
        return Candidate(n, float(sub.sum()), sub, tuple(blocks), states)

    def rate_of(self, cand: Candidate) -> float:
        k = self.kernel
        return rate_from_projections([F.conj().T @ Hl for F, Hl in zip(cand.blocks, k.H)],
                                      k.H.shape[2], k.gamma)


@dataclass
class SearchTrace:
    """Search bookkeeping.

    ``rate_history`` holds the search-time scores; ``final_rate`` is the
    rate of the returned combiner recomputed through the accurate route.
    """

    candidates_examined: int = 0
    rate_history: list[float] = field(default_factory=list)
    final_rate: float | None = None

    @property
    def best_rate(self) -> float:
        return self.rate_history[-1] if self.final_rate is None else self.final_rate


def _finish(ev: "CHBFEvaluator", best: Candidate, trace: SearchTrace):
    trace.candidates_examined = ev.count
    trace.final_rate = ev.rate_of(best)
    return best.combiner, np.array(best.n), trace


def neighbor_set(n, sub_rates, rbar: float, tabu, N: int) -> list[tuple[int, ...]]:
    """Moves of one chain from a below-average AP to an above-average AP.

    Donors have sub-rate strictly below ``rbar`` and at least one chain;
    receivers have sub-rate strictly above ``rbar`` and room for one more.
    Tabu vectors are dropped; the result is sorted lexicographically.
    """
    n = tuple(int(v) for v in n)
    donors = [i for i, (v, r) in enumerate(zip(n, sub_rates)) if r < rbar and v > 0]
    takers = [j for j, (v, r) in enumerate(zip(n, sub_rates)) if r > rbar and v < N]
    out = set()
    for i in donors:
        for j in takers:
            if i == j:
                continue
            m = list(n)
            m[i] -= 1
            m[j] += 1
            m = tuple(m)
            if m not in tabu:
                out.add(m)
    return sorted(out)


def _common_prefix(a, b) -> int:
    i = 0
    while i < len(a) and a[i] == b[i]:
        i += 1
    return i


def ts_carfa(channels: ChannelRealization, cfg: ScenarioConfig, gamma: float,
             max_iter: int | None = None, max_stall: int | None = None):
    """Tabu search over activation vectors, scored by C-HBF.

    Each iteration moves to the best non-tabu neighbor even when it is
    worse than the current point; the best vector seen is returned. Stops
    after ``max_iter`` iterations, when more than ``max_stall`` consecutive
    iterations fail to improve, or when no neighbor is left. A vector is
    never evaluated twice: revisited neighbors reuse their stored rate.

    Returns ``(combiner, n, trace)``.
    """
    max_iter = cfg.max_iter if max_iter is None else max_iter
    max_stall = cfg.max_stall if max_stall is None else max_stall
    L, N = cfg.L, cfg.N
    ev = CHBFEvaluator(channels, gamma, cfg.b)
    cur = ev.evaluate(uniform_activation(cfg))
    best = cur
    seen = {cur.n: (cur.rate, cur.sub_rates)}
    trace = SearchTrace(rate_history=[best.rate])
    tabu: set[tuple[int, ...]] = set()
    stall = 0
    for _ in range(max_iter):
        nbrs = neighbor_set(cur.n, cur.sub_rates, cur.rate / L, tabu, N)
        if not nbrs:
            break
        top, prev = None, None
        for m in nbrs:
            if m in seen:
                rate, sub = seen[m]
                cand = Candidate(m, rate, sub, (), None)
            else:
                # neighbors come sorted, so the previous one often shares a longer prefix
                base = cur
                if prev is not None and _common_prefix(m, prev.n) > _common_prefix(m, cur.n):
                    base = prev
                cand = prev = ev.evaluate(m, base=base)
                seen[m] = (cand.rate, cand.sub_rates)
            # strict comparison: ties keep the lexicographically smaller vector
            if top is None or cand.rate > top.rate:
                top = cand
        if top.rate > best.rate:
            best = top
            stall = 0
        else:
            stall += 1
            if stall > max_stall:
                trace.rate_history.append(best.rate)
                break
        tabu.add(cur.n)
        cur = top if top.states is not None else ev.evaluate(top.n, base=cur, count=False)
        trace.rate_history.append(best.rate)
    return _finish(ev, best, trace)


def fs_carfa(channels: ChannelRealization, cfg: ScenarioConfig, gamma: float):
    """Fast search: shift chains from the weakest to the strongest APs.

    APs are ranked once by the sub-rates of the uniform activation. One
    cursor walks down from the strongest AP, skipping saturated ones, and
    one walks up from the weakest, skipping empty ones; every step moves a
    single chain between them and is scored. Stops when the cursors meet.

    Returns ``(combiner, n, trace)``.
    """
    L, N = cfg.L, cfg.N
    ev = CHBFEvaluator(channels, gamma, cfg.b)
    cand = ev.evaluate(uniform_activation(cfg))
    best = cand
    trace = SearchTrace(rate_history=[best.rate])
    order = np.argsort(-cand.sub_rates, kind="stable")
    n = list(cand.n)
    i, k = 0, L - 1
    while i < k:
        while i < L and n[order[i]] == N:
            i += 1
        while k >= 0 and n[order[k]] == 0:
            k -= 1
        if i >= k:
            break
        n[order[i]] += 1
        n[order[k]] -= 1
        cand = ev.evaluate(n, base=cand)
        if cand.rate > best.rate:
            best = cand
        trace.rate_history.append(best.rate)
    return _finish(ev, best, trace)


def sv_activation(singular_values: np.ndarray, nbar: int) -> np.ndarray:
    """Counts from the L*nbar globally largest per-AP singular values.

    ``singular_values`` is (L, N), each row the AP's N largest values.
    Ties go to the lower AP index, then the lower position within the AP,
    so exactly L*nbar chains are always selected.
    """
    sv = np.asarray(singular_values, dtype=float)
    L, N = sv.shape
    ap = np.repeat(np.arange(L), N)
    pos = np.tile(np.arange(N), L)
    order = np.lexsort((pos, ap, -sv.ravel()))
    chosen = order[:L * nbar]
    return np.bincount(ap[chosen], minlength=L)


def ap_singular_values(channels: ChannelRealization, N: int) -> np.ndarray:
    """The N largest singular values of every H_l, zero-padded, shape (L, N)."""
    out = np.zeros((channels.L, N))
    for l, Hl in enumerate(channels.H):
        s = np.linalg.svd(Hl, compute_uv=False)[:N]
        out[l, :len(s)] = s
    return out


def sv_scarfa(channels: ChannelRealization, cfg: ScenarioConfig):
    """Singular-value based activation with local (SC-HBF) combiners.

    Returns ``(combiner, n)``.
    """
    n = sv_activation(ap_singular_values(channels, cfg.N), cfg.nbar)
    return schbf(channels, n, cfg.b), n


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(int)


def pl_activation(beta_linear: np.ndarray, L: int, N: int, nbar: int) -> np.ndarray:
    """Counts proportional to inverse summed path loss, repaired to feasibility.

    ``beta_linear`` is (K, L) with +inf on outage links. Raw counts are
    ``min(N, round(L*nbar*alpha_l / sum(alpha)))`` with ``alpha_l = 1/sum_k beta_kl``.
    While the total is short, APs are topped up from the smallest path
    loss down; while it exceeds the budget, chains are removed from the
    largest path loss up. The cursor cycles over APs.
    """
    total = L * nbar
    beta_l = np.asarray(beta_linear, dtype=float).sum(axis=0)
    with np.errstate(divide="ignore"):
        alpha = np.where(np.isinf(beta_l), 0.0, 1.0 / beta_l)
    if alpha.sum() > 0:
        raw = _round_half_away(total * alpha / alpha.sum())
    else:
        raw = np.zeros(L, dtype=int)
    n = np.minimum(N, raw)
    order = np.argsort(-alpha, kind="stable")
    t = 0
    passes = 0
    guard = 10 * L * max(N, 1)
    while int(n.sum()) != total:
        if n.sum() < total and n[order[t]] < N:
            n[order[t]] += 1
        if n.sum() > total and n[order[L - 1 - t]] > 0:
            n[order[L - 1 - t]] -= 1
        t = (t + 1) % L
        passes += 1
        if passes > guard:
            raise RuntimeError("path-loss activation repair did not converge")
    return n


def pl_scarfa(beta_linear: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    """Path-loss based activation vector; combiners then come from :func:`schbf`."""
    return pl_activation(beta_linear, cfg.L, cfg.N, cfg.nbar)


def exhaustive_arfa(channels: ChannelRealization, cfg: ScenarioConfig, gamma: float):
    """Best activation over the whole feasible set (small instances only).

    Ties go to the lexicographically smallest vector. Returns
    ``(combiner, n, trace)``.
    """
    size = feasible_count(cfg.L, cfg.N, cfg.total_active)
    if size > MAX_EXHAUSTIVE:
        raise FeasibleSetTooLarge(f"feasible set has {size} members (limit {MAX_EXHAUSTIVE})")
    ev = CHBFEvaluator(channels, gamma, cfg.b)
    best = prev = None
    trace = SearchTrace()
    for n in feasible_set(cfg.L, cfg.N, cfg.total_active):
        prev = ev.evaluate(n, base=prev)
        if best is None or prev.rate > best.rate:
            best = prev
        trace.rate_history.append(best.rate)
    return _finish(ev, best, trace)


def aps_activation(channels: ChannelRealization, cfg: ScenarioConfig) -> np.ndarray:
    """AP selection baseline: all N chains on at the strongest floor(L*nbar/N) APs.

    APs are ranked by received channel energy sum_k ||H_kl||_F^2, ties to
    the lower index.
    """
    count = math.floor(cfg.L * cfg.nbar / cfg.N)
    energy = np.sum(np.abs(channels.H) ** 2, axis=(1, 2))
    chosen = np.argsort(-energy, kind="stable")[:count]
    n = np.zeros(cfg.L, dtype=int)
    n[chosen] = cfg.N
    return n
