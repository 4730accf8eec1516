import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfhbf.channel import ChannelRealization, array_response
from cfhbf.combining import (CHBFKernel, DegenerateVectorError, PhaseCodebook,
                             achievable_rate, antenna_selection, beam_steering, chbf,
                             leading_eigvecs, quantize_to_codebook, schbf, selection_matrix,
                             steering_angles, sub_rate)

from conftest import make_channels


def stacked_rate(comb, ch, gamma):
    """log2 det(I + gamma F^H H H^H F) with the dense block-diagonal F."""
    F = comb.dense()
    H = ch.stacked
    if F.shape[1] == 0:
        return 0.0
    M = np.eye(F.shape[1]) + gamma * (F.conj().T @ H) @ (H.conj().T @ F)
    sign, logdet = np.linalg.slogdet(M)
    assert sign.real > 0
    return logdet / math.log(2)


def brute_force_quantize(u, cb):
    best, best_val = None, math.inf
    for idx in itertools.product(range(cb.levels), repeat=cb.n_elems):
        f = cb.vector(np.array(idx))
        val = float(np.sum(np.abs(u - f) ** 2))
        if val < best_val:
            best, best_val = f, val
    return best, best_val


def random_instance(rng, max_L=8, max_Nr=16, max_K=4, max_Nt=2):
    L = int(rng.integers(1, max_L + 1))
    Nr = int(rng.integers(2, max_Nr + 1))
    K = int(rng.integers(1, max_K + 1))
    Nt = int(rng.integers(1, max_Nt + 1))
    N = int(rng.integers(1, min(Nr, 4) + 1))
    nbar = int(rng.integers(0, N + 1))
    cfg, ch = make_channels(int(rng.integers(1 << 30)), L=L, Nr=Nr, K=K, Nt=Nt, N=N, nbar=nbar)
    parts = rng.multinomial(L * nbar, np.ones(L) / L)
    while np.any(parts > N):  # rebalance into [0, N]
        i, j = int(np.argmax(parts)), int(np.argmin(parts))
        parts[i] -= 1
        parts[j] += 1
    return cfg, ch, parts


# -- codebook / quantizer ---------------------------------------------------

def test_codebook_grid():
    cb = PhaseCodebook(4, 64)
    assert cb.levels == 16
    assert np.allclose(np.diff(cb.phases), 2 * math.pi / 16)
    assert cb.magnitude == pytest.approx(1 / 8)


def test_quantize_fixed_example():
    cb = PhaseCodebook(2, 2)
    u = np.exp(1j * math.pi * np.array([0.2, 1.3]))
    assert np.allclose(quantize_to_codebook(u, cb), np.array([1, -1j]) / math.sqrt(2), atol=1e-15)


def test_quantize_identity_on_codebook():
    cb = PhaseCodebook(3, 5)
    f = cb.vector(np.array([0, 3, 7, 1, 4]))
    assert np.array_equal(quantize_to_codebook(f, cb), f)


def test_quantize_zero_entry_maps_to_phase_zero():
    cb = PhaseCodebook(2, 3)
    f = quantize_to_codebook(np.array([0.0, 1j, -1.0]), cb)
    assert np.angle(f[0]) == 0.0


def test_quantize_rejects_zero_vector():
    with pytest.raises(DegenerateVectorError):
        quantize_to_codebook(np.zeros(4, complex), PhaseCodebook(2, 4))
    with pytest.raises(DegenerateVectorError):
        quantize_to_codebook(np.array([[1.0, 0.0], [1.0, 0.0]]), PhaseCodebook(2, 2))


def test_quantize_midpoint_tie_goes_to_lower_phase():
    cb = PhaseCodebook(2, 1)
    assert cb.indices(np.exp(1j * np.array([math.pi / 4])))[0] == 0
    assert cb.indices(np.exp(1j * np.array([3 * math.pi / 4])))[0] == 1


def test_quantizer_matches_brute_force_500():
    rng = np.random.default_rng(7)
    for _ in range(500):
        Nr = int(rng.integers(1, 5))
        b = int(rng.integers(1, 4))
        cb = PhaseCodebook(b, Nr)
        u = rng.standard_normal(Nr) + 1j * rng.standard_normal(Nr)
        u *= rng.uniform(0.1, 3.0)
        f = quantize_to_codebook(u, cb)
        ref, ref_val = brute_force_quantize(u, cb)
        val = float(np.sum(np.abs(u - f) ** 2))
        assert np.allclose(f, ref, atol=1e-12) or val <= ref_val + 1e-12


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_quantized_vectors_in_codebook(b, n, seed):
    rng = np.random.default_rng(seed)
    cb = PhaseCodebook(b, n)
    u = rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3))
    f = quantize_to_codebook(u, cb)
    assert cb.contains(f)
    # each entry is within half a grid step of the input phase
    diff = np.angle(f * u.conj())
    assert np.all(np.abs(diff) <= cb.step / 2 + 1e-12)


# -- rates -------------------------------------------------------------------

def test_rate_zero_gamma_and_zero_channel(small):
    cfg, ch = small
    comb, _ = chbf(ch, np.full(cfg.L, cfg.N), 1e12)
    assert achievable_rate(comb, ch, 0.0) == 0.0
    zero = ChannelRealization(np.zeros_like(ch.H), ch.alphas, ch.aoa, ch.aod, ch.state,
                              ch.beta_db, ch.shadow_db, ch.distances, ch.Nt)
    assert achievable_rate(comb, zero, 1e12) == 0.0


def test_all_inactive_gives_zero(small):
    cfg, ch = small
    comb, rb = chbf(ch, np.zeros(cfg.L, int), 1e12)
    assert rb.total_rate == 0.0 and np.all(rb.sub_rates == 0.0)
    assert comb.active_counts.tolist() == [0] * cfg.L


def test_rate_matches_stacked_form():
    rng = np.random.default_rng(0)
    for _ in range(30):
        cfg, ch, n = random_instance(rng)
        gamma = 10 ** rng.uniform(8, 13)
        comb, _ = chbf(ch, n, gamma)
        R = achievable_rate(comb, ch, gamma)
        assert R == pytest.approx(stacked_rate(comb, ch, gamma), rel=1e-9, abs=1e-9)


def test_theorem1_identity_against_stacked_oracle():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        cfg, ch, n = random_instance(rng)
        gamma = 10 ** rng.uniform(8, 13)
        comb, rb = chbf(ch, n, gamma)
        ref = stacked_rate(comb, ch, gamma)
        if ref > 0:
            worst = max(worst, abs(rb.sub_rates.sum() - ref) / ref)
        else:
            assert rb.total_rate == 0.0
    assert worst < 1e-9


def test_sub_rates_match_term_by_term_form():
    cfg, ch = make_channels(5, L=6, K=3, Nr=12, Nt=2, N=3, nbar=2)
    gamma = 1e9
    n = np.array([3, 0, 2, 3, 1, 3])
    comb, rb = chbf(ch, n, gamma)
    Q = np.eye(ch.H.shape[2], dtype=complex)
    for l, F in enumerate(comb.blocks):
        if F.shape[1]:
            assert sub_rate(F, ch.H[l], Q, gamma) == pytest.approx(rb.sub_rates[l], rel=1e-10)
            B = F.conj().T @ ch.H[l]
            Q = Q + gamma * B.conj().T @ B


def test_total_rate_high_precision_oracle():
    # 60-digit evaluation of the stacked log-det at the top of the power sweep
    cfg, ch = make_channels(2, L=8, K=4, Nr=16, Nt=2, N=4, nbar=2)
    gamma = 10 ** 13.5
    comb, rb = chbf(ch, np.full(8, 4), gamma)
    mpmath.mp.dps = 60
    F = comb.dense()
    G = F.conj().T @ ch.stacked
    M = mpmath.matrix(G.shape[1], G.shape[1])
    Gm = mpmath.matrix([[mpmath.mpc(complex(x)) for x in row] for row in G])
    M = mpmath.eye(G.shape[1]) + gamma * (Gm.H * Gm)
    ref = float(mpmath.log(mpmath.re(mpmath.det(M)), 2))
    assert rb.sub_rates.sum() == pytest.approx(ref, rel=1e-11)
    assert achievable_rate(comb, ch, gamma) == pytest.approx(ref, rel=1e-11)


# -- C-HBF structure ---------------------------------------------------------

def test_chbf_combiner_valid(small):
    cfg, ch = small
    comb, rb = chbf(ch, np.array([2, 0, 1, 1]), 1e11)
    cb = PhaseCodebook(cfg.b, cfg.Nr)
    assert comb.is_valid(cb, max_cols=cfg.N)
    assert comb.active_counts.tolist() == [2, 0, 1, 1]
    assert rb.gamma == 1e11


def test_chbf_directions_are_eigenvectors():
    cfg, ch = make_channels(6, L=5, K=3, Nr=16, Nt=2, N=4, nbar=2)
    gamma = 1e10
    kernel = CHBFKernel(ch, gamma, cfg.b)
    state = kernel.initial_state()
    for l, n in enumerate([4, 3, 4, 2, 4]):
        Hl = ch.H[l]
        U = state.directions(l, n)
        # oracle: dense eigendecomposition of H_l Q^{-1} H_l^H
        M = Hl @ np.linalg.solve(state.Q, Hl.conj().T)
        lam, V = np.linalg.eigh((M + M.conj().T) / 2)
        V = V[:, ::-1][:, :n]
        assert np.allclose(U.conj().T @ U, np.eye(n), atol=1e-10)
        assert np.allclose(np.abs(np.sum(U.conj() * V, axis=0)), 1.0, atol=1e-8)
        state.advance(l, n)


def test_remark1_prefix_property(small):
    cfg, ch = small
    a, _ = chbf(ch, np.array([1, 1, 1, 1]), 1e11)
    b, _ = chbf(ch, np.array([1, 2, 1, 0]), 1e11)
    assert np.array_equal(a.blocks[0], b.blocks[0])
    assert np.array_equal(a.blocks[1], b.blocks[1][:, :1])


def test_single_ap_chbf_equals_schbf():
    for seed in range(5):
        cfg, ch = make_channels(seed, L=1, K=3, Nr=16, Nt=2, N=4, nbar=4)
        c, _ = chbf(ch, [4], 1e11)
        s = schbf(ch, [4], cfg.b)
        assert np.array_equal(c.blocks[0], s.blocks[0])


def test_schbf_per_ap_independent():
    cfg, ch = make_channels(9, L=5, K=2, Nr=8, Nt=2, N=2, nbar=1)
    n = np.array([2, 1, 0, 2, 1])
    s = schbf(ch, n, cfg.b)
    perm = np.array([3, 0, 4, 2, 1])
    shuffled = ChannelRealization(ch.H[perm], ch.alphas, ch.aoa, ch.aod, ch.state, ch.beta_db,
                                  ch.shadow_db, ch.distances, ch.Nt)
    sp = schbf(shuffled, n[perm], cfg.b)
    for i, l in enumerate(perm):
        assert np.array_equal(sp.blocks[i], s.blocks[l])


def test_leading_eigvecs_phase_convention():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    U, lam = leading_eigvecs(A, 2)
    assert np.all(np.diff(lam) <= 0)
    piv = U[np.argmax(np.abs(U), axis=0), [0, 1]]
    assert np.allclose(piv.imag, 0, atol=1e-14) and np.all(piv.real > 0)


def test_chbf_deterministic(small):
    cfg, ch = small
    a, ra = chbf(ch, np.array([2, 1, 0, 1]), 1e11)
    b, rb = chbf(ch, np.array([2, 1, 0, 1]), 1e11)
    assert all(np.array_equal(x, y) for x, y in zip(a.blocks, b.blocks))
    assert np.array_equal(ra.sub_rates, rb.sub_rates)


@given(st.integers(0, 2 ** 31), st.integers(0, 3), st.floats(6.0, 13.0))
def test_rate_monotone_in_columns(seed, l, log_gamma):
    cfg, ch = make_channels(seed, L=4, K=2, Nr=8, Nt=2, N=2, nbar=1)
    gamma = 10 ** log_gamma
    comb, _ = chbf(ch, np.array([1, 1, 1, 1]), gamma)
    extra = np.random.default_rng(seed).standard_normal((8, 1)) + 0j
    blocks = list(comb.blocks)
    blocks[l] = np.hstack([blocks[l], quantize_to_codebook(extra, PhaseCodebook(cfg.b, 8))])
    assert achievable_rate(blocks, ch, gamma) >= achievable_rate(comb, ch, gamma) - 1e-9


def test_near_orthonormality_report(capsys):
    cfg, ch = make_channels(1, L=10, K=8, Nr=64, Nt=4, N=8, nbar=2)
    comb, _ = chbf(ch, np.full(10, 8), 1e13)
    dev = [np.linalg.norm(F.conj().T @ F - np.eye(F.shape[1])) for F in comb.blocks]
    print(f"max ||F_l^H F_l - I||_F at Nr=64: {max(dev):.3f}")
    assert all(np.isfinite(dev))


# -- baselines ---------------------------------------------------------------

def test_beam_steering_recovers_grid_angle():
    G = 1024
    grid = steering_angles(G)
    phi = grid[700]
    Nr, Nt = 32, 2
    a = array_response(phi, Nr)
    H = np.outer(a, np.ones(Nt))[None] * 5.0
    ch = ChannelRealization(H, None, None, None, None, None, None, None, Nt)
    comb, angles = beam_steering(ch, [1], G, cb=4, return_angles=True)
    assert angles[0][0] == phi
    assert np.allclose(comb.blocks[0], quantize_to_codebook(a[:, None], PhaseCodebook(4, Nr)))


def test_beam_steering_valid(small):
    cfg, ch = small
    comb = beam_steering(ch, np.array([2, 1, 0, 2]), 64, cfg.b)
    assert comb.is_valid(PhaseCodebook(cfg.b, cfg.Nr), max_cols=cfg.N)
    assert comb.active_counts.tolist() == [2, 1, 0, 2]


def test_antenna_selection_full_is_digital(small):
    cfg, ch = small
    gamma = 1e11
    _, rate = antenna_selection(ch, cfg.Nr, gamma)
    H = ch.stacked
    ref = np.linalg.slogdet(np.eye(H.shape[1]) + gamma * H.conj().T @ H)[1] / math.log(2)
    assert rate == pytest.approx(ref, rel=1e-10)


def test_antenna_selection_single_row(small):
    cfg, ch = small
    sel, _ = antenna_selection(ch, 1, 1e11)
    for l in range(cfg.L):
        norms = np.linalg.norm(ch.H[l], axis=1)
        if norms.max() > 0:
            assert sel[l].tolist() == [int(np.argmax(norms))]


def test_selection_matrix_orthonormal():
    S = selection_matrix([0, 3, 5], 8)
    assert np.array_equal(S.T @ S, np.eye(3))
