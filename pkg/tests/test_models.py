import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.linalg import expm

from relframes import models as M
from relframes.opcore import InputError, opnorm, random_state
from relframes.symmetry import NumberRep, ladder, tensor_sum

from conftest import philox

SQ2 = math.sqrt(2)


# -- building blocks -----------------------------------------------------------

def test_pair_unitary_leaves_unpaired_fixed():
    U = M.pair_unitary(5, [(0, 3)], [M.HADAMARD_BLOCK])
    assert M.unitarity_residual(U) < 1e-15
    assert U[1, 1] == U[2, 2] == U[4, 4] == 1
    assert U[3, 0] == pytest.approx(1 / SQ2)


@pytest.mark.parametrize("theta", [0.0, 0.4, np.pi / 2, 2.0, np.pi])
def test_model1_cos2(theta):
    run = M.model1_run(theta)
    assert run.passed, run.failures
    assert run.results["p0"] == pytest.approx(math.cos(theta / 2) ** 2, abs=1e-12)


@given(st.floats(-10, 10))
def test_model1_any_angle(theta):
    assert M.model1_run(theta).passed


# -- model 2 ---------------------------------------------------------------------

def _angle_variance_quad(j):
    N = 2 * j + 1
    n = np.arange(-j, j + 1)
    f = lambda x: x * x * abs(np.sum(np.exp(-1j * n * x))) ** 2 / (2 * np.pi * N)  # noqa: E731
    return integrate.quad(f, -np.pi, np.pi, limit=1000, epsabs=1e-14, epsrel=1e-13)[0]


@pytest.mark.parametrize("j", [1, 4, 16])
def test_angle_variance_matches_quadrature(j):
    assert M.angle_moments(j)[1] == pytest.approx(_angle_variance_quad(j), abs=1e-12)


def test_angle_variance_shrinks():
    v = [M.angle_moments(j)[1] for j in (1, 4, 16, 64)]
    assert all(a > b for a, b in zip(v, v[1:]))
    # Fejer-kernel variance ~ 2 log(N) / N asymptotically; just check the order
    assert v[-1] < 0.03


@pytest.mark.parametrize("j", [1, 2, 5, 12])
@pytest.mark.parametrize("theta,theta_p", [(0.3, 0.0), (1.9, -0.7)])
def test_model2_run(j, theta, theta_p):
    run = M.model2_run(j, theta, theta_p, with_relphase=False)
    assert run.passed, run.failures
    assert run.results["error_norm_sq"] == pytest.approx(1 / (2 * j + 1), abs=1e-14)


def test_model2_rejects_small_j():
    with pytest.raises(InputError):
        M.model2_run(0, 0.1)


def test_model2_frozen():
    run = M.model2_run(1, 0.8, 0.0, with_relphase=False)
    assert run.results["error_norm_sq"] == pytest.approx(1 / 3, abs=1e-15)
    assert run.results["angle_variance"] == pytest.approx(0.9565348003631197, abs=1e-12)


def test_relative_effect_sees_theta_only_with_phase_reference():
    vals = [M.relphase_expectation(4, t) for t in np.linspace(0, 2 * np.pi, 6, endpoint=False)]
    assert max(vals) - min(vals) > 0.1
    # number-state reference: reduced state is theta-independent and maximally mixed
    for t in (0.0, 1.1, 2.7):
        assert opnorm(M.www_model2_reduced(4, t) - 0.5 * np.eye(2)) < 1e-14


def test_invariant_statistics_agree_with_and_without_twirl():
    for t in (0.2, 1.3):
        a = M.relphase_expectation(3, t, twirled=True)
        b = M.relphase_expectation(3, t, twirled=False)
        assert a == pytest.approx(b, abs=1e-12)


# -- model 3 ---------------------------------------------------------------------

@pytest.mark.parametrize("cutoff,n", [(4, 0), (4, 1), (8, 3), (20, 20)])
@pytest.mark.parametrize("theta", [0.5, 2.2])
def test_model3(cutoff, n, theta):
    run = M.model3_run(cutoff, theta, n)
    assert run.passed, run.failures


@pytest.mark.parametrize("args", [(1, 0.1), (5, 0.1, 9)])
def test_model3_rejects(args):
    with pytest.raises(InputError):
        M.model3_run(*args)


# -- qubit relativisation ------------------------------------------------------------

def _tail_quad(n, eps):
    d = (n + 1) ** ((-1 + eps) / 2)
    k = np.arange(n + 1)
    f = lambda t: abs(np.sum(np.exp(1j * k * t))) ** 2 / (2 * np.pi * (n + 1))  # noqa: E731
    return 1 - integrate.quad(f, -d / 2, d / 2, limit=500, epsabs=1e-13)[0]


@pytest.mark.parametrize("n", [9, 100, 1000])
def test_tail_probability_matches_quadrature(n):
    assert M.tail_probability(n, 0.5) == pytest.approx(_tail_quad(n, 0.5), abs=1e-10)


@pytest.mark.parametrize("n", [1, 3, 9, 40])
def test_qubit_demo(n):
    run = M.qubit_demo(n)
    assert run.passed, run.failures
    assert run.results["sigma1_factor"] == pytest.approx(n / (n + 1), abs=1e-10)


def test_qubit_large_n_sparse():
    run = M.qubit_demo(10_000, dense=False)
    assert run.passed
    assert run.results["tail_probability"] == pytest.approx(0.0012716128814024286, rel=1e-9)
    assert run.results["tail_bound"] == pytest.approx(0.08001266877256649, rel=1e-12)


# -- nucleon / cavity model --------------------------------------------------------------

@pytest.mark.parametrize("gT", [0.05, 0.3, 1.0])
def test_as_stage_is_exponential_of_coupling(gT):
    H = M.as_hamiltonian(1.0, 12)
    assert opnorm(expm(1j * gT * H) - M.as_stage_unitary(gT, 12)) < 1e-12


def test_apply_stage_matches_dense(rng):
    c1, c2, gT = 5, 4, 0.37
    psi = rng.normal(size=(2, c1 + 1, c2 + 1)) + 1j * rng.normal(size=(2, c1 + 1, c2 + 1))
    U = M.as_stage_unitary(gT, c1)  # [P,N] x cavity1
    dense = (U @ psi.reshape(2 * (c1 + 1), c2 + 1)).reshape(psi.shape)
    assert np.max(np.abs(M._apply_stage(psi, gT, 1) - dense)) < 1e-13
    U2 = M.as_stage_unitary(gT, c2)
    t = np.transpose(psi, (0, 2, 1)).reshape(2 * (c2 + 1), c1 + 1)
    dense2 = np.transpose((U2 @ t).reshape(2, c2 + 1, c1 + 1), (0, 2, 1))
    assert np.max(np.abs(M._apply_stage(psi, gT, 2) - dense2)) < 1e-13


def _as_pP_loops(q1, q2, gT, th, thp, c1, c2):
    a1 = M.coherent_amplitudes(q1, th, c1)
    a2 = M.coherent_amplitudes(q2, thp, c2)
    total = 0.0
    for k in range(c1 + 1):
        for l in range(c2 + 1):
            amp = a1[k] * a2[l] * math.cos(gT * math.sqrt(k + 1)) * (math.cos(gT * math.sqrt(l + 1)) if l < c2 else 1)
            if k >= 1 and l + 1 <= c2:
                amp += a1[k - 1] * a2[l + 1] * 1j * math.sin(gT * math.sqrt(k)) * 1j * math.sin(gT * math.sqrt(l + 1))
            if k == c1:
                amp = a1[k] * a2[l] * (math.cos(gT * math.sqrt(l + 1)) if l < c2 else 1)
                if l + 1 <= c2:
                    amp += a1[k - 1] * a2[l + 1] * 1j * math.sin(gT * math.sqrt(k)) * 1j * math.sin(gT * math.sqrt(l + 1))
            total += abs(amp) ** 2
    return total


@pytest.mark.parametrize("theta", [0.0, 1.3])
def test_as_final_probability_matches_loops(theta):
    cfg = M.ASConfig(theta=theta)
    _, _, _, (c1, c2) = M.as_final_state(cfg)
    ref = _as_pP_loops(cfg.q1, cfg.q2, cfg.g * cfg.T, theta, 0.0, c1, c2)
    assert M.as_proton_probability(cfg) == pytest.approx(ref, abs=1e-12)


def test_as_default_frozen():
    run = M.as_run(M.ASConfig())
    assert run.passed, run.failures
    assert run.results["final_pP"] == pytest.approx(0.026373482918427303, abs=1e-12)
    assert run.results["relative_phase_variation"] > 0.5
    assert max(run.tails.values()) < 1e-8


def test_as_no_coupling_keeps_proton():
    assert M.as_proton_probability(M.ASConfig(g=0.0)) == pytest.approx(1.0, abs=1e-8)


def test_as_product_infidelity_decreases():
    vals = [M.as_product_infidelity(q, (np.pi / 4) / math.sqrt(q)) for q in (4, 16, 64)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 0.01


def test_as_cutoff_guard():
    with pytest.raises(InputError):
        M.check_tail(16.0, 30)
    assert M.check_tail(16.0, M.required_cutoff(16.0)) < 1e-8


def test_as_nogo_random_couplings(rng):
    cut = 6
    rep = tensor_sum(NumberRep(M.AS_CHARGES), ladder(cut + 1))
    for _ in range(100):
        U = M.random_conserving_unitary(rep, rng)
        assert M.conservation_residual(U, rep) < 1e-12
        for i in range(cut + 1):
            run = M.as_nogo_check(i, U, cut)
            assert run.passed
            assert run.results["min_distance_sq"] >= 2 - SQ2 - 1e-10


def test_as_nogo_rejects_nonconserving(rng):
    from relframes.opcore import random_unitary
    with pytest.raises(InputError):
        M.as_nogo_check(0, random_unitary(8, rng), 3)


# -- atom / molecule model ---------------------------------------------------------------

def test_dowling_apply_matches_dense(rng):
    c = 12
    psi = rng.normal(size=(2, c + 1)) + 1j * rng.normal(size=(2, c + 1))
    dense = (M.dowling_stage(7.0, c) @ psi.reshape(-1)).reshape(2, c + 1)
    assert np.max(np.abs(M._dowling_apply(psi, 7.0) - dense)) < 1e-14


def _dowling_dense_pA(m, phi):
    c = M.required_cutoff(m)
    U1 = M.dowling_stage(m, c)
    U2 = np.diag(np.r_[np.ones(c + 1), np.full(c + 1, np.exp(-1j * phi))])
    psi = np.r_[M.coherent_state(m, 0.0, c), np.zeros(c + 1)]
    out = U1 @ U2 @ U1 @ psi
    return float(np.sum(np.abs(out[:c + 1]) ** 2))


@pytest.mark.parametrize("m,phi", [(100, np.pi / 3), (400, 1.0)])
def test_dowling_run(m, phi):
    run = M.dowling_run(m, phi)
    assert run.passed, run.failures
    assert run.results["atom_probability"] == pytest.approx(_dowling_dense_pA(m, phi), abs=1e-12)


def test_dowling_frozen():
    assert M.dowling_run(400, 1.0).results["atom_probability"] == pytest.approx(0.2310359843565112, abs=1e-12)


def test_dowling_beta1_distance_decays():
    d = [M.dowling_beta1_distance(m) for m in (25, 100, 400)]
    assert d[0] > d[1] > d[2]
    # roughly halves when m quadruples
    assert d[1] / d[2] == pytest.approx(2.0, rel=0.05)


# -- tail-of-Poisson argument --------------------------------------------------------

def _delta_mp(k):
    mp.mp.dps = 30
    c0 = mp.cos(mp.pi / 4)
    up = mp.findroot(lambda d: c0 - mp.cos(mp.sqrt(1 + d) * mp.pi / 4) - mp.mpf(1) / k, 0.5)
    down = mp.cos(mp.pi / 4 * 0) - c0  # n = 0
    if down < mp.mpf(1) / k:
        return float(up)
    dn = mp.findroot(lambda d: mp.cos(mp.sqrt(1 - d) * mp.pi / 4) - c0 - mp.mpf(1) / k, 0.5)
    return float(min(up, dn))


@pytest.mark.parametrize("k", [2, 3, 10])
def test_delta_k_matches_mpmath(k):
    assert M.delta_k(k) == pytest.approx(_delta_mp(k), abs=1e-10)
    assert M.delta_k(k) <= _delta_mp(k) + 1e-15


def _a_m_mp(m):
    mp.mp.dps = 40
    s = mp.mpf(0)
    for n in range(4 * m + 200):
        w = mp.exp(n * mp.log(m) - m - mp.loggamma(n + 1))
        s += w * (mp.cos(mp.sqrt(mp.mpf(n) / m) * mp.pi / 4) - 1 / mp.sqrt(2)) ** 2
    return float(s)


@pytest.mark.parametrize("m", [100, 900])
def test_a_m_matches_mpmath(m):
    assert M.appendix_bound_check(m, 2).results["a_m"] == pytest.approx(_a_m_mp(m), abs=1e-12)


def test_threshold_k10():
    run = M.appendix_bound_check(900, 10)
    assert run.results["threshold_m"] == pytest.approx(800.80, abs=0.01)
    assert "a_m_bound" in run.results and run.passed


@pytest.mark.parametrize("m,k", [(10, 2), (100, 3), (900, 10), (5000, 20)])
def test_appendix_checks(m, k):
    assert M.appendix_bound_check(m, k).passed


def test_appendix_rejects():
    with pytest.raises(InputError):
        M.appendix_bound_check(10, 1)
    with pytest.raises(InputError):
        M.delta_k(0)


# -- compose / evolve / separate -------------------------------------------------------

@pytest.mark.parametrize("which", ["model1", "model2", "model3", "as"])
def test_pipeline_gives_invariant_reduced_state(which, rng):
    if which == "model1":
        U, _ = M.model1_unitaries(0.9)
        repS, repR = ladder(2), ladder(2)
    elif which == "model2":
        U, _, _ = M.model2_unitaries(2, 0.9)
        repS, repR = ladder(2), NumberRep(M.model2_lattice(2))
    elif which == "model3":
        U, _, _ = M.model3_unitaries(5, 0.9)
        repS, repR = ladder(2), ladder(6)
    else:
        U = M.as_stage_unitary(0.4, 5)
        repS, repR = NumberRep(M.AS_CHARGES), ladder(6)
    for _ in range(10):
        out = M.www_pipeline(U, random_state(repS.dim, rng).mat, random_state(repR.dim, rng).mat, repS, repR)
        assert out["invariance"] < 1e-13
        assert np.trace(out["reduced"]).real == pytest.approx(1.0, abs=1e-13)


@given(st.integers(0, 2 ** 32 - 1))
def test_random_conserving_unitary_property(seed):
    g = philox(seed)
    rep = tensor_sum(ladder(int(g.integers(2, 4))), ladder(int(g.integers(2, 6))))
    U = M.random_conserving_unitary(rep, g)
    assert M.conservation_residual(U, rep) < 1e-12
    assert M.unitarity_residual(U) < 1e-12
