import numpy as np
import pytest
from hypothesis import given, strategies as st

from relframes.opcore import InputError, Operator, is_effect, opnorm, random_effect, random_state
from relframes.pom import build_phase_pom, canonical_reference, damped_phase_matrix, phase_reference, pom_validate
from relframes.relmap import (
    characteristic, choi_operator, cyclic_difference_pom, cyclic_position, cyclic_rep, fourier_components,
    pom_fourier, relativize, relativize_cyclic, relativize_pom, restrict, restrict_after_relativize,
    truncation_leakage, uniform_superposition,
)
from relframes.symmetry import NumberRep, ladder, tensor_sum, twirl_op

from conftest import philox, rand_matrix

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)


def density_oracle(a, eigsS, ref, nodes):
    """int U(t) a U(t)^dag (x) f(t) dt / 2pi on a uniform grid; exact for trig polynomials."""
    eS = np.asarray(eigsS)
    eR = ref.rep.eigs
    acc = 0
    for t in 2 * np.pi * np.arange(nodes) / nodes:
        u = np.exp(1j * eS * t)
        dens = ref.c * np.exp(1j * (eR[:, None] - eR[None, :]) * t)
        acc = acc + np.kron(u[:, None] * a * u.conj()[None, :], dens)
    return acc / nodes


def test_fourier_blocks():
    comps = fourier_components(SIGMA1, ladder(2))
    np.testing.assert_allclose(comps[1].mat, [[0, 0], [1, 0]])
    np.testing.assert_allclose(comps[-1].mat, [[0, 1], [0, 0]])
    assert set(fourier_components(np.diag([1.0, 2.0]), ladder(2))) == {0}


def test_fourier_blocks_sum_back(rng):
    rep = NumberRep([0, 2, 1, 1])
    a = rand_matrix(rng, 4)
    np.testing.assert_allclose(sum(b.mat for b in fourier_components(a, rep).values()), a)


def test_pom_fourier_against_bin_sum():
    ref = canonical_reference(4)
    f1 = pom_fourier(ref)[1]
    np.testing.assert_allclose(f1, np.diag(np.ones(3), 1))
    B = 2048
    f = build_phase_pom(4, bins=B)
    mids = 2 * np.pi * (np.arange(B) + 0.5) / B
    approx = np.einsum("k,kij->ij", np.exp(1j * mids), f.array)
    np.testing.assert_allclose(approx, f1, atol=1e-5)


def test_relativize_matches_density_quadrature(rng):
    a = rand_matrix(rng, 2)
    ref = phase_reference(damped_phase_matrix(8, 0.6))
    got = relativize(a, ladder(2), ref).mat
    np.testing.assert_allclose(got, density_oracle(a, [0, 1], ref, 64), atol=1e-12)


def test_relativize_matches_bin_riemann_sum(rng):
    a = rand_matrix(rng, 2)
    B = 2048
    f = build_phase_pom(8, bins=B)
    mids = 2 * np.pi * (np.arange(B) + 0.5) / B
    acc = 0
    for t, F in zip(mids, f.array):
        u = np.exp(1j * np.array([0, 1]) * t)
        acc = acc + np.kron(u[:, None] * a * u.conj()[None, :], F)
    np.testing.assert_allclose(relativize(a, ladder(2), canonical_reference(8)).mat, acc, atol=1e-5)


def test_relativize_sigma1_closed_form():
    dR = 5
    y = relativize(SIGMA1, ladder(2), canonical_reference(dR)).mat
    want = np.zeros((2 * dR, 2 * dR))
    for m in range(dR - 1):
        want[0 * dR + m + 1, 1 * dR + m] = 1   # |0><1| (x) |m+1><m|
        want[1 * dR + m, 0 * dR + m + 1] = 1   # |1><0| (x) |m><m+1|
    np.testing.assert_allclose(y, want, atol=1e-15)


def test_relativize_unit_and_invariant():
    ref = canonical_reference(4)
    np.testing.assert_allclose(relativize(np.eye(3), ladder(3), ref).mat, np.eye(12))
    d = np.diag([0.1, 0.5, 0.9])
    np.testing.assert_allclose(relativize(d, ladder(3), ref).mat, np.kron(d, np.eye(4)))


def test_relativize_dimension_mismatch():
    with pytest.raises(InputError):
        relativize(np.eye(3), ladder(2), canonical_reference(3))


def test_relative_phase_selection_rule():
    f = build_phase_pom(2, bins=8)
    ref = canonical_reference(2)
    rel = relativize_pom(f, ladder(2), ref)
    assert pom_validate(rel).normalization < 1e-10
    for E in rel.array:
        for n in range(2):
            for k in range(2):
                for m in range(2):
                    for l in range(2):
                        if n - m != l - k:
                            assert E[n * 2 + k, m * 2 + l] == 0


def test_relativize_trivial_pom():
    from relframes.pom import OutcomeSpace, Pom
    triv = Pom(OutcomeSpace.finite(("all",)), [np.eye(2)])
    np.testing.assert_allclose(relativize_pom(triv, ladder(2), canonical_reference(3)).array[0], np.eye(6))


@pytest.mark.parametrize("dS", [2, 3])
def test_relativize_is_completely_positive(dS):
    ref = phase_reference(damped_phase_matrix(4, 0.8))
    choi = choi_operator(lambda x: relativize(x, ladder(dS), ref), dS)
    assert np.linalg.eigvalsh(0.5 * (choi + choi.conj().T))[0] >= -1e-10


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4), st.integers(2, 7))
def test_relativize_contractive_and_symmetric(seed, dS, dR):
    g = philox(seed)
    a = rand_matrix(g, dS)
    repS = ladder(dS)
    ref = canonical_reference(dR)
    y = relativize(a, repS, ref).mat
    assert opnorm(y) <= opnorm(a) + 1e-10
    total = tensor_sum(repS, ref.rep)
    for t in np.linspace(0.3, 6.0, 5):
        ph = total.phases(t)
        assert opnorm(ph[:, None] * y * ph.conj()[None, :] - y) < 1e-10
    E = random_effect(dS, g)
    assert is_effect(relativize(E, repS, ref))


def test_leakage_reports_dropped_harmonics():
    a = np.zeros((4, 4))
    a[0, 3] = 1
    assert truncation_leakage(a, ladder(4), canonical_reference(3)) == 1.0
    assert truncation_leakage(a, ladder(4), canonical_reference(4)) == 0.0


def test_restrict_product_and_unit(rng):
    A, B = rand_matrix(rng, 2), rand_matrix(rng, 3)
    w = random_state(3, rng).mat
    np.testing.assert_allclose(restrict(np.kron(A, B), w).mat, A * np.trace(w @ B), atol=1e-12)
    np.testing.assert_allclose(restrict(np.eye(6), w).mat, np.eye(2), atol=1e-12)


def test_restrict_duality_and_module(rng):
    for _ in range(100):
        rho = random_state(2, rng).mat
        w = random_state(3, rng).mat
        r = rand_matrix(rng, 6)
        lhs = np.trace(rho @ restrict(r, w).mat)
        rhs = np.trace(np.kron(rho, w) @ r)
        assert abs(lhs - rhs) < 1e-12
    x, y = rand_matrix(rng, 2), rand_matrix(rng, 2)
    r = rand_matrix(rng, 6)
    w = random_state(3, rng).mat
    left = restrict(np.kron(x, np.eye(3)) @ r @ np.kron(y, np.eye(3)), w).mat
    assert opnorm(left - x @ restrict(r, w).mat @ y) < 1e-12


def test_restrict_covariance_dichotomy(rng):
    repS, repR = ladder(2), ladder(3)
    total = tensor_sum(repS, repR)

    def cov_residual(w, r, t):
        ph = total.phases(t)
        moved = ph[:, None] * r * ph.conj()[None, :]
        u = repS.phases(t)
        return opnorm(restrict(moved, w).mat - u[:, None] * restrict(r, w).mat * u.conj()[None, :])

    inv = twirl_op(random_state(3, rng).mat, repR).mat
    for _ in range(20):
        r = rand_matrix(rng, 6)
        assert max(cov_residual(inv, r, t) for t in np.linspace(0.2, 6, 6)) < 1e-12
    for _ in range(5):
        w = random_state(3, rng).mat
        worst = max(cov_residual(w, rand_matrix(rng, 6), t) for t in np.linspace(0.2, 6, 6) for _ in range(3))
        assert worst > 1e-3


def test_restrict_after_relativize_examples(rng):
    ref = canonical_reference(7)
    a = random_effect(2, rng).mat
    num = np.zeros((7, 7))
    num[3, 3] = 1
    np.testing.assert_allclose(restrict_after_relativize(a, num, ladder(2), ref).mat,
                               twirl_op(a, ladder(2)).mat, atol=1e-14)
    phi = uniform_superposition(64)
    got = restrict_after_relativize(SIGMA1, np.outer(phi, phi), ladder(2), canonical_reference(65)).mat
    np.testing.assert_allclose(got, 64 / 65 * SIGMA1, atol=1e-14)
    for _ in range(20):
        w = random_state(7, rng).mat
        b = rand_matrix(rng, 3)
        via = restrict(relativize(b, ladder(3), ref), w).mat
        np.testing.assert_allclose(restrict_after_relativize(b, w, ladder(3), ref).mat, via, atol=1e-12)


def test_characteristic_uniform_superposition():
    for n in (1, 5, 40):
        phi = uniform_superposition(n)
        mu = characteristic(np.outer(phi, phi), canonical_reference(n + 1))
        assert mu[1] == pytest.approx(n / (n + 1))
        assert mu[-1] == pytest.approx(n / (n + 1))
        assert mu[0] == pytest.approx(1.0)


def test_high_localisation_convergence(rng):
    repS = ladder(3)
    N = repS.N().mat
    for _ in range(5):
        a = random_effect(3, rng).mat
        comm = opnorm(N @ a - a @ N)
        ds = []
        for n in (16, 64, 256, 512):
            phi = uniform_superposition(n)
            approx = restrict_after_relativize(a, np.outer(phi, phi), repS, canonical_reference(n + 1)).mat
            ds.append(opnorm(a - approx))
        assert all(x > y for x, y in zip(ds, ds[1:]))
        assert ds[-1] < 0.02 * comm


def test_cyclic_relativisation(rng):
    L = 5
    rep = cyclic_position(L)
    chk = rep.check()
    assert max(chk.values()) < 1e-12
    for _ in range(10):
        a, b = rand_matrix(rng, L), rand_matrix(rng, L)
        assert opnorm(relativize_cyclic(a @ b, rep).mat - relativize_cyclic(a, rep).mat @ relativize_cyclic(b, rep).mat) < 1e-12
    # a reference localised at the identity gives the absolute operator back
    phi = np.zeros(L)
    phi[0] = 1
    a = rand_matrix(rng, L)
    np.testing.assert_allclose(restrict(relativize_cyclic(a, rep), np.outer(phi, phi)).mat, a, atol=1e-12)
    inv = np.eye(L) * 0.3
    np.testing.assert_allclose(relativize_cyclic(inv, rep).mat, np.kron(inv, np.eye(L)))


def test_cyclic_position_becomes_difference():
    L = 6
    rep = cyclic_position(L)
    diff = cyclic_difference_pom(L)
    for x in range(L):
        Q = np.zeros((L, L))
        Q[x, x] = 1
        np.testing.assert_allclose(relativize_cyclic(Q, rep).mat, diff.array[x], atol=1e-15)


def test_cyclic_rep_order_check():
    with pytest.raises(InputError):
        cyclic_rep(np.diag([1, 1j]), 2)
