"""Acceptance gate: one test per criterion, each with its tolerance and runtime budget.

The terminal summary (see conftest) prints a PASS/FAIL line per criterion.
"""

import math
import time

import numpy as np
import pytest

from relframes import measure as ms
from relframes import models as M
from relframes.bounds import (
    owb_effect, prop1_check, prop2_owb_check, summarize, sweep_owb, sweep_prop1, sweep_tradeoff,
)
from relframes.coherence import EPS_GRID, absolute_coherence, mutual_coherence, product_state
from relframes.opcore import opnorm, random_effect, random_state
from relframes.pom import build_phase_pom, canonical_reference, damped_phase_matrix, localisation_margin, phase_reference
from relframes.relmap import (
    choi_operator, cyclic_position, relativize, relativize_cyclic, restrict, restrict_after_relativize,
    uniform_superposition,
)
from relframes.symmetry import NumberRep, ladder, local_rep, tensor_sum, twirl_op

from conftest import philox, rand_matrix
from oracles import sdp_invariant_sup


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f} s, budget {self.seconds} s"


@pytest.mark.criterion(1, "model 1 interference probability")
def test_c01_model1():
    with Budget(1.0):
        worst_p, worst_tw = 0.0, 0.0
        for theta in np.linspace(0, 2 * np.pi, 64):
            r = M.model1_run(theta)
            worst_p = max(worst_p, abs(r.results["p0"] - math.cos(theta / 2) ** 2))
            worst_tw = max(worst_tw, abs(r.results["p0"] - r.results["p0_twirled"]),
                           abs(r.results["p0"] - r.results["p0_stagewise_twirl"]))
    assert worst_p < 1e-12 and worst_tw < 1e-12


@pytest.mark.criterion(2, "qubit relativisation attenuation")
def test_c02_qubit():
    with Budget(5.0):
        runs = {n: M.qubit_demo(n) for n in (1, 9, 99)}
    for n, r in runs.items():
        assert r.residuals["sigma3_exact"] < 1e-12
        assert r.residuals["sigma1_attenuation"] < 1e-12
        assert r.residuals["sigma2_attenuation"] < 1e-12


@pytest.mark.criterion(3, "model 2 error-norm law")
def test_c03_error_norm():
    with Budget(5.0):
        errs = {j: M.model2_run(j, 0.7, 0.3, with_relphase=False).results["error_norm_sq"] for j in (1, 4, 16, 64)}
    for j, e in errs.items():
        assert abs(e - 1 / (2 * j + 1)) < 1e-14


@pytest.mark.criterion(4, "localisation tail bound")
def test_c04_tail():
    with Budget(30.0):
        pairs = [(M.tail_probability(n, 0.5), M.tail_bound(n, 0.5)) for n in (10, 100, 1000, 10_000)]
    for p, b in pairs:
        assert 0 <= p <= b


@pytest.mark.criterion(5, "localisation lemma margin")
def test_c05_localisation_margin():
    g = philox(5)
    worst = math.inf
    with Budget(10.0):
        for d in (2, 4, 8):
            f = build_phase_pom(d, bins=16)
            for _ in range(500):
                X = g.choice(16, size=int(g.integers(1, 17)), replace=False)
                worst = min(worst, localisation_margin(random_state(d, g).mat, f, X))
    assert worst >= -1e-12


@pytest.mark.criterion(6, "trade-off inequalities")
def test_c06_tradeoff():
    g = philox(6)
    with Budget(120.0):
        sums = {
            "prop1": summarize(sweep_prop1(1000, g)),
            "prop2/owb": summarize(sweep_owb(1000, g)),
            "tradeoff": summarize(sweep_tradeoff(1000, g)),
        }
        num = np.zeros((9, 9))
        num[4, 4] = 1
        _, owb = prop2_owb_check(num, canonical_reference(9))
    for name, s in sums.items():
        assert s["count"] >= 1000 and s["failures"] == 0, (name, s)
    assert owb.lhs == 0.5 and owb.lhs > 1 / 32 and owb.passed


@pytest.mark.criterion(7, "mutual coherence")
def test_c07_mutual_coherence():
    g = philox(7)
    with Budget(60.0):
        worst_sdp = 0.0
        for dR in (2, 3):
            repS, repR = ladder(2), ladder(dR)
            loc = local_rep(repS, (2, dR), 0)
            labels = tensor_sum(repS, repR).eigs
            for _ in range(100):
                theta = random_state(2 * dR, g).mat
                delta = theta - twirl_op(theta, loc).mat
                worst_sdp = max(worst_sdp, abs(mutual_coherence(theta, repS, repR) - sdp_invariant_sup(delta, labels)))
        worst_inv, worst_bound = 0.0, -math.inf
        for dR in (2, 3):
            repS, repR = ladder(2), ladder(dR)
            for _ in range(100):
                rS, rR = random_state(2, g).mat, random_state(dR, g).mat
                inv = twirl_op(rR, repR).mat
                worst_inv = max(worst_inv, mutual_coherence(product_state(rS, inv), repS, repR))
                m = mutual_coherence(product_state(rS, rR), repS, repR)
                worst_bound = max(worst_bound, m - min(absolute_coherence(rS, repS), absolute_coherence(rR, repR)))
    assert worst_sdp < 1e-6
    assert worst_inv < 1e-14
    assert worst_bound <= 1e-10


@pytest.mark.criterion(8, "high-localisation convergence")
def test_c08_convergence():
    g = philox(8)
    repS = ladder(3)
    refs = {n: canonical_reference(n + 1) for n in (16, 64, 256, 512)}
    omegas = {n: np.outer(uniform_superposition(n), uniform_superposition(n)) for n in refs}
    with Budget(120.0):
        for _ in range(20):
            a = random_effect(3, g)
            ds = [opnorm(a.mat - restrict_after_relativize(a, omegas[n], repS, refs[n]).mat) for n in refs]
            assert all(x > y for x, y in zip(ds, ds[1:]))
            for eps in EPS_GRID:
                r = prop1_check(a, omegas[512], repS, refs[512], eps)
                assert r.lhs == pytest.approx(ds[-1], abs=1e-14)
                assert r.passed


@pytest.mark.criterion(9, "nucleon-cavity model")
def test_c09_as():
    g = philox(9)
    with Budget(120.0):
        run = M.as_run(M.ASConfig(q1=16, q2=16))
        cut = 10
        rep = tensor_sum(NumberRep(M.AS_CHARGES), ladder(cut + 1))
        worst = math.inf
        for _ in range(50):
            U = M.random_conserving_unitary(rep, g)
            for i in range(cut + 1):
                worst = min(worst, M.as_nogo_check(i, U, cut).results["min_distance_sq"])
    assert abs(run.results["number_input_pP"] - run.results["number_input_expected"]) < 1e-10
    assert run.residuals["common_shift_invariance"] < 1e-12
    assert run.results["relative_phase_variation"] > 0.1
    assert worst >= 2 - math.sqrt(2) - 1e-10


@pytest.mark.criterion(10, "atom-molecule model and Poisson tail argument")
def test_c10_dowling_appendix():
    with Budget(60.0):
        d = [M.dowling_beta1_distance(m) for m in (25, 100, 400)]
        checks = []
        for k in range(2, 11):
            thr = k ** 2 / M.delta_k(k) ** 2
            for m in (math.floor(thr) + 1, 2 * thr, 10 * thr):
                checks.append((k, m, M.appendix_bound_check(m, k)))
    assert d[0] > d[1] > d[2]
    for k, m, run in checks:
        assert m > run.results["threshold_m"]
        assert run.results["a_m"] < 4 / k ** 2, (k, m)
        assert run.results["chebyshev_tail"] <= 3 / k ** 2, (k, m)
        assert run.passed


@pytest.mark.criterion(11, "measurement reproducibility, strong WAY, compose-evolve-separate")
def test_c11_measurement():
    g = philox(11)
    with Budget(120.0):
        worst_rep = 0.0
        for _ in range(200):
            dS, dA = int(g.integers(2, 4)), int(g.integers(2, 5))
            s = ms.random_scheme(dS, dA, g, pointer_outcomes=int(g.integers(1, dA + 1)))
            worst_rep = max(worst_rep, ms.reproducibility_residual(s, random_state(dS, g)))
        worst_way = 0.0
        for t in range(50):
            dS, dA = int(g.integers(2, 4)), int(g.integers(2, 4))
            L_S = np.diag(g.integers(0, 3, size=dS)).astype(complex)
            U = ms.conserving_coupling(L_S, dA, g, "blocks" if t % 2 else "exp")
            v = g.normal(size=dA) + 1j * g.normal(size=dA)
            s = ms.MeasurementScheme(dS, dA, U, ms.sharp_pom(dA), ms.State.from_vector(v))
            res = ms.strong_way_check(s, L_S)
            assert not res.skipped
            worst_way = max(worst_way, res.residual)
        cases = [
            (M.model1_unitaries(0.9)[0], ladder(2), ladder(2)),
            (M.model1_unitaries(0.9)[1] @ M.model1_unitaries(0.9)[0], ladder(2), ladder(2)),
            (M.model2_unitaries(3, 0.9)[0], ladder(2), NumberRep(M.model2_lattice(3))),
            (M.model3_unitaries(6, 0.9)[1], ladder(2), ladder(7)),
            (M.as_stage_unitary(0.4, 6), NumberRep(M.AS_CHARGES), ladder(7)),
            (M.dowling_stage(5.0, 6), NumberRep([1, 2]), ladder(7)),
        ]
        worst_www = 0.0
        for U, repS, repR in cases:
            for _ in range(10):
                out = M.www_pipeline(U, random_state(repS.dim, g).mat, random_state(repR.dim, g).mat, repS, repR)
                worst_www = max(worst_www, out["invariance"])
    assert worst_rep < 1e-12
    assert worst_way < 1e-9
    assert worst_www < 1e-10


@pytest.mark.criterion(12, "structural identities")
def test_c12_structural():
    g = philox(12)
    with Budget(60.0):
        worst_choi = math.inf
        for dS in (2, 3):
            for ref in (canonical_reference(4), phase_reference(damped_phase_matrix(5, 0.7))):
                choi = choi_operator(lambda x: relativize(x, ladder(dS), ref), dS)
                worst_choi = min(worst_choi, np.linalg.eigvalsh(0.5 * (choi + choi.conj().T))[0])
        rep = cyclic_position(5)
        worst_hom = 0.0
        for _ in range(20):
            a, b = rand_matrix(g, 5), rand_matrix(g, 5)
            worst_hom = max(worst_hom, opnorm(relativize_cyclic(a @ b, rep).mat
                                              - relativize_cyclic(a, rep).mat @ relativize_cyclic(b, rep).mat))
        worst_mod = 0.0
        for _ in range(50):
            x, y, r = rand_matrix(g, 2), rand_matrix(g, 2), rand_matrix(g, 6)
            w = random_state(3, g).mat
            lhs = restrict(np.kron(x, np.eye(3)) @ r @ np.kron(y, np.eye(3)), w).mat
            worst_mod = max(worst_mod, opnorm(lhs - x @ restrict(r, w).mat @ y))
        repS, repR = ladder(2), ladder(3)
        total = tensor_sum(repS, repR)
        tS, tR = local_rep(repS, (2, 3), 0), local_rep(repR, (2, 3), 1)
        worst_tw = 0.0
        for _ in range(50):
            base = twirl_op(rand_matrix(g, 6), total).mat
            one, two = twirl_op(base, tS).mat, twirl_op(base, tR).mat
            both = twirl_op(one, tR).mat
            worst_tw = max(worst_tw, opnorm(one - two), opnorm(one - both))
    assert worst_choi >= -1e-10
    assert worst_hom < 1e-12
    assert worst_mod < 1e-12
    assert worst_tw < 1e-12
