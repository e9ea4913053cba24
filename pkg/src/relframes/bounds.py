"""Checks of the localisation / approximation trade-off inequalities.

Every check returns a :class:`BoundReport` with ``residual = rhs - lhs`` for
upper bounds on the approximation error and ``residual = lhs - rhs`` for lower
bounds, so ``residual >= -tol`` always means "inequality holds".
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .coherence import EPS_GRID, centered_width
from .opcore import (
    InputError,
    Operator,
    as_operator,
    opnorm,
    random_effect,
    random_state,
)
from .pom import PhaseReference, canonical_reference
from .relmap import relativize, restrict, restrict_after_relativize, uniform_superposition
from .symmetry import NumberRep, is_invariant, ladder, tensor_sum, twirl_op

BOUND_TOL = 1e-10


@dataclass
class BoundReport:
    name: str
    lhs: float
    rhs: float
    residual: float
    digest: str = ""
    tol: float = BOUND_TOL
    extra: dict = field(default_factory=dict)
    strict: bool = False

    @property
    def passed(self) -> bool:
        if self.strict:
            return self.residual > 0
        return self.residual >= -self.tol


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=complex)).tobytes())
    return h.hexdigest()[:16]


def metrics(a, b):
    """(D(a, b), V(a)) with D the operator-norm distance and V(a) = ||a - a^2||."""
    a = as_operator(a)
    b = as_operator(b)
    if not (a.is_hermitian() and b.is_hermitian()):
        raise InputError("metrics expects Hermitian operators")
    return opnorm(a.mat - b.mat), opnorm(a.mat - a.mat @ a.mat)


def number_spread(omega, rep: NumberRep) -> float:
    """Delta_omega N = sqrt(<N^2> - <N>^2), tiny negatives clamped."""
    w = np.real(np.diag(as_operator(omega).mat))
    n = rep.eigs.astype(float)
    mean = float(np.dot(w, n))
    var = float(np.dot(w, n * n)) - mean * mean
    return float(np.sqrt(max(var, 0.0)))


def _norm_N(rep: NumberRep) -> float:
    return float(np.max(np.abs(rep.eigs)))


def prop1_check(a, omega, repS: NumberRep, ref: PhaseReference, epsilon: float) -> BoundReport:
    """D(a, Gamma_omega(yen(a))) <= ||[N_S, a]|| (W0/2 (1 - eps) + pi eps).

    The upper end of the W0 bisection bracket is used, which can only enlarge
    the right-hand side.
    """
    a = as_operator(a)
    approx = restrict_after_relativize(a, omega, repS, ref)
    lhs = opnorm(a.mat - approx.mat)
    N = repS.N().mat
    comm = opnorm(N @ a.mat - a.mat @ N)
    _, w0 = centered_width(omega, ref, epsilon)
    rhs = comm * (0.5 * w0 * (1 - epsilon) + np.pi * epsilon)
    return BoundReport("prop1", lhs, rhs, rhs - lhs, _digest(a.mat, as_operator(omega).mat),
                       extra={"epsilon": epsilon, "W0": w0, "commutator": comm})


def owb_effect() -> Operator:
    """A = 1/2 (|0><0| + |1><1| + |0><1| + |1><0|)."""
    return Operator(0.5 * np.array([[1, 1], [1, 1]], dtype=complex))


def prop2_owb_check(omega, ref: PhaseReference, eps_grid=EPS_GRID):
    """Lower bounds on D(A, Gamma_omega(yen(A))) for the fixed qubit effect A.

    Returns (prop2, owb) reports.  prop2 takes the worst residual over the
    epsilon grid, using the lower end of the W0 bracket.
    """
    A = owb_effect()
    repS = ladder(2)
    approx = restrict_after_relativize(A, omega, repS, ref)
    D = opnorm(A.mat - approx.mat)
    worst = None
    for eps in eps_grid:
        w0, _ = centered_width(omega, ref, eps)
        bound = 0.5 * eps * (1 - np.cos(0.5 * w0))
        if worst is None or D - bound < worst[2]:
            worst = (D, bound, D - bound, eps)
    dig = _digest(as_operator(omega).mat)
    p2 = BoundReport("prop2", worst[0], worst[1], worst[2], dig, extra={"epsilon": worst[3]})
    spread = number_spread(omega, ref.rep)
    if spread < 1.0 / 6.0:
        rhs = 1.0 / 32.0
        owb = BoundReport("owb", D, rhs, D - rhs, dig, strict=True,
                          extra={"spread": spread, "branch": "small-spread"})
    else:
        rhs = (1.0 / 32.0) * (1 - np.cos(np.pi / (12 * spread)))
        owb = BoundReport("owb", D, rhs, D - rhs, dig, extra={"spread": spread, "branch": "large-spread"})
    return p2, owb


def tradeoff_check(a, e, omega, repS: NumberRep, repR: NumberRep) -> BoundReport:
    """||[a, N_S]|| <= 2 D ||N_S|| + 2 Delta N_R (2 D + V(a))^{1/2}, D = D(Gamma_omega(e), a)."""
    a = as_operator(a)
    e = as_operator(e)
    total = tensor_sum(repS, repR)
    if not is_invariant(e, total):
        raise InputError("tradeoff check needs an invariant bipartite effect")
    g = restrict(e, omega)
    D, V = metrics(a, g.hermitian_part())
    N = repS.N().mat
    lhs = opnorm(a.mat @ N - N @ a.mat)
    spread = number_spread(omega, repR)
    rhs = 2 * D * _norm_N(repS) + 2 * spread * np.sqrt(2 * D + V)
    return BoundReport("tradeoff", lhs, rhs, rhs - lhs, _digest(a.mat, e.mat, as_operator(omega).mat),
                       extra={"D": D, "V": V, "spread": spread})


# -- randomized sweeps -----------------------------------------------------

def random_reference_state(dR: int, rng: np.random.Generator) -> np.ndarray:
    """Mix of reference-state families: random mixed, random pure, localised, number mixtures."""
    kind = rng.integers(4)
    if kind == 0:
        return random_state(dR, rng).mat
    if kind == 1:
        return random_state(dR, rng, rank=1).mat
    if kind == 2:
        phi = uniform_superposition(dR - 1) * np.exp(1j * rng.normal(scale=0.3, size=dR))
        phi /= np.linalg.norm(phi)
        return np.outer(phi, phi.conj())
    w = rng.dirichlet(np.full(dR, 0.3))
    return np.diag(w).astype(complex)


def sweep_prop1(trials: int, rng: np.random.Generator, eps_grid=EPS_GRID) -> list:
    out = []
    for _ in range(trials):
        dS = int(rng.integers(2, 5))
        dR = int(rng.integers(2, 17))
        a = random_effect(dS, rng)
        omega = random_reference_state(dR, rng)
        eps = float(eps_grid[rng.integers(len(eps_grid))])
        out.append(prop1_check(a, omega, ladder(dS), canonical_reference(dR), eps))
    return out


def sweep_owb(trials: int, rng: np.random.Generator, eps_grid=EPS_GRID) -> list:
    out = []
    for _ in range(trials):
        dR = int(rng.integers(2, 33))
        omega = random_reference_state(dR, rng)
        out.extend(prop2_owb_check(omega, canonical_reference(dR), eps_grid))
    return out


def sweep_tradeoff(trials: int, rng: np.random.Generator) -> list:
    out = []
    for _ in range(trials):
        dS = int(rng.integers(2, 4))
        dR = int(rng.integers(2, 9))
        repS, repR = ladder(dS), ladder(dR)
        a = random_effect(dS, rng)
        total = tensor_sum(repS, repR)
        if rng.uniform() < 0.3:
            e = relativize(a, repS, canonical_reference(dR))
        else:
            e = twirl_op(random_effect(dS * dR, rng, dims=(dS, dR)), total)
        omega = random_reference_state(dR, rng)
        out.append(tradeoff_check(a, e, omega, repS, repR))
    return out


def summarize(reports) -> dict:
    res = np.array([r.residual for r in reports]) if reports else np.zeros(0)
    return {
        "count": len(reports),
        "failures": int(sum(not r.passed for r in reports)),
        "min_residual": float(res.min()) if res.size else 0.0,
    }

