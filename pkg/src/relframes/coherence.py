"""Absolute and mutual coherence, and overall widths of phase distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .opcore import InputError, Operator, State, as_operator, norm, positive_part_projector
from .pom import TWO_PI, PhaseReference, bin_distribution
from .symmetry import NumberRep, local_rep, tensor_sum, twirl_op

EPS_GRID = (0.01, 0.05, 0.1, 0.25)


def absolute_coherence(rho, rep: NumberRep) -> float:
    """C(rho) = 1/2 ||rho - tau_*(rho)||_1."""
    r = as_operator(rho)
    return 0.5 * norm(r - twirl_op(r, rep), "trace")


def _bipartite(theta, repS: NumberRep, repR: NumberRep) -> Operator:
    t = as_operator(theta)
    if t.dim != repS.dim * repR.dim:
        raise InputError(f"state of dimension {t.dim} does not live on {repS.dim} x {repR.dim}")
    return Operator(t.mat, (repS.dim, repR.dim))


def _mutual_difference(theta, repS, repR) -> Operator:
    t = _bipartite(theta, repS, repR)
    loc = local_rep(repS, (repS.dim, repR.dim), 0)
    total = tensor_sum(repS, repR)
    return twirl_op(t - twirl_op(t, loc), total)


def mutual_coherence(theta, repS: NumberRep, repR: NumberRep) -> float:
    """M = 1/2 || tau_T*( Theta - (tau_S* x id)(Theta) ) ||_1.

    This equals the largest gap |tr(Theta E) - tr((tau_S* x id)(Theta) E)| over
    invariant effects E, attained at the positive-part projector of the
    twirled difference (see :func:`mutual_coherence_witness`).
    """
    return 0.5 * norm(_mutual_difference(theta, repS, repR), "trace")


def mutual_coherence_witness(theta, repS: NumberRep, repR: NumberRep) -> Operator:
    return positive_part_projector(_mutual_difference(theta, repS, repR))


def product_state(rhoS, rhoR) -> Operator:
    a = as_operator(rhoS)
    b = as_operator(rhoR)
    return Operator(np.kron(a.mat, b.mat), (a.dim, b.dim))


@dataclass(frozen=True)
class WidthQuery:
    distribution: np.ndarray
    epsilon: float
    centered: bool = False

    def __post_init__(self):
        p = np.asarray(self.distribution, dtype=float)
        if not 0.0 <= self.epsilon < 1.0:
            raise InputError("epsilon must lie in [0, 1)")
        if p.ndim != 1 or p.size == 0:
            raise InputError("distribution must be a non-empty vector")
        if abs(p.sum() - 1.0) > 1e-9:
            raise InputError(f"distribution sums to {p.sum():.12g}, not 1")
        object.__setattr__(self, "distribution", p)


def circular_interval_masses(p: np.ndarray) -> np.ndarray:
    """masses[L-1, s] = mass of the L bins starting at bin s (wrapping)."""
    B = p.size
    cs = np.concatenate([[0.0], np.cumsum(np.concatenate([p, p]))])
    L = np.arange(1, B + 1)[:, None]
    s = np.arange(B)[None, :]
    return cs[s + L] - cs[s]


def overall_width(q: WidthQuery, slack: float = 1e-12) -> float:
    """Smallest width (radians) of a bin interval carrying mass >= 1 - eps.

    Uncentered: exhaustive search over the B^2 circular bin intervals.
    Centered: symmetric intervals [-2pi k/B, 2pi k/B] about zero.
    """
    return width_interval(q, slack)[0]


def width_interval(q: WidthQuery, slack: float = 1e-12):
    """(width, start_bin, n_bins) of the optimal interval; ties -> leftmost start."""
    p = q.distribution
    B = p.size
    target = 1.0 - q.epsilon - slack
    if q.centered:
        for k in range(1, B // 2 + 1):
            mass = p[:k].sum() + (p[B - k:].sum() if k else 0.0)
            if mass >= target:
                return 2 * k * TWO_PI / B, (B - k) % B, 2 * k
        return TWO_PI, 0, B
    masses = circular_interval_masses(p)
    ok = masses >= target
    for L in range(1, B + 1):
        hit = np.flatnonzero(ok[L - 1])
        if hit.size:
            return L * TWO_PI / B, int(hit[0]), L
    return TWO_PI, 0, B


def centered_mass_function(omega, ref: PhaseReference):
    """w -> mu_omega([-w/2, w/2]) in closed form."""
    w = as_operator(omega).mat
    q = (ref.rep.eigs[:, None] - ref.rep.eigs[None, :])
    coef = w.T * ref.c
    qs = np.unique(q)
    s = np.array([np.sum(coef[q == k]) for k in qs])
    nz = qs != 0
    s0 = float(np.real(np.sum(s[~nz])))
    qn = qs[nz].astype(float)
    sn = s[nz]

    def mass(width: float) -> float:
        return s0 * width / TWO_PI + float(np.real(np.sum(sn * np.sin(qn * width / 2) / (np.pi * qn))))

    return mass


def centered_width(omega, ref: PhaseReference, epsilon: float, tol: float = 1e-13):
    """Bracket (lo, hi) around W0_eps, the smallest w with mu([-w/2, w/2]) >= 1 - eps.

    mu of a nested family of intervals is monotone in w, so bisection on the
    closed-form mass is exact up to ``tol``.  ``hi`` always satisfies the mass
    condition, ``lo`` never does.
    """
    if not 0.0 <= epsilon < 1.0:
        raise InputError("epsilon must lie in [0, 1)")
    mass = centered_mass_function(omega, ref)
    target = 1.0 - epsilon
    lo, hi = 0.0, TWO_PI
    if mass(hi) < target - 1e-12:
        raise InputError("state is not normalised")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mass(mid) >= target:
            hi = mid
        else:
            lo = mid
    return lo, hi


def coherence_width_bound_check(rho, ref: PhaseReference, epsilon: float, bins: int = 64) -> float:
    """C(rho) - [1 - 2 eps - (3 W_eps / 2pi)(1 - 2 eps)], W_eps from the binned distribution.

    A bin-aligned interval overestimates the continuum width, and the bracket
    is non-increasing in W for eps <= 1/2, so the check stays conservative.
    """
    r = as_operator(rho)
    p = bin_distribution(r, ref, bins)
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    W = overall_width(WidthQuery(p, epsilon))
    rhs = 1.0 - 2 * epsilon - (3 * W / TWO_PI) * (1 - 2 * epsilon)
    return absolute_coherence(r, ref.rep) - rhs


def localisation_approximation_residual(rhoS, n: int, repS: NumberRep, epsilon: float) -> float:
    """M(rho_S, P[phi_n]) - [C(rho_S) - 2 ||N_S|| (W0/2 (1 - eps) + pi eps)].

    ``phi_n`` is the uniform superposition of reference levels 0..n with the
    canonical phase observable.  Nonnegative by the localisation estimate.
    """
    from .pom import canonical_reference
    from .relmap import uniform_superposition

    ref = canonical_reference(n + 1)
    phi = uniform_superposition(n)
    omega = np.outer(phi, phi.conj())
    theta = product_state(rhoS, omega)
    M = mutual_coherence(theta, repS, ref.rep)
    C = absolute_coherence(rhoS, repS)
    _, w0 = centered_width(omega, ref, epsilon)
    nS = float(np.max(np.abs(repS.eigs)))
    return M - (C - 2 * nS * (0.5 * w0 * (1 - epsilon) + np.pi * epsilon))


def coherent_superposition(d: int, phases=None) -> State:
    v = np.ones(d, dtype=complex) if phases is None else np.exp(1j * np.asarray(phases))
    return State.from_vector(v)
