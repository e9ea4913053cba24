"""Relativisation of system operators and restriction to the system.

For the circle group with a covariant phase reference the relativised
operator is computed exactly from harmonic blocks:

    A_q = sum_{n - m = q} P_n A P_m,      yen(A) = sum_q A_q (x) F^(q),

where F^(q) = int e^{iqt} F(dt).  Restriction by a reference state omega is
the partial expectation Tr_R[(1 (x) omega) r], and the composite
``restrict(relativize(A), omega)`` collapses to sum_q A_q tr(omega F^(q)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .opcore import InputError, Operator, State, as_operator, opnorm
from .pom import OutcomeSpace, PhaseReference, Pom
from .symmetry import NumberRep


def _m(a):
    return a.mat if isinstance(a, (Operator, State)) else np.asarray(a, dtype=complex)


def fourier_components(a, rep: NumberRep) -> dict:
    """q -> A_q for every eigenvalue difference q that carries a nonzero block."""
    m = _m(a)
    if m.shape[0] != rep.dim:
        raise InputError(f"dimension mismatch: operator {m.shape[0]} vs rep {rep.dim}")
    diff = rep.differences()
    dims = a.dims if isinstance(a, Operator) else rep.dims
    out = {}
    for q in np.unique(diff):
        block = np.where(diff == q, m, 0.0)
        if np.any(block != 0):
            out[int(q)] = Operator(block, dims)
    return out


def pom_fourier(ref: PhaseReference) -> dict:
    """q -> F^(q) for all q in the reference's difference range."""
    out = {}
    for q in np.unique(-ref.rep.differences()):
        out[int(q)] = ref.fourier(int(q))
    return out


def characteristic(omega, ref: PhaseReference) -> dict:
    """q -> mu^(q) = tr(omega F^(q)), the Fourier coefficients of the phase distribution."""
    w = _m(omega)
    if w.shape[0] != ref.dim:
        raise InputError("reference state dimension does not match the phase observable")
    # tr(omega F^(q)) = sum_{l - k = q} omega_lk c_kl
    prod = w.T * ref.c
    diff = ref.rep.eigs[None, :] - ref.rep.eigs[:, None]
    return {int(q): complex(np.sum(prod[diff == q])) for q in np.unique(diff)}


def truncation_leakage(a, repS: NumberRep, ref: PhaseReference) -> float:
    """Largest block norm ||A_q|| whose harmonic the reference cannot carry.

    Those blocks are silently dropped by the relativisation formula, so this
    is the observable part of the truncation error.
    """
    span = ref.rep.max_difference()
    comps = fourier_components(a, repS)
    return max((opnorm(b) for q, b in comps.items() if abs(q) > span), default=0.0)


def relativize(a, repS: NumberRep, ref: PhaseReference) -> Operator:
    """yen(a) = sum_q A_q (x) F^(q) on H_S (x) H_R."""
    a = as_operator(a, repS.dims if not isinstance(a, Operator) else None)
    if a.dim != repS.dim:
        raise InputError(f"dimension mismatch: operator {a.dim} vs rep {repS.dim}")
    out = np.zeros((a.dim * ref.dim, a.dim * ref.dim), dtype=complex)
    for q, block in fourier_components(a, repS).items():
        fq = ref.fourier(q)
        if np.any(fq != 0):
            out += np.kron(block.mat, fq)
    return Operator(out, a.dims + ref.rep.dims)


def relativize_pom(e: Pom, repS: NumberRep, ref: PhaseReference) -> Pom:
    effects = [relativize(x, repS, ref) for x in e.effects()]
    return Pom(e.space, effects, dims=effects[0].dims)


def restrict(r, omega) -> Operator:
    """Gamma_omega(r) = Tr_R[(1 (x) omega) r]; omega lives on the trailing factors."""
    r = as_operator(r)
    w = as_operator(omega)
    dR = w.dim
    if r.dim % dR:
        raise InputError(f"reference dimension {dR} does not divide {r.dim}")
    dS = r.dim // dR
    t = r.mat.reshape(dS, dR, dS, dR)
    out = np.einsum("ac,icja->ij", w.mat, t)
    nS = len(r.dims) - len(w.dims)
    dims = r.dims[:nS] if nS > 0 and int(np.prod(r.dims[:nS])) == dS else (dS,)
    return Operator(out, dims)


def restrict_after_relativize(a, omega, repS: NumberRep, ref: PhaseReference) -> Operator:
    """(Gamma_omega o yen)(a) = sum_q A_q mu^(q)."""
    a = as_operator(a, repS.dims if not isinstance(a, Operator) else None)
    mu = characteristic(omega, ref)
    out = np.zeros((a.dim, a.dim), dtype=complex)
    for q, block in fourier_components(a, repS).items():
        out += mu.get(q, 0.0) * block.mat
    return Operator(out, a.dims)


def smeared_average(a, repS: NumberRep, mu: dict) -> Operator:
    """sum_q A_q mu(q) for a user supplied characteristic function."""
    a = as_operator(a)
    out = np.zeros((a.dim, a.dim), dtype=complex)
    for q, block in fourier_components(a, repS).items():
        out += mu.get(q, 0.0) * block.mat
    return Operator(out, a.dims)


def uniform_superposition(n: int) -> np.ndarray:
    """(n+1)^{-1/2} sum_{k<=n} |k>, phase-localised at zero."""
    return np.ones(n + 1, dtype=complex) / np.sqrt(n + 1)


def choi_operator(channel, d_in: int) -> np.ndarray:
    """sum_ij |i><j| (x) channel(|i><j|)."""
    blocks = []
    for i in range(d_in):
        row = []
        for j in range(d_in):
            e = np.zeros((d_in, d_in), dtype=complex)
            e[i, j] = 1.0
            row.append(_m(channel(Operator(e))))
        blocks.append(row)
    d_out = blocks[0][0].shape[0]
    choi = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for i in range(d_in):
        for j in range(d_in):
            choi[i * d_out:(i + 1) * d_out, j * d_out:(j + 1) * d_out] = blocks[i][j]
    return choi


@dataclass
class CyclicRep:
    """Z_G acting on the system by U_S(g) and on a reference by shifting sectors.

    ``ref_projectors[g]`` projects onto the reference sector labelled g and
    ``ref_shift`` maps sector i onto sector i+1.
    """

    order: int
    system_unitaries: list
    ref_projectors: list
    ref_shift: np.ndarray

    @property
    def dS(self) -> int:
        return self.system_unitaries[0].shape[0]

    @property
    def dR(self) -> int:
        return self.ref_projectors[0].shape[0]

    def ref_unitary(self, g: int) -> np.ndarray:
        return np.linalg.matrix_power(self.ref_shift, g % self.order)

    def check(self, tol: float = 1e-12) -> dict:
        G = self.order
        hom = max(
            opnorm(self.system_unitaries[(g + h) % G] - self.system_unitaries[g] @ self.system_unitaries[h])
            for g in range(G) for h in range(G)
        )
        tot = opnorm(sum(self.ref_projectors) - np.eye(self.dR))
        cov = max(
            opnorm(self.ref_unitary(g) @ self.ref_projectors[i] @ self.ref_unitary(g).conj().T
                   - self.ref_projectors[(g + i) % G])
            for g in range(G) for i in range(G)
        )
        return {"homomorphism": hom, "completeness": tot, "covariance": cov}


def cyclic_rep(system_generator, order: int, sector_dim: int = 1) -> CyclicRep:
    """Regular reference for Z_order with sectors of equal dimension.

    ``system_generator`` is U_S(1); it must satisfy U^order = 1.
    """
    V = np.asarray(system_generator, dtype=complex)
    if opnorm(np.linalg.matrix_power(V, order) - np.eye(V.shape[0])) > 1e-10:
        raise InputError("system generator does not have the stated order")
    us = [np.linalg.matrix_power(V, g) for g in range(order)]
    dR = order * sector_dim
    projs = []
    for g in range(order):
        p = np.zeros((dR, dR), dtype=complex)
        idx = np.arange(g * sector_dim, (g + 1) * sector_dim)
        p[idx, idx] = 1.0
        projs.append(p)
    shift = np.roll(np.eye(dR), sector_dim, axis=0).astype(complex)
    return CyclicRep(order, us, projs, shift)


def relativize_cyclic(a, rep: CyclicRep) -> Operator:
    """yen(a) = sum_g U_S(g) a U_S(g)^dag (x) P_g."""
    m = _m(a)
    if m.shape[0] != rep.dS:
        raise InputError("dimension mismatch between operator and cyclic rep")
    out = np.zeros((rep.dS * rep.dR, rep.dS * rep.dR), dtype=complex)
    for g in range(rep.order):
        u = rep.system_unitaries[g]
        out += np.kron(u @ m @ u.conj().T, rep.ref_projectors[g])
    return Operator(out, (rep.dS, rep.dR))


def cyclic_position(L: int) -> CyclicRep:
    """Z_L acting by cyclic shifts on a lattice of L sites, for system and reference."""
    shift = np.roll(np.eye(L), 1, axis=0).astype(complex)
    return cyclic_rep(shift, L)


def cyclic_difference_pom(L: int) -> Pom:
    """Sharp PVM of (x_S - x_R) mod L on Z_L (x) Z_L."""
    effects = []
    for k in range(L):
        p = np.zeros(L * L, dtype=complex)
        for xr in range(L):
            xs = (xr + k) % L
            p[xs * L + xr] = 1.0
        effects.append(np.diag(p))
    return Pom(OutcomeSpace.finite(tuple(range(L))), effects, dims=(L, L))
