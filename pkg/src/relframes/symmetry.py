"""Number operators, phase shifts and the twirl (sector-dephasing) channel."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .opcore import (
    InputError,
    Operator,
    State,
    as_operator,
    expectation,
    inv_tol,
    opnorm,
)


class NumberRep:
    """Integer-spectrum number operator N, diagonal in the working basis.

    ``U(theta) = exp(i N theta)``.  Sectors are grouped by exact integer
    equality, so there is no degeneracy tolerance anywhere.
    """

    def __init__(self, eigs, dims=None, factors=None):
        arr = np.asarray(eigs)
        if arr.ndim != 1 or arr.size == 0:
            raise InputError("number spectrum must be a non-empty 1-d list")
        if arr.dtype.kind in "fc":
            if np.any(np.abs(np.imag(arr)) > 0) or np.any(np.real(arr) != np.round(np.real(arr))):
                raise InputError("number spectrum must consist of integers")
            arr = np.round(np.real(arr))
        elif arr.dtype.kind not in "iu":
            raise InputError("number spectrum must consist of integers")
        self.eigs = arr.astype(np.int64)
        self.eigs.setflags(write=False)
        self.dims = (arr.size,) if dims is None else tuple(int(d) for d in dims)
        if int(np.prod(self.dims)) != arr.size:
            raise InputError("dims do not match spectrum length")
        self.factors = factors

    @property
    def dim(self) -> int:
        return int(self.eigs.size)

    def sectors(self) -> dict:
        """eigenvalue -> sorted index array."""
        out = {}
        for n in np.unique(self.eigs):
            out[int(n)] = np.flatnonzero(self.eigs == n)
        return out

    def projector(self, n: int) -> Operator:
        return Operator(np.diag((self.eigs == n).astype(complex)), self.dims)

    def projectors(self) -> dict:
        return {n: self.projector(n) for n in self.sectors()}

    def N(self) -> Operator:
        return Operator(np.diag(self.eigs.astype(complex)), self.dims)

    def U(self, theta: float) -> Operator:
        return Operator(np.diag(np.exp(1j * self.eigs * theta)), self.dims)

    def phases(self, theta: float) -> np.ndarray:
        return np.exp(1j * self.eigs * theta)

    def sector_mask(self) -> np.ndarray:
        return self.eigs[:, None] == self.eigs[None, :]

    def differences(self) -> np.ndarray:
        return self.eigs[:, None] - self.eigs[None, :]

    def max_difference(self) -> int:
        return int(self.eigs.max() - self.eigs.min())

    def __repr__(self):
        return f"NumberRep(dims={self.dims})"


def number_rep(eigs) -> NumberRep:
    return NumberRep(eigs)


def ladder(d: int, offset: int = 0) -> NumberRep:
    """Spectrum offset, offset+1, ..., offset+d-1."""
    return NumberRep(np.arange(offset, offset + d))


def tensor_sum(*reps: NumberRep) -> NumberRep:
    """Composite rep with N_T = N_1 + N_2 + ... on the tensor product."""
    eigs = np.zeros(1, dtype=np.int64)
    dims = ()
    for r in reps:
        eigs = (eigs[:, None] + r.eigs[None, :]).ravel()
        dims = dims + r.dims
    return NumberRep(eigs, dims, factors=tuple(reps))


def local_rep(rep: NumberRep, dims, pos: int) -> NumberRep:
    """``rep`` acting on tensor factor ``pos`` of a product with ``dims``; zero elsewhere."""
    dims = tuple(int(d) for d in dims)
    if dims[pos] != rep.dim:
        raise InputError("factor dimension does not match rep")
    parts = [NumberRep(np.zeros(d, dtype=np.int64)) if i != pos else rep for i, d in enumerate(dims)]
    return tensor_sum(*parts)


def _mat(a):
    return a.mat if isinstance(a, (Operator, State)) else np.asarray(a, dtype=complex)


def _check_dim(a, rep):
    m = _mat(a)
    if m.shape[0] != rep.dim:
        raise InputError(f"dimension mismatch: operator {m.shape[0]} vs rep {rep.dim}")
    return m


def twirl_op(a, rep: NumberRep) -> Operator:
    """Sum_n P_n a P_n; the result keeps ``a``'s dims when available."""
    m = _check_dim(a, rep)
    dims = a.dims if isinstance(a, (Operator, State)) else rep.dims
    return Operator(np.where(rep.sector_mask(), m, 0.0), dims)


def twirl_state(rho, rep: NumberRep) -> State:
    """Predual twirl; it is the same sector dephasing acting on states."""
    out = twirl_op(rho, rep)
    return State(out)


def haar_average(a, rep: NumberRep, nodes: int | None = None) -> Operator:
    """(1/2pi) int U(t) a U(t)^dag dt by the uniform trapezoid rule.

    The node count must exceed twice the largest eigenvalue difference;
    below that the rule aliases and we refuse rather than return garbage.
    """
    m = _check_dim(a, rep)
    dmax = rep.max_difference()
    if nodes is None:
        nodes = max(4, 2 * dmax + 2)
    if nodes <= 2 * dmax:
        raise InputError(f"{nodes} nodes alias eigenvalue differences up to {dmax}")
    acc = np.zeros_like(m)
    for t in 2 * np.pi * np.arange(nodes) / nodes:
        ph = rep.phases(t)
        acc += ph[:, None] * m * ph.conj()[None, :]
    dims = a.dims if isinstance(a, Operator) else rep.dims
    return Operator(acc / nodes, dims)


@dataclass
class InvarianceReport:
    commutator: float
    shift: float
    haar: float
    twirl: float
    threshold: float
    flags: dict = field(default_factory=dict)

    @property
    def invariant(self) -> bool:
        return all(self.flags.values())

    @property
    def consistent(self) -> bool:
        """The four equivalent conditions agree."""
        vals = list(self.flags.values())
        return all(vals) or not any(vals)


def invariance_report(a, rep: NumberRep, thetas=None, threshold: float | None = None) -> InvarianceReport:
    """Residuals of the four equivalent invariance conditions.

    ``thetas`` defaults to an alias-free grid of phase shifts.
    """
    m = _check_dim(a, rep)
    threshold = inv_tol(rep.dim) if threshold is None else threshold
    comm = 0.0
    for idx in rep.sectors().values():
        p = np.zeros(rep.dim)
        p[idx] = 1.0
        c = m * p[None, :] - p[:, None] * m
        comm = max(comm, opnorm(c))
    if thetas is None:
        k = 2 * rep.max_difference() + 3
        thetas = 2 * np.pi * np.arange(1, k) / k
    shift = 0.0
    for t in thetas:
        ph = rep.phases(t)
        shift = max(shift, opnorm(ph[:, None] * m * ph.conj()[None, :] - m))
    haar = opnorm(haar_average(Operator(m), rep).mat - m)
    tw = opnorm(twirl_op(Operator(m), rep).mat - m)
    flags = {
        "commutator": comm < threshold,
        "shift": shift < threshold,
        "haar": haar < threshold,
        "twirl": tw < threshold,
    }
    return InvarianceReport(comm, shift, haar, tw, threshold, flags)


def is_invariant(a, rep: NumberRep, threshold: float | None = None) -> bool:
    m = _check_dim(a, rep)
    threshold = inv_tol(rep.dim) if threshold is None else threshold
    return opnorm(np.where(rep.sector_mask(), 0.0, m)) < threshold


def statistics_equality_check(rho, a, rep: NumberRep) -> float:
    """|tr(rho tau(a)) - tr(tau_*(rho) a)|, which vanishes by duality."""
    r = as_operator(rho)
    a = as_operator(a)
    lhs = expectation(r, twirl_op(a, rep))
    rhs = expectation(twirl_op(r, rep), a)
    return abs(lhs - rhs)
