"""Positive operator valued measures on binned circles and finite label sets.

Covariant phase observables are built from a phase matrix ``c`` by integrating
``c_nm e^{i(n-m)t} / 2pi`` over each bin in closed form.  The covariance
convention is ``U(t) F(X) U(t)^dag = F(X + t)`` with ``U(t) = exp(i N t)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .opcore import InputError, Operator, State, alg_tol, as_operator
from .symmetry import NumberRep

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class OutcomeSpace:
    """Either ``B`` equal circle bins [2pi k/B, 2pi (k+1)/B) or a finite label set."""

    kind: str
    bins: int = 0
    labels: tuple = ()

    @classmethod
    def circle(cls, bins: int) -> "OutcomeSpace":
        if int(bins) < 1:
            raise InputError("bin count must be positive")
        return cls("circle", bins=int(bins))

    @classmethod
    def finite(cls, labels) -> "OutcomeSpace":
        labels = tuple(labels)
        if len(set(labels)) != len(labels):
            raise InputError("outcome labels must be distinct")
        return cls("finite", labels=labels)

    def __len__(self):
        return self.bins if self.kind == "circle" else len(self.labels)

    def edges(self) -> np.ndarray:
        if self.kind != "circle":
            raise InputError("finite outcome spaces have no bin edges")
        return TWO_PI * np.arange(self.bins + 1) / self.bins

    def bin_width(self) -> float:
        return TWO_PI / self.bins

    def index(self, label) -> int:
        if self.kind == "circle":
            return int(label) % self.bins
        try:
            return self.labels.index(label)
        except ValueError:
            raise InputError(f"unknown outcome label {label!r}") from None


class Pom:
    """One effect per outcome.  Effects are stored as a (K, d, d) array."""

    def __init__(self, space: OutcomeSpace, effects, dims=None, kernel=None):
        arr = np.array([as_operator(e).mat if isinstance(e, Operator) else np.asarray(e, dtype=complex)
                        for e in effects], dtype=complex)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise InputError("effects must be square matrices of equal size")
        if arr.shape[0] != len(space):
            raise InputError(f"{arr.shape[0]} effects for {len(space)} outcomes")
        if dims is None:
            first = effects[0]
            dims = first.dims if isinstance(first, Operator) else (arr.shape[1],)
        arr.setflags(write=False)
        self.space = space
        self._e = arr
        self.dims = tuple(dims)
        self.kernel = kernel

    @property
    def dim(self) -> int:
        return self._e.shape[1]

    @property
    def array(self) -> np.ndarray:
        return self._e

    def __len__(self):
        return self._e.shape[0]

    def __getitem__(self, k) -> Operator:
        return Operator(self._e[k], self.dims)

    def effects(self) -> list:
        return [Operator(e, self.dims) for e in self._e]

    def effect(self, outcomes) -> Operator:
        """Effect of a union of outcomes (bin indices or labels)."""
        if np.isscalar(outcomes) or isinstance(outcomes, str):
            outcomes = [outcomes]
        idx = sorted({self.space.index(o) for o in outcomes})
        if not idx:
            return Operator(np.zeros((self.dim, self.dim)), self.dims)
        return Operator(self._e[idx].sum(axis=0), self.dims)

    def probabilities(self, rho) -> np.ndarray:
        r = as_operator(rho)
        return np.real(np.einsum("ij,kji->k", r.mat, self._e))


@dataclass(frozen=True)
class PhaseReference:
    """A covariant phase observable kernel: phase matrix plus number spectrum.

    The phase matrix is indexed in the same basis order as ``rep.eigs``.
    """

    c: np.ndarray
    rep: NumberRep

    @property
    def dim(self) -> int:
        return self.rep.dim

    def fourier(self, q: int) -> np.ndarray:
        """F^(q) = int e^{iqt} F(dt): entries c_kl where e_l - e_k = q."""
        mask = (self.rep.eigs[None, :] - self.rep.eigs[:, None]) == q
        return np.where(mask, self.c, 0.0)

    def interval_effect(self, a: float, b: float) -> np.ndarray:
        return phase_effect(self.c, self.rep.eigs, a, b)


def check_phase_matrix(c, tol: float = 1e-10) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise InputError("phase matrix must be square")
    if np.max(np.abs(np.diag(c) - 1.0), initial=0.0) > tol:
        raise InputError("phase matrix must have unit diagonal")
    if np.max(np.abs(c - c.conj().T), initial=0.0) > tol:
        raise InputError("phase matrix must be Hermitian")
    lo = float(np.linalg.eigvalsh(0.5 * (c + c.conj().T))[0])
    if lo < -tol * c.shape[0]:
        raise InputError(f"phase matrix is not positive semidefinite (min eigenvalue {lo:.3g})")
    return c


def canonical_phase_matrix(d: int) -> np.ndarray:
    return np.ones((d, d), dtype=complex)


def damped_phase_matrix(d: int, r: float) -> np.ndarray:
    """c_nm = r^|n-m|, positive semidefinite for |r| <= 1."""
    k = np.arange(d)
    return np.asarray(float(r) ** np.abs(k[:, None] - k[None, :]), dtype=complex)


def phase_reference(c=None, rep: NumberRep | None = None, d: int | None = None) -> PhaseReference:
    if rep is None:
        if d is None:
            d = np.asarray(c).shape[0]
        rep = NumberRep(np.arange(d))
    if c is None:
        c = canonical_phase_matrix(rep.dim)
    c = check_phase_matrix(c)
    if c.shape[0] != rep.dim:
        raise InputError("phase matrix and spectrum sizes differ")
    return PhaseReference(c, rep)


def canonical_reference(d: int, offset: int = 0) -> PhaseReference:
    return phase_reference(None, NumberRep(np.arange(offset, offset + d)))


def interval_weights(eigs, a: float, b: float) -> np.ndarray:
    """(1/2pi) int_a^b e^{i(e_n - e_m)t} dt for all (n, m)."""
    q = (np.asarray(eigs)[:, None] - np.asarray(eigs)[None, :]).astype(float)
    out = np.empty(q.shape, dtype=complex)
    zero = q == 0
    out[zero] = (b - a) / TWO_PI
    qz = q[~zero]
    out[~zero] = (np.exp(1j * qz * b) - np.exp(1j * qz * a)) / (TWO_PI * 1j * qz)
    return out


def phase_effect(c, eigs, a: float, b: float) -> np.ndarray:
    return np.asarray(c) * interval_weights(eigs, a, b)


def build_phase_pom(d: int, c=None, bins: int = 64, eigs=None) -> Pom:
    """Covariant phase observable on ``bins`` equal circle bins."""
    rep = NumberRep(np.arange(d) if eigs is None else eigs)
    if rep.dim != d:
        raise InputError("spectrum length differs from dimension")
    ref = phase_reference(c, rep)
    space = OutcomeSpace.circle(bins)
    e = space.edges()
    effects = [phase_effect(ref.c, rep.eigs, e[k], e[k + 1]) for k in range(bins)]
    return Pom(space, effects, kernel=ref)


@dataclass
class PomReport:
    positivity: float
    upper: float
    normalization: float
    covariance: float | None
    tol: float

    @property
    def passed(self) -> bool:
        vals = [self.positivity, self.upper, self.normalization]
        if self.covariance is not None:
            vals.append(self.covariance)
        return all(v < self.tol for v in vals)


def pom_validate(f: Pom, rep: NumberRep | None = None, tol: float | None = None) -> PomReport:
    """Residuals for 0 <= E <= 1, sum E = 1 and (circle only) bin-shift covariance."""
    tol = alg_tol(f.dim) if tol is None else tol
    arr = f.array
    herm = 0.5 * (arr + arr.conj().transpose(0, 2, 1))
    w = np.linalg.eigvalsh(herm)
    herm_def = float(np.max(np.abs(arr - arr.conj().transpose(0, 2, 1)), initial=0.0))
    pos = max(0.0, -float(w[:, 0].min()), herm_def)
    upper = max(0.0, float(w[:, -1].max()) - 1.0)
    total = arr.sum(axis=0) - np.eye(f.dim)
    normalization = float(np.linalg.norm(total, 2))
    cov = None
    if f.space.kind == "circle" and rep is not None:
        if rep.dim != f.dim:
            raise InputError("rep dimension does not match the POM")
        B = f.space.bins
        cov = 0.0
        for s in range(B):
            ph = rep.phases(TWO_PI * s / B)
            shifted = ph[None, :, None] * arr * ph.conj()[None, None, :]
            diff = shifted - np.roll(arr, -s, axis=0)
            cov = max(cov, float(np.max(np.linalg.norm(diff, 2, axis=(1, 2)))))
    return PomReport(pos, upper, normalization, cov, tol)


def norm1_defects(f: Pom, tol: float = 1e-12) -> dict:
    """1 - max ||E|| over effects, under two conventions for zero effects.

    ``nonzero`` skips vanishing effects (the usual statement of the norm-1
    property); ``all`` includes them, so any zero effect gives defect 1.
    """
    norms = np.array([np.max(np.abs(np.linalg.eigvalsh(0.5 * (e + e.conj().T)))) for e in f.array])
    nz = norms[norms > tol]
    return {
        "nonzero": float(np.max(1.0 - nz)) if nz.size else 0.0,
        "all": float(np.max(1.0 - norms)),
    }


def norm1_defect(f: Pom, include_zero: bool = False) -> float:
    return norm1_defects(f)["all" if include_zero else "nonzero"]


def localisation_margin(rho, f: Pom, bin_set: Sequence[int]) -> float:
    """d |X| / 2pi - tr(rho F(X)); nonnegative for covariant phase POMs."""
    r = as_operator(rho)
    idx = sorted({int(k) % f.space.bins for k in bin_set})
    width = len(idx) * f.space.bin_width()
    p = float(np.real(np.trace(r.mat @ f.effect(idx).mat)))
    return f.dim * width / TWO_PI - p


def smeared_position_pom(L: int, e) -> Pom:
    """Unsharp position on Z_L: effect of {x} is diag_y e((y - x) mod L)."""
    e = np.asarray(e, dtype=float)
    if e.shape != (L,):
        raise InputError(f"kernel must have length {L}")
    if np.any(e < 0) or abs(e.sum() - 1.0) > 1e-12:
        raise InputError("kernel must be a probability vector")
    y = np.arange(L)
    effects = [np.diag(e[(y - x) % L]).astype(complex) for x in range(L)]
    return Pom(OutcomeSpace.finite(tuple(range(L))), effects)


def sharp_pom(d: int, labels=None) -> Pom:
    labels = tuple(range(d)) if labels is None else tuple(labels)
    effects = [np.diag(np.eye(d)[k]).astype(complex) for k in range(d)]
    return Pom(OutcomeSpace.finite(labels), effects)


def bin_distribution(state, ref: PhaseReference, bins: int) -> np.ndarray:
    """Probabilities of the circle bins for the phase observable ``ref``."""
    r = as_operator(state.rho if isinstance(state, State) else state)
    e = TWO_PI * np.arange(bins + 1) / bins
    m = r.mat.T  # tr(rho F) = sum_nm rho_mn F_nm
    q = (ref.rep.eigs[:, None] - ref.rep.eigs[None, :]).astype(float)
    coef = m * ref.c
    p = np.empty(bins)
    zero = q == 0
    diag_mass = np.real(np.sum(coef[zero]))
    qz = q[~zero]
    cz = coef[~zero]
    for k in range(bins):
        a, b = e[k], e[k + 1]
        off = np.sum(cz * (np.exp(1j * qz * b) - np.exp(1j * qz * a)) / (TWO_PI * 1j * qz))
        p[k] = diag_mass * (b - a) / TWO_PI + np.real(off)
    return p
