"""Dense complex operators with tensor-factor bookkeeping.

Everything else in the package is built on the handful of primitives here:
an immutable :class:`Operator` (matrix + list of factor dimensions), a
:class:`State` wrapper, tensor products, partial traces, factor permutations
and spectral norms.  Hermitian eigendecomposition is the one kernel used for
norms and positivity checks.
"""

from __future__ import annotations

from functools import reduce
from typing import Iterable, Sequence

import numpy as np

#: Base algebraic tolerance; identity checks scale it by the matrix side.
ALG_TOL = 1e-10
#: Base invariance threshold (scaled by dimension).
INV_TOL = 1e-8


class InputError(ValueError):
    """Raised for malformed or out-of-range inputs (CLI exit code 2)."""


def alg_tol(dim: int) -> float:
    return ALG_TOL * max(int(dim), 1)


def inv_tol(dim: int) -> float:
    return INV_TOL * max(int(dim), 1)


class Operator:
    """Immutable square complex matrix tagged with tensor-factor dimensions.

    The left-most factor is the slow index, matching ``numpy.kron``.
    """

    __slots__ = ("_m", "_dims")
    __array_priority__ = 100

    def __init__(self, mat, dims: Sequence[int] | None = None):
        m = np.array(mat, dtype=complex, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InputError(f"operator must be a square matrix, got shape {m.shape}")
        if dims is None:
            dims = (m.shape[0],)
        dims = tuple(int(d) for d in dims)
        if any(d <= 0 for d in dims):
            raise InputError(f"factor dimensions must be positive, got {dims}")
        if int(np.prod(dims)) != m.shape[0]:
            raise InputError(f"dims {dims} do not multiply to side length {m.shape[0]}")
        m.setflags(write=False)
        self._m = m
        self._dims = dims

    # construction helpers
    @classmethod
    def identity(cls, dims) -> "Operator":
        dims = _as_dims(dims)
        return cls(np.eye(int(np.prod(dims))), dims)

    @classmethod
    def zeros(cls, dims) -> "Operator":
        dims = _as_dims(dims)
        n = int(np.prod(dims))
        return cls(np.zeros((n, n)), dims)

    @classmethod
    def diag(cls, values, dims=None) -> "Operator":
        return cls(np.diag(np.asarray(values, dtype=complex)), dims)

    @property
    def mat(self) -> np.ndarray:
        return self._m

    @property
    def dims(self) -> tuple:
        return self._dims

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    def dag(self) -> "Operator":
        return Operator(self._m.conj().T, self._dims)

    def trace(self) -> complex:
        return complex(np.trace(self._m))

    def is_hermitian(self, tol: float | None = None) -> bool:
        tol = alg_tol(self.dim) if tol is None else tol
        return float(np.max(np.abs(self._m - self._m.conj().T), initial=0.0)) < tol

    def hermitian_part(self) -> "Operator":
        return Operator(0.5 * (self._m + self._m.conj().T), self._dims)

    def _check(self, other: "Operator"):
        if other.dim != self.dim:
            raise InputError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self._m @ other._m, self._dims)
        return self._m @ np.asarray(other)

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self._m + other._m, self._dims)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self._m - other._m, self._dims)
        return NotImplemented

    def __neg__(self):
        return Operator(-self._m, self._dims)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return Operator(self._m * scalar, self._dims)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self._m / scalar, self._dims)

    def allclose(self, other, atol: float = 1e-12) -> bool:
        other_m = other.mat if isinstance(other, Operator) else np.asarray(other)
        return bool(np.allclose(self._m, other_m, rtol=0.0, atol=atol))

    def __repr__(self):
        return f"Operator(dims={self._dims})"


def _as_dims(dims) -> tuple:
    if np.isscalar(dims):
        return (int(dims),)
    return tuple(int(d) for d in dims)


def as_operator(a, dims=None) -> Operator:
    """Wrap arrays (and pass Operators through, optionally re-tagging dims)."""
    if isinstance(a, State):
        a = a.rho
    if isinstance(a, Operator):
        if dims is None or tuple(dims) == a.dims:
            return a
        return Operator(a.mat, dims)
    return Operator(a, dims)


class State:
    """A density operator, validated on construction.

    ``pure`` is a tag set when the state was built from a vector; the vector
    is kept in ``vec`` for cheap pure-state arithmetic.
    """

    __slots__ = ("rho", "pure", "vec")

    def __init__(self, rho, dims=None, tol: float | None = None, pure: bool = False, vec=None):
        rho = as_operator(rho, dims)
        tol = alg_tol(rho.dim) if tol is None else tol
        if not rho.is_hermitian(tol):
            raise InputError("state is not Hermitian")
        if abs(rho.trace() - 1.0) > tol:
            raise InputError(f"state trace is {rho.trace().real:.3g}, expected 1")
        lo = float(np.linalg.eigvalsh(rho.hermitian_part().mat)[0])
        if lo < -tol:
            raise InputError(f"state has negative eigenvalue {lo:.3g}")
        self.rho = rho
        self.pure = bool(pure)
        self.vec = None if vec is None else np.asarray(vec, dtype=complex)

    @classmethod
    def from_vector(cls, v, dims=None) -> "State":
        v = np.asarray(v, dtype=complex).ravel()
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise InputError("zero vector is not a state")
        v = v / nrm
        return cls(np.outer(v, v.conj()), dims, pure=True, vec=v)

    @property
    def dims(self):
        return self.rho.dims

    @property
    def dim(self):
        return self.rho.dim

    @property
    def mat(self):
        return self.rho.mat

    def __repr__(self):
        return f"State(dims={self.dims}, pure={self.pure})"


def basis(d: int, i: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return v


def projector(v, dims=None) -> Operator:
    v = np.asarray(v, dtype=complex).ravel()
    return Operator(np.outer(v, v.conj()), dims)


def kron(a, b) -> Operator:
    """Tensor product; the left factor carries the slow index."""
    a = as_operator(a)
    b = as_operator(b)
    return Operator(np.kron(a.mat, b.mat), a.dims + b.dims)


def kron_all(*ops) -> Operator:
    return reduce(kron, ops)


def _split(r: Operator):
    n = len(r.dims)
    return r.mat.reshape(r.dims + r.dims), n


def partial_trace(r, keep: Iterable[int]) -> Operator:
    """Trace out every factor not listed in ``keep``.

    Kept factors are returned in their original order.
    """
    r = as_operator(r)
    keep = sorted(set(int(k) for k in keep))
    n = len(r.dims)
    if n < 2:
        raise InputError("partial trace needs at least two tensor factors")
    if any(k < 0 or k >= n for k in keep):
        raise InputError(f"factor index out of range for dims {r.dims}: {keep}")
    t, _ = _split(r)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for k in range(n):
        if k not in keep:
            col[k] = row[k]
    out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    res = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    kd = tuple(r.dims[k] for k in keep)
    side = int(np.prod(kd)) if kd else 1
    return Operator(np.asarray(res).reshape(side, side), kd if kd else (1,))


def permute(r, order: Sequence[int]) -> Operator:
    """Reorder tensor factors: new factor ``i`` is old factor ``order[i]``."""
    r = as_operator(r)
    n = len(r.dims)
    order = [int(o) for o in order]
    if sorted(order) != list(range(n)):
        raise InputError(f"{order} is not a permutation of {n} factors")
    t, _ = _split(r)
    t = t.transpose(order + [n + o for o in order])
    nd = tuple(r.dims[o] for o in order)
    return Operator(t.reshape(r.dim, r.dim), nd)


def eigh(a):
    """Eigen-decomposition of the Hermitian part of ``a``."""
    a = as_operator(a)
    return np.linalg.eigh(0.5 * (a.mat + a.mat.conj().T))


def singular_values(a) -> np.ndarray:
    a = as_operator(a)
    if a.is_hermitian(1e-13):
        return np.sort(np.abs(np.linalg.eigvalsh(a.hermitian_part().mat)))[::-1]
    return np.linalg.svd(a.mat, compute_uv=False)


def norm(a, kind: str = "operator") -> float:
    """Operator norm (largest singular value) or trace norm (their sum)."""
    s = singular_values(a)
    if kind == "operator":
        return float(s[0]) if s.size else 0.0
    if kind == "trace":
        return float(np.sum(s))
    raise InputError(f"unknown norm kind {kind!r}")


def opnorm(x) -> float:
    """Operator norm of a raw array or Operator (shortcut used in hot loops)."""
    m = x.mat if isinstance(x, Operator) else np.asarray(x)
    if m.size == 0:
        return 0.0
    if np.allclose(m, m.conj().T, rtol=0, atol=1e-14):
        return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))))
    return float(np.linalg.norm(m, 2))


def commutator(a, b) -> Operator:
    a = as_operator(a)
    b = as_operator(b)
    return a @ b - b @ a


def expectation(rho, a) -> complex:
    """tr(rho a)."""
    r = as_operator(rho)
    a = as_operator(a)
    if r.dim != a.dim:
        raise InputError(f"dimension mismatch: state {r.dim} vs operator {a.dim}")
    return complex(np.einsum("ij,ji->", r.mat, a.mat))


def min_eig(a) -> float:
    return float(np.linalg.eigvalsh(as_operator(a).hermitian_part().mat)[0])


def is_effect(a, tol: float | None = None) -> bool:
    """0 <= a <= 1, checked spectrally."""
    a = as_operator(a)
    tol = alg_tol(a.dim) if tol is None else tol
    if not a.is_hermitian(tol):
        return False
    w = np.linalg.eigvalsh(a.hermitian_part().mat)
    return bool(w[0] >= -tol and w[-1] <= 1 + tol)


def positive_part_projector(x) -> Operator:
    """Spectral projector onto the strictly positive eigenspace of ``x``."""
    x = as_operator(x)
    w, v = eigh(x)
    keep = v[:, w > 0]
    return Operator(keep @ keep.conj().T, x.dims)


def random_state(d: int, rng: np.random.Generator, rank: int | None = None, dims=None) -> State:
    """Random density matrix from a Ginibre draw (rank defaults to full)."""
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return State(rho, dims)


def random_pure(d: int, rng: np.random.Generator, dims=None) -> State:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return State.from_vector(v, dims)


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (g + g.conj().T)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary via QR with the phase fix of Mezzadri."""
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_effect(d: int, rng: np.random.Generator, dims=None) -> Operator:
    """x^dag x normalised by its operator norm and scaled by uniform(0, 1)."""
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    e = x.conj().T @ x
    e /= np.max(np.linalg.eigvalsh(e))
    return Operator(0.5 * (e + e.conj().T) * rng.uniform(), dims)
