"""Measurement schemes <H_A, U, phi, Z, f>, measured POMs and WAY-type checks.

A scheme couples the system to an apparatus by a unitary ``U`` on
H_S (x) H_A, prepares the apparatus in ``phi`` and reads a pointer POM ``Z``
whose outcome labels are relabelled by ``scaling``.  The measured effect of a
value set X is Gamma_phi(U^dag (1 (x) Z(f^{-1}(X))) U).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml
from scipy.linalg import expm

from .opcore import InputError, Operator, State, as_operator, opnorm, random_hermitian, random_unitary
from .pom import OutcomeSpace, Pom, pom_validate, sharp_pom
from .relmap import restrict

SCHEME_TOL = 1e-10


@dataclass
class MeasurementScheme:
    system_dim: int
    apparatus_dim: int
    U: np.ndarray
    pointer: Pom
    apparatus_state: State
    scaling: dict = field(default_factory=dict)
    L_S: np.ndarray | None = None
    L_A: np.ndarray | None = None

    def __post_init__(self):
        d = self.system_dim * self.apparatus_dim
        U = np.asarray(self.U.mat if isinstance(self.U, Operator) else self.U, dtype=complex)
        if U.shape != (d, d):
            raise InputError(f"coupling must be {d}x{d}, got {U.shape}")
        if opnorm(U.conj().T @ U - np.eye(d)) > SCHEME_TOL * d:
            raise InputError("coupling is not unitary")
        if self.pointer.dim != self.apparatus_dim:
            raise InputError("pointer POM does not act on the apparatus")
        rep = pom_validate(self.pointer)
        if not (rep.positivity < rep.tol and rep.upper < rep.tol and rep.normalization < rep.tol):
            raise InputError("pointer is not a valid POM")
        if not isinstance(self.apparatus_state, State):
            self.apparatus_state = State(self.apparatus_state)
        if self.apparatus_state.dim != self.apparatus_dim:
            raise InputError("apparatus state has the wrong dimension")
        self.U = U

    @property
    def dim(self) -> int:
        return self.system_dim * self.apparatus_dim

    def value_of(self, k: int):
        """Scaled value of pointer outcome k (identity relabelling by default)."""
        sp = self.pointer.space
        label = sp.labels[k] if sp.kind == "finite" else k
        return self.scaling.get(label, label)

    def values(self) -> list:
        out = []
        for k in range(len(self.pointer)):
            v = self.value_of(k)
            if v not in out:
                out.append(v)
        return out

    def pointer_effect(self, value) -> np.ndarray:
        idx = [k for k in range(len(self.pointer)) if self.value_of(k) == value]
        return self.pointer.array[idx].sum(axis=0)

    def final_state(self, rho) -> np.ndarray:
        r = as_operator(rho).mat
        t = np.kron(r, self.apparatus_state.mat)
        return self.U @ t @ self.U.conj().T


def measured_pom(s: MeasurementScheme) -> Pom:
    vals = s.values()
    effects = []
    for v in vals:
        Z = np.kron(np.eye(s.system_dim), s.pointer_effect(v))
        E = restrict(Operator(s.U.conj().T @ Z @ s.U, (s.system_dim, s.apparatus_dim)), s.apparatus_state.mat).mat
        effects.append(0.5 * (E + E.conj().T))
    return Pom(OutcomeSpace.finite(vals), effects)


def reproducibility_residual(s: MeasurementScheme, rho, e: Pom | None = None) -> float:
    """max_X |tr(U(rho x phi)U^dag 1 x Z(f^-1 X)) - tr(rho E(X))|."""
    e = measured_pom(s) if e is None else e
    fin = s.final_state(rho)
    r = as_operator(rho).mat
    worst = 0.0
    for k, v in enumerate(e.space.labels):
        Z = np.kron(np.eye(s.system_dim), s.pointer_effect(v))
        a = np.real(np.trace(fin @ Z))
        b = np.real(np.trace(r @ e.array[k]))
        worst = max(worst, abs(a - b))
    return float(worst)


def probe_states(d: int) -> list:
    """Computational basis plus every pairwise equal-weight superposition (two phases each)."""
    probes = []
    for i in range(d):
        v = np.zeros(d, dtype=complex)
        v[i] = 1
        probes.append(v)
    for i in range(d):
        for j in range(i + 1, d):
            for ph in (1.0, 1j):
                v = np.zeros(d, dtype=complex)
                v[i], v[j] = 1 / math.sqrt(2), ph / math.sqrt(2)
                probes.append(v)
    return probes


def repeatability_defect(s: MeasurementScheme, e: Pom | None = None, probes=None) -> float:
    """max over X and probes of |<Psi|E(X) x Z(X)|Psi> - <probe|E(X)|probe>|, Psi = U(probe x phi)."""
    e = measured_pom(s) if e is None else e
    probes = probe_states(s.system_dim) if probes is None else probes
    worst = 0.0
    for v in probes:
        v = np.asarray(v, dtype=complex)
        rho = np.outer(v, v.conj())
        fin = s.final_state(rho)
        for k, val in enumerate(e.space.labels):
            E = e.array[k]
            joint = np.real(np.trace(fin @ np.kron(E, s.pointer_effect(val))))
            single = np.real(np.vdot(v, E @ v))
            worst = max(worst, abs(joint - single))
    return float(worst)


def sharpness_defect(e: Pom) -> float:
    return max(opnorm(E - E @ E) for E in e.array)


@dataclass
class WayReport:
    conservation: float
    yanase: float
    commutation: float
    sharpness: float
    repeatability: float
    tol: float = 1e-9

    @property
    def hypotheses_hold(self) -> bool:
        return max(self.conservation, self.yanase, self.sharpness, self.repeatability) < self.tol

    @property
    def passed(self) -> bool:
        """The theorem is contradicted only if every hypothesis holds and commutation fails."""
        return not self.hypotheses_hold or self.commutation < self.tol

    def as_dict(self) -> dict:
        return {
            "conservation": self.conservation,
            "yanase": self.yanase,
            "commutation": self.commutation,
            "sharpness": self.sharpness,
            "repeatability": self.repeatability,
            "hypotheses_hold": self.hypotheses_hold,
        }


def way_report(s: MeasurementScheme, L_S=None, L_A=None, tol: float = 1e-9) -> WayReport:
    L_S = s.L_S if L_S is None else np.asarray(L_S, dtype=complex)
    L_A = s.L_A if L_A is None else np.asarray(L_A, dtype=complex)
    if L_S is None or L_A is None:
        raise InputError("WAY report needs both conserved-quantity parts")
    for name, L, d in (("L_S", L_S, s.system_dim), ("L_A", L_A, s.apparatus_dim)):
        if L.shape != (d, d) or opnorm(L - L.conj().T) > 1e-12:
            raise InputError(f"{name} must be a Hermitian {d}x{d} matrix")
    L = np.kron(L_S, np.eye(s.apparatus_dim)) + np.kron(np.eye(s.system_dim), L_A)
    cons = opnorm(s.U @ L - L @ s.U)
    yan = max(opnorm(Z @ L_A - L_A @ Z) for Z in s.pointer.array)
    e = measured_pom(s)
    comm = max(opnorm(E @ L_S - L_S @ E) for E in e.array)
    return WayReport(cons, yan, comm, sharpness_defect(e), repeatability_defect(s, e), tol)


@dataclass
class StrongWayResult:
    hypothesis: float
    residual: float | None
    skipped: bool
    tol: float = 1e-10

    @property
    def passed(self) -> bool:
        return self.skipped or self.residual < 1e-9


def strong_way_check(s: MeasurementScheme, L_S=None, times=None, tol: float = 1e-10) -> StrongWayResult:
    """Invariance of measured effects under exp(i L_S t) when U commutes with it."""
    L_S = s.L_S if L_S is None else np.asarray(L_S, dtype=complex)
    if L_S is None:
        raise InputError("strong WAY check needs L_S")
    times = np.linspace(0.1, 2 * np.pi, 7) if times is None else times
    hyp = 0.0
    for t in times:
        V = np.kron(expm(1j * t * L_S), np.eye(s.apparatus_dim))
        hyp = max(hyp, opnorm(s.U @ V - V @ s.U))
    if hyp >= tol * s.dim:
        return StrongWayResult(hyp, None, True, tol)
    e = measured_pom(s)
    res = 0.0
    for t in times:
        u = expm(1j * t * L_S)
        for E in e.array:
            res = max(res, opnorm(u @ E @ u.conj().T - E))
    return StrongWayResult(hyp, float(res), False, tol)


# -- stock schemes ---------------------------------------------------------------

def swap_unitary(d: int) -> np.ndarray:
    S = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            S[j * d + i, i * d + j] = 1.0
    return S


def copy_unitary(d: int) -> np.ndarray:
    """|i>|j> -> |i>|i + j mod d>: copies the system basis into a pointer started at |0>."""
    U = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            U[i * d + (i + j) % d, i * d + j] = 1.0
    return U


def _ground(d: int) -> State:
    v = np.zeros(d, dtype=complex)
    v[0] = 1
    return State.from_vector(v)


def swap_scheme(d: int) -> MeasurementScheme:
    L = np.diag(np.arange(d)).astype(complex)
    return MeasurementScheme(d, d, swap_unitary(d), sharp_pom(d), _ground(d), L_S=L, L_A=L)


def copy_scheme(d: int, basis=None) -> MeasurementScheme:
    """Lueders-type copy of an orthonormal basis (columns of ``basis``) into the pointer."""
    U = copy_unitary(d)
    if basis is not None:
        B = np.asarray(basis, dtype=complex)
        W = np.kron(B, np.eye(d))
        U = W @ U @ W.conj().T
    return MeasurementScheme(d, d, U, sharp_pom(d), _ground(d))


def unsharp_scheme(angle: float = np.pi / 4) -> MeasurementScheme:
    """Qubit pointer rotated by ``angle`` only when the system is |1>."""
    c, s = math.cos(angle), math.sin(angle)
    U = np.eye(4, dtype=complex)
    U[2:, 2:] = [[c, -s], [s, c]]
    return MeasurementScheme(2, 2, U, sharp_pom(2), _ground(2))


def model1_scheme(theta: float) -> MeasurementScheme:
    """Model 1 read as a measurement: second qubit is the apparatus in |1>, pointer P_0 on the system.

    The pointer reads the system qubit after the interaction, so we swap the
    roles: U_total = SWAP . U2 U1, and the 'apparatus' outcome 0 reports
    the first qubit's final value.
    """
    from .models import model1_unitaries

    U1, U2 = model1_unitaries(theta)
    U = swap_unitary(2) @ U2 @ U1
    v = np.array([0, 1], dtype=complex)
    return MeasurementScheme(2, 2, U, sharp_pom(2), State.from_vector(v))


def random_scheme(dS: int, dA: int, rng: np.random.Generator, pointer_outcomes: int | None = None) -> MeasurementScheme:
    """Random unitary coupling, random pure apparatus state, random sharp pointer basis."""
    U = random_unitary(dS * dA, rng)
    v = rng.normal(size=dA) + 1j * rng.normal(size=dA)
    B = random_unitary(dA, rng)
    effects = [np.outer(B[:, k], B[:, k].conj()) for k in range(dA)]
    pointer = Pom(OutcomeSpace.finite(tuple(range(dA))), effects)
    scaling = {}
    if pointer_outcomes is not None:
        scaling = {k: k % pointer_outcomes for k in range(dA)}
    return MeasurementScheme(dS, dA, U, pointer, State.from_vector(v), scaling)


def conserving_coupling(L_S, dA: int, rng: np.random.Generator, kind: str = "blocks") -> np.ndarray:
    """Unitary commuting with exp(i L_S t) (x) 1.

    ``blocks``: sum_n P_n (x) V_n over eigenprojections of L_S with Haar V_n.
    ``exp``: exp(i L_S (x) K) for a random Hermitian K.
    """
    L_S = np.asarray(L_S, dtype=complex)
    if kind == "exp":
        K = np.asarray(random_hermitian(dA, rng))
        return expm(1j * np.kron(L_S, K))
    w, v = np.linalg.eigh(L_S)
    U = np.zeros((L_S.shape[0] * dA,) * 2, dtype=complex)
    for val in np.unique(np.round(w, 10)):
        cols = v[:, np.abs(w - val) < 1e-9]
        P = cols @ cols.conj().T
        U += np.kron(P, random_unitary(dA, rng))
    return U


def relative_phase_scheme(n: int, omega=None) -> MeasurementScheme:
    """Reads the relative-phase effect (1 + sigma_1)/2 with a phase reference of levels 0..n.

    The apparatus is reference (x) pointer qubit.  V rotates each pair
    (|0,k>, |1,k-1>) by a Hadamard block and then the system value is copied
    to the pointer; pointer outcome 0 then corresponds to the relativised
    effect of (1 + sigma_1)/2.
    """
    dR = n + 1
    dA = 2 * dR
    V = np.eye(2 * dR, dtype=complex)
    h = 1 / math.sqrt(2)
    for k in range(1, dR):
        a, b = k, dR + k - 1
        V[a, a], V[a, b], V[b, a], V[b, b] = h, h, h, -h
    # order S (x) R (x) P
    V3 = np.kron(V, np.eye(2))
    C = np.zeros((4 * dR, 4 * dR), dtype=complex)
    for s in range(2):
        for r in range(dR):
            for p in range(2):
                C[(s * dR + r) * 2 + (p ^ s), (s * dR + r) * 2 + p] = 1.0
    U = C @ V3
    if omega is None:
        phi = np.ones(dR, dtype=complex) / math.sqrt(dR)
        omega = np.outer(phi, phi.conj())
    omega = as_operator(omega).mat
    app = np.kron(omega, np.diag([1.0, 0.0]))
    Z0 = np.kron(np.eye(dR), np.diag([1.0, 0.0]))
    pointer = Pom(OutcomeSpace.finite((0, 1)), [Z0, np.eye(dA) - Z0])
    L_A = np.kron(np.diag(np.arange(dR)), np.eye(2)).astype(complex)
    return MeasurementScheme(2, dA, U, pointer, State(app), L_S=np.diag([0.0, 1.0]).astype(complex), L_A=L_A)


def relative_phase_distance(n: int, omega=None) -> float:
    """D(A, measured effect of outcome 0) for A = (1 + sigma_1)/2."""
    from .bounds import owb_effect

    s = relative_phase_scheme(n, omega)
    e = measured_pom(s)
    return opnorm(owb_effect().mat - e.array[0])


def apparatus_spread(s: MeasurementScheme) -> float:
    L = s.L_A
    r = s.apparatus_state.mat
    m = float(np.real(np.trace(r @ L)))
    return math.sqrt(max(float(np.real(np.trace(r @ L @ L))) - m * m, 0.0))


# -- unsharp relative position on a line ------------------------------------------

def _lattice_width(p: np.ndarray, epsilon: float, slack: float = 1e-12) -> int:
    """Fewest consecutive lattice points carrying mass >= 1 - eps (non-periodic)."""
    cs = np.concatenate([[0.0], np.cumsum(p)])
    n = p.size
    for L in range(1, n + 1):
        if np.max(cs[L:] - cs[:-L]) >= 1 - epsilon - slack:
            return L
    return n


def _variance(p: np.ndarray, x: np.ndarray) -> float:
    m = float(np.dot(p, x))
    return float(np.dot(p, (x - m) ** 2))


@dataclass
class SmearReport:
    effect_residual: float
    variance_residual: float
    width_margins: dict
    variances: dict

    @property
    def passed(self) -> bool:
        return self.effect_residual < 1e-12 and self.variance_residual < 1e-10 and min(self.width_margins.values()) >= 0


def smeared_restriction_check(e, phi, X, grid: int | None = None, eps_grid=(0.01, 0.05, 0.1, 0.25)) -> SmearReport:
    """Restriction of the unsharp relative position by a reference wavefunction.

    ``e`` and ``phi`` are arrays on symmetric offsets -K..K (index K is zero).
    The bipartite effect for value x is diag_{s,r} e(s - r - x) on a line grid
    [-G, G]^2; restricting with |phi><phi| must give the multiplication
    operator (chi_X * (e * |phi|^2))(Q).
    """
    e = np.asarray(e, dtype=float)
    p = np.abs(np.asarray(phi, dtype=complex)) ** 2
    if e.ndim != 1 or e.size % 2 == 0 or p.ndim != 1 or p.size % 2 == 0:
        raise InputError("kernel and wavefunction need odd length (offsets -K..K)")
    if np.any(e < 0) or abs(e.sum() - 1) > 1e-12 or abs(p.sum() - 1) > 1e-12:
        raise InputError("kernel and |phi|^2 must be probability vectors")
    Ke, Kp = e.size // 2, p.size // 2
    X = sorted({int(x) for x in X})
    G = grid if grid is not None else 2 * (Ke + Kp + max(abs(x) for x in X) + 1)
    if Ke + Kp + max(abs(x) for x in X) >= G / 2:
        raise InputError(f"supports overflow the grid: need grid > {2 * (Ke + Kp + max(abs(x) for x in X))}")
    pos = np.arange(-G, G + 1)
    # reference wavefunction on the grid
    pR = np.zeros(pos.size)
    pR[G - Kp:G + Kp + 1] = p

    def kernel(z):
        z = np.asarray(z)
        out = np.zeros(z.shape)
        ok = np.abs(z) <= Ke
        out[ok] = e[z[ok] + Ke]
        return out

    S, R = np.meshgrid(pos, pos, indexing="ij")
    bip = sum(kernel(S - R - x) for x in X)  # diagonal of the bipartite effect, shape (s, r)
    restricted = bip @ pR
    et = np.convolve(e, p)  # offsets -(Ke+Kp)..(Ke+Kp)
    Kt = Ke + Kp
    target = np.zeros(pos.size)
    for x in X:
        for k, w in enumerate(et):
            idx = x + k - Kt + G
            if 0 <= idx < pos.size:
                target[idx] += w
    eff_res = float(np.max(np.abs(restricted - target)))
    xe, xp, xt = np.arange(-Ke, Ke + 1), np.arange(-Kp, Kp + 1), np.arange(-Kt, Kt + 1)
    ve, vp, vt = _variance(e, xe), _variance(p, xp), _variance(et, xt)
    margins = {}
    for eps in eps_grid:
        margins[eps] = _lattice_width(et, eps) - max(_lattice_width(e, eps), _lattice_width(p, eps))
    return SmearReport(eff_res, abs(vt - ve - vp), margins, {"e": ve, "phi": vp, "convolved": vt})


def binomial_kernel(n: int) -> np.ndarray:
    """Binomial(n, 1/2) on offsets -n..n (support on steps of 1 from -n/2 shifted to centre)."""
    from scipy.stats import binom

    k = np.arange(n + 1)
    w = binom.pmf(k, n, 0.5)
    out = np.zeros(2 * n + 1)
    out[n - n // 2:n - n // 2 + n + 1] = w
    return out


# -- scheme files ------------------------------------------------------------------

class SchemeFileError(InputError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


def _line(node) -> int:
    return node.start_mark.line + 1


def _scalar(node, kind):
    if not isinstance(node, yaml.ScalarNode):
        raise SchemeFileError(f"expected a {kind.__name__}", _line(node))
    try:
        val = yaml.safe_load(node.value) if node.tag.endswith(("int", "float")) else node.value
        if kind is int:
            if isinstance(val, bool) or int(val) != float(val):
                raise ValueError
            return int(val)
        return kind(val)
    except (TypeError, ValueError):
        raise SchemeFileError(f"expected a {kind.__name__}, got {node.value!r}", _line(node)) from None


def _complex(node) -> complex:
    if isinstance(node, yaml.SequenceNode):
        if len(node.value) != 2:
            raise SchemeFileError("complex entries are [real, imag] pairs", _line(node))
        return complex(_scalar(node.value[0], float), _scalar(node.value[1], float))
    return complex(_scalar(node, float), 0.0)


def _matrix(node, shape) -> np.ndarray:
    if not isinstance(node, yaml.SequenceNode) or len(node.value) != shape[0]:
        raise SchemeFileError(f"expected a matrix with {shape[0]} rows", _line(node))
    rows = []
    for r in node.value:
        if not isinstance(r, yaml.SequenceNode) or len(r.value) != shape[1]:
            raise SchemeFileError(f"expected a row of {shape[1]} entries", _line(r))
        rows.append([_complex(x) for x in r.value])
    return np.array(rows, dtype=complex)


def _vector_or_matrix(node, d) -> np.ndarray:
    if isinstance(node, yaml.SequenceNode) and node.value and isinstance(node.value[0], yaml.SequenceNode) \
            and node.value[0].value and isinstance(node.value[0].value[0], yaml.SequenceNode):
        return _matrix(node, (d, d))
    if not isinstance(node, yaml.SequenceNode) or len(node.value) != d:
        raise SchemeFileError(f"expected a vector of length {d} or a {d}x{d} matrix", _line(node))
    return np.array([_complex(x) for x in node.value])


SCHEME_KEYS = {"system_dim", "apparatus_dim", "coupling", "pointer", "apparatus_state", "scaling", "L_S", "L_A"}
REQUIRED_KEYS = {"system_dim", "apparatus_dim", "coupling", "pointer", "apparatus_state"}


def parse_scheme(text: str) -> MeasurementScheme:
    """Build a scheme from YAML (or JSON) text, reporting the offending line on errors."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SchemeFileError(f"malformed document: {getattr(exc, 'problem', exc)}",
                              mark.line + 1 if mark else None) from None
    if not isinstance(root, yaml.MappingNode):
        raise SchemeFileError("top level must be a mapping", _line(root) if root is not None else 1)
    fields = {}
    for k, v in root.value:
        key = k.value
        if key not in SCHEME_KEYS:
            raise SchemeFileError(f"unknown key {key!r}", _line(k))
        if key in fields:
            raise SchemeFileError(f"duplicate key {key!r}", _line(k))
        fields[key] = v
    missing = REQUIRED_KEYS - fields.keys()
    if missing:
        raise SchemeFileError(f"missing keys: {', '.join(sorted(missing))}", _line(root))
    dS = _scalar(fields["system_dim"], int)
    dA = _scalar(fields["apparatus_dim"], int)
    for key, d in (("system_dim", dS), ("apparatus_dim", dA)):
        if d < 1:
            raise SchemeFileError(f"{key} must be positive", _line(fields[key]))
    U = _matrix(fields["coupling"], (dS * dA, dS * dA))
    if opnorm(U.conj().T @ U - np.eye(dS * dA)) > SCHEME_TOL * dS * dA:
        raise SchemeFileError("coupling is not unitary", _line(fields["coupling"]))
    pnode = fields["pointer"]
    if not isinstance(pnode, yaml.MappingNode):
        raise SchemeFileError("pointer must map labels and effects", _line(pnode))
    pf = {k.value: v for k, v in pnode.value}
    if set(pf) != {"labels", "effects"}:
        raise SchemeFileError("pointer needs exactly the keys 'labels' and 'effects'", _line(pnode))
    if not isinstance(pf["labels"], yaml.SequenceNode):
        raise SchemeFileError("pointer labels must be a list", _line(pf["labels"]))
    labels = [x.value for x in pf["labels"].value]
    enode = pf["effects"]
    if not isinstance(enode, yaml.SequenceNode) or len(enode.value) != len(labels):
        raise SchemeFileError("one pointer effect per label is required", _line(enode))
    effects = [_matrix(x, (dA, dA)) for x in enode.value]
    try:
        pointer = Pom(OutcomeSpace.finite(labels), effects)
    except InputError as exc:
        raise SchemeFileError(str(exc), _line(pnode)) from None
    rep = pom_validate(pointer)
    if not (rep.positivity < rep.tol and rep.upper < rep.tol and rep.normalization < rep.tol):
        raise SchemeFileError("pointer effects do not form a POM", _line(enode))
    st = _vector_or_matrix(fields["apparatus_state"], dA)
    try:
        state = State.from_vector(st) if st.ndim == 1 else State(st)
    except InputError as exc:
        raise SchemeFileError(str(exc), _line(fields["apparatus_state"])) from None
    scaling = {}
    if "scaling" in fields:
        snode = fields["scaling"]
        if not isinstance(snode, yaml.MappingNode):
            raise SchemeFileError("scaling must be a label table", _line(snode))
        for k, v in snode.value:
            if k.value not in labels:
                raise SchemeFileError(f"scaling refers to unknown label {k.value!r}", _line(k))
            scaling[k.value] = v.value
    Ls = {}
    for key, d in (("L_S", dS), ("L_A", dA)):
        if key in fields:
            m = _matrix(fields[key], (d, d))
            if opnorm(m - m.conj().T) > 1e-12:
                raise SchemeFileError(f"{key} must be Hermitian", _line(fields[key]))
            Ls[key] = m
    return MeasurementScheme(dS, dA, U, pointer, state, scaling, Ls.get("L_S"), Ls.get("L_A"))


def load_scheme(path) -> MeasurementScheme:
    with open(path, encoding="utf-8") as fh:
        return parse_scheme(fh.read())


def dump_scheme(s: MeasurementScheme) -> str:
    """YAML text that :func:`parse_scheme` reads back to the same scheme."""
    def mat(m):
        return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]

    sp = s.pointer.space
    labels = list(sp.labels) if sp.kind == "finite" else list(range(len(s.pointer)))
    doc = {
        "system_dim": s.system_dim,
        "apparatus_dim": s.apparatus_dim,
        "coupling": mat(s.U),
        "pointer": {"labels": [str(x) for x in labels], "effects": [mat(e) for e in s.pointer.array]},
        "apparatus_state": mat(s.apparatus_state.mat),
    }
    if s.scaling:
        doc["scaling"] = {str(k): str(v) for k, v in s.scaling.items()}
    if s.L_S is not None:
        doc["L_S"] = mat(s.L_S)
    if s.L_A is not None:
        doc["L_A"] = mat(s.L_A)
    return yaml.safe_dump(doc, sort_keys=False)


def number_operator(d: int) -> np.ndarray:
    return np.diag(np.arange(d)).astype(complex)

