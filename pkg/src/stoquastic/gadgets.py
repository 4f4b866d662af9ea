"""Perturbative gadgets that lower the locality of termwise-stoquastic Hamiltonians.

Every reduction returns a :class:`GadgetResult` whose ``compiled`` Hamiltonian
acts on the data qubits ``0..n-1`` followed by freshly allocated mediator
qubits.  Its low-energy spectrum reproduces ``target + omega_shift``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import CapacityError, InputError, PreconditionError, ResolventError
from .hamiltonian import (
    DENSE_MAX_QUBITS,
    P1,
    SIGMA_MINUS,
    SIGMA_PLUS,
    X,
    Z,
    LocalHamiltonian,
    LocalTerm,
    kron_local,
)
from .spectral import ground_energy
from .stoquastic import check_stoquastic

SUBDIVISION = "subdivision"
NORMALIZE = "normalize"
TRIPLE_X = "triple_x"
KKR = "kkr"

ENTRY_TOL = 1e-12
SELF_ENERGY_MAX_QUBITS = 12
SUBDIVISION_MARGIN = 100.0


@dataclass(frozen=True)
class GadgetSpec:
    """Energy scales of one gadget family, all derived from ``delta`` (or ``Delta``)."""

    kind: str
    delta: float

    def __post_init__(self):
        if self.kind == SUBDIVISION or self.kind == NORMALIZE:
            if not self.delta > 0:
                raise InputError("Delta must be positive")
        elif self.kind in (TRIPLE_X, KKR):
            if not 0 < self.delta < 1:
                raise InputError("delta must lie in (0, 1)")
        else:
            raise InputError(f"unknown gadget kind {self.kind!r}")

    @property
    def omega(self) -> float:
        if self.kind == TRIPLE_X:
            return self.delta**-4
        if self.kind == KKR:
            return self.delta**-2
        return math.sqrt(self.delta)

    @property
    def delta_x(self) -> float:
        return self.delta**-5 if self.kind == TRIPLE_X else 0.0

    @property
    def delta_z(self) -> float:
        if self.kind == TRIPLE_X:
            return self.delta**-6
        if self.kind == KKR:
            return self.delta**-3
        return self.delta

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "delta": self.delta,
            "omega": self.omega,
            "delta_x": self.delta_x,
            "delta_z": self.delta_z,
        }


@dataclass(frozen=True)
class Pair:
    """One summand ``-(C (x) D + C^dag (x) D^dag)`` of a subdivision decomposition."""

    c_support: tuple[int, ...]
    c: np.ndarray
    d_support: tuple[int, ...]
    d: np.ndarray
    term: int


def _pair_matrix(p: Pair) -> np.ndarray:
    # local bits: C support first, D support after (LocalTerm sorts later)
    cd = np.kron(p.d, p.c)
    return -(cd + cd.conj().T)


@dataclass(frozen=True)
class Decomposition:
    """``H = omega*I + remainder - sum_a (C_a D_a + h.c.)``."""

    n: int
    pairs: list
    omega: float
    remainder: LocalHamiltonian

    def rebuild(self) -> LocalHamiltonian:
        terms = list(self.remainder.terms)
        terms += [LocalTerm(p.c_support + p.d_support, _pair_matrix(p)) for p in self.pairs]
        terms.append(LocalTerm((), np.array([[self.omega]])))
        return LocalHamiltonian(self.n, tuple(terms))


@dataclass(frozen=True)
class LowBlock:
    """Mediator qubits whose unperturbed low-energy space is spanned by ``states``."""

    qubits: tuple[int, ...]
    states: tuple[int, ...]
    # "product" means each listed basis state separately; "ghz_plus" the single
    # state (|0..0> + |1..1>)/sqrt(2)
    kind: str = "product"

    def vectors(self) -> np.ndarray:
        dim = 2 ** len(self.qubits)
        if self.kind == "ghz_plus":
            v = np.zeros((dim, 1))
            v[0, 0] = v[dim - 1, 0] = 1 / math.sqrt(2)
            return v
        v = np.zeros((dim, len(self.states)))
        for j, s in enumerate(self.states):
            v[s, j] = 1.0
        return v


@dataclass(frozen=True, eq=False)
class GadgetResult:
    stage: str
    target: LocalHamiltonian
    compiled: LocalHamiltonian
    omega_shift: float
    mediator_map: list
    spec: GadgetSpec | None = None
    unperturbed: LocalHamiltonian | None = None
    low_blocks: tuple = ()
    verified_error: float | None = None
    stages: tuple = field(default_factory=tuple)

    @property
    def n_data(self) -> int:
        return self.target.n

    @property
    def n_mediators(self) -> int:
        return self.compiled.n - self.target.n

    def low_isometry(self) -> np.ndarray:
        """Columns spanning the unperturbed low-energy space, data index fastest."""
        med = np.ones((1, 1))
        covered = []
        for block in self.low_blocks:
            # blocks are allocated in increasing qubit order, so later blocks
            # occupy more significant bits
            med = np.kron(block.vectors(), med)
            covered.extend(block.qubits)
        if sorted(covered) != list(range(self.n_data, self.compiled.n)):
            raise InputError("low-energy blocks do not cover the mediator register")
        return np.kron(med, np.eye(2**self.n_data))

    def with_verification(self, max_qubits: int = DENSE_MAX_QUBITS) -> "GadgetResult":
        if self.compiled.n > max_qubits:
            return self
        err = abs(ground_energy(self.compiled) - self.omega_shift - ground_energy(self.target))
        return _replace(self, verified_error=float(err))

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "n_data": self.n_data,
            "n_mediators": self.n_mediators,
            "omega_shift": self.omega_shift,
            "verified_error": self.verified_error,
            "compiled_locality": self.compiled.locality,
            "spec": None if self.spec is None else self.spec.to_dict(),
            "mediator_map": self.mediator_map,
            "stages": [s.to_dict() for s in self.stages],
        }


def _replace(res: GadgetResult, **changes) -> GadgetResult:
    import dataclasses

    return dataclasses.replace(res, **changes)


# ---------------------------------------------------------------- decomposition


def _require_termwise(h: LocalHamiltonian):
    report = check_stoquastic(h, termwise=True)
    if not report.is_termwise_stoquastic:
        from .errors import NotStoquasticError

        raise NotStoquasticError("gadgets need a termwise stoquastic Hamiltonian", report)


def _sub_index(idx: int, positions: Sequence[int]) -> int:
    out = 0
    for j, p in enumerate(positions):
        out |= ((idx >> p) & 1) << j
    return out


def _entry_pair(t: LocalTerm, r: int, c: int, value: float, c_pos, d_pos, term: int) -> Pair:
    """Pair reproducing ``-value (|r><c| + |c><r|)`` (or ``-value |r><r|``)."""
    amp = math.sqrt(value / 2 if r == c else value)
    cm = np.zeros((2 ** len(c_pos),) * 2)
    dm = np.zeros((2 ** len(d_pos),) * 2)
    cm[_sub_index(r, c_pos), _sub_index(c, c_pos)] = amp
    dm[_sub_index(r, d_pos), _sub_index(c, d_pos)] = amp
    return Pair(
        tuple(t.support[p] for p in c_pos), cm, tuple(t.support[p] for p in d_pos), dm, term
    )


def _half_split(k: int, r: int, c: int):
    h = (k + 1) // 2
    return list(range(h)), list(range(h, k))


def _shifted(t: LocalTerm) -> tuple[np.ndarray, float]:
    m = t.matrix.real.copy()
    s = max(0.0, float(np.max(np.diag(m))))
    m -= s * np.eye(m.shape[0])
    return m, s


def decompose_target(
    h: LocalHamiltonian,
    *,
    split_diagonal: bool = False,
    min_size: int = 1,
    splitter=_half_split,
) -> Decomposition:
    """Write ``h`` as ``omega*I + remainder - sum_a (C_a D_a + h.c.)``.

    Each term of size ``>= min_size`` is shifted so its diagonal is nonpositive,
    and every nonzero entry pair ``(r, c)`` becomes one pair with ``C`` on the
    first ``ceil(k/2)`` qubits of the term and ``D`` on the rest.  Diagonal
    entries stay in ``remainder`` unless ``split_diagonal`` is set.  Smaller
    terms go to ``remainder`` unchanged.
    """
    _require_termwise(h)
    pairs = []
    rem = []
    omega = 0.0
    for i, t in enumerate(h.terms):
        if t.size < max(min_size, 1):
            rem.append(t)
            continue
        m, s = _shifted(t)
        omega += s
        dim = m.shape[0]
        diag = np.diag(m).copy()
        for r in range(dim):
            for c in range(r, dim):
                v = -m[r, c]
                if v <= ENTRY_TOL * max(1.0, s):
                    continue
                if r == c and not split_diagonal:
                    continue
                c_pos, d_pos = splitter(t.size, r, c)
                pairs.append(_entry_pair(t, r, c, v, c_pos, d_pos, i))
                if r == c:
                    diag[r] = 0.0
        if np.any(diag != 0):
            rem.append(LocalTerm(t.support, np.diag(diag)))
    return Decomposition(h.n, pairs, omega, LocalHamiltonian(h.n, tuple(rem)))


# ---------------------------------------------------------------- subdivision


def _perturbation_scale(dec: Decomposition) -> float:
    """Energy scale of the effective interaction a subdivision pass must resolve."""
    s = sum((np.linalg.norm(p.c, 2) + np.linalg.norm(p.d, 2)) ** 2 for p in dec.pairs)
    return float(s + dec.remainder.norm_bound)


def _subdivide(dec: Decomposition, Delta: float, first_mediator: int, stage_terms: list):
    """Mediator-coupled Hamiltonian for a decomposition; returns terms and blocks."""
    root = math.sqrt(Delta)
    terms = list(dec.remainder.terms)
    blocks = []
    mapping = []
    for a, p in enumerate(dec.pairs):
        m = first_mediator + a
        if p.c_support:
            # C (x) s+ + C^dag (x) s-, mediator on the most significant local bit
            cm = np.kron(SIGMA_PLUS, p.c)
            terms.append(LocalTerm(p.c_support + (m,), -root * (cm + cm.conj().T)))
            terms.append(LocalTerm(p.c_support, p.c.T @ p.c))
        if p.d_support:
            dm = np.kron(SIGMA_PLUS, p.d.T)
            terms.append(LocalTerm(p.d_support + (m,), -root * (dm + dm.conj().T)))
            terms.append(LocalTerm(p.d_support, p.d @ p.d.T))
        terms.append(LocalTerm((m,), Delta * P1))
        blocks.append(LowBlock((m,), (0,)))
        mapping.append({"term": p.term, "mediators": [m], "c_support": list(p.c_support), "d_support": list(p.d_support)})
    stage_terms.extend(LocalTerm((first_mediator + a,), Delta * P1) for a in range(len(dec.pairs)))
    return terms, blocks, mapping


def subdivision_reduce(h: LocalHamiltonian, Delta: float, *, verify: bool = True) -> GadgetResult:
    """Split every term on three or more qubits with one mediator per entry pair.

    The compiled Hamiltonian is ``(ceil(k/2)+1)``-local and its ground energy
    approaches ``lambda(h) - omega`` as ``Delta`` grows.
    """
    spec = GadgetSpec(SUBDIVISION, float(Delta))
    dec = decompose_target(h, split_diagonal=True, min_size=3)
    scale = _perturbation_scale(dec)
    if Delta < SUBDIVISION_MARGIN * scale:
        raise PreconditionError(
            f"Delta={Delta:g} too small; need at least {SUBDIVISION_MARGIN:g} x {scale:.4g}"
        )
    unpert: list = []
    terms, blocks, mapping = _subdivide(dec, Delta, h.n, unpert)
    n_total = h.n + len(dec.pairs)
    res = GadgetResult(
        stage=SUBDIVISION,
        target=h,
        compiled=LocalHamiltonian(n_total, tuple(terms)),
        omega_shift=0.0 - dec.omega + 0.0,
        mediator_map=mapping,
        spec=spec,
        unperturbed=LocalHamiltonian(n_total, tuple(unpert)),
        low_blocks=tuple(blocks),
    )
    return res.with_verification() if verify else res


# ---------------------------------------------------------------- normal form for 3-local terms


def _is_flip_entry(r: int, c: int, k: int) -> bool:
    return r ^ c == (1 << k) - 1


def _agreeing_qubit_split(k: int, r: int, c: int):
    # D is the highest qubit on which r and c agree, C the remaining two
    agree = [a for a in range(k) if not ((r ^ c) >> a) & 1]
    d = agree[-1]
    return [a for a in range(k) if a != d], [d]


def _split_flip_entries(h: LocalHamiltonian):
    """Separate the full-flip entries of 3-local terms from everything else."""
    keep, rest = [], []
    for t in h.terms:
        if t.size != 3:
            rest.append(t)
            continue
        m = t.matrix.real
        flip = np.zeros_like(m)
        for r in range(8):
            flip[r, 7 - r] = m[r, 7 - r]
        other = m - flip
        if np.any(flip != 0):
            keep.append(LocalTerm(t.support, flip))
        if np.any(np.abs(other) > 0):
            rest.append(LocalTerm(t.support, other))
    return keep, rest


def is_normalized_3local(h: LocalHamiltonian) -> bool:
    """True when every 3-local term only has full-flip entries ``|r><~r|``."""
    for t in h.terms:
        if t.size > 3:
            return False
        if t.size == 3:
            m = t.matrix
            mask = np.fliplr(np.eye(8, dtype=bool))
            if np.any(np.abs(m[~mask]) > ENTRY_TOL * max(1.0, float(np.max(np.abs(m))))):
                return False
    return True


def normalize_3local(h: LocalHamiltonian, ratio: float = 1e3, *, verify: bool = True) -> GadgetResult:
    """Bring every 3-local term to full-flip form with repeated subdivision passes.

    An entry ``|r><c|`` whose bit strings agree on some qubit ``l`` is split
    with ``D`` on ``l`` and ``C`` on the other two qubits; the new mediator
    raises the Hamming distance of the resulting 3-local entry by one, so at
    most three passes are needed.  Pass ``p`` uses
    ``Delta_p = ratio * scale_p`` where ``scale_p`` bounds the interaction the
    pass must reproduce.
    """
    if h.locality > 3:
        raise InputError(f"normalize_3local needs a 3-local input, got locality {h.locality}")
    _require_termwise(h)
    current = h
    omega = 0.0
    blocks: list = []
    mapping: list = []
    unpert: list = []
    passes = []
    while not is_normalized_3local(current):
        if len(passes) == 3:
            raise PreconditionError("3-local terms not in full-flip form after three passes")
        keep, rest = _split_flip_entries(current)
        work = LocalHamiltonian(current.n, tuple(rest))
        dec = decompose_target(work, split_diagonal=True, min_size=3, splitter=_agreeing_qubit_split)
        dec = Decomposition(
            dec.n, dec.pairs, dec.omega, LocalHamiltonian(dec.n, tuple(keep) + dec.remainder.terms)
        )
        Delta = ratio * _perturbation_scale(dec)
        terms, new_blocks, new_map = _subdivide(dec, Delta, current.n, unpert)
        for entry in new_map:
            entry["pass"] = len(passes)
        mapping.extend(new_map)
        blocks.extend(new_blocks)
        omega -= dec.omega
        current = LocalHamiltonian(current.n + len(dec.pairs), tuple(terms))
        passes.append(Delta)
    res = GadgetResult(
        stage=NORMALIZE,
        target=h,
        compiled=current,
        omega_shift=omega,
        mediator_map=mapping,
        spec=GadgetSpec(NORMALIZE, float(passes[-1])) if passes else None,
        unperturbed=LocalHamiltonian(current.n, tuple(unpert)),
        low_blocks=tuple(blocks),
    )
    return res.with_verification() if verify else res


# ---------------------------------------------------------------- triple-X gadget


def _mediator_hamiltonian(meds: Sequence[int], dx: float, dz: float) -> list[LocalTerm]:
    """``-dx/2 (XXX - I) - dz/4 (Z1Z2 + Z2Z3 + Z1Z3 - 3I)`` with the constant split off."""
    out = []
    if dx:
        out.append(LocalTerm(tuple(meds), -0.5 * dx * kron_local(X, X, X)))
        out.append(LocalTerm((), np.array([[0.5 * dx]])))
    zz = -0.25 * dz * (kron_local(Z, Z) - np.eye(4))
    for a, b in ((0, 1), (1, 2), (0, 2)):
        out.append(LocalTerm((meds[a], meds[b]), zz))
    return out


def _flip_triples(t: LocalTerm):
    """``(r, h)`` for each entry pair ``-h(|r><~r| + h.c.)`` with ``r < ~r``."""
    m = t.matrix.real
    for r in range(4):
        h = -m[r, 7 - r]
        if h > ENTRY_TOL * max(1.0, float(np.max(np.abs(m)))):
            yield r, float(h)


def _sigma_for(r: int, a: int) -> np.ndarray:
    # bit a of r set means |1><0| (sigma+) on that qubit
    return SIGMA_PLUS if (r >> a) & 1 else SIGMA_MINUS


def triple_x_reduce(h: LocalHamiltonian, delta: float = 0.15, *, verify: bool = True) -> GadgetResult:
    """Replace each ``-h(s s s + h.c.)`` triple by three mediators and a ``-XXX`` term.

    The term is written as ``-3(B1 B2 B3 + h.c.)`` with ``B_j = (h/3)^{1/3}
    sigma_j``.  Each entry pair gets its own mediator triple; the compiled
    Hamiltonian's only 3-local terms are ``-(Delta_x/2) XXX`` on mediators.
    """
    spec = GadgetSpec(TRIPLE_X, float(delta))
    if not is_normalized_3local(h):
        raise InputError("triple_x_reduce needs 3-local terms with full-flip entries only")
    _require_termwise(h)
    w, dx, dz = spec.omega, spec.delta_x, spec.delta_z
    terms = [t for t in h.terms if t.size < 3]
    unpert = []
    blocks = []
    mapping = []
    omega = 0.0
    nxt = h.n
    for i, t in enumerate(h.terms):
        if t.size < 3:
            continue
        for r, coef in _flip_triples(t):
            meds = (nxt, nxt + 1, nxt + 2)
            nxt += 3
            b = (coef / 3.0) ** (1.0 / 3.0)
            for a in range(3):
                bj = b * _sigma_for(r, a)
                cm = np.kron(SIGMA_PLUS, bj)
                terms.append(LocalTerm((t.support[a], meds[a]), -w * (cm + cm.conj().T)))
            hm = _mediator_hamiltonian(meds, dx, dz)
            terms += hm
            unpert += hm
            blocks.append(LowBlock(meds, (), kind="ghz_plus"))
            omega += -(w**2 / 4.0) * 3 * b**2 * (1.0 / dz + 1.0 / (dz + dx))
            mapping.append({"term": i, "entry": [r, 7 - r], "coefficient": coef, "b": b, "mediators": list(meds)})
    res = GadgetResult(
        stage=TRIPLE_X,
        target=h,
        compiled=LocalHamiltonian(nxt, tuple(terms)),
        omega_shift=omega,
        mediator_map=mapping,
        spec=spec,
        unperturbed=LocalHamiltonian(nxt, tuple(unpert)),
        low_blocks=tuple(blocks),
    )
    return res.with_verification() if verify else res


def is_triple_x(h: LocalHamiltonian) -> bool:
    """Every term on three or more qubits is ``-c XXX`` (plus identity) with ``c >= 0``."""
    return all(_xxx_coefficient(t) is not None for t in h.terms if t.size >= 3)


def _xxx_coefficient(t: LocalTerm) -> float | None:
    if t.size != 3:
        return None
    xxx = kron_local(X, X, X)
    m = t.matrix
    c = -float(np.real(np.trace(m @ xxx))) / 8
    ident = float(np.real(np.trace(m))) / 8
    resid = m + c * xxx - ident * np.eye(8)
    if np.max(np.abs(resid)) > ENTRY_TOL * max(1.0, float(np.max(np.abs(m)))) or c < -ENTRY_TOL:
        return None
    return max(c, 0.0)


# ---------------------------------------------------------------- KKR three-qubit gadget


def kkr_3to2_reduce(h: LocalHamiltonian, delta: float = 0.15, *, verify: bool = True) -> GadgetResult:
    """Replace each ``-c X_j X_k X_l`` by three mediators with 2-local couplings.

    ``-c XXX = -6 B1 B2 B3`` with ``B_j = (c/6)^{1/3} X_j``; the mediators carry
    ``-(Delta_z/4)(ZZ + ZZ + ZZ - 3I)`` and couple through ``-omega B_j X_m``.
    """
    spec = GadgetSpec(KKR, float(delta))
    if h.locality > 3 or not is_triple_x(h):
        raise InputError("kkr_3to2_reduce needs 3-local terms of the form -c XXX with c >= 0")
    _require_termwise(h)
    w, dz = spec.omega, spec.delta_z
    terms = [t for t in h.terms if t.size < 3]
    unpert = []
    blocks = []
    mapping = []
    omega = 0.0
    nxt = h.n
    for i, t in enumerate(h.terms):
        if t.size < 3:
            continue
        c = _xxx_coefficient(t)
        ident = float(np.real(np.trace(t.matrix))) / 8
        if ident:
            terms.append(LocalTerm((), np.array([[ident]])))
        if c == 0:
            continue
        meds = (nxt, nxt + 1, nxt + 2)
        nxt += 3
        b = (c / 6.0) ** (1.0 / 3.0)
        for a in range(3):
            terms.append(LocalTerm((t.support[a], meds[a]), -w * b * kron_local(X, X)))
        hm = _mediator_hamiltonian(meds, 0.0, dz)
        terms += hm
        unpert += hm
        blocks.append(LowBlock(meds, (0, 7)))
        omega += -(w**2 / dz) * 3 * b**2
        mapping.append({"term": i, "coefficient": c, "b": b, "mediators": list(meds)})
    res = GadgetResult(
        stage=KKR,
        target=h,
        compiled=LocalHamiltonian(nxt, tuple(terms)),
        omega_shift=omega,
        mediator_map=mapping,
        spec=spec,
        unperturbed=LocalHamiltonian(nxt, tuple(unpert)),
        low_blocks=tuple(blocks),
    )
    return res.with_verification() if verify else res


# ---------------------------------------------------------------- chaining


def compile_chain(
    h: LocalHamiltonian,
    delta: float = 0.15,
    *,
    kkr_delta: float | None = None,
    Delta: float | None = None,
    ratio: float = 1e3,
    verify: bool = True,
) -> GadgetResult:
    """Run subdivision (if k > 3), normalisation, triple-X and KKR in sequence.

    Shifts compose additively: ``compiled ~ target + sum of stage shifts``.
    """
    stages = []
    cur = h
    if cur.locality > 3:
        while cur.locality > 3:
            dec = decompose_target(cur, split_diagonal=True, min_size=3)
            D = Delta if Delta is not None else ratio * _perturbation_scale(dec)
            stages.append(subdivision_reduce(cur, D, verify=False))
            cur = stages[-1].compiled
    if not is_normalized_3local(cur):
        stages.append(normalize_3local(cur, ratio, verify=False))
        cur = stages[-1].compiled
    if any(t.size == 3 for t in cur.terms):
        stages.append(triple_x_reduce(cur, delta, verify=False))
        cur = stages[-1].compiled
    if any(t.size == 3 for t in cur.terms):
        stages.append(kkr_3to2_reduce(cur, kkr_delta if kkr_delta is not None else delta, verify=False))
        cur = stages[-1].compiled
    blocks = tuple(b for s in stages for b in s.low_blocks)
    res = GadgetResult(
        stage="full",
        target=h,
        compiled=cur,
        omega_shift=float(sum(s.omega_shift for s in stages)),
        mediator_map=[m for s in stages for m in s.mediator_map],
        spec=None,
        low_blocks=blocks,
        stages=tuple(stages),
    )
    return res.with_verification() if verify else res


# ---------------------------------------------------------------- self-energy


@dataclass(frozen=True)
class SelfEnergyReport:
    z: float
    # order -> operator on the low space (orders 1..3), order 4 -> norm
    sigma_orders: dict
    second_order_shift: float
    low_dim: int

    def to_dict(self) -> dict:
        out = {"z": self.z, "second_order_shift": self.second_order_shift, "low_dim": self.low_dim}
        for k, v in self.sigma_orders.items():
            out[f"order_{k}_norm"] = float(v) if np.isscalar(v) else float(np.linalg.norm(v, 2))
        return out


def self_energy(
    htilde: GadgetResult | LocalHamiltonian,
    low_projector: np.ndarray | None = None,
    z: float = 0.0,
    max_order: int = 4,
    *,
    unperturbed: LocalHamiltonian | None = None,
    resolvent_tol: float = 1e-9,
) -> SelfEnergyReport:
    """Low orders of ``Sigma(z) = V-- + V-+ G+ V+- + V-+ G+ V++ G+ V+- + ...``.

    ``htilde`` is either a :class:`GadgetResult` (which carries its own
    unperturbed part and low space) or a Hamiltonian together with
    ``unperturbed``.  ``low_projector`` is an isometry whose columns span the
    zero-energy space of the unperturbed part; orders 1-3 are returned as
    matrices in that basis, order 4 as a spectral norm.
    """
    if not 1 <= max_order <= 4:
        raise InputError("max_order must lie in 1..4")
    if isinstance(htilde, GadgetResult):
        full = htilde.compiled
        unperturbed = htilde.unperturbed if unperturbed is None else unperturbed
        if low_projector is None:
            low_projector = htilde.low_isometry()
    else:
        full = htilde
    if unperturbed is None:
        raise InputError("self_energy needs the unperturbed part")
    if full.n > SELF_ENERGY_MAX_QUBITS:
        raise CapacityError(f"self_energy limited to {SELF_ENERGY_MAX_QUBITS} qubits")
    h0 = unperturbed.embedded(full.n).to_dense().real
    v = full.to_dense().real - h0
    if low_projector is None:
        evals, evecs = scipy.linalg.eigh(h0)
        low_projector = evecs[:, np.abs(evals) <= 1e-9 * max(1.0, float(np.max(np.abs(evals))))]
    w = np.asarray(low_projector, dtype=float)
    if np.max(np.abs(h0 @ w), initial=0.0) > 1e-9 * max(1.0, float(np.max(np.abs(h0)))):
        raise InputError("low_projector does not span a zero-energy space of the unperturbed part")
    p_high = np.eye(h0.shape[0]) - w @ w.T
    evals, evecs = scipy.linalg.eigh(p_high @ h0 @ p_high)
    weight = np.sum((w.T @ evecs) ** 2, axis=0)
    high = weight < 0.5
    e_high = evals[high]
    u = evecs[:, high]
    gap = np.min(np.abs(z - e_high)) if e_high.size else np.inf
    scale = max(1.0, float(np.max(np.abs(e_high), initial=0.0)))
    if gap <= resolvent_tol * scale:
        raise ResolventError(f"z={z} hits the high-energy spectrum (distance {gap:.3g})")
    g = (u / (z - e_high)) @ u.T
    vw = v @ w
    orders: dict = {1: w.T @ vw}
    if max_order >= 2:
        gv = g @ vw
        orders[2] = vw.T @ gv
    if max_order >= 3:
        vpp = p_high @ v @ p_high
        ggv = g @ vpp @ gv
        orders[3] = vw.T @ ggv
    if max_order >= 4:
        orders[4] = float(np.linalg.norm(vw.T @ g @ vpp @ ggv, 2))
    shift = float(np.trace(orders[2]) / w.shape[1]) if 2 in orders else 0.0
    return SelfEnergyReport(float(z), orders, shift, int(w.shape[1]))
