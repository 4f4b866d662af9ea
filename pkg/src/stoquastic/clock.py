"""Circuit-to-Hamiltonian construction for classical reversible verifiers.

Wire layout of a circuit on ``n = r + k_anc + s`` wires: coins ``[0, r)``,
ancillas ``[r, r + k_anc)``, witness ``[r + k_anc, n)``.  The clock register
is appended after the wires: clock qubit ``t`` (``1 <= t <= T``) is qubit
``n + t - 1`` and time ``t`` is the unary string ``1^t 0^(T-t)``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapacityError, InputError
from .hamiltonian import DENSE_MAX_QUBITS, P0, P1, LocalHamiltonian, LocalTerm, ketbra

MAX_COINS = 20
MAX_WITNESS = 12
MINUS = 0.5 * np.array([[1, -1], [-1, 1]], dtype=complex)


@dataclass(frozen=True)
class ReversibleCircuit:
    r: int
    k_anc: int
    s: int
    gates: tuple[tuple[int, int, int], ...]
    q_out: int

    def __post_init__(self):
        for name in ("r", "k_anc", "s"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be nonnegative")
        gates = tuple(tuple(int(w) for w in g) for g in self.gates)
        if not gates:
            raise InputError("a circuit needs at least one gate")
        n = self.n
        for g in gates:
            if len(g) != 3 or len(set(g)) != 3:
                raise InputError(f"Toffoli gate {g} needs three distinct wires")
            if any(not 0 <= w < n for w in g):
                raise InputError(f"gate {g} addresses a wire outside [0, {n})")
        if not 0 <= self.q_out < n:
            raise InputError(f"q_out={self.q_out} outside [0, {n})")
        object.__setattr__(self, "gates", gates)

    @property
    def n(self) -> int:
        return self.r + self.k_anc + self.s

    @property
    def T(self) -> int:
        return len(self.gates)

    @property
    def coins(self) -> range:
        return range(self.r)

    @property
    def ancillas(self) -> range:
        return range(self.r, self.r + self.k_anc)

    @property
    def witness_wires(self) -> range:
        return range(self.r + self.k_anc, self.n)

    def input_state(self, coins, witness) -> np.ndarray | int:
        """Basis-state integer(s) with the given coin and witness values, ancillas zero."""
        return np.asarray(coins, dtype=np.int64) | (np.int64(_witness_int(self, witness)) << (self.r + self.k_anc))

    def run(self, x, upto: int | None = None):
        """Apply the first ``upto`` gates (all by default) to basis state(s) ``x``."""
        x = np.asarray(x, dtype=np.int64)
        for c1, c2, tg in self.gates[: self.T if upto is None else upto]:
            fire = ((x >> c1) & 1) & ((x >> c2) & 1)
            x = x ^ (fire << tg)
        return x

    def to_dict(self) -> dict:
        return {"r": self.r, "k_anc": self.k_anc, "s": self.s, "q_out": self.q_out, "gates": [list(g) for g in self.gates]}

    @classmethod
    def from_dict(cls, d: dict) -> "ReversibleCircuit":
        extra = set(d) - {"r", "k_anc", "s", "q_out", "gates"}
        if extra:
            raise InputError(f"unknown circuit keys {sorted(extra)}")
        try:
            return cls(int(d["r"]), int(d["k_anc"]), int(d["s"]), tuple(map(tuple, d["gates"])), int(d["q_out"]))
        except KeyError as e:
            raise InputError(f"circuit is missing {e.args[0]!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "ReversibleCircuit":
        return cls.from_dict(json.loads(text))


def _witness_int(circuit: ReversibleCircuit, witness) -> int:
    if isinstance(witness, (int, np.integer)):
        w = int(witness)
        if not 0 <= w < 2**circuit.s:
            raise InputError(f"witness {w} does not fit in {circuit.s} bits")
        return w
    witness = str(witness)
    if len(witness) != circuit.s or set(witness) - {"0", "1"}:
        raise InputError(f"witness must be a bit string of length {circuit.s}")
    return sum(int(b) << i for i, b in enumerate(witness))


def random_circuit(r: int, k_anc: int, s: int, T: int, seed: int | None = None, q_out: int | None = None):
    rng = np.random.default_rng(seed)
    n = r + k_anc + s
    if n < 3:
        raise InputError("Toffoli gates need at least three wires")
    gates = tuple(tuple(int(w) for w in rng.choice(n, size=3, replace=False)) for _ in range(T))
    if q_out is None:
        q_out = int(rng.integers(n))
    return ReversibleCircuit(r, k_anc, s, gates, q_out)


def acceptance_probability(circuit: ReversibleCircuit, witness) -> float:
    """Fraction of coin strings for which the circuit leaves ``q_out = 1``."""
    if circuit.r > MAX_COINS:
        raise CapacityError(f"coin enumeration limited to r <= {MAX_COINS}")
    coins = np.arange(2**circuit.r, dtype=np.int64)
    out = circuit.run(circuit.input_state(coins, witness))
    hits = int(np.count_nonzero((out >> circuit.q_out) & 1))
    return hits / 2**circuit.r


def acceptance_operator(circuit: ReversibleCircuit) -> np.ndarray:
    """Diagonal of ``M``: entry ``z`` is the acceptance probability with witness ``z``."""
    if circuit.s > MAX_WITNESS or circuit.r > MAX_COINS:
        raise CapacityError(f"acceptance operator limited to s <= {MAX_WITNESS}, r <= {MAX_COINS}")
    return np.array([acceptance_probability(circuit, z) for z in range(2**circuit.s)])


def circuit_unitary(circuit: ReversibleCircuit) -> np.ndarray:
    """Dense permutation matrix of the whole circuit (small ``n`` only)."""
    if circuit.n > DENSE_MAX_QUBITS:
        raise CapacityError("dense circuit matrix too large")
    dim = 2**circuit.n
    perm = circuit.run(np.arange(dim, dtype=np.int64))
    u = np.zeros((dim, dim))
    u[perm, np.arange(dim)] = 1.0
    return u


def _toffoli_local() -> np.ndarray:
    # local bits: control, control, target
    u = np.zeros((8, 8))
    for x in range(8):
        y = x ^ 4 if (x & 3) == 3 else x
        u[y, x] = 1.0
    return u


def _ordered_term(wires: Sequence[int], matrix: np.ndarray) -> LocalTerm:
    # LocalTerm sorts the support and permutes the matrix to match
    return LocalTerm(tuple(wires), matrix)


@dataclass(frozen=True, eq=False)
class ClockInstance:
    circuit: ReversibleCircuit
    hamiltonian: LocalHamiltonian
    parts: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.circuit.T

    def clock_qubit(self, t: int) -> int:
        return self.circuit.n + t - 1

    @property
    def labels(self) -> dict:
        c = self.circuit
        return {
            "coin": list(c.coins),
            "anc": list(c.ancillas),
            "witness": list(c.witness_wires),
            "clock": [self.clock_qubit(t) for t in range(1, c.T + 1)],
        }

    def to_dict(self) -> dict:
        return {"T": self.T, "n_qubits": self.hamiltonian.n, "labels": self.labels, "circuit": self.circuit.to_dict()}


def build_clock_hamiltonian(circuit: ReversibleCircuit) -> ClockInstance:
    """``H_in + H_out + H_prop + H_clock`` on ``n + T`` qubits."""
    T = circuit.T
    if T < 2:
        raise InputError("the clock construction needs at least two gates")
    n = circuit.n
    N = n + T

    def ck(t):
        return n + t - 1

    h_in = [LocalTerm((i, ck(1)), np.kron(P0, MINUS)) for i in circuit.coins]
    h_in += [LocalTerm((j, ck(1)), np.kron(P0, P1)) for j in circuit.ancillas]
    h_out = [LocalTerm((circuit.q_out, ck(T)), np.kron(P1, P0))]
    h_clock = [LocalTerm((ck(t - 1), ck(t)), ketbra("01", "01")) for t in range(2, T + 1)]

    tof = _toffoli_local()
    eye8 = np.eye(8)
    h_prop = []
    for t in range(1, T + 1):
        if t == 1:
            clocks, a, b = (ck(1), ck(2)), "00", "10"
        elif t == T:
            clocks, a, b = (ck(T - 1), ck(T)), "10", "11"
        else:
            clocks, a, b = (ck(t - 1), ck(t), ck(t + 1)), "100", "110"
        # gate wires are local bits 0..2, clock qubits follow
        diag = np.kron(ketbra(a, a) + ketbra(b, b), eye8)
        hop = np.kron(ketbra(b, a) + ketbra(a, b), tof)
        h_prop.append(_ordered_term(tuple(circuit.gates[t - 1]) + clocks, diag - hop))

    parts = {
        "in": LocalHamiltonian(N, tuple(h_in)),
        "out": LocalHamiltonian(N, tuple(h_out)),
        "prop": LocalHamiltonian(N, tuple(h_prop)),
        "clock": LocalHamiltonian(N, tuple(h_clock)),
    }
    terms = tuple(itertools.chain(h_in, h_out, h_prop, h_clock))
    return ClockInstance(circuit, LocalHamiltonian(N, terms, k=6), parts)


def build_history_state(circuit: ReversibleCircuit, witness, coins_superposed: bool = True) -> np.ndarray:
    """``(T+1)^{-1/2} sum_t |unary t> (x) R_t ... R_1 |psi_in>``.

    ``psi_in`` has ancillas zero, the given witness, and coins in ``|+>^r``
    (or all zero when ``coins_superposed`` is false).
    """
    T = circuit.T
    N = circuit.n + T
    if N > DENSE_MAX_QUBITS:
        raise CapacityError(f"history state limited to {DENSE_MAX_QUBITS} qubits")
    if coins_superposed:
        coins = np.arange(2**circuit.r, dtype=np.int64)
        amp = 2 ** (-circuit.r / 2)
    else:
        coins = np.zeros(1, dtype=np.int64)
        amp = 1.0
    x = circuit.input_state(coins, witness)
    psi = np.zeros(2**N)
    norm = 1 / np.sqrt(T + 1)
    for t in range(T + 1):
        clock = ((1 << t) - 1) << circuit.n
        y = circuit.run(x, upto=t)
        np.add.at(psi, clock | y, amp * norm)
    return psi


def expectation(h: LocalHamiltonian, psi: np.ndarray) -> float:
    return float(np.real(np.vdot(psi, h.to_sparse() @ psi)))
