"""k-local qubit Hamiltonians stored as dense local terms.

Bit convention used everywhere in the package: qubit ``i`` is bit ``i`` of a
basis-state integer, so qubit 0 is the least significant bit.  Inside a
``LocalTerm`` the same rule applies to the local index: bit ``a`` of a local
index refers to ``support[a]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, InputError

HERMITIAN_TOL = 1e-12
DENSE_MAX_QUBITS = 14

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma^+ = |1><0| and sigma^- = |0><1|
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)


def kron_local(*ops: np.ndarray) -> np.ndarray:
    """Tensor product in local-index order: ``ops[a]`` acts on local bit ``a``."""
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        # later operators sit on more significant bits
        out = np.kron(np.asarray(op, dtype=complex), out)
    return out


def ketbra(row: str, col: str) -> np.ndarray:
    """``|row><col|`` with character ``a`` of each string addressing local bit ``a``."""
    if len(row) != len(col):
        raise InputError("ket and bra strings differ in length")
    r = bits_to_int(row)
    c = bits_to_int(col)
    m = np.zeros((2 ** len(row), 2 ** len(row)), dtype=complex)
    m[r, c] = 1.0
    return m


def bits_to_int(bits: str | Sequence[int]) -> int:
    """Character/entry ``i`` of ``bits`` is qubit ``i``."""
    out = 0
    for i, b in enumerate(bits):
        b = int(b)
        if b not in (0, 1):
            raise InputError(f"not a bit: {b!r}")
        out |= b << i
    return out


def int_to_bits(x: int, n: int) -> str:
    return "".join(str((x >> i) & 1) for i in range(n))


def _permute_local(matrix: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """Reorder local bits: new bit ``a`` is old bit ``perm[a]``."""
    j = len(perm)
    if j <= 1:
        return matrix
    # reshape puts the most significant bit on axis 0
    t = matrix.reshape((2,) * (2 * j))
    row_axes = [j - 1 - perm[j - 1 - ax] for ax in range(j)]
    axes = row_axes + [j + a for a in row_axes]
    return t.transpose(axes).reshape(2**j, 2**j)


@dataclass(frozen=True, eq=False)
class LocalTerm:
    """A Hermitian operator acting on the qubits listed in ``support``.

    Supports are stored sorted; an unsorted support is accepted and the matrix
    is permuted to match.  An empty support denotes a multiple of the identity.
    """

    support: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        m = np.array(self.matrix, dtype=complex)
        j = len(support)
        if len(set(support)) != j:
            raise InputError(f"repeated qubit in support {support}")
        if any(s < 0 for s in support):
            raise InputError(f"negative qubit index in {support}")
        if m.shape != (2**j, 2**j):
            raise InputError(f"matrix shape {m.shape} does not match support size {j}")
        scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
            raise InputError(f"term on {support} is not Hermitian")
        order = sorted(range(j), key=lambda a: support[a])
        if order != list(range(j)):
            m = _permute_local(m, order)
            support = tuple(support[a] for a in order)
        m.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", m)

    @property
    def size(self) -> int:
        return len(self.support)

    @cached_property
    def norm(self) -> float:
        """Spectral norm via a dense eigensolve of the local matrix."""
        if self.matrix.size == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix))))

    @cached_property
    def mask(self) -> int:
        out = 0
        for s in self.support:
            out |= 1 << s
        return out

    @cached_property
    def spread(self) -> np.ndarray:
        """Global bit pattern for every local index."""
        loc = np.arange(2**self.size, dtype=np.int64)
        out = np.zeros_like(loc)
        for a, s in enumerate(self.support):
            out |= ((loc >> a) & 1) << s
        return out

    def local_index(self, x):
        """Local index of global basis state(s) ``x``; works on ints and int arrays."""
        if isinstance(x, (int, np.integer)):
            out = 0
            for a, s in enumerate(self.support):
                out |= ((int(x) >> s) & 1) << a
            return out
        x = np.asarray(x, dtype=np.int64)
        out = np.zeros_like(x)
        for a, s in enumerate(self.support):
            out |= ((x >> s) & 1) << a
        return out

    def scaled(self, c: float) -> "LocalTerm":
        return LocalTerm(self.support, c * self.matrix)

    def relabeled(self, mapping: Sequence[int] | dict) -> "LocalTerm":
        return LocalTerm(tuple(mapping[s] for s in self.support), self.matrix)


@dataclass(frozen=True, eq=False)
class LocalHamiltonian:
    """``H = sum_S H_S`` on ``n`` qubits.  Terms are kept as given, never merged."""

    n: int
    terms: tuple[LocalTerm, ...] = field(default_factory=tuple)
    k: int | None = None

    def __post_init__(self):
        terms = tuple(self.terms)
        for t in terms:
            if not isinstance(t, LocalTerm):
                raise InputError(f"expected LocalTerm, got {type(t).__name__}")
            if t.support and t.support[-1] >= self.n:
                raise InputError(f"support {t.support} outside {self.n} qubits")
        k = max((t.size for t in terms), default=0) if self.k is None else int(self.k)
        if any(t.size > k for t in terms):
            raise InputError(f"a term exceeds the locality bound k={k}")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[tuple[Sequence[int], np.ndarray]], k=None):
        return cls(n, tuple(LocalTerm(tuple(s), m) for s, m in terms), k)

    @property
    def dim(self) -> int:
        return 2**self.n

    @property
    def locality(self) -> int:
        """Largest support actually used (``k`` is only an upper bound)."""
        return max((t.size for t in self.terms), default=0)

    @cached_property
    def norm_bound(self) -> float:
        """``C = sum_S ||H_S||``, an efficiently computable bound on ``||H||``."""
        return float(sum(t.norm for t in self.terms))

    @cached_property
    def row_abs_bound(self) -> float:
        """Sum over terms of the largest absolute row sum of each term.

        Bounds ``max_x sum_y |<x|H|y>|`` and hence ``||H||``.
        """
        return float(sum(np.max(np.abs(t.matrix).sum(axis=1), initial=0.0) for t in self.terms))

    @cached_property
    def is_real(self) -> bool:
        return all(np.all(t.matrix.imag == 0) for t in self.terms)

    def __add__(self, other: "LocalHamiltonian") -> "LocalHamiltonian":
        if not isinstance(other, LocalHamiltonian):
            return NotImplemented
        n = max(self.n, other.n)
        return LocalHamiltonian(n, self.terms + other.terms)

    def scaled(self, c: float) -> "LocalHamiltonian":
        return LocalHamiltonian(self.n, tuple(t.scaled(c) for t in self.terms), self.k)

    def embedded(self, n: int) -> "LocalHamiltonian":
        if n < self.n:
            raise InputError("cannot embed into fewer qubits")
        return LocalHamiltonian(n, self.terms, self.k)

    def with_constant(self, c: float) -> "LocalHamiltonian":
        """``H + c*I`` stored as a zero-support term."""
        return LocalHamiltonian(self.n, self.terms + (LocalTerm((), np.array([[c]])),), self.k)

    def _check_state(self, x) -> int:
        x = int(x)
        if x < 0 or x >= 2**self.n:
            raise InputError(f"basis state {x} outside {self.n} qubits")
        return x

    def matrix_element(self, x: int, y: int) -> complex:
        """``<x|H|y>`` summed over terms without materialising ``H``."""
        x = self._check_state(x)
        y = self._check_state(y)
        diff = x ^ y
        total = 0j
        for t in self.terms:
            if diff & ~t.mask:
                continue
            total += t.matrix[t.local_index(x), t.local_index(y)]
        return complex(total)

    def row(self, x: int) -> list[tuple[int, complex]]:
        """Nonzero entries ``(y, <x|H|y>)`` of row ``x``, sorted by ``y``."""
        x = self._check_state(x)
        acc: dict[int, complex] = {}
        for t in self.terms:
            xs = t.local_index(x)
            base = x & ~t.mask
            vals = t.matrix[xs]
            for ys in np.flatnonzero(vals):
                y = base | int(t.spread[ys])
                acc[y] = acc.get(y, 0j) + complex(vals[ys])
        return sorted((y, v) for y, v in acc.items() if v != 0)

    def to_sparse(self, max_qubits: int = 22) -> sp.csr_matrix:
        if self.n > max_qubits:
            raise CapacityError(f"n={self.n} exceeds sparse cap {max_qubits}")
        dim = self.dim
        xs_all = np.arange(dim, dtype=np.int64)
        rows, cols, vals = [], [], []
        for t in self.terms:
            xs = t.local_index(xs_all)
            base = xs_all & ~np.int64(t.mask)
            for ys in range(2**t.size):
                col_vals = t.matrix[xs, ys]
                nz = col_vals != 0
                if not nz.any():
                    continue
                rows.append(xs_all[nz])
                cols.append(base[nz] | t.spread[ys])
                vals.append(col_vals[nz])
        dtype = float if self.is_real else complex
        if not rows:
            return sp.csr_matrix((dim, dim), dtype=dtype)
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
        if dtype is float:
            v = v.real
        return sp.csr_matrix((v, (r, c)), shape=(dim, dim), dtype=dtype)

    def to_dense(self, max_qubits: int = DENSE_MAX_QUBITS) -> np.ndarray:
        if self.n > max_qubits:
            raise CapacityError(f"n={self.n} exceeds dense cap {max_qubits}")
        return self.to_sparse(max_qubits).toarray()


def matrix_element(h: LocalHamiltonian, x: int, y: int) -> complex:
    return h.matrix_element(x, y)


def single(n: int, support: Sequence[int], matrix: np.ndarray) -> LocalHamiltonian:
    """Hamiltonian consisting of one term."""
    return LocalHamiltonian(n, (LocalTerm(tuple(support), matrix),))


def from_dense(matrix: np.ndarray) -> LocalHamiltonian:
    """Wrap a full ``2^n x 2^n`` Hermitian matrix as a single n-local term."""
    matrix = np.asarray(matrix)
    dim = matrix.shape[0]
    n = dim.bit_length() - 1
    if matrix.shape != (dim, dim) or 2**n != dim:
        raise InputError("matrix must be square with power-of-two dimension")
    return single(n, tuple(range(n)), matrix)
