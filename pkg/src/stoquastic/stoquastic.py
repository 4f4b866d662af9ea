"""Stoquasticity checks and the bipartite Z basis change."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapacityError, InputError
from .hamiltonian import DENSE_MAX_QUBITS, LocalHamiltonian, LocalTerm

OFFDIAG_TOL = 1e-12
IMAG_TOL = 1e-12


@dataclass(frozen=True)
class StoquasticReport:
    is_stoquastic: bool
    is_termwise_stoquastic: bool
    # global (x, y, value) entries of H with x != y violating the sign rule
    violations: list = field(default_factory=list)
    # (term index, local x, local y, value) for the stored decomposition
    term_violations: list = field(default_factory=list)
    full_scan: bool = True

    def to_dict(self) -> dict:
        def enc(v):
            v = complex(v)
            return [v.real, v.imag]

        return {
            "is_stoquastic": self.is_stoquastic,
            "is_termwise_stoquastic": self.is_termwise_stoquastic,
            "full_scan": self.full_scan,
            "violations": [[int(x), int(y), enc(v)] for x, y, v in self.violations],
            "term_violations": [[int(i), int(x), int(y), enc(v)] for i, x, y, v in self.term_violations],
        }


def _bad(vals: np.ndarray, scale: float) -> np.ndarray:
    return (vals.real > OFFDIAG_TOL * scale) | (np.abs(vals.imag) > IMAG_TOL * scale)


def _term_scale(m: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(m), initial=0.0)))


def term_violations(h: LocalHamiltonian) -> list:
    out = []
    for i, t in enumerate(h.terms):
        m = t.matrix
        off = ~np.eye(m.shape[0], dtype=bool)
        bad = _bad(m, _term_scale(m)) & off
        for x, y in zip(*np.nonzero(bad)):
            out.append((i, int(x), int(y), complex(m[x, y])))
    return out


def check_stoquastic(h: LocalHamiltonian, termwise: bool = False) -> StoquasticReport:
    """Report off-diagonal entries that are positive or complex.

    Tolerances are ``1e-12`` relative to ``max(1, largest |entry|)`` so that
    gadget Hamiltonians with ``1e6``-scale couplings are judged fairly.
    With ``termwise=True`` only the local term matrices are scanned and the
    global verdict is inferred from them (termwise stoquastic implies
    stoquastic); otherwise the full ``2^n x 2^n`` matrix is scanned as well.
    """
    tv = term_violations(h)
    termwise_ok = not tv
    if termwise:
        if termwise_ok:
            return StoquasticReport(True, True, [], [], full_scan=False)
        if h.n > DENSE_MAX_QUBITS:
            return StoquasticReport(False, False, [], tv, full_scan=False)
    elif h.n > DENSE_MAX_QUBITS:
        raise CapacityError(f"full stoquasticity scan limited to n <= {DENSE_MAX_QUBITS}")
    mat = h.to_sparse().tocoo()
    scale = max(1.0, float(np.max(np.abs(mat.data), initial=0.0)))
    off = mat.row != mat.col
    bad = off & _bad(mat.data.astype(complex), scale)
    violations = sorted(
        (int(x), int(y), complex(v)) for x, y, v in zip(mat.row[bad], mat.col[bad], mat.data[bad])
    )
    return StoquasticReport(not violations, termwise_ok, violations, tv, full_scan=True)


def is_stoquastic_matrix(m: np.ndarray) -> bool:
    m = np.asarray(m)
    off = ~np.eye(m.shape[0], dtype=bool)
    return not np.any(_bad(m.astype(complex), _term_scale(m)) & off)


def bipartite_basis_change(h: LocalHamiltonian, coloring: Sequence[bool]) -> LocalHamiltonian:
    """Conjugate every term by ``Z`` on each qubit with ``coloring[i]`` true."""
    if len(coloring) != h.n:
        raise InputError(f"coloring has length {len(coloring)}, expected {h.n}")
    if not any(coloring):
        return h
    terms = []
    for t in h.terms:
        local_mask = 0
        for a, s in enumerate(t.support):
            if coloring[s]:
                local_mask |= 1 << a
        if local_mask == 0:
            terms.append(t)
            continue
        idx = np.arange(2**t.size)
        signs = 1 - 2 * (np.bitwise_count(idx & local_mask).astype(np.int64) & 1)
        terms.append(LocalTerm(t.support, signs[:, None] * t.matrix * signs[None, :]))
    return LocalHamiltonian(h.n, tuple(terms), h.k)
