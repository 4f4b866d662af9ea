"""The nonnegative matrix G = (I - H/scale)/2 attached to a stoquastic H."""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse as sp

from .errors import InputError, NotStoquasticError
from .hamiltonian import LocalHamiltonian
from .stoquastic import StoquasticReport, check_stoquastic

NORM_SHIFT = "norm_shift"
WALK_SHIFT = "walk_shift"
MODES = (NORM_SHIFT, WALK_SHIFT)


def walk_scale(n: int, k: int, p1: float) -> float:
    """``q(n) = 2 max(1, 2^k C(n,k) p1)``."""
    return 2.0 * max(1.0, 2**k * comb(n, k) * p1)


def default_p1(h: LocalHamiltonian) -> float:
    """Largest term norm, raised if needed so that ``q`` still bounds every row.

    The usual counting argument assumes at most ``C(n,k)`` terms.  Decompositions
    that keep several terms per subset (or many small terms) can exceed that,
    so ``p1`` is lifted to ``row_abs_bound / (2^k C(n,k))`` when larger.
    """
    k = max(h.k, 1)
    pmax = max((t.norm for t in h.terms), default=0.0)
    return max(pmax, h.row_abs_bound / (2**k * comb(h.n, k)))


@dataclass(frozen=True, eq=False)
class GMatrix:
    """Implicit ``G = (I - H/scale)/2`` with element and row oracles."""

    source: LocalHamiltonian
    scale: float
    mode: str = NORM_SHIFT

    @property
    def n(self) -> int:
        return self.source.n

    def element(self, x: int, y: int) -> float:
        v = -self.source.matrix_element(x, y).real / (2 * self.scale)
        if x == y:
            v += 0.5
        return v

    def row(self, x: int) -> list[tuple[int, float]]:
        """Nonzero ``(y, G[x, y])`` sorted by ``y``; always includes the diagonal."""
        x = int(x)
        entries = {y: -v.real / (2 * self.scale) for y, v in self.source.row(x)}
        entries[x] = entries.get(x, 0.0) + 0.5
        return sorted((y, v) for y, v in entries.items() if v != 0 or y == x)

    def row_sum(self, x: int) -> float:
        return float(sum(v for _, v in self.row(x)))

    def to_sparse(self) -> sp.csr_matrix:
        h = self.source.to_sparse().real
        return (0.5 * (sp.identity(h.shape[0], format="csr") - h / self.scale)).tocsr()

    def to_dense(self) -> np.ndarray:
        h = self.source.to_dense()
        return 0.5 * (np.eye(h.shape[0]) - h.real / self.scale)


def to_g_matrix(
    h: LocalHamiltonian,
    mode: str = NORM_SHIFT,
    *,
    p1: float | None = None,
    q: float | None = None,
    check: bool = True,
) -> GMatrix:
    """Build G from a stoquastic H.

    ``norm_shift`` divides by ``C = sum_S ||H_S||``.  ``walk_shift`` divides by
    ``q(n)`` computed from ``p1`` (default: :func:`default_p1`), unless ``q`` is
    given explicitly.
    """
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}; expected one of {MODES}")
    if check:
        report: StoquasticReport = check_stoquastic(h, termwise=True)
        if not report.is_stoquastic:
            raise NotStoquasticError("G requires a stoquastic Hamiltonian", report)
    if q is not None:
        scale = float(q)
    elif mode == NORM_SHIFT:
        scale = h.norm_bound
    else:
        scale = walk_scale(h.n, max(h.k, 1), default_p1(h) if p1 is None else p1)
    if scale <= 0:
        # H = 0: any positive divisor gives G = I/2
        scale = 1.0
    return GMatrix(h, float(scale), mode)
