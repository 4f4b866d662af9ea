"""Reference spectral computations for small systems."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CapacityError, ConvergenceError, InputError
from .gmatrix import GMatrix
from .hamiltonian import DENSE_MAX_QUBITS, LocalHamiltonian

YES = "yes"
NO = "no"
PROMISE_VIOLATED = "promise_violated"
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    lambda0: float
    lambda1: float
    gap: float
    ground_vector: np.ndarray
    method: str = "dense"

    def to_dict(self) -> dict:
        v = self.ground_vector
        out = {
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "gap": self.gap,
            "method": self.method,
        }
        if np.iscomplexobj(v):
            out["ground_vector_re"] = v.real.tolist()
            out["ground_vector_im"] = v.imag.tolist()
        else:
            out["ground_vector"] = v.tolist()
        return out


def sign_fix(v: np.ndarray) -> np.ndarray:
    """Scale ``v`` by a unit phase so that its largest-magnitude entry is positive real."""
    i = int(np.argmax(np.abs(v)))
    if v[i] == 0:
        return v
    phase = v[i] / abs(v[i])
    out = v / phase
    if np.iscomplexobj(out) and np.max(np.abs(out.imag), initial=0.0) == 0:
        out = out.real
    return out


def diagonalize_dense(h: LocalHamiltonian, max_qubits: int = DENSE_MAX_QUBITS) -> SpectralSummary:
    if h.n > max_qubits:
        raise CapacityError(f"dense diagonalisation capped at {max_qubits} qubits, got {h.n}")
    mat = h.to_dense(max_qubits)
    if h.dim == 1:
        e = float(mat[0, 0].real)
        return SpectralSummary(e, e, 0.0, np.ones(1))
    tol = DEGENERACY_TOL * max(1.0, h.norm_bound)
    count = 2
    while True:
        evals, evecs = scipy.linalg.eigh(mat, subset_by_index=[0, count - 1], driver="evr")
        if evals[-1] - evals[0] > tol or count == h.dim:
            break
        count = min(2 * count, h.dim)
    ground = evecs[:, evals - evals[0] <= tol]
    if ground.shape[1] == 1:
        v = ground[:, 0]
    else:
        # the ground-space projection of the all-ones vector; for stoquastic H
        # this is a positive combination of Perron vectors, hence nonnegative
        v = ground @ (ground.conj().T @ np.ones(h.dim))
        norm = np.linalg.norm(v)
        v = v / norm if norm > 1e-8 else ground[:, 0]
    return SpectralSummary(float(evals[0]), float(evals[1]), float(evals[1] - evals[0]), sign_fix(v))


def ground_energy(h: LocalHamiltonian) -> float:
    return diagonalize_dense(h).lambda0


def spectrum(h: LocalHamiltonian) -> np.ndarray:
    return scipy.linalg.eigvalsh(h.to_dense())


def dense_mu(g: GMatrix) -> float:
    """Largest eigenvalue of G from the dense ground energy of its source."""
    return 0.5 * (1.0 - ground_energy(g.source) / g.scale)


def largest_eigenvalue_power(g: GMatrix, tol: float = 1e-12, max_iters: int = 100_000, patience: int = 10):
    """Power iteration for the Perron root of G, started from the uniform vector.

    Converged once the Rayleigh quotient changes by less than ``tol`` (relative)
    for ``patience`` consecutive iterations.  Returns ``(mu, vector, iterations)``
    with ``vector`` entrywise nonnegative and of unit norm.
    """
    mat = g.to_sparse()
    dim = mat.shape[0]
    v = np.full(dim, 1.0 / np.sqrt(dim))
    mu = None
    calm = 0
    for it in range(1, max_iters + 1):
        w = mat @ v
        new_mu = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0, v, it
        v = w / norm
        if mu is not None and abs(new_mu - mu) <= tol * max(abs(new_mu), 1e-300):
            calm += 1
            if calm >= patience:
                return new_mu, np.maximum(v, 0.0), it
        else:
            calm = 0
        mu = new_mu
    raise ConvergenceError(f"power iteration did not converge in {max_iters} iterations", mu, v)


def decide_lhmin(h: LocalHamiltonian, delta: float) -> str:
    """Exact LH-MIN decision: ``yes`` if ``lambda <= 0``, ``no`` if ``lambda >= delta``."""
    if delta <= 0:
        raise InputError("delta must be positive")
    lam = ground_energy(h)
    if lam <= 0:
        return YES
    if lam >= delta:
        return NO
    return PROMISE_VIOLATED


def _power_sums(g: GMatrix, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Column sums of ``G^L`` and ``G^(L+1)`` by repeated dense products."""
    mat = g.to_dense()
    col = np.ones(mat.shape[0])
    for _ in range(L):
        col = col @ mat
    return col, col @ mat


def walk_ratio(g: GMatrix, L: int) -> float:
    """``sum_{x,y} G^(L+1)[x,y] / sum_{x,y} G^L[x,y]``: the mean of the walk estimate."""
    a, b = _power_sums(g, L)
    return float(b.sum() / a.sum())


def final_distribution(g: GMatrix, L: int) -> np.ndarray:
    """Law of ``x_L`` given survival: normalised column sums of ``G^L``."""
    a, _ = _power_sums(g, L)
    return a / a.sum()


def survival_probability(g: GMatrix, L: int) -> float:
    """Probability that one walk from a uniform start never leaks in ``L`` steps."""
    a, _ = _power_sums(g, L)
    return float(a.sum() / a.shape[0])


def g_top_eigenvalues(g: GMatrix) -> tuple[float, float]:
    s = diagonalize_dense(g.source)
    return 0.5 * (1.0 - s.lambda0 / g.scale), 0.5 * (1.0 - s.lambda1 / g.scale)


def gap_r(g: GMatrix) -> float:
    """``r`` with ``log2(mu0) - log2(mu1) = 1/r`` for the two largest eigenvalues of G."""
    mu0, mu1 = g_top_eigenvalues(g)
    if mu1 <= 0:
        return 1e-12
    gap = np.log2(mu0 / mu1)
    if gap <= 0:
        raise InputError("G has a degenerate top eigenvalue; the gap assumption fails")
    return float(1.0 / gap)
