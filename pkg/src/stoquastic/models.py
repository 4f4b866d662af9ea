"""Standard spin models used as test instances."""
from __future__ import annotations

import itertools
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .hamiltonian import X, Y, Z, LocalHamiltonian, LocalTerm, kron_local


def chain_edges(n: int, periodic: bool = False) -> list[tuple[int, int]]:
    edges = [(i, i + 1) for i in range(n - 1)]
    if periodic and n > 2:
        edges.append((0, n - 1))
    return edges


def cubic_edges(lx: int, ly: int, lz: int) -> list[tuple[int, int]]:
    """Open-boundary nearest-neighbour bonds; site ``(a,b,c)`` is ``a + lx*(b + ly*c)``."""
    def site(a, b, c):
        return a + lx * (b + ly * c)

    edges = []
    for a, b, c in itertools.product(range(lx), range(ly), range(lz)):
        if a + 1 < lx:
            edges.append((site(a, b, c), site(a + 1, b, c)))
        if b + 1 < ly:
            edges.append((site(a, b, c), site(a, b + 1, c)))
        if c + 1 < lz:
            edges.append((site(a, b, c), site(a, b, c + 1)))
    return edges


def checkerboard(n: int, edges: Iterable[tuple[int, int]]) -> list[bool]:
    """Proper 2-colouring of a bipartite graph; raises if the graph has an odd cycle."""
    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    colour: dict[int, bool] = {}
    for start in range(n):
        if start in colour:
            continue
        colour[start] = False
        stack = [start]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if u not in colour:
                    colour[u] = not colour[v]
                    stack.append(u)
                elif colour[u] == colour[v]:
                    raise InputError("graph is not bipartite")
    return [colour[i] for i in range(n)]


def transverse_ising(n: int, J: float = 1.0, h: float = 1.0, periodic: bool = False, edges=None):
    """``H = -J sum Z_i Z_j - h sum X_i``."""
    if n < 1:
        raise InputError("need at least one qubit")
    edges = chain_edges(n, periodic) if edges is None else list(edges)
    terms = [LocalTerm(e, -J * kron_local(Z, Z)) for e in edges if J != 0]
    terms += [LocalTerm((i,), -h * X) for i in range(n) if h != 0]
    return LocalHamiltonian(n, tuple(terms), k=2)


def heisenberg_afm(n: int | None = None, J: float = 1.0, edges=None, lattice=None):
    """``H = J sum (XX + YY + ZZ)`` over bonds, returned in the original basis.

    Pass ``lattice=(lx, ly, lz)`` for the cubic lattice, or explicit ``edges``;
    otherwise an open chain of ``n`` sites.
    """
    if lattice is not None:
        lx, ly, lz = lattice
        n = lx * ly * lz
        edges = cubic_edges(lx, ly, lz)
    if n is None:
        raise InputError("heisenberg_afm needs n, edges with n, or lattice")
    edges = chain_edges(n) if edges is None else list(edges)
    bond = J * (kron_local(X, X) + kron_local(Y, Y) + kron_local(Z, Z))
    return LocalHamiltonian(n, tuple(LocalTerm(e, bond) for e in edges), k=2)


def ferro_xy(n: int, p: float = 1.0, q: float = 1.0, edges=None):
    """``H = sum (-p XX - q YY)``; stoquastic when ``|q| <= p``."""
    edges = chain_edges(n) if edges is None else list(edges)
    bond = -p * kron_local(X, X) - q * kron_local(Y, Y)
    return LocalHamiltonian(n, tuple(LocalTerm(e, bond) for e in edges), k=2)


def ising_3d_classical(lattice: Sequence[int] = (2, 2, 2), couplings=None, seed: int | None = 0):
    """Classical ``H = sum J_ij Z_i Z_j`` on a cubic lattice with ``J_ij`` in {-1, 0, 1}.

    ``couplings`` may be a sequence aligned with :func:`cubic_edges`; otherwise
    couplings are drawn uniformly from {-1, 0, 1} with ``seed``.
    """
    lx, ly, lz = lattice
    edges = cubic_edges(lx, ly, lz)
    if couplings is None:
        couplings = np.random.default_rng(seed).integers(-1, 2, size=len(edges))
    couplings = [int(c) for c in couplings]
    if len(couplings) != len(edges):
        raise InputError("one coupling per bond expected")
    if any(c not in (-1, 0, 1) for c in couplings):
        raise InputError("couplings must lie in {-1, 0, 1}")
    zz = kron_local(Z, Z)
    terms = tuple(LocalTerm(e, c * zz) for e, c in zip(edges, couplings) if c != 0)
    return LocalHamiltonian(lx * ly * lz, terms, k=2)


def random_stoquastic(n: int, k: int = 2, n_terms: int | None = None, seed: int | None = None):
    """Random k-local termwise-stoquastic Hamiltonian.

    Each term has random real diagonal in [-1, 1] and nonpositive off-diagonal
    entries drawn from [-1, 0] with density one half.
    """
    rng = np.random.default_rng(seed)
    if n_terms is None:
        n_terms = 2 * n
    terms = []
    for _ in range(n_terms):
        support = tuple(sorted(rng.choice(n, size=k, replace=False)))
        d = 2**k
        off = -rng.uniform(0.0, 1.0, size=(d, d)) * (rng.uniform(size=(d, d)) < 0.5)
        off = np.triu(off, 1)
        m = off + off.T + np.diag(rng.uniform(-1.0, 1.0, size=d))
        terms.append(LocalTerm(support, m))
    return LocalHamiltonian(n, tuple(terms), k=k)


MODELS = {
    "transverse_ising": transverse_ising,
    "heisenberg_afm": heisenberg_afm,
    "ferro_xy": ferro_xy,
    "ising_3d_classical": ising_3d_classical,
    "random_stoquastic": random_stoquastic,
}


def model_builder(name: str, **params) -> LocalHamiltonian:
    try:
        build = MODELS[name]
    except KeyError:
        raise InputError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return build(**params)

