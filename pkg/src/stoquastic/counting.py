"""Trace-as-counting reduction and a simulated Goldwasser-Sipser lower-bound protocol.

A string ``s`` of ``(m+n)L`` bits packs ``t_1..t_L`` (``m`` bits each, at bit
offset ``i*m``) followed by ``x_1..x_L`` (``n`` bits each, at offset
``L*m + i*n``).  ``F(s) = prod_i <x_i|G(t_i)|x_{i+1}>`` with ``x_{L+1} = x_1``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import rng as crng
from .errors import CapacityError, InputError

BRUTE_FORCE_MAX_BITS = 26
MAX_OMEGA = 1 << 22
PROVERS = ("honest", "always_claim", "random_preimage")


# ---------------------------------------------------------------- binary ensemble


@dataclass(frozen=True, eq=False)
class BinaryEnsemble:
    """``G = 2^-m sum_t G(t)`` with 0/1 matrices ``G(t)``.

    Elements are truncated toward zero to ``m`` binary digits and capped at
    ``1 - 2^-m`` (the largest value with ``m`` digits after the point).
    """

    source: object
    m: int

    def __post_init__(self):
        if int(self.m) <= 0:
            raise InputError("m must be positive")
        if self.source.n > 12:
            raise CapacityError("binary ensemble tables limited to n <= 12")

    @property
    def n(self) -> int:
        return self.source.n

    @cached_property
    def numerators(self) -> np.ndarray:
        """Integer matrix ``p[x, y]`` with ``element(x, y) ~ p / 2^m``."""
        if hasattr(self.source, "to_dense"):
            g = np.asarray(self.source.to_dense(), dtype=float)
        else:
            dim = 2**self.n
            g = np.array([[self.source.element(x, y) for y in range(dim)] for x in range(dim)])
        if np.any(g < 0) or np.any(g > 1):
            raise InputError("ensemble elements must lie in [0, 1]")
        # multiplying by a power of two is exact, so floor truncates exactly
        p = np.floor(g * 2.0**self.m).astype(np.int64)
        return np.minimum(p, 2**self.m - 1)

    def truncated(self) -> np.ndarray:
        return self.numerators / 2.0**self.m

    def digit(self, j: int, x, y):
        """``d_j``: the j-th binary digit after the point (``j = 1`` most significant)."""
        return (self.numerators[x, y] >> (self.m - j)) & 1

    def member(self, t, x, y):
        """``<x|G(t)|y>``: digit ``d_j`` where ``t_j`` is the first set bit of ``t``.

        ``t_1`` is bit 0 of ``t``.  Works elementwise on integer arrays.
        """
        t = np.asarray(t, dtype=np.int64)
        low = t & -t
        j = np.where(t == 0, 0, np.log2(np.maximum(low, 1)).astype(np.int64) + 1)
        p = self.numerators[x, y]
        shift = np.where(j == 0, 0, self.m - j)
        return np.where(j == 0, 0, (p >> shift) & 1).astype(np.int64)


def binary_decompose(g, m: int) -> BinaryEnsemble:
    return BinaryEnsemble(g, int(m))


class DenseMatrixSource:
    """Wrap an explicit nonnegative ``2^n x 2^n`` matrix as an element oracle."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)
        dim = self.matrix.shape[0]
        self.n = dim.bit_length() - 1
        if self.matrix.shape != (dim, dim) or 2**self.n != dim:
            raise InputError("matrix must be square with power-of-two dimension")

    def element(self, x, y):
        return float(self.matrix[x, y])

    def to_dense(self):
        return self.matrix


# ---------------------------------------------------------------- counting instance


@dataclass(frozen=True, eq=False)
class CountingInstance:
    ensemble: BinaryEnsemble
    L: int
    mu_plus: float
    mu_minus: float

    def __post_init__(self):
        if self.L < 2 or self.L % 2:
            raise InputError("L must be an even integer >= 2")
        if not 0 < self.mu_minus < self.mu_plus:
            raise InputError("thresholds must satisfy 0 < mu_minus < mu_plus")

    @classmethod
    def with_separation(cls, ensemble: BinaryEnsemble, p1: int, mu_plus: float) -> "CountingInstance":
        """``L = 2 n p1`` and ``log2 mu_minus = log2 mu_plus - 1/p1``."""
        return cls(ensemble, 2 * ensemble.n * int(p1), mu_plus, mu_plus * 2.0 ** (-1.0 / p1))

    @property
    def n(self) -> int:
        return self.ensemble.n

    @property
    def m(self) -> int:
        return self.ensemble.m

    @property
    def kbits(self) -> int:
        return (self.m + self.n) * self.L

    @property
    def log2_large(self) -> float:
        return self.L * (self.m + math.log2(self.mu_plus))

    @property
    def log2_small(self) -> float:
        return self.L * (self.m + math.log2(self.mu_minus) + self.n / self.L)

    @property
    def LARGE(self) -> float:
        return 2.0**self.log2_large

    @property
    def SMALL(self) -> float:
        return 2.0**self.log2_small

    def unpack(self, s):
        """``(t, x)`` arrays of shape ``(..., L)`` from packed strings."""
        s = np.asarray(s, dtype=np.int64)
        m, n, L = self.m, self.n, self.L
        t = np.stack([(s >> (i * m)) & ((1 << m) - 1) for i in range(L)], axis=-1)
        x = np.stack([(s >> (L * m + i * n)) & ((1 << n) - 1) for i in range(L)], axis=-1)
        return t, x

    def pack(self, t, x) -> int:
        m, n, L = self.m, self.n, self.L
        out = 0
        for i in range(L):
            out |= int(t[i]) << (i * m)
            out |= int(x[i]) << (L * m + i * n)
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "L": self.L,
            "kbits": self.kbits,
            "mu_plus": self.mu_plus,
            "mu_minus": self.mu_minus,
            "log2_LARGE": self.log2_large,
            "log2_SMALL": self.log2_small,
        }


def _parse_s(instance: CountingInstance, s) -> int:
    k = instance.kbits
    if isinstance(s, str):
        if len(s) != k or set(s) - {"0", "1"}:
            raise InputError(f"s must be a bit string of length {k}")
        return sum(int(b) << i for i, b in enumerate(s))
    s = int(s)
    if not 0 <= s < 2**k:
        raise InputError(f"s does not fit in {k} bits")
    return s


def eval_F(instance: CountingInstance, s) -> int:
    """Membership bit of ``s`` in Omega; ``s`` is an int or a bit string."""
    s = _parse_s(instance, s)
    return int(eval_F_batch(instance, np.array([s]))[0])


def eval_F_batch(instance: CountingInstance, s: np.ndarray) -> np.ndarray:
    t, x = instance.unpack(s)
    out = np.ones(t.shape[:-1], dtype=np.int64)
    L = instance.L
    for i in range(L):
        out &= instance.ensemble.member(t[..., i], x[..., i], x[..., (i + 1) % L])
    return out


def count_omega_bruteforce(instance: CountingInstance, chunk: int = 1 << 20) -> int:
    """``|Omega|`` by evaluating ``F`` on every string."""
    k = instance.kbits
    if k > BRUTE_FORCE_MAX_BITS:
        raise CapacityError(f"brute force limited to (m+n)L <= {BRUTE_FORCE_MAX_BITS}, got {k}")
    total = 0
    for start in range(0, 2**k, chunk):
        s = np.arange(start, min(start + chunk, 2**k), dtype=np.int64)
        total += int(eval_F_batch(instance, s).sum())
    return total


def count_omega_trace(instance: CountingInstance) -> int:
    """``Tr(A^L)`` with ``A`` the integer numerator matrix, in exact arithmetic."""
    a = instance.ensemble.numerators.astype(object)
    acc = a
    for _ in range(instance.L - 1):
        acc = acc.dot(a)
    return int(np.trace(acc))


def enumerate_omega(instance: CountingInstance) -> np.ndarray:
    """All members of Omega, sorted, built cycle by cycle."""
    if count_omega_trace(instance) > MAX_OMEGA:
        raise CapacityError(f"|Omega| exceeds {MAX_OMEGA}")
    ens, n, L, m = instance.ensemble, instance.n, instance.L, instance.m
    ts = np.arange(2**m, dtype=np.int64)
    allowed = {}
    for x in range(2**n):
        for y in range(2**n):
            allowed[x, y] = ts[ens.member(ts, x, y) == 1]
    out = []
    for xs in itertools.product(range(2**n), repeat=L):
        lists = [allowed[xs[i], xs[(i + 1) % L]] for i in range(L)]
        if any(len(a) == 0 for a in lists):
            continue
        base = 0
        for i in range(L):
            base |= xs[i] << (L * m + i * n)
        grids = np.meshgrid(*lists, indexing="ij")
        s = np.full(grids[0].shape, base, dtype=np.int64)
        for i, g in enumerate(grids):
            s |= g << (i * m)
        out.append(s.ravel())
    if not out:
        return np.zeros(0, dtype=np.int64)
    return np.sort(np.concatenate(out))


# ---------------------------------------------------------------- linear hashing over GF(2)


@dataclass(frozen=True, eq=False)
class HashEnsemble:
    """``count`` random linear maps ``GF(2)^kbits -> GF(2)^b``.

    Matrix ``j`` is stored bit-packed as ``rows[j, i]``: the image of input bit
    ``i``, so ``h_j(s)`` is the XOR of the rows selected by the bits of ``s``.
    """

    kbits: int
    b: int
    rows: np.ndarray

    @classmethod
    def draw(cls, kbits: int, b: int, count: int, key: int) -> "HashEnsemble":
        if not 1 <= b <= 62 or not 1 <= kbits <= 62:
            raise CapacityError("hash sizes limited to 62 bits")
        rows = crng.bits(key, b, np.arange(count)[:, None], np.arange(kbits)[None, :])
        return cls(kbits, b, rows)

    @property
    def count(self) -> int:
        return self.rows.shape[0]

    def apply(self, j: int, s) -> np.ndarray:
        s = np.asarray(s, dtype=np.int64)
        out = np.zeros_like(s)
        for i in range(self.kbits):
            out ^= np.where((s >> i) & 1 == 1, self.rows[j, i], 0)
        return out

    def __post_init__(self):
        object.__setattr__(self, "_elim", {})

    def _eliminate(self, j: int):
        # Gaussian elimination over the input columns; each basis vector has
        # zeros at the pivots of all earlier ones, so reducing in insertion
        # order is exact
        if j in self._elim:
            return self._elim[j]
        basis = []  # (pivot bit, reduced column, input combination)
        null = []
        for i, c in enumerate(int(v) for v in self.rows[j]):
            combo = 1 << i
            for pbit, pval, pcombo in basis:
                if (c >> pbit) & 1:
                    c ^= pval
                    combo ^= pcombo
            if c:
                basis.append((c.bit_length() - 1, c, combo))
            else:
                null.append(combo)
        self._elim[j] = (basis, null)
        return basis, null

    def preimage(self, j: int, y: int, free_bits: int = 0) -> int | None:
        """A solution of ``h_j(s) = y``; ``free_bits`` chooses a point in the solution coset."""
        basis, null = self._eliminate(j)
        s = 0
        rem = int(y)
        for pbit, pval, pcombo in basis:
            if (rem >> pbit) & 1:
                rem ^= pval
                s ^= pcombo
        if rem:
            return None
        for a, v in enumerate(null):
            if (free_bits >> a) & 1:
                s ^= v
        return s

    def nullity(self, j: int) -> int:
        return len(self._eliminate(j)[1])

    def apply_many(self, js: np.ndarray, s: np.ndarray) -> np.ndarray:
        """``h_{js[i]}(s[i])`` elementwise."""
        js = np.asarray(js, dtype=np.int64)
        s = np.asarray(s, dtype=np.int64)
        out = np.zeros_like(s)
        for i in range(self.kbits):
            out ^= np.where((s >> i) & 1 == 1, self.rows[js, i], 0)
        return out

    def to_list(self) -> list:
        return [[int(v) for v in row] for row in self.rows]


def hash_length(instance: CountingInstance) -> int:
    """``b = ceil(log2 LARGE) + 3``."""
    return int(math.ceil(instance.log2_large - 1e-12)) + 3


# ---------------------------------------------------------------- provers


class HonestProver:
    """Answers with a genuine pre-image from Omega whenever one exists."""

    name = "honest"

    def __init__(self, instance: CountingInstance, omega: np.ndarray | None = None):
        self.instance = instance
        self.omega = enumerate_omega(instance) if omega is None else omega
        self._table = None

    def commit(self, hashes: HashEnsemble, key: int):
        table = {}
        for j in range(hashes.count - 1, -1, -1):
            img = hashes.apply(j, self.omega)
            # keep the smallest member for each image, lowest j wins
            order = np.lexsort((self.omega, img))
            img_s, om_s = img[order], self.omega[order]
            first = np.ones(len(img_s), dtype=bool)
            first[1:] = img_s[1:] != img_s[:-1]
            for y, s in zip(img_s[first].tolist(), om_s[first].tolist()):
                table[y] = (j, s)
        self._table = table

    def respond(self, y: int, slot: int):
        return self._table.get(int(y))


class AlwaysClaimProver(HonestProver):
    """Honest where possible, otherwise claims a forged linear pre-image under ``h_1``."""

    name = "always_claim"

    def commit(self, hashes, key):
        super().commit(hashes, key)
        self._hashes = hashes

    def respond(self, y, slot):
        got = super().respond(y, slot)
        if got is not None:
            return got
        s = self._hashes.preimage(0, int(y))
        return None if s is None else (0, s)


class RandomPreimageProver:
    """Ignores Omega: returns a uniformly chosen pre-image under a random ``h_j``."""

    name = "random_preimage"

    def __init__(self, instance: CountingInstance, omega=None):
        self.instance = instance

    def commit(self, hashes, key):
        self._hashes = hashes
        self._key = key

    def respond(self, y, slot):
        h = self._hashes
        j = int(crng.bits(self._key, 16, slot, 0)) % h.count
        free = int(crng.bits(self._key, 62, slot, 1)) & ((1 << h.nullity(j)) - 1)
        s = h.preimage(j, int(y), free)
        return None if s is None else (j, s)


def make_prover(name: str, instance: CountingInstance, omega=None):
    cls = {"honest": HonestProver, "always_claim": AlwaysClaimProver, "random_preimage": RandomPreimageProver}
    try:
        return cls[name](instance, omega)
    except KeyError:
        raise InputError(f"unknown prover {name!r}; choose from {PROVERS}") from None


# ---------------------------------------------------------------- verifier


def acceptance_threshold(instance: CountingInstance) -> float:
    """Geometric midpoint of the dense bound ``1/(8k)`` and sparse bound ``k/2^(n+2)``."""
    return 2.0 ** (-(instance.n + 5) / 2)


@dataclass
class ProtocolResult:
    accepts: int
    rejects: int
    mode: str
    b: int
    threshold: float
    hit_fractions: list
    transcripts: list = field(default_factory=list)

    @property
    def accept_rate(self) -> float:
        return self.accepts / max(self.accepts + self.rejects, 1)

    @property
    def accept(self) -> bool:
        return self.accepts * 2 > self.accepts + self.rejects

    def to_dict(self, with_transcripts: bool = True) -> dict:
        out = {
            "accept": self.accept,
            "accepts": self.accepts,
            "rejects": self.rejects,
            "accept_rate": self.accept_rate,
            "mode": self.mode,
            "b": self.b,
            "threshold": self.threshold,
            "hit_fractions": self.hit_fractions,
        }
        if with_transcripts:
            out["transcripts"] = self.transcripts
        return out


def _verify_claims(instance, hashes, ys, claims) -> list[bool]:
    ys = np.asarray(ys, dtype=np.int64)
    ok = np.array(
        [c is not None and 0 <= c[0] < hashes.count and 0 <= c[1] < 2**instance.kbits for c in claims], dtype=bool
    )
    js = np.array([c[0] if good else 0 for c, good in zip(claims, ok)], dtype=np.int64)
    ss = np.array([c[1] if good else 0 for c, good in zip(claims, ok)], dtype=np.int64)
    ok &= hashes.apply_many(js, ss) == ys
    ok &= eval_F_batch(instance, ss) == 1
    return ok.tolist()


def run_gs_protocol(
    instance: CountingInstance,
    prover: str = "honest",
    trials: int = 50,
    seed: int = 0,
    samples: int = 200,
    record: bool = True,
) -> ProtocolResult:
    """Simulate the hashing lower-bound protocol ``trials`` times.

    Per trial the verifier draws ``kbits`` hash matrices, then ``samples``
    random targets ``y``; the prover answers each with ``(j, s)`` or nothing.
    A claim counts when ``h_j(s) = y`` and ``F(s) = 1``; the verifier accepts
    when the hit fraction reaches :func:`acceptance_threshold`.  If
    ``b > kbits`` the verifier samples ``s`` directly and accepts when the
    density of Omega reaches the geometric midpoint of ``LARGE`` and ``SMALL``
    over ``2^kbits``.
    """
    k = instance.kbits
    if k > BRUTE_FORCE_MAX_BITS:
        raise CapacityError(f"protocol simulation limited to (m+n)L <= {BRUTE_FORCE_MAX_BITS}")
    b = hash_length(instance)
    transcripts = []
    fractions = []
    accepts = 0
    if b > k:
        thr = 2.0 ** ((instance.log2_large + instance.log2_small) / 2 - k)
        for trial in range(trials):
            key = crng.derive_key(seed, "amproto", "direct", trial)
            s = crng.bits(key, k, np.arange(samples))
            hits = eval_F_batch(instance, s)
            frac = float(hits.mean())
            ok = frac >= thr
            accepts += ok
            fractions.append(frac)
            if record:
                transcripts.append({"trial": trial, "samples": s.tolist(), "hits": hits.tolist(), "accept": bool(ok)})
        return ProtocolResult(accepts, trials - accepts, "direct", b, thr, fractions, transcripts)

    thr = acceptance_threshold(instance)
    omega = enumerate_omega(instance) if prover in ("honest", "always_claim") else None
    p = make_prover(prover, instance, omega)
    for trial in range(trials):
        hkey = crng.derive_key(seed, "amproto", "hash", trial)
        hashes = HashEnsemble.draw(k, b, k, hkey)
        p.commit(hashes, crng.derive_key(seed, "amproto", "prover", trial))
        ys = crng.bits(crng.derive_key(seed, "amproto", "challenge", trial), b, np.arange(samples))
        claims = [p.respond(int(y), i) for i, y in enumerate(ys)]
        verdicts = _verify_claims(instance, hashes, ys, claims)
        frac = sum(verdicts) / samples
        ok = frac >= thr
        accepts += ok
        fractions.append(frac)
        if record:
            transcripts.append(
                {
                    "trial": trial,
                    "hashes": hashes.to_list(),
                    "challenges": ys.tolist(),
                    "claims": [None if c is None else [int(c[0]), int(c[1])] for c in claims],
                    "verdicts": verdicts,
                    "accept": bool(ok),
                }
            )
    return ProtocolResult(accepts, trials - accepts, "hashing", b, thr, fractions, transcripts)


def replay_transcript(instance: CountingInstance, entry: dict, b: int, threshold: float) -> bool:
    """Re-check one recorded hashing trial from its transcript alone."""
    rows = np.array(entry["hashes"], dtype=np.int64)
    hashes = HashEnsemble(instance.kbits, b, rows)
    claims = [None if c is None else tuple(c) for c in entry["claims"]]
    verdicts = _verify_claims(instance, hashes, entry["challenges"], claims)
    if verdicts != entry["verdicts"]:
        raise InputError("transcript verdicts do not replay")
    return sum(verdicts) / len(verdicts) >= threshold
