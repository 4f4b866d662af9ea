"""Post-selected random walks driven by the stochastic extension of G.

The walker lives on ``n`` system bits plus one ancilla bit.  From ``(x, 0)`` it
moves to ``(y, 0)`` with probability ``G[x, y]`` and leaks to ``(x, 1)`` with
probability ``1 - B_x`` where ``B_x`` is the row sum of G.  Only walks whose
ancilla never flips are kept.  Because the ``w`` walks are independent,
conditioning each one separately on survival is the same as conditioning
jointly, so a leaked walk is simply restarted with fresh randomness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as crng
from .errors import InputError, PostSelectionError, PreconditionError, ScalingError
from .gmatrix import WALK_SHIFT, GMatrix, to_g_matrix
from .hamiltonian import LocalHamiltonian

RESIDUAL_TOL = 1e-12
YES = "yes"
NO = "no"


@dataclass(frozen=True)
class WalkParams:
    L: int
    w: int
    seed: int = 0
    max_restarts: int = 1_000_000
    r_gap: float | None = None

    def __post_init__(self):
        if self.L < 1 or self.w < 1:
            raise InputError("walk length L and walk count w must be positive")
        if self.max_restarts < 0:
            raise InputError("max_restarts must be nonnegative")

    @classmethod
    def auto(cls, n: int, r_gap: float, c: float = 1.0, seed: int = 0, max_restarts: int = 1_000_000):
        """``L = ceil(5 n r / 2)`` and ``w = ceil(2 n^(2c) ln 6)``."""
        L = math.ceil(5 * n * r_gap / 2)
        w = math.ceil(2 * n ** (2 * c) * math.log(6))
        return cls(max(L, 1), max(w, 1), seed, max_restarts, r_gap)


@dataclass(frozen=True, eq=False)
class WalkOutcome:
    mu_est: float
    samples: list
    attempts: int
    success_rate: float
    flag_ok: bool
    params: WalkParams
    max_slot_attempts: int = 0
    leak_steps: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mu_est": self.mu_est,
            "samples": [int(s) for s in self.samples],
            "attempts": self.attempts,
            "success_rate": self.success_rate,
            "flag_ok": self.flag_ok,
            "max_slot_attempts": self.max_slot_attempts,
            # leak_steps[t] counts walks that leaked on step t+1
            "leak_steps": [int(v) for v in self.leak_steps],
            "params": {
                "L": self.params.L,
                "w": self.params.w,
                "seed": self.params.seed,
                "max_restarts": self.params.max_restarts,
                "r_gap": self.params.r_gap,
            },
        }


def _require_walk(g: GMatrix):
    if g.mode != WALK_SHIFT:
        raise PreconditionError("random walks need G built in walk_shift mode")


def row_sum(g: GMatrix, x: int) -> float:
    """``B_x = sum_y G[x, y]`` from the sparse row; must lie in [1/4, 1]."""
    b = g.row_sum(x)
    if b < 0.25 - RESIDUAL_TOL or b > 1.0 + RESIDUAL_TOL:
        raise ScalingError(f"row sum B_{x} = {b} outside [1/4, 1]; scale q = {g.scale} is too small")
    return b


def transition_probabilities(g: GMatrix, x: int) -> list[tuple[tuple[int, int], float]]:
    """Outgoing probabilities from ``(x, 0)``: the sparse row, then the leak bucket."""
    row = g.row(x)
    if any(v < -RESIDUAL_TOL for _, v in row):
        raise ScalingError(f"negative entry in row {x} of G")
    residual = 1.0 - sum(v for _, v in row)
    if residual < -RESIDUAL_TOL:
        raise ScalingError(f"row {x} of G sums above one (residual {residual})")
    out = [((y, 0), max(v, 0.0)) for y, v in row]
    out.append(((x, 1), max(residual, 0.0)))
    return out


def step(g: GMatrix, state: tuple[int, int], rng) -> tuple[int, int]:
    """One transition of the extended walk by inverse CDF.

    ``rng`` is a ``numpy.random.Generator`` or a float already drawn from [0, 1).
    """
    x, anc = state
    if anc != 0:
        raise PreconditionError("the walker has already leaked")
    u = float(rng) if isinstance(rng, (float, np.floating)) else float(rng.random())
    acc = 0.0
    probs = transition_probabilities(g, x)
    for target, p in probs[:-1]:
        acc += p
        if u < acc:
            return target
    return probs[-1][0]


class _BatchRows:
    """Vectorised row construction for many walkers at once."""

    def __init__(self, g: GMatrix):
        h = g.source
        if not h.is_real:
            raise PreconditionError("walks require a real (stoquastic) Hamiltonian")
        self.n = h.n
        self.const = 0.5
        self.terms = []
        for t in h.terms:
            m = -t.matrix.real / (2.0 * g.scale)
            if t.size == 0:
                self.const += m[0, 0]
                continue
            self.terms.append((t, m))

    def build(self, x: np.ndarray):
        """Return destinations, probabilities (sorted by destination) and ``B``."""
        m = x.shape[0]
        diag = np.full(m, self.const)
        dests = [x[:, None]]
        vals = []
        for t, mat in self.terms:
            xs = t.local_index(x)
            base = x & ~np.int64(t.mask)
            rows = mat[xs]
            diag += rows[np.arange(m), xs]
            off = rows.copy()
            off[np.arange(m), xs] = 0.0
            dests.append(base[:, None] | t.spread[None, :])
            vals.append(off)
        vals.insert(0, diag[:, None])
        dest = np.concatenate(dests, axis=1)
        prob = np.concatenate(vals, axis=1)
        order = np.argsort(dest, axis=1, kind="stable")
        dest = np.take_along_axis(dest, order, axis=1)
        prob = np.take_along_axis(prob, order, axis=1)
        if np.any(prob < -RESIDUAL_TOL):
            raise ScalingError("negative transition probability; is H stoquastic?")
        total = prob.sum(axis=1)
        if np.any(total > 1.0 + RESIDUAL_TOL):
            raise ScalingError("row sum of G exceeds one; scale q is too small for a walk")
        return dest, prob, total

    def row_sums(self, x: np.ndarray) -> np.ndarray:
        return self.build(x)[2]


    def packed(self):
        """Padded arrays for the compiled kernel."""
        count = len(self.terms)
        kmax = max((t.size for t, _ in self.terms), default=0)
        d = 2**kmax
        sizes = np.zeros(count, dtype=np.int64)
        supports = np.zeros((count, max(kmax, 1)), dtype=np.int64)
        masks = np.zeros(count, dtype=np.int64)
        mats = np.zeros((count, d, d))
        spreads = np.zeros((count, d), dtype=np.int64)
        for i, (t, mat) in enumerate(self.terms):
            j = t.size
            sizes[i] = j
            supports[i, :j] = t.support
            masks[i] = t.mask
            mats[i, : 2**j, : 2**j] = mat
            spreads[i, : 2**j] = t.spread
        return sizes, supports, masks, mats, spreads


def run_postselected(g: GMatrix, params: WalkParams, engine: str = "compiled") -> WalkOutcome:
    """Collect ``w`` walks of ``L`` steps that never leak, restarting leaked ones.

    Attempt ``a`` of walk slot ``i`` draws its start and step uniforms from the
    counters ``(i, a, t)``; the sample kept for slot ``i`` is its lowest-numbered
    surviving attempt.  ``engine="compiled"`` runs slots one after another in a
    numba loop; ``engine="numpy"`` advances blocks of attempts side by side.
    Both produce identical outcomes.
    """
    _require_walk(g)
    n = g.n
    if n > 62:
        raise InputError("walk engine addresses at most 62 qubits")
    rows = _BatchRows(g)
    if engine == "compiled":
        return _run_compiled(g, params, rows)
    if engine != "numpy":
        raise InputError(f"unknown walk engine {engine!r}")
    return _run_blocks(g, params, rows)


def _run_compiled(g: GMatrix, params: WalkParams, rows: _BatchRows) -> WalkOutcome:
    from . import _walk_kernel as kern

    status, final, attempts, leak_steps = kern.run_walks(
        g.n,
        params.L,
        params.w,
        params.max_restarts,
        np.uint64(crng.derive_key(params.seed, "walk", "start")),
        np.uint64(crng.derive_key(params.seed, "walk", "step")),
        rows.const,
        *rows.packed(),
        RESIDUAL_TOL,
    )
    if status == kern.BAD_SCALING:
        raise ScalingError("row of G has a negative entry or sums above one; scale q is too small")
    if status == kern.RESTARTS_EXHAUSTED:
        done = int((final >= 0).sum())
        rate = done / max(int(attempts.sum()) + done, 1)
        raise PostSelectionError(
            f"a walk slot exhausted {params.max_restarts} restarts (observed survival rate {rate:.3g})",
            success_rate=rate,
        )
    return _outcome(params, rows, final, attempts, leak_steps)


def _outcome(params, rows, final, attempts, leak_steps) -> WalkOutcome:
    w = params.w
    total_attempts = int(attempts.sum()) + w
    b = rows.row_sums(final)
    return WalkOutcome(
        mu_est=float(np.sum(b) / w),
        samples=final.tolist(),
        attempts=total_attempts,
        success_rate=w / total_attempts,
        flag_ok=True,
        params=params,
        max_slot_attempts=int(attempts.max()) + 1,
        leak_steps=leak_steps.tolist(),
    )


def _run_blocks(g: GMatrix, params: WalkParams, rows: _BatchRows, lane_budget: int = 1 << 15) -> WalkOutcome:
    n, L, w = g.n, params.L, params.w
    key_start = crng.derive_key(params.seed, "walk", "start")
    key_step = crng.derive_key(params.seed, "walk", "step")

    next_attempt = np.zeros(w, dtype=np.int64)
    final = np.full(w, -1, dtype=np.int64)
    leak_steps = np.zeros(L, dtype=np.int64)
    remaining = np.arange(w, dtype=np.int64)

    while remaining.size:
        per_slot = max(1, lane_budget // remaining.size)
        block = np.minimum(per_slot, params.max_restarts + 1 - next_attempt[remaining])
        lane_slot = np.repeat(remaining, block)
        offsets = np.arange(lane_slot.size) - np.repeat(np.cumsum(block) - block, block)
        lane_att = next_attempt[lane_slot] + offsets
        x = crng.bits(key_start, n, lane_slot, lane_att)
        leak_at = np.full(lane_slot.size, -1, dtype=np.int64)
        alive = np.arange(lane_slot.size)
        for t in range(L):
            dest, prob, _ = rows.build(x[alive])
            u = crng.uniforms(key_step, lane_slot[alive], lane_att[alive], t)
            choice = (np.cumsum(prob, axis=1) <= u[:, None]).sum(axis=1)
            leaked = choice >= prob.shape[1]
            stay = ~leaked
            x[alive[stay]] = dest[np.flatnonzero(stay), choice[stay]]
            leak_at[alive[leaked]] = t
            alive = alive[stay]
            if not alive.size:
                break

        # lowest surviving attempt per slot; lanes are grouped by slot in attempt order
        first_ok = np.full(w, np.iinfo(np.int64).max)
        np.minimum.at(first_ok, lane_slot[alive], lane_att[alive])
        counted = lane_att < first_ok[lane_slot]
        np.add.at(leak_steps, leak_at[counted], 1)

        done = remaining[first_ok[remaining] < np.iinfo(np.int64).max]
        winners = alive[lane_att[alive] == first_ok[lane_slot[alive]]]
        final[lane_slot[winners]] = x[winners]
        next_attempt[done] = first_ok[done]
        failed = remaining[first_ok[remaining] == np.iinfo(np.int64).max]
        next_attempt[failed] += block[np.searchsorted(remaining, failed)]
        if np.any(next_attempt[failed] > params.max_restarts):
            total = int(next_attempt.sum())
            rate = float(done.size + (w - remaining.size)) / max(total, 1)
            raise PostSelectionError(
                f"a walk slot exhausted {params.max_restarts} restarts "
                f"(observed survival rate {rate:.3g})",
                success_rate=rate,
            )
        remaining = failed

    return _outcome(params, rows, final, next_attempt, leak_steps)


def thresholds(q: float, p2: float) -> tuple[float, float]:
    """``mu_+ = 1/2`` and ``mu_- = (1 - 1/(q p2))/2``."""
    return 0.5, 0.5 * (1.0 - 1.0 / (q * p2))


def decide_gapped_lhmin(
    h: LocalHamiltonian,
    p2: float,
    r_gap: float,
    c: float = 1.0,
    seed: int = 0,
    *,
    q: float | None = None,
    L: int | None = None,
    w: int | None = None,
    max_restarts: int = 1_000_000,
) -> tuple[str, WalkOutcome]:
    """Decide ``lambda(H) <= 0`` versus ``lambda(H) >= 1/p2`` from a walk estimate.

    Returns the answer together with the walk outcome it was based on.
    """
    g = to_g_matrix(h, WALK_SHIFT, q=q)
    params = WalkParams.auto(h.n, r_gap, c, seed, max_restarts)
    if L is not None or w is not None:
        params = WalkParams(L or params.L, w or params.w, seed, max_restarts, r_gap)
    outcome = run_postselected(g, params)
    mu_plus, mu_minus = thresholds(g.scale, p2)
    answer = YES if outcome.mu_est >= 0.5 * (mu_plus + mu_minus) else NO
    return answer, outcome
