"""Compiled per-walk loop; draws are bit-identical to :mod:`stoquastic.rng`."""
import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

OK = 0
RESTARTS_EXHAUSTED = 1
BAD_SCALING = 2


@njit(cache=True)
def _mix(z):
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _hash(key, a, b, c, nargs):
    h = key
    h = _mix(h ^ _mix(np.uint64(a) + _GOLDEN))
    h = _mix(h ^ _mix(np.uint64(b) + _GOLDEN))
    if nargs == 3:
        h = _mix(h ^ _mix(np.uint64(c) + _GOLDEN))
    return h


@njit(cache=True)
def _row(x, const, sizes, supports, masks, mats, spreads, dest, prob):
    """Fill the sorted nonzero row of G at ``x``; returns (count, row sum)."""
    diag = const
    cnt = 1
    for k in range(sizes.shape[0]):
        xs = 0
        for a in range(sizes[k]):
            xs |= ((x >> supports[k, a]) & 1) << a
        base = x & ~masks[k]
        for ys in range(1 << sizes[k]):
            v = mats[k, xs, ys]
            if ys == xs:
                diag += v
            elif v != 0.0:
                y = base | spreads[k, ys]
                # stable insertion keeps term order among equal destinations
                j = cnt
                while j > 1 and dest[j - 1] > y:
                    dest[j] = dest[j - 1]
                    prob[j] = prob[j - 1]
                    j -= 1
                dest[j] = y
                prob[j] = v
                cnt += 1
    # the diagonal entry is first in stable order among entries with y == x
    j = 0
    while j + 1 < cnt and dest[j + 1] < x:
        dest[j] = dest[j + 1]
        prob[j] = prob[j + 1]
        j += 1
    dest[j] = x
    prob[j] = diag
    total = 0.0
    for i in range(cnt):
        total += prob[i]
    return cnt, total


@njit(cache=True)
def run_walks(n, L, w, max_restarts, key_start, key_step, const, sizes, supports, masks, mats, spreads, tol):
    final = np.full(w, -1, dtype=np.int64)
    attempts = np.zeros(w, dtype=np.int64)
    leak_steps = np.zeros(L, dtype=np.int64)
    width = 1
    for k in range(sizes.shape[0]):
        width += 1 << sizes[k]
    dest = np.empty(width, dtype=np.int64)
    prob = np.empty(width, dtype=np.float64)
    shift = np.uint64(64 - n)
    scale = 1.0 / 9007199254740992.0
    for slot in range(w):
        a = 0
        while True:
            if a > max_restarts:
                attempts[slot] = a
                return RESTARTS_EXHAUSTED, final, attempts, leak_steps
            if n == 0:
                x = np.int64(0)
            else:
                x = np.int64(_hash(key_start, slot, a, 0, 2) >> shift)
            survived = True
            for t in range(L):
                cnt, total = _row(x, const, sizes, supports, masks, mats, spreads, dest, prob)
                if total > 1.0 + tol:
                    return BAD_SCALING, final, attempts, leak_steps
                u = np.float64(_hash(key_step, slot, a, t, 3) >> np.uint64(11)) * scale
                acc = 0.0
                chosen = -1
                for i in range(cnt):
                    if prob[i] < -tol:
                        return BAD_SCALING, final, attempts, leak_steps
                    acc += prob[i]
                    if acc > u:
                        chosen = i
                        break
                if chosen < 0:
                    leak_steps[t] += 1
                    survived = False
                    break
                x = dest[chosen]
            if survived:
                final[slot] = x
                attempts[slot] = a
                break
            a += 1
    return OK, final, attempts, leak_steps
