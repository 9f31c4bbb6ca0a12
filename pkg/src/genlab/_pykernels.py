"""Numpy implementations of the hot loops; bit-identical to the compiled versions.

Every trial owns a splitmix64 stream seeded with ``mix64(base + t)``, so the
result of trial ``t`` does not depend on how trials are batched.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def trial_states(base, trials):
    with np.errstate(over="ignore"):
        return mix64(np.uint64(base) + np.arange(trials, dtype=np.uint64))


def next_uniform(states):
    """Advance every stream in place and return one double in [0, 1) per stream."""
    with np.errstate(over="ignore"):
        states += GOLDEN
    return (mix64(states) >> np.uint64(11)).astype(np.float64) * _INV53


def _line_outputs(P, M, x):
    # P: (T, 3M+1) as [a0, s0, b0, a1, s1, b1, ..., c]; x: (N,)
    acc = np.zeros((P.shape[0], x.shape[0]))
    for j in range(M):
        z = P[:, 3 * j + 1, None] * x[None, :] + P[:, 3 * j + 2, None]
        acc = acc + P[:, 3 * j, None] * np.where(z > 0, z, 0.0)
    return acc + P[:, 3 * M, None]


def _correct(P, M, x, y):
    F = _line_outputs(P, M, x)
    pred = np.where(F >= 0, 1, -1)
    return (pred == y[None, :]).sum(axis=1), np.any(F == 0, axis=1)


def altline_trials(x, y, M, n, trials, iters, base):
    """Random restart + coordinate hill climbing on the number of correct signs.

    Returns (final correct count per trial, knife-edge flag per trial).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    D = 3 * M + 1
    lo = np.full(D, -1.0)
    hi = np.full(D, 1.0)
    lo[1:3 * M:3] = -float(n)
    hi[1:3 * M:3] = float(n)
    st = trial_states(base, trials)
    P = np.empty((trials, D))
    for k in range(D):
        P[:, k] = lo[k] + (hi[k] - lo[k]) * next_uniform(st)
    cur, _ = _correct(P, M, x, y)
    rows = np.arange(trials)
    for _ in range(iters):
        u1 = next_uniform(st)
        u2 = next_uniform(st)
        u3 = next_uniform(st)
        k = np.minimum((u1 * D).astype(np.int64), D - 1)
        old = P[rows, k]
        span = hi[k] - lo[k]
        fresh = lo[k] + span * u3
        nudged = np.minimum(np.maximum(old + span * 0.1 * (2.0 * u3 - 1.0), lo[k]), hi[k])
        P[rows, k] = np.where(u2 < 0.5, fresh, nudged)
        cnt, _ = _correct(P, M, x, y)
        keep = cnt >= cur
        cur = np.where(keep, cnt, cur)
        P[rows, k] = np.where(keep, P[rows, k], old)
    final, knife = _correct(P, M, x, y)
    return final.astype(np.int64), knife.astype(np.uint8)


def coprime_trials(n, N, trials, base):
    """Per trial: 1 if some consecutive block of four draws has co-prime nonzero differences."""
    st = trial_states(base, trials)
    V = np.empty((trials, N), dtype=np.int64)
    for i in range(N):
        V[:, i] = 1 + np.minimum((next_uniform(st) * n).astype(np.int64), n - 1)
    blocks = N // 4
    if blocks == 0:
        return np.zeros(trials, dtype=np.uint8)
    B = V[:, :4 * blocks].reshape(trials, blocks, 4)
    d1 = B[:, :, 0] - B[:, :, 1]
    d2 = B[:, :, 2] - B[:, :, 3]
    ok = (d1 != 0) & (d2 != 0) & (np.gcd(d1, d2) == 1)
    return ok.any(axis=1).astype(np.uint8)
