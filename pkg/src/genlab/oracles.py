"""Brute-force and Monte-Carlo checks of the lemmas that can be tested at desk scale."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .bounds import coprime_prob_lower, pattern_count_bound
from .data import AlternatingLineSpec, LabeledDataset, alternating_line_dataset
from .errors import ContractError, HardAssertionError, UnsupportedConstructionError
from .nets import Activation, TwoLayerNet, activation_patterns, pattern_merge
from .train import LossFn, empirical_risk, grad


def _seed_from(rng):
    return int(rng.integers(0, 2**64, dtype=np.uint64))


# alternating line --------------------------------------------------------------


def altline_cap(M, N):
    # M + floor(N/2) for even N; odd N needs the ceiling since a constant already gets ceil(N/2)
    return M + (N + 1) // 2


@dataclass(frozen=True)
class AltlineResult:
    best_correct: int
    cap: int
    trials: int
    knife_edge_trials: int  # trials whose final net outputs exactly 0 somewhere


def altline_search(spec, M, trials, rng, iters=200):
    """Hunt for width-M RELU nets that beat the alternating-line cap.

    Each trial draws reduced line parameters (a_j, s_j = <W_j, 1>, b_j, c)
    uniformly from the box and hill-climbs one coordinate at a time on the
    number of correctly signed samples. Raises HardAssertionError if any trial
    exceeds ``altline_cap(M, N)``.
    """
    if trials < 1:
        raise ContractError("trials must be >= 1")
    if M < 0:
        raise ContractError("M must be >= 0")
    x = np.asarray(spec.knots, dtype=float)
    y = spec.labels()
    counts, knives = kernels.altline_trials(x, y, int(M), int(spec.n), int(trials),
                                            int(iters), _seed_from(rng))
    cap = altline_cap(M, spec.N)
    best = int(counts.max())
    if best > cap:
        raise HardAssertionError(
            f"width-{M} net classified {best} of {spec.N} alternating points (cap {cap})"
        )
    return AltlineResult(best, cap, int(trials), int(knives.sum()))


def line_net(params, M, n):
    """Full TwoLayerNet realising reduced line parameters with W_j = (s_j / n) 1."""
    p = np.asarray(params, dtype=float)
    a, s, b = p[0:3 * M:3], p[1:3 * M:3], p[2:3 * M:3]
    return TwoLayerNet(np.outer(s / n, np.ones(n)), b, a, p[3 * M], Activation.RELU)


# co-prime quadruples -------------------------------------------------------------


@dataclass(frozen=True)
class CoprimeResult:
    frequency: float
    half_width: float  # 3 sigma
    trials: int


def coprime_mc(n, N, trials, rng):
    """Fraction of N-draw samples from [n] containing a co-prime block of four."""
    if n < 3 or N < 4:
        raise ContractError("need n >= 3 and N >= 4")
    hits = kernels.coprime_trials(int(n), int(N), int(trials), _seed_from(rng))
    p = float(hits.mean())
    return CoprimeResult(p, 3.0 * math.sqrt(p * (1.0 - p) / trials), int(trials))


def coprime_exact(n, N, limit=2_000_000):
    """Exact probability by enumerating all n^N draws."""
    if n**N > limit:
        raise ContractError(f"n^N = {n**N} exceeds the enumeration limit {limit}")
    hits = 0
    for v in itertools.product(range(1, n + 1), repeat=N):
        for b in range(N // 4):
            d1 = v[4 * b] - v[4 * b + 1]
            d2 = v[4 * b + 2] - v[4 * b + 3]
            if d1 and d2 and math.gcd(d1, d2) == 1:
                hits += 1
                break
    return hits / n**N


# activation patterns ----------------------------------------------------------------


def pattern_count(net, dataset):
    """Number of distinct on/off patterns of the units over the dataset."""
    if net.activation is not Activation.RELU:
        raise UnsupportedConstructionError("pattern_count needs RELU")
    if net.n_rows == 0:
        return 0
    return int(np.unique(activation_patterns(net, dataset), axis=0).shape[0])


def check_pattern_bound(net, dataset):
    n, N = dataset.n, len(dataset)
    count = pattern_count(net, dataset)
    cap = pattern_count_bound(n, N)
    if count > cap:
        raise HardAssertionError(f"{count} activation patterns exceed the bound {cap:.4g}")
    return count, cap


# gradient check -------------------------------------------------------------------------


def _with_flat(net, theta):
    W, n = net.n_rows, net.input_dim
    return TwoLayerNet(
        theta[:W * n].reshape(W, n), theta[W * n:W * n + W], theta[W * n + W:W * n + 2 * W],
        theta[-1], net.activation,
    )


def fd_gradcheck(net, dataset, fn, h=1e-5):
    """Worst relative error between the analytic gradient and central differences.

    For RELU nets every pre-activation must stay clear of 0 by more than the
    largest change a step of size h can cause; otherwise ContractError.
    """
    net = net.expanded()
    if net.activation is Activation.RELU and net.n_rows:
        reach = h * (1.0 + float(np.abs(dataset.X).sum(axis=1).max()))
        closest = float(np.abs(net.preactivations(dataset.X)).min())
        if closest <= max(reach, 1e-6):
            raise ContractError(f"pre-activation {closest:.3g} too close to the RELU kink")
    g = grad(net, dataset, fn).flat()
    theta = np.concatenate([
        net.inner_weights.ravel(), net.inner_bias, net.outer_weights, [net.outer_bias]
    ])
    worst = 0.0
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        fd = (empirical_risk(_with_flat(net, tp), dataset, fn)[0]
              - empirical_risk(_with_flat(net, tm), dataset, fn)[0]) / (2 * h)
        rel = abs(fd - g[i]) / max(abs(fd), abs(g[i]), 1e-8)
        worst = max(worst, rel)
    return worst


# brute-force minimum ---------------------------------------------------------------------


def param_grid(m):
    """m + 1 evenly spaced values on [-1, 1]; grids for m and 2m nest exactly."""
    return -1.0 + 2.0 * (np.arange(m + 1) / m)


def brute_force_min_risk(dataset, W, grid_resolution, fn=LossFn.CROSS_ENTROPY):
    """Smallest mean risk over a full parameter grid (n = 1, W <= 2 only)."""
    if dataset.n != 1 or not 0 <= W <= 2:
        raise UnsupportedConstructionError("brute force is limited to n = 1 and W <= 2")
    if grid_resolution < 1:
        raise ContractError("grid_resolution must be >= 1")
    G = param_grid(grid_resolution)
    x = dataset.X[:, 0]
    y = dataset.y.astype(float)
    # unit outputs for every (w, b): (G^2, N); with outer weight: (G^3, N)
    wv, bv = np.meshgrid(G, G, indexing="ij")
    unit = np.maximum(wv.reshape(-1, 1) * x[None, :] + bv.reshape(-1, 1), 0.0)
    units = (G[:, None, None] * unit[None, :, :]).reshape(-1, len(x))
    best = math.inf
    if W == 0:
        heads = np.zeros((1, len(x)))
    elif W == 1:
        heads = units
    else:
        heads = None
    if heads is not None:
        for c in G:
            F = heads + c
            best = min(best, float(fn.value(F, y).mean(axis=1).min()))
        return best
    for first in units:
        base = first[None, :] + units
        for c in G:
            best = min(best, float(fn.value(base + c, y).mean(axis=1).min()))
    return best


# verification suite ----------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    hard: bool = False  # a failure here is a theorem-cap violation


def run_verify_suite(rng, scale=1.0):
    """Run every oracle at desk scale; ``scale`` multiplies the trial counts."""
    out = []
    trials = max(100, int(10_000 * scale))

    for M in (1, 2, 3):
        for N in (4, 6, 8):
            spec = AlternatingLineSpec(2, tuple(np.linspace(0.1, 0.9, N)))
            try:
                r = altline_search(spec, M, trials, rng)
                out.append(CheckResult(f"altline M={M} N={N}", True,
                                       f"best {r.best_correct} <= cap {r.cap}"))
            except HardAssertionError as exc:
                out.append(CheckResult(f"altline M={M} N={N}", False, str(exc), hard=True))

    lower = coprime_prob_lower(10, 29)
    r = coprime_mc(10, 29, max(1000, int(100_000 * scale)), rng)
    out.append(CheckResult("coprime n=10 N=29", r.frequency >= lower - r.half_width,
                           f"freq {r.frequency:.5f} vs lower {lower:.5f} (3sigma {r.half_width:.5f})"))
    exact = coprime_exact(3, 4)
    r = coprime_mc(3, 4, max(1000, int(100_000 * scale)), rng)
    out.append(CheckResult("coprime exact n=3 N=4", abs(r.frequency - exact) <= max(r.half_width, 1e-12),
                           f"mc {r.frequency:.5f} vs exact {exact:.5f}"))

    worst = 0.0
    try:
        for _ in range(max(10, int(1000 * scale))):
            n = int(rng.integers(1, 5))
            N = int(rng.integers(1, 21))
            W = int(rng.integers(1, 65))
            net = TwoLayerNet(rng.uniform(-1, 1, (W, n)), rng.uniform(-1, 1, W),
                              rng.uniform(-1, 1, W), float(rng.uniform(-1, 1)))
            ds = LabeledDataset(rng.random((N, n)), rng.choice([-1, 1], N))
            count, cap = check_pattern_bound(net, ds)
            merged = pattern_merge(net, ds)
            worst = max(worst, float(np.abs(merged.forward(ds.X) - net.forward(ds.X)).max()))
        out.append(CheckResult("pattern count bound", True, "all trials within bound"))
    except HardAssertionError as exc:
        out.append(CheckResult("pattern count bound", False, str(exc), hard=True))
    out.append(CheckResult("pattern merge exact on data", worst <= 1e-9, f"max diff {worst:.3g}"))

    net = TwoLayerNet(rng.uniform(-1, 1, (4, 3)), rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4),
                      0.1, Activation.SINE_PI)
    ds = LabeledDataset(rng.random((12, 3)), rng.choice([-1, 1], 12))
    err = fd_gradcheck(net, ds, LossFn.CROSS_ENTROPY)
    out.append(CheckResult("gradient check (sine)", err <= 1e-4, f"max rel err {err:.3g}"))
    return out
