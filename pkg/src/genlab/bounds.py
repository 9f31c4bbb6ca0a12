"""Closed-form generalization bounds, sample thresholds and counting bounds.

Every logarithm is natural. Reports keep the raw value (possibly negative,
i.e. vacuous) next to the value clamped to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ContractError

SQRT5_PLUS_SQRT2 = math.sqrt(5.0) + math.sqrt(2.0)
LN4 = math.log(4.0)


def _require(cond, msg):
    if not cond:
        raise ContractError(msg)


@dataclass(frozen=True)
class BoundReport:
    raw: float
    terms: dict = field(default_factory=dict)

    @property
    def clamped(self):
        return min(1.0, max(0.0, self.raw))

    def rows(self):
        out = [(name, value) for name, value in self.terms.items()]
        out += [("raw", self.raw), ("clamped", self.clamped)]
        return out


@dataclass(frozen=True)
class Th1Inputs:
    n: int
    W0: int
    c: float
    W: int
    N: int
    delta: float
    Lp: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        _require(self.n >= 1, f"need n >= 1, got n={self.n}")
        _require(self.W0 >= 1, f"need W0 >= 1, got W0={self.W0}")
        _require(self.W >= self.W0 + 1, f"need W >= W0 + 1, got W={self.W}, W0={self.W0}")
        _require(self.c > 0, f"need c > 0, got c={self.c}")
        _require(self.N >= 1, f"need N >= 1, got N={self.N}")
        _require(0 < self.delta < 1, f"need 0 < delta < 1, got delta={self.delta}")
        _require(self.Lp >= 1, f"need Lp >= 1, got Lp={self.Lp}")
        _require(self.q >= 1, f"need q >= 1, got q={self.q}")


def _th1_terms(n, W0, c, W, N, delta, Lp, q):
    width = 8.0 * q * math.e * W0 / (W * c)
    rad = (8.0 * n * Lp * (1.0 + 4.0 * W0 / c) * SQRT5_PLUS_SQRT2
           * math.sqrt(math.log(4.0 * n)) / math.sqrt(N))
    conf = 6.0 * math.sqrt(math.log(2.0 / delta) / (2.0 * N))
    return {"width": width, "rademacher": rad, "confidence": conf}


def th1_lower_bound(inp):
    """Population-accuracy lower bound for (q-approximate) risk minimisers.

    raw = 1 - 8 q e W0/(W c) - 8 n Lp (1 + 4 W0/c)(sqrt5 + sqrt2) sqrt(ln 4n)/sqrt N
            - 6 sqrt(ln(2/delta)/(2N))
    """
    terms = _th1_terms(inp.n, inp.W0, inp.c, inp.W, inp.N, inp.delta, inp.Lp, inp.q)
    return BoundReport(1.0 - sum(terms.values()), terms)


def rademacher_bound(Lp, n, W, a, N):
    """Rademacher complexity bound for width-W two-layer nets clamped to [-a, a]."""
    _require(Lp >= 1, f"need Lp >= 1, got {Lp}")
    _require(a > 0, f"need a > 0, got {a}")
    _require(n >= 1 and W >= 0 and N >= 1, "need n >= 1, W >= 0, N >= 1")
    return (2.0 * Lp * (n + 1) * (W + 1 + a)
            * (math.sqrt(5.0 * LN4) + math.sqrt(2.0 * math.log(2.0 * n))) / math.sqrt(N))


def layered_rademacher(lipschitz, norms, d, n, N):
    """Rademacher bound for a depth-d layered net with per-layer L_{1,inf} norms."""
    _require(all(L >= 1 for L in lipschitz), "every Lipschitz constant must be >= 1")
    _require(all(cn >= 1 for cn in norms), "every layer norm must be >= 1")
    _require(d >= 1 and n >= 1 and N >= 1, "need d, n, N >= 1")
    return (math.prod(lipschitz) * math.prod(norms) / math.sqrt(N)
            * (math.sqrt((d + 3) * LN4) + math.sqrt(2.0 * math.log(2.0 * n))))


def vc_uniform_bound(d, N, delta):
    _require(d >= 1, f"need d >= 1, got {d}")
    _require(N >= d, f"need N >= d, got N={N}, d={d}")
    _require(0 < delta < 1, f"need 0 < delta < 1, got {delta}")
    return math.sqrt((8.0 * d * math.log(2.0 * math.e * N / d) + 8.0 * math.log(4.0 / delta)) / N)


@dataclass(frozen=True)
class RobBoundInputs:
    n: int
    W0: int
    W: int
    N0: int
    c0: float
    c1: float
    delta: float
    Lp: float = 1.0

    def __post_init__(self):
        _require(self.n >= 1, f"need n >= 1, got n={self.n}")
        _require(self.W0 >= 1, f"need W0 >= 1, got W0={self.W0}")
        _require(self.W >= self.W0 + 1, f"need W >= W0 + 1, got W={self.W}, W0={self.W0}")
        _require(self.N0 >= 1, f"need N0 >= 1, got N0={self.N0}")
        _require(self.c1 >= 0, f"need c1 >= 0, got c1={self.c1}")
        _require(0 < self.delta < 1, f"need 0 < delta < 1, got delta={self.delta}")
        _require(self.Lp >= 1, f"need Lp >= 1, got Lp={self.Lp}")


def robustness_upper_bound(inp):
    """Upper bound on robust accuracy of minimisers over the perturbation cloud.

    Terms are stored with the sign under which they are subtracted from 1, so
    the added penalties appear as negative entries.
    """
    s = inp.Lp * inp.W0 * inp.n
    terms = {
        "margin_gap": (inp.c0 - 2.0 * inp.c1) / (8.0 * s),
        "width": -(4.0 * inp.c1 / s) * (inp.W0 / inp.W + 1.0 / inp.W0),
        "confidence": -2.0 * math.sqrt(math.log(2.0 / inp.delta) / (2.0 * inp.N0)),
        "rademacher": -4.0 * (math.sqrt(4.0 * LN4) + math.sqrt(2.0 * math.log(2.0 * inp.n)))
        / math.sqrt(inp.N0),
    }
    return BoundReport(1.0 - sum(terms.values()), terms)


def sine_sample_threshold(n, delta):
    """Sample size past which the sine class fails to generalise on the parity diagonal."""
    _require(n > 2, f"need n > 2, got {n}")
    _require(0 < delta < 1, f"need 0 < delta < 1, got {delta}")
    return math.ceil(4.0 * math.log(delta / 2.0) / math.log(0.5 + 1.0 / n))


def coprime_prob_lower(n, N):
    """Lower bound on the chance that N uniform draws from [n] contain a co-prime quadruple."""
    _require(n >= 3, f"need n >= 3, got {n}")
    _require(N >= 4, f"need N >= 4, got {N}")
    return 1.0 - (0.5 + 1.0 / n) ** (N / 4.0 - 1.0)


def pattern_count_bound(n, N):
    """max{2^(n+1), (eN/(n+1))^(n+1)}: cap on distinct RELU sign patterns over N points."""
    _require(n >= 1 and N >= 1, "need n, N >= 1")
    return max(2.0 ** (n + 1), (math.e * N / (n + 1)) ** (n + 1))


def cor44_requirements(n, W0, c, Lp, eps, delta):
    """Smallest (W, N) making each subtracted term of the q=1 bound at most eps/3."""
    _require(0 < eps < 1, f"need 0 < eps < 1, got {eps}")
    _require(c > 0 and W0 >= 1 and n >= 1 and Lp >= 1, "invalid n, W0, c or Lp")
    _require(0 < delta < 1, f"need 0 < delta < 1, got {delta}")
    share = eps / 3.0

    def terms(W, N):
        return _th1_terms(n, W0, c, W, N, delta, Lp, 1.0)

    def smallest(guess, ok):
        k = max(1, math.ceil(guess))
        while not ok(k):
            k += 1
        while k > 1 and ok(k - 1):
            k -= 1
        return k

    W_min = smallest(24.0 * math.e * W0 / (c * eps), lambda W: terms(W, 1)["width"] <= share)
    W_min = max(W_min, W0 + 1)
    rad_at_1 = terms(W_min, 1)["rademacher"]
    N_rad = smallest((rad_at_1 / share) ** 2, lambda N: terms(W_min, N)["rademacher"] <= share)
    N_conf = smallest(162.0 * math.log(2.0 / delta) / eps**2,
                      lambda N: terms(W_min, N)["confidence"] <= share)
    return W_min, max(N_rad, N_conf)
