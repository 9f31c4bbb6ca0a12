"""Two-layer networks, their evaluation, and the explicit constructions.

A :class:`TwoLayerNet` computes ``F(x) = sum_i a_i * sigma(<W_i, x> + b_i) + c``.
Rows may carry a multiplicity (``counts``): a row with count ``m`` stands for
``m`` identical hidden units. Constructions that emit many identical copies
(replication, unit splitting, pattern merging) use this instead of
materialising the copies, so ``width`` is the logical number of units and
``n_rows`` the number of stored rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import (
    ContractError,
    DeltaUnderflowError,
    SeparationFailureError,
    ShapeError,
    UnsupportedConstructionError,
)

DELTA_FLOOR = 1e-12


class Activation(Enum):
    RELU = ("relu", 1.0)
    SINE_PI = ("sinepi", math.pi)
    IDENTITY = ("identity", 1.0)

    def __init__(self, tag, lipschitz):
        self.tag = tag
        self.lipschitz = lipschitz

    def __call__(self, z):
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        if self is Activation.SINE_PI:
            return np.sin(np.pi * z)
        return np.asarray(z, dtype=float)

    def derivative(self, z):
        # subgradient of RELU at 0 is taken as 0
        if self is Activation.RELU:
            return (np.asarray(z) > 0).astype(float)
        if self is Activation.SINE_PI:
            return np.pi * np.cos(np.pi * z)
        return np.ones_like(np.asarray(z, dtype=float))

    @classmethod
    def from_tag(cls, tag):
        for act in cls:
            if act.tag == tag:
                return act
        raise ContractError(f"unknown activation tag {tag!r}")


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TwoLayerNet:
    inner_weights: np.ndarray
    inner_bias: np.ndarray
    outer_weights: np.ndarray
    outer_bias: float = 0.0
    activation: Activation = Activation.RELU
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        W = np.array(self.inner_weights, dtype=float)
        if W.ndim != 2:
            raise ShapeError(f"inner_weights must be 2-D, got shape {W.shape}")
        rows = W.shape[0]
        b = np.array(self.inner_bias, dtype=float).reshape(-1)
        a = np.array(self.outer_weights, dtype=float).reshape(-1)
        if b.shape != (rows,) or a.shape != (rows,):
            raise ShapeError(
                f"inconsistent shapes: W {W.shape}, b {b.shape}, a {a.shape}"
            )
        counts = np.ones(rows, dtype=np.int64) if self.counts is None else self.counts
        counts = np.array(counts, dtype=np.int64).reshape(-1)
        if counts.shape != (rows,) or np.any(counts < 1):
            raise ShapeError("counts must hold one positive integer per row")
        c = float(self.outer_bias)
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))
                and np.all(np.isfinite(a)) and math.isfinite(c)):
            raise ContractError("network parameters must be finite")
        if not isinstance(self.activation, Activation):
            raise ContractError(f"activation must be an Activation, got {self.activation!r}")
        object.__setattr__(self, "inner_weights", _frozen(W))
        object.__setattr__(self, "inner_bias", _frozen(b))
        object.__setattr__(self, "outer_weights", _frozen(a))
        object.__setattr__(self, "outer_bias", c)
        object.__setattr__(self, "counts", _frozen(counts, np.int64))

    @classmethod
    def constant(cls, n, c=0.0, activation=Activation.RELU):
        """Width-0 network that outputs ``c`` everywhere."""
        return cls(np.zeros((0, n)), np.zeros(0), np.zeros(0), c, activation)

    @property
    def input_dim(self):
        return self.inner_weights.shape[1]

    @property
    def n_rows(self):
        return self.inner_weights.shape[0]

    @property
    def width(self):
        return int(self.counts.sum())

    @property
    def effective_outer(self):
        return self.counts * self.outer_weights

    def preactivations(self, X):
        return X @ self.inner_weights.T + self.inner_bias

    def forward(self, X):
        """Evaluate on a batch ``X`` of shape (m, n)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ShapeError(f"expected inputs of shape (m, {self.input_dim}), got {X.shape}")
        hidden = self.activation(self.preactivations(X))
        return hidden @ self.effective_outer + self.outer_bias

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self.forward(x[None, :])[0])
        return self.forward(x)

    def box_constrained(self, bound=1.0):
        """True when every parameter lies in [-bound, bound]."""
        return bool(
            np.all(np.abs(self.inner_weights) <= bound)
            and np.all(np.abs(self.inner_bias) <= bound)
            and np.all(np.abs(self.outer_weights) <= bound)
            and abs(self.outer_bias) <= bound
        )

    def inner_in_box(self, bound=1.0):
        return bool(
            np.all(np.abs(self.inner_weights) <= bound)
            and np.all(np.abs(self.inner_bias) <= bound)
        )

    def expanded(self, max_width=10_000_000):
        """Same network with every multiplicity materialised as separate rows."""
        if np.all(self.counts == 1):
            return self
        if self.width > max_width:
            raise ContractError(f"refusing to expand width {self.width} > {max_width}")
        idx = np.repeat(np.arange(self.n_rows), self.counts)
        return TwoLayerNet(
            self.inner_weights[idx], self.inner_bias[idx], self.outer_weights[idx],
            self.outer_bias, self.activation,
        )

    def negate(self):
        return replace(self, outer_weights=-self.outer_weights, outer_bias=-self.outer_bias)

    def max_abs_parameter(self):
        parts = [abs(self.outer_bias)]
        for arr in (self.inner_weights, self.inner_bias, self.outer_weights):
            if arr.size:
                parts.append(float(np.max(np.abs(arr))))
        return max(parts)


def evaluate(net, x):
    return net(x)


def margin(net, x, y):
    if y not in (-1, 1):
        raise ContractError(f"label must be -1 or +1, got {y!r}")
    return y * net(x)


def clamp_eval(net, a, x):
    if not a > 0:
        raise ContractError(f"clamp level must be positive, got {a}")
    return np.clip(net(x), -a, a)


def _require_relu(net, what):
    if net.activation is not Activation.RELU:
        raise UnsupportedConstructionError(f"{what} needs RELU, got {net.activation.tag}")


def absorb_bias(net):
    """Fold the output bias into an extra unit ``Sgn(c) * RELU(0*x + |c|)``."""
    _require_relu(net, "absorb_bias")
    c = net.outer_bias
    n = net.input_dim
    return TwoLayerNet(
        np.vstack([net.inner_weights, np.zeros((1, n))]),
        np.append(net.inner_bias, abs(c)),
        np.append(net.outer_weights, 1.0 if c >= 0 else -1.0),
        0.0,
        net.activation,
        np.append(net.counts, 1),
    )


def replicate(net, target_width):
    """``k = floor(target_width / width)`` parallel copies, computing ``k * F``."""
    if net.outer_bias != 0.0:
        raise ContractError("replicate needs outer_bias == 0; call absorb_bias first")
    if net.width == 0:
        raise ContractError("cannot replicate a width-0 network")
    if target_width < net.width:
        raise ContractError(f"target width {target_width} < network width {net.width}")
    k = target_width // net.width
    return replace(net, counts=net.counts * k)


@dataclass(frozen=True, eq=False)
class LayeredNet:
    """Composition of (weights, bias, activation) layers and a final affine map."""

    layers: tuple
    out_weights: np.ndarray
    out_bias: float

    def __post_init__(self):
        prev = None
        for W, b, _ in self.layers:
            if W.shape[0] != b.shape[0] or (prev is not None and W.shape[1] != prev):
                raise ShapeError("incompatible layer dimensions")
            prev = W.shape[0]
        if prev is not None and self.out_weights.shape[0] != prev:
            raise ShapeError("output map does not match last layer")

    @property
    def depth(self):
        return len(self.layers) + 1

    def forward(self, X):
        h = np.asarray(X, dtype=float)
        for W, b, act in self.layers:
            h = act(h @ W.T + b)
        return h @ self.out_weights + self.out_bias

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self.forward(x[None, :])[0])
        return self.forward(x)

    def layer_norms(self):
        """L_{1,inf} norm of each affine map with its bias appended as a column."""
        norms = []
        for W, b, _ in self.layers:
            norms.append(float(np.max(np.abs(W).sum(axis=1) + np.abs(b))) if W.size else 0.0)
        norms.append(float(np.abs(self.out_weights).sum() + abs(self.out_bias)))
        return norms


def clamp_as_network(net, a, k=1):
    """Depth-3 network equal to ``clamp(F, -a, a)``.

    Uses ``RELU(F + a) - RELU(F - a) - a`` with the middle layer split into
    ``k`` copies scaled by ``1/k``.
    """
    if not a > 0:
        raise ContractError(f"clamp level must be positive, got {a}")
    if k < 1:
        raise ContractError(f"split factor must be >= 1, got {k}")
    eff = net.effective_outer
    c = net.outer_bias
    W2 = np.tile(eff / k, (2 * k, 1))
    b2 = np.concatenate([np.full(k, (c + a) / k), np.full(k, (c - a) / k)])
    out = np.concatenate([np.ones(k), -np.ones(k)])
    layers = (
        (net.inner_weights, net.inner_bias, net.activation),
        (W2, b2, Activation.RELU),
    )
    return LayeredNet(layers, out, -float(a))


def sine_expresser(n):
    """Width-1 ``sin(pi * (<1, x> - 0.5))`` network; margin 1 on the parity diagonal."""
    if n < 1:
        raise ContractError("n must be >= 1")
    return TwoLayerNet(np.ones((1, n)), [-0.5], [1.0], 0.0, Activation.SINE_PI)


def hat_delta(N, n):
    """Half-width from the memorisation proof, ``0.01 / (4 N^4 n) * sqrt(8/pi)``."""
    return 0.01 / (4.0 * N**4 * n) * math.sqrt(8.0 / math.pi)


def _min_gap(t):
    if t.size < 2:
        return math.inf
    return float(np.min(np.diff(np.sort(t))))


def memorize(points, labels, rng, max_retries=64, delta="gap"):
    """RELU network of width 3N with ``F(points[i]) = labels[i]``.

    Each point gets a hat ``(y/d) * (R(t - t_i - d) + R(t - t_i + d) - 2 R(t - t_i))``
    along a random unit direction ``w`` (``t = <w, x>``). A direction is accepted
    once the smallest projected gap is at least twice the proof's half-width.

    ``delta="gap"`` uses half the achieved gap as the hat half-width (never
    smaller than the proof value); ``delta="proof"`` uses the proof value and
    raises :class:`DeltaUnderflowError` when it is below 1e-12.
    """
    X = np.asarray(points, dtype=float)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 1:
        raise ShapeError("points must be (N, n) with one label each, N >= 1")
    N, n = X.shape
    if np.unique(X, axis=0).shape[0] != N:
        raise ContractError("memorize needs pairwise distinct points")
    d_proof = hat_delta(N, n)
    if delta == "proof" and d_proof < DELTA_FLOOR:
        raise DeltaUnderflowError(
            f"proof half-width {d_proof:.3g} is below the floor {DELTA_FLOOR:g} (N={N}, n={n})"
        )
    best = -math.inf
    for _ in range(max_retries):
        w = rng.standard_normal(n)
        w /= np.linalg.norm(w)
        t = X @ w
        gap = _min_gap(t)
        best = max(best, gap)
        if gap >= 2.0 * d_proof:
            break
    else:
        raise SeparationFailureError(
            f"no direction reached projection gap {2 * d_proof:.3g} in {max_retries} tries",
            best,
        )
    if delta == "proof":
        d = d_proof
    elif delta == "gap":
        d = d_proof if math.isinf(gap) else max(d_proof, gap / 2.0)
    else:
        raise ContractError(f"unknown delta mode {delta!r}")

    Wm = np.repeat(w[None, :], 3 * N, axis=0)
    b = np.empty(3 * N)
    a = np.empty(3 * N)
    b[0::3] = -(t + d)
    b[1::3] = -(t - d)
    b[2::3] = -t
    a[0::3] = y / d
    a[1::3] = y / d
    a[2::3] = -2.0 * y / d
    return TwoLayerNet(Wm, b, a, 0.0, Activation.RELU)


def normalize_units(net):
    """Move each row's inner scale into its outer weight so inner params fit the box.

    Exact for positively homogeneous activations.
    """
    if net.activation is Activation.SINE_PI:
        raise UnsupportedConstructionError("normalize_units needs a homogeneous activation")
    if net.n_rows == 0:
        return net
    scale = np.maximum(
        1.0, np.maximum(np.max(np.abs(net.inner_weights), axis=1), np.abs(net.inner_bias))
    )
    return replace(
        net,
        inner_weights=net.inner_weights / scale[:, None],
        inner_bias=net.inner_bias / scale,
        outer_weights=net.outer_weights * scale,
    )


def split_units(net):
    """Replace each unit with ``|a| > 1`` by ``ceil(|a|)`` copies carrying ``a / ceil(|a|)``."""
    if not net.inner_in_box():
        raise ContractError("inner parameters must lie in [-1, 1]; normalise or rescale first")
    a = net.outer_weights
    m = np.where(np.abs(a) > 1.0, np.ceil(np.abs(a)), 1.0).astype(np.int64)
    if np.all(m == 1):
        return net
    return replace(net, outer_weights=a / m, counts=net.counts * m)


def rescale_into_box(net):
    """Return ``(F / A^2, A)`` with ``A = max(1, largest |parameter|)``."""
    _require_relu(net, "rescale_into_box")
    A = max(1.0, net.max_abs_parameter())
    if A == 1.0:
        return net, 1.0
    scaled = replace(
        net,
        inner_weights=net.inner_weights / A,
        inner_bias=net.inner_bias / A,
        outer_weights=net.outer_weights / A,
        outer_bias=net.outer_bias / A**2,
    )
    return scaled, A


def _inputs_of(dataset):
    X = getattr(dataset, "X", dataset)
    return np.asarray(X, dtype=float)


def activation_patterns(net, dataset):
    """Boolean (rows, N) matrix: row i is unit i's on/off pattern over the data."""
    X = _inputs_of(dataset)
    return (net.preactivations(X) >= 0).T


def pattern_merge(net, dataset):
    """Average units that share an activation pattern on ``dataset``.

    Units are grouped by (pattern, sign of outer weight); each group becomes
    one row ``sgn * RELU(P x + Q)`` with ``P, Q`` the |a|-weighted means of the
    members and a multiplicity equal to the group size. Outputs on the dataset
    are unchanged and the box constraint is kept. ``n_rows`` of the result is
    the number of distinct merged units.
    """
    _require_relu(net, "pattern_merge")
    if not net.box_constrained():
        raise ContractError("pattern_merge needs a box-constrained network")
    if net.n_rows <= 1:
        return net
    pats = activation_patterns(net, dataset)
    sign = np.where(net.outer_weights >= 0, 1.0, -1.0)
    groups = {}
    for i in range(net.n_rows):
        groups.setdefault((pats[i].tobytes(), sign[i]), []).append(i)
    Ws, bs, as_, ms = [], [], [], []
    for (_, s), members in groups.items():
        idx = np.asarray(members)
        weight = net.counts[idx] * np.abs(net.outer_weights[idx])
        m = int(net.counts[idx].sum())
        Ws.append(weight @ net.inner_weights[idx] / m)
        bs.append(float(weight @ net.inner_bias[idx]) / m)
        as_.append(s)
        ms.append(m)
    return TwoLayerNet(np.array(Ws), bs, as_, net.outer_bias, net.activation, ms)


# serialisation ---------------------------------------------------------------

_HEADER = "two-layer v1"


def dumps(net):
    """Text form: header line, then ``a b w_1 ... w_n`` per unit in hex floats."""
    lines = [
        f"{_HEADER} n={net.input_dim} W={net.width} act={net.activation.tag} "
        f"c={float(net.outer_bias).hex()}"
    ]
    for i in range(net.n_rows):
        row = [net.outer_weights[i], net.inner_bias[i], *net.inner_weights[i]]
        line = " ".join(float(v).hex() for v in row)
        lines.extend([line] * int(net.counts[i]))
    return "\n".join(lines) + "\n"


def loads(text):
    lines = text.strip("\n").split("\n")
    head = lines[0]
    if not head.startswith(_HEADER):
        raise ContractError(f"not a two-layer v1 file: {head[:40]!r}")
    fields = dict(tok.split("=", 1) for tok in head[len(_HEADER):].split())
    n, W = int(fields["n"]), int(fields["W"])
    act = Activation.from_tag(fields["act"])
    c = float.fromhex(fields["c"])
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != W:
        raise ContractError(f"header says W={W} but found {len(body)} unit lines")
    vals = np.array([[float.fromhex(v) for v in ln.split()] for ln in body]).reshape(W, n + 2)
    return TwoLayerNet(vals[:, 2:], vals[:, 1], vals[:, 0], c, act)


def save(net, path):
    with open(path, "w") as f:
        f.write(dumps(net))


def load(path):
    with open(path) as f:
        return loads(f.read())


def random_net(n, width, rng, activation=Activation.RELU, scale=1.0):
    """Parameters drawn uniformly from [-scale, scale]."""
    u = lambda *shape: rng.uniform(-scale, scale, size=shape)  # noqa: E731
    return TwoLayerNet(u(width, n), u(width), u(width), float(u()), activation)
