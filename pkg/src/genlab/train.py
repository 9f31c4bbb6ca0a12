"""Losses, gradients, clipped gradient-descent ERM and accuracy estimates."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit

from .data import DistributionSpec, LabeledDataset, make_rng, sample_dataset
from .errors import ContractError, HardAssertionError, TrainingDivergedError
from .nets import Activation, TwoLayerNet

log = logging.getLogger(__name__)


class LossFn(Enum):
    CROSS_ENTROPY = "cross_entropy"
    ABS_ERROR = "abs_error"
    SQUARED_ERROR = "squared_error"
    NEG_MARGIN = "neg_margin"

    def value(self, f, y):
        f = np.asarray(f, dtype=float)
        if self is LossFn.CROSS_ENTROPY:
            m = y * f
            return np.maximum(-m, 0.0) + np.log1p(np.exp(-np.abs(m)))
        if self is LossFn.ABS_ERROR:
            return np.abs(f - y)
        if self is LossFn.SQUARED_ERROR:
            return (f - y) ** 2
        return -y * f

    def derivative(self, f, y):
        """d loss / d f."""
        f = np.asarray(f, dtype=float)
        if self is LossFn.CROSS_ENTROPY:
            return -y * expit(-y * f)
        if self is LossFn.ABS_ERROR:
            return np.sign(f - y)
        if self is LossFn.SQUARED_ERROR:
            return 2.0 * (f - y)
        return -y * np.ones_like(f)


def loss(fn, f, y):
    if y not in (-1, 1):
        raise ContractError(f"label must be -1 or +1, got {y!r}")
    if not math.isfinite(f):
        raise ContractError(f"network output must be finite, got {f!r}")
    return float(fn.value(f, y))


def _require_nonempty(dataset):
    if len(dataset) == 0:
        raise ContractError("dataset is empty")


def empirical_risk(net, dataset, fn):
    """Return (mean, sum) of the loss over the dataset."""
    _require_nonempty(dataset)
    per = fn.value(net.forward(dataset.X), dataset.y)
    total = float(np.sum(per))
    return total / len(dataset), total


@dataclass
class Gradient:
    inner_weights: np.ndarray
    inner_bias: np.ndarray
    outer_weights: np.ndarray
    outer_bias: float

    def flat(self):
        return np.concatenate([
            self.inner_weights.ravel(), self.inner_bias, self.outer_weights, [self.outer_bias]
        ])


def _grad_arrays(W, b, a, c, act, X, y, fn):
    Z = X @ W.T + b
    H = act(Z)
    F = H @ a + c
    g = fn.derivative(F, y) / X.shape[0]
    dZ = np.outer(g, a) * act.derivative(Z)
    return dZ.T @ X, dZ.sum(axis=0), H.T @ g, float(g.sum())


def grad(net, dataset, fn):
    """Gradient of the mean empirical risk with respect to every parameter."""
    _require_nonempty(dataset)
    if np.any(net.counts != 1):
        raise ContractError("grad needs one row per unit; call net.expanded() first")
    dW, db, da, dc = _grad_arrays(
        net.inner_weights, net.inner_bias, net.outer_weights, net.outer_bias,
        net.activation, dataset.X, dataset.y.astype(float), fn,
    )
    return Gradient(dW, db, da, dc)


def init_net(n, width, rng, init_scale=0.5, activation=Activation.RELU):
    """Parameters uniform in [-init_scale, init_scale]."""
    if not 0 < init_scale <= 1:
        raise ContractError("init_scale must be in (0, 1]")
    u = lambda *s: rng.uniform(-init_scale, init_scale, size=s)  # noqa: E731
    return TwoLayerNet(u(width, n), u(width), u(width), float(u()), activation)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int | None = None  # None means full batch
    clip_box: bool = True
    seed: int = 0
    init_scale: float = 0.5

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ContractError("learning_rate must be positive")
        if self.epochs < 1:
            raise ContractError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ContractError("batch_size must be >= 1")
        if not 0 < self.init_scale <= 1:
            raise ContractError("init_scale must be in (0, 1]")


@dataclass
class TrainReport:
    risk_trajectory: list = field(default_factory=list)
    final_risk_mean: float = math.nan
    final_risk_sum: float = math.nan
    margin_min: float = math.nan
    margin_mean: float = math.nan
    effective_q: float | None = None
    steps: int = 0
    wall_time: float = 0.0


def train_erm(net0, dataset, fn, config, expresser=None, on_step=None):
    """Mini-batch gradient descent on the mean risk, clipping to [-1, 1] after every step.

    ``expresser=(W0, c)`` fills ``effective_q`` in the report. ``on_step`` is
    called with the current network after every step (for instrumentation).
    """
    _require_nonempty(dataset)
    if config.clip_box and not net0.box_constrained():
        raise ContractError("initial network must be box-constrained when clip_box is on")
    start = time.perf_counter()
    net0 = net0.expanded()
    W = np.array(net0.inner_weights)
    b = np.array(net0.inner_bias)
    a = np.array(net0.outer_weights)
    c = float(net0.outer_bias)
    act = net0.activation
    X, y = dataset.X, dataset.y.astype(float)
    N = len(dataset)
    bs = N if config.batch_size is None else min(config.batch_size, N)
    rng = make_rng(config.seed)
    lr = config.learning_rate
    report = TrainReport()

    def snapshot():
        return TwoLayerNet(W, b, a, c, act)

    last_good = snapshot()
    # divergence is detected explicitly below
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.epochs):
            order = np.arange(N) if bs == N else rng.permutation(N)
            for lo in range(0, N, bs):
                idx = order[lo:lo + bs]
                dW, db, da, dc = _grad_arrays(W, b, a, c, act, X[idx], y[idx], fn)
                W -= lr * dW
                b -= lr * db
                a -= lr * da
                c -= lr * dc
                if config.clip_box:
                    np.clip(W, -1.0, 1.0, out=W)
                    np.clip(b, -1.0, 1.0, out=b)
                    np.clip(a, -1.0, 1.0, out=a)
                    c = min(1.0, max(-1.0, c))
                if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))
                        and np.all(np.isfinite(a)) and math.isfinite(c)):
                    raise TrainingDivergedError(
                        f"non-finite parameters after step {report.steps + 1}", last_good
                    )
                report.steps += 1
                current = snapshot()
                if config.clip_box and not current.box_constrained():
                    raise HardAssertionError("parameter left [-1, 1] after clipping")
                if on_step is not None:
                    on_step(current)
                last_good = current
            report.risk_trajectory.append(empirical_risk(snapshot(), dataset, fn)[0])

    net = snapshot()
    report.final_risk_mean, report.final_risk_sum = empirical_risk(net, dataset, fn)
    margins = y * net.forward(X)
    report.margin_min = float(margins.min())
    report.margin_mean = float(margins.mean())
    if expresser is not None:
        W0, cc = expresser
        report.effective_q = effective_q(report.final_risk_sum, N, net.width, W0, cc)
    report.wall_time = time.perf_counter() - start
    return net, report


def effective_q(risk_sum, N, W, W0, c):
    """q-hat: empirical risk over the replication construction's risk ``N ln(1 + e^{-kc})``."""
    if W < W0 + 1:
        raise ContractError(f"need W >= W0 + 1, got W={W}, W0={W0}")
    if not c > 0:
        raise ContractError("confidence c must be positive")
    if risk_sum < 0:
        raise ContractError("risk_sum must be non-negative")
    k = W // (W0 + 1)
    denom = N * math.log1p(math.exp(-k * c))
    if denom == 0.0:
        log.warning("effective_q denominator underflowed (k*c = %g); returning inf", k * c)
        return math.inf
    return risk_sum / denom


def predict(net, X):
    """Sgn(F) with Sgn(0) = +1."""
    return np.where(net.forward(X) >= 0, 1, -1)


def accuracy(net, dataset):
    _require_nonempty(dataset)
    return float(np.mean(predict(net, dataset.X) == dataset.y))


def hoeffding_half_width(M, alpha=0.01):
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * M))


def population_accuracy(net, spec, M, rng):
    """Monte-Carlo accuracy on M fresh draws with its 99% Hoeffding half-width."""
    if M < 100:
        raise ContractError("M must be >= 100")
    return accuracy(net, sample_dataset(spec, M, rng)), hoeffding_half_width(M)


# robust accuracy ------------------------------------------------------------------


@dataclass(frozen=True)
class AttackConfig:
    restarts: int = 4
    steps: int = 40
    step_size: float | None = None  # default 2.5 * eps / steps
    samples: int = 1000  # draws used when attacking a distribution


def input_gradient(net, X):
    """dF/dx for every row of X."""
    Z = net.preactivations(X)
    return (net.activation.derivative(Z) * net.effective_outer) @ net.inner_weights


def _project(x, x0, eps):
    d = x - x0
    norm = np.linalg.norm(d, axis=1, keepdims=True)
    scale = np.where(norm > eps, eps / np.maximum(norm, 1e-300), 1.0)
    return np.clip(x0 + d * scale, 0.0, 1.0)


def _misclassified(F, y):
    return np.where(F >= 0, 1, -1) != y


def pgd_attack(net, X, y, eps, attack, rng):
    """Search the eps-ball (within the cube) for points lowering y*F.

    Returns (fooled mask, lowest-margin point found per sample, its margin).
    Restart 0 starts at the clean point, later restarts at a random point in the ball.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    N, n = X.shape
    step = attack.step_size if attack.step_size is not None else 2.5 * eps / attack.steps
    best_x = X.copy()
    F0 = net.forward(X)
    best_m = y * F0
    fooled = _misclassified(F0, y)
    for r in range(max(1, attack.restarts)):
        if r == 0:
            x = X.copy()
        else:
            d = rng.standard_normal((N, n))
            d /= np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-300)
            x = _project(X + d * (eps * rng.random((N, 1)) ** (1.0 / n)), X, eps)
        for _ in range(attack.steps):
            g = y[:, None] * input_gradient(net, x)
            gn = np.linalg.norm(g, axis=1, keepdims=True)
            x = _project(x - step * g / np.where(gn > 0, gn, 1.0), X, eps)
            F = net.forward(x)
            m = y * F
            better = m < best_m
            best_m = np.where(better, m, best_m)
            best_x[better] = x[better]
            fooled |= _misclassified(F, y)
    return fooled, best_x, best_m


def _attack_points(data, attack, rng):
    if isinstance(data, DistributionSpec):
        return sample_dataset(data, attack.samples, rng)
    if isinstance(data, LabeledDataset):
        return data
    raise ContractError("expected a LabeledDataset or DistributionSpec")


def robust_accuracy_upper(net, data, eps, attack, rng):
    """Fraction of samples the attack failed to misclassify (an upper estimate)."""
    if not eps > 0:
        raise ContractError("eps must be positive")
    ds = _attack_points(data, attack, rng)
    fooled, _, _ = pgd_attack(net, ds.X, ds.y, eps, attack, rng)
    return float(np.mean(~fooled))


def robust_accuracy_curve(net, data, eps_grid, attack, rng):
    """Robust accuracy over an eps grid, non-increasing by construction.

    Radii are processed in increasing order and a sample broken at a smaller
    radius stays broken (its witness lies in every larger ball). eps = 0 gives
    clean accuracy.
    """
    ds = _attack_points(data, attack, rng)
    eps_grid = [float(e) for e in eps_grid]
    fooled = _misclassified(net.forward(ds.X), ds.y)
    out = {}
    for e in sorted(set(eps_grid)):
        if e > 0:
            f, _, _ = pgd_attack(net, ds.X, ds.y, e, attack, rng)
            fooled = fooled | f
        out[e] = float(np.mean(~fooled))
    return [out[e] for e in eps_grid]
