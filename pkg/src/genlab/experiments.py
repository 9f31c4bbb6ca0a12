"""Config-driven sweeps and demonstrations, plus CSV / plot-script emission."""

from __future__ import annotations

import csv
import dataclasses
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import spearmanr

from . import __version__
from .bounds import RobBoundInputs, Th1Inputs, robustness_upper_bound, th1_lower_bound
from .data import (
    DistributionSpec,
    LabeledDataset,
    Variant,
    data_fraction,
    make_rng,
    mnist_load,
    perturb_cloud,
    sample_dataset,
)
from .errors import ContractError, HardAssertionError
from .kernels import BACKEND
from .nets import Activation, TwoLayerNet
from .train import (
    AttackConfig,
    LossFn,
    TrainConfig,
    accuracy,
    empirical_risk,
    hoeffding_half_width,
    init_net,
    pgd_attack,
    population_accuracy,
    robust_accuracy_curve,
    train_erm,
)


class Experiment(Enum):
    SWEEP_WIDTH = "sweep_width"
    SWEEP_DATA = "sweep_data"
    ROBUST_DEMO = "robust_demo"
    BADLOSS_DEMO = "badloss_demo"
    BOUNDS_TABLE = "bounds_table"
    MNIST_SWEEP = "mnist_sweep"


def _floats(v):
    return tuple(float(t) for t in v)


def _ints(v):
    return tuple(int(t) for t in v)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment = Experiment.SWEEP_WIDTH
    distribution: str = "blob_pair"
    n: int = 8
    margin: float = 0.05
    spread: float = 0.3
    outlier_c: float = 0.5
    activation: str = "relu"
    widths: tuple = (4, 8, 16, 32, 64, 128)
    width: int = 32
    fractions: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    N: int = 512
    test_samples: int = 10_000
    repeats: int = 5
    base_seed: int = 0
    learning_rate: float = 0.1
    epochs: int = 20
    batch_size: int = 32
    init_scale: float = 0.5
    loss: str = "cross_entropy"
    delta: float = 0.05
    w0: int = 2
    confidence: float = 1.0
    q: float = 1.0
    vc_dim: int = 100
    c0: float = 1.0
    c1: float = 0.1
    eps_target: float = 0.3
    eps_grid: tuple = (0.0, 0.01, 0.05, 0.1)
    attack_restarts: int = 4
    attack_steps: int = 40
    attack_samples: int = 1000
    candidates: int = 10_000
    workers: int = 1
    record_wall_time: bool = False
    mnist_train_images: str = ""
    mnist_train_labels: str = ""
    mnist_test_images: str = ""
    mnist_test_labels: str = ""
    output_dir: str = "out"

    def __post_init__(self):
        if not self.widths or not self.fractions or not self.eps_grid:
            raise ContractError("widths, fractions and eps_grid must be non-empty")
        if self.repeats < 1:
            raise ContractError("repeats must be >= 1")
        if self.N < 1 or self.test_samples < 100:
            raise ContractError("need N >= 1 and test_samples >= 100")

    def distribution_spec(self):
        variant = Variant(self.distribution)
        if variant is Variant.BLOB_PAIR:
            return DistributionSpec.blob_pair(self.n, self.margin, self.spread)
        if variant is Variant.OUTLIER_MIX:
            return DistributionSpec.outlier_mix(self.n, self.outlier_c)
        return DistributionSpec(variant, self.n)

    def train_config(self, seed):
        return TrainConfig(self.learning_rate, self.epochs,
                           self.batch_size if self.batch_size > 0 else None,
                           True, seed, self.init_scale)

    @property
    def act(self):
        return Activation.from_tag(self.activation)

    @property
    def loss_fn(self):
        return LossFn(self.loss)

    def attack(self):
        return AttackConfig(self.attack_restarts, self.attack_steps, None, self.attack_samples)


_CONVERTERS = {
    "experiment": lambda s: Experiment(s.strip().lower().replace("-", "_")),
    "widths": lambda s: _ints(s.split(",")),
    "fractions": lambda s: _floats(s.split(",")),
    "eps_grid": lambda s: _floats(s.split(",")),
    "record_wall_time": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}


def parse_config(text, **overrides):
    """Parse flat ``key = value`` lines (``#`` starts a comment)."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractError(f"config line {lineno}: expected 'key = value'")
        key, raw = (t.strip() for t in line.split("=", 1))
        if key not in fields:
            raise ContractError(f"config line {lineno}: unknown key {key!r}")
        conv = _CONVERTERS.get(key)
        if conv is None:
            default = fields[key].default
            conv = type(default) if not isinstance(default, str) else str
        try:
            values[key] = conv(raw)
        except ValueError as exc:
            raise ContractError(f"config line {lineno}: bad value for {key}: {exc}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path, **overrides):
    with open(path) as f:
        return parse_config(f.read(), **overrides)


def config_lines(cfg):
    out = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, Enum):
            v = v.value
        elif isinstance(v, tuple):
            v = ",".join(repr(t) for t in v)
        out.append(f"{f.name} = {v}")
    return out


# expressive constructions per distribution ---------------------------------------


def expresser_for(spec):
    """(net, W0, confidence) for a box-constrained width-W0 net expressing ``spec``."""
    n = spec.n
    if spec.variant is Variant.BLOB_PAIR:
        s = 2.0 / math.sqrt(n)
        u = np.ones(n) / math.sqrt(n)
        w = s * u
        b = -1.0  # -s * <u, 0.5 * 1>, written exactly so it stays in the box
        net = TwoLayerNet(np.vstack([w, -w]), [b, -b], [1.0, -1.0], 0.0)
        return net, 2, spec.margin / math.sqrt(n)
    if spec.variant is Variant.PARITY_DIAGONAL:
        from .nets import sine_expresser

        return sine_expresser(n), 1, 1.0
    if spec.variant is Variant.TWO_POINT:
        net = TwoLayerNet(np.ones((1, n)) / n, [0.0], [1.0], -0.5)
        return net, 1, 0.5
    return None, None, None


# result rows ---------------------------------------------------------------------------


@dataclass
class ResultRow:
    run_id: int
    seed: int
    experiment: str
    width: int
    n_train: int
    final_risk_mean: float = None
    train_acc: float = None
    test_acc: float = None
    test_acc_ci: float = None
    robust_acc: float = None
    q_hat: float = None
    bound_raw: float = None
    bound_clamped: float = None
    wall_time: float = None


ROW_FIELDS = [f.name for f in dataclasses.fields(ResultRow)]


def _train_and_score(cfg, run_id, seed, width, train, spec, test=None):
    start = time.perf_counter()
    rng = make_rng(seed)
    net0 = init_net(train.n, width, rng, cfg.init_scale, cfg.act)
    expr, W0, conf = expresser_for(spec) if spec is not None else (None, None, None)
    usable = W0 is not None and width >= W0 + 1
    net, rep = train_erm(net0, train, cfg.loss_fn, cfg.train_config(seed),
                         expresser=(W0, conf) if usable else None)
    if test is None:
        acc, ci = population_accuracy(net, spec, cfg.test_samples, rng)
    else:
        acc, ci = accuracy(net, test), hoeffding_half_width(len(test))
    row = ResultRow(run_id, seed, cfg.experiment.value, width, len(train),
                    rep.final_risk_mean, accuracy(net, train), acc, ci)
    if usable and cfg.loss_fn is LossFn.CROSS_ENTROPY:
        q = rep.effective_q
        row.q_hat = q
        if math.isfinite(q):
            report = th1_lower_bound(Th1Inputs(train.n, W0, conf, width, len(train), cfg.delta,
                                               cfg.act.lipschitz, max(1.0, q)))
            row.bound_raw, row.bound_clamped = report.raw, report.clamped
    if cfg.record_wall_time:
        row.wall_time = time.perf_counter() - start
    return row


def _width_job(args):
    cfg, run_id, width = args
    seed = cfg.base_seed ^ run_id
    spec = cfg.distribution_spec()
    train = sample_dataset(spec, cfg.N, make_rng([seed, 1]))
    return _train_and_score(cfg, run_id, seed, width, train, spec)


def _data_job(args):
    cfg, run_id, repeat, fraction = args
    seed = cfg.base_seed ^ run_id
    spec = cfg.distribution_spec()
    full = sample_dataset(spec, cfg.N, make_rng([cfg.base_seed, repeat, 2]))
    train = data_fraction(full, fraction, make_rng([seed, 3]))
    return _train_and_score(cfg, run_id, seed, cfg.width, train, spec)


def _run_jobs(fn, jobs, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(fn, jobs))
    else:
        rows = [fn(j) for j in jobs]
    return sorted(rows, key=lambda r: r.run_id)


def run_sweep_width(cfg):
    jobs = []
    for i, width in enumerate(cfg.widths):
        for r in range(cfg.repeats):
            jobs.append((cfg, i * cfg.repeats + r, width))
    return _run_jobs(_width_job, jobs, cfg.workers)


def run_sweep_data(cfg):
    jobs = []
    for i, frac in enumerate(cfg.fractions):
        for r in range(cfg.repeats):
            jobs.append((cfg, i * cfg.repeats + r, r, frac))
    return _run_jobs(_data_job, jobs, cfg.workers)


def run_mnist_sweep(cfg):
    paths = (cfg.mnist_train_images, cfg.mnist_train_labels,
             cfg.mnist_test_images, cfg.mnist_test_labels)
    if not all(paths):
        raise ContractError("mnist sweep needs all four mnist_* paths in the config")
    full = mnist_load(paths[0], paths[1])
    test = mnist_load(paths[2], paths[3])
    rows = []
    run_id = 0
    for width in cfg.widths:
        for frac in cfg.fractions:
            for r in range(cfg.repeats):
                seed = cfg.base_seed ^ run_id
                train = data_fraction(full, frac, make_rng([seed, 3]))
                rows.append(_train_and_score(cfg, run_id, seed, width, train, None, test))
                run_id += 1
    return rows


@dataclass(frozen=True)
class SweepSummary:
    levels: tuple
    mean_test_acc: tuple
    spearman: float
    saturated: bool  # gain over the last step smaller than over the first


def summarize(rows, key):
    by = {}
    for r in rows:
        by.setdefault(getattr(r, key), []).append(r.test_acc)
    levels = tuple(sorted(by))
    means = tuple(float(np.mean(by[k])) for k in levels)
    if len(levels) < 2 or len(set(means)) == 1:
        rho = math.nan
    else:
        rho = float(spearmanr(levels, means).statistic)
    sat = len(means) >= 3 and (means[-1] - means[-2]) < (means[1] - means[0])
    return SweepSummary(levels, means, rho, bool(sat))


def bound_violations(rows):
    """Runs whose clamped accuracy bound exceeds measured accuracy + CI half-width."""
    checked = [r for r in rows if r.bound_clamped is not None]
    bad = [r for r in checked if r.bound_clamped > r.test_acc + r.test_acc_ci]
    return len(bad), len(checked)


# robust demo -------------------------------------------------------------------------


@dataclass
class RobustReport:
    eps: list
    robust_acc: list
    clean_acc: float  # on the same fresh sample the attack uses
    c0: float
    c1: list
    bounds: list  # BoundReport per eps (None at eps = 0)
    rows: list


def measure_c1(train, eps, W0, cfg, seed):
    """Mean margin over an attacked perturbation cloud for the best width-W0 fit."""
    rng = make_rng([seed, 5])
    fit0 = init_net(train.n, W0, rng, cfg.init_scale, cfg.act)
    fit, _ = train_erm(fit0, train, LossFn.CROSS_ENTROPY, cfg.train_config(seed))
    _, worst, _ = pgd_attack(fit, train.X, train.y, eps, cfg.attack(), rng)
    cloud = perturb_cloud(train, eps, worst - train.X)
    return float(np.mean(cloud.y * fit.forward(cloud.X)))


def run_robust_demo(cfg):
    spec = cfg.distribution_spec()
    seed = cfg.base_seed
    train = sample_dataset(spec, cfg.N, make_rng([seed, 1]))
    net0 = init_net(spec.n, cfg.width, make_rng([seed, 4]), cfg.init_scale, cfg.act)
    net, _ = train_erm(net0, train, LossFn.CROSS_ENTROPY, cfg.train_config(seed))
    expr, W0, _ = expresser_for(spec)
    if expr is None:
        raise ContractError(f"no expressive construction for {spec.variant.value}")
    c0 = float(np.min(train.y * expr.forward(train.X)))
    rng = make_rng([seed, 6])
    probe = sample_dataset(spec, cfg.attack_samples, rng)
    curve = robust_accuracy_curve(net, probe, cfg.eps_grid, cfg.attack(), rng)
    clean = accuracy(net, probe)
    train_acc = accuracy(net, train)
    ci = hoeffding_half_width(len(probe))
    c1s, bounds, rows = [], [], []
    for i, (eps, rob) in enumerate(zip(cfg.eps_grid, curve)):
        row = ResultRow(i, seed, cfg.experiment.value, cfg.width, len(train),
                        empirical_risk(net, train, LossFn.CROSS_ENTROPY)[0], train_acc,
                        clean, ci, rob)
        if eps > 0:
            c1 = max(0.0, measure_c1(train, eps, W0, cfg, seed))
            rep = robustness_upper_bound(RobBoundInputs(spec.n, W0, max(cfg.width, W0 + 1),
                                                        len(train), c0, c1, cfg.delta,
                                                        cfg.act.lipschitz))
            row.bound_raw, row.bound_clamped = rep.raw, rep.clamped
        else:
            c1, rep = None, None
        c1s.append(c1)
        bounds.append(rep)
        rows.append(row)
    return RobustReport(list(cfg.eps_grid), curve, clean, c0, c1s, bounds, rows)


# bad-loss demo ------------------------------------------------------------------------


def badloss_net(n, W, negative=False):
    """``sum_W RELU(<1, x> + 1) + 1`` (or its negation)."""
    net = TwoLayerNet(np.ones((W, n)), np.ones(W), np.ones(W), 1.0)
    return net.negate() if negative else net


@dataclass
class BadlossReport:
    constructed_risk: float
    best_candidate_risk: float
    trained_risks: list
    accuracy: float
    candidates: int
    rows: list


def distribution_accuracy(net, spec):
    """Exact accuracy on an atomic distribution (uniform weights over its support)."""
    return accuracy(net, spec.support())


def run_badloss_demo(cfg):
    if Variant(cfg.distribution) is not Variant.TWO_POINT:
        raise ContractError("badloss demo needs distribution = two_point")
    spec = cfg.distribution_spec()
    n, W = spec.n, cfg.width
    seed = cfg.base_seed
    train = sample_dataset(spec, cfg.N, make_rng([seed, 1]))
    support = train.unique()
    only_negative = bool(np.all(support.y == -1))
    F = badloss_net(n, W, negative=only_negative)
    fn = LossFn.NEG_MARGIN
    risk = empirical_risk(F, support, fn)[0]

    rng = make_rng([seed, 7])
    best = math.inf
    left = cfg.candidates
    while left > 0:
        k = min(left, 1000)
        Ws = rng.uniform(-1, 1, (k, W, n))
        bs = rng.uniform(-1, 1, (k, W))
        as_ = rng.uniform(-1, 1, (k, W))
        cs = rng.uniform(-1, 1, k)
        H = np.maximum(np.einsum("kwn,mn->kmw", Ws, support.X) + bs[:, None, :], 0.0)
        out = np.einsum("kmw,kw->km", H, as_) + cs[:, None]
        best = min(best, float(fn.value(out, support.y[None, :]).mean(axis=1).min()))
        left -= k
    trained = []
    rows = []
    for r in range(cfg.repeats):
        s = seed ^ (r + 1)
        net0 = init_net(n, W, make_rng([s, 4]), cfg.init_scale)
        net, _ = train_erm(net0, train, fn, cfg.train_config(s))
        trained.append(empirical_risk(net, support, fn)[0])
        rows.append(ResultRow(r, s, cfg.experiment.value, W, len(train), trained[-1],
                              accuracy(net, train), distribution_accuracy(net, spec), 0.0))
    tol = 1e-9 * max(1.0, abs(risk))
    if risk > min([best] + trained) + tol:
        raise HardAssertionError(
            f"constructed net risk {risk} beaten by a candidate ({min([best] + trained)})"
        )
    acc = distribution_accuracy(F, spec)
    rows.insert(0, ResultRow(-1, seed, cfg.experiment.value, W, len(train), risk,
                             accuracy(F, train), acc, 0.0))
    for i, row in enumerate(rows):
        row.run_id = i
    return BadlossReport(risk, best, trained, acc, cfg.candidates, rows)


# output files -------------------------------------------------------------------------


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(rows, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\r\n")
        w.writerow(ROW_FIELDS)
        for r in rows:
            w.writerow([_cell(getattr(r, k)) for k in ROW_FIELDS])


_PLOT = """\
# gnuplot script: mean test accuracy against the sweep variable
set datafile separator ","
set key autotitle columnhead
set terminal pngcairo size 800,500
set output "{stem}.png"
set xlabel "{xlabel}"
set ylabel "test accuracy"
{logscale}
plot "results.csv" using {col}:8 with points title "runs", \\
     "" using {col}:8 smooth unique with linespoints title "mean"
"""


def emit_outputs(rows, output_dir, config=None):
    """Write results.csv, plot.gp and manifest.txt into ``output_dir``."""
    os.makedirs(output_dir, exist_ok=True)
    write_csv(rows, os.path.join(output_dir, "results.csv"))
    by_data = config is not None and config.experiment is Experiment.SWEEP_DATA
    with open(os.path.join(output_dir, "plot.gp"), "w") as f:
        f.write(_PLOT.format(
            stem="accuracy_vs_fraction" if by_data else "accuracy_vs_width",
            xlabel="training samples" if by_data else "width",
            col=5 if by_data else 4,
            logscale="" if by_data else "set logscale x 2",
        ))
    with open(os.path.join(output_dir, "manifest.txt"), "w") as f:
        f.write(f"genlab {__version__} (kernels: {BACKEND})\n")
        if config is not None:
            f.write("\n".join(config_lines(config)) + "\n")
        f.write("seeds = " + ",".join(str(r.seed) for r in rows) + "\n")
    return [os.path.join(output_dir, p) for p in ("results.csv", "plot.gp", "manifest.txt")]
