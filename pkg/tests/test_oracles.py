import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genlab import _pykernels, kernels
from genlab.bounds import coprime_prob_lower, pattern_count_bound
from genlab.data import AlternatingLineSpec, LabeledDataset, alternating_line_dataset, make_rng
from genlab.errors import ContractError, HardAssertionError, UnsupportedConstructionError
from genlab.nets import Activation, TwoLayerNet, pattern_merge, random_net
from genlab.oracles import (
    altline_cap,
    altline_search,
    brute_force_min_risk,
    check_pattern_bound,
    coprime_exact,
    coprime_mc,
    fd_gradcheck,
    line_net,
    param_grid,
    pattern_count,
    run_verify_suite,
)
from genlab.train import LossFn, TrainConfig, accuracy, empirical_risk, init_net, train_erm

class TestAltline:
    @pytest.mark.parametrize("M,N,cap", [(1, 4, 3), (0, 6, 3), (3, 5, 6), (2, 8, 6)])
    def test_cap(self, M, N, cap):
        assert altline_cap(M, N) == cap

    @pytest.mark.parametrize("N", [1, 4, 5, 8])
    def test_constant_classifier(self, N):
        spec = AlternatingLineSpec(2, tuple(np.linspace(0.1, 0.9, N)))
        r = altline_search(spec, 0, 200, make_rng(0))
        assert r.best_correct == math.ceil(N / 2)

    @pytest.mark.parametrize("M,N", [(1, 4), (2, 6)])
    def test_within_cap(self, M, N):
        spec = AlternatingLineSpec(3, tuple(np.linspace(0.05, 0.95, N)))
        r = altline_search(spec, M, 10_000, make_rng(M * 10 + N))
        assert r.best_correct <= altline_cap(M, N)
        assert r.trials == 10_000

    def test_reduced_parameters_match_full_net(self):
        # the count the kernel reports equals the count of the equivalent full network
        spec = AlternatingLineSpec(3, (0.1, 0.25, 0.4, 0.6, 0.8, 0.95))
        ds = alternating_line_dataset(spec)
        rng = make_rng(5)
        for _ in range(50):
            M = 2
            p = np.concatenate([[rng.uniform(-1, 1), rng.uniform(-3, 3), rng.uniform(-1, 1)]
                                for _ in range(M)] + [[rng.uniform(-1, 1)]])
            net = line_net(p, M, 3)
            P = p[None, :]
            count, _ = _pykernels._correct(P, M, np.asarray(spec.knots), spec.labels())
            assert count[0] == round(accuracy(net, ds) * len(ds))
            assert net.box_constrained()

    def test_hard_assertion_fires(self, monkeypatch):
        spec = AlternatingLineSpec(2, (0.1, 0.5, 0.9))
        fake = lambda *a: (np.array([3]), np.array([0], dtype=np.uint8))  # noqa: E731
        monkeypatch.setattr(kernels, "altline_trials", fake)
        with pytest.raises(HardAssertionError):
            altline_search(spec, 0, 1, make_rng(0))

    def test_contracts(self):
        spec = AlternatingLineSpec(2, (0.1, 0.5))
        with pytest.raises(ContractError):
            altline_search(spec, 1, 0, make_rng(0))


class TestCoprime:
    def test_exact_tiny(self):
        # independent count: all 3^4 draws, differences (d1, d2) both nonzero and coprime
        hits = sum(1 for v in itertools.product(range(1, 4), repeat=4)
                   if v[0] != v[1] and v[2] != v[3] and math.gcd(v[0] - v[1], v[2] - v[3]) == 1)
        assert coprime_exact(3, 4) == hits / 81

    def test_mc_agrees_with_exact(self):
        r = coprime_mc(3, 4, 100_000, make_rng(1))
        assert abs(r.frequency - coprime_exact(3, 4)) <= r.half_width

    def test_lower_bound(self):
        r = coprime_mc(10, 29, 100_000, make_rng(2))
        assert r.frequency >= coprime_prob_lower(10, 29) - r.half_width

    def test_non_decreasing_in_N(self):
        # shared per-trial streams make the longer samples extend the shorter ones
        freqs = [coprime_mc(5, N, 20_000, make_rng(3)).frequency for N in range(4, 30, 4)]
        assert all(a <= b for a, b in zip(freqs, freqs[1:]))

    def test_contracts(self):
        with pytest.raises(ContractError):
            coprime_mc(2, 10, 10, make_rng(0))
        with pytest.raises(ContractError):
            coprime_exact(10, 10)


class TestPatterns:
    def test_width_one(self):
        net = random_net(2, 1, make_rng(0))
        assert pattern_count(net, make_rng(1).random((5, 2))) == 1

    def test_two_to_the_N(self):
        rng = make_rng(2)
        net = random_net(2, 10, rng)
        ds = LabeledDataset(rng.random((3, 2)), [1, -1, 1])
        assert pattern_count(net, ds) <= 8

    def test_sine_rejected(self):
        with pytest.raises(UnsupportedConstructionError):
            pattern_count(random_net(2, 2, make_rng(0), Activation.SINE_PI), np.zeros((1, 2)))

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), W=st.integers(1, 64), N=st.integers(1, 20),
           n=st.integers(1, 4))
    def test_bound_and_merge(self, seed, W, N, n):
        rng = make_rng(seed)
        net = random_net(n, W, rng)
        ds = LabeledDataset(rng.random((N, n)), rng.choice([-1, 1], N))
        count, cap = check_pattern_bound(net, ds)
        assert count <= cap == pattern_count_bound(n, N)
        merged = pattern_merge(net, ds)
        assert merged.n_rows <= 2 * count


class TestGradcheck:
    def test_width_zero(self):
        ds = LabeledDataset(make_rng(0).random((5, 2)), [1, -1, 1, 1, -1])
        assert fd_gradcheck(TwoLayerNet.constant(2, 0.2), ds, LossFn.CROSS_ENTROPY) <= 1e-10

    def test_sine(self):
        rng = make_rng(8)
        ds = LabeledDataset(rng.random((10, 3)), rng.choice([-1, 1], 10))
        net = random_net(3, 6, rng, Activation.SINE_PI)
        assert fd_gradcheck(net, ds, LossFn.CROSS_ENTROPY, 1e-5) <= 1e-4


class TestBruteForce:
    def test_single_sample_fixture(self):
        ds = LabeledDataset([[0.5]], [1])
        v = brute_force_min_risk(ds, 1, 4)
        # margin 2.5 is on the grid: w = b = a = c = 1
        assert v == pytest.approx(math.log1p(math.exp(-2.5)), abs=1e-15)
        assert v <= math.log1p(math.exp(-2.0))

    def test_grid_nesting(self):
        g4, g8 = param_grid(4), param_grid(8)
        assert np.array_equal(g8[::2], g4)

    def test_refinement_non_increasing(self):
        rng = make_rng(4)
        ds = LabeledDataset(rng.random((6, 1)), [1, -1, 1, -1, -1, 1])
        vals = [brute_force_min_risk(ds, 2, m) for m in (2, 4, 8)]
        assert vals[0] >= vals[1] >= vals[2]

    def test_trained_not_below_grid(self):
        ds = LabeledDataset([[0.1], [0.4], [0.9]], [-1, 1, -1])
        grid = brute_force_min_risk(ds, 2, 8)
        net, rep = train_erm(init_net(1, 2, make_rng(0)), ds, LossFn.CROSS_ENTROPY,
                             TrainConfig(0.5, 2000))
        # the grid only upper-bounds the minimum; training can land slightly below it
        assert rep.final_risk_mean >= grid - 0.05
        assert net.box_constrained()

    def test_width_zero(self):
        ds = LabeledDataset([[0.1], [0.9]], [1, 1])
        assert brute_force_min_risk(ds, 0, 2) == pytest.approx(math.log1p(math.exp(-1)))

    def test_scale_guard(self):
        with pytest.raises(UnsupportedConstructionError):
            brute_force_min_risk(LabeledDataset([[0.1, 0.2]], [1]), 1, 4)
        with pytest.raises(UnsupportedConstructionError):
            brute_force_min_risk(LabeledDataset([[0.1]], [1]), 3, 4)


def test_verify_suite_small():
    results = run_verify_suite(make_rng(0), scale=0.05)
    assert all(r.passed for r in results), [r for r in results if not r.passed]
