import math

import numpy as np
import pytest

from kmsw._rng import substream
from kmsw.datagen import DatasetSpec, generate
from kmsw.errors import PreconditionError
from kmsw.kernels import dot_product, gaussian
from kmsw.stats import (
    CriticalValueParams,
    critical_value,
    kernel_bound,
    rate_sweep,
    theorem_test,
    two_sample_test,
)


class TestCriticalValue:
    def test_plug_in_alpha_2_over_e(self):
        # log(2/alpha) = 1, so the threshold is 4 * (1 + 4) / sqrt(n)
        params = CriticalValueParams(a_bound=1.0, c_univ=1.0, p=1.0, alpha=2.0 / math.e)
        for n in (4, 25, 100):
            assert critical_value(n, params) == pytest.approx(20.0 / math.sqrt(n), rel=1e-12)

    def test_reference_value_n10000(self):
        # independent evaluation of 4 (1 + 4 sqrt(log 40))^(1/2) / 10
        params = CriticalValueParams(a_bound=1.0, c_univ=1.0, p=2.0, alpha=0.05)
        expect = 4.0 * (1.0 + 4.0 * math.sqrt(math.log(40.0))) ** 0.5 * 10000 ** (-0.25)
        assert critical_value(10000, params) == pytest.approx(expect, rel=1e-14)
        # frozen from an independent high-precision evaluation (mpmath, 30 dps)
        assert critical_value(10000, params) == pytest.approx(1.17864887599721512, rel=1e-12)

    def test_large_p_limit(self):
        params = CriticalValueParams(a_bound=1.0, c_univ=1.0, p=100.0, alpha=0.05)
        assert critical_value(100, params) == pytest.approx(4.0, rel=0.05)

    def test_monotonicity(self):
        p = CriticalValueParams(a_bound=1.0, c_univ=1.0, p=2.0, alpha=0.05)
        vals = [critical_value(n, p) for n in (10, 100, 1000)]
        assert vals[0] > vals[1] > vals[2]
        tighter = CriticalValueParams(a_bound=1.0, c_univ=1.0, p=2.0, alpha=0.01)
        assert critical_value(100, tighter) > critical_value(100, p)

    def test_invalid_params(self):
        with pytest.raises(PreconditionError):
            CriticalValueParams(a_bound=0.0)
        with pytest.raises(PreconditionError):
            CriticalValueParams(alpha=1.5)
        with pytest.raises(PreconditionError):
            CriticalValueParams(c_univ=0.5)


def _null_pair(n, seed, d=5):
    r = substream(seed, "datagen")
    from kmsw.kernels import PointCloud

    return (
        PointCloud(r.standard_normal((n, d))),
        PointCloud(r.standard_normal((n, d))),
    )


class TestTwoSampleTest:
    def test_result_invariants(self):
        x, y = _null_pair(16, seed=80)
        res = two_sample_test(
            x, y, gaussian(1.5), alpha=0.1, permutations=99, seed=0,
            cfg_overrides={"max_iters": 60},
        )
        assert res.reject == (res.statistic > res.threshold)
        assert 0.0 <= res.p_value <= 1.0
        assert res.permutation_stats.shape == (99,)

    def test_deterministic(self):
        x, y = _null_pair(12, seed=81)
        kw = dict(alpha=0.05, permutations=50, seed=4, cfg_overrides={"max_iters": 40})
        a = two_sample_test(x, y, gaussian(1.5), **kw)
        b = two_sample_test(x, y, gaussian(1.5), **kw)
        assert a.statistic == b.statistic
        assert np.array_equal(a.permutation_stats, b.permutation_stats)

    def test_separable_classes_reject(self):
        spec = DatasetSpec(
            kind="circle", n=60, seed=82,
            params={"r_in": 0.4, "r_out": 0.9, "noise": 0.05},
        )
        x, y = generate(spec)
        from kmsw.kernels import median_bandwidth

        k = gaussian(median_bandwidth(x, y), convention="plain")
        res = two_sample_test(x, y, k, alpha=0.05, permutations=200, seed=1,
                              cfg_overrides={"max_iters": 100})
        assert res.reject

    def test_pvalues_superuniform_under_null(self):
        # cheap version of the super-uniformity property
        pvals = []
        for t in range(24):
            x, y = _null_pair(12, seed=500 + t)
            res = two_sample_test(x, y, gaussian(1.5), alpha=0.05, permutations=79,
                                  seed=t, cfg_overrides={"max_iters": 30})
            pvals.append(res.p_value)
        pvals = np.asarray(pvals)
        for q in (0.05, 0.1, 0.2, 0.3, 0.4, 0.5):
            assert np.mean(pvals <= q) <= q + 3.0 / math.sqrt(len(pvals))

    def test_too_small_rejected(self):
        x, y = _null_pair(2, seed=83)
        with pytest.raises(PreconditionError):
            two_sample_test(x, y, gaussian(1.0))


class TestTheoremTest:
    def test_tiny_n_never_rejects_identical(self):
        x, y = _null_pair(4, seed=84)
        params = CriticalValueParams(a_bound=1.0, c_univ=1.0, p=2.0, alpha=0.05)
        res = theorem_test(x, y, gaussian(1.5), params, seed=0,
                           cfg_overrides={"max_iters": 40})
        assert not res.reject
        assert res.threshold > res.statistic

    def test_two_point_statistic_approaches_wasserstein(self):
        # 1-d dot-product kernel: the statistic is the classical distance
        spec = DatasetSpec(kind="two_point_1d", n=120, seed=85, params={"jitter": 1e-7})
        x, y = generate(spec)
        from kmsw.kms import projected_wasserstein_p

        params = CriticalValueParams(a_bound=1.0, c_univ=1.0, p=2.0, alpha=0.05)
        res = theorem_test(x, y, dot_product(), params, seed=0,
                           cfg_overrides={"max_iters": 150})
        truth = projected_wasserstein_p(x.points, y.points, 2.0)
        assert res.statistic == pytest.approx(truth, rel=1e-3, abs=1e-6)

    def test_p1_uses_projected_distance(self):
        x, y = _null_pair(10, seed=86)
        params = CriticalValueParams(a_bound=1.0, c_univ=1.0, p=1.0, alpha=0.05)
        res = theorem_test(x, y, gaussian(1.5), params, seed=0,
                           cfg_overrides={"max_iters": 40})
        assert res.meta["p"] == 1.0
        assert np.isfinite(res.statistic)


class TestKernelBound:
    def test_gaussian_is_one(self):
        x, y = _null_pair(5, seed=87)
        assert kernel_bound(gaussian(2.0), x, y) == 1.0

    def test_dot_product_is_max_norm(self):
        x, y = _null_pair(5, seed=88)
        expect = max(np.linalg.norm(x.points, axis=1).max(),
                     np.linalg.norm(y.points, axis=1).max())
        assert kernel_bound(dot_product(), x, y) == pytest.approx(expect)


class TestRateSweep:
    def test_analytic_path_slope(self):
        spec = DatasetSpec(kind="two_point_1d", n=100, d=1, seed=0)
        res = rate_sweep(spec, dot_product(), 1.0, [100, 400, 1600], 30, seed=0, workers=1)
        assert res.path == "analytic_1d"
        assert res.slope == pytest.approx(-0.5, abs=0.1)

    def test_degenerate_when_means_vanish(self, monkeypatch):
        # a constant (point-mass) generator yields zero distances at every n;
        # the slope is then reported as degenerate rather than fitted
        import kmsw.stats as stats_mod

        monkeypatch.setattr(stats_mod, "_sweep_trial", lambda *a: 0.0)
        spec = DatasetSpec(kind="two_point_1d", n=50, d=1, seed=1)
        res = rate_sweep(spec, dot_product(), 1.0, [50, 100], 2, seed=1, workers=1)
        assert res.degenerate
        assert math.isnan(res.slope)

    def test_needs_two_sizes(self):
        spec = DatasetSpec(kind="two_point_1d", n=50, d=1, seed=2)
        with pytest.raises(PreconditionError):
            rate_sweep(spec, dot_product(), 1.0, [50], 3)
