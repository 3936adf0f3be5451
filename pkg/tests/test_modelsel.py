import csv
import math

import numpy as np
import pytest

from nysreg import data, kernels, modelsel


def random_psd(seed, n=6):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n + 2))
    return A @ A.T


class TestEffectiveDimension:
    def test_identity_spectrum(self):
        # K/n = I_4 at gamma=1: four terms of 1/2
        assert modelsel.effective_dimension(4 * np.eye(4), 1.0) == pytest.approx(2.0, abs=1e-12)

    def test_large_gamma_limit(self):
        K = random_psd(0)
        assert modelsel.effective_dimension(K, 1e12) <= 1e-6

    def test_eigensolver_oracle(self):
        K = random_psd(1)
        n = K.shape[0]
        gamma = 0.3
        # independent route: trace of the resolvent product via a dense solve
        expected = np.trace(np.linalg.solve(K / n + gamma * np.eye(n), K / n))
        assert modelsel.effective_dimension(K, gamma) == pytest.approx(expected, rel=1e-10)

    def test_strictly_decreasing(self):
        K = random_psd(2)
        grid = np.geomspace(1e-4, 1e2, 10)
        values = [modelsel.effective_dimension(K, g) for g in grid]
        assert all(a > b - 1e-12 for a, b in zip(values, values[1:]))
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_trace_bound(self):
        K = random_psd(3)
        n = K.shape[0]
        for gamma in (0.01, 0.1, 1.0, 10.0):
            eff = modelsel.effective_dimension(K, gamma)
            assert eff <= np.trace(K / n) / gamma + 1e-12
            assert eff <= n

    def test_gamma_validation(self):
        with pytest.raises(ValueError):
            modelsel.effective_dimension(np.eye(3), 0.0)


class TestPointLeverage:
    def test_identity_case(self):
        lev = modelsel.point_leverage(4 * np.eye(4), 1.0)
        assert np.allclose(lev, 0.5, atol=1e-12)
        assert lev.sum() == pytest.approx(2.0, abs=1e-10)

    def test_duplicates_share_leverage(self, rng):
        X = rng.random((5, 2))
        X[3] = X[1]  # duplicate point
        K = kernels.gram(kernels.gaussian(1.0), X).values
        lev = modelsel.point_leverage(K, 0.2)
        assert lev[1] == pytest.approx(lev[3], rel=1e-10)

    def test_trace_identity(self):
        for seed in range(4):
            K = random_psd(seed)
            gamma = 0.15
            lev = modelsel.point_leverage(K, gamma)
            eff = modelsel.effective_dimension(K, gamma)
            assert abs(lev.sum() - eff) <= 1e-8
            assert lev.min() >= 0.0

    def test_n_inf_estimate(self):
        K = random_psd(5)
        n = K.shape[0]
        n_inf = modelsel.estimate_n_inf(K, 0.1)
        assert n_inf == pytest.approx(n * modelsel.point_leverage(K, 0.1).max(), abs=0)


class TestNystromGap:
    def test_all_landmarks(self):
        K = random_psd(0)
        assert modelsel.nystrom_gap(K, K, K) <= 1e-10

    def test_rank_one_captured(self):
        a = np.array([2.0, -1.0, 0.5, 3.0])
        K = np.outer(a, a)
        lm = np.array([3])
        gap = modelsel.nystrom_gap(K, K[:, lm], K[np.ix_(lm, lm)])
        assert gap <= 1e-10

    def test_dense_schur_oracle(self, rng):
        K = random_psd(7)
        n = K.shape[0]
        lm = np.array([1, 4])
        K_ss = K[np.ix_(lm, lm)]
        schur = (K - K[:, lm] @ np.linalg.pinv(K_ss) @ K[lm, :]) / n
        expected = max(np.linalg.eigvalsh(0.5 * (schur + schur.T)).max(), 0.0)
        got = modelsel.nystrom_gap(K, K[:, lm], K_ss)
        assert got == pytest.approx(expected, rel=1e-8, abs=1e-12)

    def test_nonincreasing_nested_chains(self, rng):
        X = rng.random((12, 3))
        K = kernels.gram(kernels.gaussian(0.8), X).values
        perm = rng.permutation(12)
        gaps = []
        for s in (2, 4, 6, 9, 12):
            lm = np.sort(perm[:s])
            gaps.append(modelsel.nystrom_gap(K, K[:, lm], K[np.ix_(lm, lm)]))
        assert all(a >= b - 1e-10 for a, b in zip(gaps, gaps[1:]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            modelsel.nystrom_gap(np.eye(4), np.eye(4)[:, :2], np.eye(3))


class TestParameterRule:
    def test_without_decay(self):
        l0, lj = modelsel.parameter_rule(modelsel.RateRuleConfig(r=0.5, m=10**4))
        assert l0 == pytest.approx(0.046415888336127795, abs=1e-9)
        assert lj == pytest.approx(l0 ** 2.0, rel=1e-12)

    def test_with_decay(self):
        l0, _ = modelsel.parameter_rule(modelsel.RateRuleConfig(r=0.5, m=10**4, b=2.0))
        assert l0 == pytest.approx(0.025118864315095794, abs=1e-9)

    def test_r_zero(self):
        for m in (4, 100, 10**6):
            l0, lj = modelsel.parameter_rule(modelsel.RateRuleConfig(r=0.0, m=m))
            assert l0 == pytest.approx(m ** -0.5, rel=1e-14)
            assert lj == pytest.approx(l0 ** 1.5, rel=1e-14)

    def test_capped_at_one(self):
        l0, _ = modelsel.parameter_rule(modelsel.RateRuleConfig(r=0.0, m=2))
        assert l0 <= 1.0

    def test_lambda_j_below_lambda0(self):
        for r in (0.0, 0.25, 0.5, 1.0):
            for m in (10, 1000, 10**6):
                l0, lj = modelsel.parameter_rule(modelsel.RateRuleConfig(r=r, m=m))
                assert lj <= l0 + 1e-15

    def test_validation(self):
        with pytest.raises(ValueError):
            modelsel.RateRuleConfig(r=1.5, m=10)
        with pytest.raises(ValueError):
            modelsel.RateRuleConfig(r=0.5, m=10, b=1.0)
        with pytest.raises(ValueError):
            modelsel.RateRuleConfig(r=0.5, m=1)


class TestSampleCondition:
    def test_boundary_true(self):
        assert modelsel.check_sample_condition(64, 1.0, 1.0, 4.0 / math.e)

    def test_below_boundary_false(self):
        assert not modelsel.check_sample_condition(64, 1.0, 0.5, 4.0 / math.e)

    def test_formula_oracle(self, rng):
        for _ in range(25):
            m = int(rng.integers(2, 10**6))
            kappa_sq = float(rng.uniform(0.1, 5.0))
            lam = float(rng.uniform(1e-6, 2.0))
            eta = float(rng.uniform(1e-3, 0.999))
            expected = 8 * kappa_sq / math.sqrt(m) * math.log(4 / eta) <= lam
            assert modelsel.check_sample_condition(m, kappa_sq, lam, eta) is expected


class TestRecommendSubsample:
    def test_degenerate_log_clamps_to_one(self):
        assert modelsel.recommend_subsample_size(1.0, 12.0, 1.0, 50.0) == 1

    def test_simple_arithmetic(self):
        # log term exactly 2: max(67*2, 5*10*2) = 134
        delta = 12.0 / math.exp(2.0)
        assert modelsel.recommend_subsample_size(1.0, delta, 1.0, 10.0) == 134

    def test_formula_oracle(self, rng):
        for _ in range(25):
            lam = float(rng.uniform(1e-4, 1.0))
            delta = float(rng.uniform(1e-3, 1.0))
            kappa_sq = float(rng.uniform(0.1, 3.0))
            n_inf = float(rng.uniform(0.0, 200.0))
            t = math.log(12 * kappa_sq / (lam * delta))
            expected = max(int(math.ceil(max(67 * t, 5 * n_inf * t))), 1)
            got = modelsel.recommend_subsample_size(lam, delta, kappa_sq, n_inf)
            assert got == expected


class TestDiagnosticsBundle:
    def test_report_fields(self, rng):
        X = rng.random((10, 2))
        K = kernels.gram(kernels.gaussian(1.0), X).values
        rep = modelsel.diagnostics(K, 0.1, landmarks=[0, 3, 7], m=10, eta=0.05)
        assert rep.effective_dimension > 0
        assert abs(rep.leverages.sum() - rep.effective_dimension) <= 1e-8
        assert rep.nystrom_gap_sq >= 0.0
        assert rep.kappa_sq == pytest.approx(1.0, abs=1e-12)


def planted_classification(n=36, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    y = np.where(X[:, 0] + 0.3 * rng.standard_normal(n) > 0.5, 1.0, -1.0)
    return data.Dataset(X, y[:, None], n)


class TestGridSearch:
    def test_single_point_grid(self):
        ds = planted_classification()
        best, rows = modelsel.grid_search(ds, kernels.gaussian(1.0), [0.01], [0.1],
                                          folds=3, seed=0)
        assert best["lambda0"] == 0.01 and best["lambda1"] == 0.1
        assert len(rows) == 3

    def test_matches_exhaustive_evaluation(self):
        ds = planted_classification(seed=3)
        grid0, grid1 = [1e-4, 1e-2, 1.0], [0.0, 0.5]
        best, rows = modelsel.grid_search(ds, kernels.gaussian(2.0), grid0, grid1,
                                          folds=3, seed=7)
        # exhaustive re-ranking from the emitted rows themselves
        means = {}
        for l0, l1, _, metric in rows:
            means.setdefault((l0, l1), []).append(metric)
        ranked = sorted(means, key=lambda k: (np.mean(means[k]), k[0], k[1]))
        assert (best["lambda0"], best["lambda1"]) == ranked[0]
        # and the winner's mean is genuinely minimal
        assert best["mean_metric"] == pytest.approx(min(np.mean(v) for v in means.values()))

    def test_grid_order_invariance(self):
        ds = planted_classification(seed=5)
        a, _ = modelsel.grid_search(ds, kernels.gaussian(1.0),
                                    [1e-3, 1e-1], [0.0, 1.0], folds=3, seed=2)
        b, _ = modelsel.grid_search(ds, kernels.gaussian(1.0),
                                    [1e-1, 1e-3], [1.0, 0.0], folds=3, seed=2)
        assert (a["lambda0"], a["lambda1"]) == (b["lambda0"], b["lambda1"])

    def test_empty_grid(self):
        ds = planted_classification()
        with pytest.raises(ValueError):
            modelsel.grid_search(ds, kernels.gaussian(1.0), [], [0.1], 3, 0)

    def test_cv_table_csv(self, tmp_path):
        ds = planted_classification()
        _, rows = modelsel.grid_search(ds, kernels.gaussian(1.0), [0.01], [0.0],
                                       folds=2, seed=0)
        path = tmp_path / "grid.csv"
        modelsel.write_cv_table(rows, path)
        with open(path) as fh:
            table = list(csv.reader(fh))
        assert table[0] == ["lambda0", "lambda1", "fold", "metric"]
        assert len(table) == len(rows) + 1
