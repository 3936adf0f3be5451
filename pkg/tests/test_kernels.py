import math

import numpy as np
import pytest

from nysreg import kernels
from conftest import kernel_matrix_loops


class TestEvalKernel:
    def test_gaussian_zero_distance(self):
        spec = kernels.gaussian(1.0)
        x = np.array([0.3, 0.7])
        assert kernels.eval_kernel(spec, x, x) == 1.0

    def test_gaussian_unit_distance(self):
        spec = kernels.gaussian(1.0)
        val = kernels.eval_kernel(spec, np.array([0.0]), np.array([1.0]))
        assert val == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_chi_squared_identical_inputs(self):
        spec = kernels.chi_squared(1.0)
        x = np.array([0.5])
        assert kernels.eval_kernel(spec, x, x) == pytest.approx(1.0, abs=1e-9)

    def test_linear(self):
        spec = kernels.linear()
        assert kernels.eval_kernel(spec, [1.0, 2.0], [3.0, -1.0]) == 1.0

    @pytest.mark.parametrize("make", [
        lambda: kernels.gaussian(0.7),
        lambda: kernels.chi_squared(2.0),
        lambda: kernels.linear(),
    ])
    def test_symmetric_in_arguments(self, make, rng):
        spec = make()
        for _ in range(20):
            x, t = rng.random(4), rng.random(4)
            assert kernels.eval_kernel(spec, x, t) == kernels.eval_kernel(spec, t, x)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kernels.eval_kernel(kernels.gaussian(1.0), [0.0], [0.0, 1.0])

    def test_non_finite_input(self):
        with pytest.raises(ValueError):
            kernels.eval_kernel(kernels.gaussian(1.0), [np.nan], [0.0])

    def test_bad_gamma(self):
        with pytest.raises(ValueError):
            kernels.gaussian(0.0)
        with pytest.raises(ValueError):
            kernels.chi_squared(-1.0)


class TestGram:
    def test_linear_orthonormal_points(self):
        X = np.eye(2)
        G = kernels.gram(kernels.linear(), X)
        assert np.allclose(G.values, np.eye(2), atol=0)

    def test_gaussian_diagonal_ones(self, rng):
        X = rng.random((5, 3))
        G = kernels.gram(kernels.gaussian(2.0), X)
        assert np.allclose(np.diag(G.values), 1.0, atol=1e-15)

    def test_matches_entrywise_oracle(self, rng):
        X = rng.random((5, 3))
        for spec in (kernels.gaussian(1.3), kernels.chi_squared(0.8), kernels.linear()):
            G = kernels.gram(spec, X)
            assert np.allclose(G.values, kernel_matrix_loops(spec, X, X), atol=1e-12)

    def test_rectangular_block(self, rng):
        X = rng.random((7, 2))
        spec = kernels.gaussian(0.9)
        G = kernels.gram(spec, X, rows=[0, 2, 4], cols=[1, 5])
        assert G.values.shape == (3, 2)
        assert G.values[1, 0] == pytest.approx(
            kernels.eval_kernel(spec, X[2], X[1]), abs=1e-15)

    def test_cols_default_to_rows(self, rng):
        X = rng.random((6, 2))
        G = kernels.gram(kernels.gaussian(1.0), X, rows=[1, 3])
        assert G.values.shape == (2, 2)

    def test_psd_within_tolerance(self, rng):
        X = rng.standard_normal((8, 3))
        for spec in (kernels.gaussian(0.5), kernels.linear()):
            w = np.linalg.eigvalsh(kernels.gram(spec, X).values)
            assert w.min() >= -1e-8 * max(w.max(), 1.0)

    def test_index_out_of_range(self, rng):
        X = rng.random((4, 2))
        with pytest.raises(IndexError):
            kernels.gram(kernels.linear(), X, rows=[0, 4])


class TestPrecomputed:
    def test_load_csv_roundtrip(self, tmp_path, rng):
        A = rng.random((4, 6))
        M = A @ A.T
        path = tmp_path / "k.csv"
        np.savetxt(path, M, delimiter=",")
        spec = kernels.load_precomputed(path)
        X = np.arange(4.0).reshape(-1, 1)
        G = kernels.gram(spec, X, rows=[0, 2], cols=[1, 3])
        expected = np.loadtxt(path, delimiter=",")[np.ix_([0, 2], [1, 3])]
        assert np.allclose(G.values, expected, atol=0)

    def test_asymmetric_square_rejected(self, rng):
        M = rng.random((3, 3))
        with pytest.raises(ValueError):
            kernels.precomputed(M)

    def test_rectangular_allowed(self, rng):
        kernels.precomputed(rng.random((3, 5)))

    def test_kernel_label_roundtrip(self):
        for text in ("gaussian:0.04", "chi_squared:2", "linear"):
            spec = kernels.parse_kernel(text)
            again = kernels.parse_kernel(kernels.kernel_label(spec))
            assert again.kind == spec.kind and again.gamma == spec.gamma


class TestMultiView:
    def test_single_view_equals_gram(self, rng):
        X = rng.random((5, 3))
        spec = kernels.gaussian(1.1)
        mvk = kernels.MultiViewKernel((spec,), ((0, 3),))
        G1 = kernels.gram(spec, X).values
        G2 = kernels.multiview_gram(mvk, X).values
        assert np.array_equal(G1, G2)

    def test_two_views_one_pair_diagonal(self):
        mvk = kernels.MultiViewKernel(
            (kernels.gaussian(1.0), kernels.gaussian(2.0)), ((0, 1), (1, 2)))
        X = np.array([[0.0, 0.5]])
        T = np.array([[1.0, 0.25]])
        B = kernels.multiview_pairwise(mvk, X, T)
        assert B.shape == (2, 2)
        assert B[0, 1] == 0.0 and B[1, 0] == 0.0
        assert B[0, 0] == pytest.approx(math.exp(-1.0), abs=1e-12)
        assert B[1, 1] == pytest.approx(math.exp(-2.0 * 0.0625), abs=1e-12)

    def test_blockwise_oracle(self, rng):
        X = rng.random((4, 6))
        T = rng.random((2, 6))
        specs = (kernels.gaussian(0.5), kernels.chi_squared(1.0), kernels.linear())
        slices = ((0, 2), (2, 4), (4, 6))
        mvk = kernels.MultiViewKernel(specs, slices)
        B = kernels.multiview_pairwise(mvk, X, T)
        v = 3
        for p in range(4):
            for q in range(2):
                block = B[p * v:(p + 1) * v, q * v:(q + 1) * v]
                for i, (spec, (a, b)) in enumerate(zip(specs, slices)):
                    expected = kernels.eval_kernel(spec, X[p, a:b], T[q, a:b])
                    assert block[i, i] == pytest.approx(expected, abs=1e-12)
                off = block - np.diag(np.diag(block))
                assert np.all(off == 0.0)

    def test_overlapping_slices_rejected(self):
        with pytest.raises(ValueError):
            kernels.MultiViewKernel(
                (kernels.linear(), kernels.linear()), ((0, 2), (1, 3)))
