import numpy as np
import pytest

from fibflow.core import (
    Dataset,
    DimensionMismatch,
    FeatureMap,
    KernelSpec,
    RepresentationMismatch,
    RkhsFunction,
    combine,
    evaluate,
    inner,
)

from conftest import random_expansion, random_feature_function


class TestKernelSpec:
    def test_gaussian_kappa_is_one(self):
        assert KernelSpec("gaussian", bandwidth=0.5).kappa == 1.0

    def test_spline_kappa_over_unit_cube(self):
        # per-coordinate sup K(x, x) = 7/3 at x = 1
        k = KernelSpec("cubic-spline", input_dim=3)
        assert np.isclose(k.kappa**2, (7.0 / 3.0) ** 3)

    def test_linear_kappa(self):
        assert np.isclose(KernelSpec("linear", input_dim=4).kappa, 2.0)

    @pytest.mark.parametrize("kind,dim", [("cubic-spline", 1), ("cubic-spline", 3), ("linear", 2)])
    def test_gram_positive_semidefinite(self, rng, kind, dim):
        k = KernelSpec(kind, input_dim=dim)
        X = rng.uniform(0, 1, (30, dim))
        G = k.gram(X, X)
        np.testing.assert_allclose(G, G.T, atol=1e-12)
        assert np.linalg.eigvalsh(G).min() > -1e-8

    def test_gaussian_diag_is_one(self, rng):
        k = KernelSpec("gaussian", bandwidth=0.3)
        X = rng.normal(size=(10, 2))
        np.testing.assert_allclose(np.diag(k.gram(X, X)), 1.0, atol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            KernelSpec("gaussian", bandwidth=-1.0)
        with pytest.raises(ValueError):
            KernelSpec("cubic-spline")
        with pytest.raises(ValueError):
            KernelSpec("laplacian", bandwidth=1.0)


class TestFeatureMap:
    def test_same_seed_bit_identical(self):
        a = FeatureMap(seed=3, dim=16, bandwidth=0.5, input_dim=2)
        b = FeatureMap(seed=3, dim=16, bandwidth=0.5, input_dim=2)
        X = np.random.default_rng(0).uniform(0, 1, (7, 2))
        assert np.array_equal(a.features(X), b.features(X))
        assert a == b

    def test_dimension_check(self):
        fmap = FeatureMap(seed=0, dim=4, bandwidth=1.0, input_dim=3)
        with pytest.raises(DimensionMismatch):
            fmap.features(np.zeros((5, 2)))

    def test_feature_norm_bounded(self, rng):
        fmap = FeatureMap(seed=1, dim=32, bandwidth=0.7, input_dim=2)
        Phi = fmap.features(rng.uniform(0, 1, (50, 2)))
        assert ((Phi**2).sum(axis=1) <= 2.0 + 1e-12).all()


class TestDataset:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Dataset(np.array([[0.0], [np.nan]]), np.array([1.0, 2.0]))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 1)), np.zeros(2))

    def test_shape_accessors(self):
        ds = Dataset(np.zeros((4, 2)), np.zeros(4))
        assert (ds.n, ds.d) == (4, 2)


class TestInner:
    def test_zero_pairs_to_zero(self, rng, gaussian):
        f = random_expansion(rng, gaussian)
        assert inner(RkhsFunction.zero(), f) == 0.0
        assert inner(f, RkhsFunction.zero()) == 0.0

    def test_reproducing_self_inner(self, gaussian):
        # f = K(x0, .): <f, f> = K(x0, x0) = 1 for the gaussian kernel
        f = RkhsFunction.kernel_expansion(gaussian, np.array([[0.3, 0.7]]), np.array([1.0]))
        assert np.isclose(inner(f, f), 1.0, atol=1e-14)

    def test_matches_dense_gram_oracle(self, rng, gaussian):
        f = random_expansion(rng, gaussian, n_anchors=3)
        g = random_expansion(rng, gaussian, n_anchors=3)
        # oracle: stack anchors, build the dense Gram over the union
        union = np.vstack([f.anchors, g.anchors])
        G = gaussian.gram(union, union)
        a = np.concatenate([f.coefficients, np.zeros(3)])
        b = np.concatenate([np.zeros(3), g.coefficients])
        np.testing.assert_allclose(inner(f, g), a @ G @ b, rtol=1e-12)

    def test_symmetry(self, rng, gaussian):
        for _ in range(20):
            f = random_expansion(rng, gaussian, n_anchors=4)
            g = random_expansion(rng, gaussian, n_anchors=5)
            lhs, rhs = inner(f, g), inner(g, f)
            assert abs(lhs - rhs) <= 1e-12 * (1.0 + abs(lhs))

    def test_cauchy_schwarz(self, rng, gaussian):
        for _ in range(20):
            f = random_expansion(rng, gaussian, n_anchors=4)
            g = random_expansion(rng, gaussian, n_anchors=4)
            assert inner(f, g) ** 2 <= inner(f, f) * inner(g, g) * (1.0 + 1e-10)

    def test_feature_weight_inner_is_dot(self, rng):
        fmap = FeatureMap(seed=5, dim=8, bandwidth=1.0, input_dim=1)
        f = random_feature_function(rng, fmap)
        g = random_feature_function(rng, fmap)
        w_f = f.components[fmap]
        w_g = g.components[fmap]
        np.testing.assert_allclose(inner(f, g), w_f @ w_g, rtol=1e-14)

    def test_disjoint_maps_are_orthogonal_components(self, rng):
        a = FeatureMap(seed=1, dim=8, bandwidth=1.0, input_dim=1)
        b = FeatureMap(seed=2, dim=8, bandwidth=1.0, input_dim=1)
        f = random_feature_function(rng, a)
        g = random_feature_function(rng, b)
        assert inner(f, g) == 0.0

    def test_family_mismatch_raises(self, rng, gaussian):
        f = random_expansion(rng, gaussian)
        fmap = FeatureMap(seed=0, dim=4, bandwidth=1.0, input_dim=2)
        g = random_feature_function(rng, fmap)
        with pytest.raises(RepresentationMismatch):
            inner(f, g)

    def test_kernel_mismatch_raises(self, rng, gaussian):
        f = random_expansion(rng, gaussian)
        g = random_expansion(rng, KernelSpec("gaussian", bandwidth=2.0))
        with pytest.raises(RepresentationMismatch):
            inner(f, g)


class TestEvaluate:
    def test_zero_everywhere(self):
        X = np.linspace(0, 1, 11)[:, None]
        np.testing.assert_array_equal(evaluate(RkhsFunction.zero(), X), np.zeros(11))

    def test_single_anchor_reproducing(self, gaussian):
        x0 = np.array([[0.2, 0.9]])
        f = RkhsFunction.kernel_expansion(gaussian, x0, np.array([2.5]))
        np.testing.assert_allclose(evaluate(f, x0), [2.5], rtol=1e-14)

    def test_feature_weights_matrix_oracle(self, rng):
        fmap = FeatureMap(seed=9, dim=12, bandwidth=0.4, input_dim=2)
        f = random_feature_function(rng, fmap)
        X = rng.uniform(0, 1, (5, 2))
        np.testing.assert_allclose(
            evaluate(f, X), fmap.features(X) @ f.components[fmap], rtol=1e-14
        )

    def test_linearity(self, rng, gaussian):
        f = random_expansion(rng, gaussian)
        g = random_expansion(rng, gaussian)
        X = rng.uniform(0, 1, (20, 2))
        lhs = evaluate(combine([1.3, -0.4], [f, g]), X)
        rhs = 1.3 * evaluate(f, X) - 0.4 * evaluate(g, X)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-11, atol=1e-13)

    def test_dimension_mismatch(self, rng, gaussian):
        f = random_expansion(rng, gaussian, d=2)
        with pytest.raises(DimensionMismatch):
            evaluate(f, np.zeros((3, 5)))

    def test_reproducing_property(self, rng, gaussian):
        # f(x) = <f, K(x, .)> for kernel expansions
        f = random_expansion(rng, gaussian, n_anchors=4)
        for _ in range(5):
            x = rng.uniform(0, 1, (1, 2))
            section = RkhsFunction.kernel_expansion(gaussian, x, np.array([1.0]))
            val = evaluate(f, x)[0]
            assert abs(val - inner(f, section)) <= 1e-10 * (1.0 + abs(val))


class TestCombine:
    def test_identity(self, rng, gaussian):
        f = random_expansion(rng, gaussian)
        X = rng.uniform(0, 1, (33, 2))
        np.testing.assert_array_equal(evaluate(combine([1.0], [f]), X), evaluate(f, X))

    def test_cancellation_gives_zero(self, rng, gaussian):
        f = random_expansion(rng, gaussian)
        z = combine([1.0, -1.0], [f, f])
        assert z.norm() <= 1e-12

    def test_four_learner_sum_oracle(self, rng, gaussian):
        funcs = [random_expansion(rng, gaussian, n_anchors=3) for _ in range(4)]
        w = rng.normal(size=4)
        X = rng.uniform(0, 1, (25, 2))
        expect = sum(wi * evaluate(fi, X) for wi, fi in zip(w, funcs))
        got = evaluate(combine(w, funcs), X)
        np.testing.assert_allclose(got, expect, rtol=1e-12, atol=1e-14)

    def test_empty_list_is_zero(self):
        z = combine([], [])
        assert z.kind == "zero"
        assert z.norm() == 0.0

    def test_mixed_representations_raise(self, rng, gaussian):
        f = random_expansion(rng, gaussian)
        fmap = FeatureMap(seed=0, dim=4, bandwidth=1.0, input_dim=2)
        g = random_feature_function(rng, fmap)
        with pytest.raises(RepresentationMismatch):
            combine([1.0, 1.0], [f, g])

    def test_dedup_merges_bitwise_equal_anchors(self, rng, gaussian):
        anchors = rng.uniform(0, 1, (4, 2))
        f = RkhsFunction.kernel_expansion(gaussian, anchors, rng.normal(size=4))
        g = RkhsFunction.kernel_expansion(gaussian, anchors.copy(), rng.normal(size=4))
        h = combine([1.0, 1.0], [f, g])
        assert h.anchors.shape[0] == 4
        np.testing.assert_allclose(h.coefficients, f.coefficients + g.coefficients, rtol=1e-15)

    def test_shared_anchor_fast_path_keeps_array(self, rng, gaussian):
        anchors = rng.uniform(0, 1, (4, 2))
        f = RkhsFunction.kernel_expansion(gaussian, anchors, rng.normal(size=4))
        g = RkhsFunction.kernel_expansion(gaussian, anchors, rng.normal(size=4))
        h = combine([0.5, 0.5], [f, g])
        assert h.anchors is anchors

    def test_bilinearity_of_inner(self, rng, gaussian):
        f, g, h = (random_expansion(rng, gaussian) for _ in range(3))
        a, b = 0.7, -1.9
        lhs = inner(combine([a, b], [f, g]), h)
        rhs = a * inner(f, h) + b * inner(g, h)
        assert abs(lhs - rhs) <= 1e-11 * (1.0 + abs(rhs))

    def test_feature_combination_across_maps(self, rng):
        a = FeatureMap(seed=1, dim=6, bandwidth=1.0, input_dim=1)
        b = FeatureMap(seed=2, dim=6, bandwidth=1.0, input_dim=1)
        f = random_feature_function(rng, a)
        g = random_feature_function(rng, b)
        mix = combine([2.0, 3.0], [f, g])
        X = rng.uniform(0, 1, (9, 1))
        np.testing.assert_allclose(
            evaluate(mix, X), 2.0 * evaluate(f, X) + 3.0 * evaluate(g, X), rtol=1e-12
        )
        # same-map weights merge instead of stacking
        h = combine([1.0, 1.0], [f, f])
        assert list(h.components) == [a]


class TestSerialization:
    def test_kernel_round_trip_bitwise(self, rng, gaussian, tmp_path):
        f = random_expansion(rng, gaussian, n_anchors=5)
        path = tmp_path / "model.json"
        f.save(path)
        g = RkhsFunction.load(path)
        assert np.array_equal(f.anchors, g.anchors)
        assert np.array_equal(f.coefficients, g.coefficients)
        assert f.kernel == g.kernel

    def test_feature_round_trip_bitwise(self, rng, tmp_path):
        fmap = FeatureMap(seed=17, dim=10, bandwidth=0.25, input_dim=3)
        f = random_feature_function(rng, fmap)
        path = tmp_path / "model.json"
        f.save(path)
        g = RkhsFunction.load(path)
        assert list(g.components) == [fmap]
        assert np.array_equal(f.components[fmap], g.components[fmap])

    def test_zero_round_trip(self, tmp_path):
        path = tmp_path / "zero.json"
        RkhsFunction.zero().save(path)
        assert RkhsFunction.load(path).kind == "zero"

    def test_reload_predictions_match(self, rng, gaussian, tmp_path):
        f = random_expansion(rng, gaussian, n_anchors=6)
        path = tmp_path / "model.json"
        f.save(path)
        g = RkhsFunction.load(path)
        X = rng.uniform(0, 1, (40, 2))
        np.testing.assert_allclose(evaluate(f, X), evaluate(g, X), atol=1e-12, rtol=0)
