import numpy as np
import pytest

from fibflow.core import FeatureMap, KernelSpec, RkhsFunction


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def gaussian():
    return KernelSpec("gaussian", bandwidth=1.0)


def random_expansion(rng, kernel, n_anchors=3, d=2, scale=1.0):
    anchors = rng.uniform(0.0, 1.0, size=(n_anchors, d))
    coeffs = rng.normal(0.0, scale, size=n_anchors)
    return RkhsFunction.kernel_expansion(kernel, anchors, coeffs)


def random_feature_function(rng, fmap: FeatureMap, scale=1.0):
    return RkhsFunction.feature_weights(fmap, rng.normal(0.0, scale, size=fmap.dim))
