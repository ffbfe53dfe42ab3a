import warnings

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gradpapa import GradPAPA
from gradpapa.datagen import add_noise, generate_synthetic
from gradpapa.estimator import max_identifiable_rank
from gradpapa.metrics import mse_factor, sto_feasibility
from gradpapa.model import matrix_to_cube


@pytest.fixture(scope="module")
def data():
    C, S, Y = generate_synthetic(20, 18, 30, 3, 3, seed=0)
    Yn = add_noise(Y, 30, 1)
    return C, S, Yn


def test_params_round_trip():
    est = GradPAPA(4, constraint="nn", theta=0.01, max_iter=10)
    params = est.get_params()
    assert params["n_endmembers"] == 4 and params["constraint"] == "nn"
    twin = clone(est)
    assert twin.get_params() == params
    twin.set_params(q=1.0)
    assert twin.q == 1.0 and est.q == 0.5


def test_fit_cube_and_matrix_agree(data):
    C, S, Y = data
    cube = matrix_to_cube(Y, (20, 18))
    a = GradPAPA(3, rank=3, max_iter=50).fit(cube)
    b = GradPAPA(3, rank=3, max_iter=50, image_shape=(20, 18)).fit(Y.T)
    assert np.array_equal(a.endmembers_, b.endmembers_)
    assert a.image_shape_ == (20, 18)
    assert a.components_.shape == (3, 30)
    assert a.n_iter_ == len(a.trace_)


def test_fit_recovers_endmembers(data):
    C, S, Y = data
    est = GradPAPA(3, rank=3).fit(matrix_to_cube(Y, (20, 18)))
    assert mse_factor(est.endmembers_, C).value <= 1e-3
    assert sto_feasibility(est.abundances_, 1e-12) == 100.0


def test_fit_transform_shape_and_inverse(data):
    _, _, Y = data
    est = GradPAPA(3, constraint="nn", max_iter=40, image_shape=(20, 18))
    W = est.fit_transform(Y.T)
    assert W.shape == (360, 3)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)
    recon = est.inverse_transform(W)
    assert recon.shape == Y.T.shape
    assert np.linalg.norm(recon - Y.T) / np.linalg.norm(Y) < 0.1


def test_transform_with_fixed_endmembers(data):
    C, S, Y = data
    est = GradPAPA(3, rank=3, max_iter=5, image_shape=(20, 18))
    est.fit(Y.T, init_endmembers=C, init_abundances=S)
    W = est.transform((C @ S).T)
    assert W.shape == (360, 3)
    assert mse_factor(W, S.T).value <= 1e-3


def test_random_init_reproducible(data):
    _, _, Y = data
    kw = dict(init="random", random_state=3, max_iter=20, image_shape=(20, 18))
    a = GradPAPA(3, **kw).fit(Y.T)
    b = GradPAPA(3, **kw).fit(Y.T)
    assert np.array_equal(a.abundances_, b.abundances_)


def test_not_fitted():
    with pytest.raises(NotFittedError):
        GradPAPA(2).transform(np.ones((4, 4, 3)))


@pytest.mark.parametrize(
    "kwargs",
    [{"constraint": "box"}, {"init": "kmeans"}, {"n_endmembers": 0}, {"theta": [0.1, 0.2]}],
)
def test_bad_parameters(kwargs, data):
    _, _, Y = data
    params = {"n_endmembers": 3, "max_iter": 2, "image_shape": (20, 18), **kwargs}
    with pytest.raises(ValueError):
        GradPAPA(**params).fit(Y.T)


def test_bad_input_shapes():
    with pytest.raises(ValueError):
        GradPAPA(2).fit(np.ones((10, 3)))  # 2-D without image_shape
    with pytest.raises(ValueError):
        GradPAPA(2, image_shape=(3, 3)).fit(np.ones((10, 3)))
    with pytest.raises(ValueError):
        GradPAPA(2).fit(np.full((3, 3, 4), np.nan))


def test_identifiability_warning():
    Y = np.random.default_rng(0).random((6, 6, 4))
    with pytest.warns(UserWarning):
        GradPAPA(3, rank=6, max_iter=2).fit(Y)


def test_default_rank_is_largest_identifiable():
    assert max_identifiable_rank(100, 100, 100, 5) == 25
    Y = np.random.default_rng(1).random((12, 12, 10))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        est = GradPAPA(2, max_iter=3).fit(Y)
    assert est.rank_ == max_identifiable_rank(12, 12, 10, 2)
    assert est.identifiability_.satisfied
