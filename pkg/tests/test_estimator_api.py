"""Estimator API conventions shared by all four solvers.

Each solver is a scikit-learn style estimator: constructor stores
parameters verbatim, fit() returns self and exposes trailing-underscore
attributes, get_params/set_params/clone round-trip, and calling
transform or predict before fit raises NotFittedError.
"""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ransic.ransac import RansacRegistration, RansacRotationSearch
from ransic.registration import RansicRegistration
from ransic.rotation_search import RansicRotationSearch
from ransic.synthetic import gen_registration_problem, gen_rotation_problem

ALL_ESTIMATORS = [
    RansicRotationSearch,
    RansicRegistration,
    RansacRotationSearch,
    RansacRegistration,
]


def tiny_fit_data(cls):
    if cls in (RansicRotationSearch, RansacRotationSearch):
        prob = gen_rotation_problem(n=60, outlier_ratio=0.2, sigma=0.01, seed=0)
    else:
        prob = gen_registration_problem(n=60, outlier_ratio=0.2, sigma=0.01,
                                        scale_mode="unknown", seed=0)
    return prob.src, prob.dst


@pytest.mark.parametrize("cls", ALL_ESTIMATORS)
class TestSklearnConventions:
    def test_get_params_lists_constructor_args(self, cls):
        import inspect

        est = cls()
        sig = inspect.signature(cls.__init__)
        expected = {n for n in sig.parameters if n != "self"}
        assert set(est.get_params()) == expected

    def test_params_stored_verbatim(self, cls):
        # sklearn contract: __init__ must not touch its arguments
        est = cls(sigma=0.123)
        assert est.sigma == 0.123

    def test_set_params_round_trip(self, cls):
        est = cls()
        before = est.get_params()
        est.set_params(**before)
        assert est.get_params() == before

    def test_set_params_updates_single(self, cls):
        est = cls()
        est.set_params(sigma=0.5)
        assert est.sigma == 0.5

    def test_set_params_unknown_raises(self, cls):
        with pytest.raises(ValueError):
            cls().set_params(no_such_param=1)

    def test_clone_matches(self, cls):
        est = cls(sigma=0.02, random_state=7)
        twin = clone(est)
        assert twin is not est
        assert twin.get_params() == est.get_params()

    def test_clone_drops_fitted_state(self, cls):
        src, dst = tiny_fit_data(cls)
        est = cls(random_state=0).fit(src, dst)
        assert hasattr(est, "rotation_")
        twin = clone(est)
        assert not hasattr(twin, "rotation_")

    def test_transform_before_fit_raises(self, cls):
        src, _ = tiny_fit_data(cls)
        with pytest.raises(NotFittedError):
            cls().transform(src)

    def test_predict_before_fit_raises(self, cls):
        src, _ = tiny_fit_data(cls)
        with pytest.raises(NotFittedError):
            cls().predict(src)

    def test_fit_returns_self(self, cls):
        src, dst = tiny_fit_data(cls)
        est = cls(random_state=0)
        assert est.fit(src, dst) is est

    def test_refit_overwrites(self, cls):
        src, dst = tiny_fit_data(cls)
        est = cls(random_state=0).fit(src, dst)
        first = est.rotation_.copy()
        if cls in (RansicRotationSearch, RansacRotationSearch):
            prob = gen_rotation_problem(n=60, outlier_ratio=0.2, sigma=0.01,
                                        seed=5)
        else:
            prob = gen_registration_problem(n=60, outlier_ratio=0.2,
                                            sigma=0.01, scale_mode="unknown",
                                            seed=5)
        est.fit(prob.src, prob.dst)
        assert not np.allclose(est.rotation_, first)


@pytest.mark.parametrize("cls", ALL_ESTIMATORS)
def test_fitted_attribute_inventory(cls):
    src, dst = tiny_fit_data(cls)
    est = cls(random_state=0).fit(src, dst)
    for name in ("rotation_", "inlier_indices_", "inlier_mask_",
                 "residuals_", "terminated_"):
        assert hasattr(est, name), name
    if cls in (RansicRegistration, RansacRegistration):
        assert hasattr(est, "scale_")
        assert hasattr(est, "translation_")


def test_registration_transform_applies_full_transform():
    prob = gen_registration_problem(n=80, outlier_ratio=0.0, sigma=0.0,
                                    scale_mode="unknown", seed=3)
    est = RansicRegistration(random_state=0).fit(prob.src, prob.dst)
    moved = est.transform(prob.src)
    assert np.allclose(moved, prob.dst, atol=1e-9)


def test_rotation_transform_applies_rotation_only():
    prob = gen_rotation_problem(n=80, outlier_ratio=0.0, sigma=0.0, seed=3)
    est = RansicRotationSearch(random_state=0).fit(prob.src, prob.dst)
    moved = est.transform(prob.src)
    assert np.allclose(moved, prob.src @ est.rotation_.T)
