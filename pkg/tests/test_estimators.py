import numpy as np
import pytest
from sklearn.base import clone

from krylovfb.estimators import AlgorithmOne, OutputFeedbackStabilizer, RankOneFeedback
from krylovfb.exceptions import DomainError
from krylovfb.experiments import InstanceSpec, gen_instance, gen_stabilization_instance
from krylovfb.numerics import poly_roots


@pytest.fixture
def inst():
    return gen_instance(InstanceSpec(n=8, m=2, p=2, seed=2))


def test_params_and_clone():
    est = AlgorithmOne(epsilon=1e-8, mode="random_combinations", seed=3)
    params = est.get_params()
    assert params["epsilon"] == 1e-8 and params["seed"] == 3
    twin = clone(est).set_params(max_iters=5)
    assert twin.max_iters == 5 and est.max_iters == 1000


def test_not_fitted():
    with pytest.raises(DomainError):
        RankOneFeedback().closed_loop()


def test_rank_one(inst):
    s = inst.system
    est = RankOneFeedback(seed=0).fit(s.A, s.B, s.C, inst.b)
    assert est.K_.shape == (2, 2) and np.linalg.matrix_rank(est.K_) <= 1
    np.testing.assert_allclose(est.closed_loop(), s.closed_loop(est.K_))


def test_algorithm_one(inst):
    s = inst.system
    est = AlgorithmOne(epsilon=1e-9, max_iters=500, mode="random_combinations", seed=1)
    est.fit(s.A, s.B, s.C, inst.b, d=inst.d)
    assert est.success_ and est.n_iter_ == len(est.history_) - 1


def test_stabilizer():
    inst = gen_stabilization_instance(InstanceSpec(n=10, m=2, p=3, seed=0))
    s = inst.system
    est = OutputFeedbackStabilizer(seed=0).fit(s.A, s.B, s.C, d=inst.d)
    assert est.success_
    assert np.linalg.eigvals(est.closed_loop()).real.max() < 0
    assert poly_roots(est.d_).real.max() < 0


def test_invalid_system():
    with pytest.raises(DomainError):
        RankOneFeedback().fit(np.eye(3), np.ones((3, 2)), np.eye(3), np.ones(4))
