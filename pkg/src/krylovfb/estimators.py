"""scikit-learn style wrappers around the solvers.

Hyperparameters go to ``__init__`` and ``fit`` learns attributes with a
trailing underscore. ``fit`` takes the system matrices instead of a data
matrix, so these are not drop-in sklearn pipeline steps.
"""

import numpy as np
from sklearn.base import BaseEstimator

from .driver import AlgorithmOneConfig, ShiftConfig, algorithm_one, stabilize_by_output_feedback
from .exceptions import DomainError
from .feedback import FeedbackSystem, rank_one_update
from .numerics import Tolerance, check_monic


def check_system(A, B, C, validate=True):
    """Validate ``(A, B, C)`` and return a :class:`FeedbackSystem`."""
    return FeedbackSystem(A, B, C, validate=validate)


def _tol(est):
    return Tolerance(rank_tol=est.rank_tol, residual_tol=est.residual_tol)


class _FeedbackEstimator(BaseEstimator):
    def _check_is_fitted(self):
        if not hasattr(self, "K_"):
            raise DomainError(f"{type(self).__name__} is not fitted yet; call fit first")

    def closed_loop(self):
        """``A + B K_ C`` for the fitted system."""
        self._check_is_fitted()
        return self.system_.closed_loop(self.K_)


class RankOneFeedback(_FeedbackEstimator):
    """Single least-squares rank-one update toward a target polynomial.

    Parameters
    ----------
    mu : array_like or None
        Input combination; ``None`` draws a unit vector from ``seed``.
    seed : int or None
        Seeds the default ``mu`` and the verification path.
    """

    def __init__(self, mu=None, seed=None, rank_tol=None, residual_tol=1e-9, verify=True):
        self.mu = mu
        self.seed = seed
        self.rank_tol = rank_tol
        self.residual_tol = residual_tol
        self.verify = verify

    def fit(self, A, B, C, target, d=None):
        sys = check_system(A, B, C)
        rng = np.random.default_rng(self.seed)
        if self.mu is None:
            mu = rng.uniform(-1.0, 1.0, sys.m)
            mu /= np.linalg.norm(mu)
        else:
            mu = np.asarray(self.mu, dtype=float)
        res = rank_one_update(sys, mu, check_monic(target, "target", degree=sys.n), _tol(self),
                              d=d, verify=self.verify, rng=rng)
        self.system_ = sys
        self.result_ = res
        self.K_ = res.K
        self.rho_ = res.rho
        self.sigma_ = res.sigma
        self.d_ = res.d_new
        self.residual_ = res.residual
        self.verdict_ = res.verdict
        return self


class AlgorithmOne(_FeedbackEstimator):
    """Iterated rank-one updates toward a target polynomial."""

    def __init__(self, epsilon=1e-10, max_iters=1000, mode="columns_of_B", seed=None,
                 combinations_per_iter=None, rank_tol=None, residual_tol=1e-9, verify=True):
        self.epsilon = epsilon
        self.max_iters = max_iters
        self.mode = mode
        self.seed = seed
        self.combinations_per_iter = combinations_per_iter
        self.rank_tol = rank_tol
        self.residual_tol = residual_tol
        self.verify = verify

    def fit(self, A, B, C, target, d=None):
        sys = check_system(A, B, C)
        cfg = AlgorithmOneConfig(
            epsilon=self.epsilon, max_iters=self.max_iters, mode=self.mode, seed=self.seed,
            combinations_per_iter=self.combinations_per_iter, verify=self.verify, tol=_tol(self),
        )
        out = algorithm_one(sys, target, cfg, d0=d)
        self.system_ = sys
        self.outcome_ = out
        self.K_ = out.K_final
        self.d_ = out.d_final
        self.history_ = out.history
        self.success_ = out.success
        self.n_iter_ = out.iterations_used
        return self


class OutputFeedbackStabilizer(_FeedbackEstimator):
    """Move all closed-loop roots into the open left half-plane."""

    def __init__(self, max_total_iters=200, a=0.1, b_coef=1e-3, candidates_per_rule=10, seed=None,
                 rank_tol=None, residual_tol=1e-9, verify=True):
        self.max_total_iters = max_total_iters
        self.a = a
        self.b_coef = b_coef
        self.candidates_per_rule = candidates_per_rule
        self.seed = seed
        self.rank_tol = rank_tol
        self.residual_tol = residual_tol
        self.verify = verify

    def fit(self, A, B, C, d=None):
        sys = check_system(A, B, C)
        cfg = ShiftConfig(
            a=self.a, b_coef=self.b_coef, max_total_iters=self.max_total_iters,
            candidates_per_rule=self.candidates_per_rule, verify=self.verify, tol=_tol(self),
        )
        out = stabilize_by_output_feedback(sys, cfg, seed=self.seed, d0=d)
        self.system_ = sys
        self.outcome_ = out
        self.K_ = out.K_final
        self.d_ = out.d_final
        self.trajectory_ = out.trajectory
        self.success_ = out.success
        self.n_iter_ = out.iterations_used
        return self
