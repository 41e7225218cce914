"""scikit-learn style wrappers around plan design and repair.

The attributes ``s`` (sensitive) and ``u`` (unprotected) are passed to
``fit``/``transform`` next to ``X``, since the repair of a record depends on
its own labels.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .model import Dataset, check_fair_inputs
from .repair import design_repair_model, geometric_repair, repair_dataset


class DistributionalRepair(TransformerMixin, BaseEstimator):
    """Design repair plans on research data, then repair any labelled data.

    Parameters
    ----------
    n_states : int, (2, n_features) array-like or dict, default=50
        Support size per (u, feature).
    t : float, default=0.5
        Target position on the geodesic between the s=0 and s=1 marginals.
    random_state : int or None, default=None
        Seed of the repair draws. ``None`` draws a fresh seed per ``transform``.

    Attributes
    ----------
    model_ : RepairModel
    n_features_in_ : int
    """

    def __init__(self, n_states=50, t=0.5, random_state=None):
        self.n_states = n_states
        self.t = t
        self.random_state = random_state

    def fit(self, X, s, u):
        data = Dataset.from_arrays(X, s, u)
        self.model_ = design_repair_model(data, self.n_states, self.t)
        self.n_features_in_ = data.d
        return self

    def _seed(self):
        if self.random_state is None:
            return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
        return int(self.random_state)

    def transform(self, X, s, u, offset=0):
        """Repaired copy of ``X``; ``offset`` is the global index of row 0."""
        check_is_fitted(self, "model_")
        X, s, u = check_fair_inputs(X, s, u, expected_d=self.n_features_in_)
        data = Dataset(X, s, u, feature_names=self.model_.feature_names)
        return np.array(repair_dataset(data, self.model_, self._seed(), offset=offset).X)

    def fit_transform(self, X, s, u):
        return self.fit(X, s, u).transform(X, s, u)


class GeometricRepair(TransformerMixin, BaseEstimator):
    """On-sample displacement repair. Only the fitted data can be transformed.

    Parameters
    ----------
    t : float, default=0.5
    """

    def __init__(self, t=0.5):
        self.t = t

    def fit(self, X, s, u):
        data = Dataset.from_arrays(X, s, u)
        self.X_fit_ = np.array(data.X)
        self.repaired_ = np.array(geometric_repair(data, self.t).X)
        self.n_features_in_ = data.d
        return self

    def transform(self, X, s=None, u=None):
        check_is_fitted(self, "repaired_")
        X = np.asarray(X, dtype=float)
        if X.shape != self.X_fit_.shape or not np.array_equal(X, self.X_fit_):
            raise ValueError("geometric repair only applies to the data it was fitted on")
        return self.repaired_.copy()

    def fit_transform(self, X, s, u):
        return self.fit(X, s, u).repaired_.copy()
