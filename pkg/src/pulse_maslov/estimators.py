"""scikit-learn style wrappers around the stability predictions.

Rows of ``X`` are parameter sets ``(alpha, beta, gamma, D)``; ``epsilon``, ``tau``
and ``theta`` are estimator hyperparameters.  Nothing is learned: ``fit`` only
validates the input, so the estimators can sit inside a ``Pipeline`` or be
scored against labels from another source.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import PulseMaslovError
from .model import ModelParams
from .singular_limit import criterion_margin
from .singular_orbit import solve_jump_condition

__all__ = ["PulseStabilityClassifier", "JumpRootTransformer"]

FEATURES = ("alpha", "beta", "gamma", "D")
NO_PULSE, STABLE, UNSTABLE = "no-pulse", "stable", "unstable"


def _rows(est, X, reset: bool):
    X = check_array(X, dtype=float)
    if reset:
        if X.shape[1] != len(FEATURES):
            raise ValueError(f"expected {len(FEATURES)} columns {FEATURES}, got {X.shape[1]}")
        est.n_features_in_ = X.shape[1]
    elif X.shape[1] != est.n_features_in_:
        raise ValueError(f"X has {X.shape[1]} features, expected {est.n_features_in_}")
    return X


def _params(est, row) -> ModelParams:
    a, b, g, D = row
    return ModelParams(est.epsilon, a, b, g, D, est.tau, est.theta)


class PulseStabilityClassifier(ClassifierMixin, BaseEstimator):
    """Stable / unstable / no-pulse label for one jump-off root per row.

    Parameters
    ----------
    root_index : int
        1-based root of the jump-off condition; rows with fewer roots are
        labelled ``"no-pulse"``.
    method : {"criterion", "maslov"}
        ``"criterion"`` uses the sign of the closed-form margin.  ``"maslov"``
        solves the pulse and labels it by its computed Maslov index (slow:
        about a second per row).
    """

    def __init__(self, root_index: int = 1, method: str = "criterion", epsilon: float = 0.01,
                 tau: float = 1.0, theta: float = 1.0):
        self.root_index = root_index
        self.method = method
        self.epsilon = epsilon
        self.tau = tau
        self.theta = theta

    def fit(self, X, y=None):
        if self.method not in ("criterion", "maslov"):
            raise ValueError(f"method must be 'criterion' or 'maslov', got {self.method!r}")
        _rows(self, X, reset=True)
        self.classes_ = np.array([NO_PULSE, STABLE, UNSTABLE])
        return self

    def _jump(self, p):
        roots = solve_jump_condition(p)
        return roots[self.root_index - 1] if len(roots) >= self.root_index else None

    def decision_function(self, X) -> np.ndarray:
        """Criterion margin (negative means stable); NaN where the root does not exist."""
        check_is_fitted(self)
        X = _rows(self, X, reset=False)
        out = np.full(len(X), np.nan)
        for k, row in enumerate(X):
            p = _params(self, row)
            jump = self._jump(p)
            if jump is not None:
                out[k] = criterion_margin(p, jump)
        return out

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self)
        X = _rows(self, X, reset=False)
        labels = np.empty(len(X), dtype=object)
        for k, row in enumerate(X):
            p = _params(self, row)
            jump = self._jump(p)
            if jump is None:
                labels[k] = NO_PULSE
            elif self.method == "criterion":
                labels[k] = STABLE if criterion_margin(p, jump) < 0 else UNSTABLE
            else:
                labels[k] = self._maslov_label(p, jump)
        return labels

    @staticmethod
    def _maslov_label(p, jump) -> str:
        from .maslov import maslov_index
        from .pulse import solve_pulse

        try:
            index = maslov_index(solve_pulse(p, jump)).total_index
        except PulseMaslovError as exc:
            raise RuntimeError(f"pipeline failed for {p}: {exc}") from exc
        return STABLE if index == 0 else UNSTABLE


class JumpRootTransformer(TransformerMixin, BaseEstimator):
    """Map parameter rows to ``[n_roots, x*_1, margin_1, x*_2, margin_2]`` (NaN-padded)."""

    def __init__(self, epsilon: float = 0.01, tau: float = 1.0, theta: float = 1.0):
        self.epsilon = epsilon
        self.tau = tau
        self.theta = theta

    def fit(self, X, y=None):
        _rows(self, X, reset=True)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_in_")
        X = _rows(self, X, reset=False)
        out = np.full((len(X), 5), np.nan)
        for k, row in enumerate(X):
            p = _params(self, row)
            roots = solve_jump_condition(p)
            out[k, 0] = len(roots)
            for j in roots[:2]:
                out[k, 2 * j.root_index - 1] = j.x_star
                out[k, 2 * j.root_index] = criterion_margin(p, j)
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(["n_roots", "x_star_1", "margin_1", "x_star_2", "margin_2"], dtype=object)
