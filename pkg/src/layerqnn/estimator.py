"""scikit-learn style wrapper around the layered network classifier.

Inputs ``X`` are Bloch vectors ``(m^x, m^y, m^z)`` of radius 1/2, one row per
product state. Any two distinct labels are accepted; the first class in
sorted order plays the role of ``A``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import Dataset, sample_from_magnetizations
from .model import NetworkConfig, ParamSet
from .presets import HYPERPARAMS, MASKS, initial_params
from .training import (
    EvalConfig,
    LossConfig,
    NetworkEvaluator,
    OptimizerState,
    TrainConfig,
    PURPOSE_EVALUATE,
    centroids,
    classify,
    train,
)

__all__ = ["QNNClassifier", "check_bloch_array"]

_DEFAULTS = HYPERPARAMS["I"]


def check_bloch_array(X, radius_tol: float = 1e-8) -> np.ndarray:
    """Validate an ``(n, 3)`` array of radius-1/2 Bloch vectors."""
    X = check_array(X, dtype=float)
    if X.shape[1] != 3:
        raise ValueError(f"expected 3 columns (m^x, m^y, m^z), got {X.shape[1]}")
    radius = np.linalg.norm(X, axis=1)
    bad = np.abs(radius - 0.5) > radius_tol
    if np.any(bad):
        raise ValueError(f"row {int(np.argmax(bad))} has Bloch radius {radius[bad][0]:.6g}, expected 0.5")
    return X


class QNNClassifier(ClassifierMixin, BaseEstimator):
    """Binary classifier whose output is the final-layer x magnetization."""

    def __init__(
        self,
        dataset="I",
        n_sites=12,
        n_steps=6,
        dt=0.1,
        chi_mpo=16,
        chi_mps=24,
        zip_factor=1.0,
        shots=2000,
        margin=0.25,
        rounds=50,
        batch_size=20,
        eps=0.1,
        beta1=_DEFAULTS["beta1"],
        beta2=_DEFAULTS["beta2"],
        learning_rate=_DEFAULTS["learning_rate"],
        delta=_DEFAULTS["delta"],
        noise_mode="fresh",
        backend="mpo",
        threads=1,
        predict_shots=None,
        init_params=None,
        random_state=0,
    ):
        self.dataset = dataset
        self.n_sites = n_sites
        self.n_steps = n_steps
        self.dt = dt
        self.chi_mpo = chi_mpo
        self.chi_mps = chi_mps
        self.zip_factor = zip_factor
        self.shots = shots
        self.margin = margin
        self.rounds = rounds
        self.batch_size = batch_size
        self.eps = eps
        self.beta1 = beta1
        self.beta2 = beta2
        self.learning_rate = learning_rate
        self.delta = delta
        self.noise_mode = noise_mode
        self.backend = backend
        self.threads = threads
        self.predict_shots = predict_shots
        self.init_params = init_params
        self.random_state = random_state

    def _network(self):
        return NetworkConfig(self.n_sites, self.n_steps, self.dt)

    def _evaluator(self, shots):
        tn = EvalConfig(self.chi_mpo, self.chi_mps, backend=self.backend, threads=self.threads,
                        zip_factor=self.zip_factor)
        return NetworkEvaluator(self._network(), LossConfig(self.margin, shots), tn, self._seed())

    def _seed(self) -> int:
        if self.random_state is None:
            return int(np.random.SeedSequence().entropy % 2**32)
        return int(self.random_state)

    def _samples(self, X, y_internal):
        return [sample_from_magnetizations(lab, row) for row, lab in zip(X, y_internal)]

    def _encode(self, y):
        return np.where(y == self.classes_[0], "A", "B")

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = check_X_y(X, y, dtype=float)
        X = check_bloch_array(X)
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise ValueError(f"need exactly two classes, got {len(self.classes_)}")
        if X_val is None:
            X_val, y_val = X, y
        else:
            X_val, y_val = check_X_y(X_val, y_val, dtype=float)
            X_val = check_bloch_array(X_val)
            unknown = set(np.unique(y_val)) - set(self.classes_)
            if unknown:
                raise ValueError(f"validation labels {sorted(unknown)} not seen in training")

        tr = self._samples(X, self._encode(y))
        va = self._samples(X_val, self._encode(y_val))
        seed = self._seed()
        ds = Dataset(tuple(tr + va), self.dataset, seed, len(tr))

        if self.init_params is None:
            init = initial_params(self.dataset)
        elif isinstance(self.init_params, ParamSet):
            init = self.init_params
        else:
            init = ParamSet.from_vector(MASKS[self.dataset], self.init_params)

        opt = OptimizerState(self.beta1, self.beta2, self.learning_rate, self.delta)
        cfg = TrainConfig(self.rounds, min(self.batch_size, len(tr)), self.eps, seed, self.noise_mode)
        self.history_ = train(ds, init, self._evaluator(self.shots), opt, cfg)
        self.params_ = self.history_.best_params
        self.best_round_ = self.history_.best_round

        train_out = self._outputs(X)
        self.centroids_ = centroids(train_out, self._encode(y))
        self.n_features_in_ = 3
        return self

    def _outputs(self, X) -> np.ndarray:
        samples = [sample_from_magnetizations("A", row) for row in X]
        key = (PURPOSE_EVALUATE, 0, 0)
        return self._evaluator(self.predict_shots).outputs(self.params_, samples, key)

    def decision_function(self, X) -> np.ndarray:
        """Output-layer ``m^x`` for each row of ``X``."""
        check_is_fitted(self, "params_")
        return self._outputs(check_bloch_array(X))

    def predict(self, X) -> np.ndarray:
        values = self.decision_function(X)
        labels = classify(values, np.full(len(values), "A"), self.centroids_).predictions
        return np.where(labels == "A", self.classes_[0], self.classes_[1])

    def margin_score(self, X, y) -> float:
        """Worst-case centroid margin over ``(X, y)``."""
        values = self.decision_function(X)
        return classify(values, self._encode(np.asarray(y)), self.centroids_).margin
