"""Scikit-learn style wrapper around the gradient trainers."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..series import WindowedDataset
from ..validation import check_windows
from .training import ModelSpec, TrainConfig, fit


class NeuralForecaster(RegressorMixin, BaseEstimator):
    """Gradient-trained forecaster over window batches.

    Parameters
    ----------
    architecture : {"linear", "mlp", "lowrank"}
    strategy : {"ci", "cd", "prreg"}
    loss : {"l2", "l1"}
    hidden_units : int
        MLP width.
    rank_rate : int
        Rank reduction rate of the low-rank layer.
    reg_lambda : float
        PRReg weight decay. Ignored by the other strategies.
    learning_rate : float or None
        None picks 5e-3 for Linear and 1e-3 otherwise.
    epochs, batch_size, early_stop_patience, weight_decay, optimizer, seed
        Training loop settings.

    ``fit(X, y, X_val=None, y_val=None)`` takes windows (N, L, C) and targets
    (N, H, C). Early stopping only acts when a validation set is given.
    """

    def __init__(self, architecture="linear", strategy="ci", loss="l2", hidden_units=256,
                 rank_rate=1, reg_lambda=0.0, learning_rate=None, epochs=100, batch_size=32,
                 early_stop_patience=10, weight_decay=0.0, optimizer="adam", seed=0):
        self.architecture = architecture
        self.strategy = strategy
        self.loss = loss
        self.hidden_units = hidden_units
        self.rank_rate = rank_rate
        self.reg_lambda = reg_lambda
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.early_stop_patience = early_stop_patience
        self.weight_decay = weight_decay
        self.optimizer = optimizer
        self.seed = seed

    def _spec(self):
        return ModelSpec(self.architecture, self.strategy, self.loss, self.hidden_units,
                         self.rank_rate, self.reg_lambda)

    def _config(self):
        return TrainConfig(self.learning_rate, self.epochs, self.batch_size, self.seed,
                           self.weight_decay, self.early_stop_patience, self.optimizer)

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = check_windows(X, y)
        val = None
        if X_val is not None:
            X_val, y_val = check_windows(X_val, y_val, lookback=X.shape[1], n_channels=X.shape[2])
            val = WindowedDataset(X_val, y_val)
        self.model_ = fit(self._spec(), WindowedDataset(X, y), self._config(), val)
        self.history_ = self.model_.history
        self.n_features_in_ = X.shape[2]
        self.lookback_ = X.shape[1]
        self.horizon_ = y.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_windows(X, lookback=self.lookback_, n_channels=self.n_features_in_)
        return self.model_.predict(X)

    def score(self, X, y, sample_weight=None):
        """Negative MSE over every sample, horizon step and channel."""
        return -float(np.mean((self.predict(X) - np.asarray(y)) ** 2))
