"""Gradient training of forecasters under the CD, CI and PRReg objectives.

* CD: one network maps the flattened window (L*C) to the flattened horizon (H*C).
* CI: one shared network maps a single channel's window (L) to its horizon (H);
  every channel of every window is a training sample.
* PRReg: a CD network fitted to ``Y - last`` from ``X - last`` where ``last``
  holds each channel's final observed value; predictions add ``last`` back.
  Its regularization strength is the weight decay coefficient.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..exceptions import DivergenceError
from ..series import SeriesScaler, WindowedDataset, stack_cd, unstack_cd
from . import layers
from .losses import loss as loss_fn
from .optim import OPTIMIZERS

logger = logging.getLogger(__name__)

STRATEGIES = ("cd", "ci", "prreg")
RANK_RATES = (1, 2, 4, 8, 16, 32, 64, 128, 256, 512)


@dataclass(frozen=True)
class ModelSpec:
    architecture: str = "linear"
    strategy: str = "ci"
    loss: str = "l2"
    hidden_units: int = 256
    rank_rate: int = 1
    reg_lambda: float = 0.0

    def __post_init__(self):
        if self.architecture not in layers.ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.loss not in ("l2", "l1"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        if self.rank_rate not in RANK_RATES:
            raise ValueError(f"rank_rate must be one of {RANK_RATES}")
        if self.reg_lambda < 0:
            raise ValueError("PRReg lambda must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: Optional[float] = None
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    weight_decay: float = 0.0
    early_stop_patience: Optional[int] = 10
    optimizer: str = "adam"
    lr_decay: float = 1.0

    def __post_init__(self):
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def resolved_lr(self, architecture: str) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 5e-3 if architecture == "linear" else 1e-3


# ---------------------------------------------------------------------------
# strategy views of a windowed dataset
# ---------------------------------------------------------------------------


def _views(strategy: str, X: np.ndarray, Y: Optional[np.ndarray] = None):
    """Sample-major arrays ``(N, k, in)`` / ``(N, k, out)``; k = C for CI else 1."""
    if strategy == "ci":
        inp = X.transpose(0, 2, 1)
        tgt = None if Y is None else Y.transpose(0, 2, 1)
        return inp, tgt
    if strategy == "prreg":
        last = X[:, -1:, :]
        X = X - last
        Y = None if Y is None else Y - last
    inp = stack_cd(X)[:, None, :]
    tgt = None if Y is None else stack_cd(Y)[:, None, :]
    return inp, tgt


def _dims(strategy, lookback, horizon, n_channels):
    if strategy == "ci":
        return lookback, horizon
    return lookback * n_channels, horizon * n_channels


@dataclass(eq=False)
class TrainedModel:
    spec: ModelSpec
    config: TrainConfig
    params: dict
    history: list
    lookback: int
    horizon: int
    n_channels: int
    scaler: Optional[SeriesScaler] = None
    best_epoch: int = 0

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Raw network output in the strategy's target space, shape (N, k, out)."""
        fwd, _ = layers.ARCHITECTURES[self.spec.architecture]
        inp, _ = _views(self.spec.strategy, X)
        N, k, d = inp.shape
        return fwd(self.params, inp.reshape(N * k, d)).reshape(N, k, -1)

    def predict(self, X) -> np.ndarray:
        """Forecast (N, H, C) from windows (N, L, C)."""
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 2
        if single:
            X = X[None]
        if X.shape[1:] != (self.lookback, self.n_channels):
            raise ValueError(f"windows of shape {X.shape[1:]}, expected {(self.lookback, self.n_channels)}")
        out = self.forward(X)
        if self.spec.strategy == "ci":
            Y = out.transpose(0, 2, 1)
        else:
            Y = unstack_cd(out[:, 0, :], self.horizon, self.n_channels)
            if self.spec.strategy == "prreg":
                Y = Y + X[:, -1:, :]
        return Y[0] if single else Y

    @property
    def train_losses(self):
        return [h["train_loss"] for h in self.history]

    def effective_weight(self):
        return layers.effective_weight(self.spec.architecture, self.params)

    def save(self, directory) -> Path:
        """JSON header plus one CSV per parameter block and the loss history."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        header = {
            "spec": asdict(self.spec),
            "config": asdict(self.config),
            "lookback": self.lookback,
            "horizon": self.horizon,
            "n_channels": self.n_channels,
            "best_epoch": self.best_epoch,
            "params": {k: list(v.shape) for k, v in self.params.items()},
        }
        if self.scaler is not None:
            header["normalization"] = {
                "mean": self.scaler.mean_.tolist(),
                "std": self.scaler.scale_.tolist(),
            }
        (directory / "model.json").write_text(json.dumps(header, indent=2))
        for k, v in self.params.items():
            np.savetxt(directory / f"{k}.csv", np.atleast_2d(v), delimiter=",", fmt="%.17g")
        write_history(self.history, directory / "history.csv")
        return directory

    @classmethod
    def load(cls, directory) -> "TrainedModel":
        directory = Path(directory)
        header = json.loads((directory / "model.json").read_text())
        params = {
            k: np.loadtxt(directory / f"{k}.csv", delimiter=",", ndmin=2).reshape(shape)
            for k, shape in header["params"].items()
        }
        scaler = None
        if "normalization" in header:
            scaler = SeriesScaler.from_stats(header["normalization"]["mean"], header["normalization"]["std"])
        return cls(
            ModelSpec(**header["spec"]),
            TrainConfig(**header["config"]),
            params,
            read_history(directory / "history.csv"),
            header["lookback"],
            header["horizon"],
            header["n_channels"],
            scaler,
            header.get("best_epoch", 0),
        )


def write_history(history, path):
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,val_loss\n")
        for h in history:
            val = "" if h["val_loss"] is None else repr(h["val_loss"])
            fh.write(f"{h['epoch']},{h['train_loss']!r},{val}\n")


def read_history(path):
    rows = []
    with open(path) as fh:
        next(fh)
        for line in fh:
            e, tr, va = line.rstrip("\n").split(",")
            rows.append({"epoch": int(e), "train_loss": float(tr), "val_loss": float(va) if va else None})
    return rows


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def _full_loss(kind, fwd, params, inp, tgt, chunk=4096):
    total = 0.0
    count = 0
    for s in range(0, inp.shape[0], chunk):
        x = inp[s:s + chunk]
        y = tgt[s:s + chunk]
        n, k, d = x.shape
        pred = fwd(params, x.reshape(n * k, d))
        value, _ = loss_fn(kind, pred, y.reshape(n * k, -1))
        total += value * y.size
        count += y.size
    return total / count


def fit(spec: ModelSpec, dataset: WindowedDataset, cfg: TrainConfig = TrainConfig(),
        val: Optional[WindowedDataset] = None, scaler: Optional[SeriesScaler] = None) -> TrainedModel:
    """Train ``spec`` on ``dataset`` and return the best-validation parameters.

    Without a validation set the final parameters are kept and early stopping
    is off.
    """
    if dataset.n_samples == 0:
        raise ValueError("empty dataset")
    L, H, C = dataset.lookback, dataset.horizon, dataset.n_channels
    n_in, n_out = _dims(spec.strategy, L, H, C)
    fwd, bwd = layers.ARCHITECTURES[spec.architecture]

    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    init_rng = np.random.default_rng(seeds[0])
    shuffle_rng = np.random.default_rng(seeds[1])
    params = layers.init_params(spec.architecture, init_rng, n_in, n_out, spec.hidden_units, spec.rank_rate)

    prreg = spec.strategy == "prreg"
    decay = spec.reg_lambda if prreg else cfg.weight_decay
    lr = cfg.resolved_lr(spec.architecture)
    opt_cls = OPTIMIZERS[cfg.optimizer]
    optimizer = opt_cls(params, lr, weight_decay=decay, decay_bias=prreg)

    inp, tgt = _views(spec.strategy, dataset.X, dataset.Y)
    vinp = vtgt = None
    if val is not None and val.n_samples:
        vinp, vtgt = _views(spec.strategy, val.X, val.Y)

    def losses():
        tr = _full_loss(spec.loss, fwd, params, inp, tgt)
        va = None if vinp is None else _full_loss(spec.loss, fwd, params, vinp, vtgt)
        return tr, va

    tr0, va0 = losses()
    history = [{"epoch": 0, "train_loss": tr0, "val_loss": va0}]
    best = {k: v.copy() for k, v in params.items()}
    best_val, best_epoch, stale = (va0 if va0 is not None else np.inf), 0, 0

    N = inp.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(N)
        for s in range(0, N, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            x = inp[idx]
            y = tgt[idx]
            n, k, d = x.shape
            x2 = x.reshape(n * k, d)
            pred = fwd(params, x2)
            _, grad = loss_fn(spec.loss, pred, y.reshape(n * k, -1))
            optimizer.step(params, bwd(params, x2, grad))
        tr, va = losses()
        history.append({"epoch": epoch, "train_loss": tr, "val_loss": va})
        if not np.isfinite(tr) or (va is not None and not np.isfinite(va)):
            raise DivergenceError(f"loss became non-finite at epoch {epoch}", epoch=epoch)
        if va is not None:
            if va < best_val:
                best_val, best_epoch, stale = va, epoch, 0
                best = {k: v.copy() for k, v in params.items()}
            else:
                stale += 1
                if cfg.early_stop_patience is not None and stale >= cfg.early_stop_patience:
                    logger.info("early stop at epoch %d (best %d)", epoch, best_epoch)
                    break
        optimizer.lr *= cfg.lr_decay

    if vinp is None:
        best, best_epoch = params, history[-1]["epoch"]
    return TrainedModel(spec, cfg, best, history, L, H, C, scaler, best_epoch)


def _checked(spec: ModelSpec, strategy: str) -> ModelSpec:
    if spec.strategy != strategy:
        raise ValueError(f"spec has strategy {spec.strategy!r}, expected {strategy!r}")
    return spec


def train_cd(spec, dataset, cfg=TrainConfig(), val=None, scaler=None):
    return fit(_checked(spec, "cd"), dataset, cfg, val, scaler)


def train_ci(spec, dataset, cfg=TrainConfig(), val=None, scaler=None):
    return fit(_checked(spec, "ci"), dataset, cfg, val, scaler)


def train_prreg(spec, dataset, cfg=TrainConfig(), val=None, scaler=None):
    return fit(_checked(spec, "prreg"), dataset, cfg, val, scaler)


def with_strategy(spec: ModelSpec, strategy: str, reg_lambda: Optional[float] = None) -> ModelSpec:
    return replace(spec, strategy=strategy, reg_lambda=spec.reg_lambda if reg_lambda is None else reg_lambda)
