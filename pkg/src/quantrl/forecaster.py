"""One-week-ahead LSTM forecaster of the weekly close return.

Windows are strictly causal: window k feeds the z-scored feature rows
[k, k+lookback) and its target is the percent return of the row right
after the inputs, 100 * (close[k+lookback] / close[k+lookback-1] - 1).
Validation windows chronologically follow all training windows.

Training is full-batch BPTT with Adam on mean squared error; inference is
deterministic given fixed parameters. ``forecast_series`` produces the
vector that ``tradeenv.attach_forecast`` expects: entry t predicts week
t+1's return using rows up to t only, with zeros before the first
complete lookback window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffnet
from .diffnet import Dense, LstmCell, Node, Tape
from .errors import EvaluationError, TrainingError
from .tradeenv import MarketSeries


@dataclass
class ForecastConfig:
    lookback: int = 8
    hidden: int = 32
    epochs: int = 300
    learning_rate: float = 0.01
    seed: int = 0
    train_fraction: float = 0.8
    direction_only: bool = False  # feed sign(prediction) instead of the value


@dataclass
class ForecastDataset:
    inputs: np.ndarray        # [n_windows, lookback, n_features]
    targets: np.ndarray       # [n_windows] next-week percent return
    end_dates: tuple          # last input date per window (alignment anchor)
    target_dates: tuple
    train_count: int

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def train(self):
        return self.inputs[: self.train_count], self.targets[: self.train_count]

    @property
    def validation(self):
        return self.inputs[self.train_count:], self.targets[self.train_count:]


@dataclass
class ForecastEvaluation:
    rmse: float
    pearson: float
    directional_accuracy: float


def build_windows(
    series: MarketSeries, lookback: int, train_fraction: float = 0.8
) -> ForecastDataset:
    """Slice a z-scored series into (lookback window, next-week return) pairs."""
    if lookback < 1:
        raise ValueError(f"lookback must be >= 1, got {lookback}")
    if not series.is_normalized:
        raise ValueError("series must be z-scored before windowing")
    n = len(series)
    n_windows = n - lookback
    if n_windows < 1:
        raise ValueError(
            f"series of length {n} is too short for lookback {lookback}"
        )
    close = series.close
    inputs = np.stack(
        [series.normalized[k: k + lookback] for k in range(n_windows)]
    )
    targets = 100.0 * (close[lookback:] / close[lookback - 1: -1] - 1.0)
    end_dates = tuple(series.dates[k + lookback - 1] for k in range(n_windows))
    target_dates = tuple(series.dates[k + lookback] for k in range(n_windows))
    train_count = min(n_windows, max(1, int(np.ceil(train_fraction * n_windows))))
    return ForecastDataset(inputs, targets, end_dates, target_dates, train_count)


class ForecastModel:
    """LstmCell over the window plus a scalar dense head on the final hidden."""

    def __init__(self, n_features: int, hidden: int, lookback: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.n_features = n_features
        self.lookback = lookback
        self.cell = LstmCell(n_features, hidden, rng)
        self.head = Dense(hidden, 1, rng)
        self.loss_history: list[float] = []

    def parameters(self):
        return self.cell.parameters() + self.head.parameters()

    def _forward(self, tape: Tape, windows: np.ndarray) -> Node:
        batch = windows.shape[0]
        h, c = self.cell.initial_state(batch=batch)
        for t in range(windows.shape[1]):
            h, c = tape.lstm(self.cell, Node(windows[:, t, :]), (h, c))
        return tape.dense(self.head, h)  # [batch, 1]

    def predict_batch(self, windows: np.ndarray) -> np.ndarray:
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim != 3 or windows.shape[1:] != (self.lookback, self.n_features):
            raise ValueError(
                f"windows must be [batch, {self.lookback}, {self.n_features}], "
                f"got {windows.shape}"
            )
        return self._forward(Tape(), windows).value[:, 0]


def predict(model: ForecastModel, window: np.ndarray) -> float:
    """Forecast next week's percent return from one lookback window."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (model.lookback, model.n_features):
        raise ValueError(
            f"window must have shape {(model.lookback, model.n_features)}, "
            f"got {window.shape}"
        )
    return float(model.predict_batch(window[None])[0])


def train_forecaster(dataset: ForecastDataset, config: ForecastConfig) -> ForecastModel:
    """Fit the forecaster on the training split by full-batch BPTT."""
    inputs, targets = dataset.train
    if inputs.shape[0] == 0:
        raise ValueError("training split is empty")
    if inputs.shape[1] != config.lookback:
        raise ValueError(
            f"dataset lookback {inputs.shape[1]} != config lookback {config.lookback}"
        )
    model = ForecastModel(
        inputs.shape[2], config.hidden, config.lookback, seed=config.seed
    )
    params = model.parameters()
    theta = diffnet.flatten_params(params)
    opt = diffnet.AdamOptimizer(theta.size, config.learning_rate)
    batch = inputs.shape[0]
    target_col = targets[:, None]

    for epoch in range(config.epochs):
        diffnet.zero_grads(params)
        tape = Tape()
        pred = model._forward(tape, inputs)
        err = tape.add_const(pred, -target_col)
        loss = tape.scale(tape.sum(tape.square(err)), 1.0 / batch)
        if not np.isfinite(loss.value):
            raise TrainingError(
                f"forecaster loss became non-finite at epoch {epoch}"
            )
        model.loss_history.append(float(loss.value))
        tape.backward(loss)
        theta = opt.step(theta, diffnet.flatten_grads(params))
        diffnet.set_flat_params(params, theta)
    return model


def forecast_series(model: ForecastModel, series: MarketSeries,
                    direction_only: bool = False) -> np.ndarray:
    """Per-row forecast vector aligned for ``attach_forecast``.

    Entry t is the model's prediction for week t+1 computed from the
    window ending at row t; rows before the first full window get 0.
    """
    if not series.is_normalized:
        raise ValueError("series must be z-scored")
    n = len(series)
    lb = model.lookback
    out = np.zeros(n)
    if n < lb:
        return out
    windows = np.stack([series.normalized[t - lb + 1: t + 1] for t in range(lb - 1, n)])
    preds = model.predict_batch(windows)
    out[lb - 1:] = np.sign(preds) if direction_only else preds
    return out


_CKPT_MAGIC = b"QLSTM"


def save_forecaster(model: ForecastModel, path) -> None:
    """JSON shape header + the flat-array blob (diffnet layout)."""
    import json
    import struct

    meta = json.dumps(
        {
            "n_features": model.n_features,
            "hidden": model.cell.hidden_size,
            "lookback": model.lookback,
        },
        sort_keys=True,
    ).encode()
    blob = diffnet.pack_arrays([p.value for p in model.parameters()])
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC + struct.pack("<I", len(meta)) + meta + blob)


def load_forecaster(path) -> ForecastModel:
    import json
    import struct

    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:5] != _CKPT_MAGIC:
        raise ValueError(f"{path} is not a forecaster checkpoint")
    (meta_len,) = struct.unpack_from("<I", raw, 5)
    meta = json.loads(raw[9:9 + meta_len].decode())
    model = ForecastModel(meta["n_features"], meta["hidden"], meta["lookback"])
    arrays = diffnet.unpack_arrays(raw[9 + meta_len:])
    params = model.parameters()
    if len(arrays) != len(params):
        raise ValueError("forecaster checkpoint parameter count mismatch")
    for p, a in zip(params, arrays):
        p.value[...] = a
    return model


def evaluate_forecasts(predictions, actuals) -> ForecastEvaluation:
    """RMSE, sample Pearson correlation and directional accuracy
    (sign(0) counts as up)."""
    p = np.asarray(predictions, dtype=np.float64)
    a = np.asarray(actuals, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 1 or p.size == 0:
        raise EvaluationError(
            f"predictions and actuals must be equal-length nonempty vectors, "
            f"got {p.shape} and {a.shape}"
        )
    rmse = float(np.sqrt(np.mean((p - a) ** 2)))
    dp, da = p - p.mean(), a - a.mean()
    denom = np.sqrt(np.sum(dp * dp) * np.sum(da * da))
    if denom == 0.0:
        raise EvaluationError("pearson correlation undefined: constant vector")
    pearson = float(np.sum(dp * da) / denom)
    accuracy = float(np.mean((p >= 0) == (a >= 0)))
    return ForecastEvaluation(rmse, pearson, accuracy)
