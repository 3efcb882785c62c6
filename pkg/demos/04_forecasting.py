"""One-week-ahead return forecasting with the scratch LSTM.

Builds a deterministic series whose weekly returns follow a sine wave,
trains the forecaster on the first 80% of windows and scores direction
and error on the untouched tail. The resulting per-row forecast vector is
exactly what the trading environment accepts as an extra state feature.
"""

import datetime as dt
import warnings

import numpy as np

from quantrl.forecaster import (
    ForecastConfig,
    build_windows,
    evaluate_forecasts,
    forecast_series,
    train_forecaster,
)
from quantrl.tradeenv import MarketSeries, attach_forecast, zscore

n = 160
t = np.arange(n)
weekly_returns = 2.0 * np.sin(2 * np.pi * (t + 0.5) / 12)      # percent
closes = 100.0 * np.cumprod(1.0 + np.concatenate([[0.0], weekly_returns[1:]]) / 100.0)

dates = tuple(dt.date(2022, 1, 7) + dt.timedelta(weeks=i) for i in range(n))
features = np.column_stack([closes] + [np.full(n, v) for v in (20.0, 4.5, 4.0, 3.8, 3.5)])
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    series = zscore(MarketSeries(dates=dates, features=features), train_fraction=0.8)

dataset = build_windows(series, lookback=8, train_fraction=0.8)
print(f"{len(dataset)} windows, {dataset.train_count} for training")

model = train_forecaster(dataset, ForecastConfig(epochs=300, seed=1))
print(f"training loss: {model.loss_history[0]:.4f} -> {model.loss_history[-1]:.6f}")

val_inputs, val_targets = dataset.validation
scores = evaluate_forecasts(model.predict_batch(val_inputs), val_targets)
print(f"held-out rmse {scores.rmse:.4f}  pearson {scores.pearson:.4f}  "
      f"directional accuracy {scores.directional_accuracy:.2%}")

vector = forecast_series(model, series)
augmented = attach_forecast(series, vector)
print(f"forecast column attached; observations now carry "
      f"{augmented.normalized.shape[1] + 1} market features")
print("last five forecasts vs realized (percent):")
for i in range(n - 6, n - 1):
    print(f"  {series.dates[i]}  forecast {vector[i]:+.3f}   "
          f"realized {100 * (closes[i + 1] / closes[i] - 1):+.3f}")
