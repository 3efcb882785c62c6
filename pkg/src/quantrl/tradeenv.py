"""Episodic weekly trading environment over market data.

CSV schema (one row per week, ISO-8601 dates, `.` decimal separator):

    date,close,vix,fedfunds,dgs2,dgs10,hy_spread[,forecast]

The convention for building weekly rows from daily sources is "last
observation of each ISO week". Macro series publish at different cadences,
so gaps are forward-filled on ingestion and leading unfillable rows are
dropped.

The MDP: actions {0 hold, 1 buy, 2 sell} on a one-unit index position.
Selling a position opened at p_buy when the close is p yields reward
p - p_buy - c * p (c = trade cost rate); every other step pays 0. The
portfolio value is balance plus unrealized profit while long. Episodes
run the full series; a position still open on the last row is force-
liquidated at the final close with the same sell formula, which keeps the
accounting identity (final balance - initial cash = sum of sell rewards)
exact.

Observations are z-scored features (stats from a training prefix only,
so nothing leaks backward from later rows), optionally extended with the
attached forecast and with [position flag, unrealized P&L fraction].
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, IngestionError

FEATURE_COLUMNS = ("close", "vix", "fedfunds", "dgs2", "dgs10", "hy_spread")

HOLD, BUY, SELL = 0, 1, 2
ACTION_NAMES = {HOLD: "hold", BUY: "buy", SELL: "sell"}
FLAT, LONG = 0, 1


@dataclass
class MarketSeries:
    """Ordered weekly rows: raw features plus (after `zscore`) normalized ones."""

    dates: tuple
    features: np.ndarray                      # [n, 6] raw values
    forecast: np.ndarray | None = None        # [n] raw next-week return forecast (%)
    normalized: np.ndarray | None = None      # [n, 6] z-scored features
    normalized_forecast: np.ndarray | None = None
    n_train: int | None = None                # rows whose stats were used for z-scoring

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if len(self.dates) != self.features.shape[0]:
            raise ValueError("dates and features must have matching length")
        if self.features.ndim != 2 or self.features.shape[1] != len(FEATURE_COLUMNS):
            raise ValueError(f"features must be [n, {len(FEATURE_COLUMNS)}]")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def close(self) -> np.ndarray:
        return self.features[:, 0]

    @property
    def is_normalized(self) -> bool:
        return self.normalized is not None

    @property
    def has_forecast(self) -> bool:
        return self.forecast is not None


def _parse_float(text: str, column: str, row_number: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise IngestionError(
            f"row {row_number}: cannot parse {column}={text!r} as a number"
        ) from None


def load_market_csv(path, column_map: dict | None = None) -> MarketSeries:
    """Read the weekly schema, sort by date, forward-fill gaps.

    `column_map` renames schema columns to CSV headers, e.g.
    {"close": "SP500"}. Raises IngestionError (with the offending row
    number) on unparseable content, duplicate dates or an empty result.
    """
    column_map = column_map or {}

    def col(name):
        return column_map.get(name, name)

    rows = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestionError(f"{path}: empty file, expected a header row")
        missing = [c for c in FEATURE_COLUMNS if col(c) not in reader.fieldnames]
        if col("date") not in reader.fieldnames:
            missing.insert(0, "date")
        if missing:
            raise IngestionError(f"{path}: missing columns {missing}")
        has_forecast = col("forecast") in reader.fieldnames

        for row_number, raw in enumerate(reader, start=2):  # header is line 1
            text = raw.get(col("date")) or ""
            try:
                date = dt.date.fromisoformat(text.strip())
            except ValueError:
                raise IngestionError(
                    f"row {row_number}: cannot parse date {text!r} as ISO-8601"
                ) from None
            values = []
            for column in FEATURE_COLUMNS:
                cell = (raw.get(col(column)) or "").strip()
                values.append(
                    _parse_float(cell, column, row_number) if cell else None
                )
            fc = None
            if has_forecast:
                cell = (raw.get(col("forecast")) or "").strip()
                fc = _parse_float(cell, "forecast", row_number) if cell else 0.0
            rows.append((date, values, fc, row_number))

    if not rows:
        raise IngestionError(f"{path}: no data rows")

    rows.sort(key=lambda r: r[0])
    for (d1, _, _, n1), (d2, _, _, n2) in zip(rows, rows[1:]):
        if d1 == d2:
            raise IngestionError(f"duplicate date {d1} (rows {n1} and {n2})")

    # forward-fill feature gaps; rows before the first complete set are dropped
    filled = []
    last = [None] * len(FEATURE_COLUMNS)
    for date, values, fc, row_number in rows:
        merged = [v if v is not None else last[i] for i, v in enumerate(values)]
        last = merged
        if any(v is None for v in merged):
            continue
        filled.append((date, merged, fc))
    if not filled:
        raise IngestionError(f"{path}: every row has unfillable gaps")

    dates = tuple(r[0] for r in filled)
    features = np.array([r[1] for r in filled], dtype=np.float64)
    if np.any(features[:, 0] <= 0):
        bad = int(np.argmax(features[:, 0] <= 0))
        raise IngestionError(f"nonpositive close at {dates[bad]}")
    forecast = (
        np.array([r[2] for r in filled], dtype=np.float64) if has_forecast else None
    )
    return MarketSeries(dates=dates, features=features, forecast=forecast)


def _zscore_columns(values: np.ndarray, n_train: int, what: str):
    mean = values[:n_train].mean(axis=0)
    std = values[:n_train].std(axis=0)  # population std
    out = np.zeros_like(values)
    for j in range(values.shape[1]):
        # rounding noise can make a constant column's std ~1e-16, not 0
        if std[j] <= 1e-12 * max(1.0, abs(mean[j])):
            warnings.warn(
                f"{what} column {j} is constant over the training prefix; "
                "normalizing to zeros"
            )
        else:
            out[:, j] = (values[:, j] - mean[j]) / std[j]
    return out, mean, std


def zscore(series: MarketSeries, train_fraction: float = 1.0) -> MarketSeries:
    """Z-score every feature with mean/population-std from the first
    ceil(train_fraction * n) rows. Constant columns map to zeros with a
    warning."""
    if not 0 < train_fraction <= 1:
        raise ValueError(f"train_fraction must be in (0, 1], got {train_fraction}")
    n_train = max(1, math.ceil(train_fraction * len(series)))
    normalized, _, _ = _zscore_columns(series.features, n_train, "feature")
    out = replace(series, normalized=normalized, n_train=n_train)
    if series.forecast is not None:
        nf, _, _ = _zscore_columns(series.forecast[:, None], n_train, "forecast")
        out.normalized_forecast = nf[:, 0]
    return out


def attach_forecast(series: MarketSeries, forecasts) -> MarketSeries:
    """Attach a next-week return forecast aligned row-by-row.

    forecasts[t] must be the prediction of week t+1's return made from
    rows <= t only (rows before the forecaster's first valid window carry
    0). On a normalized series the forecast is z-scored with the same
    training-prefix convention.
    """
    fc = np.asarray(forecasts, dtype=np.float64)
    if fc.shape != (len(series),):
        raise ValueError(
            f"forecast vector must have length {len(series)}, got {fc.shape}"
        )
    out = replace(series, forecast=fc.copy())
    if series.is_normalized:
        nf, _, _ = _zscore_columns(fc[:, None], series.n_train, "forecast")
        out.normalized_forecast = nf[:, 0]
    return out


@dataclass
class EnvConfig:
    trade_cost_rate: float = 0.001
    initial_cash: float = 10_000.0
    include_position_in_state: bool = True

    def __post_init__(self):
        if not 0 <= self.trade_cost_rate < 1:
            raise ConfigError(
                f"trade_cost_rate must be in [0, 1), got {self.trade_cost_rate}"
            )


@dataclass
class EnvState:
    """realized_pnl accumulates sell rewards in execution order, so the
    accounting identity (balance - initial cash == sum of sell rewards)
    holds bit-exactly; balance is derived from it."""

    initial_cash: float
    t: int = 0
    position: int = FLAT
    buy_price: float | None = None
    realized_pnl: float = 0.0
    done: bool = False

    @property
    def balance(self) -> float:
        return self.initial_cash + self.realized_pnl


class TradingEnv:
    """Gym-style episodic MDP over an immutable, z-scored MarketSeries.

    Inapplicable trade actions (buy while long, sell while flat) execute
    as hold. Workers must each own their env instance; the underlying
    series is read-only and may be shared.
    """

    def __init__(self, series: MarketSeries, config: EnvConfig | None = None):
        if len(series) == 0:
            raise ValueError("cannot trade an empty series")
        if not series.is_normalized:
            raise ValueError("series must be z-scored before trading (call zscore)")
        self.series = series
        self.config = config or EnvConfig()
        cols = [series.normalized]
        if series.normalized_forecast is not None:
            cols.append(series.normalized_forecast[:, None])
        self._obs_base = np.ascontiguousarray(np.hstack(cols))
        self._state = EnvState(initial_cash=self.config.initial_cash)
        self._close = series.close

    def __len__(self) -> int:
        return len(self.series)

    @property
    def observation_dim(self) -> int:
        extra = 2 if self.config.include_position_in_state else 0
        return self._obs_base.shape[1] + extra

    @property
    def state(self) -> EnvState:
        return self._state

    def _observe(self, t: int) -> np.ndarray:
        base = self._obs_base[t]
        if not self.config.include_position_in_state:
            return base.copy()
        s = self._state
        if s.position == LONG:
            pnl = (self._close[t] - s.buy_price) / s.buy_price
            tail = (1.0, pnl)
        else:
            tail = (0.0, 0.0)
        return np.concatenate([base, tail])

    def reset(self) -> np.ndarray:
        self._state = EnvState(initial_cash=self.config.initial_cash)
        return self._observe(0)

    def step(self, action: int):
        """Returns (observation, reward, done, info)."""
        s = self._state
        if s.done:
            raise ValueError("step called after the episode ended; call reset")
        if action not in (HOLD, BUY, SELL):
            raise ValueError(f"action must be 0, 1 or 2, got {action}")

        t = s.t
        price = self._close[t]
        cost = self.config.trade_cost_rate
        reward = 0.0
        executed = HOLD

        if action == BUY and s.position == FLAT:
            s.position = LONG
            s.buy_price = price
            executed = BUY
        elif action == SELL and s.position == LONG:
            reward = price - s.buy_price - cost * price
            s.realized_pnl += reward
            s.position = FLAT
            s.buy_price = None
            executed = SELL

        position_after_action = s.position
        done = t == len(self) - 1
        liquidated = False
        if done and s.position == LONG:
            liq = price - s.buy_price - cost * price
            reward += liq
            s.realized_pnl += liq
            s.position = FLAT
            s.buy_price = None
            liquidated = True

        asset = s.balance + (price - s.buy_price if s.position == LONG else 0.0)
        info = {
            "asset_value": asset,
            "executed_action": executed,
            "position": position_after_action,
            "price": price,
            "date": self.series.dates[t],
            "liquidated": liquidated,
        }
        s.done = done
        s.t = min(t + 1, len(self) - 1)
        return self._observe(s.t), reward, done, info
