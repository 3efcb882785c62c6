"""Backtest analytics over an equity curve and trade log.

Formulas (weekly data, annualization factor P = 52, sample std unless
noted; r = periodic returns v_i / v_{i-1} - 1):

    sharpe          mean(r) / std_sample(r) * sqrt(P)
    sortino         mean(r) / sqrt(mean(min(r, 0)^2)) * sqrt(P)
    smart_sharpe    sharpe / p, p = sqrt(1 + 2 * sum_{k=1..K} (1 - k/(K+1)) rho_k)
                    with K = min(n-2, 20), rho_k the lag-k sample
                    autocorrelation, p floored at 1e-6
    volatility_ann  std_sample(r) * sqrt(P)
    gain_pain       sum(r) / |sum(min(r, 0))|
    profit_factor   sum(max(r, 0)) / |sum(min(r, 0))|   (omega is identical
                    under the threshold-0 definition)
    payoff_ratio    mean(r[r>0]) / |mean(r[r<0])|
    tail_ratio      |percentile(r, 95) / percentile(r, 5)|, linear interp
    max_drawdown    min over t of (v_t - peak_t) / peak_t (running peak)
    longest_drawdown  longest calendar-day span from a peak to the first
                    value meeting or exceeding it; an open drawdown at the
                    end counts up to the last date
    cumulative      v_end / v_0 - 1
    cagr            (v_end / v_0) ** (365 / calendar_days) - 1
    calmar          cagr / |max_drawdown|
    ulcer           sqrt(mean(dd_t^2)), dd_t = (v_t - peak_t) / peak_t
    recovery        cumulative / |max_drawdown|
    serenity        cumulative / (ulcer * pitfall), pitfall = |mean of the
                    worst ceil(5% n) returns| (at least one element)
    win_month       % of calendar months with positive month-end to
                    month-end return
    time_in_market  100 * (steps long) / steps

Undefined metrics (zero denominators and the like) are reported as NaN
with a named reason in ``MetricsReport.notes``, never as silent infinity.
Return- and drawdown-valued fields are fractions; the renderer multiplies
by 100 for the (%) rows. All functions are pure.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

PERIODS_PER_YEAR = 52

RATIO_METRIC_NAMES = (
    "sharpe", "sortino", "smart_sharpe", "volatility_ann", "tail_ratio",
    "payoff_ratio", "gain_pain", "profit_factor", "omega",
)


@dataclass(frozen=True)
class Trade:
    """One completed buy-sell cycle; profit is net of trade cost."""

    buy_date: dt.date
    buy_price: float
    sell_date: dt.date
    sell_price: float
    profit: float

    @property
    def holding_weeks(self) -> float:
        return (self.sell_date - self.buy_date).days / 7.0


@dataclass
class EquityCurve:
    dates: tuple
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.dates) != self.values.size:
            raise ValueError("dates and values must have matching length")
        if self.values.size == 0:
            raise ValueError("equity curve cannot be empty")
        if np.any(self.values <= 0):
            raise DataError("equity curve values must be positive")


@dataclass
class MetricsReport:
    time_in_market: float        # percent
    cumulative_return: float     # fraction
    cagr: float                  # fraction
    sharpe: float
    sortino: float
    smart_sharpe: float
    max_drawdown: float          # fraction <= 0
    longest_drawdown_days: int
    volatility_ann: float        # fraction
    calmar: float
    gain_pain: float
    profit_factor: float
    payoff_ratio: float
    tail_ratio: float
    omega: float
    ulcer_index: float
    recovery_factor: float
    serenity_index: float
    win_month_pct: float         # percent
    trade_count: int
    notes: dict = field(default_factory=dict)


def periodic_returns(values) -> np.ndarray:
    """r_i = v_i / v_{i-1} - 1 for a positive equity curve."""
    v = values.values if isinstance(values, EquityCurve) else np.asarray(
        values, dtype=np.float64
    )
    if v.size < 2:
        raise ValueError("need at least two equity values for returns")
    if np.any(v <= 0):
        raise DataError("equity values must be positive")
    return v[1:] / v[:-1] - 1.0


def max_drawdown(curve: EquityCurve) -> tuple[float, int]:
    """(depth as a fraction <= 0, longest drawdown span in calendar days)."""
    values = curve.values
    peaks = np.maximum.accumulate(values)
    depth = float(np.min((values - peaks) / peaks))

    longest = 0
    peak_date = curve.dates[0]
    peak_value = values[0]
    in_drawdown = False
    for date, value in zip(curve.dates[1:], values[1:]):
        if value >= peak_value:
            if in_drawdown:
                longest = max(longest, (date - peak_date).days)
                in_drawdown = False
            peak_value = value
            peak_date = date
        else:
            in_drawdown = True
    if in_drawdown:
        longest = max(longest, (curve.dates[-1] - peak_date).days)
    return depth, longest


def _autocorrelation(r: np.ndarray, lag: int) -> float:
    centered = r - r.mean()
    denom = float(np.sum(centered * centered))
    if denom == 0.0:
        return 0.0
    return float(np.sum(centered[:-lag] * centered[lag:]) / denom)


def ratio_metrics(
    returns, periods_per_year: int = PERIODS_PER_YEAR
) -> tuple[dict, dict]:
    """The nine return-ratio metrics.

    Returns (values, notes): undefined entries carry NaN in `values` and
    the reason in `notes`.
    """
    r = np.asarray(returns, dtype=np.float64)
    if r.size < 2:
        raise ValueError("need at least two returns")
    values: dict[str, float] = {}
    notes: dict[str, str] = {}

    def flag(name, reason):
        values[name] = math.nan
        notes[name] = reason

    ann = math.sqrt(periods_per_year)
    mean = float(r.mean())
    std = float(r.std(ddof=1))
    losses = np.minimum(r, 0.0)
    gains = np.maximum(r, 0.0)
    loss_total = float(abs(losses.sum()))
    downside = math.sqrt(float(np.mean(losses * losses)))

    values["volatility_ann"] = std * ann
    if std == 0.0:
        flag("sharpe", "zero return standard deviation")
        flag("smart_sharpe", "zero return standard deviation")
    else:
        values["sharpe"] = mean / std * ann
        n = r.size
        lags = min(n - 2, 20)
        acc = sum(
            (1.0 - k / (lags + 1.0)) * _autocorrelation(r, k)
            for k in range(1, lags + 1)
        )
        penalty = max(math.sqrt(max(1.0 + 2.0 * acc, 0.0)), 1e-6)
        values["smart_sharpe"] = values["sharpe"] / penalty

    if downside == 0.0:
        flag("sortino", "no negative returns")
    else:
        values["sortino"] = mean / downside * ann

    if loss_total == 0.0:
        flag("gain_pain", "no losing periods")
        flag("profit_factor", "no losing periods")
        flag("omega", "no losing periods")
    else:
        values["gain_pain"] = float(r.sum()) / loss_total
        values["profit_factor"] = float(gains.sum()) / loss_total
        values["omega"] = values["profit_factor"]

    wins = r[r > 0]
    loss_only = r[r < 0]
    if wins.size == 0 or loss_only.size == 0:
        flag("payoff_ratio", "needs both winning and losing periods")
    else:
        values["payoff_ratio"] = float(wins.mean()) / abs(float(loss_only.mean()))

    p95 = float(np.percentile(r, 95))
    p5 = float(np.percentile(r, 5))
    if p5 == 0.0:
        flag("tail_ratio", "5th percentile is zero")
    else:
        values["tail_ratio"] = abs(p95 / p5)

    return values, notes


def summary_metrics(
    curve: EquityCurve,
    trade_log: list[Trade],
    position_flags,
    periods_per_year: int = PERIODS_PER_YEAR,
) -> MetricsReport:
    """The full metric battery for one evaluation run."""
    flags = np.asarray(position_flags, dtype=np.float64)
    if flags.size != curve.values.size:
        raise ValueError("position flags must align with the equity curve")

    values = curve.values
    notes: dict[str, str] = {}
    r = periodic_returns(values)
    if r.size >= 2:
        ratios, ratio_notes = ratio_metrics(r, periods_per_year)
        notes.update(ratio_notes)
    else:
        ratios = {}
        for name in RATIO_METRIC_NAMES:
            notes[name] = "needs at least two returns"

    dd_depth, dd_days = max_drawdown(curve)
    cumulative = float(values[-1] / values[0] - 1.0)

    days = (curve.dates[-1] - curve.dates[0]).days
    if days <= 0:
        cagr = math.nan
        notes["cagr"] = "curve spans no calendar time"
    else:
        cagr = float((values[-1] / values[0]) ** (365.0 / days) - 1.0)

    peaks = np.maximum.accumulate(values)
    dd_series = (values - peaks) / peaks
    ulcer = float(np.sqrt(np.mean(dd_series * dd_series)))

    if dd_depth == 0.0:
        calmar = recovery = math.nan
        notes["calmar"] = "zero drawdown"
        notes["recovery_factor"] = "zero drawdown"
    else:
        calmar = cagr / abs(dd_depth) if not math.isnan(cagr) else math.nan
        if math.isnan(cagr):
            notes["calmar"] = "cagr undefined"
        recovery = cumulative / abs(dd_depth)

    worst_count = max(1, math.ceil(0.05 * r.size))
    pitfall = abs(float(np.sort(r)[:worst_count].mean()))
    if ulcer == 0.0 or pitfall == 0.0:
        serenity = math.nan
        notes["serenity_index"] = (
            "zero drawdown" if ulcer == 0.0 else "zero pitfall"
        )
    else:
        serenity = cumulative / (ulcer * pitfall)

    month_ends = []
    for i, date in enumerate(curve.dates):
        key = (date.year, date.month)
        if month_ends and month_ends[-1][0] == key:
            month_ends[-1] = (key, values[i])
        else:
            month_ends.append((key, values[i]))
    if len(month_ends) >= 2:
        month_values = np.array([v for _, v in month_ends])
        month_returns = month_values[1:] / month_values[:-1] - 1.0
        win_month = 100.0 * float(np.mean(month_returns > 0))
    else:
        win_month = math.nan
        notes["win_month_pct"] = "fewer than two calendar months"

    return MetricsReport(
        time_in_market=100.0 * float(flags.mean()),
        cumulative_return=cumulative,
        cagr=cagr,
        sharpe=ratios.get("sharpe", math.nan),
        sortino=ratios.get("sortino", math.nan),
        smart_sharpe=ratios.get("smart_sharpe", math.nan),
        max_drawdown=dd_depth,
        longest_drawdown_days=dd_days,
        volatility_ann=ratios.get("volatility_ann", math.nan),
        calmar=calmar,
        gain_pain=ratios.get("gain_pain", math.nan),
        profit_factor=ratios.get("profit_factor", math.nan),
        payoff_ratio=ratios.get("payoff_ratio", math.nan),
        tail_ratio=ratios.get("tail_ratio", math.nan),
        omega=ratios.get("omega", math.nan),
        ulcer_index=ulcer,
        recovery_factor=recovery,
        serenity_index=serenity,
        win_month_pct=win_month,
        trade_count=len(trade_log),
        notes=notes,
    )


def trade_behavior(trade_log: list[Trade]) -> dict:
    """Trade count, mean holding period (weeks) and a holding histogram."""
    count = len(trade_log)
    if count == 0:
        return {"trade_count": 0, "mean_holding_weeks": math.nan,
                "holding_histogram": {}}
    weeks = [t.holding_weeks for t in trade_log]
    histogram: dict[int, int] = {}
    for w in weeks:
        histogram[int(w)] = histogram.get(int(w), 0) + 1
    return {
        "trade_count": count,
        "mean_holding_weeks": float(np.mean(weeks)),
        "holding_histogram": dict(sorted(histogram.items())),
    }


# -- rendering ---------------------------------------------------------------

REPORT_ROWS = (
    ("Time in Market (%)", "time_in_market", 1.0),
    ("Cumulative Return (%)", "cumulative_return", 100.0),
    ("CAGR (%)", "cagr", 100.0),
    ("Sharpe Ratio", "sharpe", 1.0),
    ("Sortino Ratio", "sortino", 1.0),
    ("Smart Sharpe", "smart_sharpe", 1.0),
    ("Max Drawdown (%)", "max_drawdown", 100.0),
    ("Longest Drawdown (days)", "longest_drawdown_days", 1.0),
    ("Volatility (Ann.) (%)", "volatility_ann", 100.0),
    ("Calmar Ratio", "calmar", 1.0),
    ("Gain/Pain Ratio", "gain_pain", 1.0),
    ("Profit Factor", "profit_factor", 1.0),
    ("Payoff Ratio", "payoff_ratio", 1.0),
    ("Tail Ratio", "tail_ratio", 1.0),
    ("Omega Ratio", "omega", 1.0),
    ("Ulcer Index", "ulcer_index", 1.0),
    ("Recovery Factor", "recovery_factor", 1.0),
    ("Serenity Index", "serenity_index", 1.0),
    ("Win Month (%)", "win_month_pct", 1.0),
    ("Trades", "trade_count", 1.0),
)


def _format_cell(report: MetricsReport, attr: str, scale: float) -> str:
    value = getattr(report, attr)
    if isinstance(value, float) and math.isnan(value):
        reason = report.notes.get(attr, "undefined")
        return f"n/a ({reason})"
    if attr in ("longest_drawdown_days", "trade_count"):
        return str(int(value))
    return f"{value * scale:.4f}"


def report_table(reports: dict[str, MetricsReport],
                 failures: dict[str, str] | None = None) -> str:
    """Aligned text table; columns are strategies, rows the metric battery."""
    failures = failures or {}
    columns = list(reports) + list(failures)
    cells = {}
    for name, report in reports.items():
        cells[name] = [_format_cell(report, attr, scale)
                       for _, attr, scale in REPORT_ROWS]
    for name, reason in failures.items():
        cells[name] = [f"failed ({reason})"] + ["-"] * (len(REPORT_ROWS) - 1)

    label_width = max(len(label) for label, _, _ in REPORT_ROWS)
    widths = [max(len(col), max(len(c) for c in cells[col])) for col in columns]
    lines = [
        "Metric".ljust(label_width) + "  " + "  ".join(
            col.rjust(w) for col, w in zip(columns, widths)
        )
    ]
    lines.append("-" * len(lines[0]))
    for i, (label, _, _) in enumerate(REPORT_ROWS):
        row = label.ljust(label_width) + "  " + "  ".join(
            cells[col][i].rjust(w) for col, w in zip(columns, widths)
        )
        lines.append(row)
    return "\n".join(lines) + "\n"


def report_csv(reports: dict[str, MetricsReport],
               failures: dict[str, str] | None = None) -> str:
    """Key-value CSV mirror of the table (raw, unscaled field values)."""
    failures = failures or {}
    columns = list(reports) + list(failures)
    lines = ["metric," + ",".join(columns)]
    for label, attr, _ in REPORT_ROWS:
        row = [attr]
        for col in columns:
            if col in failures:
                row.append("failed")
            else:
                value = getattr(reports[col], attr)
                row.append(
                    "nan" if isinstance(value, float) and math.isnan(value)
                    else f"{value:.12g}"
                )
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
