"""The weekly trading environment: data in, rewards out.

Generates a synthetic market CSV, ingests it through the same loader
real data uses, and walks one scripted episode to show the reward and
accounting rules: selling pays price minus entry minus cost, everything
else pays zero, and an open position is force-liquidated on the last row.
"""

import tempfile
import warnings
from pathlib import Path

from quantrl.synthetic import SyntheticSpec, generate_synthetic
from quantrl.tradeenv import BUY, HOLD, SELL, EnvConfig, TradingEnv, load_market_csv, zscore

out_dir = Path(tempfile.mkdtemp(prefix="quantrl_demo_"))
csv_path = out_dir / "market.csv"
generate_synthetic(SyntheticSpec("sawtooth", length=24, period=8), csv_path)
print("wrote", csv_path)

series = load_market_csv(csv_path)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")          # constant macro columns
    series = zscore(series, train_fraction=0.8)

env = TradingEnv(series, EnvConfig(trade_cost_rate=0.001, initial_cash=10_000))
obs = env.reset()
print(f"observation dim {env.observation_dim}, episode length {len(env)}")

script = [BUY] + [HOLD] * 6 + [SELL]          # ride one sawtooth ramp
script += [HOLD] * (len(env) - len(script))

total = 0.0
done = False
for action in script:
    obs, reward, done, info = env.step(action)
    total += reward
    if reward != 0.0:
        print(f"{info['date']}  {'sell' if info['executed_action'] == SELL else 'liquidation'}"
              f" at {info['price']:.2f} -> reward {reward:+.3f}")
    if done:
        break

print(f"\nepisode reward      {total:+.3f}")
print(f"realized P&L        {env.state.realized_pnl:+.3f} (identical by construction)")
print(f"final balance       {env.state.balance:.3f}")
