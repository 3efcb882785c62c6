"""The five-strategy comparison matrix, desk-scale.

Runs classical and quantum agents (each with and without the forecast
signal) plus the random baseline over one shared synthetic dataset and
seed, then prints the merged comparison table. Artifacts (CSVs, SVG
charts, config snapshots, checkpoints) land under ./demo_matrix_output.

The CLI equivalent:

    quantrl matrix --synthetic-kind sawtooth --synthetic-length 120 \
        --out demo_matrix_output --seed 3
"""

import time

from quantrl.a3c import TrainConfig
from quantrl.experiment import DEFAULT_MATRIX, ExperimentConfig, run_matrix
from quantrl.forecaster import ForecastConfig
from quantrl.synthetic import SyntheticSpec

config = ExperimentConfig(
    synthetic=SyntheticSpec("sawtooth", length=120, period=8, amplitude=0.10),
    strategy="classical",
    out_dir="demo_matrix_output",
    seed=3,
    train=TrainConfig(max_episodes=200, n_workers=2, seed=3, gamma=0.95,
                      learning_rate=1e-3, entropy_coeff=0.01,
                      latent_dim=4, update_every=20),
    forecast=ForecastConfig(epochs=100, hidden=16, lookback=8),
)

start = time.time()
result = run_matrix(config, DEFAULT_MATRIX)
print(f"matrix finished in {time.time() - start:.0f}s\n")
print(result.table_txt.read_text())
if result.failures:
    print("failed columns:", result.failures)
else:
    print(f"artifacts: {sorted(p.name for p in result.runs['quantum+lstm'].files.values())}")
    print("see demo_matrix_output/<strategy>/ for per-run CSVs and SVGs")
