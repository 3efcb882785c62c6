"""Asynchronous advantage actor-critic trainer with pluggable classical or
hybrid-quantum policy/value heads.

Both heads share one layout: dense in -> tanh -> encoder -> tanh -> dense
out (softmax over {hold, buy, sell} for the policy, a scalar for the
value). The encoder is either a variational quantum circuit on
``latent_dim`` qubits or a same-width dense layer, so the two modes are
drop-in replacements for each other.

Workers own a private environment and network copy. Every ``update_every``
steps (or at episode end) a worker computes n-step returns, pushes
gradients to the global parameter store and pulls the post-update
parameters back; the push-then-pull is one atomic transaction under the
store's lock. The advantage is treated as a constant in the policy term
(no gradient flows through it), the standard actor-critic formulation.

A single-worker run with a fixed seed is bit-reproducible.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import os
import struct
import threading
from dataclasses import dataclass

import numpy as np

from . import diffnet
from .diffnet import Dense, Node, Param, Tape, categorical_sample
from .errors import ConfigError, GradientRejected, TrainingError
from .metrics import Trade
from .tradeenv import ACTION_NAMES, BUY, SELL, TradingEnv

N_ACTIONS = 3
_NAME_TO_ACTION = {name: action for action, name in ACTION_NAMES.items()}


@dataclass
class TrainConfig:
    gamma: float = 0.9
    update_every: int = 10          # steps between global pushes
    max_episodes: int = 3000
    n_workers: int | None = None    # default: machine core count, min 2
    learning_rate: float = 1e-3
    seed: int = 0
    head_kind: str = "classical"    # or "quantum"
    entropy_coeff: float = 0.0
    latent_dim: int = 8             # qubit count in quantum mode
    vqc_depth: int = 2
    optimizer: str = "adam"         # "sgd" keeps the plain update rule
    clip_norm: float | None = 40.0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.update_every < 1:
            raise ConfigError("update_every must be >= 1")
        if self.max_episodes < 1:
            raise ConfigError("max_episodes must be >= 1")
        if self.n_workers is not None and self.n_workers < 1:
            raise ConfigError("n_workers must be >= 1")
        if self.head_kind not in ("classical", "quantum"):
            raise ConfigError(f"unknown head_kind {self.head_kind!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")

    @property
    def resolved_workers(self) -> int:
        if self.n_workers is not None:
            return self.n_workers
        return max(2, os.cpu_count() or 1)


class ActorCriticNet:
    """Policy and value heads over a shared input dimension.

    Policy and value use separate encoders (two circuits in quantum mode);
    parameter order is fixed so flat vectors are interchangeable between
    identically-configured nets.
    """

    def __init__(self, obs_dim: int, head_kind: str = "classical",
                 latent_dim: int = 8, vqc_depth: int = 2, seed: int = 0):
        if head_kind not in ("classical", "quantum"):
            raise ConfigError(f"unknown head_kind {head_kind!r}")
        self.obs_dim = obs_dim
        self.head_kind = head_kind
        self.latent_dim = latent_dim
        self.vqc_depth = vqc_depth
        rng = np.random.default_rng(seed)

        def encoder():
            if head_kind == "quantum":
                return Param(rng.uniform(-0.1, 0.1, (vqc_depth, latent_dim, 2)))
            return Dense(latent_dim, latent_dim, rng)

        self.policy_in = Dense(obs_dim, latent_dim, rng)
        self.policy_encoder = encoder()
        self.policy_out = Dense(latent_dim, N_ACTIONS, rng)
        self.value_in = Dense(obs_dim, latent_dim, rng)
        self.value_encoder = encoder()
        self.value_out = Dense(latent_dim, 1, rng)

    def parameters(self) -> list[Param]:
        params = []
        for part in (self.policy_in, self.policy_encoder, self.policy_out,
                     self.value_in, self.value_encoder, self.value_out):
            params.extend([part] if isinstance(part, Param) else part.parameters())
        return params

    def _encode(self, tape: Tape, encoder, z: Node) -> Node:
        if isinstance(encoder, Param):
            return tape.vqc(encoder, self.latent_dim, self.vqc_depth, z)
        return tape.dense(encoder, z)

    def forward_policy(self, tape: Tape, s: Node) -> tuple[Node, Node]:
        """(action distribution, logits) for one observation or a batch."""
        z = tape.tanh(tape.dense(self.policy_in, s))
        q = self._encode(tape, self.policy_encoder, z)
        logits = tape.dense(self.policy_out, tape.tanh(q))
        return tape.softmax(logits), logits

    def forward_value(self, tape: Tape, s: Node) -> Node:
        z = tape.tanh(tape.dense(self.value_in, s))
        q = self._encode(tape, self.value_encoder, z)
        return tape.dense(self.value_out, tape.tanh(q))  # [..., 1]

    def policy_probs(self, obs: np.ndarray) -> np.ndarray:
        probs, _ = self.forward_policy(Tape(), Node(obs))
        return probs.value

    def value(self, obs: np.ndarray) -> float:
        return float(self.forward_value(Tape(), Node(obs)).value[-1])

    # flat parameter plumbing
    def get_flat(self) -> np.ndarray:
        return diffnet.flatten_params(self.parameters())

    def set_flat(self, theta: np.ndarray) -> None:
        diffnet.set_flat_params(self.parameters(), theta)

    def flat_grads(self) -> np.ndarray:
        return diffnet.flatten_grads(self.parameters())

    def zero_grads(self) -> None:
        diffnet.zero_grads(self.parameters())


def forward_policy(net: ActorCriticNet, obs: np.ndarray) -> np.ndarray:
    """Action distribution over {hold, buy, sell} for one observation."""
    return net.policy_probs(obs)


def n_step_returns(rewards, bootstrap: float, gamma: float) -> np.ndarray:
    """Discounted returns by backward recursion R_t = r_t + gamma R_{t+1},
    seeded with the bootstrap value (0 at terminal states)."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ValueError("rewards must be nonempty")
    out = np.empty_like(r)
    acc = float(bootstrap)
    for i in range(r.size - 1, -1, -1):
        acc = r[i] + gamma * acc
        out[i] = acc
    return out


class Trajectory:
    """Rolling (state, action, reward) buffer, cleared after each push."""

    def __init__(self):
        self.states: list[np.ndarray] = []
        self.actions: list[int] = []
        self.rewards: list[float] = []

    def append(self, state, action, reward) -> None:
        self.states.append(state)
        self.actions.append(action)
        self.rewards.append(reward)

    def clear(self) -> None:
        self.states.clear()
        self.actions.clear()
        self.rewards.clear()

    def __len__(self) -> int:
        return len(self.actions)


def compute_loss_and_grads(
    net: ActorCriticNet,
    states,
    actions,
    returns,
    entropy_coeff: float = 0.0,
) -> tuple[float, np.ndarray]:
    """Summed actor-critic loss over a trajectory and its flat gradient.

    L = sum_t [ 0.5 (R_t - V(s_t))^2 - log pi(a_t|s_t) (R_t - V(s_t)) ]
    with the advantage detached in the policy term; an optional entropy
    bonus -entropy_coeff * H(pi) is added when configured.
    """
    states = np.asarray(states, dtype=np.float64)
    if states.ndim == 1:
        states = states[None, :]
    actions = np.asarray(actions, dtype=np.intp)
    returns = np.asarray(returns, dtype=np.float64)
    if not (states.shape[0] == actions.size == returns.size):
        raise ValueError("states, actions and returns must have equal length")

    net.zero_grads()
    tape = Tape()
    s = Node(states)
    probs, _ = net.forward_policy(tape, s)
    v = net.forward_value(tape, s)                 # [K, 1]
    advantage = returns - v.value[:, 0]            # detached

    logp = tape.log(probs)
    logp_taken = tape.pick(logp, actions)
    policy_term = tape.sum(tape.scale(logp_taken, -advantage))
    value_err = tape.add_const(v, -returns[:, None])
    value_term = tape.scale(tape.sum(tape.square(value_err)), 0.5)
    loss = tape.add(value_term, policy_term)
    if entropy_coeff:
        negative_entropy = tape.sum(tape.mul(probs, logp))
        loss = tape.add(loss, tape.scale(negative_entropy, entropy_coeff))
    tape.backward(loss)
    return float(loss.value), net.flat_grads()


class GlobalParams:
    """Shared flat parameter vector, optimizer state and episode ledger.

    push_and_pull applies one optimizer step atomically and returns a
    snapshot of the post-update parameters; readers never observe a
    half-applied step.
    """

    def __init__(self, theta: np.ndarray, optimizer, max_episodes: int):
        self._theta = np.asarray(theta, dtype=np.float64).copy()
        self._optimizer = optimizer
        self._max_episodes = max_episodes
        self._started = 0
        self._lock = threading.Lock()
        self.episode_rewards: list[float] = []

    def push_and_pull(self, grads: np.ndarray) -> np.ndarray:
        if grads.shape != self._theta.shape:
            raise ValueError(
                f"gradient shape {grads.shape} != parameters {self._theta.shape}"
            )
        if not np.all(np.isfinite(grads)):
            raise GradientRejected("non-finite gradient rejected")
        with self._lock:
            self._theta = self._optimizer.step(self._theta, grads)
            return self._theta.copy()

    def pull(self) -> np.ndarray:
        with self._lock:
            return self._theta.copy()

    def try_begin_episode(self) -> bool:
        """Reserve an episode slot; False once max_episodes are claimed."""
        with self._lock:
            if self._started >= self._max_episodes:
                return False
            self._started += 1
            return True

    def record_episode(self, reward: float) -> None:
        with self._lock:
            self.episode_rewards.append(float(reward))


@dataclass
class TrainingHistory:
    rewards: list[float]
    moving_average: list[float]
    final_theta: np.ndarray

    def to_csv(self, path, stamp: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if stamp:
                fh.write(f"# {stamp}\n")
            writer = csv.writer(fh)
            writer.writerow(["episode", "reward", "moving_average"])
            for i, (r, m) in enumerate(zip(self.rewards, self.moving_average)):
                writer.writerow([i, f"{r:.12g}", f"{m:.12g}"])


def moving_average(values, window: int = 100) -> list[float]:
    out = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out


def _worker_loop(worker_id, config, global_params, env, net, stop):
    rng = np.random.default_rng([config.seed, worker_id])
    net.set_flat(global_params.pull())
    trajectory = Trajectory()
    k = config.update_every

    while not stop.is_set() and global_params.try_begin_episode():
        obs = env.reset()
        episode_reward = 0.0
        trajectory.clear()
        done = False
        while not done:
            probs = net.policy_probs(obs)
            action = categorical_sample(probs, rng)
            next_obs, reward, done, _ = env.step(action)
            trajectory.append(obs, action, reward)
            episode_reward += reward
            if len(trajectory) >= k or done:
                bootstrap = 0.0 if done else net.value(next_obs)
                returns = n_step_returns(trajectory.rewards, bootstrap, config.gamma)
                _, grads = compute_loss_and_grads(
                    net, trajectory.states, trajectory.actions, returns,
                    entropy_coeff=config.entropy_coeff,
                )
                if config.clip_norm:
                    grads = diffnet.clip_global_norm(grads, config.clip_norm)
                try:
                    theta = global_params.push_and_pull(grads)
                except GradientRejected:
                    theta = global_params.pull()  # resync, drop the bad update
                net.set_flat(theta)
                trajectory.clear()
            obs = next_obs
        global_params.record_episode(episode_reward)


def train(config: TrainConfig, env_factory, net_factory=None) -> TrainingHistory:
    """Run N workers until max_episodes episodes have been claimed.

    env_factory() must build a fresh environment per call; net_factory()
    (optional) a fresh, identically-seeded network. Returns the reward
    history plus the final global parameters (``final_theta``).
    """
    if net_factory is None:
        probe_env = env_factory()

        def net_factory():
            return ActorCriticNet(
                probe_env.observation_dim,
                head_kind=config.head_kind,
                latent_dim=config.latent_dim,
                vqc_depth=config.vqc_depth,
                seed=config.seed,
            )

    template = net_factory()
    optimizer = diffnet.make_optimizer(
        config.optimizer, template.get_flat().size, config.learning_rate
    )
    global_params = GlobalParams(
        template.get_flat(), optimizer, config.max_episodes
    )

    n_workers = config.resolved_workers
    errors: list[BaseException] = []
    stop = threading.Event()

    def run(worker_id):
        try:
            _worker_loop(
                worker_id, config, global_params,
                env_factory(), net_factory(), stop,
            )
        except BaseException as exc:  # noqa: BLE001 - worker diagnostics
            errors.append(exc)
            stop.set()

    if n_workers == 1:
        run(0)  # keep single-worker runs on the calling thread: reproducible
    else:
        threads = [
            threading.Thread(target=run, args=(i,), name=f"a3c-worker-{i}")
            for i in range(n_workers)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

    if errors:
        raise TrainingError(f"worker failed: {errors[0]!r}") from errors[0]
    rewards = list(global_params.episode_rewards)
    return TrainingHistory(
        rewards=rewards,
        moving_average=moving_average(rewards),
        final_theta=global_params.pull(),
    )


# -- evaluation ---------------------------------------------------------------

@dataclass
class EvaluationRun:
    """Greedy (or random-baseline) rollout: per-step records plus the
    completed trade log. position_flags reflect the post-action position,
    before any forced terminal liquidation."""

    dates: list
    actions: list[int]
    prices: list[float]
    asset_values: list[float]
    position_flags: list[int]
    trades: list[Trade]

    @property
    def final_asset(self) -> float:
        return self.asset_values[-1]

    def to_csv(self, path, stamp: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if stamp:
                fh.write(f"# {stamp}\n")
            writer = csv.writer(fh)
            writer.writerow(["date", "action", "price", "asset_value"])
            for date, action, price, asset in zip(
                self.dates, self.actions, self.prices, self.asset_values
            ):
                writer.writerow(
                    [date.isoformat(), ACTION_NAMES[action],
                     f"{price:.12g}", f"{asset:.12g}"]
                )

    @staticmethod
    def from_csv(path) -> "EvaluationRun":
        """Rebuild a run (including flags and trades) by replaying the log."""
        dates, actions, prices, assets = [], [], [], []
        with open(path, newline="") as fh:
            rows = [line for line in fh if not line.startswith("#")]
        for record in csv.DictReader(rows):
            dates.append(dt.date.fromisoformat(record["date"]))
            actions.append(_NAME_TO_ACTION[record["action"]])
            prices.append(float(record["price"]))
            assets.append(float(record["asset_value"]))
        flags, trades = _replay(dates, actions, prices, assets)
        return EvaluationRun(dates, actions, prices, assets, flags, trades)


def _replay(dates, actions, prices, assets):
    """Position flags and trade log implied by an executed-action log.

    Trade profit is the realized balance change, read off the asset
    column: the asset at a buy row equals the flat balance (no unrealized
    move yet), so profit = asset[sell] - asset[buy]. A buy on the final
    row is liquidated within the same step and its recorded asset is
    already post-liquidation; the prior row's asset is the pre-trade
    balance in that case.
    """
    flags = []
    trades = []
    open_trade = None
    last = len(actions) - 1
    for i, action in enumerate(actions):
        if action == BUY and open_trade is None:
            open_trade = (i, dates[i], prices[i])
        elif action == SELL and open_trade is not None:
            idx, buy_date, buy_price = open_trade
            trades.append(Trade(buy_date, buy_price, dates[i], prices[i],
                                assets[i] - assets[idx]))
            open_trade = None
        flags.append(1 if open_trade is not None else 0)
    if open_trade is not None:  # forced terminal liquidation
        idx, buy_date, buy_price = open_trade
        if idx == last:
            base = assets[idx - 1] if idx > 0 else None
        else:
            base = assets[idx]
        profit = assets[-1] - base if base is not None else 0.0
        trades.append(Trade(buy_date, buy_price, dates[-1], prices[-1], profit))
    return flags, trades


def greedy_action(probs: np.ndarray) -> int:
    """argmax with ties broken toward the lowest action index."""
    return int(np.argmax(probs))


def _rollout(env: TradingEnv, pick_action) -> EvaluationRun:
    obs = env.reset()
    dates, actions, prices, assets, flags = [], [], [], [], []
    done = False
    while not done:
        action = pick_action(obs)
        obs, _, done, info = env.step(action)
        dates.append(info["date"])
        actions.append(info["executed_action"])
        prices.append(info["price"])
        assets.append(info["asset_value"])
        flags.append(info["position"])
    trade_flags, trades = _replay(dates, actions, prices, assets)
    assert trade_flags == flags
    return EvaluationRun(dates, actions, prices, assets, flags, trades)


def evaluate_policy(net, env: TradingEnv) -> EvaluationRun:
    """One deterministic greedy episode of the trained policy."""
    return _rollout(env, lambda obs: greedy_action(net.policy_probs(obs)))


def evaluate_random(env: TradingEnv, seed: int = 0) -> EvaluationRun:
    """Uniform-random baseline episode with a seeded generator."""
    rng = np.random.default_rng(seed)
    return _rollout(env, lambda obs: int(rng.integers(N_ACTIONS)))


def random_reward_history(env: TradingEnv, episodes: int, seed: int = 0) -> list[float]:
    """Per-episode total rewards of the uniform-random policy."""
    rng = np.random.default_rng(seed)
    history = []
    for _ in range(episodes):
        env.reset()
        total = 0.0
        done = False
        while not done:
            _, reward, done, _ = env.step(int(rng.integers(N_ACTIONS)))
            total += reward
        history.append(total)
    return history


# -- checkpoints --------------------------------------------------------------

_CKPT_MAGIC = b"QNET"


def save_checkpoint(net: ActorCriticNet, path) -> None:
    """JSON architecture header + the DNP1 flat-parameter blob."""
    meta = json.dumps(
        {
            "obs_dim": net.obs_dim,
            "head_kind": net.head_kind,
            "latent_dim": net.latent_dim,
            "vqc_depth": net.vqc_depth,
        },
        sort_keys=True,
    ).encode()
    blob = diffnet.pack_arrays([p.value for p in net.parameters()])
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC + struct.pack("<I", len(meta)) + meta + blob)


def load_checkpoint(path) -> ActorCriticNet:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _CKPT_MAGIC:
        raise ValueError(f"{path} is not a QNET checkpoint")
    (meta_len,) = struct.unpack_from("<I", raw, 4)
    meta = json.loads(raw[8:8 + meta_len].decode())
    net = ActorCriticNet(
        meta["obs_dim"], head_kind=meta["head_kind"],
        latent_dim=meta["latent_dim"], vqc_depth=meta["vqc_depth"],
    )
    arrays = diffnet.unpack_arrays(raw[8 + meta_len:])
    params = net.parameters()
    if len(arrays) != len(params):
        raise ValueError("checkpoint parameter count mismatch")
    for p, a in zip(params, arrays):
        p.value[...] = a
    return net
