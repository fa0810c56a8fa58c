"""Deep Q-learning for the assignment stage.

A small ReLU network scores each (state, action) encoding; training uses
TD(0) targets from a periodically copied target network and uniform
experience replay.
"""
from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import env
from .core import FORMAT_VERSION, Instance, Schedule, StructuralError

LAYER_SIZES = (env.N_FEATURES, 64, 64, 1)
HISTORY_COLUMNS = ("episode", "instance", "total_profit", "mean_loss", "epsilon")


class TrainingError(RuntimeError):
    pass


class QNetwork:
    """Fully connected net: ReLU hidden layers, linear scalar output."""

    def __init__(self, layer_sizes: Sequence[int] = LAYER_SIZES, seed: int | None = 0, zero: bool = False):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        rng = np.random.default_rng(seed)
        self.weights, self.biases = [], []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            if zero:
                w = np.zeros((fan_in, fan_out))
            else:
                w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "QNetwork":
        other = QNetwork.__new__(QNetwork)
        other.layer_sizes = self.layer_sizes
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def load_from(self, other: "QNetwork") -> None:
        for dst, src in zip(self.params, other.params):
            dst[...] = src

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.layer_sizes[0]:
            raise StructuralError(f"expected {self.layer_sizes[0]} features, got {x.shape[1]}")
        return x

    def forward(self, x) -> np.ndarray:
        """Q values for a batch of feature rows, shape (N,)."""
        h = self._check(x)
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < last:
                h = np.maximum(h, 0.0)
        return h[:, 0]

    def loss_and_grads(self, x, y) -> tuple[float, list[np.ndarray]]:
        """Mean squared error against ``y`` and its gradient for every parameter."""
        h = self._check(x)
        y = np.asarray(y, dtype=np.float64)
        acts = [h]
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        err = acts[-1][:, 0] - y
        loss = float(np.mean(err ** 2))
        delta = (2.0 / len(y)) * err[:, None]
        grads = [None] * (2 * len(self.weights))
        for k in range(last, -1, -1):
            grads[2 * k] = acts[k].T @ delta
            grads[2 * k + 1] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k].T) * (acts[k] > 0)
        return loss, grads

    def to_dict(self, metadata: dict | None = None) -> dict:
        return {
            "format": FORMAT_VERSION,
            "layer_sizes": list(self.layer_sizes),
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "metadata": metadata or {},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QNetwork":
        if data.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {data.get('format')!r}")
        net = cls(data["layer_sizes"], zero=True)
        for k, (fi, fo) in enumerate(zip(net.layer_sizes[:-1], net.layer_sizes[1:])):
            net.weights[k] = np.array(data["weights"][k], dtype=np.float64).reshape(fi, fo)
            net.biases[k] = np.array(data["biases"][k], dtype=np.float64)
        return net

    def save(self, path, metadata: dict | None = None) -> None:
        Path(path).write_text(json.dumps(self.to_dict(metadata)) + "\n")

    @classmethod
    def load(cls, path) -> "QNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))


def q_value(net: QNetwork, features) -> float:
    return float(net.forward(features)[0])


@dataclass
class Transition:
    features: np.ndarray
    reward: int
    next_features: np.ndarray  # one row per action available in the next state
    terminal: bool

    def __post_init__(self):
        if self.terminal and len(self.next_features):
            raise ValueError("terminal transitions have no next actions")


def td_target(transition: Transition, target_net: QNetwork, gamma: float) -> float:
    if transition.terminal or len(transition.next_features) == 0:
        return float(transition.reward)
    return transition.reward + gamma * float(np.max(target_net.forward(transition.next_features)))


def _batch_targets(batch: Sequence[Transition], target_net: QNetwork, gamma: float) -> np.ndarray:
    y = np.array([t.reward for t in batch], dtype=np.float64)
    live = [k for k, t in enumerate(batch) if not t.terminal and len(t.next_features)]
    if live:
        stacked = np.concatenate([batch[k].next_features for k in live])
        q = target_net.forward(stacked)
        offsets = np.cumsum([0] + [len(batch[k].next_features) for k in live[:-1]])
        y[live] += gamma * np.maximum.reduceat(q, offsets)
    return y


def train_step(net: QNetwork, target_net: QNetwork, batch: Sequence[Transition], lr: float,
               gamma: float = 0.95, clip_norm: float = 10.0) -> float:
    """One SGD step on the squared TD error; returns the loss before the step."""
    if not batch:
        raise ValueError("empty batch")
    x = np.stack([t.features for t in batch])
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
        y = _batch_targets(batch, target_net, gamma)
        loss, grads = net.loss_and_grads(x, y)
    if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
        raise TrainingError(f"non-finite loss {loss} (targets in [{y.min()}, {y.max()}])")
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    scale = lr * (clip_norm / norm if clip_norm and norm > clip_norm else 1.0)
    for p, g in zip(net.params, grads):
        p -= scale * g
    return loss


def select_action(state: env.EnvState, net: QNetwork, epsilon: float, rng: np.random.Generator,
                  actions: list | None = None, features: np.ndarray | None = None) -> int:
    """Index into ``actions`` (defaults to ``available_actions(state)``)."""
    if actions is None:
        actions = env.available_actions(state)
    if rng.random() < epsilon:
        return int(rng.integers(len(actions)))
    if features is None:
        features = env.encode_many(state, actions)
    return int(np.argmax(net.forward(features)))


class ReplayBuffer:
    def __init__(self, capacity: int):
        self.items: deque = deque(maxlen=capacity)

    def __len__(self):
        return len(self.items)

    def push(self, item: Transition) -> None:
        self.items.append(item)

    def sample(self, rng: np.random.Generator, k: int) -> list[Transition]:
        idx = rng.choice(len(self.items), size=k, replace=False)
        return [self.items[i] for i in idx]


@dataclass
class TrainConfig:
    episodes: int = 1000
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.6
    lr: float = 1e-3
    replay_capacity: int = 50_000
    batch_size: int = 64
    target_period: int = 200
    clip_norm: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        for name in ("lr", "replay_capacity", "batch_size", "target_period", "epsilon_decay_fraction"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def epsilon(self, episode: int) -> float:
        span = self.epsilon_decay_fraction * self.episodes
        if span <= 0:
            return self.epsilon_end
        frac = min(1.0, episode / span)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


@dataclass
class EpisodeRecord:
    episode: int
    instance: str
    total_profit: int
    mean_loss: float
    epsilon: float


@dataclass
class Trainer:
    """Holds the mutable training session; ``run`` appends to ``history``."""

    mode: env.Mode
    config: TrainConfig
    net: QNetwork = None
    history: list = field(default_factory=list)

    def __post_init__(self):
        self.mode = env.Mode(self.mode)
        self.rng = np.random.default_rng(self.config.seed)
        if self.net is None:
            self.net = QNetwork(seed=self.config.seed)
        self.target = self.net.copy()
        self.buffer = ReplayBuffer(self.config.replay_capacity)
        self.updates = 0

    def episode(self, instance: Instance, epsilon: float, label: str = "") -> EpisodeRecord:
        cfg = self.config
        state = env.reset(instance, self.mode)
        actions = env.available_actions(state)
        feats = env.encode_many(state, actions)
        total, losses = 0, []
        empty = np.zeros((0, env.N_FEATURES))
        while True:
            k = select_action(state, self.net, epsilon, self.rng, actions, feats)
            out = env.step(state, actions[k])
            total += out.reward
            if out.done:
                next_actions, next_feats = [], empty
            else:
                next_actions = env.available_actions(out.next)
                next_feats = env.encode_many(out.next, next_actions)
            self.buffer.push(Transition(feats[k], out.reward, next_feats, out.done))
            if len(self.buffer) >= cfg.batch_size:
                batch = self.buffer.sample(self.rng, cfg.batch_size)
                losses.append(train_step(self.net, self.target, batch, cfg.lr, cfg.gamma, cfg.clip_norm))
                self.updates += 1
                if self.updates % cfg.target_period == 0:
                    self.target.load_from(self.net)
            if out.done:
                break
            state, actions, feats = out.next, next_actions, next_feats
        mean_loss = float(np.mean(losses)) if losses else float("nan")
        return EpisodeRecord(len(self.history), label, total, mean_loss, epsilon)

    def run(self, instances: Sequence[Instance], labels: Sequence[str] | None = None) -> list[EpisodeRecord]:
        if not instances:
            raise ValueError("need at least one training instance")
        labels = list(labels) if labels is not None else [inst.scene_label or str(k) for k, inst in enumerate(instances)]
        for e in range(self.config.episodes):
            k = e % len(instances)
            rec = self.episode(instances[k], self.config.epsilon(e), labels[k])
            self.history.append(rec)
        return self.history


def train(instances: Sequence[Instance], mode, config: TrainConfig, labels=None) -> tuple[QNetwork, list[EpisodeRecord]]:
    """Train a fresh network; instances are visited round-robin, one per episode."""
    trainer = Trainer(env.Mode(mode), config)
    trainer.run(list(instances), labels)
    return trainer.net, trainer.history


def greedy_policy(net: QNetwork):
    def choose(state, actions):
        return actions[int(np.argmax(net.forward(env.encode_many(state, actions))))]
    return choose


def solve(instance: Instance, net: QNetwork, mode, trace: list | None = None) -> Schedule:
    """Greedy rollout (no exploration) and the resulting schedule."""
    final, _ = env.rollout(instance, env.Mode(mode), greedy_policy(net), trace)
    return env.extract_schedule(final)


def write_history(history: Sequence[EpisodeRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# schema=1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for rec in history:
            w.writerow([rec.episode, rec.instance, rec.total_profit, repr(rec.mean_loss), repr(rec.epsilon)])


def read_history(path) -> list[dict]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
