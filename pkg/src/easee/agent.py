"""Tabular Q-learning with pluggable exploration.

The agent runs epsilon-greedy control with one-step Q updates over
canonical state encodings.  Exploration steps either draw uniformly
over the action set or sample from an exploration policy attached to a
local-dynamics graph, with a sequence cursor advanced on every executed
action.  Both modes share the same RNG discipline: one uniform draw per
step for the epsilon test, one more on exploration steps for the
action, none for greedy argmax steps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .envs import Environment
from .explore import (
    RngStream,
    SequenceCursor,
    derive_reset_seed,
    inverse_cdf_sample,
    sample_exploration_action,
    uniform_cdf,
)
from .graph import LocalDynamicsGraph
from .solver import ExplorationPolicy


class QTable:
    """Action values per canonical state encoding, zero by default."""

    def __init__(self, action_count: int):
        if action_count < 1:
            raise ValueError("action_count must be >= 1")
        self.action_count = action_count
        self.values: dict[bytes, np.ndarray] = {}

    def row(self, encoding: bytes) -> np.ndarray:
        row = self.values.get(encoding)
        if row is None:
            row = np.zeros(self.action_count)
            self.values[encoding] = row
        return row

    def greedy_action(self, encoding: bytes) -> int:
        """Argmax with ties resolved toward the lowest action index."""
        row = self.values.get(encoding)
        if row is None:
            return 0
        return int(np.argmax(row))

    def max_value(self, encoding: bytes) -> float:
        row = self.values.get(encoding)
        if row is None:
            return 0.0
        return float(row.max())

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class AgentConfig:
    """Hyperparameters and exploration wiring for :func:`train`.

    ``mode`` selects uniform action exploration or policy-guided
    exploration; the latter requires ``graph`` and ``policy``.  With
    ``fixed_reset`` every episode reuses the episode-0 reset seed, so
    the environment layout stays constant within a run while still
    varying across base seeds.
    """

    episodes: int
    seed: int
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    anneal_fraction: float = 0.2
    mode: str = "uniform"
    graph: LocalDynamicsGraph | None = None
    policy: ExplorationPolicy | None = None
    fixed_reset: bool = False
    max_steps: int | None = None

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        for eps in (self.epsilon_start, self.epsilon_end):
            if not 0.0 <= eps <= 1.0:
                raise ValueError("epsilon bounds must be in [0, 1]")
        if not 0.0 <= self.anneal_fraction <= 1.0:
            raise ValueError("anneal_fraction must be in [0, 1]")
        if self.mode not in ("uniform", "easee"):
            raise ValueError(f"unknown exploration mode {self.mode!r}")
        if self.mode == "easee" and (self.graph is None or self.policy is None):
            raise ValueError("easee mode requires graph and policy")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1 when given")

    def epsilon_at(self, episode: int) -> float:
        """Linear schedule from start to end over the anneal window."""
        window = max(1, round(self.anneal_fraction * self.episodes))
        frac = min(1.0, episode / window)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


@dataclass(frozen=True)
class LearningCurve:
    """Per-episode training record plus the trained table.

    ``rows`` holds (episode, return, epsilon, unique_states_so_far);
    unique states are counted by canonical encoding across the whole
    run, first visits only.
    """

    rows: tuple[tuple[int, float, float, int], ...]
    qtable: QTable = field(repr=False, compare=False, hash=False, default=None)

    @property
    def returns(self) -> tuple[float, ...]:
        return tuple(r for _, r, _, _ in self.rows)

    def area_under_curve(self) -> float:
        """Mean per-episode return; the paired learning-curve statistic."""
        return float(np.mean(self.returns)) if self.rows else 0.0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "return", "epsilon", "unique_states_so_far"])
            for episode, ret, eps, unique in self.rows:
                writer.writerow([episode, f"{ret:.6f}", f"{eps:.6f}", unique])


def train(env: Environment, config: AgentConfig) -> LearningCurve:
    """Epsilon-greedy tabular Q-learning over canonical encodings.

    Per step: one RNG draw for the epsilon test; exploration steps draw
    one more to pick the action (uniform over the action set, or from
    the exploration policy at the cursor's node); greedy steps take the
    argmax without a draw.  The cursor advances on every executed
    action and resets at episode starts.  The one-step update
    bootstraps from the max of the successor row, zero on terminal
    steps.
    """
    rng = RngStream(config.seed)
    table = QTable(env.action_count)
    base_cdf = uniform_cdf(env.action_count)
    cursor = None
    if config.mode == "easee":
        cursor = SequenceCursor(graph=config.graph)
    seen: set[bytes] = set()
    rows = []
    for episode in range(config.episodes):
        reset_episode = 0 if config.fixed_reset else episode
        env.reset(derive_reset_seed(config.seed, reset_episode))
        if cursor is not None:
            cursor.reset()
        epsilon = config.epsilon_at(episode)
        encoding = env.canonical_state_encoding()
        seen.add(encoding)
        total = 0.0
        step = 0
        while True:
            if rng.uniform() < epsilon:
                if cursor is not None:
                    action = sample_exploration_action(cursor, config.policy, rng)
                else:
                    action = inverse_cdf_sample(base_cdf, rng.uniform())
            else:
                action = table.greedy_action(encoding)
            _, reward, done = env.step(action)
            if cursor is not None:
                cursor.advance(action)
            nxt = env.canonical_state_encoding()
            seen.add(nxt)
            target = reward if done else reward + config.gamma * table.max_value(nxt)
            row = table.row(encoding)
            row[action] += config.alpha * (target - row[action])
            total += reward
            encoding = nxt
            step += 1
            if done or (config.max_steps is not None and step >= config.max_steps):
                break
        rows.append((episode, total, epsilon, len(seen)))
    return LearningCurve(rows=tuple(rows), qtable=table)


def evaluate(
    env: Environment,
    qtable: QTable,
    episodes: int,
    seed: int,
    max_steps: int | None = None,
) -> float:
    """Mean return of greedy rollouts under the table."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    totals = []
    for episode in range(episodes):
        env.reset(derive_reset_seed(seed, episode))
        total = 0.0
        step = 0
        while True:
            action = qtable.greedy_action(env.canonical_state_encoding())
            _, reward, done = env.step(action)
            total += reward
            step += 1
            if done or (max_steps is not None and step >= max_steps):
                break
        totals.append(total)
    return float(np.mean(totals))
