"""Exploration runtime: cursor-guided action sampling and visit logging.

The solved policy lives on the local-dynamics DAG, not on the
environment.  At run time a cursor tracks which DAG node the recent
action window corresponds to: it starts at the root, follows one edge
per executed action, and restarts at the root when the window length
reaches the graph depth or when an executed action has no edge (a
greedy action the prior considers redundant).

Both the DAG policy and the uniform baseline draw actions through the
same inverse-CDF helper, one uniform variate per action.  With an empty
equivalence set the DAG rows are uniform over the full action set, so
the two modes consume identical random draws and produce identical
trajectories for the same seed.
"""

from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import accumulate
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .graph import LocalDynamicsGraph
    from .solver import ExplorationPolicy


class CursorAtFinalLayer(RuntimeError):
    """Sampling was requested from a cursor sitting in the last layer."""


class RngStream:
    """Counted deterministic stream of uniform variates.

    Wraps numpy's PCG64 generator and records how many draws have been
    taken, so tests can assert that two runs consumed randomness
    identically.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.draws = 0
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self) -> float:
        """One draw from [0, 1)."""
        self.draws += 1
        return float(self._gen.random())

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, draws={self.draws})"


def derive_reset_seed(base_seed: int, episode: int) -> int:
    """Stable per-episode seed for environment resets.

    Independent of how many actions were sampled before the reset, so a
    policy run and its baseline see identical episode layouts.
    """
    ss = np.random.SeedSequence((int(base_seed), int(episode)))
    return int(ss.generate_state(1, np.uint64)[0])


def uniform_cdf(count: int) -> tuple[float, ...]:
    """Cumulative distribution of the uniform law over ``count`` items.

    Built by the same running-sum construction as policy rows so that a
    uniform policy row and this baseline distribution are bit-identical.
    """
    if count < 1:
        raise ValueError("count must be positive")
    return tuple(accumulate([1.0 / count] * count))


def inverse_cdf_sample(cdf: tuple[float, ...], u: float) -> int:
    """Index of the first cdf entry strictly above ``u``.

    The last slot absorbs any rounding slack in the final cumulative
    value.
    """
    return min(bisect_right(cdf, u), len(cdf) - 1)


@dataclass
class SequenceCursor:
    """Tracks the DAG node reached by the recent action window.

    ``steps_taken`` equals the layer of ``current_node`` at all times;
    both are restored by :meth:`reset`, which also runs automatically
    whenever the window reaches the graph depth or an executed action
    leaves the graph.
    """

    graph: LocalDynamicsGraph
    current_node: int = field(default=-1)
    steps_taken: int = 0

    def __post_init__(self) -> None:
        if self.current_node < 0:
            self.current_node = self.graph.root

    def reset(self) -> None:
        self.current_node = self.graph.root
        self.steps_taken = 0

    def advance(self, action: int) -> None:
        """Follow the edge labeled ``action``, or reset if there is none.

        A missing edge means the executed action was one the prior
        prunes (it leads back toward recent states), so the local
        window is stale and the look-ahead restarts at the root.
        """
        target = None
        for a, t in self.graph.out_edges(self.current_node):
            if a == action:
                target = t
                break
        if target is None:
            self.reset()
            return
        self.current_node = target
        self.steps_taken += 1
        if self.steps_taken >= self.graph.depth:
            self.reset()


def sample_exploration_action(
    cursor: SequenceCursor, policy: ExplorationPolicy, rng: RngStream
) -> int:
    """Draw one action from the policy row at the cursor's node."""
    if cursor.steps_taken >= cursor.graph.depth:
        raise CursorAtFinalLayer(
            f"cursor is {cursor.steps_taken} steps deep in a depth-"
            f"{cursor.graph.depth} graph; advance or reset it first"
        )
    actions = policy.actions(cursor.current_node)
    idx = inverse_cdf_sample(policy.cdf(cursor.current_node), rng.uniform())
    return actions[idx]


@dataclass
class VisitLog:
    """First-visit record of distinct environment states.

    One row per newly seen state: episode index, step within the
    episode (0 is the reset state), and the cumulative count of
    distinct states at that moment.
    """

    rows: list[tuple[int, int, int]]
    episodes: int
    horizon: int

    @property
    def unique_states(self) -> int:
        return self.rows[-1][2] if self.rows else 0

    def unique_after_episode(self, episode: int) -> int:
        """Distinct states seen once episode ``episode`` has finished."""
        count = 0
        for ep, _, cum in self.rows:
            if ep > episode:
                break
            count = cum
        return count

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "step", "new_state_count_cumulative"])
            writer.writerows(self.rows)


def run_pure_exploration(
    env,
    policy: ExplorationPolicy | None,
    episodes: int,
    horizon: int,
    rng: RngStream,
    *,
    graph: LocalDynamicsGraph | None = None,
) -> VisitLog:
    """Roll out every-step exploration and log first state visits.

    With ``policy`` (and its ``graph``) actions follow the DAG rows
    through a cursor; with ``policy=None`` they are uniform over the
    environment's actions.  Episode reset seeds derive from
    ``(rng.seed, episode)`` only, so matched-seed runs of both modes
    see identical layouts.  The visit log spans all episodes.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if policy is not None and graph is None:
        raise ValueError("a policy needs its graph for cursor tracking")
    cursor = SequenceCursor(graph) if policy is not None else None
    base_cdf = uniform_cdf(env.action_count) if policy is None else None
    seen: set[bytes] = set()
    rows: list[tuple[int, int, int]] = []

    def record(episode: int, step: int, encoding: bytes) -> None:
        if encoding not in seen:
            seen.add(encoding)
            rows.append((episode, step, len(seen)))

    for ep in range(episodes):
        encoding = env.reset(derive_reset_seed(rng.seed, ep))
        if cursor is not None:
            cursor.reset()
        record(ep, 0, encoding)
        for step in range(1, horizon + 1):
            if cursor is not None:
                action = sample_exploration_action(cursor, policy, rng)
            else:
                action = inverse_cdf_sample(base_cdf, rng.uniform())
            encoding, _, done = env.step(action)
            if cursor is not None:
                cursor.advance(action)
            record(ep, step, encoding)
            if done:
                break
    return VisitLog(rows=rows, episodes=episodes, horizon=horizon)
