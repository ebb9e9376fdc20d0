"""Batch experiment runner with matched-seed baselines and CSV reports.

Three experiment kinds share one flat row schema:

* ``pure_exploration_ratio``: per seed, distinct states reached by the
  structured policy and by a uniform baseline on identical reset
  layouts, plus their ratio.
* ``pure_exploration_counts``: distinct-state counts at episode
  checkpoints (1, 10, 100, 1000), labelled ``variant@checkpoint``.
* ``qlearn_curve``: area under the learning curve for paired
  structured and uniform agents, one row per seed and mode.

Per-configuration facts (graph size, solved objective) are emitted
once with seed ``CONFIG_SEED`` so reports stay a single table.  All
CSV output is sorted and timestamp-free, so reruns of the same
configuration produce byte-identical files.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from pathlib import Path

from .agent import AgentConfig, train
from .envs import (
    BUILTIN_OMEGA_VARIANTS,
    ENV_REGISTRY,
    UnknownEnv,
    UnknownVariant,
    builtin_omega,
    make_env,
)
from .explore import RngStream, VisitLog, run_pure_exploration
from .graph import LocalDynamicsGraph, build_graph
from .solver import ExplorationPolicy, SolverConfig, extract_policy, solve_occupancy

EXPERIMENT_KINDS = (
    "pure_exploration_ratio",
    "pure_exploration_counts",
    "qlearn_curve",
)
METRICS = (
    "unique_states",
    "ratio_vs_uniform",
    "mean_return",
    "node_count",
    "objective_value",
)
CHECKPOINTS = (1, 10, 100, 1000)
UNIFORM_LABEL = "uniform"
# seed column value for rows that describe a configuration, not a run
CONFIG_SEED = -1

REPORT_HEADER = ("env", "omega_variant", "depth", "seed", "metric", "value")
SUMMARY_HEADER = ("env", "omega_variant", "depth", "metric", "count", "mean", "std", "ci95")

# environments without a terminal state need an external step cap
OPEN_ENDED_ENVS = ("cardinal", "rotation")


class EmptyReport(ValueError):
    """Raised when a summary is requested for zero rows."""


def variant_label(variant: int | None) -> str:
    """Column label for an equivalence-set variant (``None`` -> default)."""
    return "default" if variant is None else str(variant)


@dataclass(frozen=True)
class ReportRow:
    """One measurement: a metric value for an (env, variant, depth, seed)."""

    env: str
    omega_variant: str
    depth: int
    seed: int
    metric: str
    value: float

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")

    def sort_key(self) -> tuple[str, str, int, int, str]:
        return (self.env, self.omega_variant, self.depth, self.seed, self.metric)


@dataclass(frozen=True)
class SummaryRow:
    """Aggregate of one metric over seeds: count, mean, and spread."""

    env: str
    omega_variant: str
    depth: int
    metric: str
    count: int
    mean: float
    std: float
    ci95: float


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment sweep.

    ``variants=None`` selects every built-in equivalence set for the
    environment.  ``horizon`` caps episode length for exploration runs
    and for learning runs on environments without a terminal state.
    """

    kind: str
    env: str
    depths: tuple[int, ...]
    seeds: tuple[int, ...]
    variants: tuple[int | None, ...] | None = None
    episodes: int = 100
    horizon: int = 100
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(
                f"unknown experiment kind {self.kind!r}; choose from {EXPERIMENT_KINDS}"
            )
        if self.env not in ENV_REGISTRY:
            raise UnknownEnv(
                f"unknown environment {self.env!r}; choose from {sorted(ENV_REGISTRY)}"
            )
        object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.depths:
            raise ValueError("at least one depth is required")
        if min(self.depths) < 1:
            raise ValueError("depths must be at least 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.episodes < 1:
            raise ValueError("episodes must be at least 1")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        allowed = BUILTIN_OMEGA_VARIANTS[self.env]
        if self.variants is None:
            object.__setattr__(self, "variants", tuple(allowed))
        else:
            object.__setattr__(self, "variants", tuple(self.variants))
            for variant in self.variants:
                if variant not in allowed:
                    raise UnknownVariant(
                        f"no built-in equivalence set for {self.env!r} variant {variant!r}"
                    )


@dataclass(frozen=True)
class PreparedVariant:
    """Graph and solved policy for one (variant, depth) configuration."""

    label: str
    graph: LocalDynamicsGraph
    policy: ExplorationPolicy


def solver_config_for(env: str, depth: int) -> SolverConfig:
    """Certification tolerance for one configuration.

    The catcher prior at large depth has its optimum strictly inside
    the flow polytope with every edge carrying mass, where the duality
    gap stalls a few orders above the default tolerance long after the
    objective has converged, so those runs get a looser certificate.
    """
    if env == "catcher" and depth > 12:
        return SolverConfig(tolerance=1e-4)
    return SolverConfig(tolerance=1e-6)


def prepare_variant(env: str, variant: int | None, depth: int) -> PreparedVariant:
    """Build the graph and solve the exploration policy for one setting."""
    omega = builtin_omega(env, variant)
    graph = build_graph(make_env(env).action_set(), omega, depth)
    occupancy = solve_occupancy(graph, solver_config_for(env, depth))
    policy = extract_policy(graph, occupancy)
    return PreparedVariant(variant_label(variant), graph, policy)


def _config_rows(env: str, prepared: PreparedVariant, depth: int) -> list[ReportRow]:
    node_count = sum(prepared.graph.layer_sizes())
    return [
        ReportRow(env, prepared.label, depth, CONFIG_SEED, "node_count", float(node_count)),
        ReportRow(
            env,
            prepared.label,
            depth,
            CONFIG_SEED,
            "objective_value",
            float(prepared.policy.objective_value),
        ),
    ]


def _uniform_logs(config: ExperimentConfig) -> dict[int, VisitLog]:
    env = make_env(config.env)
    return {
        seed: run_pure_exploration(env, None, config.episodes, config.horizon, RngStream(seed))
        for seed in config.seeds
    }


def _run_ratio(config: ExperimentConfig) -> list[ReportRow]:
    rows: list[ReportRow] = []
    env = make_env(config.env)
    baseline = _uniform_logs(config)
    for depth in config.depths:
        for seed in config.seeds:
            rows.append(
                ReportRow(
                    config.env,
                    UNIFORM_LABEL,
                    depth,
                    seed,
                    "unique_states",
                    float(baseline[seed].unique_states),
                )
            )
        for variant in config.variants:
            prepared = prepare_variant(config.env, variant, depth)
            rows.extend(_config_rows(config.env, prepared, depth))
            for seed in config.seeds:
                log = run_pure_exploration(
                    env,
                    prepared.policy,
                    config.episodes,
                    config.horizon,
                    RngStream(seed),
                    graph=prepared.graph,
                )
                rows.append(
                    ReportRow(
                        config.env,
                        prepared.label,
                        depth,
                        seed,
                        "unique_states",
                        float(log.unique_states),
                    )
                )
                rows.append(
                    ReportRow(
                        config.env,
                        prepared.label,
                        depth,
                        seed,
                        "ratio_vs_uniform",
                        log.unique_states / baseline[seed].unique_states,
                    )
                )
    return rows


def _run_counts(config: ExperimentConfig) -> list[ReportRow]:
    rows: list[ReportRow] = []
    env = make_env(config.env)
    checkpoints = [n for n in CHECKPOINTS if n <= config.episodes]
    baseline = _uniform_logs(config)

    def checkpoint_rows(label: str, depth: int, seed: int, log: VisitLog) -> None:
        for n in checkpoints:
            rows.append(
                ReportRow(
                    config.env,
                    f"{label}@{n}",
                    depth,
                    seed,
                    "unique_states",
                    float(log.unique_after_episode(n - 1)),
                )
            )

    for depth in config.depths:
        for seed in config.seeds:
            checkpoint_rows(UNIFORM_LABEL, depth, seed, baseline[seed])
        for variant in config.variants:
            prepared = prepare_variant(config.env, variant, depth)
            rows.extend(_config_rows(config.env, prepared, depth))
            for seed in config.seeds:
                log = run_pure_exploration(
                    env,
                    prepared.policy,
                    config.episodes,
                    config.horizon,
                    RngStream(seed),
                    graph=prepared.graph,
                )
                checkpoint_rows(prepared.label, depth, seed, log)
    return rows


def _run_qlearn(config: ExperimentConfig) -> list[ReportRow]:
    rows: list[ReportRow] = []
    env = make_env(config.env)
    max_steps = config.horizon if config.env in OPEN_ENDED_ENVS else None
    fixed_reset = config.env == "doorkey"
    out = Path(config.out_dir) if config.out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    def agent_config(seed: int, prepared: PreparedVariant | None) -> AgentConfig:
        if prepared is None:
            return AgentConfig(
                episodes=config.episodes,
                seed=seed,
                fixed_reset=fixed_reset,
                max_steps=max_steps,
            )
        return AgentConfig(
            episodes=config.episodes,
            seed=seed,
            mode="easee",
            graph=prepared.graph,
            policy=prepared.policy,
            fixed_reset=fixed_reset,
            max_steps=max_steps,
        )

    for depth in config.depths:
        for seed in config.seeds:
            curve = train(env, agent_config(seed, None))
            rows.append(
                ReportRow(
                    config.env,
                    UNIFORM_LABEL,
                    depth,
                    seed,
                    "mean_return",
                    curve.area_under_curve(),
                )
            )
            if out is not None:
                curve.write_csv(out / f"qlearn_{config.env}_uniform_d{depth}_s{seed}.csv")
        for variant in config.variants:
            prepared = prepare_variant(config.env, variant, depth)
            rows.extend(_config_rows(config.env, prepared, depth))
            for seed in config.seeds:
                curve = train(env, agent_config(seed, prepared))
                rows.append(
                    ReportRow(
                        config.env,
                        prepared.label,
                        depth,
                        seed,
                        "mean_return",
                        curve.area_under_curve(),
                    )
                )
                if out is not None:
                    name = f"qlearn_{config.env}_{prepared.label}_d{depth}_s{seed}.csv"
                    curve.write_csv(out / name)
    return rows


_RUNNERS = {
    "pure_exploration_ratio": _run_ratio,
    "pure_exploration_counts": _run_counts,
    "qlearn_curve": _run_qlearn,
}


def run_experiment(config: ExperimentConfig) -> tuple[ReportRow, ...]:
    """Run one experiment sweep and return its rows, sorted.

    With ``config.out_dir`` set, also writes ``report.csv`` with every
    row, ``summary.csv`` with per-configuration aggregates, and (for
    learning runs) one curve CSV per agent.
    """
    rows = tuple(sorted(_RUNNERS[config.kind](config), key=ReportRow.sort_key))
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report_csv(rows, out / "report.csv")
        write_summary_csv(summarize(rows), out / "summary.csv")
    return rows


def summarize(rows) -> tuple[SummaryRow, ...]:
    """Aggregate rows over seeds for each (env, variant, depth, metric).

    Uses the sample standard deviation and a normal-approximation 95%
    confidence half-width; both are NaN for single-row groups.
    """
    rows = tuple(rows)
    if not rows:
        raise EmptyReport("no rows to summarize")
    groups: dict[tuple[str, str, int, str], list[float]] = {}
    for row in rows:
        key = (row.env, row.omega_variant, row.depth, row.metric)
        groups.setdefault(key, []).append(row.value)
    out = []
    for key in sorted(groups):
        values = groups[key]
        n = len(values)
        mean = statistics.fmean(values)
        if n > 1:
            std = statistics.stdev(values)
            ci95 = 1.96 * std / math.sqrt(n)
        else:
            std = float("nan")
            ci95 = float("nan")
        out.append(SummaryRow(*key, n, mean, std, ci95))
    return tuple(out)


def _format(value: float) -> str:
    return f"{value:.10g}"


def write_report_csv(rows, path) -> None:
    """Write rows to ``path``, sorted, with a fixed header."""
    ordered = sorted(rows, key=ReportRow.sort_key)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for row in ordered:
            writer.writerow(
                [row.env, row.omega_variant, row.depth, row.seed, row.metric, _format(row.value)]
            )


def write_summary_csv(summary, path) -> None:
    """Write summary rows to ``path`` with a fixed header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for row in summary:
            writer.writerow(
                [
                    row.env,
                    row.omega_variant,
                    row.depth,
                    row.metric,
                    row.count,
                    _format(row.mean),
                    _format(row.std),
                    _format(row.ci95),
                ]
            )
