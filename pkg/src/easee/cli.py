"""Command-line entrypoint for graphs, policies, rollouts, and reports.

Subcommands: ``build-graph``, ``solve-policy``, ``explore``, ``qlearn``,
``report``, and ``envs list``.  Every subcommand accepts ``--seed`` and
``--out``; results land in the output directory as graph JSON, policy
JSON, or CSV.  Exit codes: 0 on success, 2 on validation errors, and 3
when the solver cannot certify its tolerance.
"""

from __future__ import annotations

import argparse
import statistics
import sys
from pathlib import Path

import numpy as np

from .agent import AgentConfig, train
from .algebra import ActionSet, BudgetExceeded, DslError, EquivalenceSet, parse_dsl
from .envs import (
    BUILTIN_OMEGA_VARIANTS,
    ENV_REGISTRY,
    UnknownEnv,
    UnknownVariant,
    builtin_omega,
    make_env,
    parse_builtin_spec,
)
from .explore import RngStream, run_pure_exploration
from .graph import DepthZero, LocalDynamicsGraph, build_graph, from_json, to_json
from .harness import (
    EXPERIMENT_KINDS,
    ExperimentConfig,
    run_experiment,
    solver_config_for,
    summarize,
)
from .solver import (
    InfeasibleGraph,
    NotConvergedError,
    SolverConfig,
    extract_policy,
    policy_to_json,
    solve_occupancy,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NOT_CONVERGED = 3

BUILTIN_PREFIX = "builtin:"


def _parse_int_list(tokens) -> tuple[int, ...]:
    """Flatten ["0,1", "2"] style argument lists into ints."""
    out: list[int] = []
    for token in tokens:
        for part in str(token).split(","):
            part = part.strip()
            if part:
                out.append(int(part))
    return tuple(out)


def _omega_stem(spec: str) -> str:
    if spec.startswith(BUILTIN_PREFIX):
        return spec[len(BUILTIN_PREFIX) :]
    return Path(spec).stem


def _load_omega(spec: str) -> tuple[ActionSet, EquivalenceSet]:
    """Resolve ``builtin:<label>`` or a DSL file path."""
    if spec.startswith(BUILTIN_PREFIX):
        name, variant = parse_builtin_spec(spec[len(BUILTIN_PREFIX) :])
        omega = builtin_omega(name, variant)
        return ActionSet(ENV_REGISTRY[name].action_names), omega
    path = Path(spec)
    if not path.is_file():
        raise ValueError(f"equivalence set file not found: {spec}")
    return parse_dsl(path.read_text())


def _check_env_actions(env_name: str, actions: ActionSet) -> None:
    expected = ActionSet(ENV_REGISTRY[env_name].action_names)
    if actions != expected:
        raise ValueError(
            f"equivalence set declares actions {actions.names}, "
            f"but {env_name} uses {expected.names}"
        )


def _built_graph(omega_spec: str, depth: int, env_name: str | None = None) -> LocalDynamicsGraph:
    actions, omega = _load_omega(omega_spec)
    if env_name is not None:
        _check_env_actions(env_name, actions)
    return build_graph(actions, omega, depth)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_weights(spec: str, depth: int) -> np.ndarray | None:
    if spec == "uniform":
        return None
    if spec == "final":
        weights = np.zeros(depth)
        weights[-1] = 1.0
        return weights
    if spec.startswith("csv:"):
        path = Path(spec[len("csv:") :])
        if not path.is_file():
            raise ValueError(f"weights file not found: {path}")
        values = [float(x) for x in path.read_text().replace(",", " ").split()]
        return np.asarray(values, dtype=float)
    raise ValueError(f"unknown weights spec {spec!r}; use uniform, final, or csv:<path>")


def _cmd_build_graph(args) -> int:
    actions, omega = _load_omega(args.omega)
    if args.env is not None:
        _check_env_actions(args.env, actions)
    graph = build_graph(actions, omega, args.depth)
    out = _out_dir(args)
    path = out / f"{_omega_stem(args.omega)}_d{args.depth}.graph.json"
    path.write_text(to_json(graph))
    sizes = ",".join(str(s) for s in graph.layer_sizes())
    print(f"wrote {path}")
    print(f"layers: {sizes} ({sum(graph.layer_sizes())} nodes)")
    return EXIT_OK


def _cmd_solve_policy(args) -> int:
    if args.graph is not None:
        graph_path = Path(args.graph)
        if not graph_path.is_file():
            raise ValueError(f"graph file not found: {graph_path}")
        graph = from_json(graph_path.read_text())
        stem = graph_path.stem.removesuffix(".graph")
    else:
        if args.omega is None or args.depth is None:
            raise ValueError("solve-policy needs either --graph or both --omega and --depth")
        graph = _built_graph(args.omega, args.depth)
        stem = f"{_omega_stem(args.omega)}_d{args.depth}"
    weights = _parse_weights(args.weights, graph.depth)
    config = SolverConfig(tolerance=args.tolerance, entropy_weights=weights)
    occupancy = solve_occupancy(graph, config)
    policy = extract_policy(graph, occupancy)
    out = _out_dir(args)
    path = out / f"{stem}.policy.json"
    path.write_text(policy_to_json(policy))
    print(f"wrote {path}")
    print(f"objective: {occupancy.objective_value:.10f}")
    print(f"gap certificate: {occupancy.gap_certificate:.3e}")
    return EXIT_OK


def _cmd_explore(args) -> int:
    env = make_env(args.env)
    out = _out_dir(args)
    if args.baseline == "easee":
        if args.omega is None or args.depth is None:
            raise ValueError("explore --baseline easee needs --omega and --depth")
        graph = _built_graph(args.omega, args.depth, args.env)
        occupancy = solve_occupancy(graph, solver_config_for(args.env, args.depth))
        policy = extract_policy(graph, occupancy)
        log = run_pure_exploration(
            env, policy, args.episodes, args.horizon, RngStream(args.seed), graph=graph
        )
        path = out / f"visits_{args.env}_easee_d{args.depth}_s{args.seed}.csv"
    else:
        log = run_pure_exploration(env, None, args.episodes, args.horizon, RngStream(args.seed))
        path = out / f"visits_{args.env}_uniform_s{args.seed}.csv"
    log.write_csv(path)
    print(f"wrote {path}")
    print(f"unique states: {log.unique_states}")
    return EXIT_OK


def _cmd_qlearn(args) -> int:
    env = make_env(args.env)
    seeds = _parse_int_list(args.seeds) if args.seeds else (args.seed,)
    if not seeds:
        raise ValueError("at least one seed is required")
    out = _out_dir(args)
    max_steps = args.horizon if args.env in ("cardinal", "rotation") else None
    fixed_reset = args.env == "doorkey"
    graph = policy = None
    if args.mode == "easee":
        if args.omega is None or args.depth is None:
            raise ValueError("qlearn --mode easee needs --omega and --depth")
        graph = _built_graph(args.omega, args.depth, args.env)
        occupancy = solve_occupancy(graph, solver_config_for(args.env, args.depth))
        policy = extract_policy(graph, occupancy)
    areas = []
    for seed in seeds:
        config = AgentConfig(
            episodes=args.episodes,
            seed=seed,
            mode=args.mode,
            graph=graph,
            policy=policy,
            fixed_reset=fixed_reset,
            max_steps=max_steps,
        )
        curve = train(env, config)
        tag = f"d{args.depth}_" if args.mode == "easee" else ""
        path = out / f"qlearn_{args.env}_{args.mode}_{tag}s{seed}.csv"
        curve.write_csv(path)
        areas.append(curve.area_under_curve())
        print(f"seed {seed}: mean return {areas[-1]:.4f} ({path})")
    print(f"mean over {len(seeds)} seeds: {statistics.fmean(areas):.4f}")
    return EXIT_OK


def _cmd_report(args) -> int:
    variants: tuple[int | None, ...] | None
    if args.variants:
        parsed: list[int | None] = []
        for token in args.variants:
            for part in str(token).split(","):
                part = part.strip()
                if not part:
                    continue
                parsed.append(None if part == "default" else int(part))
        variants = tuple(parsed)
    else:
        variants = None
    config = ExperimentConfig(
        kind=args.kind,
        env=args.env,
        depths=_parse_int_list(args.depths),
        seeds=_parse_int_list(args.seeds) if args.seeds else (args.seed,),
        variants=variants,
        episodes=args.episodes,
        horizon=args.horizon,
        out_dir=str(_out_dir(args)),
    )
    rows = run_experiment(config)
    print(f"wrote {Path(config.out_dir) / 'report.csv'} ({len(rows)} rows)")
    print(f"wrote {Path(config.out_dir) / 'summary.csv'}")
    header = f"{'variant':<14}{'depth':>6}  {'metric':<18}{'n':>4}{'mean':>14}{'ci95':>12}"
    print(header)
    for row in summarize(rows):
        print(
            f"{row.omega_variant:<14}{row.depth:>6}  {row.metric:<18}"
            f"{row.count:>4}{row.mean:>14.6g}{row.ci95:>12.4g}"
        )
    return EXIT_OK


def _cmd_envs_list(args) -> int:
    for name in sorted(ENV_REGISTRY):
        actions = ", ".join(ENV_REGISTRY[name].action_names)
        variants = BUILTIN_OMEGA_VARIANTS[name]
        labels = ", ".join("default" if v is None else str(v) for v in variants)
        print(f"{name}: actions [{actions}]; built-in equivalence sets: {labels}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="easee",
        description="Structured exploration policies from action-sequence equivalences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base RNG seed")
    common.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("build-graph", parents=[common], help="build and save a graph")
    p.add_argument("--omega", required=True, help="builtin:<label> or a DSL file")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--env", choices=sorted(ENV_REGISTRY), help="validate actions against an env")
    p.set_defaults(handler=_cmd_build_graph)

    p = sub.add_parser("solve-policy", parents=[common], help="solve a policy and save it")
    p.add_argument("--omega", help="builtin:<label> or a DSL file")
    p.add_argument("--depth", type=int)
    p.add_argument("--graph", help="previously saved graph JSON")
    p.add_argument(
        "--weights",
        default="uniform",
        help="entropy mixture over steps: uniform, final, or csv:<path>",
    )
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(handler=_cmd_solve_policy)

    p = sub.add_parser("explore", parents=[common], help="pure-exploration rollout")
    p.add_argument("--env", required=True, choices=sorted(ENV_REGISTRY))
    p.add_argument("--omega", help="builtin:<label> or a DSL file")
    p.add_argument("--depth", type=int)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--baseline", choices=("uniform", "easee"), default="easee")
    p.set_defaults(handler=_cmd_explore)

    p = sub.add_parser("qlearn", parents=[common], help="train tabular Q-learning")
    p.add_argument("--env", required=True, choices=sorted(ENV_REGISTRY))
    p.add_argument("--omega", help="builtin:<label> or a DSL file")
    p.add_argument("--depth", type=int)
    p.add_argument("--mode", choices=("easee", "uniform"), default="easee")
    p.add_argument("--seeds", nargs="+", help="seed list (space or comma separated)")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--horizon", type=int, default=100)
    p.set_defaults(handler=_cmd_qlearn)

    p = sub.add_parser("report", parents=[common], help="run an experiment sweep")
    p.add_argument("--kind", required=True, choices=EXPERIMENT_KINDS)
    p.add_argument("--env", required=True, choices=sorted(ENV_REGISTRY))
    p.add_argument("--variants", nargs="+", help="equivalence set variants (default: all)")
    p.add_argument("--depths", nargs="+", default=["6"])
    p.add_argument("--seeds", nargs="+", help="seed list (space or comma separated)")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--horizon", type=int, default=100)
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser("envs", help="environment registry")
    envs_sub = p.add_subparsers(dest="envs_command", required=True)
    listing = envs_sub.add_parser("list", help="list environments and built-in sets")
    listing.set_defaults(handler=_cmd_envs_list)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except NotConvergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (
        DslError,
        DepthZero,
        UnknownEnv,
        UnknownVariant,
        InfeasibleGraph,
        BudgetExceeded,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
