"""Graph construction: quotient layering, pruning, and serialization."""

from __future__ import annotations

import random

import pytest

from easee.algebra import EMPTY_OMEGA, ActionSet, closure, make_omega
from easee.envs import BUILTIN_OMEGA_VARIANTS, ENV_REGISTRY, builtin_omega, make_env
from easee.explore import derive_reset_seed
from easee.graph import (
    DepthZero,
    UnknownNode,
    build_graph,
    from_json,
    node_count_bound_check,
    to_json,
)
from oracles import oracle_layer_counts

AB = ActionSet(("a", "b"))
CONSTRUCTION_OMEGA = make_omega(AB, [(("a", "a"), ()), (("b", "a"), ("a", "b"))])

ALL_BUILTINS = [
    (env, variant)
    for env, variants in BUILTIN_OMEGA_VARIANTS.items()
    for variant in variants
]


def builtin_graph(env_name, variant, depth):
    actions = ActionSet(ENV_REGISTRY[env_name].action_names)
    return build_graph(actions, builtin_omega(env_name, variant), depth)


def test_construction_example_exact_structure():
    """Cancellation plus one commuting pair at depth 2: five nodes,
    and the self-cancelling extension of node 1 is pruned."""
    g = build_graph(AB, CONSTRUCTION_OMEGA, 2)
    assert g.layer_sizes() == (1, 2, 2)
    assert [n.canonical for n in sorted(g.nodes, key=lambda n: n.id)] == [
        (),
        (0,),
        (1,),
        (0, 1),
        (1, 1),
    ]
    assert set(g.edges) == {(0, 0, 1), (0, 1, 2), (1, 1, 3), (2, 0, 3), (2, 1, 4)}
    assert g.out_edges(1) == ((1, 3),)
    assert all(a != 0 for a, _ in g.out_edges(1))


def test_empty_omega_builds_the_full_tree():
    acts = ActionSet(("x", "y", "z"))
    g = build_graph(acts, EMPTY_OMEGA, 3)
    assert g.layer_sizes() == (1, 3, 9, 27)
    assert len(g.edges) == 3 + 9 + 27


@pytest.mark.parametrize("env_name,variant", ALL_BUILTINS)
def test_layer_counts_match_enumeration_oracle(env_name, variant):
    depth = 4
    actions = ActionSet(ENV_REGISTRY[env_name].action_names)
    omega = builtin_omega(env_name, variant)
    expected = oracle_layer_counts(len(actions), omega.pairs, depth)
    assert builtin_graph(env_name, variant, depth).layer_sizes() == expected


def test_deeper_prefix_layers_are_stable():
    """Layers of a depth-d build agree with the depth-(d+1) build."""
    shallow = builtin_graph("cardinal", 2, 3)
    deep = builtin_graph("cardinal", 2, 4)
    assert deep.layer_sizes()[:4] == shallow.layer_sizes()


def test_build_is_deterministic():
    a = to_json(builtin_graph("rotation", 2, 4))
    b = to_json(builtin_graph("rotation", 2, 4))
    assert a == b


def test_json_round_trip_preserves_structure():
    g = builtin_graph("cardinal", 3, 3)
    text = to_json(g)
    loaded = from_json(text)
    assert loaded.layer_sizes() == g.layer_sizes()
    assert set(loaded.edges) == set(g.edges)
    assert {n.id: n.canonical for n in loaded.nodes} == {
        n.id: n.canonical for n in g.nodes
    }
    assert to_json(loaded) == text


def test_from_json_rejects_rootless_graph():
    payload = '{"actions": ["a"], "depth": 1, "omega": "", "nodes": [], "edges": []}'
    with pytest.raises(ValueError):
        from_json(payload)


def test_depth_zero_rejected():
    with pytest.raises(DepthZero):
        build_graph(AB, EMPTY_OMEGA, 0)


def test_unknown_node_rejected():
    g = build_graph(AB, EMPTY_OMEGA, 2)
    with pytest.raises(UnknownNode):
        g.node(10_000)


def test_build_report_within_analytic_bound():
    g = builtin_graph("cardinal", 4, 4)
    report = node_count_bound_check(g)
    assert report.within_bound
    assert report.node_count == sum(g.layer_sizes())


@pytest.mark.parametrize("env_name,variant", ALL_BUILTINS)
def test_layer_discipline_and_acyclicity(env_name, variant):
    """Edges advance depth by one, so Kahn's algorithm empties."""
    g = builtin_graph(env_name, variant, 3)
    for src, _, dst in g.edges:
        assert g.depth_of(dst) == g.depth_of(src) + 1
    indegree = {n.id: 0 for n in g.nodes}
    for _, _, dst in g.edges:
        indegree[dst] += 1
    ready = [v for v, k in indegree.items() if k == 0]
    seen = 0
    while ready:
        v = ready.pop()
        seen += 1
        for _, dst in g.out_edges(v):
            indegree[dst] -= 1
            if indegree[dst] == 0:
                ready.append(dst)
    assert seen == len(g.nodes)


@pytest.mark.parametrize("env_name,variant", ALL_BUILTINS)
def test_no_dead_ends_or_orphans(env_name, variant):
    g = builtin_graph(env_name, variant, 4)
    targets = {dst for _, _, dst in g.edges}
    for n in g.nodes:
        if n.depth < g.depth:
            assert g.out_edges(n.id), f"node {n.id} has no out-edges"
        if n.depth > 0:
            assert n.id in targets, f"node {n.id} is unreachable"


def test_root_is_the_empty_sequence():
    g = builtin_graph("rotation", 1, 2)
    assert g.node(g.root).canonical == ()
    assert g.node(g.root).depth == 0


def _rollout(env, seed, seq):
    env.reset(derive_reset_seed(seed, 0))
    for action in seq:
        env.step(action)
    return env.canonical_state_encoding()


@pytest.mark.parametrize("env_name,variant", ALL_BUILTINS)
def test_declared_equivalences_hold_semantically(env_name, variant):
    """Equivalent action strings end in the same environment state,
    up to a small boundary-effect rate."""
    env = make_env(env_name)
    omega = builtin_omega(env_name, variant)
    rng = random.Random(20)
    k = env.action_count
    trials = mismatches = 0
    attempts = 0
    while trials < 250 and attempts < 4000:
        attempts += 1
        length = rng.randint(1, 4)
        s = tuple(rng.randrange(k) for _ in range(length))
        others = [m for m in sorted(closure(s, omega)) if m != s and len(m) <= 6]
        if not others:
            continue
        t = others[rng.randrange(len(others))]
        seed = rng.randrange(100_000)
        if _rollout(env, seed, s) != _rollout(env, seed, t):
            mismatches += 1
        trials += 1
    assert trials > 0
    assert mismatches / trials < 0.05, f"{mismatches}/{trials} rollout mismatches"
