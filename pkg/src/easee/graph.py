"""Local-dynamics graph: the depth-d prefix tree quotiented by equivalence.

Nodes are classes of action sequences; following any member of a class
from the start state of a deterministic environment lands in the same
environment state whenever the equivalence pairs are semantically valid.
Construction is a breadth-first expansion of the root class.  Each node
keeps the reaching sequences that are prefixes of some equivalence-pair
side; expanding node ``n`` with action ``a`` completes such a stored
``w`` into ``w . a``, and when that matches a pair side the equivalent
side is traced through the graph to find an existing node to merge
with.  A bounded closure probe backs the side-match rule up when no
match fires.  After expansion, edges that do not advance depth are
pruned and unreachable or dead-end nodes are dropped, which leaves a
layered DAG.
"""

from __future__ import annotations

import json
import logging
import warnings
from collections import deque
from dataclasses import dataclass

from .algebra import (
    ActionSet,
    BudgetExceeded,
    EMPTY_OMEGA,
    EquivalenceSet,
    Seq,
    one_step_rewrites,
    parse_dsl,
)

logger = logging.getLogger(__name__)

DEFAULT_FALLBACK_BUDGET = 512


class DepthZero(ValueError):
    """Raised when a graph is requested with depth < 1."""


class UnknownNode(KeyError):
    """Raised when a node id is not part of the graph."""


@dataclass(frozen=True)
class GraphNode:
    id: int
    canonical: Seq
    depth: int
    stored_sequences: frozenset[Seq] = frozenset()


@dataclass(frozen=True)
class BuildReport:
    expansions: int
    node_count: int
    edge_count: int
    merge_events: int
    analytic_bound: int

    @property
    def within_bound(self) -> bool:
        return self.expansions <= self.analytic_bound


@dataclass(frozen=True)
class LocalDynamicsGraph:
    """Layered DAG of sequence classes, rooted at the empty sequence."""

    actions: ActionSet
    omega: EquivalenceSet
    depth: int
    nodes: tuple[GraphNode, ...]
    edges: tuple[tuple[int, int, int], ...]  # (from_id, action, to_id)

    def __post_init__(self):
        by_id = {n.id: n for n in self.nodes}
        if len(by_id) != len(self.nodes):
            raise ValueError("duplicate node ids")
        roots = [n for n in self.nodes if n.depth == 0]
        if len(roots) != 1:
            raise ValueError("expected exactly one depth-0 node")
        for n in self.nodes:
            if len(n.canonical) != n.depth:
                raise ValueError(f"node {n.id}: canonical length != depth")
        out: dict[int, dict[int, int]] = {n.id: {} for n in self.nodes}
        for f, a, t in self.edges:
            if f not in by_id or t not in by_id:
                raise ValueError(f"edge ({f},{a},{t}) references a missing node")
            if by_id[t].depth != by_id[f].depth + 1:
                raise ValueError(f"edge ({f},{a},{t}) does not advance depth by one")
            if a in out[f]:
                raise ValueError(f"duplicate out-edge for ({f},{a})")
            out[f][a] = t
        layers: list[list[int]] = [[] for _ in range(self.depth + 1)]
        for n in self.nodes:
            if n.depth > self.depth:
                raise ValueError(f"node {n.id} deeper than the graph depth")
            layers[n.depth].append(n.id)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(
            self,
            "_out",
            {i: tuple(sorted(d.items())) for i, d in out.items()},
        )
        object.__setattr__(self, "_layers", tuple(tuple(sorted(l)) for l in layers))

    @property
    def root(self) -> int:
        return self._layers[0][0]

    @property
    def layers(self) -> tuple[tuple[int, ...], ...]:
        """Node ids per depth, 0..depth."""
        return self._layers

    def node(self, node_id: int) -> GraphNode:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def out_edges(self, node_id: int) -> tuple[tuple[int, int], ...]:
        """(action, target) pairs in action order."""
        self.node(node_id)
        return self._out[node_id]

    def depth_of(self, node_id: int) -> int:
        return self.node(node_id).depth

    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(len(l) for l in self._layers)


def node_count_bound_check(graph: LocalDynamicsGraph) -> BuildReport:
    """Build report of a graph produced by :func:`build_graph`."""
    report = getattr(graph, "_build_report", None)
    if report is None:
        raise ValueError("graph has no build report (loaded from JSON?)")
    return report


class _Builder:
    def __init__(self, actions: ActionSet, omega: EquivalenceSet, depth: int, fallback_budget: int):
        self.actions = actions
        self.omega = omega
        self.d = depth
        self.k = len(actions)
        self.fallback_budget = fallback_budget
        self.prefixes = omega.side_prefixes()
        self.orient = omega.orientations()
        self.longest_side = omega.longest_side()
        self.canonical: list[Seq] = []
        self.node_depth: list[int] = []
        self.out: list[dict[int, int]] = []
        self.ins: list[set[tuple[int, int]]] = []
        self.reach: list[set[tuple[int, Seq]]] = []
        self.parent: list[int] = []  # union-find over merged nodes
        self.canon_to_node: dict[Seq, int] = {}
        self.expansions = 0
        self.merge_events = 0

    # -- node bookkeeping --------------------------------------------

    def find(self, nid: int) -> int:
        while self.parent[nid] != nid:
            self.parent[nid] = self.parent[self.parent[nid]]
            nid = self.parent[nid]
        return nid

    def new_node(self, canonical: Seq, depth: int) -> int:
        nid = len(self.canonical)
        self.canonical.append(canonical)
        self.node_depth.append(depth)
        self.out.append({})
        self.ins.append(set())
        self.reach.append(set())
        self.parent.append(nid)
        self.canon_to_node[canonical] = nid
        return nid

    def merge(self, a: int, b: int) -> int:
        """Merge two nodes discovered to be the same class; keep min id."""
        work = [(a, b)]
        while work:
            x, y = work.pop()
            x, y = self.find(x), self.find(y)
            if x == y:
                continue
            keep, drop = min(x, y), max(x, y)
            self.merge_events += 1
            logger.debug("merging node %d into node %d", drop, keep)
            self.parent[drop] = keep
            if (len(self.canonical[drop]), self.canonical[drop]) < (
                len(self.canonical[keep]),
                self.canonical[keep],
            ):
                self.canonical[keep] = self.canonical[drop]
                self.node_depth[keep] = self.node_depth[drop]
            for seq in (self.canonical[keep], self.canonical[drop]):
                self.canon_to_node[seq] = keep
            self.reach[keep] |= self.reach[drop]
            self.reach[drop] = set()
            for act, tgt in self.out[drop].items():
                cur = self.out[keep].get(act)
                if cur is None:
                    self.out[keep][act] = tgt
                    self.ins[self.find(tgt)].add((keep, act))
                elif self.find(cur) != self.find(tgt):
                    work.append((cur, tgt))
            self.out[drop] = {}
            # stale edge targets equal to `drop` resolve through find()
            self.ins[keep] |= self.ins[drop]
            self.ins[drop] = set()
        return self.find(a)

    def add_edge(self, m: int, a: int, u: int) -> None:
        m, u = self.find(m), self.find(u)
        cur = self.out[m].get(a)
        if cur is not None:
            cur = self.find(cur)
            if cur != u:
                u = self.merge(cur, u)
            self.out[m][a] = u
            self.ins[u].add((m, a))
            return
        self.out[m][a] = u
        self.ins[u].add((m, a))
        entries = sorted(self.reach[m]) + [(m, ())]
        for o, w in entries:
            wa = w + (a,)
            if wa in self.prefixes:
                self.reach[u].add((self.find(o), wa))

    def trace(self, origin: int, seq: Seq) -> int | None:
        cur = self.find(origin)
        for a in seq:
            nxt = self.out[cur].get(a)
            if nxt is None:
                return None
            cur = self.find(nxt)
        return cur

    def probe(self, candidate: Seq) -> set[int]:
        """Bounded-closure fallback: existing nodes equivalent to candidate.

        Breadth-first search over one-step rewrites, capped at
        ``fallback_budget`` explored sequences.  Intermediates may grow
        ``longest_side`` letters beyond the candidate (enough to bridge
        through any single expansion), but longer ones are never
        generated: a hit must equal an existing canonical sequence,
        which is never longer than the candidate.  Exhausting the
        budget returns whatever hits were found; each one is backed by
        an explicit rewrite chain, so partial results stay sound.
        """
        direct = self.canon_to_node.get(candidate)
        if direct is not None:
            return {self.find(direct)}
        if not self.omega.pairs:
            return set()
        max_len = len(candidate) + self.longest_side
        seen = {candidate}
        queue = deque([candidate])
        hits: set[int] = set()
        while queue:
            seq = queue.popleft()
            for nxt in one_step_rewrites(seq, self.omega):
                if len(nxt) > max_len or nxt in seen:
                    continue
                seen.add(nxt)
                if len(seen) > self.fallback_budget:
                    return hits
                nid = self.canon_to_node.get(nxt)
                if nid is not None:
                    hits.add(self.find(nid))
                queue.append(nxt)
        return hits

    # -- main loop ----------------------------------------------------

    def run(self) -> None:
        root = self.new_node((), 0)
        frontier = [root]
        for level in range(self.d):
            next_frontier: list[int] = []
            for nid in frontier:
                if self.find(nid) != nid:
                    continue
                for a in range(self.k):
                    self.expansions += 1
                    targets: set[int] = set()
                    entries = sorted(self.reach[nid]) + [(nid, ())]
                    for o, w in entries:
                        wa = w + (a,)
                        for x, y in self.orient:
                            if wa == x:
                                hit = self.trace(o, y)
                                if hit is not None:
                                    targets.add(hit)
                    if not targets:
                        targets = self.probe(self.canonical[nid] + (a,))
                    if targets:
                        ordered = sorted(targets)
                        tgt = ordered[0]
                        for other in ordered[1:]:
                            tgt = self.merge(tgt, other)
                    else:
                        tgt = self.new_node(self.canonical[nid] + (a,), level + 1)
                        next_frontier.append(tgt)
                    self.add_edge(nid, a, tgt)
            frontier = [n for n in next_frontier if self.find(n) == n]
            if len(frontier) > self.k ** (level + 1):
                raise BudgetExceeded(
                    f"layer {level + 1} holds {len(frontier)} nodes, "
                    f"more than |A|^{level + 1}; merging is inconsistent"
                )

    def finish(self) -> tuple[list[int], list[tuple[int, int, int]]]:
        """Prune non-advancing edges, then unreachable and dead-end nodes."""
        alive = {n for n in range(len(self.parent)) if self.find(n) == n}
        edges = set()
        for f in alive:
            for a, t in self.out[f].items():
                t = self.find(t)
                if self.node_depth[t] == self.node_depth[f] + 1:
                    edges.add((f, a, t))
        while True:
            succ: dict[int, list[int]] = {}
            for f, _, t in edges:
                succ.setdefault(f, []).append(t)
            reached = {0}
            stack = [0]
            while stack:
                for t in succ.get(stack.pop(), ()):
                    if t not in reached:
                        reached.add(t)
                        stack.append(t)
            keep = alive & reached
            keep -= {
                n
                for n in keep
                if n != 0 and self.node_depth[n] < self.d and n not in succ
            }
            pruned = {
                (f, a, t) for f, a, t in edges if f not in keep or t not in keep
            }
            if not pruned and keep == alive:
                return sorted(keep), sorted(edges)
            alive = keep
            edges -= pruned


def build_graph(
    actions: ActionSet,
    omega: EquivalenceSet,
    depth: int,
    fallback_budget: int = DEFAULT_FALLBACK_BUDGET,
) -> LocalDynamicsGraph:
    """Build the depth-``depth`` local-dynamics graph for ``omega``.

    ``fallback_budget`` bounds the closure probe used when no pair side
    matches a candidate; probes that outgrow it are abandoned, leaving
    the side-match rule in charge.
    """
    if depth < 1:
        raise DepthZero(f"depth must be >= 1, got {depth}")
    if omega.max_index() >= len(actions):
        raise ValueError("omega references actions outside the action set")
    for v, w in omega.pairs:
        if max(len(v), len(w)) > depth + 1:
            warnings.warn(
                f"equivalence side longer than depth+1 ({max(len(v), len(w))} > "
                f"{depth + 1}) can never fire",
                stacklevel=2,
            )
    b = _Builder(actions, omega, depth, fallback_budget)
    b.run()
    node_ids, edges = b.finish()
    nodes = tuple(
        GraphNode(
            id=n,
            canonical=b.canonical[n],
            depth=b.node_depth[n],
            stored_sequences=frozenset(w for _, w in b.reach[n]),
        )
        for n in node_ids
    )
    graph = LocalDynamicsGraph(
        actions=actions, omega=omega, depth=depth, nodes=nodes, edges=tuple(edges)
    )
    report = BuildReport(
        expansions=b.expansions,
        node_count=len(nodes),
        edge_count=len(edges),
        merge_events=b.merge_events,
        analytic_bound=(len(actions) ** (2 * depth)) * len(omega.pairs) * depth,
    )
    object.__setattr__(graph, "_build_report", report)
    return graph


# --- JSON round-trip ------------------------------------------------------


def to_json(graph: LocalDynamicsGraph) -> str:
    """Serialize a graph; byte-stable under a load/save round trip."""
    obj = {
        "actions": list(graph.actions.names),
        "depth": graph.depth,
        "omega": graph.omega.source_text,
        "nodes": [
            {
                "id": n.id,
                "canonical": list(graph.actions.to_names(n.canonical)),
                "depth": n.depth,
            }
            for n in sorted(graph.nodes, key=lambda n: n.id)
        ],
        "edges": [
            {"from": f, "action": graph.actions.names[a], "to": t}
            for f, a, t in sorted(graph.edges)
        ],
    }
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def from_json(text: str) -> LocalDynamicsGraph:
    obj = json.loads(text)
    actions = ActionSet(tuple(obj["actions"]))
    omega_text = obj.get("omega", "")
    if omega_text.strip():
        parsed_actions, omega = parse_dsl(omega_text)
        if parsed_actions != actions:
            raise ValueError("omega DSL actions do not match the graph actions")
    else:
        omega = EMPTY_OMEGA
    nodes = tuple(
        GraphNode(
            id=n["id"],
            canonical=actions.from_names(n["canonical"]),
            depth=n["depth"],
        )
        for n in obj["nodes"]
    )
    edges = tuple(
        (e["from"], actions.index(e["action"]), e["to"]) for e in obj["edges"]
    )
    return LocalDynamicsGraph(
        actions=actions, omega=omega, depth=obj["depth"], nodes=nodes, edges=tuple(sorted(edges))
    )
