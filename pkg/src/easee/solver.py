"""Maximum-entropy state visitation over a layered local-dynamics DAG.

The feasible set is the flow polytope: nonnegative per-layer action
masses, unit mass at the root, and conservation between consecutive
layers.  The objective is a weighted sum of the entropies of the layer
marginals, concave in the flows.  It is maximized by a fully-corrective
Frank-Wolfe method:

* the linear oracle maximizes a linear functional of the flows, which a
  single backward-induction pass over the DAG solves exactly (ties
  broken toward the lowest action index);
* the oracle vertex joins a maintained set of atoms (root-to-final
  paths, plus the uniform-policy occupancy as the feasible starting
  atom), and the atom weights are then re-optimized over the simplex by
  pairwise exchanges with exact line search; re-balancing the whole
  decomposition each round avoids the zig-zag stall that plain
  conditional-gradient steps hit on these polytopes;
* the objective depends on the flows only through the layer marginals,
  which are linear in the atom weights, so the correction works on
  precomputed per-atom marginal vectors (a path atom touches one node
  per layer, making the exchange steps sparse);
* iteration stops when the duality gap ``<g, s - x>`` certifies the
  iterate to be within ``tolerance`` of optimal.

The returned occupancy induces the exploration policy
``pi(v, a) = p(v, a) / p(v)``; layers are disjoint, so the policy is
stationary on nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph import LocalDynamicsGraph


class InfeasibleGraph(ValueError):
    """The graph cannot carry unit flow from the root to the last layer."""


class NotConvergedError(RuntimeError):
    """Gap tolerance not reached; carries the best iterate found."""

    def __init__(self, message: str, occupancy: "OccupancyMeasure", gap: float):
        super().__init__(message)
        self.occupancy = occupancy
        self.gap = gap


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-6
    max_iters: int = 10_000
    entropy_weights: tuple[float, ...] | None = None  # weight of H(p_t), t = 1..d
    floor: float = 1e-12
    keep_history: bool = False


@dataclass(frozen=True)
class OccupancyMeasure:
    """Per-layer action masses plus the induced state marginals.

    ``flows[t]`` maps ``(node_id, action)`` to the probability of being
    at the node at time ``t`` and taking the action, for ``t`` in
    ``0..d-1``.  ``marginal(t)`` gives the state distribution over layer
    ``t`` for ``t`` in ``0..d``.
    """

    layers: tuple[tuple[int, ...], ...]
    flows: tuple[dict[tuple[int, int], float], ...]
    state_marginals: tuple[dict[int, float], ...]
    objective_value: float | None = None
    gap_certificate: float | None = None

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    def marginal(self, t: int) -> dict[int, float]:
        if not 0 <= t <= self.depth:
            raise IndexError(f"timestep {t} outside 0..{self.depth}")
        return dict(self.state_marginals[t])


@dataclass(frozen=True)
class ExplorationPolicy:
    """Per-node action distribution with a precomputed CDF for sampling."""

    rows: dict[int, tuple[tuple[int, ...], tuple[float, ...], tuple[float, ...]]]
    objective_value: float | None = None
    gap_certificate: float | None = None

    def actions(self, node_id: int) -> tuple[int, ...]:
        return self.rows[node_id][0]

    def probs(self, node_id: int) -> tuple[float, ...]:
        return self.rows[node_id][1]

    def cdf(self, node_id: int) -> tuple[float, ...]:
        return self.rows[node_id][2]


class _FlowSystem:
    """Array view of a layered DAG for vectorized Frank-Wolfe steps."""

    def __init__(self, graph: LocalDynamicsGraph, weights: np.ndarray, floor: float):
        d = graph.depth
        self.graph = graph
        self.d = d
        self.w = weights
        self.floor = floor
        self.layer_nodes = [list(layer) for layer in graph.layers]
        for t, layer in enumerate(self.layer_nodes):
            if not layer:
                raise InfeasibleGraph(f"layer {t} is empty")
        pos = [
            {v: i for i, v in enumerate(layer)} for layer in self.layer_nodes
        ]
        self.src: list[np.ndarray] = []
        self.act: list[np.ndarray] = []
        self.dst: list[np.ndarray] = []
        self.group_starts: list[np.ndarray] = []
        for t in range(d):
            src, act, dst = [], [], []
            for v in self.layer_nodes[t]:
                out = graph.out_edges(v)
                if not out:
                    raise InfeasibleGraph(f"node {v} at layer {t} has no out-edges")
                for a, u in out:
                    src.append(pos[t][v])
                    act.append(a)
                    dst.append(pos[t + 1][u])
            self.src.append(np.array(src, dtype=np.intp))
            self.act.append(np.array(act, dtype=np.intp))
            self.dst.append(np.array(dst, dtype=np.intp))
            starts = np.flatnonzero(
                np.diff(self.src[t], prepend=self.src[t][0] - 1)
            )
            self.group_starts.append(starts)
        self.sizes = [len(layer) for layer in self.layer_nodes]
        # concatenated index space over layers 1..d (layer 0 is the unit
        # mass at the root and never enters the objective)
        self.offsets = np.zeros(d + 2, dtype=np.intp)
        for t in range(1, d + 1):
            self.offsets[t + 1] = self.offsets[t] + self.sizes[t]
        self.n_concat = int(self.offsets[d + 1])
        self.wvec = np.empty(self.n_concat)
        for t in range(1, d + 1):
            self.wvec[self.offsets[t] : self.offsets[t + 1]] = self.w[t - 1]

    # -- flows --------------------------------------------------------

    def uniform_flows(self) -> list[np.ndarray]:
        """Occupancy of the uniform-over-out-edges policy."""
        flows = []
        mass = np.ones(1)
        for t in range(self.d):
            deg = np.bincount(self.src[t], minlength=self.sizes[t])
            x = mass[self.src[t]] / deg[self.src[t]]
            flows.append(x)
            mass = np.bincount(self.dst[t], weights=x, minlength=self.sizes[t + 1])
        return flows

    def marginals(self, flows: list[np.ndarray]) -> list[np.ndarray]:
        """State marginals p_0..p_d (out-sums; inflow for the last layer)."""
        ps = []
        for t in range(self.d):
            ps.append(np.bincount(self.src[t], weights=flows[t], minlength=self.sizes[t]))
        ps.append(
            np.bincount(self.dst[-1], weights=flows[-1], minlength=self.sizes[self.d])
        )
        return ps

    def objective(self, marg: list[np.ndarray]) -> float:
        total = 0.0
        for t in range(1, self.d + 1):
            p = marg[t]
            nz = p[p > 0]
            total += self.w[t - 1] * float(-(nz * np.log(nz)).sum())
        return total

    # -- concatenated marginal space (layers 1..d) ----------------------

    def concat(self, marg: list[np.ndarray]) -> np.ndarray:
        """Stack the layer marginals p_1..p_d into one vector."""
        return np.concatenate(marg[1:])

    def objective_concat(self, m: np.ndarray) -> float:
        nz = m > 0
        return float(-(self.wvec[nz] * m[nz] * np.log(m[nz])).sum())

    def cvec(self, m: np.ndarray) -> np.ndarray:
        """Entropy gradient per node, d(sum_t w_t H(p_t)) / d p_t(v)."""
        return -self.wvec * (np.log(np.maximum(m, self.floor)) + 1.0)

    def edge_scores(self, cv: np.ndarray) -> list[np.ndarray]:
        """Per-edge flow gradient induced by the node gradient ``cv``.

        An edge at layer ``t`` inherits the source-node term for
        ``t >= 1``; the destination term appears only on the last layer,
        where the final marginal is an inflow sum rather than an outflow
        sum of the free variables.
        """
        g = []
        for t in range(self.d):
            gt = np.zeros(len(self.src[t]))
            if t >= 1:
                gt += cv[self.offsets[t] + self.src[t]]
            if t == self.d - 1:
                gt += cv[self.offsets[self.d] + self.dst[t]]
            g.append(gt)
        return g

    def path_concat_nodes(self, path: list[int]) -> np.ndarray:
        """Concatenated indices of the nodes a path visits at t = 1..d."""
        idx = np.empty(self.d, dtype=np.intp)
        for t, e in enumerate(path):
            idx[t] = self.offsets[t + 1] + self.dst[t][e]
        return idx

    def lmo(self, g: list[np.ndarray]) -> list[int]:
        """Best vertex (a root-to-final path) for the linear functional.

        Returns one chosen edge index per layer; ties go to the lowest
        action index because edges are ordered by (node, action).
        """
        value = np.zeros(self.sizes[self.d])
        chosen: list[np.ndarray] = [None] * self.d  # type: ignore[list-item]
        big = np.iinfo(np.intp).max
        for t in range(self.d - 1, -1, -1):
            score = g[t] + value[self.dst[t]]
            starts = self.group_starts[t]
            best = np.maximum.reduceat(score, starts)
            eligible = score >= best[self.src[t]]
            idx = np.where(eligible, np.arange(len(score)), big)
            chosen[t] = np.minimum.reduceat(idx, starts)
            value = best
        path = []
        v = 0  # root position
        for t in range(self.d):
            e = int(chosen[t][v])
            path.append(e)
            v = int(self.dst[t][e])
        return path

    def dphi_sparse(
        self, m: np.ndarray, idx: np.ndarray, coef: np.ndarray, gamma: float
    ) -> float:
        """Directional derivative at ``m + gamma * direction``.

        The direction is given by its nonzero entries ``coef`` at
        concatenated positions ``idx``.
        """
        p = np.maximum(m[idx] + gamma * coef, self.floor)
        return float(-(self.wvec[idx] * (np.log(p) + 1.0) * coef).sum())


def _resolve_weights(graph: LocalDynamicsGraph, config: SolverConfig) -> np.ndarray:
    d = graph.depth
    if config.entropy_weights is None:
        return np.full(d, 1.0 / d)
    w = np.asarray(config.entropy_weights, dtype=float)
    if w.shape != (d,):
        raise ValueError(f"entropy_weights must have length {d}")
    if (w < 0).any() or w.sum() <= 0:
        raise ValueError("entropy_weights must be nonnegative and not all zero")
    return w


def _occupancy_from_flows(
    sys: _FlowSystem,
    flows: list[np.ndarray],
    objective: float | None,
    gap: float | None,
) -> OccupancyMeasure:
    g = sys.graph
    out = []
    for t in range(sys.d):
        layer = sys.layer_nodes[t]
        d_t = {
            (layer[int(s)], int(a)): float(x)
            for s, a, x in zip(sys.src[t], sys.act[t], flows[t])
        }
        out.append(d_t)
    marg = sys.marginals(flows)
    state = tuple(
        {v: float(marg[t][i]) for i, v in enumerate(sys.layer_nodes[t])}
        for t in range(sys.d + 1)
    )
    return OccupancyMeasure(
        layers=tuple(tuple(l) for l in g.layers),
        flows=tuple(out),
        state_marginals=state,
        objective_value=objective,
        gap_certificate=gap,
    )


class _AtomSet:
    """Convex decomposition of the iterate: one seed flow plus paths.

    Slot 0 is a feasible seed occupancy (the warm-start flow), whose
    marginal vector is dense; every other atom is a root-to-final path,
    stored as one edge per layer and one concatenated node index per
    layer.  The current marginal vector is the weight vector applied to
    the atom marginals.
    """

    def __init__(
        self, sys: _FlowSystem, seed_flows: list[np.ndarray], seed_marg: np.ndarray
    ):
        self.sys = sys
        self.seed_flows = seed_flows
        self.seed_marg = seed_marg
        self.seed_weight = 1.0
        self.paths: list[tuple[int, ...]] = []
        self.index: dict[tuple[int, ...], int] = {}
        self.nodes = np.empty((0, sys.d), dtype=np.intp)
        self.weights = np.empty(0)

    def add(self, path: tuple[int, ...]) -> None:
        if path in self.index:
            return
        self.index[path] = len(self.paths)
        self.paths.append(path)
        row = self.sys.path_concat_nodes(list(path))
        self.nodes = np.vstack([self.nodes, row[None, :]])
        self.weights = np.append(self.weights, 0.0)

    def scores(self, cv: np.ndarray) -> tuple[float, np.ndarray]:
        """Linearized objective value of each atom (seed, paths)."""
        s_u = float(cv @ self.seed_marg)
        s_p = cv[self.nodes].sum(axis=1) if len(self.paths) else np.empty(0)
        return s_u, s_p

    def dense_marg(self, slot: int) -> np.ndarray:
        if slot == 0:
            return self.seed_marg
        out = np.zeros(self.sys.n_concat)
        out[self.nodes[slot - 1]] = 1.0
        return out

    def rebuild_marg(self) -> np.ndarray:
        m = self.seed_weight * self.seed_marg.copy()
        if len(self.paths):
            np.add.at(
                m,
                self.nodes.ravel(),
                np.repeat(self.weights, self.sys.d),
            )
        return m

    def prune(self) -> None:
        keep = self.weights > 1e-15
        if keep.all():
            return
        self.paths = [p for p, k in zip(self.paths, keep) if k]
        self.index = {p: i for i, p in enumerate(self.paths)}
        self.nodes = self.nodes[keep]
        self.weights = self.weights[keep]

    def flows(self) -> list[np.ndarray]:
        out = [self.seed_weight * f for f in self.seed_flows]
        for path, weight in zip(self.paths, self.weights):
            for t, e in enumerate(path):
                out[t][e] += weight
        total = self.seed_weight + float(self.weights.sum())
        return [f / total for f in out]


def _line_search(
    sys: _FlowSystem,
    m: np.ndarray,
    idx: np.ndarray,
    coef: np.ndarray,
    gmax: float,
) -> float:
    """Maximize the concave restriction along a pairwise direction."""
    if sys.dphi_sparse(m, idx, coef, gmax) >= 0.0:
        return gmax
    lo, hi = 0.0, gmax
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if sys.dphi_sparse(m, idx, coef, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _correct_weights(
    sys: _FlowSystem, atoms: _AtomSet, m: np.ndarray, inner_tol: float
) -> np.ndarray:
    """Re-optimize the atom weights over their simplex.

    Pairwise exchanges move weight from the lowest-scoring active atom
    to the highest-scoring atom with an exact line search; the loop
    stops when the simplex duality gap falls under ``inner_tol``.
    """
    for it in range(200):
        cv = sys.cvec(m)
        s_u, s_p = atoms.scores(cv)
        s = np.concatenate(([s_u], s_p))
        weights = np.concatenate(([atoms.seed_weight], atoms.weights))
        best = int(np.argmax(s))
        active = np.flatnonzero(weights > 0)
        worst = int(active[np.argmin(s[active])])
        if best == worst or s[best] - s[worst] <= 1e-18:
            break
        if s[best] - float(s @ weights) <= inner_tol:
            break
        if best == 0 or worst == 0:
            dm = atoms.dense_marg(best) - atoms.dense_marg(worst)
            idx = np.flatnonzero(dm)
            coef = dm[idx]
        else:
            raw_idx = np.concatenate(
                (atoms.nodes[best - 1], atoms.nodes[worst - 1])
            )
            raw_coef = np.concatenate(
                (np.ones(sys.d), -np.ones(sys.d))
            )
            idx, inverse = np.unique(raw_idx, return_inverse=True)
            coef = np.zeros(len(idx))
            np.add.at(coef, inverse, raw_coef)
        gamma = _line_search(sys, m, idx, coef, float(weights[worst]))
        if gamma <= 0.0:
            break
        if worst == 0:
            atoms.seed_weight -= gamma
        else:
            atoms.weights[worst - 1] -= gamma
        if best == 0:
            atoms.seed_weight += gamma
        else:
            atoms.weights[best - 1] += gamma
        m[idx] = np.maximum(m[idx] + gamma * coef, 0.0)
        if (it + 1) % 64 == 0:
            m = atoms.rebuild_marg()
    atoms.prune()
    return atoms.rebuild_marg()


def _mirror_ascent(
    sys: _FlowSystem,
    tolerance: float,
    budget: int,
    history: list[tuple[float, float]],
    keep_history: bool,
) -> tuple[list[np.ndarray], np.ndarray, float, int, bool]:
    """Multiplicative-weights warm start over the path distribution.

    The iterate is a Markov policy on the DAG, stored as log
    conditionals per edge.  Each round multiplies the implied path
    distribution by the exponentiated entropy gradient, which stays
    Markov and is renormalized by one backward message pass, so a round
    costs one sweep over the edges.  The step size backtracks on the
    objective.  Progress is measured by the same oracle duality gap as
    the main loop; the phase ends on certification, a stall, or budget
    exhaustion.  Returns the log conditionals, the marginal vector, the
    last gap, the rounds used, and whether the gap met the tolerance.
    """
    d = sys.d
    logpi = []
    for t in range(d):
        deg = np.bincount(sys.src[t], minlength=sys.sizes[t])
        logpi.append(-np.log(deg[sys.src[t]].astype(float)))

    def forward(lp: list[np.ndarray]) -> np.ndarray:
        p = np.ones(1)
        parts = []
        for t in range(d):
            flow = p[sys.src[t]] * np.exp(lp[t])
            p = np.bincount(sys.dst[t], weights=flow, minlength=sys.sizes[t + 1])
            parts.append(p)
        return np.concatenate(parts)

    eta = 1.0
    m = forward(logpi)
    value = sys.objective_concat(m)
    best_gap, best_round = float("inf"), 0
    gap = float("inf")
    for it in range(budget):
        cv = sys.cvec(m)
        path = sys.lmo(sys.edge_scores(cv))
        gap = float(cv[sys.path_concat_nodes(path)].sum()) - float(cv @ m)
        if keep_history:
            history.append((value, gap))
        if gap <= tolerance:
            return logpi, m, gap, it + 1, True
        if gap < 0.995 * best_gap:
            best_gap, best_round = gap, it
        if it - best_round > 600:
            return logpi, m, gap, it + 1, False
        psi = [
            eta * cv[sys.offsets[t] : sys.offsets[t + 1]] for t in range(1, d + 1)
        ]
        while True:
            logbeta = np.zeros(sys.sizes[d])
            trial = [np.empty(0)] * d
            for t in range(d - 1, -1, -1):
                score = logpi[t] + psi[t][sys.dst[t]] + logbeta[sys.dst[t]]
                starts = sys.group_starts[t]
                mx = np.maximum.reduceat(score, starts)
                sums = np.add.reduceat(np.exp(score - mx[sys.src[t]]), starts)
                logbeta = mx + np.log(sums)
                trial[t] = score - logbeta[sys.src[t]]
            m_new = forward(trial)
            value_new = sys.objective_concat(m_new)
            if value_new >= value - 1e-14 or eta < 1e-6:
                logpi, m, value = trial, m_new, value_new
                eta = min(eta * 1.1, 64.0)
                break
            eta *= 0.5
    return logpi, m, gap, budget, False


def _policy_flows(sys: _FlowSystem, logpi: list[np.ndarray]) -> list[np.ndarray]:
    """Occupancy flows of a Markov policy given as log conditionals."""
    p = np.ones(1)
    flows = []
    for t in range(sys.d):
        f = p[sys.src[t]] * np.exp(logpi[t])
        flows.append(f)
        p = np.bincount(sys.dst[t], weights=f, minlength=sys.sizes[t + 1])
    return flows


def solve_occupancy(
    graph: LocalDynamicsGraph, config: SolverConfig | None = None
) -> OccupancyMeasure:
    """Fully-corrective Frank-Wolfe over the flow polytope.

    A multiplicative-weights phase (:func:`_mirror_ascent`) first
    drives the iterate close to optimal at one edge sweep per round,
    starting from the uniform policy, which is already optimal on
    unquotiented trees.  If that phase certifies the tolerance through
    the oracle duality gap, its flow is returned directly.  Otherwise
    the flow seeds the corrective loop: each round calls the exact
    linear oracle, checks the duality gap ``<g, s - x>``, adds the
    returned path to the atom set, and re-optimizes the atom weights
    over their simplex (see :func:`_correct_weights`).  Plain
    conditional-gradient steps zig-zag between near-optimal vertices
    and stall at gaps around 1e-4 on these polytopes; re-balancing the
    whole decomposition removes that failure mode while keeping the
    same oracle and the same gap certificate.  Raises
    :class:`NotConvergedError` with the best iterate attached when the
    gap tolerance is not reached within ``max_iters`` total rounds.
    """
    config = config or SolverConfig()
    w = _resolve_weights(graph, config)
    sys = _FlowSystem(graph, w, config.floor)
    history: list[tuple[float, float]] = []
    logpi, m, gap, used, certified = _mirror_ascent(
        sys, config.tolerance, config.max_iters, history, config.keep_history
    )
    if certified:
        occ = _occupancy_from_flows(
            sys, _policy_flows(sys, logpi), sys.objective_concat(m), gap
        )
        if config.keep_history:
            object.__setattr__(occ, "_history", tuple(history))
        return occ
    seed = _policy_flows(sys, logpi)
    atoms = _AtomSet(sys, seed, sys.concat(sys.marginals(seed)))
    m = atoms.seed_marg.copy()
    for _ in range(config.max_iters - used):
        cv = sys.cvec(m)
        path = tuple(sys.lmo(sys.edge_scores(cv)))
        gs = float(cv[sys.path_concat_nodes(list(path))].sum())
        gx = float(cv @ m)
        gap = gs - gx
        if config.keep_history:
            history.append((sys.objective_concat(m), gap))
        if gap <= config.tolerance:
            occ = _occupancy_from_flows(
                sys, atoms.flows(), sys.objective_concat(m), gap
            )
            if config.keep_history:
                object.__setattr__(occ, "_history", tuple(history))
            return occ
        atoms.add(path)
        inner_tol = max(0.2 * config.tolerance, 0.02 * gap)
        m = _correct_weights(sys, atoms, m, inner_tol)
    occ = _occupancy_from_flows(sys, atoms.flows(), sys.objective_concat(m), gap)
    raise NotConvergedError(
        f"duality gap {gap:.3e} above tolerance {config.tolerance:.1e} "
        f"after {config.max_iters} iterations",
        occupancy=occ,
        gap=gap,
    )


def objective_value(
    occupancy: OccupancyMeasure,
    entropy_weights: tuple[float, ...] | None = None,
) -> float:
    """Weighted sum of layer-marginal entropies of an occupancy."""
    d = occupancy.depth
    if entropy_weights is None:
        w = np.full(d, 1.0 / d)
    else:
        w = np.asarray(entropy_weights, dtype=float)
        if w.shape != (d,):
            raise ValueError(f"entropy_weights must have length {d}")
    total = 0.0
    for t in range(1, d + 1):
        masses = np.array(list(occupancy.state_marginals[t].values()))
        nz = masses[masses > 0]
        total += w[t - 1] * float(-(nz * np.log(nz)).sum())
    return total


def extract_policy(
    graph: LocalDynamicsGraph,
    occupancy: OccupancyMeasure,
    floor: float = 1e-12,
) -> ExplorationPolicy:
    """Conditional action distribution per non-final node.

    Nodes carrying no visitation mass fall back to the uniform
    distribution over their out-edges.
    """
    rows = {}
    for t in range(occupancy.depth):
        flows = occupancy.flows[t]
        for v in occupancy.layers[t]:
            out = graph.out_edges(v)
            acts = tuple(a for a, _ in out)
            masses = np.array([flows.get((v, a), 0.0) for a in acts])
            total = float(masses.sum())
            if total <= floor:
                probs = np.full(len(acts), 1.0 / len(acts))
            else:
                probs = masses / total
            cdf = tuple(float(c) for c in np.cumsum(probs))
            rows[v] = (acts, tuple(float(p) for p in probs), cdf)
    return ExplorationPolicy(
        rows=rows,
        objective_value=occupancy.objective_value,
        gap_certificate=occupancy.gap_certificate,
    )


def uniform_policy(graph: LocalDynamicsGraph) -> ExplorationPolicy:
    """Uniform distribution over out-edges at every non-final node."""
    rows = {}
    for n in graph.nodes:
        if n.depth == graph.depth:
            continue
        out = graph.out_edges(n.id)
        acts = tuple(a for a, _ in out)
        probs = np.full(len(acts), 1.0 / len(acts))
        cdf = tuple(float(c) for c in np.cumsum(probs))
        rows[n.id] = (acts, tuple(float(p) for p in probs), cdf)
    return ExplorationPolicy(rows=rows)


def forward_marginals(
    graph: LocalDynamicsGraph, policy: ExplorationPolicy
) -> OccupancyMeasure:
    """Propagate the policy from the root; exact layer occupancies."""
    mass = {graph.root: 1.0}
    flows = []
    marginals = [dict(mass)]
    for t in range(graph.depth):
        step: dict[tuple[int, int], float] = {}
        nxt: dict[int, float] = {v: 0.0 for v in graph.layers[t + 1]}
        for v in graph.layers[t]:
            m = mass.get(v, 0.0)
            acts, probs, _ = policy.rows[v]
            targets = dict(graph.out_edges(v))
            for a, p in zip(acts, probs):
                q = m * p
                step[(v, a)] = q
                nxt[targets[a]] += q
        flows.append(step)
        mass = nxt
        marginals.append(dict(mass))
    occ = OccupancyMeasure(
        layers=tuple(tuple(l) for l in graph.layers),
        flows=tuple(flows),
        state_marginals=tuple(marginals),
    )
    return OccupancyMeasure(
        layers=occ.layers,
        flows=occ.flows,
        state_marginals=occ.state_marginals,
        objective_value=objective_value(occ),
        gap_certificate=None,
    )


def policy_to_json(policy: ExplorationPolicy) -> str:
    """Serialize a policy to a JSON string.

    Only actions and probabilities are stored; the sampling CDF is
    rebuilt on load with the same running sum used at extraction, so a
    round trip reproduces draws exactly.
    """
    rows = {
        str(node_id): {"actions": list(acts), "probs": list(probs)}
        for node_id, (acts, probs, _) in policy.rows.items()
    }
    payload = {
        "format": "exploration-policy",
        "version": 1,
        "objective_value": policy.objective_value,
        "gap_certificate": policy.gap_certificate,
        "rows": rows,
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def policy_from_json(text: str) -> ExplorationPolicy:
    """Parse a policy from the JSON produced by :func:`policy_to_json`."""
    payload = json.loads(text)
    if not isinstance(payload, dict) or payload.get("format") != "exploration-policy":
        raise ValueError("not an exploration policy file")
    rows = {}
    for key, row in payload["rows"].items():
        acts = tuple(int(a) for a in row["actions"])
        probs = tuple(float(p) for p in row["probs"])
        if len(acts) != len(probs):
            raise ValueError(f"node {key}: actions and probs differ in length")
        cdf = tuple(float(c) for c in np.cumsum(np.asarray(probs, dtype=float)))
        rows[int(key)] = (acts, probs, cdf)
    return ExplorationPolicy(
        rows=rows,
        objective_value=payload.get("objective_value"),
        gap_certificate=payload.get("gap_certificate"),
    )
