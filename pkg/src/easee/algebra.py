"""Action sequences, equivalence pairs, and the one-step rewrite relation.

Sequences are tuples of action indices into an :class:`ActionSet`.  An
:class:`EquivalenceSet` is a list of unordered pairs of sequences; two
sequences are equivalent when one can be rewritten into the other by
repeatedly replacing an occurrence of one side of a pair with the other
side.  The chained relation is reflexive (the empty window), symmetric
(pairs are unordered) and transitive (chaining), so it partitions the
free monoid of sequences into classes.

Closures are computed by bounded breadth-first search: sequences longer
than ``max_len`` are recorded but never expanded or returned, and the
search aborts with :class:`BudgetExceeded` once more than ``max_nodes``
distinct sequences have been generated.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

Seq = tuple[int, ...]

EMPTY: Seq = ()

DEFAULT_MAX_NODES = 100_000


class BudgetExceeded(RuntimeError):
    """Raised when a bounded closure search outgrows its node budget."""


class DslError(ValueError):
    """Raised on malformed equivalence-set DSL text."""


@dataclass(frozen=True)
class ActionSet:
    """Ordered, distinct action names; the index order is canonical."""

    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise ValueError("action set must not be empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("action names must be distinct")
        for name in self.names:
            if not name or name == "-" or any(c.isspace() for c in name) or "#" in name or "~" in name:
                raise ValueError(f"invalid action name {name!r}")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown action {name!r}") from None

    def to_names(self, seq: Seq) -> tuple[str, ...]:
        return tuple(self.names[i] for i in seq)

    def from_names(self, names) -> Seq:
        return tuple(self.index(n) for n in names)


def _normalize_pair(v: Seq, w: Seq) -> tuple[Seq, Seq]:
    return (v, w) if (len(v), v) <= (len(w), w) else (w, v)


@dataclass(frozen=True)
class EquivalenceSet:
    """Unordered pairs of sequences declared interchangeable.

    ``source_text`` keeps the DSL the set was parsed from (or a
    synthesized rendering for programmatic sets) so exports can echo it
    verbatim.
    """

    pairs: tuple[tuple[Seq, Seq], ...]
    source_text: str = ""

    def __post_init__(self):
        seen: dict[tuple[Seq, Seq], None] = {}
        for v, w in self.pairs:
            if v == w:
                raise ValueError(f"pair has identical sides: {v!r}")
            seen.setdefault(_normalize_pair(v, w))
        object.__setattr__(self, "pairs", tuple(seen))

    def __len__(self) -> int:
        return len(self.pairs)

    def orientations(self) -> tuple[tuple[Seq, Seq], ...]:
        """Both directions of every pair, in declaration order."""
        out = []
        for v, w in self.pairs:
            out.append((v, w))
            out.append((w, v))
        return tuple(out)

    def longest_side(self) -> int:
        return max((len(s) for p in self.pairs for s in p), default=0)

    def side_prefixes(self) -> frozenset[Seq]:
        """Every nonempty prefix (the full side included) of any side."""
        out = set()
        for v, w in self.pairs:
            for side in (v, w):
                for k in range(1, len(side) + 1):
                    out.add(side[:k])
        return frozenset(out)

    def max_index(self) -> int:
        return max((i for p in self.pairs for s in p for i in s), default=-1)


EMPTY_OMEGA = EquivalenceSet(pairs=(), source_text="")


def concat(*seqs: Seq) -> Seq:
    out: Seq = ()
    for s in seqs:
        out = out + s
    return out


def one_step_rewrites(s: Seq, omega: EquivalenceSet) -> tuple[Seq, ...]:
    """All sequences reachable from ``s`` by one window rewrite.

    ``s`` itself is always included (the empty rewrite), so the relation
    is reflexive by construction.
    """
    out = {s: None}
    for x, y in omega.orientations():
        if len(x) == 0:
            for i in range(len(s) + 1):
                out.setdefault(s[:i] + y + s[i:])
        else:
            limit = len(s) - len(x)
            for i in range(limit + 1):
                if s[i : i + len(x)] == x:
                    out.setdefault(s[:i] + y + s[i + len(x) :])
    return tuple(out)


def closure(
    s: Seq,
    omega: EquivalenceSet,
    max_len: int | None = None,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> frozenset[Seq]:
    """Equivalence class of ``s``, restricted to sequences of length
    <= ``max_len``.

    Sequences longer than ``max_len`` are kept in the visited
    bookkeeping (they count toward ``max_nodes``) but are neither
    expanded nor returned.  Defaults: ``max_len`` is ``len(s)`` plus the
    longest side of ``omega``.
    """
    if max_len is None:
        max_len = len(s) + omega.longest_side()
    if len(s) > max_len:
        raise ValueError("max_len is smaller than the query sequence")
    visited = {s}
    frontier = deque([s])
    while frontier:
        cur = frontier.popleft()
        for nxt in one_step_rewrites(cur, omega):
            if nxt in visited:
                continue
            visited.add(nxt)
            if len(visited) > max_nodes:
                raise BudgetExceeded(
                    f"closure of {s!r} generated more than {max_nodes} sequences"
                )
            if len(nxt) <= max_len:
                frontier.append(nxt)
    return frozenset(v for v in visited if len(v) <= max_len)


def equivalent(
    s: Seq,
    t: Seq,
    omega: EquivalenceSet,
    max_len: int | None = None,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> bool:
    """Whether ``t`` lies in the bounded closure of ``s``.

    The default budget allows one growth step past the longer query:
    ``max(len(s), len(t))`` plus the longest side of ``omega``.
    """
    if s == t:
        return True
    if max_len is None:
        max_len = max(len(s), len(t)) + omega.longest_side()
    return t in closure(s, omega, max_len=max_len, max_nodes=max_nodes)


# --- DSL -----------------------------------------------------------------
#
#   # comment
#   actions: R L U D
#   equiv: R L ~ L R
#   equiv: R L ~ -
#
# One `actions:` line, then any number of `equiv:` lines.  `-` denotes
# the empty sequence.


def _parse_side(tokens: list[str], actions: ActionSet, lineno: int) -> Seq:
    if tokens == ["-"]:
        return EMPTY
    if not tokens or "-" in tokens:
        raise DslError(f"line {lineno}: a side is either `-` or a list of action names")
    try:
        return actions.from_names(tokens)
    except KeyError as e:
        raise DslError(f"line {lineno}: {e.args[0]}") from None


def parse_dsl(text: str) -> tuple[ActionSet, EquivalenceSet]:
    """Parse DSL text into an action set and an equivalence set."""
    actions: ActionSet | None = None
    pairs: list[tuple[Seq, Seq]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("actions:"):
            if actions is not None:
                raise DslError(f"line {lineno}: duplicate actions declaration")
            names = line[len("actions:") :].split()
            if not names:
                raise DslError(f"line {lineno}: empty actions declaration")
            try:
                actions = ActionSet(tuple(names))
            except ValueError as e:
                raise DslError(f"line {lineno}: {e}") from None
        elif line.startswith("equiv:"):
            if actions is None:
                raise DslError(f"line {lineno}: equiv before actions declaration")
            body = line[len("equiv:") :]
            halves = body.split("~")
            if len(halves) != 2:
                raise DslError(f"line {lineno}: expected exactly one `~`")
            v = _parse_side(halves[0].split(), actions, lineno)
            w = _parse_side(halves[1].split(), actions, lineno)
            if v == w:
                raise DslError(f"line {lineno}: the two sides are identical")
            pairs.append((v, w))
        else:
            raise DslError(f"line {lineno}: unrecognized line {line!r}")
    if actions is None:
        raise DslError("missing actions declaration")
    return actions, EquivalenceSet(pairs=tuple(pairs), source_text=text)


def format_dsl(actions: ActionSet, omega: EquivalenceSet) -> str:
    """Render an action set and pairs as canonical DSL text."""

    def side(s: Seq) -> str:
        return " ".join(actions.to_names(s)) if s else "-"

    lines = ["actions: " + " ".join(actions.names)]
    lines.extend(f"equiv: {side(v)} ~ {side(w)}" for v, w in omega.pairs)
    return "\n".join(lines) + "\n"


def make_omega(actions: ActionSet, pairs, source_text: str | None = None) -> EquivalenceSet:
    """Build an equivalence set from name-based pairs.

    ``pairs`` is an iterable of two-element sequences of action-name
    lists, e.g. ``[(["R", "L"], [])]``.  Indices are validated against
    ``actions`` and a canonical DSL rendering is attached when no
    ``source_text`` is given.
    """
    idx_pairs = tuple(
        (actions.from_names(v), actions.from_names(w)) for v, w in pairs
    )
    omega = EquivalenceSet(pairs=idx_pairs, source_text=source_text or "")
    if not omega.source_text:
        omega = EquivalenceSet(pairs=idx_pairs, source_text=format_dsl(actions, omega))
    return omega
