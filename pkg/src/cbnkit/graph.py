"""Mixed causal graphs, latent expansion, back-door paths and d-separation.

Nodes are plain strings. A graph additionally records which nodes are
latent; latent nodes never carry data and never enter adjustment sets.
"""

from __future__ import annotations

import graphlib
import itertools
from dataclasses import dataclass
from importlib import resources
from pathlib import Path as FsPath
from typing import Iterable, Iterator, Sequence

from cbnkit.errors import (
    CycleError,
    GraphError,
    InvalidQueryError,
    UnknownNodeError,
    UnresolvedEdgeError,
)

DIRECTED = "->"
BIDIRECTED = "<->"
UNDIRECTED = "--"
EDGE_KINDS = (DIRECTED, BIDIRECTED, UNDIRECTED)

CHAIN, FORK, COLLIDER = "chain", "fork", "collider"


@dataclass(frozen=True, order=True)
class Edge:
    """A single edge. Symmetric kinds store their endpoints sorted."""

    tail: str
    head: str
    kind: str = DIRECTED

    def __post_init__(self):
        if self.kind not in EDGE_KINDS:
            raise GraphError(f"unknown edge kind {self.kind!r}")
        if self.tail == self.head:
            raise GraphError(f"self-loop on {self.tail}")
        if self.kind != DIRECTED and self.head < self.tail:
            tail, head = self.head, self.tail
            object.__setattr__(self, "tail", tail)
            object.__setattr__(self, "head", head)

    @property
    def pair(self) -> frozenset:
        return frozenset((self.tail, self.head))

    def __str__(self):
        return f"{self.tail} {self.kind} {self.head}"


class MixedGraph:
    """Graph with directed, bi-directed and undirected edges.

    At most one edge is allowed per node pair, except that a bi-directed
    edge may sit alongside a directed one (a direct effect that is also
    confounded by a hidden common parent).
    """

    def __init__(self, nodes: Iterable[str] = (), edges: Iterable[Edge] = (), latent: Iterable[str] = ()):
        edges = frozenset(edges)
        names = set(nodes)
        for e in edges:
            names.update((e.tail, e.head))
        self._nodes = tuple(sorted(names))
        self._latent = frozenset(latent)
        unknown = self._latent - names
        if unknown:
            raise UnknownNodeError(f"latent nodes not in graph: {sorted(unknown)}")
        seen: dict[frozenset, list[Edge]] = {}
        for e in sorted(edges):
            seen.setdefault(e.pair, []).append(e)
        for pair, group in seen.items():
            kinds = sorted(e.kind for e in group)
            if len(group) == 1 or (len(group) == 2 and kinds == [DIRECTED, BIDIRECTED]):
                continue
            raise GraphError(f"conflicting edges between {sorted(pair)}: {[str(e) for e in group]}")
        self._edges = edges

    @property
    def nodes(self) -> tuple[str, ...]:
        return self._nodes

    @property
    def latent(self) -> frozenset:
        return self._latent

    @property
    def observed(self) -> tuple[str, ...]:
        return tuple(n for n in self._nodes if n not in self._latent)

    @property
    def edges(self) -> frozenset:
        return self._edges

    def edges_of_kind(self, kind: str) -> list[Edge]:
        return sorted(e for e in self._edges if e.kind == kind)

    def adjacent(self, a: str, b: str) -> bool:
        return any(e.pair == frozenset((a, b)) for e in self._edges)

    def neighbors(self, n: str) -> set[str]:
        out = set()
        for e in self._edges:
            if e.tail == n:
                out.add(e.head)
            elif e.head == n:
                out.add(e.tail)
        return out

    def without_nodes(self, drop: Iterable[str]) -> "MixedGraph":
        drop = set(drop)
        return MixedGraph(
            [n for n in self._nodes if n not in drop],
            [e for e in self._edges if e.tail not in drop and e.head not in drop],
            self._latent - drop,
        )

    def with_edges(self, edges: Iterable[Edge]) -> "MixedGraph":
        return MixedGraph(self._nodes, self._edges | frozenset(edges), self._latent)

    def __eq__(self, other):
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return (self._nodes, self._edges, self._latent) == (other._nodes, other._edges, other._latent)

    def __hash__(self):
        return hash((self._nodes, self._edges, self._latent))

    def __repr__(self):
        return f"MixedGraph({len(self._nodes)} nodes, {len(self._edges)} edges)"


class CausalDag:
    """Immutable DAG over observed and latent nodes."""

    def __init__(self, nodes: Iterable[str] = (), arcs: Iterable[tuple[str, str]] = (), latent: Iterable[str] = ()):
        arcs = frozenset((str(a), str(b)) for a, b in arcs)
        names = set(nodes)
        for a, b in arcs:
            if a == b:
                raise GraphError(f"self-loop on {a}")
            names.update((a, b))
        for a, b in arcs:
            if (b, a) in arcs:
                raise CycleError([a, b, a])
        self._nodes = tuple(sorted(names))
        self._latent = frozenset(latent)
        if self._latent - names:
            raise UnknownNodeError(f"latent nodes not in graph: {sorted(self._latent - names)}")
        self._arcs = arcs
        parents: dict[str, set] = {n: set() for n in self._nodes}
        children: dict[str, set] = {n: set() for n in self._nodes}
        for a, b in arcs:
            parents[b].add(a)
            children[a].add(b)
        self._parents = {n: frozenset(p) for n, p in parents.items()}
        self._children = {n: frozenset(c) for n, c in children.items()}
        sorter = graphlib.TopologicalSorter({n: sorted(self._parents[n]) for n in self._nodes})
        try:
            sorter.prepare()
        except graphlib.CycleError as exc:
            raise CycleError(exc.args[1]) from None
        order = []
        while sorter.is_active():
            ready = sorted(sorter.get_ready())
            order.extend(ready)
            sorter.done(*ready)
        self._order = tuple(order)

    @property
    def nodes(self) -> tuple[str, ...]:
        return self._nodes

    @property
    def latent(self) -> frozenset:
        return self._latent

    @property
    def observed(self) -> tuple[str, ...]:
        return tuple(n for n in self._nodes if n not in self._latent)

    @property
    def arcs(self) -> frozenset:
        return self._arcs

    @property
    def topological_order(self) -> tuple[str, ...]:
        return self._order

    def check(self, *names: str) -> None:
        for n in names:
            if n not in self._parents:
                raise UnknownNodeError(f"unknown node {n!r}")

    def parents(self, n: str) -> frozenset:
        self.check(n)
        return self._parents[n]

    def children(self, n: str) -> frozenset:
        self.check(n)
        return self._children[n]

    def has_arc(self, a: str, b: str) -> bool:
        return (a, b) in self._arcs

    def neighbors(self, n: str) -> frozenset:
        return self.parents(n) | self.children(n)

    def ancestors(self, nodes: Iterable[str]) -> set[str]:
        """Ancestors of ``nodes``, the nodes themselves included."""
        stack = list(nodes)
        self.check(*stack)
        seen = set(stack)
        while stack:
            for p in self._parents[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def subgraph(self, keep: Iterable[str]) -> "CausalDag":
        keep = set(keep)
        return CausalDag(keep, [(a, b) for a, b in self._arcs if a in keep and b in keep], self._latent & keep)

    def to_mixed(self) -> MixedGraph:
        return MixedGraph(self._nodes, [Edge(a, b) for a, b in self._arcs], self._latent)

    def __eq__(self, other):
        if not isinstance(other, CausalDag):
            return NotImplemented
        return (self._nodes, self._arcs, self._latent) == (other._nodes, other._arcs, other._latent)

    def __hash__(self):
        return hash((self._nodes, self._arcs, self._latent))

    def __repr__(self):
        parts = []
        for n in self._order:
            ps = ",".join(sorted(self._parents[n]))
            parts.append(f"[{n}|{ps}]" if ps else f"[{n}]")
        return "CausalDag(" + "".join(parts) + ")"


@dataclass(frozen=True)
class Path:
    """A simple path; ``arrows[i]`` is ``"->"`` when nodes[i] -> nodes[i+1]."""

    nodes: tuple[str, ...]
    arrows: tuple[str, ...]

    @classmethod
    def in_graph(cls, g: CausalDag, nodes: Sequence[str]) -> "Path":
        nodes = tuple(nodes)
        if len(set(nodes)) != len(nodes):
            raise GraphError(f"path revisits a node: {nodes}")
        arrows = []
        for a, b in zip(nodes, nodes[1:]):
            if g.has_arc(a, b):
                arrows.append("->")
            elif g.has_arc(b, a):
                arrows.append("<-")
            else:
                raise GraphError(f"{a} and {b} are not adjacent")
        return cls(nodes, tuple(arrows))

    def __len__(self):
        return len(self.nodes)

    def __str__(self):
        out = [self.nodes[0]]
        for arrow, n in zip(self.arrows, self.nodes[1:]):
            out += [arrow, n]
        return " ".join(out)


# --- operations -----------------------------------------------------------


def expand_latents(g: MixedGraph) -> CausalDag:
    """Replace each bi-directed edge by a fresh latent parent U1, U2, ...

    Fresh names are handed out in sorted order of the bi-directed pairs and
    skip names already used by the graph.
    """
    undirected = g.edges_of_kind(UNDIRECTED)
    if undirected:
        raise UnresolvedEdgeError("undirected edges must be resolved first: " + ", ".join(map(str, undirected)))
    arcs = [(e.tail, e.head) for e in g.edges_of_kind(DIRECTED)]
    latent = set(g.latent)
    taken = set(g.nodes)
    counter = itertools.count(1)
    for e in g.edges_of_kind(BIDIRECTED):
        name = f"U{next(counter)}"
        while name in taken:
            name = f"U{next(counter)}"
        taken.add(name)
        latent.add(name)
        arcs += [(name, e.tail), (name, e.head)]
    return CausalDag(taken, arcs, latent)


def mutilate(g: CausalDag, treatment: str) -> CausalDag:
    """Remove every arc whose tail is ``treatment``."""
    g.check(treatment)
    return CausalDag(g.nodes, [(a, b) for a, b in g.arcs if a != treatment], g.latent)


def descendants(g: CausalDag, n: str) -> set[str]:
    g.check(n)
    seen: set[str] = set()
    stack = [n]
    while stack:
        for c in g.children(stack.pop()):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return seen


def _check_query(g: CausalDag, x: str, y: str, z: Iterable[str] = ()) -> frozenset:
    z = frozenset(z)
    g.check(x, y, *z)
    if x == y:
        raise InvalidQueryError(f"treatment and outcome coincide ({x})")
    if x in z or y in z:
        raise InvalidQueryError("conditioning set must exclude the query endpoints")
    return z


def _simple_paths(g: CausalDag, x: str, y: str, first: Iterable[str]) -> Iterator[tuple[str, ...]]:
    stack = [(x, nb) for nb in sorted(first, reverse=True)]
    path = [x]
    # iterative DFS; each stack entry is (node the step leaves from, node it enters)
    while stack:
        src, nxt = stack.pop()
        while path[-1] != src:
            path.pop()
        if nxt in path:
            continue
        if nxt == y:
            yield tuple(path) + (y,)
            continue
        path.append(nxt)
        for nb in sorted(g.neighbors(nxt), reverse=True):
            if nb not in path:
                stack.append((nxt, nb))


def enumerate_backdoor_paths(g: CausalDag, x: str, y: str) -> list[Path]:
    """All simple paths from x to y whose first edge points into x.

    ``g`` is expected to be mutilated on ``x`` already. Paths come back in
    lexicographic order of their node-name sequences.
    """
    _check_query(g, x, y)
    found = [Path.in_graph(g, p) for p in _simple_paths(g, x, y, g.parents(x))]
    return sorted(found, key=lambda p: p.nodes)


def all_simple_paths(g: CausalDag, x: str, y: str) -> list[Path]:
    """Every simple path between x and y, regardless of edge direction."""
    _check_query(g, x, y)
    return sorted((Path.in_graph(g, p) for p in _simple_paths(g, x, y, g.neighbors(x))), key=lambda p: p.nodes)


def classify_triple(g: CausalDag, path: Path, index: int) -> str:
    if not 0 < index < len(path) - 1:
        raise IndexError(f"index {index} is not interior to a path of length {len(path)}")
    a, m, b = path.nodes[index - 1 : index + 2]
    into_left = g.has_arc(a, m)
    into_right = g.has_arc(b, m)
    if into_left and into_right:
        return COLLIDER
    if not into_left and not into_right:
        return FORK
    return CHAIN


def is_blocked(g: CausalDag, path: Path, z: Iterable[str]) -> bool:
    z = set(z)
    for i in range(1, len(path) - 1):
        m = path.nodes[i]
        if classify_triple(g, path, i) == COLLIDER:
            if m not in z and not (descendants(g, m) & z):
                return True
        elif m in z:
            return True
    return False


def d_separated(g: CausalDag, x: str, y: str, z: Iterable[str]) -> bool:
    """Reachability ("Bayes-ball") test for x _||_ y | z.

    Runs in linear time in the number of arcs; the path-based definition
    is available as :func:`d_separated_by_paths` for cross-checking.
    """
    z = _check_query(g, x, y, z)
    return y not in _reachable(g, x, z)


def _reachable(g: CausalDag, x: str, z: frozenset) -> set[str]:
    # ancestors of z, needed to open colliders with a conditioned descendant
    anc_z = g.ancestors(z) if z else set()
    # (node, direction): "up" = arrived from a child, "down" = arrived from a parent
    todo = [(x, "up")]
    visited = set()
    reach = set()
    while todo:
        n, direction = todo.pop()
        if (n, direction) in visited:
            continue
        visited.add((n, direction))
        if n not in z:
            reach.add(n)
        if direction == "up" and n not in z:
            todo += [(p, "up") for p in g.parents(n)]
            todo += [(c, "down") for c in g.children(n)]
        elif direction == "down":
            if n not in z:
                todo += [(c, "down") for c in g.children(n)]
            if n in anc_z:
                todo += [(p, "up") for p in g.parents(n)]
    reach.discard(x)
    return reach


def d_separated_by_paths(g: CausalDag, x: str, y: str, z: Iterable[str]) -> bool:
    """Definition-level d-separation: every simple path is blocked."""
    z = _check_query(g, x, y, z)
    return all(is_blocked(g, p, z) for p in all_simple_paths(g, x, y))


def first_open_backdoor_path(g: CausalDag, x: str, y: str, z: Iterable[str]) -> Path | None:
    """The first (canonical order) back-door path left open by z, if any."""
    z = set(z)
    for p in enumerate_backdoor_paths(mutilate(g, x), x, y):
        if not is_blocked(g, p, z):
            return p
    return None


def satisfies_backdoor(g: CausalDag, x: str, y: str, z: Iterable[str]) -> bool:
    z = _check_query(g, x, y, z)
    if z & descendants(g, x):
        return False
    return d_separated(mutilate(g, x), x, y, z)


def find_adjustment_sets(g: CausalDag, x: str, y: str, max_size: int = 3) -> list[frozenset]:
    """Every observed back-door adjustment set with at most ``max_size`` members.

    Sorted by size, then lexicographically by sorted member names.
    """
    _check_query(g, x, y)
    banned = descendants(g, x) | {x, y} | set(g.latent)
    candidates = [n for n in g.nodes if n not in banned]
    gx = mutilate(g, x)
    found = []
    for k in range(0, max_size + 1):
        for combo in itertools.combinations(candidates, k):
            if d_separated(gx, x, y, combo):
                found.append(frozenset(combo))
    return sorted(found, key=lambda s: (len(s), sorted(s)))


# --- fixture format -------------------------------------------------------
#
#   # comment
#   observed A B C      (optional; declares isolated nodes)
#   latent U1 U2
#   A -> B
#   A <-> C
#   B -- C


def parse_graph(text: str) -> MixedGraph:
    nodes, latent, edges = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] in ("observed", "latent"):
            (latent if tokens[0] == "latent" else nodes).extend(tokens[1:])
            continue
        if len(tokens) != 3 or tokens[1] not in EDGE_KINDS:
            raise GraphError(f"line {lineno}: expected 'tail KIND head', got {raw!r}")
        edges.append(Edge(tokens[0], tokens[2], tokens[1]))
    return MixedGraph(nodes + latent, edges, latent)


def format_graph(g: MixedGraph | CausalDag) -> str:
    if isinstance(g, CausalDag):
        g = g.to_mixed()
    lines = []
    if g.observed:
        lines.append("observed " + " ".join(g.observed))
    if g.latent:
        lines.append("latent " + " ".join(sorted(g.latent)))
    for kind in EDGE_KINDS:
        lines += [str(e) for e in g.edges_of_kind(kind)]
    return "\n".join(lines) + "\n"


def read_graph(path) -> MixedGraph:
    """Read a graph file; bare names such as ``"fig3"`` load a bundled fixture."""
    p = FsPath(path)
    if not p.exists() and p.suffix in ("", ".graph") and "/" not in str(path):
        res = resources.files("cbnkit.resources") / f"{p.stem}.graph"
        if res.is_file():
            return parse_graph(res.read_text())
    return parse_graph(p.read_text())


def write_graph(g: MixedGraph | CausalDag, path) -> None:
    FsPath(path).write_text(format_graph(g))


def as_dag(g: MixedGraph) -> CausalDag:
    """Expand a mixed graph that has no undirected edges into a DAG."""
    return expand_latents(g)


def load_fig3() -> CausalDag:
    return as_dag(read_graph("fig3"))
