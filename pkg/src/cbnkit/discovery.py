"""Information-theoretic structure learning for categorical data.

Skeleton pruning starts from the complete graph and removes an edge once
its conditional mutual information, given a greedily grown set of
contributors, falls under the NML complexity per sample. Unshielded triples
with a negative (penalized) interaction information become colliders, the
remaining marks are propagated with Meek's rules, and two arrowheads on one
edge give a bi-directed edge. All information quantities are in bits.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from cbnkit.data import Dataset, VariableSchema
from cbnkit.errors import ConfigError, EmptyDatasetError, MissingColumnError
from cbnkit.graph import BIDIRECTED, DIRECTED, UNDIRECTED, Edge, MixedGraph

ASYMPTOTIC_MIN_N = 10_000


@dataclass(frozen=True)
class MiEstimate:
    value: float
    sample_size: int

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class Blacklist:
    """Forbidden causal directions as (tail, head) pairs."""

    forbidden: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "forbidden", frozenset(tuple(p) for p in self.forbidden))
        for p in self.forbidden:
            if len(p) != 2 or p[0] == p[1]:
                raise ConfigError(f"bad blacklist entry {p!r}")

    @classmethod
    def of(cls, pairs: Iterable[Sequence[str]] = ()) -> "Blacklist":
        return cls(frozenset(tuple(p) for p in pairs))

    def forbids(self, tail: str, head: str) -> bool:
        return (tail, head) in self.forbidden

    def validate(self, names: Iterable[str]) -> None:
        names = set(names)
        for a, b in sorted(self.forbidden):
            for v in (a, b):
                if v not in names:
                    raise ConfigError(f"blacklist entry {a} -> {b} names unknown variable {v}")

    def __len__(self):
        return len(self.forbidden)


# --- plug-in information measures -----------------------------------------


class EntropyTable:
    """Memoized plug-in joint entropies over a dataset's columns."""

    def __init__(self, data: Dataset):
        if data.n_rows == 0:
            raise EmptyDatasetError("cannot estimate information from an empty dataset")
        self.data = data
        self.n = data.n_rows
        self._cache: dict[tuple, float] = {(): 0.0}
        self._counts: dict[tuple, np.ndarray] = {}

    def _check(self, names):
        for v in names:
            if v not in self.data:
                raise MissingColumnError(f"no data column {v!r}")

    def counts(self, names: Iterable[str]) -> np.ndarray:
        """Non-zero joint cell counts over ``names`` (order irrelevant)."""
        key = tuple(sorted(set(names)))
        if key not in self._counts:
            self._check(key)
            if not key:
                self._counts[key] = np.array([self.n])
            else:
                shape = self.data.schema.cards(key)
                if len(key) == 1:
                    flat = self.data.column(key[0])
                else:
                    flat = np.ravel_multi_index(tuple(self.data.column(v) for v in key), shape)
                c = np.bincount(flat)
                self._counts[key] = c[c > 0]
        return self._counts[key]

    def __call__(self, names: Iterable[str]) -> float:
        key = tuple(sorted(set(names)))
        if key not in self._cache:
            c = self.counts(key).astype(float)
            self._cache[key] = math.log2(self.n) - float(np.dot(c, np.log2(c))) / self.n
        return self._cache[key]

    def strata(self, names: Iterable[str]) -> np.ndarray:
        return self.counts(names)

    def mi(self, x: str, y: str, z: Iterable[str] = ()) -> float:
        z = tuple(z)
        return self((x, *z)) + self((y, *z)) - self((x, y, *z)) - self(z)

    def interaction(self, x: str, y: str, z: str, u: Iterable[str] = ()) -> float:
        """I(X;Y;Z|U) by inclusion-exclusion over joint entropies."""
        u = tuple(u)
        h = lambda *vs: self((*vs, *u))
        return (h(x) + h(y) + h(z) - h(x, y) - h(x, z) - h(y, z) + h(x, y, z)) - h()


def _table(data: Dataset, x, y, z) -> EntropyTable:
    z = tuple(z)
    if x in z or y in z:
        raise ValueError("conditioning set must exclude x and y")
    return EntropyTable(data)


def entropy(data: Dataset, names: Iterable[str]) -> float:
    return EntropyTable(data)(names)


def mutual_information(data: Dataset, x: str, y: str) -> MiEstimate:
    t = _table(data, x, y, ())
    return MiEstimate(t.mi(x, y), t.n)


def conditional_mi(data: Dataset, x: str, y: str, z: Iterable[str] = ()) -> MiEstimate:
    z = tuple(sorted(set(z)))
    t = _table(data, x, y, z)
    return MiEstimate(t.mi(x, y, z), t.n)


def interaction_information(data: Dataset, x: str, y: str, z: str) -> float:
    t = _table(data, x, y, (z,))
    return t.interaction(x, y, z)


# --- NML complexity -------------------------------------------------------


def _log_binom(n, h):
    return math.lgamma(n + 1) - math.lgamma(h + 1) - math.lgamma(n - h + 1)


@lru_cache(maxsize=None)
def _ln_regret2(n: int) -> float:
    if n == 0:
        return 0.0
    h = np.arange(n + 1, dtype=float)
    lg = np.array([math.lgamma(k + 1) for k in range(n + 1)])
    terms = lg[n] - lg - lg[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(h > 0, h * np.log(h / n), 0.0)
        b = np.where(h < n, (n - h) * np.log((n - h) / n), 0.0)
    terms = terms + a + b
    m = terms.max()
    return float(m + math.log(np.exp(terms - m).sum()))


@lru_cache(maxsize=None)
def _ln_regret_row(n: int, kmax: int) -> tuple[float, ...]:
    """ln C(n, k) for k = 0..kmax via C(n, k+2) = C(n, k+1) + (n/k) C(n, k)."""
    out = [0.0, 0.0]
    if kmax >= 2:
        out.append(_ln_regret2(n))
    for k in range(1, kmax - 1):
        out.append(float(np.logaddexp(out[k + 1], math.log(n / k) + out[k])))
    return tuple(out[: kmax + 1])


def log2_regret(n: int, k: int) -> float:
    """log2 of the multinomial NML normalizer C(n, k)."""
    if n < 0 or k < 1:
        raise ValueError(f"regret needs n >= 0 and k >= 1, got n={n}, k={k}")
    if n == 0 or k == 1:
        return 0.0
    return _ln_regret_row(int(n), int(k))[k] / math.log(2)


def log2_regret_asymptotic(n: int, k: int) -> float:
    """Szpankowski's expansion of log2 C(n, k), accurate for large n."""
    g, g2 = math.lgamma(k / 2), math.lgamma(k / 2 - 0.5)
    ratio = math.exp(g - g2)
    ln = ((k - 1) / 2 * math.log(n / 2) + 0.5 * math.log(math.pi) - g
          + math.sqrt(2) * k * ratio / (3 * math.sqrt(n))
          + ((3 + k * (k - 2) * (2 * k + 1)) / 36 - ratio ** 2 * k ** 2 / 9) / n)
    return ln / math.log(2)


def _pair_regret(n: int, rx: int, ry: int) -> float:
    return log2_regret(n, rx * ry) - log2_regret(n, rx) - log2_regret(n, ry)


def stratified_complexity(strata: Iterable[int], rx: int, ry: int) -> float:
    """Sum over conditioning strata of the joint-vs-product regret gap, in bits."""
    return float(sum(_pair_regret(int(m), rx, ry) for m in strata))


def nml_complexity(n: int, x_card: int, y_card: int, z_cards: Sequence[int] = ()) -> float:
    """C_NML(X,Y|Z) in bits with the n rows split as evenly as possible over strata.

    The retention test compares I(X;Y|Z) against this value divided by n.
    """
    if n < 1:
        raise ValueError("nml_complexity needs n >= 1")
    if x_card < 2 or y_card < 2 or any(c < 1 for c in z_cards):
        raise ValueError("cardinalities must be >= 2 (conditioning >= 1)")
    q = int(np.prod(z_cards, dtype=np.int64)) if len(z_cards) else 1
    base, extra = divmod(n, q)
    total = 0.0
    if base:
        total += (q - extra) * _pair_regret(base, x_card, y_card)
    if extra:
        total += extra * _pair_regret(base + 1, x_card, y_card)
    return total


# --- skeleton -------------------------------------------------------------


@dataclass
class EdgeRecord:
    pair: tuple[str, str]
    contributors: tuple[str, ...] = ()
    residual_mi: float = 0.0
    threshold: float = 0.0
    retained: bool = True
    reason: str = ""


@dataclass
class SkeletonState:
    variables: tuple[str, ...]
    n: int
    records: dict = field(default_factory=dict)
    log: list = field(default_factory=list)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return sorted(p for p, r in self.records.items() if r.retained)

    @property
    def removed(self) -> list[tuple[str, str]]:
        return sorted(p for p, r in self.records.items() if not r.retained)

    def adjacent(self, a: str, b: str) -> bool:
        r = self.records.get(tuple(sorted((a, b))))
        return bool(r and r.retained)

    def contributors(self, a: str, b: str) -> tuple[str, ...]:
        return self.records[tuple(sorted((a, b)))].contributors


def _log(log, pair, step, action, contributor=None, delta=None, residual=None, threshold=None):
    log.append({
        "pair": list(pair), "step": step, "contributor": contributor,
        "delta_mi": delta, "residual_mi": residual, "threshold": threshold, "action": action,
    })


def prune_skeleton(data: Dataset, schema: VariableSchema | None = None, blacklist: Blacklist | None = None,
                   max_contributors: int = 3, complexity_scale: float = 1.0) -> SkeletonState:
    """Greedy contributor search and NML-gated edge removal from the complete graph.

    For each pair the contributor that explains the most remaining
    information (largest drop in conditional MI) is added while that drop
    is positive and exceeds the extra complexity it costs. The edge is
    removed at the first step where the residual conditional MI is at most
    ``complexity_scale`` times the complexity per sample.
    """
    blacklist = blacklist or Blacklist()
    names = tuple(v for v in (schema.names if schema is not None else data.columns))
    for v in names:
        if v not in data:
            raise MissingColumnError(f"no data column {v!r}")
    h = EntropyTable(data)
    n = h.n
    card = {v: data.schema[v].card for v in names}
    state = SkeletonState(names, n)

    def complexity(x, y, u):
        return stratified_complexity(h.strata(u), card[x], card[y])

    for x, y in itertools.combinations(sorted(names), 2):
        pair = (x, y)
        if blacklist.forbids(x, y) and blacklist.forbids(y, x):
            state.records[pair] = EdgeRecord(pair, retained=False, reason="blacklisted")
            _log(state.log, pair, 0, "remove_blacklisted")
            continue
        u: list[str] = []
        step = 0
        while True:
            residual = h.mi(x, y, u)
            c_u = complexity(x, y, u)
            thr = complexity_scale * c_u / n
            if residual <= thr:
                state.records[pair] = EdgeRecord(pair, tuple(u), residual, thr, False, "below_threshold")
                _log(state.log, pair, step, "remove", residual=residual, threshold=thr)
                break
            best, best_delta = None, 0.0
            if len(u) < max_contributors:
                scored = []
                for z in sorted(names):
                    if z in (x, y) or z in u:
                        continue
                    delta = residual - h.mi(x, y, u + [z])
                    gate = (complexity(x, y, u + [z]) - c_u) / n
                    if delta > 0 and delta > gate:
                        scored.append((z, delta))
                if scored:
                    top = max(d for _, d in scored)
                    best, best_delta = next((z, d) for z, d in scored if d >= top - 1e-12)
            if best is None:
                state.records[pair] = EdgeRecord(pair, tuple(u), residual, thr, True, "retained")
                _log(state.log, pair, step, "retain", residual=residual, threshold=thr)
                break
            u.append(best)
            step += 1
            _log(state.log, pair, step, "add_contributor", best, best_delta, residual, thr)
    return state


# --- orientation ----------------------------------------------------------


class _Marks:
    """Arrowhead marks per edge end: head[(a, b)] means an arrowhead at b."""

    def __init__(self, edges):
        self.edges = [tuple(e) for e in edges]
        self.adj: dict[str, set] = {}
        for a, b in self.edges:
            self.adj.setdefault(a, set()).add(b)
            self.adj.setdefault(b, set()).add(a)
        self.head: set[tuple[str, str]] = set()

    def adjacent(self, a, b):
        return b in self.adj.get(a, ())

    def directed(self, a, b):
        """a -> b: arrowhead at b only."""
        return (a, b) in self.head and (b, a) not in self.head

    def undirected(self, a, b):
        return (a, b) not in self.head and (b, a) not in self.head

    def arrow_into(self, a, b):
        return (a, b) in self.head

    def parents_directed(self):
        out: dict[str, set] = {}
        for a, b in self.head:
            if (b, a) not in self.head:
                out.setdefault(b, set()).add(a)
        return out

    def creates_cycle(self, a, b):
        """Would a -> b close a directed cycle given current directed arcs?"""
        children: dict[str, set] = {}
        for p, c in self.head:
            if (c, p) not in self.head:
                children.setdefault(p, set()).add(c)
        stack, seen = [b], {b}
        while stack:
            v = stack.pop()
            if v == a:
                return True
            for c in children.get(v, ()):
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return False


def _place(marks: _Marks, a, b, blacklist: Blacklist, log, why):
    """Put an arrowhead at b on edge a-b; returns True when placed."""
    if marks.arrow_into(a, b):
        return False
    if blacklist.forbids(a, b):
        log.append({"pair": [a, b], "action": "skip_blacklisted", "rule": why})
        return False
    if not marks.arrow_into(b, a) and marks.creates_cycle(a, b):
        log.append({"pair": [a, b], "action": "skip_cycle", "rule": why})
        return False
    marks.head.add((a, b))
    log.append({"pair": [a, b], "action": "arrowhead", "rule": why})
    return True


def _meek(marks: _Marks, blacklist: Blacklist, log) -> None:
    nodes = sorted(marks.adj)
    changed = True
    while changed:
        changed = False
        for b in nodes:
            nb = sorted(marks.adj[b])
            for c in nb:
                if not marks.undirected(b, c):
                    continue
                # R1: a *-> b -- c, a and c non-adjacent
                r1 = any(marks.arrow_into(a, b) and a != c and not marks.adjacent(a, c) for a in nb)
                # R2: b -> a -> c
                r2 = any(marks.directed(b, a) and marks.directed(a, c) for a in nb if marks.adjacent(a, c))
                if (r1 or r2) and _place(marks, b, c, blacklist, log, "meek1" if r1 else "meek2"):
                    changed = True
        # R3: a -- b, a -- c, a -- d, c -> b, d -> b, c and d non-adjacent => a -> b
        for a in nodes:
            for b in sorted(marks.adj[a]):
                if not marks.undirected(a, b):
                    continue
                mids = [c for c in sorted(marks.adj[a]) if c != b and marks.undirected(a, c) and marks.directed(c, b)]
                if any(not marks.adjacent(c, d) for c, d in itertools.combinations(mids, 2)):
                    if _place(marks, a, b, blacklist, log, "meek3"):
                        changed = True


def orient(skeleton: SkeletonState, data: Dataset, blacklist: Blacklist | None = None) -> MixedGraph:
    blacklist = blacklist or Blacklist()
    h = EntropyTable(data)
    n = h.n
    card = {v: data.schema[v].card for v in skeleton.variables}
    marks = _Marks(skeleton.edges)
    log = skeleton.log

    triples = []
    for z in sorted(marks.adj):
        for x, y in itertools.combinations(sorted(marks.adj[z]), 2):
            if marks.adjacent(x, y):
                continue
            u = [v for v in skeleton.contributors(x, y) if v != z]
            ii = h.interaction(x, y, z, u)
            penalty = (stratified_complexity(h.strata(u + [z]), card[x], card[y])
                       - stratified_complexity(h.strata(u), card[x], card[y])) / n
            score = ii + penalty
            log.append({"triple": [x, z, y], "interaction": ii, "penalty": penalty, "score": score,
                        "action": "collider" if score < 0 else "non_collider"})
            if score < 0:
                triples.append((score, x, z, y))
    for _, x, z, y in sorted(triples):
        _place(marks, x, z, blacklist, log, "collider")
        _place(marks, y, z, blacklist, log, "collider")

    # a pair forbidden in one direction only is oriented the other way
    for a, b in marks.edges:
        for t, hd in ((a, b), (b, a)):
            if blacklist.forbids(t, hd) and not blacklist.forbids(hd, t) and marks.undirected(a, b):
                _place(marks, hd, t, blacklist, log, "blacklist")

    _meek(marks, blacklist, log)

    edges = []
    for a, b in marks.edges:
        if marks.arrow_into(a, b) and marks.arrow_into(b, a):
            edges.append(Edge(a, b, BIDIRECTED))
        elif marks.arrow_into(a, b):
            edges.append(Edge(a, b, DIRECTED))
        elif marks.arrow_into(b, a):
            edges.append(Edge(b, a, DIRECTED))
        else:
            edges.append(Edge(a, b, UNDIRECTED))
    return MixedGraph(skeleton.variables, edges)


@dataclass
class DiscoveryResult:
    graph: MixedGraph
    skeleton: SkeletonState

    @property
    def log(self) -> list:
        return self.skeleton.log

    def log_lines(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.log)


def discover(data: Dataset, schema: VariableSchema | None = None, blacklist: Blacklist | None = None,
             max_contributors: int = 3, complexity_scale: float = 1.0) -> DiscoveryResult:
    """Skeleton pruning followed by orientation; see module docstring."""
    blacklist = blacklist or Blacklist()
    names = schema.names if schema is not None else data.columns
    blacklist.validate(names)
    skel = prune_skeleton(data, schema, blacklist, max_contributors, complexity_scale)
    return DiscoveryResult(orient(skel, data, blacklist), skel)


def skeleton_recall(found: MixedGraph, truth: Iterable[tuple[str, str]]) -> float:
    truth = {frozenset(p) for p in truth}
    if not truth:
        return 1.0
    got = {e.pair for e in found.edges}
    return len(truth & got) / len(truth)
