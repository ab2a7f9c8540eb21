"""Discrete Bayesian networks: CPTs, Laplace-smoothed MLE, variable elimination."""

from __future__ import annotations

import itertools
import json
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from cbnkit.data import Dataset, Variable, VariableSchema
from cbnkit.errors import (
    GraphError,
    IncompleteAssignmentError,
    InvalidQueryError,
    LatentWithoutDataError,
    MissingColumnError,
    NegativeAlphaError,
    NumericalError,
    SchemaMismatchError,
    UnknownNodeError,
    ZeroEvidenceProbabilityError,
    ZeroFrequencyError,
)
from cbnkit.graph import CausalDag

DEFAULT_ALPHA = 1e-5
ROW_TOL = 1e-9
FORMAT_TAG = "cbnkit.bayesnet/1"


@dataclass(frozen=True)
class VariableCard:
    node: str
    states: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        if len(set(self.states)) != len(self.states):
            raise SchemaMismatchError(f"{self.node}: duplicate state labels")
        if not self.states:
            raise SchemaMismatchError(f"{self.node}: no states")

    @property
    def card(self) -> int:
        return len(self.states)


class Factor:
    """Dense non-negative table over an ordered scope."""

    __slots__ = ("scope", "values")

    def __init__(self, scope: Sequence[str], values):
        self.scope = tuple(scope)
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != len(self.scope):
            raise NumericalError(f"factor over {self.scope} has {self.values.ndim} axes")

    @property
    def cards(self) -> tuple[int, ...]:
        return self.values.shape

    def transpose(self, scope: Sequence[str]) -> "Factor":
        scope = tuple(scope)
        if scope == self.scope:
            return self
        return Factor(scope, np.transpose(self.values, [self.scope.index(v) for v in scope]))

    def reduce(self, evidence: Mapping[str, int]) -> "Factor":
        keep, index = [], []
        for v in self.scope:
            if v in evidence:
                index.append(evidence[v])
            else:
                index.append(slice(None))
                keep.append(v)
        if len(keep) == len(self.scope):
            return self
        return Factor(keep, self.values[tuple(index)])

    def marginalize(self, variables: Iterable[str]) -> "Factor":
        drop = set(variables)
        axes = tuple(i for i, v in enumerate(self.scope) if v in drop)
        return Factor([v for v in self.scope if v not in drop], self.values.sum(axis=axes))

    def normalize(self) -> "Factor":
        total = self.values.sum()
        if not total > 0:
            raise ZeroEvidenceProbabilityError(f"factor over {self.scope} has zero mass")
        return Factor(self.scope, self.values / total)

    def __mul__(self, other: "Factor") -> "Factor":
        return product([self, other])

    def __repr__(self):
        return f"Factor({self.scope}, shape={self.values.shape})"


def product(factors: Sequence[Factor], sum_out: Iterable[str] = ()) -> Factor:
    """Multiply factors and sum out ``sum_out`` in one einsum call."""
    if not factors:
        return Factor((), np.array(1.0))
    letters = {}
    for f in factors:
        for v in f.scope:
            if v not in letters:
                letters[v] = string.ascii_letters[len(letters)]
    drop = set(sum_out)
    out = [v for v in letters if v not in drop]
    operands = []
    for f in factors:
        operands += [f.values, [letters[v] for v in f.scope]]
    spec = ",".join("".join(ops) for ops in operands[1::2]) + "->" + "".join(letters[v] for v in out)
    return Factor(out, np.einsum(spec, *operands[0::2]))


class Cpt:
    """P(child | parents) stored as an array of shape (*parent_cards, child_card)."""

    __slots__ = ("child", "parents", "table")

    def __init__(self, child: str, parents: Sequence[str], table):
        self.child = child
        self.parents = tuple(parents)
        t = np.array(table, dtype=float)
        if t.ndim != len(self.parents) + 1:
            raise NumericalError(f"CPT of {child}: table has {t.ndim} axes for {len(self.parents)} parents")
        if np.any(t < 0) or np.any(t > 1) or not np.all(np.isfinite(t)):
            raise NumericalError(f"CPT of {child}: entries must lie in [0, 1]")
        sums = t.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > ROW_TOL):
            raise NumericalError(f"CPT of {child}: rows must sum to 1")
        t.setflags(write=False)
        self.table = t

    @property
    def n_rows(self) -> int:
        return int(np.prod(self.table.shape[:-1], dtype=np.int64))

    def row(self, config: Sequence[int]) -> np.ndarray:
        return self.table[tuple(config)]

    def factor(self) -> Factor:
        return Factor(self.parents + (self.child,), self.table)

    def __eq__(self, other):
        if not isinstance(other, Cpt):
            return NotImplemented
        return (self.child, self.parents) == (other.child, other.parents) and np.array_equal(self.table, other.table)

    def __repr__(self):
        return f"Cpt({self.child} | {', '.join(self.parents)})"


class DiscreteBayesNet:
    """A DAG plus one CPT per node, latent nodes included."""

    def __init__(self, dag: CausalDag, cards: Mapping[str, Sequence[str]] | Iterable[VariableCard],
                 cpts: Mapping[str, Cpt] | Iterable[Cpt]):
        self.dag = dag
        if isinstance(cards, Mapping):
            cards = [VariableCard(k, tuple(v)) for k, v in cards.items()]
        self.cards = {c.node: c for c in cards}
        if isinstance(cpts, Mapping):
            cpts = cpts.values()
        self.cpts = {c.child: c for c in cpts}
        for n in dag.nodes:
            if n not in self.cards:
                raise SchemaMismatchError(f"no state list for node {n}")
            if n not in self.cpts:
                raise SchemaMismatchError(f"no CPT for node {n}")
            cpt = self.cpts[n]
            if set(cpt.parents) != set(dag.parents(n)) or len(cpt.parents) != len(dag.parents(n)):
                raise GraphError(f"CPT parents of {n} {cpt.parents} differ from DAG parents {sorted(dag.parents(n))}")
            want = tuple(self.cards[p].card for p in cpt.parents) + (self.cards[n].card,)
            if cpt.table.shape != want:
                raise SchemaMismatchError(f"CPT of {n} has shape {cpt.table.shape}, expected {want}")
        extra = set(self.cpts) - set(dag.nodes)
        if extra:
            raise UnknownNodeError(f"CPTs for nodes outside the DAG: {sorted(extra)}")

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.dag.nodes

    def states(self, node: str) -> tuple[str, ...]:
        return self._card(node).states

    def card(self, node: str) -> int:
        return self._card(node).card

    def _card(self, node):
        try:
            return self.cards[node]
        except KeyError:
            raise UnknownNodeError(f"unknown node {node!r}") from None

    def index(self, node: str, value) -> int:
        """State index for a label, or the value itself when it is an int."""
        states = self.states(node)
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            if not 0 <= value < len(states):
                raise SchemaMismatchError(f"{node}: state index {value} out of range")
            return int(value)
        try:
            return states.index(str(value))
        except ValueError:
            raise SchemaMismatchError(f"{node}: unknown state {value!r}") from None

    def schema(self) -> VariableSchema:
        return VariableSchema(Variable(n, self.cards[n].states) for n in self.dag.nodes)

    def with_cpt(self, cpt: Cpt) -> "DiscreteBayesNet":
        cpts = dict(self.cpts)
        cpts[cpt.child] = cpt
        return DiscreteBayesNet(self.dag, self.cards.values(), cpts)

    # --- serialization
    def to_dict(self) -> dict:
        variables = [
            {"name": n, "states": list(self.cards[n].states), "latent": n in self.dag.latent}
            for n in self.dag.topological_order
        ]
        cpts = []
        for n in self.dag.topological_order:
            cpt = self.cpts[n]
            rows = []
            parent_states = [self.cards[p].states for p in cpt.parents]
            for config in itertools.product(*[range(len(s)) for s in parent_states]):
                rows.append({
                    "given": [parent_states[i][j] for i, j in enumerate(config)],
                    "p": [float(x) for x in cpt.table[config]],
                })
            cpts.append({"child": n, "parents": list(cpt.parents), "rows": rows})
        return {
            "format": FORMAT_TAG,
            "variables": variables,
            "edges": sorted([a, b] for a, b in self.dag.arcs),
            "cpts": cpts,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DiscreteBayesNet":
        if d.get("format") != FORMAT_TAG:
            raise SchemaMismatchError(f"not a serialized network (format={d.get('format')!r})")
        cards = {v["name"]: tuple(v["states"]) for v in d["variables"]}
        latent = [v["name"] for v in d["variables"] if v.get("latent")]
        dag = CausalDag(cards, [tuple(e) for e in d["edges"]], latent)
        cpts = []
        for c in d["cpts"]:
            parents = tuple(c["parents"])
            shape = tuple(len(cards[p]) for p in parents) + (len(cards[c["child"]]),)
            table = np.empty(shape)
            for row in c["rows"]:
                config = tuple(cards[p].index(s) for p, s in zip(parents, row["given"]))
                table[config] = row["p"]
            if len(c["rows"]) != int(np.prod(shape[:-1], dtype=np.int64)):
                raise SchemaMismatchError(f"CPT of {c['child']}: wrong number of rows")
            cpts.append(Cpt(c["child"], parents, table))
        return cls(dag, cards, cpts)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path) -> "DiscreteBayesNet":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __repr__(self):
        return f"DiscreteBayesNet({self.dag!r})"


# --- estimation -----------------------------------------------------------


def fit_mle(dag: CausalDag, data: Dataset, alpha: float = DEFAULT_ALPHA) -> DiscreteBayesNet:
    """Laplace-smoothed frequency estimates for every CPT row.

    Each row is (count + alpha) / sum over child states of (count + alpha).
    Rows count data rows; sampling weights are not applied.
    """
    if alpha < 0:
        raise NegativeAlphaError(f"smoothing alpha must be non-negative, got {alpha}")
    for n in dag.nodes:
        if n not in data:
            if n in dag.latent:
                raise LatentWithoutDataError(f"latent node {n} has no data column; fit its observed projection")
            raise MissingColumnError(f"no data column for node {n}")
    cards = {n: data.schema[n].states for n in dag.nodes}
    cpts = [fit_cpt(data, n, sorted(dag.parents(n)), alpha) for n in dag.nodes]
    return DiscreteBayesNet(dag, cards, cpts)


def fit_cpt(data: Dataset, child: str, parents: Sequence[str], alpha: float = DEFAULT_ALPHA) -> Cpt:
    family = list(parents) + [child]
    shape = data.schema.cards(family)
    if data.n_rows:
        flat = np.ravel_multi_index(tuple(data.column(v) for v in family), shape)
        counts = np.bincount(flat, minlength=int(np.prod(shape, dtype=np.int64))).reshape(shape)
    else:
        counts = np.zeros(shape)
    smoothed = counts + alpha
    totals = smoothed.sum(axis=-1, keepdims=True)
    if np.any(totals == 0):
        bad = np.argwhere(totals[..., 0] == 0)[0]
        config = {p: data.schema[p].states[i] for p, i in zip(parents, bad)}
        raise ZeroFrequencyError(f"CPT of {child}: parent configuration {config} never observed and alpha=0")
    return Cpt(child, parents, smoothed / totals)


# --- inference --------------------------------------------------------------


def joint_probability(bn: DiscreteBayesNet, assignment: Mapping[str, object]) -> float:
    """Product of the matching CPT entries for a full assignment."""
    missing = [n for n in bn.nodes if n not in assignment]
    if missing:
        raise IncompleteAssignmentError(f"assignment misses nodes {missing}")
    idx = {n: bn.index(n, assignment[n]) for n in bn.nodes}
    p = 1.0
    for n, cpt in bn.cpts.items():
        p *= float(cpt.table[tuple(idx[v] for v in cpt.parents) + (idx[n],)])
    return p


def _min_fill_order(scopes: list[set], variables: set) -> list[str]:
    adj: dict[str, set] = {v: set() for s in scopes for v in s}
    for s in scopes:
        for v in s:
            adj[v] |= s - {v}
    order = []
    remaining = set(variables)
    while remaining:
        def cost(v):
            nbrs = sorted(adj[v])
            fill = sum(1 for a, b in itertools.combinations(nbrs, 2) if b not in adj[a])
            return fill, len(nbrs), v
        v = min(remaining, key=cost)
        nbrs = adj.pop(v)
        for a in nbrs:
            adj[a] |= nbrs - {a}
            adj[a].discard(v)
        remaining.discard(v)
        order.append(v)
    return order


def _check_names(bn: DiscreteBayesNet, names: Iterable[str]) -> None:
    for n in names:
        if n not in bn.cpts:
            raise UnknownNodeError(f"unknown node {n!r}")


def joint_factor(bn: DiscreteBayesNet, query: Sequence[str], evidence: Mapping[str, object] | None = None,
                 order: Sequence[str] | None = None) -> Factor:
    """Unnormalized P(query, evidence) over ``query`` by variable elimination."""
    query = tuple(query)
    evidence = dict(evidence or {})
    _check_names(bn, query)
    _check_names(bn, evidence)
    if len(set(query)) != len(query):
        raise InvalidQueryError(f"repeated query variables: {query}")
    if set(query) & set(evidence):
        raise InvalidQueryError("query and evidence overlap")
    ev = {n: bn.index(n, v) for n, v in evidence.items()}
    relevant = bn.dag.ancestors(set(query) | set(ev))  # barren nodes sum to one
    factors = [bn.cpts[n].factor().reduce(ev) for n in sorted(relevant)]
    hidden = relevant - set(query) - set(ev)
    if order is None:
        order = _min_fill_order([set(f.scope) for f in factors], hidden)
    else:
        order = [v for v in order if v in hidden]
        if set(order) != hidden:
            raise InvalidQueryError(f"elimination order misses {sorted(hidden - set(order))}")
    for v in order:
        touching = [f for f in factors if v in f.scope]
        factors = [f for f in factors if v not in f.scope]
        factors.append(product(touching, sum_out=[v]))
    return product(factors).transpose(query)


def eliminate(bn: DiscreteBayesNet, query: Sequence[str], evidence: Mapping[str, object] | None = None,
              order: Sequence[str] | None = None) -> Factor:
    """Exact P(query | evidence), normalized.

    ``query`` may be a single name or a sequence; sets are sorted. A fixed
    ``order`` (over the non-query, non-evidence nodes) overrides min-fill.
    """
    if isinstance(query, str):
        query = (query,)
    elif isinstance(query, (set, frozenset)):
        query = tuple(sorted(query))
    f = joint_factor(bn, query, evidence, order)
    if not f.values.sum() > 0:
        raise ZeroEvidenceProbabilityError(f"evidence {dict(evidence or {})} has probability zero")
    return f.normalize()


def marginal(bn: DiscreteBayesNet, node: str) -> Factor:
    return eliminate(bn, (node,))
