"""Categorical datasets bound to a variable schema.

Cells are stored as integer state indices; labels live in the schema, and
state order always follows the schema declaration, never the data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from cbnkit.errors import (
    CardinalityError,
    DataError,
    EmptyDatasetError,
    EmptyFileError,
    MissingColumnError,
    MissingWeightsError,
    NonMonotonicEdgesError,
    SchemaMismatchError,
    UnmappedStateError,
)

if TYPE_CHECKING:
    from cbnkit.bayesnet import DiscreteBayesNet

DEFAULT_WEIGHT_COLUMN = "tsWghtP_n"
DROP = None  # recode target meaning "remove the row"


@dataclass(frozen=True)
class Variable:
    name: str
    states: tuple[str, ...]
    symbol: str = ""
    label: str = ""
    band_edges: tuple[float, ...] | None = None
    marginals: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        if not self.states:
            raise SchemaMismatchError(f"variable {self.name} has no states")
        if len(set(self.states)) != len(self.states):
            raise SchemaMismatchError(f"variable {self.name} has duplicate state labels")
        if not self.symbol:
            object.__setattr__(self, "symbol", self.name)
        if self.marginals is not None and len(self.marginals) != len(self.states):
            raise SchemaMismatchError(f"variable {self.name}: marginals do not match states")

    @property
    def card(self) -> int:
        return len(self.states)

    def index(self, label) -> int:
        try:
            return self.states.index(str(label))
        except ValueError:
            raise SchemaMismatchError(f"{self.name}: unknown state {label!r}") from None

    def to_dict(self) -> dict:
        out = {"name": self.name, "states": list(self.states)}
        if self.symbol != self.name:
            out["symbol"] = self.symbol
        if self.label:
            out["label"] = self.label
        if self.band_edges is not None:
            out["band_edges"] = list(self.band_edges)
        if self.marginals is not None:
            out["marginals"] = list(self.marginals)
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "Variable":
        return cls(
            name=d["name"],
            states=tuple(d["states"]),
            symbol=d.get("symbol", ""),
            label=d.get("label", ""),
            band_edges=tuple(d["band_edges"]) if d.get("band_edges") is not None else None,
            marginals=tuple(d["marginals"]) if d.get("marginals") is not None else None,
        )


class VariableSchema:
    """Ordered collection of variables with unique names and symbols."""

    def __init__(self, variables: Iterable[Variable]):
        self._vars = {}
        symbols = set()
        for v in variables:
            if v.name in self._vars or v.symbol in symbols:
                raise SchemaMismatchError(f"duplicate variable {v.name}")
            self._vars[v.name] = v
            symbols.add(v.symbol)

    def __getitem__(self, name: str) -> Variable:
        try:
            return self._vars[name]
        except KeyError:
            raise MissingColumnError(f"variable {name!r} not in schema") from None

    def __contains__(self, name) -> bool:
        return name in self._vars

    def __iter__(self):
        return iter(self._vars.values())

    def __len__(self):
        return len(self._vars)

    def __eq__(self, other):
        return isinstance(other, VariableSchema) and list(self) == list(other)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._vars)

    def cards(self, names: Sequence[str] | None = None) -> tuple[int, ...]:
        return tuple(self[n].card for n in (names if names is not None else self.names))

    def with_variable(self, var: Variable) -> "VariableSchema":
        out = dict(self._vars)
        out[var.name] = var
        return VariableSchema(out.values())

    def subset(self, names: Iterable[str]) -> "VariableSchema":
        keep = set(names)
        return VariableSchema(v for v in self if v.name in keep)

    def to_dict(self) -> dict:
        return {"variables": [v.to_dict() for v in self]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "VariableSchema":
        return cls(Variable.from_dict(v) for v in d["variables"])


class Dataset:
    """Immutable table of state indices with optional sampling weights."""

    def __init__(self, schema: VariableSchema, columns: Mapping[str, Sequence[int]], weights=None):
        self.schema = schema
        cols = {}
        n = None
        for name, values in columns.items():
            arr = np.array(values, dtype=np.int64).reshape(-1)
            card = schema[name].card
            if arr.size and (arr.min() < 0 or arr.max() >= card):
                raise SchemaMismatchError(f"column {name}: state index out of range 0..{card - 1}")
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise DataError(f"column {name} has {arr.size} rows, expected {n}")
            arr.setflags(write=False)
            cols[name] = arr
        self._cols = cols
        self._n = n or 0
        if weights is not None:
            w = np.array(weights, dtype=float).reshape(-1)
            if w.size != self._n:
                raise DataError("weight column length does not match data")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise DataError("weights must be finite and non-negative")
            if self._n and w.sum() <= 0:
                raise DataError("weights must have a positive sum")
            w.setflags(write=False)
        self.weights = None if weights is None else w

    @classmethod
    def from_labels(cls, schema: VariableSchema, rows: Mapping[str, Sequence], weights=None) -> "Dataset":
        cols = {name: [schema[name].index(v) for v in values] for name, values in rows.items()}
        return cls(schema, cols, weights)

    @property
    def n_rows(self) -> int:
        return self._n

    def __len__(self):
        return self._n

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(self._cols)

    def __contains__(self, name) -> bool:
        return name in self._cols

    def column(self, name: str) -> np.ndarray:
        try:
            return self._cols[name]
        except KeyError:
            raise MissingColumnError(f"dataset has no column {name!r}") from None

    def labels(self, name: str) -> list[str]:
        states = self.schema[name].states
        return [states[i] for i in self.column(name)]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        w = None if self.weights is None else self.weights[rows]
        return Dataset(self.schema, {k: v[rows] for k, v in self._cols.items()}, w)

    def with_column(self, name: str, values, variable: Variable | None = None) -> "Dataset":
        schema = self.schema.with_variable(variable) if variable is not None else self.schema
        cols = dict(self._cols)
        cols[name] = values
        return Dataset(schema, cols, self.weights)

    def select(self, names: Iterable[str]) -> "Dataset":
        names = list(names)
        return Dataset(self.schema, {n: self.column(n) for n in names}, self.weights)

    def drop(self, names: Iterable[str]) -> "Dataset":
        names = set(names)
        return Dataset(self.schema, {k: v for k, v in self._cols.items() if k not in names}, self.weights)

    def unweighted(self) -> "Dataset":
        return Dataset(self.schema, self._cols)

    def equals(self, other: "Dataset") -> bool:
        if self.columns != other.columns or self.n_rows != other.n_rows:
            return False
        if any(not np.array_equal(self._cols[c], other._cols[c]) for c in self.columns):
            return False
        if (self.weights is None) != (other.weights is None):
            return False
        return self.weights is None or np.array_equal(self.weights, other.weights)

    def __repr__(self):
        return f"Dataset({self._n} rows, columns={list(self._cols)})"


# --- CSV ---------------------------------------------------------------------


def load_csv(path, schema: VariableSchema, weight_column: str | None = DEFAULT_WEIGHT_COLUMN,
             strict: bool = True) -> Dataset:
    """Read a CSV whose header names schema variables.

    With ``strict`` every schema variable must have a column; otherwise
    only the variables present are loaded. Columns outside the schema
    (other than the weight column) are ignored.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    if not lines or not lines[0].strip():
        raise EmptyFileError(f"{path}: no header row")
    reader = csv.reader(lines)
    header = next(reader)
    present = [n for n in schema.names if n in header]
    missing = [n for n in schema.names if n not in header]
    if strict and missing:
        raise SchemaMismatchError(f"{path}: columns missing from header: {missing}")
    if not present:
        raise SchemaMismatchError(f"{path}: header shares no columns with the schema")
    pos = {n: header.index(n) for n in present}
    wpos = header.index(weight_column) if weight_column and weight_column in header else None
    cols = {n: [] for n in present}
    weights = [] if wpos is not None else None
    lookup = {n: {s: i for i, s in enumerate(schema[n].states)} for n in present}
    for rowno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise SchemaMismatchError(f"{path}:{rowno}: expected {len(header)} fields, got {len(row)}")
        for n in present:
            cell = row[pos[n]]
            try:
                cols[n].append(lookup[n][cell])
            except KeyError:
                raise SchemaMismatchError(f"{path}:{rowno}: column {n!r}: unknown state {cell!r}") from None
        if weights is not None:
            try:
                weights.append(float(row[wpos]))
            except ValueError:
                raise SchemaMismatchError(f"{path}:{rowno}: bad weight {row[wpos]!r}") from None
    return Dataset(schema, cols, weights)


def write_csv(data: Dataset, path, weight_column: str = DEFAULT_WEIGHT_COLUMN, header_comment: str = "") -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        header = list(data.columns) + ([weight_column] if data.weights is not None else [])
        w.writerow(header)
        labels = [data.schema[c].states for c in data.columns]
        cols = [data.column(c) for c in data.columns]
        for i in range(data.n_rows):
            row = [lab[col[i]] for lab, col in zip(labels, cols)]
            if data.weights is not None:
                row.append(repr(float(data.weights[i])))
            w.writerow(row)


# --- recoding ------------------------------------------------------------------


@dataclass(frozen=True)
class RecodeMap:
    """Maps every source state of ``variable`` to a target state or DROP."""

    variable: str
    mapping: Mapping[str, str | None]
    target_states: tuple[str, ...] | None = None
    target_name: str | None = None

    def targets(self) -> tuple[str, ...]:
        if self.target_states is not None:
            return tuple(self.target_states)
        out = []
        for v in self.mapping.values():
            if v is not DROP and v not in out:
                out.append(v)
        return tuple(out)


def recode(data: Dataset, rmap: RecodeMap) -> Dataset:
    src = data.schema[rmap.variable]
    unmapped = [s for s in src.states if s not in rmap.mapping]
    if unmapped:
        raise UnmappedStateError(f"recode of {src.name}: no rule for states {unmapped}")
    targets = rmap.targets()
    bad = [v for v in rmap.mapping.values() if v is not DROP and v not in targets]
    if bad:
        raise UnmappedStateError(f"recode of {src.name}: targets {bad} not among {list(targets)}")
    table = np.array([-1 if rmap.mapping[s] is DROP else targets.index(rmap.mapping[s]) for s in src.states])
    new_values = table[data.column(src.name)]
    keep = np.flatnonzero(new_values >= 0)
    name = rmap.target_name or src.name
    var = replace(src, name=name, symbol=name if rmap.target_name else src.symbol, states=targets,
                  marginals=None, band_edges=None)
    schema = data.schema.with_variable(var)
    if name != src.name:
        schema = VariableSchema(v for v in schema if v.name != src.name)
    cols = {}
    for c in data.columns:
        if c == src.name:
            cols[name] = new_values[keep]
        else:
            cols[c] = data.column(c)[keep]
    w = None if data.weights is None else data.weights[keep]
    return Dataset(schema, cols, w)


# --- resampling and banding -------------------------------------------------------


def weighted_resample(data: Dataset, n_out: int | None = None, seed=0) -> Dataset:
    """Draw rows with replacement, proportionally to their weights.

    ``n_out`` defaults to the source size. The output has unit weights.
    """
    if data.weights is None:
        raise MissingWeightsError("weighted resampling needs a weight column")
    if data.n_rows == 0:
        raise EmptyDatasetError("cannot resample an empty dataset")
    n_out = data.n_rows if n_out is None else int(n_out)
    rng = np.random.default_rng(seed)
    p = data.weights / data.weights.sum()
    rows = rng.choice(data.n_rows, size=n_out, replace=True, p=p)
    return data.take(rows).unweighted()


def discretize_density(values, band_edges: Sequence[float]) -> np.ndarray:
    """Band real values using interior cut points.

    Bands are lower-inclusive and upper-exclusive: with cuts (20, 40) the
    bands are (-inf, 20), [20, 40) and [40, inf).
    """
    edges = np.asarray(band_edges, dtype=float)
    if edges.ndim != 1 or edges.size == 0 or np.any(np.diff(edges) <= 0):
        raise NonMonotonicEdgesError(f"band edges must be strictly increasing: {list(band_edges)}")
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DataError("density values must be finite")
    return np.searchsorted(edges, v, side="right").astype(np.int64)


def income_partition(schema: VariableSchema, variable: str = "V1", low_bands: int = 6) -> dict[str, tuple[int, ...]]:
    """Low/high split of the eight income bands (1-6 low, 7-8 high)."""
    card = schema[variable].card
    if card != 8:
        raise CardinalityError(f"{variable} has {card} states; the income split needs 8")
    return {"low": tuple(range(low_bands)), "high": tuple(range(low_bands, card))}


# --- synthetic data ----------------------------------------------------------


def forward_sample(bn: "DiscreteBayesNet", n: int, seed=0, hide: Iterable[str] = ()) -> Dataset:
    """Ancestral sampling in topological order; ``hide`` columns are dropped."""
    rng = np.random.default_rng(seed)
    cols: dict[str, np.ndarray] = {}
    for node in bn.dag.topological_order:
        cpt = bn.cpts[node]
        if cpt.parents:
            idx = np.ravel_multi_index(tuple(cols[p] for p in cpt.parents), cpt.table.shape[:-1])
        else:
            idx = np.zeros(n, dtype=np.int64)
        cum = np.cumsum(cpt.table.reshape(-1, cpt.table.shape[-1]), axis=1)
        cum[:, -1] = 1.0
        u = rng.random(n)
        rows = cum[idx]
        cols[node] = (u[:, None] >= rows).sum(axis=1)
    hide = set(hide)
    schema = bn.schema()
    order = [v for v in schema.names if v not in hide]
    return Dataset(schema.subset(order), {k: cols[k] for k in order})


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def empirical_marginal(data: Dataset, name: str) -> np.ndarray:
    counts = np.bincount(data.column(name), minlength=data.schema[name].card).astype(float)
    if counts.sum() == 0:
        raise EmptyDatasetError("empty dataset")
    return counts / counts.sum()
