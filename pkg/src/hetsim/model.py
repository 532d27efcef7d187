"""Typed network data model, stochastic normalization and convergence checks.

A heterogeneous network is a set of entity types plus named directed
relations between type pairs.  Entities carry arbitrary string ids
externally and dense 0-based indices internally; the bijection is explicit
so that files and solver output stay aligned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

# Column sums of a normalized operator must hit 1 within this tolerance
# (or be exactly zero for isolated columns).
STOCHASTIC_TOL = 1e-12


class NetworkError(ValueError):
    """Malformed network definition (duplicate names, unknown ids, ...)."""


@dataclass(frozen=True)
class EntityType:
    """A named class of entities with an id <-> dense-index bijection."""

    name: str
    ids: tuple[str, ...]
    index: dict[str, int] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if not self.ids:
            raise NetworkError(f"type {self.name!r} has no entities")
        idx = {eid: i for i, eid in enumerate(self.ids)}
        if len(idx) != len(self.ids):
            raise NetworkError(f"type {self.name!r} has duplicate entity ids")
        object.__setattr__(self, "index", idx)

    @property
    def size(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class Relation:
    """A named 0/1 relation between two entity types, stored as index pairs."""

    name: str
    src: EntityType
    dst: EntityType
    src_idx: np.ndarray = field(repr=False)
    dst_idx: np.ndarray = field(repr=False)

    def __post_init__(self):
        si = np.asarray(self.src_idx, dtype=np.int64)
        di = np.asarray(self.dst_idx, dtype=np.int64)
        if si.shape != di.shape or si.ndim != 1:
            raise NetworkError(f"relation {self.name!r}: malformed edge arrays")
        if si.size:
            if si.min() < 0 or si.max() >= self.src.size:
                raise NetworkError(f"relation {self.name!r}: src index out of range")
            if di.min() < 0 or di.max() >= self.dst.size:
                raise NetworkError(f"relation {self.name!r}: dst index out of range")
            keys = si * self.dst.size + di
            if np.unique(keys).size != keys.size:
                raise NetworkError(f"relation {self.name!r}: duplicate edges")
        object.__setattr__(self, "src_idx", si)
        object.__setattr__(self, "dst_idx", di)

    @property
    def n_edges(self) -> int:
        return int(self.src_idx.size)

    def edge_ids(self) -> list[tuple[str, str]]:
        return [
            (self.src.ids[i], self.dst.ids[j])
            for i, j in zip(self.src_idx, self.dst_idx)
        ]

    def adjacency(self) -> sp.csr_matrix:
        """0/1 adjacency, rows = src entities, columns = dst entities."""
        data = np.ones(self.n_edges)
        return sp.csr_matrix(
            (data, (self.src_idx, self.dst_idx)),
            shape=(self.src.size, self.dst.size),
        )


@dataclass(frozen=True)
class HeteroNetwork:
    """Validated collection of entity types and relations."""

    types: tuple[EntityType, ...]
    relations: tuple[Relation, ...]

    def __post_init__(self):
        names = [t.name for t in self.types]
        if len(set(names)) != len(names):
            raise NetworkError("duplicate type names")
        rnames = [r.name for r in self.relations]
        if len(set(rnames)) != len(rnames):
            raise NetworkError("duplicate relation names")
        registered = set(names)
        for r in self.relations:
            if r.src.name not in registered or r.dst.name not in registered:
                raise NetworkError(f"relation {r.name!r} references unknown type")

    def type(self, name: str) -> EntityType:
        for t in self.types:
            if t.name == name:
                return t
        raise NetworkError(f"unknown type {name!r}")

    def relation(self, name: str) -> Relation:
        for r in self.relations:
            if r.name == name:
                return r
        raise NetworkError(f"unknown relation {name!r}")

    def incident(self, type_name: str) -> list[Relation]:
        """Relations touching a type in either role (self-relations once)."""
        return [
            r for r in self.relations
            if r.src.name == type_name or r.dst.name == type_name
        ]

    @property
    def n_entities(self) -> int:
        return sum(t.size for t in self.types)


def build_network(
    type_specs: Sequence[tuple[str, Sequence[str]]],
    relation_specs: Sequence[tuple[str, str, str, Iterable[tuple[str, str]]]],
) -> HeteroNetwork:
    """Construct a validated network from entity-id and edge-id listings.

    ``type_specs``: (name, entity ids); ``relation_specs``:
    (name, src type, dst type, [(src id, dst id), ...]).  Index order
    follows listing order.
    """
    types = tuple(EntityType(name, tuple(ids)) for name, ids in type_specs)
    by_name = {t.name: t for t in types}
    if len(by_name) != len(types):
        raise NetworkError("duplicate type names")
    relations = []
    for name, src_name, dst_name, edges in relation_specs:
        if src_name not in by_name:
            raise NetworkError(f"relation {name!r}: unknown src type {src_name!r}")
        if dst_name not in by_name:
            raise NetworkError(f"relation {name!r}: unknown dst type {dst_name!r}")
        src, dst = by_name[src_name], by_name[dst_name]
        si, di = [], []
        for a, b in edges:
            if a not in src.index:
                raise NetworkError(f"relation {name!r}: unknown entity id {a!r}")
            if b not in dst.index:
                raise NetworkError(f"relation {name!r}: unknown entity id {b!r}")
            si.append(src.index[a])
            di.append(dst.index[b])
        relations.append(
            Relation(name, src, dst, np.asarray(si, np.int64), np.asarray(di, np.int64))
        )
    return HeteroNetwork(types, tuple(relations))


@dataclass(frozen=True)
class StochasticOperator:
    """Column-stochastic (or column-substochastic) normalized relation.

    ``forward`` aggregates dst -> src (shape |src| x |dst|); ``reverse`` the
    opposite.  Columns with no edges stay all-zero (isolated entities).
    """

    relation: Relation
    direction: str  # "forward" | "reverse"
    values: sp.csc_matrix = field(repr=False)


def column_stochastic(relation: Relation, direction: str) -> StochasticOperator:
    """Normalize a relation so that every nonempty column sums to 1.

    Each column with k >= 1 incident edges gets entries 1/k; the sparsity
    pattern equals the relation's edge pattern.
    """
    if direction == "forward":
        rows, cols = relation.src_idx, relation.dst_idx
        shape = (relation.src.size, relation.dst.size)
    elif direction == "reverse":
        rows, cols = relation.dst_idx, relation.src_idx
        shape = (relation.dst.size, relation.src.size)
    else:
        raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    counts = np.bincount(cols, minlength=shape[1])
    data = np.zeros(rows.size)
    if rows.size:
        data = 1.0 / counts[cols]
    values = sp.csc_matrix((data, (rows, cols)), shape=shape)
    return StochasticOperator(relation, direction, values)


@dataclass(frozen=True)
class WeightMatrix:
    """Per-type relation weights: (type name, relation name) -> weight.

    The weight of relation r in type t's update may differ from its weight
    in the partner's update; both sides are stored explicitly.
    """

    entries: dict[tuple[str, str], float]

    def __post_init__(self):
        for (t, r), w in self.entries.items():
            if w < 0:
                raise NetworkError(f"negative weight for ({t!r}, {r!r})")

    def weight(self, type_name: str, relation_name: str) -> float:
        return self.entries.get((type_name, relation_name), 0.0)

    def type_sum(self, network: HeteroNetwork, type_name: str) -> float:
        return sum(self.weight(type_name, r.name) for r in network.incident(type_name))


def default_weights(network: HeteroNetwork) -> WeightMatrix:
    """Uniform weights: each relation incident to t gets 1 / (#incident to t).

    Parallel relations between the same type pair count separately; isolated
    types get no entries.
    """
    entries: dict[tuple[str, str], float] = {}
    for t in network.types:
        incident = network.incident(t.name)
        if not incident:
            continue
        w = 1.0 / len(incident)
        for r in incident:
            entries[(t.name, r.name)] = w
    return WeightMatrix(entries)


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of the sufficient-condition checks; failing is a value, not an error."""

    nonstochastic: tuple[tuple[str, str, int], ...]  # (relation, direction, column)
    overweight: tuple[str, ...]  # types whose incident weights sum above 1
    weight_sums: dict[str, float]
    lyapunov_bounds: dict[str, float]  # sum_r w_r * ||W_r||_1^2 per type

    @property
    def ok(self) -> bool:
        return not self.nonstochastic and not self.overweight


def operator_one_norm(op: StochasticOperator) -> float:
    """Max column sum; <= 1 for (sub)stochastic operators."""
    m = op.values
    if m.nnz == 0:
        return 0.0
    return float(np.abs(m).sum(axis=0).max())


def coupling_operators(
    network: HeteroNetwork,
) -> dict[str, tuple[sp.csr_matrix, sp.csr_matrix]]:
    """Per relation: (forward, reverse) normalized operators as CSR."""
    out = {}
    for r in network.relations:
        fwd = column_stochastic(r, "forward").values.tocsr()
        rev = column_stochastic(r, "reverse").values.tocsr()
        out[r.name] = (fwd, rev)
    return out


def check_convergence_conditions(
    network: HeteroNetwork, weights: WeightMatrix
) -> ConditionReport:
    """Check the sufficient conditions for fixed-point convergence.

    Flags (a) normalized columns that are neither stochastic nor isolated,
    (b) types whose incident weight sum exceeds 1, and reports the damped
    contraction bound sum_r w_r * ||W_r||_1^2 per type.
    """
    bad: list[tuple[str, str, int]] = []
    ops: dict[tuple[str, str], StochasticOperator] = {}
    for r in network.relations:
        for direction in ("forward", "reverse"):
            op = column_stochastic(r, direction)
            ops[(r.name, direction)] = op
            sums = np.asarray(op.values.sum(axis=0)).ravel()
            off = (np.abs(sums - 1.0) > STOCHASTIC_TOL) & (sums != 0.0)
            for col in np.nonzero(off)[0]:
                bad.append((r.name, direction, int(col)))

    sums: dict[str, float] = {}
    over: list[str] = []
    bounds: dict[str, float] = {}
    for t in network.types:
        s = weights.type_sum(network, t.name)
        sums[t.name] = s
        if s > 1.0 + STOCHASTIC_TOL:
            over.append(t.name)
        bound = 0.0
        for r in network.incident(t.name):
            # The operator acting on t's side is forward when t is the
            # source, reverse when it is the destination.
            direction = "forward" if r.src.name == t.name else "reverse"
            norm1 = operator_one_norm(ops[(r.name, direction)])
            bound += weights.weight(t.name, r.name) * norm1**2
        bounds[t.name] = bound

    return ConditionReport(tuple(bad), tuple(over), sums, bounds)
