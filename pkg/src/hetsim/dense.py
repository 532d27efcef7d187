"""Dense reference solvers for the coupled similarity fixed point.

One Jacobi sweep recomputes every per-type block from the previous iterate:

    S_t  <-  sum_r  w_tr * W S_p W^T                 (coupling)
    S_t  <-  S_t - diag(S_t) + I                     (unit diagonal)

where, for each relation between t and a partner p, W is the |t| x |p|
column-stochastic operator oriented toward t (the forward normalization
when t is the relation's source, the reverse one when it is the
destination).  Column-stochastic W and per-type weights summing to 1 make
the coupling nonexpansive, which is what drives convergence.  The damped
variant replaces the diagonal reset with uniform (1 - c) I regularization.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import (
    HeteroNetwork,
    Relation,
    WeightMatrix,
    check_convergence_conditions,
    column_stochastic,
    coupling_operators,
)


class DivergenceError(RuntimeError):
    """Non-finite values during iteration, or a violated contraction bound."""


class ConditionError(ValueError):
    """Convergence preconditions failed and were not overridden."""


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule (summed Frobenius residual) and damping for the Lyapunov map."""

    tol: float = 1e-9
    max_iter: int = 100
    damping: float = 0.8

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must lie in (0, 1)")


@dataclass
class SolveTrace:
    """Per-iteration residuals and wall times."""

    residuals: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    per_type: list[dict[str, float]] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.residuals)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "residual", "seconds"])
            for i, (r, s) in enumerate(zip(self.residuals, self.seconds), start=1):
                w.writerow([i, "%.17g" % r, "%.17g" % s])


class SimilaritySet:
    """One dense symmetric per-type similarity block, keyed by type name."""

    def __init__(self, blocks: dict[str, np.ndarray]):
        self.blocks = blocks

    @classmethod
    def identity(cls, network: HeteroNetwork) -> "SimilaritySet":
        return cls({t.name: np.eye(t.size) for t in network.types})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.blocks[name]

    def copy(self) -> "SimilaritySet":
        return SimilaritySet({k: v.copy() for k, v in self.blocks.items()})

    def allfinite(self) -> bool:
        return all(np.isfinite(b).all() for b in self.blocks.values())


def residual(prev: SimilaritySet, new: SimilaritySet) -> float:
    """Sum over types of the Frobenius norm of the block difference."""
    if prev.blocks.keys() != new.blocks.keys():
        raise ValueError("similarity sets cover different types")
    total = 0.0
    for name, b in prev.blocks.items():
        other = new.blocks[name]
        if other.shape != b.shape:
            raise ValueError(f"shape mismatch on type {name!r}")
        total += float(np.linalg.norm(other - b))
    return total


def residual_by_type(prev: SimilaritySet, new: SimilaritySet) -> dict[str, float]:
    return {
        name: float(np.linalg.norm(new.blocks[name] - b))
        for name, b in prev.blocks.items()
    }


def _sandwich(w: sp.csr_matrix, s: np.ndarray) -> np.ndarray:
    """W S W^T with sparse W and dense S, keeping the products sparse-dense."""
    ws = w @ s
    return (w @ ws.T).T


def _coupling(
    network: HeteroNetwork,
    weights: WeightMatrix,
    state: SimilaritySet,
    ops: dict[str, tuple[sp.csr_matrix, sp.csr_matrix]],
) -> dict[str, np.ndarray]:
    """Weighted coupling terms, before any diagonal handling.

    Each relation contributes W S_p W^T to both endpoints, with W the
    operator oriented toward the updated type; the result is symmetric
    whenever the state is.
    """
    acc = {t.name: np.zeros((t.size, t.size)) for t in network.types}
    for r in network.relations:
        fwd, rev = ops[r.name]
        w_src = weights.weight(r.src.name, r.name)
        if w_src:
            acc[r.src.name] += w_src * _sandwich(fwd, state[r.dst.name])
        if r.src.name != r.dst.name:
            w_dst = weights.weight(r.dst.name, r.name)
            if w_dst:
                acc[r.dst.name] += w_dst * _sandwich(rev, state[r.src.name])
    return acc


def sweep(
    network: HeteroNetwork,
    weights: WeightMatrix,
    state: SimilaritySet,
    ops: dict | None = None,
) -> SimilaritySet:
    """One Jacobi sweep: every block recomputed from the previous iterate only."""
    for t in network.types:
        if state[t.name].shape != (t.size, t.size):
            raise ValueError(f"state shape mismatch on type {t.name!r}")
    if ops is None:
        ops = coupling_operators(network)
    acc = _coupling(network, weights, state, ops)
    out = {}
    for name, m in acc.items():
        np.fill_diagonal(m, 1.0)
        out[name] = m
    return SimilaritySet(out)


def _require_conditions(network, weights, check):
    if not check:
        return
    report = check_convergence_conditions(network, weights)
    if not report.ok:
        raise ConditionError(
            "convergence conditions failed: "
            f"{len(report.nonstochastic)} non-stochastic columns, "
            f"overweight types {list(report.overweight)}"
        )


def solve_dense(
    network: HeteroNetwork,
    weights: WeightMatrix,
    config: SolverConfig | None = None,
    check: bool = True,
) -> tuple[SimilaritySet, SolveTrace]:
    """Iterate sweeps from S = I until the summed residual drops below tol."""
    config = config or SolverConfig()
    _require_conditions(network, weights, check)
    ops = coupling_operators(network)
    state = SimilaritySet.identity(network)
    trace = SolveTrace()
    for _ in range(config.max_iter):
        t0 = time.perf_counter()
        new = sweep(network, weights, state, ops)
        res = residual(state, new)
        trace.seconds.append(time.perf_counter() - t0)
        trace.residuals.append(res)
        trace.per_type.append(residual_by_type(state, new))
        state = new
        if not state.allfinite():
            raise DivergenceError("non-finite similarity values encountered")
        if res <= config.tol:
            trace.converged = True
            break
    return state, trace


def solve_lyapunov(
    network: HeteroNetwork,
    weights: WeightMatrix,
    config: SolverConfig | None = None,
    check: bool = True,
) -> tuple[SimilaritySet, SolveTrace]:
    """Damped variant S = c * coupling(S) + (1 - c) I, no diagonal reset.

    The diagonal is (1 - c)-regularized and generally differs from 1;
    inspect ``diag`` of the returned blocks separately if needed.
    """
    config = config or SolverConfig()
    c = config.damping
    if check:
        report = check_convergence_conditions(network, weights)
        for name, bound in report.lyapunov_bounds.items():
            if c * bound > 1.0 + 1e-12:
                raise ConditionError(
                    f"contraction bound violated for type {name!r}: "
                    f"c * sum w ||W||_1^2 = {c * bound:.6g} > 1"
                )
    ops = coupling_operators(network)
    state = SimilaritySet.identity(network)
    trace = SolveTrace()
    for _ in range(config.max_iter):
        t0 = time.perf_counter()
        acc = _coupling(network, weights, state, ops)
        out = {}
        for t in network.types:
            m = c * acc[t.name]
            m[np.diag_indices_from(m)] += 1.0 - c
            out[t.name] = m
        new = SimilaritySet(out)
        res = residual(state, new)
        trace.seconds.append(time.perf_counter() - t0)
        trace.residuals.append(res)
        trace.per_type.append(residual_by_type(state, new))
        state = new
        if not state.allfinite():
            raise DivergenceError("non-finite similarity values encountered")
        if res <= config.tol:
            trace.converged = True
            break
    return state, trace


def classical_simrank(relation: Relation, decay: float, iters: int) -> np.ndarray:
    """SimRank on a homogeneous graph: two nodes are similar when the nodes
    pointing at them are pairwise similar.

    Iterates S <- decay * P^T S P, then resets the diagonal to 1, where P is
    the column-stochastic in-neighbor operator of the (single-type) relation.
    """
    if relation.src.name != relation.dst.name:
        raise ValueError("classical SimRank needs a relation on a single type")
    if not 0.0 < decay < 1.0:
        raise ValueError("decay must lie in (0, 1)")
    n = relation.src.size
    p = column_stochastic(relation, "forward").values.tocsr()
    s = np.eye(n)
    for _ in range(iters):
        s = decay * (p.T @ (p.T @ s).T).T  # decay * P^T S P
        np.fill_diagonal(s, 1.0)
    return s
