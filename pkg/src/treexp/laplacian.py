"""Laplacian construction, the partition function Z, and the sparsity
structure of dL/dw that every derivative of Z is built from.

Laplacian rows and columns are indexed by non-root nodes.  Public results
use node numbering (1..N); the array helpers use 0-based matrix indices
(node - 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import SingularError, StructuralError
from .graph import (
    LabeledWeightedGraph,
    RootConstraint,
    WeightedGraph,
    _as_constraint,
    edge_index,
)
from .linalg import determinant, inverse, sign_log_determinant

# Row of the root-weighted Laplacian that holds the root edges (node number).
REPLACED_ROW = 1


@dataclass(frozen=True)
class Laplacian:
    matrix: np.ndarray
    constraint: RootConstraint
    replaced_row: int | None = None


def laplacian_matrix(weights: np.ndarray, root_constraint=RootConstraint.MULTI) -> np.ndarray:
    """Laplacian of an arbitrary real weight table (no validation).

    Multi-root: L[j, j] = sum_i w_ij over all heads including the root,
    L[i, j] = -w_ij.  Single-root: the diagonal excludes the root and row 1
    is overwritten with the root weights w_0j.
    """
    w = np.asarray(weights, dtype=float)
    constraint = _as_constraint(root_constraint)
    lap = -w[1:, 1:].copy()
    np.fill_diagonal(lap, 0.0)
    if constraint is RootConstraint.MULTI:
        np.fill_diagonal(lap, w[:, 1:].sum(axis=0) - np.diag(w)[1:])
    else:
        inner = w[1:, 1:]
        np.fill_diagonal(lap, inner.sum(axis=0) - np.diag(inner))
        lap[REPLACED_ROW - 1, :] = w[0, 1:]
    return lap


def build_laplacian(g: WeightedGraph) -> Laplacian:
    replaced = REPLACED_ROW if g.root_constraint is RootConstraint.SINGLE else None
    return Laplacian(laplacian_matrix(g.weights, g.root_constraint), g.root_constraint, replaced)


def partition_function(g: WeightedGraph) -> float:
    """Z = det(L).  Zero is a legal answer (no tree has positive weight)."""
    return determinant(laplacian_matrix(g.weights, g.root_constraint))


def log_partition_function(g: WeightedGraph) -> float:
    """log Z via the signed log-determinant; -inf when Z = 0."""
    sign, logmag = sign_log_determinant(laplacian_matrix(g.weights, g.root_constraint))
    if sign <= 0:
        return -np.inf
    return logmag


def collapse_labels(g: LabeledWeightedGraph) -> WeightedGraph:
    """Unlabeled graph with w_ij = sum_y w_ijy; it has the same Z."""
    return WeightedGraph(g.labeled_weights.sum(axis=2), g.root_constraint)


@lru_cache(maxsize=64)
def gamma_arrays(n: int, root_constraint: RootConstraint):
    """Vectorised dL/dw sparsity for every legal edge (edge_index order).

    Returns ``(rows, coefs, cols)``: edge e touches Laplacian cells
    ``(rows[e, p], cols[e])`` with coefficient ``coefs[e, p]`` for p = 0, 1.
    Absent slots have coefficient 0 (and a harmless row index).  All cells
    of an edge i->j sit in column j.
    """
    constraint = _as_constraint(root_constraint)
    heads, mods = edge_index(n)
    cols = mods - 1
    rows = np.stack([mods - 1, np.maximum(heads - 1, 0)], axis=1)
    coefs = np.zeros((len(heads), 2))
    if constraint is RootConstraint.MULTI:
        coefs[:, 0] = 1.0
        coefs[:, 1] = np.where(heads > 0, -1.0, 0.0)
    else:
        root = heads == 0
        rows[root, 0] = REPLACED_ROW - 1
        coefs[root, 0] = 1.0
        inner = ~root
        # cells on the replaced row no longer depend on non-root edges
        coefs[inner, 0] = np.where(mods[inner] != REPLACED_ROW, 1.0, 0.0)
        coefs[inner, 1] = np.where(heads[inner] != REPLACED_ROW, -1.0, 0.0)
    for a in (rows, coefs, cols):
        a.setflags(write=False)
    return rows, coefs, cols


def gamma(g: WeightedGraph, edge: tuple[int, int]) -> list[tuple[tuple[int, int], int]]:
    """Laplacian cells (node numbering) that depend on w_ij, with dL/dw_ij."""
    i, j = edge
    if not (0 <= i <= g.n and 1 <= j <= g.n) or i == j:
        raise StructuralError(f"{i}->{j} is not a legal edge")
    out = []
    if g.root_constraint is RootConstraint.SINGLE:
        if i == 0:
            return [((REPLACED_ROW, j), 1)]
        if j != REPLACED_ROW:
            out.append(((j, j), 1))
        if i != REPLACED_ROW:
            out.append(((i, j), -1))
        return out
    out.append(((j, j), 1))
    if i != 0:
        out.append(((i, j), -1))
    return out


def b_matrix(g: WeightedGraph) -> np.ndarray:
    """B = L^{-T}, indexed by matrix position (node - 1)."""
    try:
        return inverse(laplacian_matrix(g.weights, g.root_constraint)).T
    except SingularError as exc:
        raise SingularError(f"Z = 0, Laplacian is not invertible ({exc})") from None
