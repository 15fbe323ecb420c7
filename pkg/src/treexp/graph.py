"""Graph and tree data model plus the brute-force enumeration oracle.

Node 0 is the root; non-root nodes are 1..N.  A weight table is always a
dense (N+1) x (N+1) array where ``weights[i, j]`` is the weight of the edge
``i -> j``.  Column 0 and the diagonal are structural zeros.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, SizeError, StructuralError

MAX_ENUMERATION_N = 8


class RootConstraint(str, enum.Enum):
    MULTI = "multi"
    SINGLE = "single"


def _as_constraint(value: RootConstraint | str) -> RootConstraint:
    try:
        return RootConstraint(value)
    except ValueError:
        raise StructuralError(f"unknown root constraint {value!r}") from None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)  # always copy
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class WeightedGraph:
    """Edge-weighted graph over a root plus ``n`` nodes.

    The weight table is copied and made read-only on construction, and the
    structural invariants are checked (see :func:`validate`).
    """

    weights: np.ndarray
    root_constraint: RootConstraint = RootConstraint.MULTI

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(self.weights))
        object.__setattr__(self, "root_constraint", _as_constraint(self.root_constraint))
        validate(self)

    @property
    def n(self) -> int:
        return self.weights.shape[0] - 1

    def with_weights(self, weights: np.ndarray) -> "WeightedGraph":
        return WeightedGraph(weights, self.root_constraint)

    def scaled(self, c: float) -> "WeightedGraph":
        return self.with_weights(self.weights * c)

    @classmethod
    def complete(cls, n: int, root_constraint=RootConstraint.MULTI, value: float = 1.0):
        """Complete graph with every legal edge set to ``value``."""
        return cls(value * legal_mask(n), root_constraint)


@dataclass(frozen=True)
class LabeledWeightedGraph:
    """Multi-graph with one weight per (head, modifier, label) triple."""

    labeled_weights: np.ndarray
    root_constraint: RootConstraint = RootConstraint.MULTI

    def __post_init__(self):
        w = _frozen(self.labeled_weights)
        if w.ndim != 3 or w.shape[0] != w.shape[1] or w.shape[0] < 2 or w.shape[2] < 1:
            raise DimensionError(f"labeled weights must have shape (N+1, N+1, Y), got {w.shape}")
        object.__setattr__(self, "labeled_weights", w)
        object.__setattr__(self, "root_constraint", _as_constraint(self.root_constraint))
        for y in range(w.shape[2]):
            _check_weights(w[:, :, y], what=f"label {y}")

    @property
    def n(self) -> int:
        return self.labeled_weights.shape[0] - 1

    @property
    def labels(self) -> int:
        return self.labeled_weights.shape[2]


def _check_weights(w: np.ndarray, what: str = "weights") -> None:
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionError(f"{what}: expected a square table, got shape {w.shape}")
    if w.shape[0] < 2:
        raise DimensionError(f"{what}: need at least one non-root node")
    if not np.all(np.isfinite(w)):
        raise StructuralError(f"{what}: non-finite weight")
    if np.any(w < 0):
        i, j = map(int, np.argwhere(w < 0)[0])
        raise StructuralError(f"{what}: negative weight on edge {i}->{j}")
    if np.any(w[:, 0] != 0):
        i = int(np.flatnonzero(w[:, 0])[0])
        raise StructuralError(f"{what}: root column must be zero (edge {i}->0 into the root)")
    if np.any(np.diag(w) != 0):
        i = int(np.flatnonzero(np.diag(w))[0])
        raise StructuralError(f"{what}: self-loop on node {i}")


def validate(g: WeightedGraph | np.ndarray) -> None:
    """Raise :class:`StructuralError` unless the weight table is legal.

    Checks non-negativity, the zero root column (no edge enters the root)
    and the zero diagonal (no self-loops).
    """
    w = g.weights if isinstance(g, WeightedGraph) else np.asarray(g, dtype=float)
    _check_weights(w)


def legal_mask(n: int) -> np.ndarray:
    """1.0 on every legal edge ``i -> j`` (j != 0, i != j), 0.0 elsewhere."""
    m = np.ones((n + 1, n + 1))
    m[:, 0] = 0.0
    np.fill_diagonal(m, 0.0)
    return m


@lru_cache(maxsize=64)
def _edge_arrays(n: int):
    heads, mods = np.nonzero(legal_mask(n))
    lookup = np.full((n + 1, n + 1), -1, dtype=np.int64)
    lookup[heads, mods] = np.arange(len(heads))
    for a in (heads, mods, lookup):
        a.setflags(write=False)
    return heads, mods, lookup


def edge_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Heads and modifiers of the N^2 legal edges in row-major order."""
    heads, mods, _ = _edge_arrays(n)
    return heads, mods


def edge_position(n: int, i: int, j: int) -> int:
    """Position of edge ``i -> j`` in :func:`edge_index` order."""
    if not (0 <= i <= n and 1 <= j <= n) or i == j:
        raise StructuralError(f"{i}->{j} is not a legal edge for N={n}")
    return int(_edge_arrays(n)[2][i, j])


def edge_table(n: int, values: np.ndarray) -> np.ndarray:
    """Scatter per-edge values (edge_index order) into an (N+1)x(N+1) table."""
    heads, mods = edge_index(n)
    out = np.zeros((n + 1, n + 1) + np.shape(values)[1:])
    out[heads, mods] = values
    return out


@dataclass(frozen=True)
class Tree:
    """One arborescence, stored as ``parent[j-1]`` = head of node j."""

    parent: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "parent", tuple(int(p) for p in self.parent))

    @property
    def n(self) -> int:
        return len(self.parent)

    def edges(self) -> list[tuple[int, int]]:
        return [(h, j) for j, h in enumerate(self.parent, start=1)]

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[tuple[int, int]]) -> "Tree":
        parent = [-1] * n
        for i, j in edges:
            if not 1 <= j <= n or parent[j - 1] != -1:
                raise StructuralError(f"edge {i}->{j} does not give node {j} a unique head")
            parent[j - 1] = i
        if -1 in parent:
            raise StructuralError("every non-root node needs exactly one head")
        return cls(tuple(parent))


def validate_tree(tree: Tree, n: int, root_constraint=RootConstraint.MULTI) -> None:
    """Raise :class:`StructuralError` unless ``tree`` is an arborescence of the
    complete graph on n nodes obeying the root constraint."""
    constraint = _as_constraint(root_constraint)
    parent = tree.parent
    if len(parent) != n:
        raise StructuralError(f"tree has {len(parent)} heads, expected {n}")
    for j, h in enumerate(parent, start=1):
        if not 0 <= h <= n or h == j:
            raise StructuralError(f"illegal head {h} for node {j}")
    for j in range(1, n + 1):
        seen, node = set(), j
        while node != 0:
            if node in seen:
                raise StructuralError(f"cycle through node {node}")
            seen.add(node)
            node = parent[node - 1]
    if constraint is RootConstraint.SINGLE and sum(h == 0 for h in parent) != 1:
        raise StructuralError("single-root tree must have exactly one root edge")


class EdgeFunction:
    """Sparse per-edge vectors r_ij in R^dim.

    Stored as a CSR matrix with one row per legal edge (edge_index order),
    so absent edges carry the zero vector.
    """

    def __init__(self, n: int, matrix: sp.spmatrix | np.ndarray):
        m = sp.csr_matrix(matrix, dtype=float)
        if m.shape[0] != n * n:
            raise DimensionError(f"expected {n * n} edge rows, got {m.shape[0]}")
        m.sum_duplicates()
        m.eliminate_zeros()
        self.n = n
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def max_density(self) -> int:
        return int(np.diff(self.matrix.indptr).max(initial=0))

    def row(self, i: int, j: int) -> dict[int, float]:
        r = self.matrix.getrow(edge_position(self.n, i, j))
        return dict(zip(r.indices.tolist(), r.data.tolist()))

    def dense(self) -> np.ndarray:
        """(N+1, N+1, dim) table."""
        return edge_table(self.n, self.matrix.toarray())

    def __repr__(self):
        return f"EdgeFunction(n={self.n}, dim={self.dim}, max_density={self.max_density})"

    @classmethod
    def from_rows(cls, n: int, dim: int, rows: Mapping[tuple[int, int], Mapping[int, float] | Sequence[float]]):
        triplets = []
        for (i, j), vec in rows.items():
            items = vec.items() if isinstance(vec, Mapping) else enumerate(vec)
            triplets.extend((i, j, c, v) for c, v in items)
        return cls.from_triplets(n, dim, triplets)

    @classmethod
    def from_triplets(cls, n: int, dim: int, triplets):
        """Build from ``(i, j, coord, value)`` entries; duplicates are summed."""
        rows, cols, vals = [], [], []
        for i, j, c, v in triplets:
            c = int(c)
            if not 0 <= c < dim:
                raise DimensionError(f"coordinate {c} out of range for dim {dim}")
            rows.append(edge_position(n, int(i), int(j)))
            cols.append(c)
            vals.append(float(v))
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n * n, dim))
        return cls(n, m)

    @classmethod
    def from_dense(cls, table: np.ndarray):
        """From an (N+1, N+1) scalar table or an (N+1, N+1, dim) table."""
        t = np.asarray(table, dtype=float)
        if t.ndim == 2:
            t = t[:, :, None]
        if t.ndim != 3 or t.shape[0] != t.shape[1]:
            raise DimensionError(f"bad edge table shape {np.shape(table)}")
        n = t.shape[0] - 1
        illegal = legal_mask(n) == 0
        if np.any(t[illegal] != 0):
            raise StructuralError("edge function has values on illegal edges")
        heads, mods = edge_index(n)
        return cls(n, t[heads, mods])

    @classmethod
    def constant(cls, n: int, value: float = 1.0):
        return cls(n, np.full((n * n, 1), value))

    @classmethod
    def one_hot_over_weight(cls, g: WeightedGraph):
        """s_ij = e_ij / w_ij with S = N^2; rows of zero-weight edges are zero."""
        heads, mods = edge_index(g.n)
        w = g.weights[heads, mods]
        vals = np.divide(1.0, w, out=np.zeros_like(w), where=w > 0)
        e = np.arange(len(w))
        return cls(g.n, sp.csr_matrix((vals, (e, e)), shape=(len(w), len(w))))


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------


def _check_size(n: int) -> None:
    if n > MAX_ENUMERATION_N:
        raise SizeError(f"enumeration is limited to N <= {MAX_ENUMERATION_N}, got N={n}")


def enumerate_parent_arrays(n: int, root_constraint=RootConstraint.MULTI) -> np.ndarray:
    """All arborescences of the complete graph, as a (K, N) array of heads.

    Walks every one of the N^N head assignments and keeps the acyclic ones:
    an assignment is a tree iff following heads N times from every node
    reaches the root.
    """
    _check_size(n)
    constraint = _as_constraint(root_constraint)
    choices = [[h for h in range(n + 1) if h != j] for j in range(1, n + 1)]
    kept = []
    # chunk on node 1's head to bound memory at N = 8
    for first in choices[0]:
        combos = list(itertools.product(*choices[1:]))
        rest = np.array(combos, dtype=np.int8).reshape(len(combos), n - 1)
        parents = np.concatenate([np.full((len(rest), 1), first, dtype=np.int8), rest], axis=1)
        padded = np.concatenate([np.zeros((len(parents), 1), dtype=np.int8), parents], axis=1)
        node = np.tile(np.arange(n + 1, dtype=np.int8), (len(parents), 1))
        for _ in range(n):
            node = np.take_along_axis(padded, node.astype(np.intp), axis=1)
        ok = np.all(node == 0, axis=1)
        if constraint is RootConstraint.SINGLE:
            ok &= np.sum(parents == 0, axis=1) == 1
        kept.append(parents[ok])
    return np.concatenate(kept).astype(np.int64)


def enumerate_trees(g: WeightedGraph) -> np.ndarray:
    """Every tree of ``g`` (D, or D^(1) under SingleRoot) as a (K, N) array.

    Zero-weight edges are structurally present, so the result depends only
    on N and the root constraint.  Row k holds the heads of nodes 1..N.
    """
    return enumerate_parent_arrays(g.n, g.root_constraint)


def iter_trees(g: WeightedGraph) -> Iterator[Tree]:
    for row in enumerate_trees(g):
        yield Tree(tuple(row))


def tree_weight(g: WeightedGraph, d: Tree) -> float:
    """Product of the N edge weights of ``d``."""
    w = g.weights
    return float(np.prod([w[h, j] for h, j in d.edges()]))


def tree_weights(weights: np.ndarray, parents: np.ndarray) -> np.ndarray:
    """Vectorised :func:`tree_weight` over a (K, N) array of trees."""
    n = parents.shape[1]
    return np.prod(weights[parents, np.arange(1, n + 1)], axis=1)


def brute_total(g: WeightedGraph, f: Callable[[Tree], float | np.ndarray] | None = None):
    """Sum of w(d) * f(d) over all trees; ``f=None`` means f = 1, i.e. Z."""
    parents = enumerate_trees(g)
    weights = tree_weights(g.weights, parents)
    if f is None:
        return float(weights.sum())
    total = 0.0
    for wd, row in zip(weights, parents):
        total = total + wd * np.asarray(f(Tree(tuple(row))), dtype=float)
    return total


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------


def random_graph(rng: np.random.Generator, n: int, root_constraint=RootConstraint.MULTI,
                 low: float = 0.1, high: float = 1.0) -> WeightedGraph:
    """Complete graph with weights uniform on [low, high) over legal edges."""
    w = rng.uniform(low, high, size=(n + 1, n + 1)) * legal_mask(n)
    return WeightedGraph(w, root_constraint)


def random_tree(rng: np.random.Generator, n: int, root_constraint=RootConstraint.MULTI) -> Tree:
    """A random arborescence: nodes are attached in random order to an
    already-attached node (or the root)."""
    constraint = _as_constraint(root_constraint)
    order = rng.permutation(np.arange(1, n + 1))
    parent = [0] * n
    attached: list[int] = []
    for k, j in enumerate(order):
        if k == 0:
            head = 0
        elif constraint is RootConstraint.SINGLE:
            head = attached[rng.integers(len(attached))]
        else:
            head = ([0] + attached)[rng.integers(len(attached) + 1)]
        parent[j - 1] = int(head)
        attached.append(int(j))
    return Tree(tuple(parent))
