"""Brute-force reference values by explicit tree enumeration, and central
finite differences.

Nothing here touches the Laplacian: every value is computed from the
enumerated trees and their weights, so it can serve as an independent check
of the matrix-based routes.  Only usable for N <= 8.
"""

from __future__ import annotations

import itertools

import numpy as np

from .graph import (
    EdgeFunction,
    LabeledWeightedGraph,
    Tree,
    WeightedGraph,
    edge_index,
    edge_position,
    enumerate_parent_arrays,
    enumerate_trees,
    legal_mask,
    tree_weights,
)


def tree_table(g: WeightedGraph) -> tuple[np.ndarray, np.ndarray]:
    """(parents (K, N), weights (K,)) for every tree."""
    parents = enumerate_trees(g)
    return parents, tree_weights(g.weights, parents)


def _edge_membership(parents: np.ndarray) -> np.ndarray:
    """(K, E) 0/1 matrix: does tree k contain edge e."""
    k, n = parents.shape
    member = np.zeros((k, n * n))
    for j in range(1, n + 1):
        for h in range(n + 1):
            if h != j:
                member[parents[:, j - 1] == h, edge_position(n, h, j)] = 1.0
    return member


def brute_partition(g: WeightedGraph) -> float:
    return float(tree_table(g)[1].sum())


def brute_edge_totals(g: WeightedGraph) -> np.ndarray:
    """(N+1, N+1) table of summed weights of trees containing each edge."""
    parents, w = tree_table(g)
    n = g.n
    out = np.zeros((n + 1, n + 1))
    for j in range(1, n + 1):
        np.add.at(out[:, j], parents[:, j - 1], w)
    return out


def brute_pairwise_totals(g: WeightedGraph) -> np.ndarray:
    """(E, E) matrix of summed weights of trees containing both edges."""
    parents, w = tree_table(g)
    member = _edge_membership(parents)
    out = member.T @ (member * w[:, None])
    np.fill_diagonal(out, 0.0)
    return out


def brute_first_total(g: WeightedGraph, r: EdgeFunction) -> np.ndarray:
    parents, w = tree_table(g)
    member = _edge_membership(parents)
    per_tree = member @ r.matrix.toarray()
    return w @ per_tree


def brute_second_total(g: WeightedGraph, r: EdgeFunction, s: EdgeFunction) -> np.ndarray:
    parents, w = tree_table(g)
    member = _edge_membership(parents)
    rd = member @ r.matrix.toarray()
    sd = member @ s.matrix.toarray()
    return (rd * w[:, None]).T @ sd


def tree_probabilities(g: WeightedGraph) -> tuple[np.ndarray, np.ndarray]:
    parents, w = tree_table(g)
    return parents, w / w.sum()


def brute_entropy(g: WeightedGraph) -> float:
    _, p = tree_probabilities(g)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def brute_cross_entropy(p_graph: WeightedGraph, q_graph: WeightedGraph) -> float:
    _, p = tree_probabilities(p_graph)
    _, q = tree_probabilities(q_graph)
    m = p > 0
    return float(-(p[m] * np.log(q[m])).sum())


def brute_kl(p_graph: WeightedGraph, q_graph: WeightedGraph) -> float:
    _, p = tree_probabilities(p_graph)
    _, q = tree_probabilities(q_graph)
    m = p > 0
    return float((p[m] * np.log(p[m] / q[m])).sum())


def brute_attachment(g: WeightedGraph, gold: Tree) -> float:
    parents, p = tree_probabilities(g)
    correct = (parents == np.asarray(gold.parent)[None, :]).mean(axis=1)
    return float(p @ correct)


def brute_expected_features(g: WeightedGraph, features: EdgeFunction) -> np.ndarray:
    parents, p = tree_probabilities(g)
    return p @ (_edge_membership(parents) @ features.matrix.toarray())


def brute_ge(g: WeightedGraph, features: EdgeFunction, target: np.ndarray) -> float:
    diff = brute_expected_features(g, features) - np.asarray(target)
    return 0.5 * float(diff @ diff)


def brute_renyi(g: WeightedGraph, alpha: float) -> float:
    _, p = tree_probabilities(g)
    p = p[p > 0]
    return float(np.log(np.sum(p**alpha)) / (1.0 - alpha))


def brute_lp_norm(g: WeightedGraph, k: float) -> float:
    _, p = tree_probabilities(g)
    return float(np.sum(p[p > 0] ** k) ** (1.0 / k))


def brute_labeled_partition(g: LabeledWeightedGraph) -> float:
    """Sum over trees and over every label assignment of its edges."""
    n, y = g.n, g.labels
    parents = enumerate_parent_arrays(n, g.root_constraint)
    lw = g.labeled_weights
    total = 0.0
    for row in parents:
        for labels in itertools.product(range(y), repeat=n):
            total += np.prod([lw[h, j, lab] for j, (h, lab) in enumerate(zip(row, labels), start=1)])
    return float(total)


def brute_labeled_marginals(g: LabeledWeightedGraph) -> np.ndarray:
    n, y = g.n, g.labels
    parents = enumerate_parent_arrays(n, g.root_constraint)
    lw = g.labeled_weights
    out = np.zeros(lw.shape)
    z = 0.0
    for row in parents:
        for labels in itertools.product(range(y), repeat=n):
            edges = [(h, j, lab) for j, (h, lab) in enumerate(zip(row, labels), start=1)]
            wt = np.prod([lw[e] for e in edges])
            z += wt
            for e in edges:
                out[e] += wt
    return out / z


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def finite_difference_gradient(fn, g: WeightedGraph, rel_step: float = 1e-6,
                               min_weight: float = 0.0) -> np.ndarray:
    """Central differences of ``fn(graph) -> float`` w.r.t. every legal edge
    with weight > min_weight, step h = rel_step * max(1, w_ij).

    Skipped edges get NaN.
    """
    n = g.n
    w = np.array(g.weights)
    out = np.full((n + 1, n + 1), np.nan)
    heads, mods = edge_index(n)
    for i, j in zip(heads, mods):
        if not w[i, j] > min_weight:
            continue
        h = rel_step * max(1.0, w[i, j])
        up, down = w.copy(), w.copy()
        up[i, j] += h
        down[i, j] -= h
        out[i, j] = (fn(g.with_weights(up)) - fn(g.with_weights(down))) / (2 * h)
    return out


def gradient_mismatches(analytic: np.ndarray, numeric: np.ndarray,
                        rtol: float = 1e-4, atol: float = 1e-8) -> list[tuple[int, int, float, float]]:
    """Edges where the gradients disagree.

    Where |analytic| >= atol the check is relative (rtol); below that an
    absolute tolerance of atol is used.  NaN entries of ``numeric`` are skipped.
    """
    bad = []
    mask = legal_mask(analytic.shape[0] - 1) > 0
    for i, j in zip(*np.nonzero(mask & ~np.isnan(numeric))):
        a, f = analytic[i, j], numeric[i, j]
        if abs(a) < atol:
            ok = abs(a - f) <= atol
        else:
            ok = abs(a - f) <= rtol * abs(a)
        if not ok:
            bad.append((int(i), int(j), float(a), float(f)))
    return bad
