"""Edge totals, pairwise totals and first/second-order totals.

All three second-order routes compute the same matrix

    t_bar = sum_d w(d) r(d) s(d)^T

for additively decomposable r and s:

* :func:`second_total_hes` streams the pairwise totals (the Hessian of Z
  times w_ij w_kl) block by block, O(N^4 R' S').
* :func:`second_total_vjp` forms the Jacobian of r_bar with one
  hand-derived reverse-mode pass per coordinate of r, O(R N^3).
* :func:`second_total` uses the factored form
  f_bar + r_bar s_bar^T / Z - Z sum_{j'l'} r_hat[j'l'] s_hat[j'l']^T,
  O(N^3 (R' + S') + R S + N^2 R_bar S_bar).

Everything is derived from B = L^{-T} and the (at most two) Laplacian
cells that each edge weight touches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, NumericalError, SingularError
from .graph import EdgeFunction, LabeledWeightedGraph, WeightedGraph, edge_index, edge_table
from .laplacian import collapse_labels, gamma_arrays, laplacian_matrix
from .linalg import PIVOT_FLOOR, lu_factor, lu_solve

CLAMP_RTOL = 1e-9
DEFAULT_BLOCK = 256


@dataclass(frozen=True)
class EdgeTotals:
    z: float
    totals: np.ndarray  # (N+1, N+1)

    @property
    def marginals(self) -> np.ndarray:
        return self.totals / self.z


@dataclass(frozen=True)
class PairwiseTotals:
    z: float
    matrix: np.ndarray  # (E, E) in edge_index order

    @property
    def table(self) -> np.ndarray:
        """(N+1, N+1, N+1, N+1) table indexed [i, j, k, l]."""
        n = int(round(np.sqrt(len(self.matrix))))
        heads, mods = edge_index(n)
        out = np.zeros((n + 1,) * 4)
        out[heads[:, None], mods[:, None], heads[None, :], mods[None, :]] = self.matrix
        return out


@dataclass(frozen=True)
class SecondOrderResult:
    t_bar: np.ndarray  # (R, S)


class Factored:
    """Z, B and per-edge derivative data for one graph, computed once.

    ``d[e]`` is (dZ/dw_e) / Z, so the edge total is ``w[e] * z * d[e]``.
    """

    def __init__(self, g: WeightedGraph):
        self.g = g
        n = self.n = g.n
        f = lu_factor(laplacian_matrix(g.weights, g.root_constraint))
        with np.errstate(over="ignore", under="ignore"):
            z = float(f.sign * np.prod(f.pivots))
        if not z > 0 or np.any(np.abs(f.pivots) <= PIVOT_FLOOR):
            raise SingularError(f"partition function is {z!r}; no tree has positive weight")
        self.z = z
        self.b = lu_solve(f, np.eye(n)).T
        self.heads, self.mods = edge_index(n)
        self.rows, self.coefs, self.cols = gamma_arrays(n, g.root_constraint)
        self.w = g.weights[self.heads, self.mods]
        b = self.b
        self.d = (self.coefs[:, 0] * b[self.rows[:, 0], self.cols]
                  + self.coefs[:, 1] * b[self.rows[:, 1], self.cols])
        self.wbar = clamp_totals(self.w * z * self.d, z, "edge total")
        self._spread = None

    @property
    def grad_z(self) -> np.ndarray:
        """dZ/dw_e, exact also at zero-weight edges."""
        return self.z * self.d

    def spread(self) -> sp.csr_matrix:
        """(N*N, E) operator putting c * w_e at Laplacian cell (row, col)."""
        if self._spread is None:
            n, e = self.n, len(self.w)
            idx = np.arange(e)
            r = np.concatenate([self.rows[:, 0] * n + self.cols, self.rows[:, 1] * n + self.cols])
            v = np.concatenate([self.coefs[:, 0] * self.w, self.coefs[:, 1] * self.w])
            m = sp.csr_matrix((v, (r, np.concatenate([idx, idx]))), shape=(n * n, e))
            m.eliminate_zeros()
            self._spread = m
        return self._spread


def clamp_totals(values: np.ndarray, z: float, what: str = "total") -> np.ndarray:
    """Zero out round-off negatives; anything below -1e-9 Z is a real error."""
    values = np.array(values, dtype=float)
    floor = -CLAMP_RTOL * z
    if np.any(values < floor):
        raise NumericalError(f"{what} {values.min():.3e} is negative beyond round-off (Z = {z:.3e})")
    values[values < 0] = 0.0
    return values


def _factored(g: WeightedGraph | Factored) -> Factored:
    return g if isinstance(g, Factored) else Factored(g)


def _check(fac: Factored, *fns: EdgeFunction) -> None:
    for fn in fns:
        if fn.n != fac.n:
            raise DimensionError(f"edge function is for N={fn.n}, graph has N={fac.n}")


def edge_totals(g: WeightedGraph) -> EdgeTotals:
    """w_bar_ij = w_ij dZ/dw_ij, the total weight of trees containing i->j."""
    fac = _factored(g)
    return EdgeTotals(fac.z, edge_table(fac.n, fac.wbar))


def labeled_edge_marginals(g: LabeledWeightedGraph) -> np.ndarray:
    """p(i->j with label y), shape (N+1, N+1, Y); 0/0 is taken as 0."""
    collapsed = collapse_labels(g)
    p = edge_totals(collapsed).marginals
    w = collapsed.weights
    share = np.divide(g.labeled_weights, w[:, :, None],
                      out=np.zeros_like(g.labeled_weights), where=w[:, :, None] > 0)
    return share * p[:, :, None]


def _hessian_block(fac: Factored, lo: int, hi: int) -> np.ndarray:
    """Rows lo:hi of the pairwise-total matrix (before clamping)."""
    b, rows, coefs, cols = fac.b, fac.rows, fac.coefs, fac.cols
    ce, ae, be = coefs[lo:hi], rows[lo:hi], cols[lo:hi]
    # c_ep B[a_ep, b_f] and c_fq B[a_fq, b_e]; each term is one product of
    # the two, so swapping e and f gives bitwise-equal terms
    left = [ce[:, p][:, None] * b[ae[:, p][:, None], cols[None, :]] for p in (0, 1)]
    right = [coefs[None, :, q] * b[rows[None, :, q], be[:, None]] for q in (0, 1)]
    cross = left[0] * right[0] + (left[0] * right[1] + left[1] * right[0]) + left[1] * right[1]
    ww = (fac.w[lo:hi][:, None] * fac.w[None, :]) * fac.z
    return ww * (fac.d[lo:hi][:, None] * fac.d[None, :] - cross)


def iter_pairwise_blocks(g: WeightedGraph | Factored, block: int = DEFAULT_BLOCK
                         ) -> Iterator[tuple[int, int, np.ndarray]]:
    """Yield ``(lo, hi, rows lo:hi of the E x E pairwise-total matrix)``.

    Memory stays at O(block * E); the full table is never materialised.
    """
    fac = _factored(g)
    e = len(fac.w)
    for lo in range(0, e, block):
        hi = min(lo + block, e)
        h = _hessian_block(fac, lo, hi)
        h[np.arange(hi - lo), np.arange(lo, hi)] = 0.0  # an edge occurs at most once
        yield lo, hi, clamp_totals(h, fac.z, "pairwise total")


def pairwise_totals(g: WeightedGraph) -> PairwiseTotals:
    """w_bar_ij,kl for every pair of edges, materialised (O(N^4) memory)."""
    fac = _factored(g)
    e = len(fac.w)
    out = np.empty((e, e))
    for lo, hi, blk in iter_pairwise_blocks(fac):
        out[lo:hi] = blk
    return PairwiseTotals(fac.z, out)


def first_total(g: WeightedGraph, r: EdgeFunction) -> np.ndarray:
    """r_bar = sum_ij w_bar_ij r_ij."""
    fac = _factored(g)
    _check(fac, r)
    return np.asarray(r.matrix.T @ fac.wbar).ravel()


def second_total_hes(g: WeightedGraph, r: EdgeFunction, s: EdgeFunction,
                     block: int = DEFAULT_BLOCK) -> SecondOrderResult:
    """t_bar via the (streamed) pairwise totals."""
    fac = _factored(g)
    _check(fac, r, s)
    rm, sm = r.matrix, s.matrix
    t = np.asarray((rm.T @ sp.diags(fac.wbar) @ sm).todense())
    rt = rm.T.tocsr()
    for lo, hi, blk in iter_pairwise_blocks(fac, block):
        hs = sm.T @ blk.T  # (S, hi-lo) = (blk @ sm)^T
        t += np.asarray(rt[:, lo:hi] @ hs.T)
    return SecondOrderResult(t)


def first_total_jacobian(g: WeightedGraph | Factored, r: EdgeFunction) -> np.ndarray:
    """d r_bar_n / d w_e as an (E, R) array, for r independent of w.

    One reverse pass per coordinate n.  With M the Laplacian-shaped spread
    of w_e r_e,n, r_bar_n = Z <B, M>, and differentiating gives

        Z d_e <B, M> + Z r_e,n d_e - Z sum_p c_ep (B^T M B^T)[col_e, row_ep].
    """
    fac = _factored(g)
    _check(fac, r)
    n, b, z = fac.n, fac.b, fac.z
    spread = fac.spread()
    dense_r = r.matrix.tocsc()
    jac = np.empty((len(fac.w), r.dim))
    for k in range(r.dim):
        col = dense_r[:, k].toarray().ravel()
        m = np.asarray(spread @ col).reshape(n, n)
        g_mat = b.T @ m @ b.T
        inner = float(np.sum(b * m))
        back = (fac.coefs[:, 0] * g_mat[fac.cols, fac.rows[:, 0]]
                + fac.coefs[:, 1] * g_mat[fac.cols, fac.rows[:, 1]])
        jac[:, k] = z * (fac.d * inner + col * fac.d - back)
    return jac


def second_total_vjp(g: WeightedGraph, r: EdgeFunction, s: EdgeFunction) -> SecondOrderResult:
    """t_bar = sum_ij (d r_bar / d w_ij) w_ij s_ij^T."""
    fac = _factored(g)
    _check(fac, r, s)
    jac = first_total_jacobian(fac, r)
    t = (s.matrix.T @ (jac * fac.w[:, None])).T
    return SecondOrderResult(np.asarray(t))


def hat_tables(fac: Factored, r: EdgeFunction, s: EdgeFunction) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """r_hat and s_hat as sparse (N*N, R) / (N*N, S) matrices, row j'*N + l'.

        r_hat[j', l'] = sum_{kl} sum_{k'} B[k', j'] dL[k', l']/dw_kl w_kl r_kl
        s_hat[j', l'] = sum_{ij} sum_{i'} B[i', l'] dL[i', j']/dw_ij w_ij s_ij

    Each edge touches at most two cells, all in its own column, so scattering
    c * w * r into Laplacian cells is an (N*N, E) operator with <= 2E entries;
    contracting the free index against B is a Kronecker product with N^3
    entries.  Total work is O(N^3 (R' + S')).
    """
    n, b = fac.n, fac.b
    cell = fac.spread()  # row (row, col) -> row * n + col
    x_r = cell @ r.matrix
    # s needs the transposed cell grid: col * n + row
    e = len(fac.w)
    idx = np.arange(e)
    tr_rows = np.concatenate([fac.cols * n + fac.rows[:, 0], fac.cols * n + fac.rows[:, 1]])
    tr_vals = np.concatenate([fac.coefs[:, 0] * fac.w, fac.coefs[:, 1] * fac.w])
    cell_t = sp.csr_matrix((tr_vals, (tr_rows, np.concatenate([idx, idx]))), shape=(n * n, e))
    cell_t.eliminate_zeros()
    x_s = cell_t @ s.matrix
    bt = sp.csr_matrix(b.T)
    eye = sp.identity(n, format="csr")
    r_hat = sp.kron(bt, eye, format="csr") @ x_r
    s_hat = sp.kron(eye, bt, format="csr") @ x_s
    return r_hat.tocsr(), s_hat.tocsr()


def hat_tables_loop(fac: Factored, r: EdgeFunction, s: EdgeFunction) -> tuple[np.ndarray, np.ndarray]:
    """Literal triple-loop accumulation of r_hat / s_hat, dense (N, N, dim).

    Outer loop over edges, then over the edge's Laplacian cells, then over
    the free index.  Reference for small N only.
    """
    n, b = fac.n, fac.b
    rd, sd = r.matrix.toarray(), s.matrix.toarray()
    r_hat = np.zeros((n, n, r.dim))
    s_hat = np.zeros((n, n, s.dim))
    for e in range(len(fac.w)):
        col = fac.cols[e]
        for p in (0, 1):
            c = fac.coefs[e, p]
            if c == 0.0:
                continue
            row = fac.rows[e, p]
            for free in range(n):
                r_hat[free, col] += b[row, free] * c * fac.w[e] * rd[e]
                s_hat[col, free] += b[row, free] * c * fac.w[e] * sd[e]
    return r_hat, s_hat


@dataclass(frozen=True)
class SecondParts:
    """Pieces of the factored second-order total."""

    z: float
    f_bar: np.ndarray
    r_bar: np.ndarray
    s_bar: np.ndarray
    hat_sum: np.ndarray  # sum_{j'l'} r_hat s_hat^T

    @property
    def t_bar(self) -> np.ndarray:
        # divide before the outer product: r_bar s_bar^T alone can overflow
        return self.f_bar + np.outer(self.r_bar / self.z, self.s_bar) - self.z * self.hat_sum


def second_parts(g: WeightedGraph | Factored, r: EdgeFunction, s: EdgeFunction) -> SecondParts:
    fac = _factored(g)
    _check(fac, r, s)
    rm, sm = r.matrix, s.matrix
    r_bar = np.asarray(rm.T @ fac.wbar).ravel()
    s_bar = np.asarray(sm.T @ fac.wbar).ravel()
    f_bar = np.asarray((rm.T @ sp.diags(fac.wbar) @ sm).todense())
    r_hat, s_hat = hat_tables(fac, r, s)
    hat_sum = np.asarray((r_hat.T @ s_hat).todense())
    return SecondParts(fac.z, f_bar, r_bar, s_bar, hat_sum)


def second_total(g: WeightedGraph, r: EdgeFunction, s: EdgeFunction) -> SecondOrderResult:
    """t_bar by the factored O(N^3) route; the recommended algorithm."""
    return SecondOrderResult(second_parts(g, r, s).t_bar)
