"""The finite transportation problem between two discrete measures.

``solve_exact`` runs a transportation network simplex and certifies its
answer with a dual solution; ``solve_entropic`` runs log-domain Sinkhorn
and rounds to an exactly feasible plan.  ``brute_force_solve`` enumerates
basic solutions and exists as a test oracle.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .partitions import DiscreteMeasure
from .spaces import MASS_TOL

__all__ = [
    "HPlan",
    "DualCertificate",
    "SolverError",
    "NotConverged",
    "solve_exact",
    "solve_entropic",
    "solve_transport",
    "northwest_corner",
    "certify",
    "plan_cost",
    "brute_force_solve",
]

PERTURBATION = 1e-13
FLOW_TOL = 1e-14
FEAS_TOL = 1e-10


class SolverError(RuntimeError):
    """Raised for infeasible or ill-posed transportation instances."""


class NotConverged(SolverError):
    """Raised when an iterative solver runs out of iterations."""


@dataclass(frozen=True)
class DualCertificate:
    """Dual potentials with ``u_i + v_j <= c_ij`` and the resulting duality gap."""

    u: np.ndarray
    v: np.ndarray
    gap: float

    def objective(self, a, b) -> float:
        return float(np.dot(self.u, a) + np.dot(self.v, b))

    def to_dict(self) -> dict:
        return {"u": self.u.tolist(), "v": self.v.tolist(), "gap": self.gap}


@dataclass(frozen=True, eq=False)
class HPlan:
    """Sparse coupling ``pi_ij`` between two discrete measures.

    Only strictly positive entries are stored.  ``gap`` is the certified
    distance to the optimal cost (``inf`` when nothing was certified).
    """

    source: DiscreteMeasure
    target: DiscreteMeasure
    rows: np.ndarray
    cols: np.ndarray
    masses: np.ndarray
    gap: float = math.inf

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=int)
        cols = np.asarray(self.cols, dtype=int)
        masses = np.asarray(self.masses, dtype=float)
        if not (rows.shape == cols.shape == masses.shape):
            raise ValueError("rows, cols and masses must align")
        if np.any(masses <= 0):
            raise ValueError("stored plan entries must be strictly positive")
        order = np.lexsort((cols, rows))
        rows, cols, masses = rows[order], cols[order], masses[order]
        for arr in (rows, cols, masses):
            arr.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "masses", masses)

    @property
    def shape(self):
        return len(self.source), len(self.target)

    @property
    def h_bound(self) -> float:
        return max(self.source.h_bound, self.target.h_bound)

    @property
    def I_plus(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.source.weights) > 0)

    @property
    def J_plus(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.target.weights) > 0)

    def row_support(self, i: int) -> np.ndarray:
        """``J_+(i)``: columns with positive mass in row ``i``."""
        return self.cols[self.rows == i]

    def col_support(self, j: int) -> np.ndarray:
        """``I_+(j)``: rows with positive mass in column ``j``."""
        return self.rows[self.cols == j]

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.masses, minlength=self.shape[0])

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.cols, weights=self.masses, minlength=self.shape[1])

    def row_weights(self) -> np.ndarray:
        """``pi_ij / mu_i`` for every stored entry, normalised by the row sums."""
        return self.masses / self.row_sums()[self.rows]

    def dense(self) -> np.ndarray:
        P = np.zeros(self.shape)
        P[self.rows, self.cols] = self.masses
        return P

    def check_feasible(self, tol: float = FEAS_TOL) -> None:
        if np.max(np.abs(self.row_sums() - self.source.weights)) > tol:
            raise SolverError("row sums do not match the source weights")
        if np.max(np.abs(self.col_sums() - self.target.weights), initial=0) > tol:
            raise SolverError("column sums do not match the target weights")

    def as_measure(self, product_space=None) -> DiscreteMeasure:
        """The plan as a discrete measure on ``X x Y`` (points are ``(x_i, y_j)`` rows)."""
        xs = np.asarray(self.source.points, dtype=float).reshape(len(self.source), -1)
        ys = np.asarray(self.target.points, dtype=float).reshape(len(self.target), -1)
        pts = np.hstack([xs[self.rows], ys[self.cols]])
        w = self.masses / math.fsum(self.masses)
        return DiscreteMeasure.from_atoms(pts, w, product_space)

    def to_dict(self, certificate: Optional[DualCertificate] = None) -> dict:
        out = {
            "shape": list(self.shape),
            "entries": [{"i": int(i), "j": int(j), "mass": float(m)}
                        for i, j, m in zip(self.rows, self.cols, self.masses)],
            "gap": self.gap,
        }
        if certificate is not None:
            out["certificate"] = certificate.to_dict()
        return out

    def to_json(self, certificate: Optional[DualCertificate] = None) -> str:
        return json.dumps(self.to_dict(certificate))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "mass"])
        for i, j, m in zip(self.rows, self.cols, self.masses):
            w.writerow([int(i), int(j), "%.17g" % m])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# network simplex


def _check_instance(a, b, C):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    if C.shape != (len(a), len(b)):
        raise SolverError(f"cost matrix shape {C.shape} does not match {len(a)}x{len(b)}")
    if not np.all(np.isfinite(C)):
        raise SolverError("cost matrix has non-finite entries")
    if np.any(a < 0) or np.any(b < 0):
        raise SolverError("negative marginal weights")
    if abs(math.fsum(a) - math.fsum(b)) > MASS_TOL:
        raise SolverError("marginals carry different total mass")
    return a, b, C


def _northwest(a, b):
    """Northwest-corner basis: ``m + n - 1`` edges with their flows."""
    m, n = len(a), len(b)
    supply, demand = list(a), list(b)
    i = j = 0
    edges, flows = [], []
    while True:
        f = min(supply[i], demand[j])
        edges.append((i, j))
        flows.append(f)
        supply[i] -= f
        demand[j] -= f
        if i == m - 1 and j == n - 1:
            break
        # advance the row on an exact tie only when columns are exhausted
        if (supply[i] <= demand[j] and i < m - 1) or j == n - 1:
            i += 1
        else:
            j += 1
    return edges, flows


def _tree_flows(m, n, edges, a, b):
    """Flows on a spanning tree of the bipartite graph by leaf elimination."""
    adj = [set() for _ in range(m + n)]
    for i, j in edges:
        adj[i].add(m + j)
        adj[m + j].add(i)
    rest = np.concatenate([a, b]).astype(float)
    flow = {}
    leaves = [v for v in range(m + n) if len(adj[v]) == 1]
    while leaves:
        v = leaves.pop()
        if len(adj[v]) != 1:
            continue
        w = adj[v].pop()
        adj[w].discard(v)
        e = (v, w - m) if v < m else (w, v - m)
        f = rest[v]
        flow[e] = f
        rest[w] -= f
        rest[v] = 0.0
        if len(adj[w]) == 1:
            leaves.append(w)
    return flow


def _potentials(m, n, adj, C):
    """Potentials with ``u_i + v_j = c_ij`` on tree edges, plus BFS parents/depths."""
    N = m + n
    pot = np.zeros(N)
    parent = np.full(N, -1)
    depth = np.zeros(N, dtype=int)
    seen = np.zeros(N, dtype=bool)
    seen[0] = True
    queue = [0]
    for v in queue:
        for w in adj[v]:
            if not seen[w]:
                seen[w] = True
                parent[w] = v
                depth[w] = depth[v] + 1
                if v < m:
                    pot[w] = C[v, w - m] - pot[v]
                else:
                    pot[w] = C[w, v - m] - pot[v]
                queue.append(w)
    if not seen.all():
        raise SolverError("basis is not a spanning tree")
    return pot[:m], pot[m:], parent, depth


def _tree_path(u, w, parent, depth):
    """Node sequence from ``u`` to ``w`` along the tree."""
    left, right = [u], [w]
    while depth[left[-1]] > depth[right[-1]]:
        left.append(parent[left[-1]])
    while depth[right[-1]] > depth[left[-1]]:
        right.append(parent[right[-1]])
    while left[-1] != right[-1]:
        left.append(parent[left[-1]])
        right.append(parent[right[-1]])
    return left + right[-2::-1]


def solve_transport(a, b, C, max_iter: Optional[int] = None):
    """Network simplex on raw arrays.

    Returns ``(rows, cols, masses, u, v)`` where the duals satisfy
    ``u_i + v_j <= c_ij`` exactly (``v`` is the c-transform of ``u``).
    Supplies are perturbed by ``eta`` each (demand ``n`` by ``m * eta``) so
    every basis stays non-degenerate; the perturbation is removed by
    recomputing the flows on the final tree.
    """
    a, b, C = _check_instance(a, b, C)
    m, n = len(a), len(b)
    if m == 0 or n == 0:
        raise SolverError("empty marginal")
    eta = PERTURBATION
    ap = a + eta
    bp = b.copy()
    bp[-1] += m * eta
    edges, flows = _northwest(ap, bp)
    flow = dict(zip(edges, flows))
    adj = [set() for _ in range(m + n)]
    for i, j in edges:
        adj[i].add(m + j)
        adj[m + j].add(i)
    scale = max(1.0, float(np.max(np.abs(C))))
    tol = 1e-12 * scale
    max_iter = max_iter if max_iter is not None else 50 * (m + n) * max(m, n) + 1000
    bland = False
    for _ in range(max_iter):
        u, v, parent, depth = _potentials(m, n, adj, C)
        R = C - u[:, None] - v[None, :]
        if bland:
            neg = np.flatnonzero(R.ravel() < -tol)
            if len(neg) == 0:
                break
            flat = int(neg[0])
        else:
            flat = int(np.argmin(R))
            if R.flat[flat] >= -tol:
                break
        ei, ej = divmod(flat, n)
        path = _tree_path(m + ej, ei, parent, depth)
        cycle = []
        for k in range(len(path) - 1):
            p, q = path[k], path[k + 1]
            cycle.append((q, p - m) if p >= m else (p, q - m))
        minus = cycle[0::2]
        plus = cycle[1::2]
        theta = min(flow[e] for e in minus)
        leave = min((e for e in minus if flow[e] <= theta), key=lambda e: (e[0], e[1]))
        for e in minus:
            flow[e] -= theta
        for e in plus:
            flow[e] += theta
        flow[(ei, ej)] = theta
        del flow[leave]
        li, lj = leave
        adj[li].discard(m + lj)
        adj[m + lj].discard(li)
        adj[ei].add(m + ej)
        adj[m + ej].add(ei)
        # Bland's rule only while pivots stall
        bland = theta <= 0.5 * eta
    else:
        raise NotConverged(f"network simplex did not finish in {max_iter} pivots")
    u, _, _, _ = _potentials(m, n, adj, C)
    exact = _tree_flows(m, n, list(flow), a, b)
    rows, cols, masses = [], [], []
    # leaf elimination leaves round-off residue (~1e-17) on edges that should be empty
    for (i, j), f in sorted(exact.items()):
        if f > FLOW_TOL and a[i] > 0 and b[j] > 0:
            rows.append(i)
            cols.append(j)
            masses.append(f)
    v = np.min(C - u[:, None], axis=0)
    return np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(masses), u, v


def _cost_matrix(mu_h, nu_h, c) -> np.ndarray:
    if isinstance(c, np.ndarray):
        return np.asarray(c, dtype=float)
    return c.matrix(mu_h.points, nu_h.points)


def _finish(mu_h, nu_h, C, rows, cols, masses, u, v):
    K = math.fsum(masses * C[rows, cols])
    gap = K - (math.fsum(u * mu_h.weights) + math.fsum(v * nu_h.weights))
    gap = max(gap, 0.0)
    plan = HPlan(mu_h, nu_h, rows, cols, masses, gap)
    return plan, DualCertificate(u, v, gap)


def solve_exact(mu_h: DiscreteMeasure, nu_h: DiscreteMeasure, c):
    """Optimal basic plan and dual certificate for the transportation LP.

    ``c`` is a :class:`CostFunction` or a precomputed cost matrix.
    """
    C = _cost_matrix(mu_h, nu_h, c)
    rows, cols, masses, u, v = solve_transport(mu_h.weights, nu_h.weights, C)
    return _finish(mu_h, nu_h, C, rows, cols, masses, u, v)


def northwest_corner(mu_h: DiscreteMeasure, nu_h: DiscreteMeasure) -> HPlan:
    """Feasible (usually suboptimal) northwest-corner plan, uncertified."""
    edges, flows = _northwest(np.asarray(mu_h.weights, float), np.asarray(nu_h.weights, float))
    keep = [(e, f) for e, f in zip(edges, flows) if f > 0]
    rows = [e[0] for e, _ in keep]
    cols = [e[1] for e, _ in keep]
    return HPlan(mu_h, nu_h, rows, cols, [f for _, f in keep])


def plan_cost(plan: HPlan, c) -> float:
    """``sum_ij pi_ij c(x_i, y_j)`` over the stored entries."""
    if isinstance(c, np.ndarray):
        vals = c[plan.rows, plan.cols]
    else:
        xs = np.asarray(plan.source.points)[plan.rows]
        ys = np.asarray(plan.target.points)[plan.cols]
        if xs.ndim > 1:
            vals = np.array([float(c(x, y)) for x, y in zip(xs, ys)])
        else:
            vals = np.asarray(c(xs, ys), dtype=float)
    return math.fsum(plan.masses * vals)


def certify(plan: HPlan, c):
    """Certify a given plan against optimal duals; returns a copy with ``gap`` set."""
    C = _cost_matrix(plan.source, plan.target, c)
    _, _, _, u, v = solve_transport(plan.source.weights, plan.target.weights, C)
    K = math.fsum(plan.masses * C[plan.rows, plan.cols])
    gap = max(K - (math.fsum(u * plan.source.weights) + math.fsum(v * plan.target.weights)), 0.0)
    out = HPlan(plan.source, plan.target, plan.rows, plan.cols, plan.masses, gap)
    return out, DualCertificate(u, v, gap)


# ---------------------------------------------------------------------------
# entropic solver


def logsumexp(x, axis):
    # scipy's version carries too much per-call overhead for tiny matrices
    top = np.max(x, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    return np.squeeze(top, axis=axis) + np.log(np.sum(np.exp(x - top), axis=axis))


def _round_to_marginals(P, a, b):
    """Altschuler-Weed-Rigollet rounding onto the exact transport polytope."""
    r = P.sum(axis=1)
    x = np.where(r > a, a / np.where(r > 0, r, 1.0), 1.0)
    P = P * x[:, None]
    s = P.sum(axis=0)
    y = np.where(s > b, b / np.where(s > 0, s, 1.0), 1.0)
    P = P * y[None, :]
    ea = a - P.sum(axis=1)
    eb = b - P.sum(axis=0)
    tot = ea.sum()
    if tot > 0:
        P = P + np.outer(ea, eb) / tot
    return P


def _dual_from_potential(C, f, rows_pos):
    """Feasible duals by double c-transform of a row potential."""
    v = np.min(C[rows_pos] - f[:, None], axis=0)
    u = np.min(C - v[None, :], axis=1)
    return u, v


def solve_entropic(mu_h: DiscreteMeasure, nu_h: DiscreteMeasure, c,
                   eps_target: float = 1e-3, max_iter: int = 20000):
    """Log-domain Sinkhorn with regularisation annealing and exact rounding.

    Stops as soon as the rounded plan's duality gap against the
    unregularised problem is at most ``eps_target``.
    """
    if not eps_target > 0:
        raise ValueError("eps_target must be positive")
    C = _cost_matrix(mu_h, nu_h, c)
    a, b, C = _check_instance(mu_h.weights, nu_h.weights, C)
    I = np.flatnonzero(a > 0)
    J = np.flatnonzero(b > 0)
    Cp = C[np.ix_(I, J)]
    la, lb = np.log(a[I]), np.log(b[J])
    spread = float(Cp.max() - Cp.min()) if Cp.size else 0.0
    reg_final = eps_target / (4.0 * max(1.0, math.log(len(I) * len(J) + 1)))
    reg = max(spread, reg_final)
    f = np.zeros(len(I))
    g = np.zeros(len(J))
    it = 0
    gap = math.inf
    while it < max_iter:
        # iterate at this regularisation until the row marginals settle
        for _ in range(50):
            for _ in range(10):
                f = reg * (la - logsumexp((g[None, :] - Cp) / reg, axis=1))
                g = reg * (lb - logsumexp((f[:, None] - Cp) / reg, axis=0))
            it += 10
            err = np.abs(np.exp(logsumexp((f[:, None] + g[None, :] - Cp) / reg, axis=1)) - a[I]).sum()
            if err < 0.1 * eps_target or it >= max_iter:
                break
        Pp = np.exp((f[:, None] + g[None, :] - Cp) / reg)
        Pp = _round_to_marginals(Pp, a[I], b[J])
        P = np.zeros_like(C)
        P[np.ix_(I, J)] = Pp
        u, v = _dual_from_potential(C, f, I)
        K = math.fsum((P * C).ravel())
        gap = max(K - (math.fsum(u * a) + math.fsum(v * b)), 0.0)
        if gap <= eps_target:
            rows, cols = np.nonzero(P > 0)
            plan = HPlan(mu_h, nu_h, rows, cols, P[rows, cols], gap)
            return plan, DualCertificate(u, v, gap)
        reg = max(0.5 * reg, reg_final)
    raise NotConverged(f"Sinkhorn reached max_iter={max_iter} with gap {gap:.3g} > {eps_target}")


# ---------------------------------------------------------------------------
# brute force oracle


@lru_cache(maxsize=None)
def _spanning_trees(m: int, n: int):
    """All spanning trees of K_{m,n} with their flow-solve matrices.

    Returns ``(edge_idx, inv)`` where ``edge_idx`` is ``(T, m+n-1)`` flat
    edge indices and ``inv @ [a; b[:-1]]`` gives the tree flows.
    """
    E = [(i, j) for i in range(m) for j in range(n)]
    A = np.zeros((m + n, m * n))
    for k, (i, j) in enumerate(E):
        A[i, k] = 1.0
        A[m + j, k] = 1.0
    A = A[:-1]
    trees, invs = [], []
    for subset in itertools.combinations(range(m * n), m + n - 1):
        B = A[:, subset]
        if abs(np.linalg.det(B)) < 0.5:
            continue
        trees.append(subset)
        invs.append(np.linalg.inv(B))
    return np.array(trees, dtype=int), np.array(invs)


def brute_force_solve(mu_h: DiscreteMeasure, nu_h: DiscreteMeasure, c):
    """Exact optimum by enumerating every basic feasible solution.

    Returns ``(value, plans)`` with ``plans`` the distinct optimal vertices
    as dense arrays.  Only for ``|I| * |J| <= 16``.
    """
    a = np.asarray(mu_h.weights, dtype=float)
    b = np.asarray(nu_h.weights, dtype=float)
    m, n = len(a), len(b)
    if m * n > 16:
        raise ValueError("brute force is limited to |I|*|J| <= 16")
    C = _cost_matrix(mu_h, nu_h, c)
    a, b, C = _check_instance(a, b, C)
    trees, invs = _spanning_trees(m, n)
    rhs = np.concatenate([a, b])[:-1]
    flows = invs @ rhs
    ok = np.all(flows >= -1e-12, axis=1)
    trees, flows = trees[ok], np.clip(flows[ok], 0.0, None)
    values = np.sum(flows * C.ravel()[trees], axis=1)
    best = float(values.min())
    plans = []
    for t, f in zip(trees[values <= best + 1e-12], flows[values <= best + 1e-12]):
        P = np.zeros(m * n)
        P[t] = f
        P = P.reshape(m, n)
        if not any(np.allclose(P, Q, atol=1e-12, rtol=0) for Q in plans):
            plans.append(P)
    return best, plans
