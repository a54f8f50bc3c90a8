"""Brute-force reference computations, independent of the simplex code."""

import itertools

import numpy as np


def vertex_enumeration_lp(A, b, d, tol=1e-9):
    """Status and value of ``min d'x s.t. Ax >= b`` by enumerating vertices and rays.

    The lineality space of ``{Ax >= b}`` is projected out first so that the
    reduced polyhedron is pointed; then it is nonempty iff it has a vertex, and
    the LP is unbounded iff some extreme ray of the recession cone descends.
    """
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    d = np.asarray(d, float)
    u, v = A.shape
    _, sv, Vt = np.linalg.svd(A)
    r = int(np.sum(sv > 1e-10 * max(1.0, sv.max(initial=0.0))))
    if r == 0:
        feasible = bool(np.all(b <= tol))
        if not feasible:
            return "infeasible", None
        return ("optimal", 0.0) if np.allclose(d, 0, atol=tol) else ("unbounded", None)
    Q = Vt[:r].T                       # orthonormal basis of the row space
    Ar = A @ Q
    d_null = d - Q @ (Q.T @ d)
    dr = Q.T @ d

    best = np.inf
    for rows in itertools.combinations(range(u), r):
        sub = Ar[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        y = np.linalg.solve(sub, b[list(rows)])
        if np.all(Ar @ y >= b - tol * (1 + np.abs(b))):
            best = min(best, float(dr @ y))
    if not np.isfinite(best):
        return "infeasible", None
    if np.linalg.norm(d_null) > 1e-9:
        return "unbounded", None
    # extreme rays of {z : Ar z >= 0}
    for rows in itertools.combinations(range(u), r - 1):
        sub = Ar[list(rows)].reshape(len(rows), r)
        if r - 1 > 0 and np.linalg.matrix_rank(sub, tol=1e-10) < r - 1:
            continue
        if r - 1 == 0:
            z = np.ones(1)
        else:
            _, _, vt = np.linalg.svd(sub)
            z = vt[-1]
        for sgn in (1.0, -1.0):
            w = sgn * z
            if np.all(Ar @ w >= -1e-10) and dr @ w < -1e-10:
                return "unbounded", None
    return "optimal", best


def value_iteration_series(mdp, u, horizon_tol=1e-10):
    """``sum_t alpha^t P_u^t g_u`` truncated once ``alpha^T/(1-alpha) < horizon_tol``."""
    alpha = mdp.discount
    rows = np.arange(mdp.n_states)
    P = mdp.transition[u, rows, :]
    g = mdp.reward[u, rows]
    T = int(np.ceil(np.log(horizon_tol * (1 - alpha)) / np.log(alpha))) + 1
    out = np.zeros(mdp.n_states)
    term = g.copy()
    for t in range(T + 1):
        out += term
        term = alpha * (P @ term)
    return out


def brute_force_value_iteration(mdp, n_iter=None):
    alpha = mdp.discount
    if n_iter is None:
        n_iter = int(np.ceil(np.log(1e-13 * (1 - alpha)) / np.log(alpha))) + 10
    J = np.zeros(mdp.n_states)
    for _ in range(n_iter):
        J = np.array([max(mdp.reward[a, s] + alpha * sum(mdp.transition[a, s, t] * J[t]
                                                          for t in range(mdp.n_states))
                          for a in range(mdp.n_actions))
                      for s in range(mdp.n_states)])
    return J
