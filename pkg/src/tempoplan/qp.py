"""Dense primal active-set solver for small strictly convex QPs.

Solves min 1/2 x'Px + q'x subject to Gx >= h from a feasible start. The
plan-parametrization problems are least squares of linear residuals over a
few dozen variables, so dense KKT solves per iteration are cheap and the
active-set method terminates with the constraints that end up active
satisfied exactly (to linear-solve precision). All tie-breaking is by
index, making the solve deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverStall

KKT_TOL = 1e-8


@dataclass
class QPResult:
    x: np.ndarray
    active: tuple
    iterations: int
    kkt_residual: float


def solve_qp(P: np.ndarray, q: np.ndarray, G: np.ndarray, h: np.ndarray,
             x0: np.ndarray, tol: float = KKT_TOL, max_iter: int = 500) -> QPResult:
    n = len(q)
    x = np.array(x0, dtype=float)
    if len(G) and np.any(G @ x < h - 1e-9):
        raise ValueError("start point is infeasible")
    working: list = []

    for it in range(max_iter):
        gw = G[working] if working else np.zeros((0, n))
        m = len(working)
        kkt = np.zeros((n + m, n + m))
        kkt[:n, :n] = P
        kkt[:n, n:] = gw.T
        kkt[n:, :n] = gw
        rhs = np.concatenate([-(P @ x + q), np.zeros(m)])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        p = sol[:n]
        lam = sol[n:]

        if np.linalg.norm(p) <= tol:
            if m == 0 or np.all(lam >= -tol):
                res = float(np.linalg.norm(P @ x + q - (gw.T @ lam if m else 0.0)))
                return QPResult(x=x, active=tuple(working), iterations=it,
                                kkt_residual=res)
            drop = int(np.argmin(lam))
            working.pop(drop)
            continue

        # largest step along p keeping all inactive constraints feasible
        alpha = 1.0
        blocking = -1
        for i in range(len(G)):
            if i in working:
                continue
            gp = float(G[i] @ p)
            if gp < -1e-13:
                step = float((h[i] - G[i] @ x) / gp)
                if step < alpha - 1e-15:
                    alpha = max(step, 0.0)
                    blocking = i
        x = x + alpha * p
        if blocking >= 0:
            working.append(blocking)
            working.sort()

    raise SolverStall(f"active-set QP did not converge in {max_iter} iterations",
                      best=QPResult(x=x, active=tuple(working), iterations=max_iter,
                                    kkt_residual=float(np.linalg.norm(P @ x + q))))
