"""Quadratic program at the core of the modulus computation.

Solves

    minimize    sum_e w(e) rho(e)^2
    subject to  N rho >= 1,  rho >= 0

where each row of N is the 0/1 edge indicator of one loop. Because the
Hessian is diagonal, the Lagrangian dual is a bound-constrained QP in
the multipliers lam >= 0:

    maximize  lam . 1 - (1/4) lam' (N W^-1 N') lam

which this module solves with an active-set method in the style of
Lawson-Hanson nonnegative least squares. The primal is recovered as
rho = W^-1 N' lam / 2, so stationarity and complementary slackness hold
by construction and the reported KKT residual is dominated by primal
feasibility, which the active-set termination bounds by the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QPProblem", "QPSolution", "QPConvergenceError", "solve"]


class QPConvergenceError(RuntimeError):
    """Active-set iteration budget exhausted; carries the best residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class QPProblem:
    """Per-edge weights plus sparse 0/1 constraint rows (loop edge sets)."""

    weights: np.ndarray
    rows: tuple[tuple[int, ...], ...]

    @staticmethod
    def build(weights, rows) -> "QPProblem":
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty vector")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be strictly positive and finite")
        frozen = []
        for i, r in enumerate(rows):
            idx = tuple(sorted(int(e) for e in r))
            if not idx:
                raise ValueError(f"constraint row {i} is empty")
            if len(set(idx)) != len(idx):
                raise ValueError(f"constraint row {i} repeats an edge")
            if idx[0] < 0 or idx[-1] >= w.size:
                raise ValueError(f"constraint row {i} references an unknown edge")
            frozen.append(idx)
        if not frozen:
            raise ValueError("at least one constraint row is required")
        return QPProblem(weights=w, rows=tuple(frozen))

    @property
    def n_edges(self) -> int:
        return self.weights.size

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def indicator_matrix(self) -> np.ndarray:
        N = np.zeros((self.n_rows, self.n_edges))
        for i, r in enumerate(self.rows):
            N[i, list(r)] = 1.0
        return N


@dataclass(frozen=True)
class QPSolution:
    """Primal density, dual multipliers, objective and max KKT violation."""

    rho: np.ndarray
    lam: np.ndarray
    objective: float
    kkt_residual: float

    def dual_objective(self, problem: QPProblem) -> float:
        N = problem.indicator_matrix()
        M = N @ (N / problem.weights).T
        return float(self.lam.sum() - 0.25 * self.lam @ M @ self.lam)


def _solve_spd(A, b):
    # plain solve first; least squares picks up singular active sets
    try:
        x = np.linalg.solve(A, b)
        if np.all(np.isfinite(x)):
            resid = np.abs(A @ x - b).max() if b.size else 0.0
            if resid <= 1e-10 * max(1.0, np.abs(b).max()):
                return x
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(A, b, rcond=None)[0]


def solve(problem: QPProblem, tol: float = 1e-8, warm_start=None) -> QPSolution:
    """Solve the weighted modulus QP to a KKT residual of at most tol.

    Parameters
    ----------
    problem : QPProblem
    tol : float
        Bound on the KKT residual, in (0, 1).
    warm_start : iterable of int, optional
        Row indices expected to be active; seeds the passive set.

    Raises
    ------
    QPConvergenceError
        If the iteration budget runs out before the residual drops
        below tol (carries the last residual).
    """
    if not (0 < tol < 1):
        raise ValueError("tol must lie in (0, 1)")
    n_rows = problem.n_rows
    N = problem.indicator_matrix()
    M = N @ (N / problem.weights).T  # Gram matrix of rows under W^-1
    # tiny diagonal shift: keeps subproblems positive definite when loop
    # indicator rows are linearly dependent, perturbing feasibility and
    # slackness by O(1e-12 * lam), far below any usable tol
    M[np.diag_indices(n_rows)] += 1e-12 * max(1.0, float(M.diagonal().max()))

    lam = np.zeros(n_rows)
    passive: list[int] = []
    if warm_start is not None:
        passive = sorted({int(i) for i in warm_start if 0 <= int(i) < n_rows})
        if passive:
            x = _solve_spd(M[np.ix_(passive, passive)], np.full(len(passive), 2.0))
            if np.all(x > 0):
                lam[passive] = x
            else:
                passive, lam = [], np.zeros(n_rows)

    max_outer = 3 * n_rows + 100
    for _ in range(max_outer):
        grad = 1.0 - 0.5 * (M[:, passive] @ lam[passive] if passive else np.zeros(n_rows))
        grad[passive] = -np.inf
        j = int(np.argmax(grad))
        if grad[j] <= tol:
            break
        passive.append(j)

        for _ in range(max_outer):
            sub = np.ix_(passive, passive)
            x = _solve_spd(M[sub], np.full(len(passive), 2.0))
            if np.all(x > 1e-12):
                lam[passive] = x
                break
            # step as far as nonnegativity allows, drop the blockers
            lam_p = lam[passive]
            mask = x <= 1e-12
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(mask, lam_p / (lam_p - x), np.inf)
            alpha = float(np.min(ratios))
            alpha = min(max(alpha, 0.0), 1.0)
            lam_p = lam_p + alpha * (x - lam_p)
            lam_p[mask & (ratios <= alpha + 1e-15)] = 0.0
            for idx, val in zip(passive, lam_p):
                lam[idx] = val
            passive = [i for i in passive if lam[i] > 0.0]
        else:
            raise QPConvergenceError("inner active-set loop failed to settle")
    else:
        resid = _kkt_residual(problem, N, lam)
        raise QPConvergenceError(
            f"no convergence within {max_outer} active-set steps (residual {resid:.3e})",
            residual=resid,
        )

    lam[lam < 0] = 0.0
    rho = (N.T @ lam) / (2.0 * problem.weights)
    objective = float(problem.weights @ rho**2)
    residual = _kkt_residual(problem, N, lam)
    if residual > tol:
        raise QPConvergenceError(
            f"terminated with KKT residual {residual:.3e} > tol {tol:.1e}", residual=residual
        )
    return QPSolution(rho=rho, lam=lam, objective=objective, kkt_residual=residual)


def _kkt_residual(problem, N, lam):
    rho = (N.T @ lam) / (2.0 * problem.weights)
    lengths = N @ rho
    feasibility = float(max(0.0, (1.0 - lengths).max()))
    # stationarity 2 w rho = N' lam holds identically for this rho
    slackness = float(np.abs(lam * (lengths - 1.0)).max())
    return max(feasibility, slackness)
