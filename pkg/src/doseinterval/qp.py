"""Dense convex QP with per-coordinate boxes and a single sum-to-zero constraint.

    minimize    0.5 * beta' K beta + q' beta
    subject to  lo <= beta <= hi,  sum(beta) = 0

Solved by SMO-style two-coordinate descent: pick the most violating pair by
KKT scores, solve the one-dimensional restricted problem in closed form, and
clip to both boxes. Moving mass (+d, -d) between a pair preserves the
equality constraint by construction, so feasibility never degrades.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .types import ValidationError


class InfeasibleError(ValidationError):
    """The box and equality constraints admit no common point."""


@dataclass(frozen=True)
class QpProblem:
    k: np.ndarray
    q: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def n(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class QpSolution:
    beta: np.ndarray
    objective: float
    kkt_residual: float
    converged: bool
    n_updates: int


def _objective(k: np.ndarray, q: np.ndarray, beta: np.ndarray) -> float:
    return 0.5 * float(beta @ (k @ beta)) + float(q @ beta)


def _feasible_start(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Project zero onto the box, then repair the equality greedily."""
    if np.any(lo > hi):
        i = int(np.argmax(lo > hi))
        raise InfeasibleError(f"empty box at coordinate {i}: lo={lo[i]} > hi={hi[i]}")
    scale = max(float(np.max(np.abs(lo), initial=0.0)), float(np.max(np.abs(hi), initial=0.0)), 1.0)
    tiny = 1e-12 * scale
    if lo.sum() > tiny or hi.sum() < -tiny:
        raise InfeasibleError("sum(lo) > 0 or sum(hi) < 0: equality constraint unreachable")
    beta = np.clip(0.0, lo, hi)
    residual = -beta.sum()
    for i in range(beta.shape[0]):
        if residual > 0:
            step = min(residual, hi[i] - beta[i])
        else:
            step = max(residual, lo[i] - beta[i])
        beta[i] += step
        residual -= step
        if residual == 0.0:
            break
    if abs(residual) > tiny:
        raise InfeasibleError("equality repair failed; constraints inconsistent")
    return beta


def solve_qp(
    problem: QpProblem,
    tol: float = 1e-6,
    max_sweeps: int = 10_000,
    sweep_objectives: Optional[list] = None,
) -> QpSolution:
    """Solve the box-and-equality QP to KKT residual ``tol``.

    ``max_sweeps`` counts blocks of n pair updates; if the budget runs out
    the best iterate is returned with ``converged=False`` and a warning.
    A tiny ridge (1e-10 * trace/n) is added when K fails a Cholesky check.
    ``sweep_objectives`` (if a list) collects the objective once per sweep.
    """
    k = np.asarray(problem.k, dtype=float)
    q = np.asarray(problem.q, dtype=float).reshape(-1)
    lo = np.asarray(problem.lo, dtype=float).reshape(-1).copy()
    hi = np.asarray(problem.hi, dtype=float).reshape(-1).copy()
    n = q.shape[0]
    if k.shape != (n, n) or lo.shape[0] != n or hi.shape[0] != n:
        raise ValidationError(f"inconsistent QP shapes: K{k.shape}, n={n}")
    sym_err = float(np.max(np.abs(k - k.T), initial=0.0))
    if sym_err > 1e-8 * max(1.0, float(np.max(np.abs(k)))):
        raise ValidationError(f"K is not symmetric (max asymmetry {sym_err:.3e})")

    try:
        np.linalg.cholesky(k + np.eye(n) * (1e-14 * max(1.0, np.trace(k))))
    except np.linalg.LinAlgError:
        k = k + np.eye(n) * (1e-10 * np.trace(k) / n)

    beta = _feasible_start(lo, hi)
    g = k @ beta + q
    diag = np.diag(k).copy()

    max_updates = max_sweeps * n
    updates = 0
    refresh = max(n, 16)
    kkt = np.inf
    while updates < max_updates:
        can_up = beta < hi
        can_dn = beta > lo
        if not can_up.any() or not can_dn.any():
            kkt = 0.0
            break
        g_up = np.where(can_up, g, np.inf)
        g_dn = np.where(can_dn, g, -np.inf)
        i = int(np.argmin(g_up))
        j = int(np.argmax(g_dn))
        kkt = g[j] - g[i]
        if kkt <= tol:
            g = k @ beta + q  # confirm against an undrifted gradient
            kkt = float(np.max(np.where(can_dn, g, -np.inf)) - np.min(np.where(can_up, g, np.inf)))
            if kkt <= tol:
                break
            continue
        room = min(hi[i] - beta[i], beta[j] - lo[j])
        denom = diag[i] + diag[j] - 2.0 * k[i, j]
        if denom > 1e-14 * max(diag[i] + diag[j], 1.0):
            step = min(kkt / denom, room)
        else:
            step = room  # flat direction: run to the box
        beta[i] = min(beta[i] + step, hi[i])
        beta[j] = max(beta[j] - step, lo[j])
        g += step * (k[:, i] - k[:, j])
        updates += 1
        if updates % refresh == 0:
            g = k @ beta + q  # periodic refresh against drift
            if sweep_objectives is not None:
                sweep_objectives.append(_objective(k, q, beta))

    # exact box clip plus a final equality repair; prefer strictly interior
    # coordinates so that tiny corrections never flip a bound classification
    beta = np.clip(beta, lo, hi)
    residual = -beta.sum()
    if residual != 0.0:
        interior = (beta > lo) & (beta < hi)
        order = list(np.flatnonzero(interior)) + list(np.flatnonzero(~interior))
        for idx in order:
            if residual > 0:
                step = min(residual, hi[idx] - beta[idx])
            else:
                step = max(residual, lo[idx] - beta[idx])
            beta[idx] += step
            residual -= step
            if residual == 0.0:
                break

    g = k @ beta + q
    can_up = beta < hi
    can_dn = beta > lo
    if can_up.any() and can_dn.any():
        kkt = max(0.0, float(np.max(g[can_dn]) - np.min(g[can_up])))
    else:
        kkt = 0.0
    converged = kkt <= tol
    if not converged:
        warnings.warn(
            f"QP stopped after {updates} pair updates with KKT residual {kkt:.3e} > {tol:.1e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return QpSolution(beta, _objective(k, q, beta), kkt, converged, updates)
