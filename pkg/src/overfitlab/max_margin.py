"""Exact hard-margin separator: min ||w||^2 subject to y_i x_i^T w >= 1.

Solved in the dual, max_a sum(a) - |Z^T a|^2 / 2 over a >= 0 with rows
z_i = y_i x_i, by cyclic coordinate ascent. Every few sweeps the current
support set is polished with one exact solve of G_SS a_S = 1, which removes
the slow tail of coordinate ascent on ill-conditioned Gram matrices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import _kernels
from .gmm import Dataset

GRAM_CACHE_LIMIT = 4096
DIVERGENCE_GUARD = 1e12


class InfeasibleError(ValueError):
    """The labelled points admit no homogeneous separator."""

    def __init__(self, message: str, evidence: dict):
        super().__init__(message)
        self.evidence = evidence


@dataclass
class MaxMarginSolution:
    w: np.ndarray
    alphas: np.ndarray
    kkt_residual: float
    converged: bool
    sweeps: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "w": [float(v) for v in self.w],
            "alphas": [float(v) for v in self.alphas],
            "kkt_residual": float(self.kkt_residual),
            "converged": bool(self.converged),
        })

    @classmethod
    def from_json(cls, text: str) -> MaxMarginSolution:
        d = json.loads(text)
        return cls(np.array(d["w"]), np.array(d["alphas"]), d["kkt_residual"], d["converged"])


def signed_rows(dataset: Dataset) -> np.ndarray:
    return dataset.y_obs[:, None] * dataset.X


def kkt_residual(Z: np.ndarray, alpha: np.ndarray, w: np.ndarray | None = None) -> float:
    """Largest violation among primal feasibility, stationarity on the
    support, complementary slackness and the representation w = Z^T a."""
    rep = Z.T @ alpha
    if w is None:
        w = rep
    m = Z @ w
    primal = np.max(np.maximum(1.0 - m, 0.0))
    support = alpha > 0
    station = np.max(np.abs(1.0 - m[support]), initial=0.0)
    slack = np.max(alpha * np.abs(m - 1.0))
    represent = np.linalg.norm(w - rep) / (1.0 + np.linalg.norm(w))
    return float(max(primal, station, slack, represent))


def _check_feasible(Z: np.ndarray) -> None:
    n, p = Z.shape
    zero = np.flatnonzero(~Z.any(axis=1))
    if zero.size:
        raise InfeasibleError("zero feature vector cannot be separated",
                              {"zero_rows": zero.tolist()})
    res = linprog(np.zeros(p), A_ub=-Z, b_ub=-np.ones(n),
                  bounds=[(None, None)] * p, method="highs")
    if res.status == 2:
        raise InfeasibleError("no w satisfies y_i x_i^T w >= 1 for all i",
                              {"lp_status": int(res.status), "lp_message": res.message})


def lp_separable(Z: np.ndarray) -> bool:
    """Feasibility of y_i x_i^T w >= 1 by linear programming."""
    try:
        _check_feasible(np.asarray(Z, dtype=np.float64))
    except InfeasibleError:
        return False
    return True


def _polish(G: np.ndarray, alpha: np.ndarray) -> np.ndarray | None:
    support = np.flatnonzero(alpha > 0)
    if support.size == 0:
        return None
    sub = G[np.ix_(support, support)]
    try:
        a_s = np.linalg.solve(sub, np.ones(support.size))
    except np.linalg.LinAlgError:
        return None
    if not np.all(a_s > 0):
        return None
    cand = np.zeros_like(alpha)
    cand[support] = a_s
    return cand


def _sweeps_streaming(Z, alpha, sweeps):
    w = Z.T @ alpha
    sq = np.einsum("ij,ij->i", Z, Z)
    for _ in range(sweeps):
        for i in range(Z.shape[0]):
            a = max(0.0, alpha[i] + (1.0 - Z[i] @ w) / sq[i])
            w += (a - alpha[i]) * Z[i]
            alpha[i] = a
    return alpha


def solve_max_margin(dataset: Dataset, tol: float = 1e-8, max_iters: int = 200_000,
                     check_every: int = 50) -> MaxMarginSolution:
    """Minimum-norm separator on the observed labels.

    ``max_iters`` counts full dual sweeps. Raises :class:`InfeasibleError` for
    non-separable data; returns ``converged=False`` with the best iterate when
    the sweep budget runs out.
    """
    Z = np.ascontiguousarray(signed_rows(dataset))
    return solve_max_margin_rows(Z, tol=tol, max_iters=max_iters, check_every=check_every)


def solve_max_margin_rows(Z: np.ndarray, tol: float = 1e-8, max_iters: int = 200_000,
                          check_every: int = 50) -> MaxMarginSolution:
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    n = Z.shape[0]
    _check_feasible(Z)
    gram = Z @ Z.T if n <= GRAM_CACHE_LIMIT else None

    alpha = np.zeros(n)
    best = (np.inf, alpha.copy())
    done = 0
    while done < max_iters:
        step = min(check_every, max_iters - done)
        if gram is not None:
            _kernels.dual_sweeps(gram, alpha, step)
        else:
            _sweeps_streaming(Z, alpha, step)
        done += step
        total = float(alpha.sum())
        if not np.isfinite(total) or total > DIVERGENCE_GUARD:
            raise InfeasibleError("dual variables diverged",
                                  {"alpha_sum": total, "sweeps": done,
                                   "w_norm": float(np.linalg.norm(Z.T @ alpha))})
        res = kkt_residual(Z, alpha)
        if res < best[0]:
            best = (res, alpha.copy())
        if res <= tol:
            break
        if gram is not None:
            cand = _polish(gram, alpha)
            if cand is not None:
                cres = kkt_residual(Z, cand)
                if cres <= tol:
                    alpha, best = cand, (cres, cand.copy())
                    break
    res, alpha = best
    return MaxMarginSolution(Z.T @ alpha, alpha, res, res <= tol, done)


def is_separable(dataset: Dataset, **kwargs) -> bool:
    try:
        return solve_max_margin(dataset, **kwargs).converged
    except InfeasibleError:
        return False


def direction_gap(a, b) -> float:
    """1 - cos(a, b), in [0, 2]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("direction_gap needs two non-zero vectors")
    cos = float(a @ b) / (na * nb)
    return float(min(2.0, max(0.0, 1.0 - cos)))
