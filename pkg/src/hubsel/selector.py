"""Budgeted selection of popular, low-risk, mutually diverse fragments.

The selection problem asks for k fragments that score high on normalized
hubness H, low on normalized LID risk D, and are pairwise distant under
the affinity matrix A. With a relaxed indicator vector y in [0, 1]^n and
sum(y) = k, the objective is

    f(y) = yH / k - yD / k + yAy / (k (k - 1))

maximized by pairwise budget-preserving updates: each iteration moves
mass alpha from the fragment with the smallest reward (donor) to the one
with the largest reward (receiver), where the reward vector is the exact
gradient of f. The loop stops when no pair improves by more than the
tolerance; the fractional result is rounded to the k largest entries.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist

from hubsel.neighbors import NeighborGraph, check_cosine_rows, _check_metric


@dataclass
class SelectionProblem:
    """Normalized inputs of one selection instance.

    Attributes
    ----------
    h : ndarray (n,)
        Hubness term, min-max normalized to [0, 1].
    d_risk : ndarray (n,)
        Risk term, min-max normalized to [0, 1].
    a : ndarray or scipy sparse matrix, (n, n)
        Symmetric non-negative pairwise distances, zero diagonal.
    k : int
        Budget, 2 <= k <= n (k = 1 only with ``linear``).
    linear : bool
        Drop the quadratic diversity term (fallback for k = 1).
    """

    h: np.ndarray
    d_risk: np.ndarray
    a: object
    k: int
    linear: bool = False

    @property
    def n(self) -> int:
        return self.h.shape[0]


@dataclass
class IndicatorVector:
    """Relaxed membership vector with its budget."""

    y: np.ndarray
    budget: int

    def validate(self, tol: float = 1e-9) -> None:
        if abs(float(self.y.sum()) - self.budget) > tol:
            raise ValueError(
                f"budget violated: sum(y) = {float(self.y.sum())!r}, expected {self.budget}"
            )
        if self.y.min() < -tol or self.y.max() > 1.0 + tol:
            raise ValueError("y outside the unit box")


@dataclass
class SolverConfig:
    init: object = "hub_first"  # hub_first | lid_first | uniform | ndarray
    max_iterations: int | None = None  # default 10 n
    tolerance: float = 1e-9
    step_rule: str = "derived"  # derived | paper


@dataclass
class SolverTrace:
    """Per-run diagnostics of the pairwise-update solver.

    ``objective_per_iteration`` holds the objective before the first
    update and after every applied update. ``updates`` holds one
    (eta, donor, receiver, alpha) tuple per applied update.
    """

    objective_per_iteration: list = field(default_factory=list)
    iterations: int = 0
    kkt_residual: float = 0.0
    converged: bool = False
    updates: list = field(default_factory=list)
    max_budget_drift: float = 0.0
    y_min: float = 0.0
    y_max: float = 0.0


def _minmax(v: np.ndarray, what: str) -> np.ndarray:
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        warnings.warn(f"constant {what} vector, normalization yields all zeros")
        return np.zeros_like(v, dtype=np.float64)
    return (v - lo) / (hi - lo)


def build_problem(
    hub,
    lid,
    m,
    metric: str,
    k: int,
    mode: str = "dense",
    graph: NeighborGraph | None = None,
    linear: bool = False,
) -> SelectionProblem:
    """Normalize profiles and materialize the affinity for one instance.

    H is the min-max normalized hubness score vector. D is the min-max
    normalized LID vector computed over non-degenerate estimates, with
    degenerate entries mapped to 1 (maximal risk). In ``dense`` mode A is
    the full pairwise distance matrix; in ``knn_sparse`` mode only graph
    edges are kept and A is symmetrized by the elementwise maximum.

    Parameters
    ----------
    hub : HubnessProfile
    lid : LidProfile
    m : FeatureMatrix
    metric : {'cosine', 'euclidean'}
    k : int
        Budget. Requires 2 <= k <= n, or 1 <= k <= n with ``linear``.
    mode : {'dense', 'knn_sparse'}
    graph : NeighborGraph, required for ``knn_sparse``
    linear : bool
        Drop the quadratic term (k = 1 fallback).
    """
    _check_metric(metric)
    n = m.n
    if len(hub.scores) != n or len(lid.lids) != n:
        raise ValueError(
            f"profile sizes ({len(hub.scores)}, {len(lid.lids)}) do not match {n} fragments"
        )
    kmin = 1 if linear else 2
    if not (kmin <= k <= n):
        raise ValueError(f"invalid budget k = {k}: need {kmin} <= k <= {n}")

    h = _minmax(np.asarray(hub.scores, dtype=np.float64), "hub score")
    lids = np.asarray(lid.lids, dtype=np.float64)
    deg = np.asarray(lid.degenerate, dtype=bool)
    d_risk = np.ones(n, dtype=np.float64)
    if (~deg).any():
        d_risk[~deg] = _minmax(lids[~deg], "lid risk")
    else:
        warnings.warn("all lid estimates degenerate, risk vector is constant 1")

    if mode == "dense":
        if metric == "cosine":
            check_cosine_rows(m)
        a = cdist(m.values, m.values, metric=metric)
        if metric == "cosine":
            np.clip(a, 0.0, None, out=a)
        np.fill_diagonal(a, 0.0)
    elif mode == "knn_sparse":
        if graph is None:
            raise ValueError("knn_sparse mode requires a neighbor graph")
        if graph.n != n:
            raise ValueError(f"graph covers {graph.n} fragments, expected {n}")
        width = graph.indices.shape[1]
        rows = np.repeat(np.arange(n), width)
        mat = sparse.coo_matrix(
            (graph.distances.ravel(), (rows, graph.indices.ravel())), shape=(n, n)
        ).tocsr()
        a = mat.maximum(mat.T).tocsr()
    else:
        raise ValueError(f"unknown affinity mode '{mode}'")
    return SelectionProblem(h=h, d_risk=d_risk, a=a, k=k, linear=linear)


def _as_vector(y) -> np.ndarray:
    if isinstance(y, IndicatorVector):
        return np.asarray(y.y, dtype=np.float64)
    return np.asarray(y, dtype=np.float64)


def _elem(a, i: int, j: int) -> float:
    return float(a[i, j])


def _row(a, i: int) -> np.ndarray:
    if sparse.issparse(a):
        return a.getrow(i).toarray().ravel()
    return a[i]


def objective(p: SelectionProblem, y) -> float:
    """Objective f(y). No budget check, so perturbed y may be evaluated."""
    v = _as_vector(y)
    val = (float(v @ p.h) - float(v @ p.d_risk)) / p.k
    if not p.linear:
        val += float(v @ (p.a @ v)) / (p.k * (p.k - 1))
    return float(val)


def rewards(p: SelectionProblem, y) -> np.ndarray:
    """Gradient of the objective: r = H/k - D/k + 2Ay / (k (k - 1))."""
    v = _as_vector(y)
    r = (p.h - p.d_risk) / p.k
    if not p.linear:
        r = r + 2.0 * (p.a @ v) / (p.k * (p.k - 1))
    return np.asarray(r, dtype=np.float64)


def reward(p: SelectionProblem, y, i: int) -> float:
    return float(rewards(p, y)[i])


def init_hub_first(p: SelectionProblem) -> IndicatorVector:
    """Indicator of the k largest H entries, ties to the smaller index."""
    order = np.argsort(-p.h, kind="stable")[: p.k]
    y = np.zeros(p.n, dtype=np.float64)
    y[order] = 1.0
    return IndicatorVector(y=y, budget=p.k)


def init_lid_first(p: SelectionProblem) -> IndicatorVector:
    """Indicator of the k smallest D entries, ties to the smaller index."""
    order = np.argsort(p.d_risk, kind="stable")[: p.k]
    y = np.zeros(p.n, dtype=np.float64)
    y[order] = 1.0
    return IndicatorVector(y=y, budget=p.k)


def init_uniform(p: SelectionProblem) -> IndicatorVector:
    return IndicatorVector(y=np.full(p.n, p.k / p.n, dtype=np.float64), budget=p.k)


_INITS = {
    "hub_first": init_hub_first,
    "lid_first": init_lid_first,
    "uniform": init_uniform,
}


def _initial_vector(p: SelectionProblem, cfg: SolverConfig) -> IndicatorVector:
    if isinstance(cfg.init, str):
        try:
            return _INITS[cfg.init](p)
        except KeyError:
            raise ValueError(f"unknown init '{cfg.init}'") from None
    vec = IndicatorVector(y=np.array(cfg.init, dtype=np.float64), budget=p.k)
    if vec.y.shape != (p.n,):
        raise ValueError(f"custom init has shape {vec.y.shape}, expected ({p.n},)")
    vec.validate(tol=1e-9)
    return vec


def solve(p: SelectionProblem, cfg: SolverConfig | None = None):
    """Maximize the selection objective by pairwise mass transfers.

    Every iteration picks the receiver i with the largest reward among
    fragments below 1 and the donor j with the smallest reward among
    fragments above 0 and transfers

        alpha = min(y_j, 1 - y_i, alpha_step)

    between them, which preserves the budget exactly. With the
    ``derived`` step rule alpha_step is the exact 1-D maximizer
    k (k - 1) eta / (-2 sigma) of the objective along the transfer
    direction, where eta = r_i - r_j and sigma = A_ii + A_jj - 2 A_ij;
    when sigma >= 0 the objective is convex along the direction and the
    full box step is taken. The ``paper`` rule uses twice that step,
    which lands on the same objective level it started from; when such a
    step makes no progress and is not box-limited the run stops with
    ``converged = False`` since the update direction cannot improve.

    Returns
    -------
    (IndicatorVector, SolverTrace)
        The KKT residual in the trace is recomputed from scratch at the
        final iterate.
    """
    cfg = cfg or SolverConfig()
    if cfg.step_rule not in ("derived", "paper"):
        raise ValueError(f"unknown step rule '{cfg.step_rule}'")
    tol = cfg.tolerance
    k = p.k
    n = p.n
    max_iter = cfg.max_iterations if cfg.max_iterations is not None else 10 * n

    start = _initial_vector(p, cfg)
    y = start.y.astype(np.float64).copy()
    denom = k * (k - 1) if not p.linear else 1.0

    lin = (p.h - p.d_risk) / k
    if p.linear:
        ay = None
        r = lin.copy()
        f = float(y @ p.h - y @ p.d_risk) / k
    else:
        ay = np.asarray(p.a @ y, dtype=np.float64)
        r = lin + 2.0 * ay / denom
        f = float(y @ p.h - y @ p.d_risk) / k + float(y @ ay) / denom

    objs = [f]
    updates: list[tuple] = []
    drift = abs(float(y.sum()) - k)
    y_lo, y_hi = float(y.min()), float(y.max())
    converged = False

    for _ in range(max_iter):
        recv = y < 1.0 - tol
        don = y > tol
        if not recv.any() or not don.any():
            converged = True
            break
        i = int(np.argmax(np.where(recv, r, -np.inf)))
        j = int(np.argmin(np.where(don, r, np.inf)))
        eta = float(r[i] - r[j])
        if eta <= tol:
            converged = True
            break
        box = min(float(y[j]), 1.0 - float(y[i]))
        if p.linear:
            sigma = 0.0
        else:
            sigma = _elem(p.a, i, i) + _elem(p.a, j, j) - 2.0 * _elem(p.a, i, j)
        if p.linear or sigma >= 0.0:
            alpha = box
        else:
            span = denom * eta / (-sigma)
            step = span / 2.0 if cfg.step_rule == "derived" else span
            alpha = min(box, step)
        gain = eta * alpha + (0.0 if p.linear else sigma * alpha * alpha / denom)
        if gain <= 0.0 and alpha < box:
            # the step lands back on its own level set; no progress is
            # possible along this direction, stop rather than cycle
            break

        # snap to the box exactly so the budget cannot drift
        cap_j = float(y[j])
        cap_i = 1.0 - float(y[i])
        y[j] = 0.0 if alpha >= cap_j else y[j] - alpha
        y[i] = 1.0 if alpha >= cap_i else y[i] + alpha

        if not p.linear:
            rowdiff = _row(p.a, i) - _row(p.a, j)
            ay += alpha * rowdiff
            r += (2.0 * alpha / denom) * rowdiff
        f += gain
        objs.append(f)
        updates.append((eta, j, i, alpha))
        drift = max(drift, abs(float(y.sum()) - k))
        y_lo = min(y_lo, float(y.min()))
        y_hi = max(y_hi, float(y.max()))

    result = IndicatorVector(y=y, budget=k)
    trace = SolverTrace(
        objective_per_iteration=objs,
        iterations=len(updates),
        kkt_residual=kkt_residual(p, result, tol),
        converged=converged,
        updates=updates,
        max_budget_drift=drift,
        y_min=y_lo,
        y_max=y_hi,
    )
    return result, trace


def kkt_residual(p: SelectionProblem, y, tol: float = 1e-9) -> float:
    """Stationarity violation of y for the box-and-budget constraints.

    The multiplier is estimated as the midpoint between the largest
    reward of any fragment below 1 and the smallest reward of any
    fragment above 0. Entries at 0 may not exceed it, entries at 1 may
    not fall below it, interior entries must match it; the residual is
    the largest violation, 0 when either candidate set is empty.
    """
    v = _as_vector(y)
    r = rewards(p, v)
    below = v < 1.0 - tol
    above = v > tol
    if not below.any() or not above.any():
        return 0.0
    lam = 0.5 * (float(r[below].max()) + float(r[above].min()))
    at_zero = v <= tol
    at_one = v >= 1.0 - tol
    interior = ~at_zero & ~at_one
    res = 0.0
    if at_zero.any():
        res = max(res, float((r[at_zero] - lam).max()))
    if at_one.any():
        res = max(res, float((lam - r[at_one]).max()))
    if interior.any():
        res = max(res, float(np.abs(r[interior] - lam).max()))
    return max(0.0, res)


def round_selection(y, p: SelectionProblem) -> list[int]:
    """Indices of the k largest y entries.

    Ties are broken by the higher reward at y, then by the smaller
    index, so rounding is deterministic.
    """
    v = _as_vector(y)
    r = rewards(p, v)
    order = np.lexsort((np.arange(v.size), -r, -v))
    return [int(i) for i in order[: p.k]]


def ranking_order(y, p: SelectionProblem) -> list[int]:
    """All indices by descending y, then descending reward, then index."""
    v = _as_vector(y)
    r = rewards(p, v)
    order = np.lexsort((np.arange(v.size), -r, -v))
    return [int(i) for i in order]


def save_solution(
    path,
    ids: list[str],
    p: SelectionProblem,
    y: IndicatorVector,
    trace: SolverTrace,
    init_label: str,
) -> None:
    """Write the solver result as JSON (fresh objective, selected ids)."""
    selected = round_selection(y, p)
    payload = {
        "k": p.k,
        "init": init_label,
        "iterations": trace.iterations,
        "converged": trace.converged,
        "kkt_residual": trace.kkt_residual,
        "objective": objective(p, y),
        "selected": [ids[i] for i in selected],
        "y": [float(v) for v in y.y],
    }
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


TRACE_HEADER = "iteration,objective,eta,donor,receiver,alpha"


def save_trace(path, trace: SolverTrace) -> None:
    """Write per-iteration rows ``iteration,objective,eta,donor,receiver,alpha``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(TRACE_HEADER + "\n")
        for t, (eta, donor, receiver, alpha) in enumerate(trace.updates, start=1):
            obj = trace.objective_per_iteration[t]
            fh.write(f"{t},{obj!r},{eta!r},{donor},{receiver},{alpha!r}\n")
