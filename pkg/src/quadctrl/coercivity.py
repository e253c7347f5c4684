"""Second-order drift form, generalized eigenvalues and the coercivity time.

For a well-prepared drift system of order k the quadratic part of the motion
along the drift direction is

    Q_t(u) = sum_{j} int_0^t u_j(s)^2 w_j(t - s) ds,
    w_j(tau) = <e^{tau H0} G_j(0,0), d_k>,

with G_0(0,0) = d0/2 and G_j(0,0) = -W_j/2 for j >= 1.  Discretizing u by N
piecewise-constant values makes each iterated primitive exact, so Q_t and
the comparison norm |u_k|_{L2}^2 become a symmetric pair (A_t, B_t).

T* is estimated as the first zero crossing of the smallest generalized
eigenvalue.  The sweep restricts to controls whose primitives of order
k+1..d vanish at the final time: those extra traces are what trajectories
competing for a target in S1^perp must satisfy, and this restricted form is
the one whose sign change reproduces the sharp times (Poincare-Wirtinger for
the competing-integrator example).  The unconstrained minimum is also
reported for inspection; it is a lower bound valid for every control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import ratlin
from .brunovsky import prepare
from .lie_analysis import (
    Classification,
    ControlSystem,
    build_report,
    classify,
    extract_quadratic_data,
)


# ---------------------------------------------------------------------------
# matrix exponential


def expm(a: np.ndarray) -> np.ndarray:
    """Scaling-and-squaring with a degree-6 Pade approximant.

    Nilpotent inputs short-circuit to the (exact) truncated power series.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    powers = [np.eye(n), a]
    for _ in range(n - 1):
        powers.append(powers[-1] @ a)
    if np.all(powers[-1] @ a == 0.0):
        out = np.zeros_like(a)
        fact = 1.0
        for m, p in enumerate(powers):
            if m > 0:
                fact *= m
            out += p / fact
        return out
    norm = np.linalg.norm(a, 1)
    s = max(0, int(math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0)
    x = a / (2.0**s)
    b = [1.0, 1 / 2, 5 / 44, 1 / 66, 1 / 792, 1 / 15840, 1 / 665280]
    x2 = x @ x
    u_even = b[6] * x2 @ x2 @ x2 + b[4] * x2 @ x2 + b[2] * x2 + b[0] * np.eye(n)
    u_odd = x @ (b[5] * x2 @ x2 + b[3] * x2 + b[1] * np.eye(n))
    p = u_even + u_odd
    q = u_even - u_odd
    r = np.linalg.solve(q, p)
    for _ in range(s):
        r = r @ r
    return r


# ---------------------------------------------------------------------------
# problem assembly


@dataclass(frozen=True)
class CoercivityProblem:
    """Weights and metadata of the drift quadratic form for one system."""

    name: str
    n: int
    d: int
    k: int
    gamma: int
    d_k: np.ndarray
    H0: np.ndarray
    weight_vectors: Tuple[Tuple[int, np.ndarray], ...]   # (j, G_j(0,0)) for j = max(k,gamma)..d
    was_transformed: bool

    def weight(self, j: int) -> Callable[[np.ndarray], np.ndarray]:
        g = dict(self.weight_vectors)[j]

        def w(tau: np.ndarray) -> np.ndarray:
            tau = np.atleast_1d(np.asarray(tau, dtype=float))
            return np.array([float(expm(t * self.H0) @ g @ self.d_k) for t in tau])

        return w

    @property
    def js(self) -> Tuple[int, ...]:
        return tuple(j for j, _ in self.weight_vectors)


class ManifoldClassRejected(ValueError):
    pass


def build_problem(sys: ControlSystem) -> CoercivityProblem:
    """Classify, feedback-normalize if needed, and collect the drift weights."""
    report = build_report(extract_quadratic_data(sys))
    cls = classify(sys, report)
    if cls.verdict not in (Classification.VERDICT_DRIFT, Classification.VERDICT_DRIFT0):
        raise ManifoldClassRejected(
            f"{sys.name}: coercivity analysis needs a drift-class system, got {cls.verdict}"
        )
    transformed = False
    wp = ratlin.is_zero_vec(ratlin.mat_power_vec(report.qd.H0, report.qd.b, report.d))
    if not wp:
        sys, _, report = prepare(sys)
        cls = classify(sys, report)
        transformed = True
    qd = report.qd
    k = cls.k or 0
    weights: List[Tuple[int, np.ndarray]] = []
    for j in range(max(k, sys.gamma), report.d + 1):
        if j == 0:
            g = tuple(x / 2 for x in qd.d0)
        else:
            g = tuple(-x / 2 for x in report.W_list[j - 1])
        weights.append((j, np.asarray(ratlin.to_float(g))))
    return CoercivityProblem(
        name=sys.name,
        n=sys.n,
        d=report.d,
        k=k,
        gamma=sys.gamma,
        d_k=np.asarray(ratlin.to_float(list(cls.d_k))),
        H0=np.asarray(ratlin.to_float(qd.H0)),
        weight_vectors=tuple(weights),
        was_transformed=transformed,
    )


def quad_nodes(N: int, t: float, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per-cell m-point Gauss-Legendre nodes and weights on [0, t]."""
    x, w = np.polynomial.legendre.leggauss(m)
    ds = t / N
    left = np.arange(N) * ds
    nodes = (left[:, None] + 0.5 * ds * (x[None, :] + 1.0)).ravel()
    weights = np.tile(0.5 * ds * w, N)
    return nodes, weights


def integration_matrix(N: int, t: float, j: int, nodes: Optional[np.ndarray] = None) -> np.ndarray:
    """Exact j-fold cumulative integration of piecewise-constant cell values,
    sampled at the given nodes (cell midpoints by default); lower triangular
    in the one-node-per-cell case."""
    ds = t / N
    if nodes is None:
        nodes = (np.arange(1, N + 1) - 0.5) * ds
    left = np.arange(N) * ds
    right = left + ds
    if j == 0:
        lo = nodes[:, None] > left[None, :]
        hi = nodes[:, None] <= right[None, :]
        return (lo & hi).astype(float)
    a = np.clip(nodes[:, None] - left[None, :], 0.0, None) ** j
    b = np.clip(nodes[:, None] - right[None, :], 0.0, None) ** j
    return (a - b) / math.factorial(j)


def trace_row(N: int, t: float, j: int) -> np.ndarray:
    """Row functional v -> u_j(t) for piecewise-constant cell values."""
    ds = t / N
    left = np.arange(N) * ds
    right = left + ds
    return ((t - left) ** j - (t - right) ** j) / math.factorial(j)


def assemble_forms(problem: CoercivityProblem, t: float, N: int) -> Tuple[np.ndarray, np.ndarray]:
    """Symmetric pair (A_t, B_t): A_t = sum_j M_j^T D_j M_j, B_t = M_k^T D M_k.

    The quadrature nodes are d+1 Gauss points per cell, which integrates
    every u_j(s)^2 exactly (u_j is a piecewise polynomial of degree j <= d).
    With B the exact squared L2 norm of u_k, the discretization is
    conforming: its minimum can only overshoot the continuum constant, so no
    spurious sub-continuum mode can corrupt the eigenvalue or eigenvector.
    """
    nodes, weights = quad_nodes(N, t, problem.d + 1)
    A = np.zeros((N, N))
    for j, g in problem.weight_vectors:
        w = np.array([float(expm(tau * problem.H0) @ g @ problem.d_k) for tau in t - nodes])
        M = integration_matrix(N, t, j, nodes)
        A += M.T @ ((weights * w)[:, None] * M)
    Mk = integration_matrix(N, t, problem.k, nodes)
    B = Mk.T @ (weights[:, None] * Mk)
    return 0.5 * (A + A.T), 0.5 * (B + B.T)


# ---------------------------------------------------------------------------
# generalized eigenvalues


class NotPositiveDefinite(ValueError):
    pass


def lambda_min(A: np.ndarray, B: np.ndarray, return_vector: bool = False):
    """Smallest generalized eigenvalue of (A, B) with B SPD.

    Congruence reduction by the Cholesky factor of B, then a symmetric
    eigensolver on L^-1 A L^-T.
    """
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("B is not symmetric positive definite") from exc
    Y = np.linalg.solve(L, A)
    C = np.linalg.solve(L, Y.T).T
    C = 0.5 * (C + C.T)
    if not return_vector:
        return float(np.linalg.eigvalsh(C)[0])
    vals, vecs = np.linalg.eigh(C)
    v = np.linalg.solve(L.T, vecs[:, 0])
    return float(vals[0]), v


_WHITEN_FLOOR = 1e-12


def _whitened_operator(problem: CoercivityProblem, t: float, N: int) -> Tuple[np.ndarray, np.ndarray]:
    """Whitening of the pair (A, B) with a spectral floor on B.

    For k >= 2 the midpoint-collocated integration matrix M_k is numerically
    singular: there exist wildly oscillating cell vectors whose k-th
    primitive vanishes at every quadrature node, so both forms are blind to
    them.  Directions of B below a relative floor are exactly these
    quadrature artifacts and are projected out before the congruence.
    Returns (C, W) with C = W^T A W and the columns of W mapping the reduced
    coordinates back to cell values (W^T B W = I).
    """
    A, B = assemble_forms(problem, t, N)
    vals, vecs = np.linalg.eigh(B)
    keep = vals > _WHITEN_FLOOR * vals[-1]
    W = vecs[:, keep] / np.sqrt(vals[keep])
    C = W.T @ A @ W
    return 0.5 * (C + C.T), W


def lambda_min_constrained(problem: CoercivityProblem, t: float, N: int,
                           return_vector: bool = False):
    """Smallest eigenvalue of the drift form over the trace-constrained controls.

    The minimization restricts to controls whose primitives u_j vanish at the
    final time for k < j <= d (no constraint when k = d): these extra final
    traces are what a trajectory competing for a target in S1^perp must
    satisfy, and the restricted form is the one whose sign change marks the
    coercivity time.
    """
    C, W = _whitened_operator(problem, t, N)
    rows = [trace_row(N, t, j) @ W for j in range(problem.k + 1, problem.d + 1)]
    if rows:
        R = np.vstack(rows)
        _, s, vt = np.linalg.svd(R, full_matrices=True)
        nkeep = int(np.sum(s > 1e-12 * s[0])) if len(s) else 0
        Z = vt[nkeep:].T
        C = Z.T @ C @ Z
        C = 0.5 * (C + C.T)
    if not return_vector:
        return float(np.linalg.eigvalsh(C)[0])
    vals, vecs = np.linalg.eigh(C)
    y = vecs[:, 0]
    if rows:
        y = Z @ y
    return float(vals[0]), W @ y


def lambda_min_unconstrained(problem: CoercivityProblem, t: float, N: int) -> float:
    """Lower bound valid for every control: min of the form over all of R^N."""
    C, _ = _whitened_operator(problem, t, N)
    return float(np.linalg.eigvalsh(C)[0])


# ---------------------------------------------------------------------------
# coercivity time


@dataclass(frozen=True)
class CoercivityReport:
    problem: CoercivityProblem
    status: str                       # crossing_found | no_crossing_up_to_Tmax
    tstar_est: Optional[float]
    tstar_err: Optional[float]
    grid_N: int
    T_max: float
    sweep_t: Tuple[float, ...]
    sweep_lambda: Tuple[float, ...]           # constrained form (used for T*)
    sweep_lambda_lower: Tuple[float, ...]     # unconstrained lower bound
    crossings: Tuple[float, ...]

    STATUS_CROSSING = "crossing_found"
    STATUS_NO_CROSSING = "no_crossing_up_to_Tmax"


def _first_crossings(ts: np.ndarray, vals: np.ndarray) -> List[Tuple[float, float]]:
    out = []
    for i in range(1, len(ts)):
        if vals[i - 1] > 0.0 >= vals[i]:
            out.append((ts[i - 1], ts[i]))
    return out


def _bisect_crossing(fn: Callable[[float], float], lo: float, hi: float, width: float) -> float:
    flo = fn(lo)
    for _ in range(200):
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if (flo > 0.0) == (fmid > 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def estimate_tstar(
    problem: CoercivityProblem,
    T_max: float,
    N: int,
    sweep_points: int = 48,
) -> CoercivityReport:
    """Sweep lambda_min(t) up to T_max; bisect the first sign change.

    The grid is refined once (N doubled) to report a discretization error
    estimate.  Multiple crossings are reported, not resolved.
    """
    ts = np.linspace(T_max / sweep_points, T_max, sweep_points)
    lam_con = np.array([lambda_min_constrained(problem, t, N) for t in ts])
    lam_unc = np.array([lambda_min_unconstrained(problem, t, N) for t in ts])
    brackets = _first_crossings(ts, lam_con)
    if not brackets:
        return CoercivityReport(
            problem=problem, status=CoercivityReport.STATUS_NO_CROSSING,
            tstar_est=None, tstar_err=None, grid_N=N, T_max=T_max,
            sweep_t=tuple(float(t) for t in ts),
            sweep_lambda=tuple(float(v) for v in lam_con),
            sweep_lambda_lower=tuple(float(v) for v in lam_unc),
            crossings=(),
        )
    width = T_max / 1000.0
    crossings = [
        _bisect_crossing(lambda t: lambda_min_constrained(problem, t, N), lo, hi, width)
        for lo, hi in brackets
    ]
    t_coarse = crossings[0]
    lo, hi = brackets[0]
    # the refined-grid crossing can drift slightly outside the coarse bracket
    pad = hi - lo
    fn_fine = lambda t: lambda_min_constrained(problem, t, 2 * N)
    flo, fhi = fn_fine(lo), fn_fine(hi)
    if flo <= 0.0:
        lo = max(lo - pad, T_max / 1e6)
    if fhi > 0.0:
        hi = min(hi + pad, T_max)
    t_fine = _bisect_crossing(fn_fine, lo, hi, width)
    return CoercivityReport(
        problem=problem, status=CoercivityReport.STATUS_CROSSING,
        tstar_est=float(t_coarse), tstar_err=float(abs(t_fine - t_coarse)),
        grid_N=N, T_max=T_max,
        sweep_t=tuple(float(t) for t in ts),
        sweep_lambda=tuple(float(v) for v in lam_con),
        sweep_lambda_lower=tuple(float(v) for v in lam_unc),
        crossings=tuple(float(c) for c in crossings),
    )
