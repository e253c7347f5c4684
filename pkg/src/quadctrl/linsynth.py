"""Controllability Gramian, smoothed Gramian and HUM steering controls.

The steering control for the linearization y' = H0 y + u b is

    u(t) = rho_eps(t) b^T e^{(T-t) H0^T} p,
    p = C_{T,eps}^{-1} (x_dagger - e^{T H0} x_star),

with C_{T,eps} the (smoothed) Gramian.  rho_eps is a C-infinity plateau
supported in [eps, T-eps], equal to 1 on [2 eps, T-2 eps]; eps = 0 means
rho = 1.  The Gramian is singular exactly when the Kalman rank condition
fails, in which case synthesis refuses and reports the missing directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .coercivity import expm
from .simulate import ControlSignal, bump_profile, rk4_path

COND_THRESHOLD = 1e10


class SingularGramian(RuntimeError):
    def __init__(self, missing_directions: np.ndarray):
        self.missing_directions = missing_directions
        dirs = "; ".join(str(list(np.round(v, 6))) for v in missing_directions)
        super().__init__(
            "Kalman rank condition fails: the Gramian is singular. "
            f"Unreachable directions (S1 orthogonal complement): {dirs}"
        )


@dataclass(frozen=True)
class GramianData:
    T: float
    eps: float
    matrix: np.ndarray
    n_quad: int

    @property
    def invertible(self) -> bool:
        return float(np.linalg.cond(self.matrix)) < COND_THRESHOLD


def smooth_plateau(T: float, eps: float) -> Callable[[np.ndarray], np.ndarray]:
    """C-infinity cutoff: 0 outside [eps, T-eps], 1 on [2 eps, T-2 eps]."""
    if eps == 0.0:
        return lambda t: np.ones_like(np.asarray(t, dtype=float))
    if eps < 0 or 2 * eps >= T:
        raise ValueError("need 0 <= 2 eps < T")
    grid = np.linspace(0.0, 1.0, 2001)
    bump_vals = bump_profile(grid)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (bump_vals[1:] + bump_vals[:-1]))])
    cdf /= cdf[-1]

    def step(s: np.ndarray) -> np.ndarray:
        return np.interp(np.clip(s, 0.0, 1.0), grid, cdf)

    def rho(t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        rise = step((t - eps) / eps)
        fall = step((T - eps - t) / eps)
        return rise * fall

    return rho


def missing_directions(H0: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the Krylov span."""
    n = H0.shape[0]
    cols = [b]
    for _ in range(n - 1):
        cols.append(H0 @ cols[-1])
    K = np.column_stack(cols)
    u, s, _ = np.linalg.svd(K)
    tol = max(K.shape) * np.finfo(float).eps * (s[0] if len(s) else 0.0)
    rank = int(np.sum(s > tol))
    return u[:, rank:].T


def gramian(H0, b, T: float, eps: float = 0.0, n_quad: int = 2048) -> GramianData:
    """Composite-Simpson quadrature of rho_eps(t) e^{(T-t)H0} b b^T e^{(T-t)H0^T}."""
    if T <= 0:
        raise ValueError("horizon must be positive")
    if eps < 0 or 2 * eps >= T:
        raise ValueError("need 0 <= 2 eps < T")
    H0 = np.asarray(H0, dtype=float)
    b = np.asarray(b, dtype=float)
    if n_quad % 2:
        n_quad += 1
    ts = np.linspace(0.0, T, n_quad + 1)
    rho = smooth_plateau(T, eps)
    weights = np.ones(n_quad + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    weights *= (T / n_quad) / 3.0
    rvals = rho(ts)
    n = H0.shape[0]
    acc = np.zeros((n, n))
    for t, w, r in zip(ts, weights, rvals):
        if r == 0.0 or w == 0.0:
            continue
        g = expm((T - t) * H0) @ b
        acc += (w * r) * np.outer(g, g)
    return GramianData(T=T, eps=eps, matrix=0.5 * (acc + acc.T), n_quad=n_quad)


def hum_control(
    H0,
    b,
    x_star,
    x_dagger,
    T: float,
    eps: float = 0.0,
    N: int = 4096,
    gram: Optional[GramianData] = None,
) -> ControlSignal:
    """Minimum-energy steering control for the linearized system."""
    H0 = np.asarray(H0, dtype=float)
    b = np.asarray(b, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    x_dagger = np.asarray(x_dagger, dtype=float)
    if gram is None:
        gram = gramian(H0, b, T, eps)
    if not gram.invertible:
        raise SingularGramian(missing_directions(H0, b))
    p = np.linalg.solve(gram.matrix, x_dagger - expm(T * H0) @ x_star)
    rho = smooth_plateau(T, eps)
    ts = np.linspace(0.0, T, N + 1)
    vals = np.array([float(rho(t) * (b @ expm((T - t) * H0.T) @ p)) for t in ts])
    return ControlSignal(t=ts, values=vals, provenance=f"hum(T={T},eps={eps})")


def verify_steering(H0, b, u: ControlSignal, x_star, x_dagger) -> float:
    """Re-integrate y' = H0 y + u b from x_star and return |y(T) - x_dagger|."""
    H0 = np.asarray(H0, dtype=float)
    b = np.asarray(b, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    x_dagger = np.asarray(x_dagger, dtype=float)

    def rhs(t, y):
        return H0 @ y + float(u(t)) * b

    _, ys = rk4_path(rhs, x_star, u.T, u.dt)
    return float(np.linalg.norm(ys[-1] - x_dagger))


def duhamel_endpoint(H0, b, u: ControlSignal, x_star) -> np.ndarray:
    """Independent endpoint via the variation-of-constants formula (Simpson)."""
    H0 = np.asarray(H0, dtype=float)
    b = np.asarray(b, dtype=float)
    T = u.T
    N = len(u.t) - 1
    if N % 2:
        raise ValueError("Simpson endpoint check needs an even sample count")
    weights = np.ones(N + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    weights *= (T / N) / 3.0
    acc = expm(T * H0) @ np.asarray(x_star, dtype=float)
    for t, w, uv in zip(u.t, weights, u.values):
        acc = acc + w * uv * (expm((T - t) * H0) @ b)
    return acc


@dataclass(frozen=True)
class NonlinearSteeringResult:
    control: ControlSignal
    residual: float
    iterations: int
    converged: bool


def steer_nonlinear(sys, x_star, x_dagger, T: float, eps: float = 0.0,
                    dt: float = 1e-3, max_iter: int = 20, tol: float = 1e-8) -> NonlinearSteeringResult:
    """Fixed-point steering demo: repeatedly correct the endpoint error with
    a linear HUM control.  Not a guaranteed algorithm; kept for exploration."""
    from . import ratlin
    from .lie_analysis import extract_quadratic_data
    from .simulate import integrate

    qd = extract_quadratic_data(sys)
    H0 = np.asarray(ratlin.to_float(qd.H0))
    b = np.asarray(ratlin.to_float(list(qd.b)))
    N = max(64, int(round(T / dt)))
    u = hum_control(H0, b, x_star, x_dagger, T, eps, N=N)
    last_residual = np.inf
    for it in range(1, max_iter + 1):
        traj = integrate(sys, x_star, u, dt)
        r = traj.final() - np.asarray(x_dagger, dtype=float)
        last_residual = float(np.linalg.norm(r))
        if last_residual < tol:
            return NonlinearSteeringResult(u, last_residual, it, True)
        du = hum_control(H0, b, np.zeros(sys.n), -r, T, eps, N=N)
        u = ControlSignal(t=u.t, values=u.values + du.values, provenance="hum-fixed-point")
    return NonlinearSteeringResult(u, last_residual, max_iter, False)
