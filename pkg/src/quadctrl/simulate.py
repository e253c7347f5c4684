"""Fixed-step integration, control-signal calculus and drift experiments.

Controls are sampled on uniform grids and interpreted as their piecewise
linear interpolants; primitives integrate that interpolant exactly
(cumulative trapezoid).  Trajectories come from classical RK4 with the
control interpolated at stage times, which keeps every experiment
deterministic and reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import ratlin
from .lie_analysis import Classification, ControlSystem
from .manifold import QuadraticManifold, _FieldEvaluator
from .polyfield import PolyVectorField, lie_bracket

BLOWUP_GUARD = 1e6

_trapz = getattr(np, "trapezoid", np.trapz)


class DivergenceError(RuntimeError):
    def __init__(self, escape_time: float):
        self.escape_time = escape_time
        super().__init__(f"state norm exceeded {BLOWUP_GUARD:g} at t = {escape_time:.6g}")


# ---------------------------------------------------------------------------
# control signals


@dataclass(frozen=True)
class ControlSignal:
    """Uniformly sampled control, interpreted as its piecewise-linear interpolant.

    Builtin families carry their analytic evaluator in `fn`; stage-time
    lookups then bypass the interpolation error, which matters for clean
    integrator-order checks.  Sample-level calculus (primitives, norms)
    always works on the stored values.
    """

    t: np.ndarray
    values: np.ndarray
    provenance: str = "array"
    fn: Optional[Callable] = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or len(t) < 2:
            raise ValueError("control needs matching 1-d time and value arrays")
        steps = np.diff(t)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("control grid must be uniform and strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __call__(self, s):
        if self.fn is not None:
            return self.fn(s)
        return np.interp(s, self.t, self.values)

    @classmethod
    def from_callable(cls, fn: Callable, T: float, N: int, provenance: str = "callable") -> "ControlSignal":
        t = np.linspace(0.0, T, N + 1)
        vals = np.asarray([fn(ti) for ti in t], dtype=float)
        return cls(t=t, values=vals, provenance=provenance, fn=np.vectorize(fn, otypes=[float]))

    @classmethod
    def from_samples(cls, t, values, provenance: str = "array") -> "ControlSignal":
        return cls(t=np.asarray(t, float), values=np.asarray(values, float), provenance=provenance)

    @classmethod
    def zero(cls, T: float, N: int = 256) -> "ControlSignal":
        return cls(t=np.linspace(0.0, T, N + 1), values=np.zeros(N + 1), provenance="zero")

    @classmethod
    def sinusoid(cls, T: float, freq: float, amp: float, N: int = 1000) -> "ControlSignal":
        t = np.linspace(0.0, T, N + 1)
        return cls(t=t, values=amp * np.sin(freq * t),
                   provenance=f"sinusoid({freq},{amp})",
                   fn=lambda s: amp * np.sin(freq * np.asarray(s, dtype=float)))

    def scaled(self, c: float) -> "ControlSignal":
        fn = None if self.fn is None else (lambda s, _f=self.fn, _c=c: _c * _f(s))
        return ControlSignal(t=self.t, values=c * self.values, provenance=self.provenance, fn=fn)


def primitives(u: ControlSignal, j: int) -> ControlSignal:
    """j-fold iterated primitive with vanishing initial values, u_j(0) = 0.

    Each integration step is the exact integral of the piecewise-linear
    interpolant of the previous samples (cumulative trapezoid).
    """
    if j < 0:
        raise ValueError("primitive order must be nonnegative")
    v = u.values
    dt = u.dt
    for _ in range(j):
        v = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * dt)])
    return ControlSignal(t=u.t, values=v, provenance=f"{u.provenance}|primitive")


@dataclass(frozen=True)
class NormReport:
    l1: float
    l2: float
    l3: float
    linf: float
    w_minf: Tuple[float, ...]    # W^{m,inf} for m = 0..m_max
    h_neg: Tuple[float, ...]     # H^{-k} = L2 of u_k for k = 1..k_max

    def as_dict(self) -> Dict[str, object]:
        return {
            "L1": self.l1, "L2": self.l2, "L3": self.l3, "Linf": self.linf,
            "W_m_inf": list(self.w_minf),
            "H_neg": list(self.h_neg),
        }


def _lp(u: ControlSignal, p: int) -> float:
    return float(_trapz(np.abs(u.values) ** p, u.t) ** (1.0 / p))


def norms(u: ControlSignal, m_max: int = 1, k_max: int = 2) -> NormReport:
    """Quadrature norms of u plus grid finite-difference Sobolev norms."""
    if m_max < 0:
        raise ValueError("m_max must be nonnegative")
    if len(u.t) < 2 * m_max + 1:
        raise ValueError(f"grid too coarse for W^{{{m_max},inf}}: need {2 * m_max + 1} points")
    sup = [float(np.max(np.abs(u.values)))]
    dv = u.values
    for _ in range(m_max):
        dv = np.gradient(dv, u.dt)
        sup.append(float(np.max(np.abs(dv))))
    w = tuple(max(sup[: m + 1]) for m in range(m_max + 1))
    h = tuple(_lp(primitives(u, k), 2) for k in range(1, k_max + 1))
    return NormReport(
        l1=_lp(u, 1), l2=_lp(u, 2), l3=_lp(u, 3),
        linf=sup[0], w_minf=w, h_neg=h,
    )


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    states: np.ndarray           # shape (len(t), n)
    control: ControlSignal
    dt: float
    method: str = "rk4"

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def final(self) -> np.ndarray:
        return self.states[-1]


def rk4_path(rhs: Callable, x0: np.ndarray, T: float, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """Classical RK4 over [0, T]; returns (times, states); guards blowup."""
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("dt must divide the horizon")
    n = len(x0)
    out = np.empty((steps + 1, n))
    out[0] = x0
    x = np.asarray(x0, dtype=float)
    t = 0.0
    for i in range(steps):
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = rhs(t + dt, x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP_GUARD:
            raise DivergenceError(t)
        out[i + 1] = x
    return np.linspace(0.0, T, steps + 1), out


def _system_rhs(sys: ControlSystem) -> Callable:
    if sys.f is not None:
        n = sys.n
        evals = []
        for p in sys.f.components:
            exps = np.array([px for (px, _) in p.terms.keys()], dtype=np.int64).reshape(-1, n)
            pus = np.array([pu for (_, pu) in p.terms.keys()], dtype=np.int64)
            coefs = np.array([float(c) for c in p.terms.values()])
            evals.append((exps, pus, coefs))

        def rhs_nl(x, uv):
            out = np.empty(n)
            for i, (exps, pus, coefs) in enumerate(evals):
                if len(coefs) == 0:
                    out[i] = 0.0
                else:
                    out[i] = np.dot(np.prod(x[None, :] ** exps, axis=1) * uv**pus, coefs)
            return out

        return rhs_nl
    f0 = _FieldEvaluator(sys.f0)
    f1 = _FieldEvaluator(sys.f1)
    return lambda x, uv: f0(x) + uv * f1(x)


def integrate(sys: ControlSystem, x0: Sequence, u: ControlSignal, dt: float) -> Trajectory:
    """RK4 trajectory of the system under the interpolated control."""
    ratio = u.dt / dt
    inv = dt / u.dt
    if abs(ratio - round(ratio)) > 1e-9 and abs(inv - round(inv)) > 1e-9:
        raise ValueError("dt must divide the control step or vice versa")
    rhs_xu = _system_rhs(sys)

    def rhs(t, x):
        return rhs_xu(x, float(u(t)))

    x0 = np.asarray(ratlin.to_float(list(x0)), dtype=float)
    ts, xs = rk4_path(rhs, x0, u.T, dt)
    return Trajectory(t=ts, states=xs, control=u, dt=dt)


# ---------------------------------------------------------------------------
# auxiliary states xi_j


def auxiliary_fields(sys: ControlSystem, j: int) -> List[PolyVectorField]:
    """f_1 .. f_j with f_l = (-1)^{l-1} ad^{l-1}_{f0}(f1)."""
    out = []
    current = sys.f1
    for l in range(1, j + 1):
        out.append(current if l % 2 == 1 else current.scale(-1))
        if l < j:
            current = lie_bracket(sys.f0, current)
    return out


def auxiliary_state(sys: ControlSystem, traj: Trajectory, u: ControlSignal, j: int,
                    substeps: int = 16) -> np.ndarray:
    """Sampled xi_j path: successive flow corrections xi_{l+1} = phi_{l+1}(-u_{l+1}, xi_l).

    Each flow map is an RK4 integration of dp/dtau = f_{l+1}(p) over the
    pseudo-time -u_{l+1}(t) with at least `substeps` steps.
    """
    if j < 1:
        raise ValueError("auxiliary order must be at least 1")
    fields = [
        _FieldEvaluator(f) for f in auxiliary_fields(sys, j)
    ]
    prims = [primitives(u, l) for l in range(1, j + 1)]
    out = np.empty_like(traj.states)
    for idx, t in enumerate(traj.t):
        p = traj.states[idx].copy()
        for l in range(j):
            tau = -float(prims[l](t))
            p = _flow(fields[l], p, tau, substeps)
        out[idx] = p
    return out


def _flow(fev: _FieldEvaluator, p: np.ndarray, tau: float, substeps: int) -> np.ndarray:
    if tau == 0.0:
        return p
    nsub = max(substeps, int(math.ceil(abs(tau) / 0.1)))
    h = tau / nsub
    x = p
    for _ in range(nsub):
        k1 = fev(x)
        k2 = fev(x + 0.5 * h * k1)
        k3 = fev(x + 0.5 * h * k2)
        k4 = fev(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP_GUARD:
            raise DivergenceError(tau)
    return x


# ---------------------------------------------------------------------------
# drift and scaling experiments


def drift_series(
    traj: Trajectory,
    classification: Classification,
    manifold: QuadraticManifold,
) -> np.ndarray:
    """Time series <Pperp x(t) - G2(P x(t)), d_k> along a trajectory."""
    if classification.d_k is None:
        raise ValueError("drift series needs a drift-class verdict")
    pperp = np.asarray(ratlin.to_float(manifold.Pperp))
    g2f = manifold.g2_float()
    residual = traj.states @ pperp.T - g2f(traj.states)
    dk = np.asarray(ratlin.to_float(list(classification.d_k)))
    return residual @ dk


def drift_check(
    sys: ControlSystem,
    classification: Classification,
    manifold: QuadraticManifold,
    u: ControlSignal,
    dt: float,
) -> Tuple[Trajectory, np.ndarray, float]:
    """Integrate from the origin and return (trajectory, series, min over t)."""
    traj = integrate(sys, [0.0] * sys.n, u, dt)
    series = drift_series(traj, classification, manifold)
    return traj, series, float(series.min())


def manifold_residual_sup(traj: Trajectory, manifold: QuadraticManifold) -> float:
    pperp = np.asarray(ratlin.to_float(manifold.Pperp))
    g2f = manifold.g2_float()
    residual = traj.states @ pperp.T - g2f(traj.states)
    return float(np.max(np.linalg.norm(residual, axis=1)))


def tol_cubic(amplitude: float) -> float:
    """Acceptance slack for the drift inequality: the remainder is O(|u|^3)."""
    return 10.0 * amplitude**3


@dataclass(frozen=True)
class ScalingReport:
    epsilons: Tuple[float, ...]
    drift_final: Tuple[float, ...]
    residual_sup: Tuple[float, ...]
    drift_slope: Optional[float]
    residual_slope: Optional[float]

    def rows(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.epsilons, self.drift_final, self.residual_sup))


def scaling_csv(report: "ScalingReport") -> str:
    """CSV rows `epsilon,drift_final,residual_sup`, full double precision."""
    lines = ["epsilon,drift_final,residual_sup"]
    for e, d, r in report.rows():
        lines.append(f"{e:.17g},{d:.17g},{r:.17g}")
    return "\n".join(lines) + "\n"


def _loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    pairs = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 1e-300]
    if len(pairs) < 3:
        return None
    lx = np.log([p[0] for p in pairs])
    ly = np.log([p[1] for p in pairs])
    return float(np.polyfit(lx, ly, 1)[0])


def scaling_study(
    sys: ControlSystem,
    base_control: ControlSignal,
    amplitudes: Sequence[float],
    manifold: QuadraticManifold,
    classification: Classification,
    dt: float = 1e-3,
) -> ScalingReport:
    """Amplitude sweep; log-log slopes of the drift and of the manifold residual."""
    if len(amplitudes) < 3:
        raise ValueError("scaling regression needs at least 3 amplitudes")
    drift_vals: List[float] = []
    resid_vals: List[float] = []
    for eps in amplitudes:
        traj = integrate(sys, [0.0] * sys.n, base_control.scaled(eps), dt)
        resid_vals.append(manifold_residual_sup(traj, manifold))
        if classification.d_k is not None:
            series = drift_series(traj, classification, manifold)
            drift_vals.append(abs(float(series[-1])))
        else:
            drift_vals.append(0.0)
    return ScalingReport(
        epsilons=tuple(amplitudes),
        drift_final=tuple(drift_vals),
        residual_sup=tuple(resid_vals),
        drift_slope=_loglog_slope(amplitudes, drift_vals),
        residual_slope=_loglog_slope(amplitudes, resid_vals),
    )


# ---------------------------------------------------------------------------
# smooth bump family (with exact derivative recursion)


def _bump_derivative_polys(order: int) -> List[Tuple[np.ndarray, int]]:
    """Coefficients for B^(m) = B * A_m / (s(1-s))^(2m) on (0,1).

    A_{m+1} = A_1 A_m + A_m' D - m A_m D' with D = (s(1-s))^2, A_1 = 1 - 2s.
    Polynomial coefficients are kept in numpy's ascending-power convention.
    """
    P = np.polynomial.polynomial
    D = P.polypow([0.0, 1.0, -1.0], 2)   # (s - s^2)^2
    Dp = P.polyder(D)
    A1 = np.array([1.0, -2.0])
    out: List[Tuple[np.ndarray, int]] = [(np.array([1.0]), 0)]
    for m in range(order):
        Am, _ = out[-1]
        nxt = P.polyadd(P.polymul(A1, Am), P.polymul(P.polyder(Am), D))
        nxt = P.polysub(nxt, m * P.polymul(Am, Dp))
        out.append((nxt, m + 1))
    return out


def bump_profile(s: np.ndarray, order: int = 0) -> np.ndarray:
    """exp(-1/(s(1-s))) on (0,1) (zero outside), or its order-th derivative."""
    s = np.asarray(s, dtype=float)
    inside = (s > 0.0) & (s < 1.0)
    out = np.zeros_like(s)
    si = s[inside]
    base = np.exp(-1.0 / (si * (1.0 - si)))
    if order == 0:
        out[inside] = base
        return out
    Am, m = _bump_derivative_polys(order)[-1]
    denom = (si * (1.0 - si)) ** (2 * m)
    out[inside] = base * np.polynomial.polynomial.polyval(si, Am) / denom
    return out


def bump_family(
    T: float,
    support: Tuple[float, float],
    amplitude: float = 1.0,
    N: int = 1000,
    derivative_order: int = 0,
) -> ControlSignal:
    """C-infinity bump (or derivative-of-bump) control supported inside (0, T).

    derivative_order >= 1 gives zero-mean variants whose first primitives
    vanish at T along with the control.
    """
    a, b = support
    if not (0.0 <= a < b <= T):
        raise ValueError("empty or reversed support")
    width = b - a
    t = np.linspace(0.0, T, N + 1)
    s = (t - a) / width
    vals = bump_profile(s, derivative_order) / width**derivative_order
    peak = np.max(np.abs(vals))
    if peak == 0.0:
        raise ValueError("support does not intersect the grid")
    scale = amplitude / peak

    def fn(tau, _a=a, _w=width, _m=derivative_order, _s=scale):
        sigma = (np.asarray(tau, dtype=float) - _a) / _w
        return _s * bump_profile(sigma, _m) / _w**_m

    return ControlSignal(
        t=t, values=scale * vals,
        provenance=f"bump({a},{b},{amplitude},d{derivative_order})",
        fn=fn,
    )


def skewed_profile(order: int = 0, skew: float = 2.0):
    """phi(s) = B(s)(1 + skew*s) and derivatives: a compact bump with
    nonvanishing odd-power integrals, used by the dilatation experiments."""

    def prof(s: np.ndarray, m: int = order) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        total = np.zeros_like(s)
        # Leibniz: (B * p)^(m) = sum_i C(m,i) B^(i) p^(m-i), p linear
        for i in range(m + 1):
            binom = math.comb(m, i)
            if m - i == 0:
                total += binom * bump_profile(s, i) * (1.0 + skew * s)
            elif m - i == 1:
                total += binom * bump_profile(s, i) * skew
        return total

    return prof


@dataclass(frozen=True)
class DilatationReport:
    lam: float
    mus: Tuple[float, ...]
    quad_integrals: Tuple[float, ...]      # int u_k^2
    cubic_integrals: Tuple[float, ...]     # int u_1^3   (u_1 = phi^{(k-1)} dilated)
    quad_expected: Tuple[float, ...]       # lam^2 / mu
    cubic_expected: Tuple[float, ...]      # a lam^3 mu^{3k-4}
    final_states: Tuple[float, ...]        # x_{k+1}(T) along the sweep
    a_value: float


def dilatation_study(
    sys: ControlSystem,
    k: int,
    lam: float,
    mus: Sequence[float],
    T: float = 1.0,
    N: int = 40000,
    dt: float = 5e-5,
) -> DilatationReport:
    """Time-dilatation sweep u = (d^k/dt^k)[lam * phi(mu t)] on an integrator chain.

    Checks the exact scalings int phi_{lam,mu}^2 = lam^2/mu and
    int (phi^{(k-1)}_{lam,mu})^3 = a lam^3 mu^{3k-4}, and records the sign of
    the drifting component x_{k+1}(T).
    """
    prof0 = skewed_profile(0)
    grid = np.linspace(0.0, 1.0, 200001)
    phi_sq = _trapz(prof0(grid) ** 2, grid)
    scale = 1.0 / math.sqrt(phi_sq)          # normalize int phi^2 = 1
    prof_km1 = skewed_profile(k - 1)
    prof_k = skewed_profile(k)
    a_value = float(_trapz((scale * prof_km1(grid)) ** 3, grid))
    quad, cubic, quad_exp, cubic_exp, finals = [], [], [], [], []
    for mu in mus:
        if 1.0 / mu > T:
            raise ValueError("profile support (0, 1/mu) must fit in the horizon")
        t = np.linspace(0.0, T, N + 1)
        u_vals = lam * (mu**k) * scale * prof_k(mu * t)
        u = ControlSignal(t=t, values=u_vals, provenance=f"dilatation(k={k},{lam},{mu})")
        uk = lam * scale * prof0(mu * t)
        u1 = lam * (mu ** (k - 1)) * scale * prof_km1(mu * t)
        quad.append(float(_trapz(uk**2, t)))
        cubic.append(float(_trapz(u1**3, t)))
        quad_exp.append(lam**2 / mu)
        cubic_exp.append(a_value * lam**3 * mu ** (3 * k - 4))
        traj = integrate(sys, [0.0] * sys.n, u, dt)
        finals.append(float(traj.states[-1, k]))
    return DilatationReport(
        lam=lam, mus=tuple(mus),
        quad_integrals=tuple(quad), cubic_integrals=tuple(cubic),
        quad_expected=tuple(quad_exp), cubic_expected=tuple(cubic_exp),
        final_states=tuple(finals), a_value=a_value,
    )
