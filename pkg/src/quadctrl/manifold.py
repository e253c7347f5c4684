"""Quadratic manifold M2, its residual polynomial and the homogeneous model.

M2 is the graph over S1 of the quadratic map

    G2(p) = 1/2 sum_i P_i(p)^2 Pperp(L_i b_i) + sum_{i<j} P_i(p) P_j(p) Pperp(L_i b_j)

where P_i are the exact coordinates along the Krylov basis (b_0..b_{d-1}).
Q(x) = Pperp x - G2(P x) vanishes exactly on M2 by construction.  In the
no-drift case (S2 inside S1) the cross coefficients are symmetric and Q
agrees with the symmetric double-sum convention; the homogeneous zeta-system
then evolves exactly on M2: d/dt Q(zeta) = Pperp H0 Q(zeta).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import ratlin
from .lie_analysis import Classification, LieReport
from .polyfield import Polynomial, PolyVectorField
from .ratlin import Mat, Vec


@dataclass(frozen=True)
class QuadraticManifold:
    d: int
    basis: Tuple[Vec, ...]            # (b_0 .. b_{d-1})
    dual: Tuple[Vec, ...]             # coordinate functionals P_i as row vectors
    diag_coeffs: Tuple[Vec, ...]      # 1/2 Pperp(L_i b_i)
    cross_coeffs: Tuple[Tuple[int, int, Vec], ...]  # (i, j, Pperp(L_i b_j)), i < j
    Pperp: Mat

    @property
    def n(self) -> int:
        return len(self.Pperp)

    def g2(self, coords: Sequence) -> Vec:
        """G2 evaluated at coordinates alpha_0..alpha_{d-1} (exact on Fractions)."""
        n = self.n
        exact = all(isinstance(c, (int, Fraction)) for c in coords)
        out = [Fraction(0)] * n if exact else [0.0] * n
        for i in range(self.d):
            ci = coords[i]
            for t, g in enumerate(self.diag_coeffs[i]):
                out[t] += ci * ci * (g if exact else float(g))
        for (i, j, g) in self.cross_coeffs:
            cij = coords[i] * coords[j]
            for t, gv in enumerate(g):
                out[t] += cij * (gv if exact else float(gv))
        return tuple(out)

    def coordinates(self, x: Sequence) -> Tuple:
        exact = all(isinstance(v, (int, Fraction)) for v in x)
        if exact:
            return tuple(sum((r * v for r, v in zip(row, x)), Fraction(0)) for row in self.dual)
        xf = np.asarray(x, dtype=float)
        return tuple(float(np.dot(np.asarray(ratlin.to_float(row)), xf)) for row in self.dual)

    def q_residual(self, x: Sequence) -> Tuple:
        """Q(x) = Pperp x - G2(coordinates of P x); exact on rational input."""
        coords = self.coordinates(x)
        g = self.g2(coords)
        exact = all(isinstance(v, (int, Fraction)) for v in x)
        if exact:
            px = ratlin.mat_vec(self.Pperp, x)
            return tuple(a - b for a, b in zip(px, g))
        pp = np.asarray(ratlin.to_float(self.Pperp))
        return tuple(np.asarray(pp @ np.asarray(x, dtype=float)) - np.asarray(g, dtype=float))

    def q_polynomial(self) -> PolyVectorField:
        """Q as an exact degree-2 polynomial field in the state variables."""
        n = self.n
        coord_polys = [
            sum(
                (Polynomial.variable(n, t).scale(c) for t, c in enumerate(row)),
                Polynomial.zero(n),
            )
            for row in self.dual
        ]
        comps: List[Polynomial] = []
        for t in range(n):
            p = sum(
                (Polynomial.variable(n, s).scale(self.Pperp[t][s]) for s in range(n)),
                Polynomial.zero(n),
            )
            for i in range(self.d):
                p = p - (coord_polys[i] * coord_polys[i]).scale(self.diag_coeffs[i][t])
            for (i, j, g) in self.cross_coeffs:
                p = p - (coord_polys[i] * coord_polys[j]).scale(g[t])
            comps.append(p)
        return PolyVectorField(comps)

    def g2_float(self) -> Callable[[np.ndarray], np.ndarray]:
        """Vectorized float evaluator of x -> G2(P x) for trajectory sampling."""
        dual = np.asarray(ratlin.to_float(self.dual)) if self.d else np.zeros((0, self.n))
        diag = np.asarray([ratlin.to_float(v) for v in self.diag_coeffs]) if self.d else np.zeros((0, self.n))
        cross = [(i, j, np.asarray(ratlin.to_float(g))) for (i, j, g) in self.cross_coeffs]

        def evaluate(x: np.ndarray) -> np.ndarray:
            x = np.atleast_2d(np.asarray(x, dtype=float))
            coords = x @ dual.T if self.d else np.zeros((x.shape[0], 0))
            out = np.zeros((x.shape[0], self.n))
            for i in range(self.d):
                out += (coords[:, i] ** 2)[:, None] * diag[i][None, :]
            for (i, j, g) in cross:
                out += (coords[:, i] * coords[:, j])[:, None] * g[None, :]
            return out

        return evaluate


def build_m2(report: LieReport) -> QuadraticManifold:
    """Exact G2 coefficients and residual data from the Lie report."""
    if report.d < 1:
        raise ValueError("the manifold construction needs d >= 1")
    d = report.d
    diag = []
    cross = []
    for i in range(d):
        li_bi = ratlin.mat_vec(report.L_list[i], report.b_list[i])
        diag.append(tuple(x / 2 for x in report.pperp_apply(li_bi)))
        for j in range(i + 1, d):
            li_bj = ratlin.mat_vec(report.L_list[i], report.b_list[j])
            cross.append((i, j, report.pperp_apply(li_bj)))
    return QuadraticManifold(
        d=d,
        basis=report.s1_basis,
        dual=report.dual,
        diag_coeffs=tuple(diag),
        cross_coeffs=tuple(cross),
        Pperp=report.Pperp,
    )


@dataclass(frozen=True)
class HomogeneousSystem:
    """Second-order homogeneous model: zeta' = g0(zeta) + u g1(zeta) + u^2/2 * drift."""

    g0: PolyVectorField
    g1: PolyVectorField
    drift_term: Vec                # Pperp d0
    well_prepared: bool


def _linear_field(m: Mat) -> PolyVectorField:
    return PolyVectorField.from_linear(m)


def build_homogeneous(report: LieReport) -> HomogeneousSystem:
    """g0 = (H0 P + Pperp H0) zeta + Pperp Q0(P zeta, P zeta); g1 = b + Pperp H1 P zeta."""
    qd = report.qd
    n = qd.n
    lin0 = ratlin.mat_add(ratlin.mat_mul(qd.H0, report.P), ratlin.mat_mul(report.Pperp, qd.H0))
    g0 = _linear_field(lin0)
    # quadratic part: component t gets  zeta^T (P^T Qeff[t] P) zeta
    quad_comps: List[Polynomial] = []
    for t in range(n):
        qeff = ratlin.zeros(n, n)
        for c in range(n):
            if qd.Q0[c] and report.Pperp[t][c] != 0:
                qeff = ratlin.mat_add(qeff, ratlin.mat_scale(qd.Q0[c], report.Pperp[t][c]))
        m = ratlin.mat_mul(ratlin.transpose(report.P), ratlin.mat_mul(qeff, report.P))
        p = Polynomial.zero(n)
        for a in range(n):
            for bcol in range(n):
                if m[a][bcol] != 0:
                    p = p + (Polynomial.variable(n, a) * Polynomial.variable(n, bcol)).scale(m[a][bcol])
        quad_comps.append(p)
    g0 = g0 + PolyVectorField(quad_comps)
    lin1 = ratlin.mat_mul(report.Pperp, ratlin.mat_mul(qd.H1, report.P))
    g1 = PolyVectorField.constant(qd.b) + _linear_field(lin1)
    drift = report.pperp_apply(qd.d0)
    wp = ratlin.is_zero_vec(ratlin.mat_power_vec(qd.H0, qd.b, report.d))
    return HomogeneousSystem(g0=g0, g1=g1, drift_term=drift, well_prepared=wp)


@dataclass(frozen=True)
class ZetaBracketReport:
    checked: int
    max_order: int


def verify_zeta_brackets(hs: HomogeneousSystem, report: LieReport, Kmax: Optional[int] = None) -> ZetaBracketReport:
    """Symbolic identities: ad^k_{g0}(g1) = b_k + Pperp L_k P zeta and
    [ad^k, ad^j](zeta) = Pperp(L_j b_k - L_k b_j), constants in zeta."""
    from .polyfield import ad_power, lie_bracket

    n = report.n
    if Kmax is None:
        Kmax = n
    Kmax = min(Kmax, len(report.L_list) - 1)
    ads = [ad_power(hs.g0, hs.g1, k) for k in range(Kmax + 1)]
    checked = 0
    for k in range(Kmax + 1):
        expected = PolyVectorField.constant(report.b_list[k]) + _linear_field(
            ratlin.mat_mul(report.Pperp, ratlin.mat_mul(report.L_list[k], report.P))
        )
        if ads[k] != expected:
            raise AssertionError(f"ad^{k} of the homogeneous pair is not b_k + Pperp L_k P")
        checked += 1
    for k in range(Kmax + 1):
        for j in range(Kmax + 1):
            br = lie_bracket(ads[k], ads[j])
            val = ratlin.mat_vec(report.Pperp, [
                x - y
                for x, y in zip(
                    ratlin.mat_vec(report.L_list[j], report.b_list[k]),
                    ratlin.mat_vec(report.L_list[k], report.b_list[j]),
                )
            ])
            if br != PolyVectorField.constant(val):
                raise AssertionError(f"[ad^{k}, ad^{j}] is not the constant Pperp(L_j b_k - L_k b_j)")
            checked += 1
    return ZetaBracketReport(checked=checked, max_order=Kmax)


class DriftClassRejected(ValueError):
    pass


def invariance_experiment(
    hs: HomogeneousSystem,
    manifold: QuadraticManifold,
    classification: Classification,
    u,
    dt: float,
    zeta0: Optional[Sequence] = None,
) -> float:
    """Integrate the zeta-system and return sup_t |Q(zeta(t))|.

    Requires an InvariantManifold verdict: the exact conservation of Q along
    the homogeneous flow is derived from the symmetry Pperp L_j b_k =
    Pperp L_k b_j, which drift-class systems violate.
    """
    from .simulate import rk4_path

    if classification.verdict != Classification.VERDICT_MANIFOLD:
        raise DriftClassRejected(
            f"invariance experiment needs an InvariantManifold system, got {classification.verdict}"
        )
    n = manifold.n
    g0f = _FieldEvaluator(hs.g0)
    g1f = _FieldEvaluator(hs.g1)
    drift = np.asarray(ratlin.to_float(hs.drift_term))

    def rhs(t, x):
        uv = u(t)
        return g0f(x) + uv * g1f(x) + 0.5 * uv * uv * drift

    z0 = np.zeros(n) if zeta0 is None else np.asarray(ratlin.to_float(list(zeta0)), dtype=float)
    ts, zs = rk4_path(rhs, z0, u.T, dt)
    pperp = np.asarray(ratlin.to_float(manifold.Pperp))
    g2f = manifold.g2_float()
    residual = zs @ pperp.T - g2f(zs)
    return float(np.max(np.linalg.norm(residual, axis=1)))


class _FieldEvaluator:
    """Compiled float evaluator for a polynomial vector field (state-only)."""

    def __init__(self, field: PolyVectorField):
        self.n = field.n
        comps = []
        for p in field.components:
            if p.uses_control:
                raise ValueError("float evaluator expects state-only fields")
            exps = np.array([px for (px, _) in p.terms.keys()], dtype=np.int64).reshape(-1, self.n)
            coefs = np.array([float(c) for c in p.terms.values()])
            comps.append((exps, coefs))
        self.comps = comps

    def __call__(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(self.n)
        for i, (exps, coefs) in enumerate(self.comps):
            if len(coefs) == 0:
                out[i] = 0.0
            else:
                out[i] = np.dot(np.prod(x[None, :] ** exps, axis=1), coefs)
        return out
