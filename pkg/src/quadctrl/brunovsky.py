"""Static state feedback normalizing the linear part to a nilpotent integrator.

Given the linearized pair (H0, b) with controllable space S1 of dimension d,
there is a change of basis R with R b = e_1 that puts the controllable block
of H0 into companion form with characteristic coefficients alpha_1..alpha_d.
The feedback covector beta = R^T alpha (alpha padded by zeros) then makes

    H0 + b beta^T

nilpotent along the Krylov chain of b: (H0 + b beta^T)^d b = 0 exactly.
Every quantity here is rational, so the well-preparedness contract that the
drift/coercivity machinery relies on holds with no tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

from . import ratlin
from .lie_analysis import (
    Classification,
    ControlSystem,
    LieReport,
    build_report,
    classify,
    extract_quadratic_data,
)
from .polyfield import Polynomial, PolyVectorField
from .ratlin import Mat, Vec


@dataclass(frozen=True)
class FeedbackTransform:
    beta: Vec                     # feedback covector, supported on S1
    alpha: Vec                    # characteristic coefficients alpha_1..alpha_d
    R: Mat                        # change of basis, R b = e_1
    H0_new: Mat                   # H0 + b beta^T, nilpotent on the chain of b

    @property
    def is_identity(self) -> bool:
        return all(x == 0 for x in self.beta)


def characteristic_coefficients(report: LieReport) -> Vec:
    """alpha_i of chi(X) = X^d + alpha_1 X^{d-1} + ... + alpha_d for H0 on S1.

    With b_j = (-H0)^j b, writing b_d = sum_j c_j b_j in the Krylov basis
    gives alpha_i = -(-1)^i c_{d-i}.
    """
    d = report.d
    if d == 0:
        return ()
    c = ratlin.coordinates(report.s1_basis, report.b_list[d])
    return tuple(-((-1) ** i) * c[d - i] for i in range(1, d + 1))


def build_transform(report: LieReport) -> FeedbackTransform:
    """Assemble (alpha, R, beta) and the transformed matrix H0 + b beta^T."""
    qd = report.qd
    n, d = report.n, report.d
    if d == 0:
        raise ValueError("b = 0: no controllable direction to normalize")
    alpha = characteristic_coefficients(report)
    # Controller-form chain: v_1 = b, v_{j+1} = H0 v_j + alpha_j b.
    chain: List[Vec] = [qd.b]
    for j in range(d - 1):
        nxt = ratlin.mat_vec(qd.H0, chain[-1])
        chain.append(tuple(x + alpha[j] * bi for x, bi in zip(nxt, qd.b)))
    complement = ratlin.orthogonal_complement(report.s1_basis, n)
    cols = chain + complement
    basis_matrix = ratlin.transpose(ratlin.mat(cols))
    R = ratlin.inverse(basis_matrix)
    alpha_full = tuple(alpha) + tuple(Fraction(0) for _ in range(n - d))
    beta = ratlin.mat_vec(ratlin.transpose(R), alpha_full)
    H0_new = ratlin.mat_add(qd.H0, ratlin.outer(qd.b, beta))
    v = qd.b
    for _ in range(d):
        v = ratlin.mat_vec(H0_new, v)
    if not ratlin.is_zero_vec(v):
        raise AssertionError("feedback failed to nilpotentize the Krylov chain")
    return FeedbackTransform(beta=beta, alpha=alpha, R=R, H0_new=H0_new)


def transform_system(sys: ControlSystem, beta: Vec) -> ControlSystem:
    """Exact substitution u -> v + <beta, x> of the control in the dynamics."""
    n = sys.n
    beta_poly = Polynomial.zero(n)
    for i, c in enumerate(beta):
        beta_poly = beta_poly + Polynomial.variable(n, i).scale(c)
    name = f"{sys.name}|feedback"
    if sys.kind == "affine":
        g0 = PolyVectorField(
            [p0 + beta_poly * p1 for p0, p1 in zip(sys.f0.components, sys.f1.components)]
        )
        return ControlSystem.affine(name, g0, sys.f1)
    subs = Polynomial.control(n) + beta_poly
    g = sys.rhs_field().substitute_u(subs)
    return ControlSystem.nonlinear(name, g)


def prepare(sys: ControlSystem) -> Tuple[ControlSystem, FeedbackTransform, LieReport]:
    """Return a well-prepared equivalent system (H0^d b = 0) and its report."""
    report = build_report(extract_quadratic_data(sys))
    if report.d == 0:
        return sys, FeedbackTransform(
            beta=tuple(Fraction(0) for _ in range(sys.n)),
            alpha=(), R=ratlin.eye(sys.n), H0_new=report.qd.H0,
        ), report
    tr = build_transform(report)
    if tr.is_identity:
        return sys, tr, report
    new_sys = transform_system(sys, tr.beta)
    new_report = build_report(extract_quadratic_data(new_sys))
    return new_sys, tr, new_report


class FeedbackInvarianceError(RuntimeError):
    pass


@dataclass(frozen=True)
class InvarianceReport:
    verdict: str
    k: Optional[int]
    pperp_wk_match: bool


def verify_feedback_invariance(sys: ControlSystem, transformed: ControlSystem) -> InvarianceReport:
    """Same verdict, same k, and identical P^perp W_k on both sides, exactly."""
    rep_a = build_report(extract_quadratic_data(sys))
    rep_b = build_report(extract_quadratic_data(transformed))
    cls_a = classify(sys, rep_a)
    cls_b = classify(transformed, rep_b)
    if cls_a.verdict != cls_b.verdict:
        raise FeedbackInvarianceError(
            f"verdict changed under feedback: {cls_a.verdict} -> {cls_b.verdict}"
        )
    if cls_a.k != cls_b.k:
        raise FeedbackInvarianceError(f"drift order changed under feedback: {cls_a.k} -> {cls_b.k}")
    match = True
    if cls_a.verdict == Classification.VERDICT_DRIFT:
        k = cls_a.k
        wa = rep_a.pperp_apply(rep_a.W_list[k - 1])
        wb = rep_b.pperp_apply(rep_b.W_list[k - 1])
        match = wa == wb
        if not match:
            raise FeedbackInvarianceError(f"P^perp W_k changed under feedback at k={k}")
    return InvarianceReport(verdict=cls_a.verdict, k=cls_a.k, pperp_wk_match=match)
