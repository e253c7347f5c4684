"""Quadratic data, Lie spaces S1/S2 and the classification trichotomy.

The analysis works entirely from four exact objects extracted at the origin:

    H0 = Jacobian of the drift, b = value of the control field,
    H1 = Jacobian of the control field, Q0 = half the drift Hessian,
    d0 = second control derivative (zero for control-affine systems).

From these, b_k = (-H0)^k b spans S1 (the controllable space of the
linearization) and the operators L_k obtained by the recursion

    L_0 = H1,   L_{k+1} = L_k H0 - H0 L_k - 2 Q0(b_k, .)

give every length-(2k+1) bracket value [ad^k f1, ad^j f1](0) = L_j b_k - L_k b_j.
All rank and membership decisions are exact (rational arithmetic), so the
reported verdict cannot flip under rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from . import ratlin
from .polyfield import (
    Polynomial,
    PolyVectorField,
    ad_power,
    lie_bracket,
)
from .ratlin import Mat, Vec


class NotAtEquilibrium(ValueError):
    pass


@dataclass(frozen=True)
class ControlSystem:
    """A named scalar-input system with its equilibrium at the origin.

    kind records the input shape ("affine" or "nonlinear"); gamma and q are
    the estimate bookkeeping flags: gamma = 1 and q = 1 when the dynamics is
    affine in the control, gamma = 0 and q = inf otherwise.
    """

    name: str
    n: int
    kind: str
    f0: PolyVectorField
    f1: PolyVectorField
    f: Optional[PolyVectorField] = None
    gamma: int = 1
    q: float = 1.0

    @classmethod
    def affine(cls, name: str, f0: PolyVectorField, f1: PolyVectorField) -> "ControlSystem":
        if f0.uses_control or f1.uses_control:
            raise ValueError("affine systems take pure state fields f0, f1")
        _require_equilibrium(f0)
        return cls(name=name, n=f0.n, kind="affine", f0=f0, f1=f1, gamma=1, q=1.0)

    @classmethod
    def nonlinear(cls, name: str, f: PolyVectorField) -> "ControlSystem":
        n = f.n
        zero_u = Polynomial.zero(n)
        f0 = f.substitute_u(zero_u)
        f1 = PolyVectorField([p.diff_u() for p in f.components]).substitute_u(zero_u)
        _require_equilibrium(f0)
        affine_in_u = max(pu for p in f.components for (_, pu) in p.terms) <= 1 if any(
            p.terms for p in f.components
        ) else True
        gamma = 1 if affine_in_u else 0
        return cls(
            name=name, n=n, kind="nonlinear", f0=f0, f1=f1, f=f,
            gamma=gamma, q=1.0 if gamma == 1 else float("inf"),
        )

    def rhs_field(self) -> PolyVectorField:
        """The full control-dependent field f(x, u)."""
        if self.f is not None:
            return self.f
        u = Polynomial.control(self.n)
        return PolyVectorField(
            [p0 + u * p1 for p0, p1 in zip(self.f0.components, self.f1.components)]
        )


def _require_equilibrium(f0: PolyVectorField):
    res = f0.evaluate([Fraction(0)] * f0.n)
    if any(r != 0 for r in res):
        raise NotAtEquilibrium(f"f(0,0) = {res} != 0; translate the system first")


@dataclass(frozen=True)
class QuadraticData:
    H0: Mat
    b: Vec
    H1: Mat
    Q0: Tuple[Mat, ...]  # Q0[i] is the symmetric matrix of component i
    d0: Vec

    @property
    def n(self) -> int:
        return len(self.b)

    def q0_apply(self, h: Sequence, g: Sequence) -> Vec:
        return tuple(
            ratlin.dot(h, ratlin.mat_vec(qi, g)) for qi in self.Q0
        )

    def q0_partial(self, h: Sequence) -> Mat:
        """Matrix of the linear map g -> Q0(h, g)."""
        return tuple(ratlin.mat_vec(qi, h) for qi in self.Q0)


def extract_quadratic_data(sys: ControlSystem) -> QuadraticData:
    """Exact (H0, b, H1, Q0, d0) of the system at the origin."""
    n = sys.n
    origin = [Fraction(0)] * n
    jac0 = sys.f0.jacobian()
    H0 = ratlin.mat([[jac0[i][j].evaluate(origin) for j in range(n)] for i in range(n)])
    b = ratlin.vec(sys.f1.evaluate(origin))
    jac1 = sys.f1.jacobian()
    H1 = ratlin.mat([[jac1[i][j].evaluate(origin) for j in range(n)] for i in range(n)])
    Q0 = []
    for comp in sys.f0.components:
        m = [[Fraction(0)] * n for _ in range(n)]
        for (px, pu), c in comp.terms.items():
            if pu != 0 or sum(px) != 2:
                continue
            idx = [i for i, e in enumerate(px) for _ in range(e)]
            j, k = idx[0], idx[1]
            if j == k:
                m[j][j] += c
            else:
                m[j][k] += c / 2
                m[k][j] += c / 2
        Q0.append(ratlin.mat(m))
    if sys.f is not None:
        zero_u = Polynomial.zero(n)
        d2 = PolyVectorField(
            [p.diff_u().diff_u() for p in sys.f.components]
        ).substitute_u(zero_u)
        d0 = ratlin.vec(d2.evaluate(origin))
    else:
        d0 = ratlin.vec([0] * n)
    return QuadraticData(H0=H0, b=b, H1=H1, Q0=tuple(Q0), d0=d0)


@dataclass(frozen=True)
class LieReport:
    """Krylov vectors, bracket operators and the S1 projection data."""

    qd: QuadraticData
    b_list: Tuple[Vec, ...]       # b_0 .. b_K
    L_list: Tuple[Mat, ...]       # L_0 .. L_K
    W_list: Tuple[Vec, ...]       # W_1 .. W_K, W_k = L_k b_{k-1} - L_{k-1} b_k
    s1_basis: Tuple[Vec, ...]     # (b_0 .. b_{d-1})
    d: int
    P: Mat
    Pperp: Mat
    dual: Tuple[Vec, ...]         # rows give coordinates along the Krylov basis

    @property
    def n(self) -> int:
        return self.qd.n

    @property
    def kalman(self) -> bool:
        return self.d == self.n

    def in_s1(self, v: Sequence) -> bool:
        return ratlin.in_span(self.s1_basis, v)

    def pperp_apply(self, v: Sequence) -> Vec:
        return ratlin.mat_vec(self.Pperp, v)

    def coordinates(self, v: Sequence) -> Vec:
        """Coordinates of P v along (b_0 .. b_{d-1})."""
        return tuple(ratlin.dot(row, v) for row in self.dual)


def compute_Lk(qd: QuadraticData, K: int) -> List[Mat]:
    """L_0 .. L_K by the exact recursion L_{k+1} = L_k H0 - H0 L_k - 2 Q0(b_k, .)."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    b_k = qd.b
    out = [qd.H1]
    for _ in range(K):
        Lk = out[-1]
        nxt = ratlin.mat_sub(
            ratlin.mat_sub(ratlin.mat_mul(Lk, qd.H0), ratlin.mat_mul(qd.H0, Lk)),
            ratlin.mat_scale(qd.q0_partial(b_k), Fraction(2)),
        )
        out.append(nxt)
        b_k = ratlin.mat_vec(qd.H0, b_k)
        b_k = tuple(-x for x in b_k)
    return out


def compute_s1(qd: QuadraticData, K: Optional[int] = None) -> Tuple[Tuple[Vec, ...], Tuple[Vec, ...], int]:
    """Krylov vectors b_k = (-H0)^k b and the first independent ones.

    Returns (b_list up to K, basis, d).  The basis is (b_0 .. b_{d-1}): for a
    Krylov sequence the first dependent vector closes the span, so taking the
    leading d vectors in index order is canonical.
    """
    n = qd.n
    if K is None:
        K = 2 * n
    b_list = [qd.b]
    for _ in range(K):
        nxt = ratlin.mat_vec(qd.H0, b_list[-1])
        b_list.append(tuple(-x for x in nxt))
    basis: List[Vec] = []
    for v in b_list[:n]:
        if not ratlin.in_span(basis, v):
            basis.append(v)
        else:
            break
    return tuple(b_list), tuple(basis), len(basis)


def build_report(qd: QuadraticData, K: Optional[int] = None) -> LieReport:
    n = qd.n
    if K is None:
        K = 2 * n
    b_list, basis, d = compute_s1(qd, K)
    L_list = tuple(compute_Lk(qd, K))
    W_list = tuple(
        tuple(
            x - y
            for x, y in zip(
                ratlin.mat_vec(L_list[k], b_list[k - 1]),
                ratlin.mat_vec(L_list[k - 1], b_list[k]),
            )
        )
        for k in range(1, K + 1)
    )
    P = ratlin.gram_projector(basis, n)
    Pperp = ratlin.mat_sub(ratlin.eye(n), P)
    if d:
        b_rows = tuple(basis)
        gram_inv = ratlin.inverse(ratlin.mat_mul(b_rows, ratlin.transpose(b_rows)))
        dual = ratlin.mat_mul(gram_inv, b_rows)
    else:
        dual = ()
    return LieReport(
        qd=qd, b_list=b_list, L_list=L_list, W_list=W_list,
        s1_basis=basis, d=d, P=P, Pperp=Pperp, dual=dual,
    )


def second_order_bracket(report: LieReport, k: int, j: int) -> Vec:
    """[ad^k f1, ad^j f1](0) = L_j b_k - L_k b_j, exact."""
    if k < 0 or j < 0:
        raise ValueError("bracket orders must be nonnegative")
    needed = max(k, j)
    if needed >= len(report.L_list):
        raise ValueError(f"report holds operators up to order {len(report.L_list) - 1}")
    lhs = ratlin.mat_vec(report.L_list[j], report.b_list[k])
    rhs = ratlin.mat_vec(report.L_list[k], report.b_list[j])
    return tuple(a - b for a, b in zip(lhs, rhs))


def compute_s2(report: LieReport, Kmax: Optional[int] = None) -> Tuple[Vec, ...]:
    """Truncated basis of span{(-H0)^i (L_j b_k - L_k b_j)}.

    The full generating set ranges over all of N^3; the classification itself
    never relies on this truncation (the k-scan in classify() is complete),
    so Kmax is a reporting knob, default 2n.
    """
    n = report.n
    if Kmax is None:
        Kmax = 2 * n
    if Kmax < n:
        raise ValueError("Kmax must be at least the ambient dimension")
    Kmax = min(Kmax, len(report.b_list) - 1)
    basis: List[Vec] = []
    for j in range(Kmax + 1):
        for k in range(j):
            gen = second_order_bracket(report, k, j)
            if ratlin.is_zero_vec(gen):
                continue
            v = gen
            for _ in range(n):
                if not ratlin.in_span(basis, v):
                    basis.append(v)
                v = tuple(-x for x in ratlin.mat_vec(report.qd.H0, v))
    return tuple(basis)


@dataclass(frozen=True)
class Classification:
    """Outcome of the quadratic alternative for one system."""

    verdict: str                      # linear | drift0 | drift | manifold
    d: int
    k: Optional[int] = None           # drift order (0 for the d0 case)
    d_k: Optional[Vec] = None         # drifting direction (unnormalized)
    d0: Optional[Vec] = None
    s2_in_s1: Optional[bool] = None
    gamma: int = 1
    smallness: str = ""

    VERDICT_LINEAR = "LinearlyControllable"
    VERDICT_MANIFOLD = "InvariantManifold"
    VERDICT_DRIFT0 = "DriftOrderZero"
    VERDICT_DRIFT = "Drift"


def _sobolev_label(m: int) -> str:
    return f"W^{{{m},inf}}"


def _smallness_message(verdict: str, k: Optional[int], gamma: int) -> str:
    if verdict == Classification.VERDICT_LINEAR:
        return "linear test holds: smoothly small-time locally controllable"
    if verdict == Classification.VERDICT_DRIFT0:
        return "order-0 drift along d0; holds for controls small in L^inf"
    if verdict == Classification.VERDICT_DRIFT:
        m = 2 * k - 3 * gamma
        return (
            f"quadratic drift of order k={k}; denies {_sobolev_label(m)}-STLC "
            f"(controls small in {_sobolev_label(m)} with vanishing traces)"
        )
    m = -gamma
    return (
        "no quadratic obstruction: state confined to the invariant manifold up to "
        f"cubic error for controls small in {_sobolev_label(m)}"
    )


def classify(sys: ControlSystem, report: Optional[LieReport] = None) -> Classification:
    """Quadratic alternative: linear test / order-0 drift / drift order k / manifold.

    The drift scan looks for the smallest k in 1..d with
    W_k = L_k b_{k-1} - L_{k-1} b_k outside S1; by the bracket algebra this
    scan is complete (no violating k <= d means S2 is contained in S1).
    """
    if report is None:
        report = build_report(extract_quadratic_data(sys))
    qd = report.qd
    if report.kalman:
        verdict = Classification.VERDICT_LINEAR
        return Classification(
            verdict=verdict, d=report.d, d0=qd.d0, gamma=sys.gamma,
            smallness=_smallness_message(verdict, None, sys.gamma),
        )
    if sys.gamma == 0 and not report.in_s1(qd.d0):
        verdict = Classification.VERDICT_DRIFT0
        return Classification(
            verdict=verdict, d=report.d, k=0,
            d_k=report.pperp_apply(qd.d0), d0=qd.d0, gamma=sys.gamma,
            s2_in_s1=None,
            smallness=_smallness_message(verdict, 0, sys.gamma),
        )
    for k in range(1, report.d + 1):
        w_k = report.W_list[k - 1]
        if not report.in_s1(w_k):
            d_k = tuple(-x for x in report.pperp_apply(w_k))
            verdict = Classification.VERDICT_DRIFT
            return Classification(
                verdict=verdict, d=report.d, k=k, d_k=d_k, d0=qd.d0,
                gamma=sys.gamma, s2_in_s1=False,
                smallness=_smallness_message(verdict, k, sys.gamma),
            )
    verdict = Classification.VERDICT_MANIFOLD
    return Classification(
        verdict=verdict, d=report.d, d0=qd.d0, gamma=sys.gamma, s2_in_s1=True,
        smallness=_smallness_message(verdict, None, sys.gamma),
    )


class KrenerInconsistency(RuntimeError):
    def __init__(self, pair, message):
        self.pair = pair
        super().__init__(f"bracket identity failed at {pair}: {message}")


@dataclass(frozen=True)
class KrenerReport:
    k: int
    low_pairs_checked: int
    signs: Tuple[int, ...]     # sign of P^perp[ad^l, ad^{2k-1-l}](0) against P^perp W_k
    independent: bool


def krener_checks(report: LieReport, k: int) -> KrenerReport:
    """Cross-check the bracket algebra around a Drift(k) verdict.

    (1) every [ad^a, ad^b](0) with a+b <= 2k-2 lies in S1;
    (2) every [ad^l, ad^{2k-1-l}](0) lies outside S1 with P^perp part equal to
        +/- P^perp W_k (the sign pattern is recorded, not asserted);
    (3) (b_0 .. b_{k-1}) is linearly independent.
    """
    if k < 1:
        raise ValueError("krener checks apply to drift orders k >= 1")
    low = 0
    for a in range(2 * k - 1):
        for b in range(a + 1, 2 * k - 1 - a):
            if a + b > 2 * k - 2:
                continue
            v = second_order_bracket(report, a, b)
            if not report.in_s1(v):
                raise KrenerInconsistency((a, b), "expected a bracket inside S1")
            low += 1
    w_perp = report.pperp_apply(report.W_list[k - 1])
    signs: List[int] = []
    for l in range(2 * k):
        v = second_order_bracket(report, l, 2 * k - 1 - l)
        if report.in_s1(v):
            raise KrenerInconsistency((l, 2 * k - 1 - l), "expected a bracket outside S1")
        v_perp = report.pperp_apply(v)
        if v_perp == w_perp:
            signs.append(1)
        elif v_perp == tuple(-x for x in w_perp):
            signs.append(-1)
        else:
            raise KrenerInconsistency(
                (l, 2 * k - 1 - l), "P^perp part is not +/- P^perp W_k"
            )
    indep = ratlin.rank(tuple(report.b_list[:k])) == k
    if not indep:
        raise KrenerInconsistency(("b_0..b_{k-1}",), "Krylov prefix is dependent")
    return KrenerReport(k=k, low_pairs_checked=low, signs=tuple(signs), independent=indep)


def symbolic_ad_power(sys: ControlSystem, k: int) -> PolyVectorField:
    """ad^k_{f0}(f1) computed from the polynomial fields (oracle route)."""
    return ad_power(sys.f0, sys.f1, k)


def symbolic_second_order_bracket(sys: ControlSystem, k: int, j: int) -> Vec:
    """[ad^k f1, ad^j f1](0) via explicit polynomial brackets (oracle route)."""
    x0 = [Fraction(0)] * sys.n
    br = lie_bracket(symbolic_ad_power(sys, k), symbolic_ad_power(sys, j))
    return ratlin.vec(br.evaluate(x0))
