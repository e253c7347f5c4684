"""Shared generators and independent numeric oracles for the test suite."""

from __future__ import annotations

import random
from fractions import Fraction

import numpy as np
import pytest

from quadctrl.polyfield import Polynomial, PolyVectorField


def random_polynomial(rng: random.Random, n: int, degree: int, terms: int = 4,
                      with_u: bool = False, no_constant: bool = False) -> Polynomial:
    """Sparse random polynomial with small integer-ish rational coefficients."""
    out = {}
    for _ in range(terms):
        total = rng.randint(1 if no_constant else 0, degree)
        px = [0] * n
        for _ in range(total):
            px[rng.randrange(n)] += 1
        pu = 0
        if with_u and rng.random() < 0.3:
            pu = rng.randint(1, 2)
            px_sum = sum(px)
            if px_sum + pu > degree:
                pu = max(0, degree - px_sum)
        c = Fraction(rng.randint(-3, 3), rng.randint(1, 3))
        if c == 0:
            continue
        key = (tuple(px), pu)
        out[key] = out.get(key, Fraction(0)) + c
    return Polynomial(n, out)


def random_field(rng: random.Random, n: int, degree: int = 3, terms: int = 3,
                 no_constant: bool = False) -> PolyVectorField:
    return PolyVectorField(
        [random_polynomial(rng, n, degree, terms, no_constant=no_constant) for _ in range(n)]
    )


def random_point(rng: random.Random, n: int, span: int = 2) -> list:
    return [Fraction(rng.randint(-span, span), rng.randint(1, 3)) for _ in range(n)]


# -- independent numeric oracles --------------------------------------------


def horner_evaluate(poly: Polynomial, x, u=None):
    """Independent evaluation: recursive Horner in the first state variable."""
    if not poly.terms:
        return Fraction(0)
    n = poly.n

    def eval_rec(terms, var):
        if var == n:
            acc = Fraction(0)
            for (px, pu), c in terms.items():
                acc += c * (u ** pu if pu else 1)
            return acc
        max_e = max(px[var] for (px, _) in terms)
        acc = Fraction(0)
        for e in range(max_e, -1, -1):
            sub = {k: c for k, c in terms.items() if k[0][var] == e}
            acc = acc * x[var]
            if sub:
                acc += eval_rec(sub, var + 1)
        return acc

    return eval_rec(poly.terms, 0)


def fd_jacobian(field: PolyVectorField, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference Jacobian of a state field at a float point."""
    n = field.n
    out = np.zeros((n, n))
    for j in range(n):
        xp = x.copy(); xp[j] += step
        xm = x.copy(); xm[j] -= step
        fp = np.array([float(v) for v in field.evaluate(list(xp))])
        fm = np.array([float(v) for v in field.evaluate(list(xm))])
        out[:, j] = (fp - fm) / (2 * step)
    return out


def fd_bracket(X: PolyVectorField, Y: PolyVectorField, x: np.ndarray) -> np.ndarray:
    """[X, Y](x) from finite-difference Jacobians: Y'(x) X(x) - X'(x) Y(x)."""
    fx = np.array([float(v) for v in X.evaluate(list(x))])
    fy = np.array([float(v) for v in Y.evaluate(list(x))])
    return fd_jacobian(Y, x) @ fx - fd_jacobian(X, x) @ fy


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240901)


@pytest.fixture
def nprng() -> np.random.Generator:
    return np.random.default_rng(20240901)
