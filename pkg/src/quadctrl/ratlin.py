"""Small exact linear-algebra toolbox over the rationals.

Vectors are tuples of Fractions, matrices tuples of row tuples.  Everything
here is Gaussian elimination at heart; sizes are tiny (n <= a few dozen), so
clarity beats asymptotics.  These routines back every rank / membership /
projection decision that must not depend on floating-point tolerances.
"""

from __future__ import annotations

from fractions import Fraction
from typing import List, Sequence, Tuple

Vec = Tuple[Fraction, ...]
Mat = Tuple[Vec, ...]


def vec(values: Sequence) -> Vec:
    return tuple(Fraction(v) if not isinstance(v, Fraction) else v for v in values)


def mat(rows: Sequence[Sequence]) -> Mat:
    return tuple(vec(r) for r in rows)


def zeros(r: int, c: int) -> Mat:
    return tuple(tuple(Fraction(0) for _ in range(c)) for _ in range(r))


def eye(n: int) -> Mat:
    return tuple(
        tuple(Fraction(1 if i == j else 0) for j in range(n)) for i in range(n)
    )


def shape(m: Mat) -> Tuple[int, int]:
    return len(m), len(m[0]) if m else 0


def transpose(m: Mat) -> Mat:
    return tuple(zip(*m)) if m else ()


def mat_vec(m: Mat, v: Sequence) -> Vec:
    return tuple(sum((a * b for a, b in zip(row, v)), Fraction(0)) for row in m)


def mat_mul(a: Mat, b: Mat) -> Mat:
    bt = transpose(b)
    return tuple(
        tuple(sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt)
        for row in a
    )


def mat_add(a: Mat, b: Mat) -> Mat:
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_sub(a: Mat, b: Mat) -> Mat:
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_scale(a: Mat, c: Fraction) -> Mat:
    return tuple(tuple(c * x for x in row) for row in a)


def outer(u: Sequence, v: Sequence) -> Mat:
    return tuple(tuple(Fraction(a) * Fraction(b) for b in v) for a in u)


def dot(u: Sequence, v: Sequence) -> Fraction:
    return sum((Fraction(a) * Fraction(b) for a, b in zip(u, v)), Fraction(0))


def is_zero_vec(v: Sequence) -> bool:
    return all(x == 0 for x in v)


def _rref(rows: List[List[Fraction]]) -> Tuple[List[List[Fraction]], List[int]]:
    """In-place reduced row echelon form; returns (rows, pivot column list)."""
    nrows = len(rows)
    ncols = len(rows[0]) if rows else 0
    pivots: List[int] = []
    r = 0
    for c in range(ncols):
        pivot = next((i for i in range(r, nrows) if rows[i][c] != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [x * inv for x in rows[r]]
        for i in range(nrows):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return rows, pivots


def rank(m: Mat) -> int:
    if not m:
        return 0
    _, pivots = _rref([list(row) for row in m])
    return len(pivots)


def rank_of_columns(cols: Sequence[Sequence]) -> int:
    return rank(tuple(vec(c) for c in cols))  # row rank == column rank


def in_span(basis: Sequence[Sequence], v: Sequence) -> bool:
    """Exact membership of v in the span of the given vectors."""
    basis = [b for b in basis if not is_zero_vec(b)]
    if is_zero_vec(v):
        return True
    if not basis:
        return False
    r0 = rank(tuple(vec(b) for b in basis))
    r1 = rank(tuple(vec(b) for b in basis) + (vec(v),))
    return r0 == r1


def solve(a: Mat, b: Sequence) -> Vec:
    """Solve a x = b for square invertible a; raises on singular input."""
    n = len(a)
    aug = [list(row) + [Fraction(bi)] for row, bi in zip(a, vec(b))]
    rows, pivots = _rref(aug)
    if len(pivots) < n or pivots != list(range(n)):
        raise ValueError("singular matrix")
    return tuple(rows[i][n] for i in range(n))


def inverse(a: Mat) -> Mat:
    n = len(a)
    aug = [list(row) + [Fraction(1 if i == j else 0) for j in range(n)] for i, row in enumerate(a)]
    rows, pivots = _rref(aug)
    if len(pivots) < n or pivots[:n] != list(range(n)):
        raise ValueError("singular matrix")
    return tuple(tuple(rows[i][n:]) for i in range(n))


def coordinates(basis: Sequence[Sequence], v: Sequence) -> Vec:
    """Coefficients c with sum_i c_i basis_i = v; basis must be independent."""
    if not basis:
        if is_zero_vec(v):
            return ()
        raise ValueError("vector is not in the span of the basis")
    b_rows = tuple(vec(b) for b in basis)
    gram = mat_mul(b_rows, transpose(b_rows))
    rhs = mat_vec(b_rows, v)
    c = solve(gram, rhs)
    recon = [Fraction(0)] * len(v)
    for ci, b in zip(c, b_rows):
        recon = [r + ci * x for r, x in zip(recon, b)]
    if any(r != x for r, x in zip(recon, vec(v))):
        raise ValueError("vector is not in the span of the basis")
    return c


def gram_projector(basis: Sequence[Sequence], n: int) -> Mat:
    """Orthogonal projector onto span(basis), P = B (B^T B)^-1 B^T, exact."""
    basis = [vec(b) for b in basis if not is_zero_vec(b)]
    if not basis:
        return zeros(n, n)
    b_rows = tuple(basis)  # rows are the basis vectors, i.e. this is B^T
    gram = mat_mul(b_rows, transpose(b_rows))
    ginv = inverse(gram)
    return mat_mul(transpose(b_rows), mat_mul(ginv, b_rows))


def orthogonal_complement(basis: Sequence[Sequence], n: int) -> List[Vec]:
    """Exact orthogonal basis of span(basis)^perp via Gram-Schmidt on e_i."""
    p = gram_projector(basis, n)
    comp: List[Vec] = []
    for i in range(n):
        e = [Fraction(1 if j == i else 0) for j in range(n)]
        w = [Fraction(e[j]) - sum(p[j][k] * e[k] for k in range(n)) for j in range(n)]
        for prev in comp:
            coef = dot(w, prev) / dot(prev, prev)
            w = [a - coef * b for a, b in zip(w, prev)]
        if not is_zero_vec(w):
            comp.append(tuple(w))
    return comp


def mat_power_vec(m: Mat, v: Sequence, k: int) -> Vec:
    out = vec(v)
    for _ in range(k):
        out = mat_vec(m, out)
    return out


def is_nilpotent(m: Mat) -> bool:
    n = len(m)
    p = m
    for _ in range(n):
        if all(x == 0 for row in p for x in row):
            return True
        p = mat_mul(p, m)
    return all(x == 0 for row in p for x in row)


def to_float(m) -> "list":
    """Recursive Fraction/number -> float conversion for handing off to numpy."""
    if isinstance(m, (Fraction, int, float)):
        return float(m)
    return [to_float(x) for x in m]
