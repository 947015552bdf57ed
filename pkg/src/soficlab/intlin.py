"""Exact integer linear algebra.

Determinants (Bareiss fraction-free elimination), Smith normal form with
unimodular transforms, and lattice solvers for ``A x = c (mod q)``.  All
arithmetic is over Python ints, so nothing overflows and every count is
exact.  Matrices are accepted as nested sequences or numpy arrays and are
normalized to lists of lists of ints internally.
"""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from .errors import BudgetExceededError, SingularMatrixError


def as_int_rows(mat) -> list[list[int]]:
    """Normalize a matrix-like object to a list of rows of Python ints."""
    rows = [[int(v) for v in row] for row in mat]
    if rows:
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("ragged matrix")
    return rows


def det_bareiss(mat) -> int:
    """Exact determinant of a square integer matrix.

    Bareiss fraction-free elimination: every intermediate division is exact,
    so the result is a Python int of unbounded precision.
    """
    a = as_int_rows(mat)
    n = len(a)
    if any(len(r) != n for r in a):
        raise ValueError("determinant needs a square matrix")
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            pivot = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if pivot is None:
                return 0
            a[k], a[pivot] = a[pivot], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
            a[i][k] = 0
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _swap_rows(m, i, j):
    m[i], m[j] = m[j], m[i]


def _swap_cols(m, i, j):
    for row in m:
        row[i], row[j] = row[j], row[i]


def _add_row(m, src, dst, c):
    """row[dst] += c * row[src]"""
    m[dst] = [x + c * y for x, y in zip(m[dst], m[src])]


def _add_col(m, src, dst, c):
    for row in m:
        row[dst] += c * row[src]


def _negate_row(m, i):
    m[i] = [-x for x in m[i]]


def smith_normal_form(mat) -> tuple[list[list[int]], list[list[int]], list[list[int]]]:
    """Smith normal form with transforms: returns (s, u, v) with u @ mat @ v = s.

    ``u`` and ``v`` are unimodular; ``s`` is diagonal with nonnegative
    invariant factors s_1 | s_2 | ... (zeros last).
    """
    a = as_int_rows(mat)
    rows = len(a)
    cols = len(a[0]) if rows else 0
    u = [[int(i == j) for j in range(rows)] for i in range(rows)]
    v = [[int(i == j) for j in range(cols)] for i in range(cols)]

    def pivot_search(t):
        best = None
        for i in range(t, rows):
            for j in range(t, cols):
                if a[i][j] != 0 and (best is None or abs(a[i][j]) < abs(a[best[0]][best[1]])):
                    best = (i, j)
        return best

    t = 0
    while t < min(rows, cols):
        pos = pivot_search(t)
        if pos is None:
            break
        i, j = pos
        if i != t:
            _swap_rows(a, t, i)
            _swap_rows(u, t, i)
        if j != t:
            _swap_cols(a, t, j)
            _swap_cols(v, t, j)
        # clear the edging below/right of the pivot; restart if a remainder
        # smaller than the pivot appears (keeps the loop terminating on |pivot|)
        dirty = True
        while dirty:
            dirty = False
            for i in range(t + 1, rows):
                if a[i][t] != 0:
                    c = a[i][t] // a[t][t]
                    _add_row(a, t, i, -c)
                    _add_row(u, t, i, -c)
                    if a[i][t] != 0:
                        _swap_rows(a, t, i)
                        _swap_rows(u, t, i)
                        dirty = True
            for j in range(t + 1, cols):
                if a[t][j] != 0:
                    c = a[t][j] // a[t][t]
                    _add_col(a, t, j, -c)
                    _add_col(v, t, j, -c)
                    if a[t][j] != 0:
                        _swap_cols(a, t, j)
                        _swap_cols(v, t, j)
                        dirty = True
        if a[t][t] < 0:
            _negate_row(a, t)
            _negate_row(u, t)
        # divisibility fix-up: pivot must divide the remaining block
        fixed = False
        for i in range(t + 1, rows):
            if fixed:
                break
            for j in range(t + 1, cols):
                if a[i][j] % a[t][t] != 0:
                    _add_row(a, i, t, 1)
                    _add_row(u, i, t, 1)
                    fixed = True
                    break
        if fixed:
            continue
        t += 1
    s = a
    return s, u, v


def invariant_factors(mat) -> list[int]:
    """Nonzero diagonal of the Smith form, in divisibility order."""
    s, _, _ = smith_normal_form(mat)
    return [s[i][i] for i in range(min(len(s), len(s[0]) if s else 0)) if s[i][i] != 0]


def integer_rank(mat) -> int:
    return len(invariant_factors(mat))


def kernel_count_mod(mat, q: int) -> int:
    """Number of x in (Z/q)^cols with mat @ x = 0 (mod q).

    Equals prod gcd(s_i, q) over the Smith diagonal, with zero divisors
    contributing q each (gcd(0, q) = q).
    """
    a = as_int_rows(mat)
    cols = len(a[0]) if a else 0
    divisors = invariant_factors(a)
    count = 1
    for s in divisors:
        count *= math.gcd(s, q)
    count *= q ** (cols - len(divisors))
    return count


def _matvec_mod(m, x, q):
    return [sum(r * v for r, v in zip(row, x)) % q for row in m]


def solve_mod(mat, target, q: int, budget: int | None = None) -> Iterator[tuple[int, ...]]:
    """Iterate all x in (Z/q)^cols with mat @ x = target (mod q).

    Deterministic order.  Raises BudgetExceededError before yielding anything
    if the solution count exceeds ``budget``.
    """
    a = as_int_rows(mat)
    rows = len(a)
    cols = len(a[0]) if rows else 0
    t = [int(v) for v in target]
    if len(t) != rows:
        raise ValueError("target length mismatch")
    s, u, v = smith_normal_form(a)
    ut = _matvec_mod(u, t, q)
    r = min(rows, cols)
    # per-coordinate congruences s_i y_i = ut_i (mod q)
    per_coord: list[list[int]] = []
    for i in range(cols):
        si = s[i][i] if i < r else 0
        rhs = ut[i] if i < rows else 0
        g = math.gcd(si, q)
        if i < rows and rhs % g != 0:
            return iter(())
        if si % q == 0:
            # free coordinate (or fully constrained to all residues)
            per_coord.append(list(range(q)))
        else:
            step = q // g
            base = (rhs // g) * pow(si // g, -1, step) % step
            per_coord.append([(base + k * step) % q for k in range(g)])
    for i in range(cols, rows):
        if ut[i] % q != 0:
            return iter(())
    total = 1
    for options in per_coord:
        total *= len(options)
    if budget is not None and total > budget:
        raise BudgetExceededError(total, budget, "lattice solve")

    def generate():
        idx = [0] * cols
        while True:
            y = [per_coord[i][idx[i]] for i in range(cols)]
            x = tuple(sum(v[i][j] * y[j] for j in range(cols)) % q for i in range(cols))
            yield x
            k = cols - 1
            while k >= 0:
                idx[k] += 1
                if idx[k] < len(per_coord[k]):
                    break
                idx[k] = 0
                k -= 1
            if k < 0:
                return

    return generate()


def solution_count_mod(mat, q: int) -> int:
    """Alias of kernel_count_mod kept close to the solver it describes."""
    return kernel_count_mod(mat, q)


def abs_det(mat) -> int:
    d = det_bareiss(mat)
    if d == 0:
        raise SingularMatrixError("matrix is singular")
    return abs(d)


def np_int_matrix(mat) -> np.ndarray:
    """Matrix as an int64 numpy array (entries must fit; raise otherwise)."""
    arr = np.array(as_int_rows(mat), dtype=object)
    out = arr.astype(np.int64)
    if not (out.astype(object) == arr).all():
        raise OverflowError("matrix entries exceed int64")
    return out
