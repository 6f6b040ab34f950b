"""Exact integer and rational linear algebra.

Row conventions throughout: matrices are sequences of rows, lattices are
row lattices (the set of integer combinations of the rows), and the
Hermite normal form is row-style:

  * pivot (first nonzero entry of each row) positive,
  * pivot columns strictly increasing,
  * entries above a pivot reduced into [0, pivot).

With zero rows dropped this form is a canonical representative of the
row lattice, so lattice equality is list equality.

Everything here is exact (int / fractions.Fraction).  These routines are
deliberately small and dependency-free; they are the decision kernel for
the grid algebra and get cross-checked against sympy in the test suite.
"""

from __future__ import annotations

from fractions import Fraction

__all__ = [
    "xgcd",
    "transpose",
    "mat_mul",
    "vec_mat",
    "mat_vec",
    "mat_det",
    "mat_inv",
    "mat_identity",
    "row_hnf",
    "row_hnf_transform",
    "int_left_kernel",
    "rational_rref",
    "right_kernel_rational",
    "clear_denominators",
    "saturated_basis",
    "lattice_intersection",
    "hnf_solve",
    "in_row_lattice",
    "reduce_mod_lattice",
]


def xgcd(a: int, b: int):
    """(g, s, t) with s*a + t*b = g = gcd(a, b) >= 0.

    >>> xgcd(12, -8)
    (4, -1, -2)
    """
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


# ----------------------------------------------------------------------
# Generic dense helpers.  Entries may be int, Fraction, or any field
# type supporting +, -, *, / and truth-testing for "is nonzero"
# (the grid algebra passes AlgebraicNumber here).

def transpose(A):
    return [list(col) for col in zip(*A)]


def mat_mul(A, B):
    n, k, m = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        Ai = A[i]
        for j in range(m):
            acc = Ai[0] * B[0][j]
            for l in range(1, k):
                acc = acc + Ai[l] * B[l][j]
            row.append(acc)
        out.append(row)
    return out


def vec_mat(v, A):
    """Row vector times matrix."""
    return mat_mul([list(v)], A)[0]


def mat_vec(A, v):
    """Matrix times column vector."""
    return [row_dot(row, v) for row in A]


def row_dot(u, v):
    acc = u[0] * v[0]
    for a, b in zip(u[1:], v[1:]):
        acc = acc + a * b
    return acc


def mat_det(A):
    """Determinant by fraction-free-ish Gaussian elimination with division."""
    n = len(A)
    # Plain ints would fall into float true-division below; keep them exact.
    M = [[Fraction(x) if isinstance(x, int) else x for x in row] for row in A]
    det = None
    sign_flips = 0
    for c in range(n):
        piv = None
        for i in range(c, n):
            if M[i][c]:
                piv = i
                break
        if piv is None:
            zero = M[0][0] - M[0][0]
            return zero
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            sign_flips ^= 1
        p = M[c][c]
        det = p if det is None else det * p
        for i in range(c + 1, n):
            if M[i][c]:
                f = M[i][c] / p
                M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    return -det if sign_flips else det


def mat_identity(n, one):
    zero = one - one
    return [[one if i == j else zero for j in range(n)] for i in range(n)]


def mat_inv(A, one):
    """Inverse by Gauss-Jordan; `one` is the multiplicative identity."""
    n = len(A)
    rows = [[Fraction(x) if isinstance(x, int) else x for x in row] for row in A]
    M = [list(row) + irow for row, irow in zip(rows, mat_identity(n, one))]
    for c in range(n):
        piv = None
        for i in range(c, n):
            if M[i][c]:
                piv = i
                break
        if piv is None:
            raise ZeroDivisionError("matrix is singular")
        M[c], M[piv] = M[piv], M[c]
        p = M[c][c]
        M[c] = [a / p for a in M[c]]
        for i in range(n):
            if i != c and M[i][c]:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    return [row[n:] for row in M]


# ----------------------------------------------------------------------
# Integer lattice algebra.

def row_hnf_transform(rows, ncols=None):
    """(H_full, U, rank) with U unimodular and U @ rows == H_full.

    H_full keeps its zero rows at the bottom so that the rows of U
    aligned with them are a basis of the integer left kernel.
    """
    A = [[int(x) for x in row] for row in rows]
    m = len(A)
    if ncols is None:
        ncols = len(A[0]) if A else 0
    U = [[1 if i == j else 0 for j in range(m)] for i in range(m)]
    r = 0
    for c in range(ncols):
        piv = None
        for i in range(r, m):
            if A[i][c]:
                piv = i
                break
        if piv is None:
            continue
        if piv != r:
            A[r], A[piv] = A[piv], A[r]
            U[r], U[piv] = U[piv], U[r]
        for i in range(r + 1, m):
            if not A[i][c]:
                continue
            a, b = A[r][c], A[i][c]
            g, s, t = xgcd(a, b)
            # [[s, t], [-b//g, a//g]] has determinant +1 and sends
            # (a, b) to (g, 0).
            u2, v2 = -(b // g), a // g
            Ar, Ai = A[r], A[i]
            A[r] = [s * x + t * y for x, y in zip(Ar, Ai)]
            A[i] = [u2 * x + v2 * y for x, y in zip(Ar, Ai)]
            Ur, Ui = U[r], U[i]
            U[r] = [s * x + t * y for x, y in zip(Ur, Ui)]
            U[i] = [u2 * x + v2 * y for x, y in zip(Ur, Ui)]
        if A[r][c] < 0:
            A[r] = [-x for x in A[r]]
            U[r] = [-x for x in U[r]]
        p = A[r][c]
        for i in range(r):
            q = A[i][c] // p
            if q:
                A[i] = [x - q * y for x, y in zip(A[i], A[r])]
                U[i] = [x - q * y for x, y in zip(U[i], U[r])]
        r += 1
    return A, U, r


def row_hnf(rows, ncols=None):
    """Canonical HNF basis of the row lattice; zero rows dropped."""
    H, _, r = row_hnf_transform(rows, ncols)
    return [tuple(row) for row in H[:r]]


def int_left_kernel(rows, ncols=None):
    """Canonical basis of {x integer row : x @ rows == 0}."""
    _, U, r = row_hnf_transform(rows, ncols)
    return row_hnf(U[r:], len(U[0]) if U else 0)


# ----------------------------------------------------------------------
# Rational subspace algebra.

def rational_rref(rows, ncols):
    """Reduced row echelon form over Q; returns (R, pivot_columns)."""
    M = [[Fraction(x) for x in row] for row in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        piv = None
        for i in range(r, len(M)):
            if M[i][c]:
                piv = i
                break
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        p = M[r][c]
        M[r] = [a / p for a in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c]:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
    return M[:r], pivots


def right_kernel_rational(rows, ncols):
    """Basis rows of {x in Q^ncols : rows @ x^T == 0}."""
    R, pivots = rational_rref(rows, ncols)
    pivot_set = set(pivots)
    free = [c for c in range(ncols) if c not in pivot_set]
    basis = []
    for f in free:
        x = [Fraction(0)] * ncols
        x[f] = Fraction(1)
        for i, p in enumerate(pivots):
            x[p] = -R[i][f]
        basis.append(x)
    return basis


def clear_denominators(row):
    """Scale a rational row to a primitive integer row (gcd 1)."""
    from math import gcd, lcm

    fr = [Fraction(x) for x in row]
    m = lcm(*(f.denominator for f in fr)) if fr else 1
    ints = [int(f * m) for f in fr]
    g = 0
    for x in ints:
        g = gcd(g, x)
    if g > 1:
        ints = [x // g for x in ints]
    return ints


def saturated_basis(rational_rows, ncols):
    """Canonical basis of V ∩ Z^ncols for V the Q-span of the rows.

    The result is saturated: Z^ncols / (V ∩ Z^ncols) is torsion-free.
    Computed as the integer solutions of the rational normal equations.
    """
    rows = [row for row in rational_rows if any(row)]
    if not rows:
        return []
    normals = right_kernel_rational(rows, ncols)
    if not normals:
        return [tuple(1 if i == j else 0 for j in range(ncols))
                for i in range(ncols)]
    N_int = [clear_denominators(nrm) for nrm in normals]
    # V ∩ Z^r = {x : x ⟂ all normals} = integer left kernel of N^T.
    return int_left_kernel(transpose(N_int), len(N_int))


def lattice_intersection(rows_a, rows_b, ncols):
    """Basis of rowlat(A) ∩ rowlat(B) for full-rank integer lattices."""
    stacked = [list(r) for r in rows_a] + [[-x for x in r] for r in rows_b]
    kernel = int_left_kernel(stacked, ncols)
    na = len(rows_a)
    inter = []
    for k in kernel:
        vec = [0] * ncols
        for coef, row in zip(k[:na], rows_a):
            for j in range(ncols):
                vec[j] += coef * row[j]
        inter.append(vec)
    return row_hnf(inter, ncols)


# ----------------------------------------------------------------------
# Solving against an HNF basis.

def _pivot_columns(H):
    pivots = []
    for row in H:
        for c, x in enumerate(row):
            if x:
                pivots.append(c)
                break
    return pivots


def hnf_solve(H, y):
    """Solve x @ H == y over Q for H a full-row-rank HNF basis.

    Returns the rational coefficient list, or None if y is outside the
    row span.
    """
    pivots = _pivot_columns(H)
    resid = [Fraction(v) for v in y]
    coeffs = []
    for i, p in enumerate(pivots):
        c = resid[p] / H[i][p]
        coeffs.append(c)
        if c:
            resid = [a - c * b for a, b in zip(resid, H[i])]
    if any(resid):
        return None
    return coeffs


def in_row_lattice(H, y):
    """Whether the rational row y lies in the integer row lattice of H."""
    coeffs = hnf_solve(H, y)
    return coeffs is not None and all(c.denominator == 1 for c in coeffs)


def reduce_mod_lattice(H, y):
    """Canonical residue of the rational row y modulo the row lattice of H.

    Requires y ∈ span(H) ⊗ Q.  Subtracts the floor of each triangular
    coefficient in pivot order; the result is the unique residue whose
    coefficients against H all lie in [0, 1).
    """
    pivots = _pivot_columns(H)
    resid = [Fraction(v) for v in y]
    for i, p in enumerate(pivots):
        c = resid[p] / H[i][p]
        k = c.numerator // c.denominator
        if k:
            resid = [a - k * b for a, b in zip(resid, H[i])]
    return tuple(resid)
