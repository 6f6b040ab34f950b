"""Exact-arithmetic oracle helpers shared by the test modules.

The Fraction linear algebra here is deliberately naive and independent
of gridgas.intlinalg, so it can serve as an oracle for it.
"""

from fractions import Fraction
from math import gcd

from gridgas.exactfield import coefficient_vectors

# ----------------------------------------------------------------------
# Naive rational row reduction (oracle side).


def frref(rows):
    """Reduced row echelon form over Q: tuple of nonzero Fraction rows."""
    rows = [[Fraction(x) for x in row] for row in rows]
    if not rows:
        return ()
    ncols = len(rows[0])
    out = []
    lead = 0
    for col in range(ncols):
        pivot = next((i for i in range(lead, len(rows)) if rows[i][col] != 0), None)
        if pivot is None:
            continue
        rows[lead], rows[pivot] = rows[pivot], rows[lead]
        inv = 1 / rows[lead][col]
        rows[lead] = [x * inv for x in rows[lead]]
        for i in range(len(rows)):
            if i != lead and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[lead])]
        lead += 1
        if lead == len(rows):
            break
    for row in rows[:lead]:
        out.append(tuple(row))
    return tuple(out)


def span_contains(rref_rows, vec):
    """Whether vec lies in the Q-span of the given rref rows."""
    v = [Fraction(x) for x in vec]
    for row in rref_rows:
        col = next(i for i, x in enumerate(row) if x != 0)
        if v[col] != 0:
            f = v[col]
            v = [a - f * b for a, b in zip(v, row)]
    return all(x == 0 for x in v)


def span_equal(rows_a, rows_b):
    return frref(rows_a) == frref(rows_b)


def primitive(vec):
    """Scale an integer vector to gcd 1 with a sign-canonical lead."""
    g = 0
    for x in vec:
        g = gcd(g, abs(x))
    if g == 0:
        return None
    out = tuple(x // g for x in vec)
    lead = next(x for x in out if x != 0)
    return out if lead > 0 else tuple(-x for x in out)


def clear_denominators(vec):
    """Primitive integer vector spanning the same line as a Q-vector."""
    v = [Fraction(x) for x in vec]
    den = 1
    for x in v:
        den = den * x.denominator // gcd(den, x.denominator)
    return primitive([int(x * den) for x in v])


# ----------------------------------------------------------------------
# Brute-force smallest-rational-subspace oracle.
#
# A rational subspace L satisfies the containment criterion for the
# finite set S (and optional line) when S lies in n^{-1}Z^r + L for a
# single positive integer n <= 24 and the whole line R*line lies in L.
# Splitting each vector into its per-power-of-alpha rational
# coefficient parts, this is equivalent to: the irrational parts of
# every member of S lie in L, every part of the line (including the
# rational one) lies in L, and the rational parts of S have a common
# denominator at most 24.  Only the last clause involves n, and the
# instance generators below keep denominators small enough that it
# never binds, which is what makes this reduction exact.


def required_parts(vectors, line):
    """The Fraction part-vectors that a satisfying subspace must contain."""
    need = []
    dens = 1
    for v in vectors:
        parts = coefficient_vectors(list(v))
        for x in parts[0]:
            dens = dens * x.denominator // gcd(dens, x.denominator)
        for part in parts[1:]:
            if any(x != 0 for x in part):
                need.append(tuple(part))
    if line is not None:
        for part in coefficient_vectors(list(line)):
            if any(x != 0 for x in part):
                need.append(tuple(part))
    if dens > 24:
        raise AssertionError(
            f"oracle instance has rational-part denominator {dens} > 24"
        )
    return need


def oracle_satisfies(candidate_rref, parts):
    return all(span_contains(candidate_rref, p) for p in parts)


def _primitive_directions(r, bound):
    """All primitive integer directions in [-bound, bound]^r up to sign."""
    from itertools import product

    seen = set()
    for vec in product(range(-bound, bound + 1), repeat=r):
        p = primitive(vec)
        if p is not None:
            seen.add(p)
    return sorted(seen)


_DIR_CACHE = {}


def primitive_directions(r, bound=4):
    key = (r, bound)
    if key not in _DIR_CACHE:
        _DIR_CACHE[key] = _primitive_directions(r, bound)
    return _DIR_CACHE[key]


def _plane_family_r3():
    """Distinct 2-dim subspaces of Q^3 spanned by small primitive pairs."""
    dirs = primitive_directions(3, 2)
    seen = {}
    for i in range(len(dirs)):
        for j in range(i + 1, len(dirs)):
            a, b = dirs[i], dirs[j]
            normal = primitive(
                (
                    a[1] * b[2] - a[2] * b[1],
                    a[2] * b[0] - a[0] * b[2],
                    a[0] * b[1] - a[1] * b[0],
                )
            )
            if normal is not None and normal not in seen:
                seen[normal] = frref([a, b])
    return list(seen.values())


_PLANES_R3 = None


def plane_family_r3():
    global _PLANES_R3
    if _PLANES_R3 is None:
        _PLANES_R3 = _plane_family_r3()
    return _PLANES_R3


def brute_smallest_subspace(vectors, line, r):
    """Minimal satisfying subspace over the brute-force candidate family.

    Returns (dim, rref rows).  The family contains the zero space, all
    small primitive lines, spans of pairs of the instance's own parts,
    a generic plane family for r = 3, and the full space, which covers
    every subspace that can be minimal for the generated instances.
    """
    parts = required_parts(vectors, line)
    if oracle_satisfies((), parts):
        return 0, ()
    candidates = [frref([d]) for d in primitive_directions(r)]
    for p in parts:
        candidates.append(frref([clear_denominators(p)]))
    for c in candidates:
        if oracle_satisfies(c, parts):
            return 1, c
    if r == 2:
        return 2, frref([(1, 0), (0, 1)])
    planes = list(plane_family_r3())
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            planes.append(frref([parts[i], parts[j]]))
    for c in planes:
        if len(c) == 2 and oracle_satisfies(c, parts):
            return 2, c
    return 3, frref([(1, 0, 0), (0, 1, 0), (0, 0, 1)])


# ----------------------------------------------------------------------
# Random exact instances (deterministic via a caller-supplied Random).


def rand_fraction(rnd, num=2, dens=(1, 2, 3)):
    return Fraction(rnd.randint(-num, num), rnd.choice(dens))


def rand_element(field, rnd, num=2, dens=(1, 2, 3)):
    """A small element q0 + q1*alpha of a degree <= 2 field."""
    a = field.rational(rand_fraction(rnd, num, dens))
    if field.degree > 1 and rnd.random() < 0.7:
        a = a + field.alpha() * field.rational(rand_fraction(rnd, num, dens))
    return a


def rand_vector(field, rnd, r, num=2, dens=(1, 2, 3)):
    return tuple(rand_element(field, rnd, num, dens) for _ in range(r))


def mat_mul_field(A, B):
    n, k, m = len(A), len(B), len(B[0])
    assert len(A[0]) == k
    return tuple(
        tuple(sum((A[i][t] * B[t][j] for t in range(1, k)), A[i][0] * B[0][j]) for j in range(m))
        for i in range(n)
    )


def rand_sl2(field, rnd, n_shears=2):
    """A small unimodular 2x2 matrix over the field (product of shears)."""
    one, zero = field.one(), field.zero()
    M = ((one, zero), (zero, one))
    for _ in range(n_shears):
        t = rand_element(field, rnd, num=1, dens=(1, 2))
        if rnd.random() < 0.5:
            S = ((one, t), (zero, one))
        else:
            S = ((one, zero), (t, one))
        M = mat_mul_field(M, S)
    return M
