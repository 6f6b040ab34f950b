"""Exact grid algebra.

A grid is a scaled translate of a unimodular lattice, c(Z^d + w)M with
det M = 1 exactly, all data in one real number field Q(alpha).  This
module classifies finite unions of grids into commensurability classes,
merges each class onto a common lattice, decides admissibility of a
presentation, repairs inadmissible ones, and computes the rational
subspaces and torus component sets that drive the homogeneous-space
samplers.

Presentations built by hand are not forced to satisfy the within-class
disjointness condition or cross-class incommensurability; those hold
for the outputs of canonical_presentation / make_admissible and are
checked in the test suite by exact window enumeration.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import cmp_to_key
from math import gcd, lcm

from .exactfield import (
    AlgebraicNumber,
    FieldError,
    NumberField,
    an_from_json,
    an_to_json,
    coefficient_vectors,
    field_from_json,
    field_to_json,
)
from . import intlinalg as ila

__all__ = [
    "GridError",
    "OrbitCapError",
    "Grid",
    "Presentation",
    "RationalSubspace",
    "TorusComponentSet",
    "smallest_rational_subspace",
    "in_subspace_mod_integers",
    "commensurable",
    "partition_classes",
    "merge_class",
    "canonical_presentation",
    "mark_subspace",
    "generic_subspace",
    "is_admissible",
    "make_admissible",
    "offset_matrix",
    "torus_components",
    "enumerate_window",
]

ORBIT_CAP_DEFAULT = 10**4


class GridError(ValueError):
    """Invalid grid data or operation preconditions."""


class OrbitCapError(RuntimeError):
    """Torus component orbit exceeded the configured cap."""


# ----------------------------------------------------------------------
# Rational subspaces of Q^r in canonical basis form.

class RationalSubspace:
    """A rational subspace L of Q^r.

    `basis` is the row-style Hermite normal form of a basis of the
    saturated lattice L ∩ Z^r, so equal subspaces have equal bases.
    """

    __slots__ = ("r", "basis", "_normals", "_image_hnf")

    def __init__(self, r: int, basis):
        self.r = r
        self.basis = tuple(tuple(int(x) for x in row) for row in basis)
        self._normals = None
        self._image_hnf = None

    @classmethod
    def from_rational_span(cls, rows, r):
        return cls(r, ila.saturated_basis(rows, r))

    @property
    def dim(self) -> int:
        return len(self.basis)

    def normals(self):
        """Canonical saturated basis of the orthogonal complement."""
        if self._normals is None:
            if self.dim == 0:
                self._normals = tuple(
                    tuple(1 if i == j else 0 for j in range(self.r))
                    for i in range(self.r)
                )
            elif self.dim == self.r:
                self._normals = ()
            else:
                self._normals = tuple(
                    ila.int_left_kernel(ila.transpose(self.basis), self.dim)
                )
        return self._normals

    def image_hnf(self):
        """HNF basis of the lattice N·Z^r inside Z^s, N the normal matrix."""
        if self._image_hnf is None:
            N = self.normals()
            self._image_hnf = tuple(ila.row_hnf(ila.transpose(N), len(N)))
        return self._image_hnf

    def contains(self, rational_row) -> bool:
        if self.dim == self.r:
            return True
        if not any(rational_row):
            return True
        if self.dim == 0:
            return False
        return ila.hnf_solve(self.basis, rational_row) is not None

    def intersect(self, other: "RationalSubspace") -> "RationalSubspace":
        if self.r != other.r:
            raise GridError("ambient dimension mismatch")
        stacked = list(self.normals()) + list(other.normals())
        if not stacked:
            return RationalSubspace(self.r, self.basis)
        basis = ila.int_left_kernel(ila.transpose(stacked), len(stacked))
        return RationalSubspace(self.r, basis)

    def coordinate_section(self, i: int) -> "RationalSubspace":
        """Intersection with the hyperplane {x_i = 0}."""
        e = [0] * self.r
        e[i] = 1
        stacked = list(self.normals()) + [tuple(e)]
        basis = ila.int_left_kernel(ila.transpose(stacked), len(stacked))
        return RationalSubspace(self.r, basis)

    def add(self, other: "RationalSubspace") -> "RationalSubspace":
        if self.r != other.r:
            raise GridError("ambient dimension mismatch")
        return RationalSubspace.from_rational_span(
            list(self.basis) + list(other.basis), self.r
        )

    def __eq__(self, other):
        return (
            isinstance(other, RationalSubspace)
            and self.r == other.r
            and self.basis == other.basis
        )

    def __hash__(self):
        return hash((self.r, self.basis))

    def __repr__(self):
        return f"RationalSubspace(r={self.r}, basis={self.basis})"


def smallest_rational_subspace(vectors, line=None, r=None) -> RationalSubspace:
    """The smallest rational subspace L with all of S inside L up to a
    uniformly bounded-denominator rational offset.

    Finite vectors contribute their irrational coefficient parts; a line
    through `line` contributes every coefficient part including the
    rational one.
    """
    rows = []
    for v in vectors:
        r = len(v)
        parts = coefficient_vectors(v)
        rows.extend(parts[1:])
    if line is not None:
        r = len(line)
        parts = coefficient_vectors(line)
        rows.extend(parts)
    if r is None:
        raise GridError("ambient dimension cannot be inferred from empty input")
    return RationalSubspace.from_rational_span(rows, r)


def _normal_products(v, L: RationalSubspace):
    """All coefficient parts of v multiplied by the normal matrix of L."""
    N = L.normals()
    parts = coefficient_vectors(v)
    return [tuple(ila.row_dot(nrow, part) for nrow in N) for part in parts]


def in_subspace_mod_integers(v, L: RationalSubspace) -> bool:
    """Whether the vector v over the field lies in L + Z^r.

    Irrational coefficient parts of v must lie in L; the rational part
    must lie in L + Z^r, decided against the image lattice of Z^r in the
    quotient by L.
    """
    if len(v) != L.r:
        raise GridError("vector length does not match ambient dimension")
    if L.dim == L.r:
        return True
    prods = _normal_products(v, L)
    for y in prods[1:]:
        if any(y):
            return False
    return ila.in_row_lattice(L.image_hnf(), prods[0])


def _column_class_key(v, L: RationalSubspace):
    """Hashable representative of the class of v modulo L + Z^r."""
    if L.dim == L.r:
        return ()
    prods = _normal_products(v, L)
    residue = ila.reduce_mod_lattice(L.image_hnf(), prods[0])
    return (residue, tuple(prods[1:]))


# ----------------------------------------------------------------------
# Grids.

def _canonical_translation(w):
    """Reduce the rational coefficient part of each entry into [0, 1)."""
    out = []
    for e in w:
        c0 = e.coeffs[0]
        fl = c0.numerator // c0.denominator
        out.append(e - fl if fl else e)
    return tuple(out)


class Grid:
    """The point set c(Z^d + w)M with det M = 1 and c > 0, all exact.

    The translation w is normalized so that the rational coefficient
    part of each entry lies in [0, 1); two Grid values describing the
    same point set with the same M then compare equal.
    """

    __slots__ = ("field", "dim", "c", "w", "M")

    def __init__(self, field: NumberField, c, w, M):
        self.field = field
        conv = _element_converter(field)
        self.c = conv(c)
        self.w = _canonical_translation(tuple(conv(x) for x in w))
        self.M = tuple(tuple(conv(x) for x in row) for row in M)
        self.dim = len(self.w)
        if len(self.M) != self.dim or any(len(r) != self.dim for r in self.M):
            raise GridError("M must be a square matrix matching dim(w)")
        if self.dim < 2:
            raise GridError("dimension must be >= 2")
        if self.c.sign() <= 0:
            raise GridError("scale c must be positive")
        det = ila.mat_det([list(row) for row in self.M])
        if det != field.one():
            raise GridError("det M must be exactly 1")

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.field == other.field
            and self.c == other.c
            and self.w == other.w
            and self.M == other.M
        )

    def __hash__(self):
        return hash((self.c, self.w, self.M))

    def __repr__(self):
        return f"Grid(c={self.c!r}, w={[repr(x) for x in self.w]}, M={self.M!r})"


def _element_converter(field):
    def conv(x):
        if isinstance(x, AlgebraicNumber):
            if x.field != field:
                raise GridError("grid data from a different number field")
            return x
        return field.element([x] if not isinstance(x, (list, tuple)) else x)

    return conv


# ----------------------------------------------------------------------
# Commensurability.

def commensurable(g1: Grid, g2: Grid):
    """Witness (lam, T) with M2·M1^(-1) = lam·T, T rational, lam > 0.

    Returns None when the grids are incommensurable.  Scales and
    translations never obstruct commensurability, so only the lattice
    directions are examined.
    """
    if g1.field != g2.field or g1.dim != g2.dim:
        raise GridError("grids must share field and dimension")
    one = g1.field.one()
    M1_inv = ila.mat_inv([list(r) for r in g1.M], one)
    R = ila.mat_mul([list(r) for r in g2.M], M1_inv)
    d = g1.dim
    r0 = None
    for i in range(d):
        for j in range(d):
            if R[i][j]:
                r0 = R[i][j]
                break
        if r0 is not None:
            break
    T = []
    for i in range(d):
        row = []
        for j in range(d):
            ratio = R[i][j] / r0
            if not ratio.is_rational():
                return None
            row.append(ratio.as_fraction())
        T.append(row)
    lam = r0
    if lam.sign() < 0:
        lam = -lam
        T = [[-x for x in row] for row in T]
    return lam, tuple(tuple(row) for row in T)


def partition_classes(grids):
    """Group grid indices into commensurability classes, ordered by
    first occurrence."""
    if not grids:
        raise GridError("no grids given")
    classes = []
    for idx, g in enumerate(grids):
        for cls in classes:
            if commensurable(grids[cls[0]], g) is not None:
                cls.append(idx)
                break
        else:
            classes.append([idx])
    return classes


# ----------------------------------------------------------------------
# Merging a commensurability class onto one unimodular lattice.

def _member_sort_key(members):
    def cmp(m1, m2):
        s = (m1[0] - m2[0]).sign()
        if s:
            return s
        for a, b in zip(m1[1], m2[1]):
            s = (a - b).sign()
            if s:
                return s
        return 0

    return sorted(members, key=cmp_to_key(cmp))


def _member_key(c, w):
    return (c.coeffs, tuple(e.coeffs for e in w))


def _dedup_members(members):
    seen = {}
    for c, w in members:
        seen.setdefault(_member_key(c, w), (c, w))
    return list(seen.values())


def _disjointness_rewrite(members, d):
    """Enforce the within-class condition: members whose scale ratio is
    rational must describe disjoint grids.

    Exact overlap test for ratio p/q in lowest terms: the two grids
    intersect iff p·w2 − q·w1 is an integer vector.  Any overlapping
    rational-ratio group is rewritten to a single common scale by coset
    expansion and deduplication; non-overlapping groups are kept as-is.
    The represented point set is unchanged.
    """
    groups = []
    reps = []
    for idx, (c, _) in enumerate(members):
        for gi, rc in enumerate(reps):
            if (c / rc).is_rational():
                groups[gi].append(idx)
                break
        else:
            groups.append([idx])
            reps.append(c)

    out = []
    for gi, idxs in enumerate(groups):
        c0 = members[idxs[0]][0]
        ratios = [(members[i][0] / c0).as_fraction() for i in idxs]
        overlap = False
        for a in range(len(idxs)):
            for b in range(a + 1, len(idxs)):
                rr = ratios[b] / ratios[a]
                pp, qq = rr.numerator, rr.denominator
                wa = members[idxs[a]][1]
                wb = members[idxs[b]][1]
                diff = [pp * eb - qq * ea for ea, eb in zip(wa, wb)]
                if all(
                    e.is_rational() and e.as_fraction().denominator == 1
                    for e in diff
                ):
                    overlap = True
                    break
            if overlap:
                break
        if not overlap:
            out.extend(members[i] for i in idxs)
            continue
        scale = Fraction(
            lcm(*(r.numerator for r in ratios)),
            gcd(*(r.denominator for r in ratios)),
        )
        cJ = c0 * scale
        expanded = {}
        for i, ratio in zip(idxs, ratios):
            n = scale / ratio
            if n.denominator != 1:
                raise GridError("internal: coset expansion count not integral")
            n = n.numerator
            _, w_i = members[i]
            for a in itertools.product(range(n), repeat=d):
                wv = _canonical_translation(
                    tuple((e + ai) / n for e, ai in zip(w_i, a))
                )
                expanded.setdefault(_member_key(cJ, wv), (cJ, wv))
        out.extend(expanded.values())
    return _dedup_members(out)


def merge_class(grids):
    """Express pairwise-commensurable grids over one unimodular lattice.

    Returns (M, members) with union(grids) == union of c_i(Z^d + w_i)M
    exactly, members satisfying the within-class disjointness condition.

    The underlying lattices are intersected (their integer direction
    matrices stacked and the stack's integer kernel extracted); each
    grid then splits into finitely many cosets of a sublattice of the
    intersection whose covolume is a perfect d-th power, which is what
    makes a unimodular common M possible over the field.
    """
    g0 = grids[0]
    d, field = g0.dim, g0.field
    one = field.one()
    witnesses = []
    for g in grids:
        wit = commensurable(g0, g)
        if wit is None:
            raise GridError("grids are not pairwise commensurable")
        witnesses.append(wit)

    denom = 1
    for _, T in witnesses:
        for row in T:
            for x in row:
                denom = lcm(denom, x.denominator)
    int_dirs = [
        [[int(x * denom) for x in row] for row in T] for _, T in witnesses
    ]
    cap = int_dirs[0]
    for A in int_dirs[1:]:
        cap = [list(r) for r in ila.lattice_intersection(cap, A, d)]
    B = [[Fraction(x, denom) for x in row] for row in cap]
    covol = abs(ila.mat_det(B))
    p, q = covol.numerator, covol.denominator
    k = p ** (d - 1) * q ** (d + 1)
    Bp = [[x * k for x in B[0]]] + [list(r) for r in B[1:]]
    if ila.mat_det(Bp) < 0:
        Bp[0], Bp[1] = Bp[1], Bp[0]
    pq = Fraction(p * q)

    Bp_field = [[field.rational(x) for x in row] for row in Bp]
    Mc = [
        [e / pq for e in row]
        for row in ila.mat_mul(Bp_field, [list(r) for r in g0.M])
    ]
    if ila.mat_det(Mc) != one:
        raise GridError("internal: merged lattice matrix is not unimodular")

    Bp_inv = ila.mat_inv(Bp, Fraction(1))
    members = []
    for g, (lam, T) in zip(grids, witnesses):
        T_inv = ila.mat_inv([list(r) for r in T], Fraction(1))
        C = ila.mat_mul(Bp, T_inv)
        C_int = []
        for row in C:
            irow = []
            for x in row:
                if x.denominator != 1:
                    raise GridError("internal: coset matrix not integral")
                irow.append(x.numerator)
            C_int.append(irow)
        H = ila.row_hnf(C_int, d)
        diag = [H[j][j] for j in range(d)]
        X = ila.mat_mul([list(r) for r in T], Bp_inv)
        cp = g.c * lam * pq
        for rho in itertools.product(*(range(h) for h in diag)):
            shifted = [e + ri for e, ri in zip(g.w, rho)]
            wv = ila.vec_mat(shifted, X)
            members.append((cp, _canonical_translation(wv)))

    members = _dedup_members(members)
    members = _disjointness_rewrite(members, d)
    members = _member_sort_key(members)
    M_canon = tuple(tuple(row) for row in Mc)
    return M_canon, tuple(members)


# ----------------------------------------------------------------------
# Presentations.

class ClassData:
    __slots__ = ("M", "members")

    def __init__(self, M, members):
        self.M = tuple(tuple(row) for row in M)
        self.members = tuple(members)

    @property
    def r(self):
        return len(self.members)


class Presentation:
    """A finite union of grids organized into commensurability classes.

    classes[j] holds the class lattice matrix M_j and the members
    (c_{j,i}, w_{j,i}); the grid of mark (j, i) is c(Z^d + w)M_j.
    Marks are 0-based (j, i) tuples in this API.
    """

    __slots__ = ("field", "dim", "classes", "_admissible", "_cache")

    def __init__(self, field, dim, classes):
        self.field = field
        self.dim = dim
        self._cache = {}
        conv = _element_converter(field)
        built = []
        for M, members in classes:
            M = tuple(tuple(conv(x) for x in row) for row in M)
            if len(M) != dim or any(len(r) != dim for r in M):
                raise GridError("class matrix has wrong shape")
            det = ila.mat_det([list(r) for r in M])
            if det != field.one():
                raise GridError("class matrix must have det exactly 1")
            mm = []
            for c, w in members:
                c = conv(c)
                if c.sign() <= 0:
                    raise GridError("member scale must be positive")
                w = tuple(conv(x) for x in w)
                if len(w) != dim:
                    raise GridError("member translation has wrong length")
                mm.append((c, _canonical_translation(w)))
            if not mm:
                raise GridError("class with no members")
            built.append(ClassData(M, mm))
        if not built:
            raise GridError("presentation with no classes")
        self.classes = tuple(built)
        self._admissible = None

    # -- structure ------------------------------------------------------

    @property
    def n_classes(self):
        return len(self.classes)

    def marks(self):
        return [
            (j, i)
            for j, cls in enumerate(self.classes)
            for i in range(len(cls.members))
        ]

    def member(self, psi):
        j, i = psi
        return self.classes[j].members[i]

    def grid(self, psi) -> Grid:
        j, i = psi
        c, w = self.classes[j].members[i]
        return Grid(self.field, c, w, self.classes[j].M)

    def grids(self):
        return [self.grid(psi) for psi in self.marks()]

    def restricted_to_class(self, j) -> "Presentation":
        cls = self.classes[j]
        return Presentation(self.field, self.dim, [(cls.M, cls.members)])

    # -- densities -------------------------------------------------------

    def density_exact(self, psi) -> AlgebraicNumber:
        c, _ = self.member(psi)
        return c ** (-self.dim)

    def total_density_exact(self) -> AlgebraicNumber:
        total = self.field.zero()
        for psi in self.marks():
            total = total + self.density_exact(psi)
        return total

    def weight_exact(self, psi) -> AlgebraicNumber:
        return self.density_exact(psi) / self.total_density_exact()

    def density(self, psi) -> float:
        return float(self.density_exact(psi))

    def total_density(self) -> float:
        return float(self.total_density_exact())

    def weight(self, psi) -> float:
        return float(self.weight_exact(psi))

    # -- admissibility (cached) -------------------------------------------

    def admissibility(self):
        if self._admissible is None:
            self._admissible = is_admissible(self)
        return self._admissible

    # -- serialization -----------------------------------------------------

    def to_json(self):
        return {
            "dim": self.dim,
            "field": field_to_json(self.field),
            "classes": [
                {
                    "M": [[an_to_json(x) for x in row] for row in cls.M],
                    "members": [
                        {"c": an_to_json(c), "w": [an_to_json(x) for x in w]}
                        for c, w in cls.members
                    ],
                }
                for cls in self.classes
            ],
        }

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict):
            raise GridError("presentation must be a JSON object")
        unknown = set(obj) - {"dim", "field", "classes"}
        if unknown:
            raise GridError(f"unknown presentation keys: {sorted(unknown)}")
        try:
            dim = obj["dim"]
            field = field_from_json(obj["field"])
            classes_json = obj["classes"]
        except KeyError as exc:
            raise GridError(f"presentation missing key {exc}") from None
        if not isinstance(dim, int) or dim < 2:
            raise GridError("dim must be an integer >= 2")
        classes = []
        for cj in classes_json:
            unknown = set(cj) - {"M", "members"}
            if unknown:
                raise GridError(f"unknown class keys: {sorted(unknown)}")
            M = [[an_from_json(field, x) for x in row] for row in cj["M"]]
            members = []
            for mj in cj["members"]:
                unknown = set(mj) - {"c", "w"}
                if unknown:
                    raise GridError(f"unknown member keys: {sorted(unknown)}")
                c = an_from_json(field, mj["c"])
                w = [an_from_json(field, x) for x in mj["w"]]
                members.append((c, w))
            classes.append((M, members))
        return cls(field, dim, classes)

    def cached(self, key, build):
        """Memoize derived data (float payloads etc.) on this instance.

        The cache never travels through pickling, so worker processes
        rebuild payloads locally from the exact data.
        """
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def __getstate__(self):
        return (self.field, self.dim, self.classes, self._admissible)

    def __setstate__(self, state):
        self.field, self.dim, self.classes, self._admissible = state
        self._cache = {}

    def __eq__(self, other):
        if not isinstance(other, Presentation):
            return NotImplemented
        return (
            self.field == other.field
            and self.dim == other.dim
            and all(
                a.M == b.M and a.members == b.members
                for a, b in zip(self.classes, other.classes)
            )
            and self.n_classes == other.n_classes
        )

    def __repr__(self):
        sizes = [len(cls.members) for cls in self.classes]
        return f"Presentation(dim={self.dim}, class_sizes={sizes})"


def canonical_presentation(grids) -> Presentation:
    """Partition grids into commensurability classes and merge each."""
    if not grids:
        raise GridError("no grids given")
    field = grids[0].field
    dim = grids[0].dim
    classes = []
    for idxs in partition_classes(grids):
        M, members = merge_class([grids[i] for i in idxs])
        classes.append((M, members))
    return Presentation(field, dim, classes)


# ----------------------------------------------------------------------
# The rational subspaces attached to marks and classes.

def _inverse_scale_vector(p: Presentation, j: int):
    one = p.field.one()
    return [one / c for c, _ in p.classes[j].members]


def _translation_matrix(p: Presentation, j: int):
    return [list(w) for _, w in p.classes[j].members]


def mark_subspace(p: Presentation, psi, j) -> RationalSubspace:
    """The subspace attached to mark psi within class j.

    Built from the columns of the shifted translation matrix
    W_j − cvec ⊗ (w_psi · M_{j_psi} M_j^(-1)), together with the
    inverse-scale vector cvec = c_psi·(1/c_{j,1}, ..., 1/c_{j,r_j}):
    as a finite vector when j is psi's own class, as a full line
    otherwise.
    """
    jp, ip = psi
    c_psi, w_psi = p.member(psi)
    one = p.field.one()
    vc = _inverse_scale_vector(p, j)
    cvec = [c_psi * x for x in vc]
    Mj_inv = ila.mat_inv([list(r) for r in p.classes[j].M], one)
    T = ila.mat_mul([list(r) for r in p.classes[jp].M], Mj_inv)
    wT = ila.vec_mat(list(w_psi), T)
    W = _translation_matrix(p, j)
    Wpsi = [
        [W[i][t] - cvec[i] * wT[t] for t in range(p.dim)]
        for i in range(len(W))
    ]
    columns = [[Wpsi[i][t] for i in range(len(W))] for t in range(p.dim)]
    if j == jp:
        return smallest_rational_subspace(columns + [cvec], r=len(W))
    return smallest_rational_subspace(columns, line=cvec, r=len(W))


def generic_subspace(p: Presentation, j) -> RationalSubspace:
    """The subspace seen from a generic base point: columns of the
    translation matrix plus the full inverse-scale line."""
    W = _translation_matrix(p, j)
    columns = [[W[i][t] for i in range(len(W))] for t in range(p.dim)]
    return smallest_rational_subspace(
        columns, line=_inverse_scale_vector(p, j), r=len(W)
    )


def is_admissible(p: Presentation):
    """(True, None), or (False, psi) for the first failing mark.

    A presentation is admissible when, for every mark psi = (j, i), the
    inverse-scale vector c_psi·(1/c_{j,1}, ..., 1/c_{j,r_j}) lies in the
    mark subspace of psi's own class modulo Z^{r_j}.
    """
    for psi in p.marks():
        j = psi[0]
        c_psi, _ = p.member(psi)
        cvec = [c_psi * x for x in _inverse_scale_vector(p, j)]
        L = mark_subspace(p, psi, j)
        if not in_subspace_mod_integers(cvec, L):
            return (False, psi)
    return (True, None)


def make_admissible(p: Presentation) -> Presentation:
    """Return an admissible presentation of the same point set.

    Already-admissible input is returned unchanged.  Otherwise each
    class is refined: for every distinct scale u_i the member grids at
    that scale are split into q_i^d cosets at scale q_i·u_i, where q_i
    is the gcd of the i-th coordinates of the saturated integer basis
    of the subspace generated by the inverse-scale line.  Member counts
    grow; the point set does not change.
    """
    ok, _ = p.admissibility()
    if ok:
        return p
    field, d = p.field, p.dim
    one = field.one()
    new_classes = []
    for j, cls in enumerate(p.classes):
        scales = []
        for c, _ in cls.members:
            if not any(c == s for s in scales):
                scales.append(c)
        scales = _member_sort_key([(c, ()) for c in scales])
        scales = [c for c, _ in scales]
        utilde = [one / u for u in scales]
        Lu = smallest_rational_subspace([], line=utilde, r=len(scales))
        qs = []
        for k in range(len(scales)):
            g = 0
            for row in Lu.basis:
                g = gcd(g, abs(row[k]))
            if g == 0:
                raise GridError("internal: scale projection is trivial")
            qs.append(g)
        members = []
        for c, w in cls.members:
            k = next(i for i, s in enumerate(scales) if s == c)
            qk = qs[k]
            if qk == 1:
                members.append((c, w))
                continue
            for a in itertools.product(range(1, qk + 1), repeat=d):
                wv = _canonical_translation(
                    tuple((e + ai) / qk for e, ai in zip(w, a))
                )
                members.append((c * qk, wv))
        members = _dedup_members(members)
        members = _disjointness_rewrite(members, d)
        members = _member_sort_key(members)
        new_classes.append((cls.M, members))
    out = Presentation(field, d, new_classes)
    ok, failing = out.admissibility()
    if not ok:
        raise GridError(
            f"admissibility construction failed at mark {failing}; "
            "this presentation cannot be repaired by scale refinement"
        )
    return out


# ----------------------------------------------------------------------
# Base-point offset matrices and torus component sets.

def offset_matrix(p: Presentation, j, q):
    """The r_j×d matrix with rows w_{j,i} − (1/c_{j,i})·q·M_j^(-1).

    When q is a point of grid psi = (j, i), row i is integral.
    """
    one = p.field.one()
    conv = _element_converter(p.field)
    q = [conv(x) for x in q]
    Mj_inv = ila.mat_inv([list(r) for r in p.classes[j].M], one)
    qM = ila.vec_mat(q, Mj_inv)
    rows = []
    for c, w in p.classes[j].members:
        rows.append(tuple(w[t] - qM[t] / c for t in range(p.dim)))
    return tuple(rows)


def _sl_generators(d):
    if d == 2:
        return (
            ((0, -1), (1, 0)),
            ((1, 1), (0, 1)),
        )
    if d == 3:
        return (
            ((1, 1, 0), (0, 1, 0), (0, 0, 1)),
            ((0, 1, 0), (0, 0, 1), (1, 0, 0)),
        )
    raise GridError("torus component search supports d = 2 and d = 3 only")


class TorusComponentSet:
    """The orbit of a base torus point under the unimodular action,
    modulo the subspace torus: the support components of the fiber
    measure for one class.
    """

    __slots__ = ("class_index", "L", "base", "reps", "mark_row", "mode")

    def __init__(self, class_index, L, base, reps, mark_row, mode):
        self.class_index = class_index
        self.L = L
        self.base = base
        self.reps = reps
        self.mark_row = mark_row
        self.mode = mode

    @property
    def n_components(self):
        return len(self.reps)

    def __repr__(self):
        return (
            f"TorusComponentSet(class={self.class_index}, dim_L={self.L.dim},"
            f" components={self.n_components}, mode={self.mode})"
        )


def _matrix_class_key(U, L):
    cols = [[row[t] for row in U] for t in range(len(U[0]))]
    return tuple(_column_class_key(col, L) for col in cols)


def _reduce_matrix_mod_one(U):
    return tuple(_canonical_translation(row) for row in U)


def grid_point_index(p: Presentation, psi, q):
    """The integer index m with q = c(m + w)M for grid psi, or None."""
    j, _ = psi
    c, w = p.member(psi)
    one = p.field.one()
    conv = _element_converter(p.field)
    q = [conv(x) for x in q]
    Mj_inv = ila.mat_inv([list(r) for r in p.classes[j].M], one)
    qM = ila.vec_mat(q, Mj_inv)
    m = []
    for t in range(p.dim):
        e = qM[t] / c - w[t]
        if not e.is_rational():
            return None
        f = e.as_fraction()
        if f.denominator != 1:
            return None
        m.append(f.numerator)
    return tuple(m)


def torus_components(p: Presentation, j, mode, cap=ORBIT_CAP_DEFAULT):
    """Component representatives of the fiber torus for class j.

    mode is ("generic",) or ("mark", psi) or ("mark", psi, q) with q a
    point of grid psi (default: the anchor point c_psi·w_psi·M_{j_psi}).
    Mark mode requires an admissible presentation.
    """
    field = p.field
    if mode[0] == "generic":
        L = generic_subspace(p, j)
        base = tuple(tuple(w) for _, w in p.classes[j].members)
        mark_row = None
    elif mode[0] == "mark":
        psi = mode[1]
        ok, failing = p.admissibility()
        if not ok:
            raise GridError(
                f"mark-mode torus data needs an admissible presentation "
                f"(failing mark {failing})"
            )
        if len(mode) > 2:
            q = mode[2]
            if grid_point_index(p, psi, q) is None:
                raise GridError("base point q is not a point of grid psi")
        else:
            jp, _ = psi
            c_psi, w_psi = p.member(psi)
            q = [
                c_psi * x
                for x in ila.vec_mat(list(w_psi), [list(r) for r in p.classes[jp].M])
            ]
        L = mark_subspace(p, psi, j)
        base = offset_matrix(p, j, q)
        mark_row = psi[1] if psi[0] == j else None
    else:
        raise GridError(f"unknown torus mode {mode[0]!r}")

    gens = _sl_generators(p.dim)
    gens_field = [
        [[field.rational(x) for x in row] for row in g] for g in gens
    ]
    base_reduced = _reduce_matrix_mod_one(base)
    key0 = _matrix_class_key(base_reduced, L)
    states = {key0: base_reduced}
    queue = [base_reduced]
    while queue:
        U = queue.pop()
        for g in gens_field:
            V = _reduce_matrix_mod_one(ila.mat_mul([list(r) for r in U], g))
            key = _matrix_class_key(V, L)
            if key not in states:
                if len(states) >= cap:
                    raise OrbitCapError(
                        f"component orbit too large (cap {cap}); "
                        "the presentation may be degenerate"
                    )
                states[key] = V
                queue.append(V)
    reps = tuple(states.values())
    return TorusComponentSet(j, L, base_reduced, reps, mark_row, mode[0])


# ----------------------------------------------------------------------
# Exact window enumeration (for point-set preservation checks and the
# analyze command).

def enumerate_window(p: Presentation, bound):
    """The set of exact points of the union lying in [-bound, bound]^d.

    Returns a frozenset of coefficient-tuple keys; equality of these
    sets is exact point-set equality on the window.
    """
    field = p.field
    bnd = field.rational(bound)
    points = set()
    for j, cls in enumerate(p.classes):
        M = [list(r) for r in cls.M]
        Mf = [[float(x) for x in row] for row in M]
        for c, w in cls.members:
            cf = float(c)
            # Integer candidate box from the float inverse image of the
            # window corners, padded against rounding.
            inv = ila.mat_inv(Mf, 1.0)
            corners = itertools.product(*[(-float(bound), float(bound))] * p.dim)
            los = [float("inf")] * p.dim
            his = [-float("inf")] * p.dim
            for corner in corners:
                m = [
                    sum(corner[s] * inv[s][t] for s in range(p.dim)) / cf
                    - float(w[t])
                    for t in range(p.dim)
                ]
                for t in range(p.dim):
                    los[t] = min(los[t], m[t])
                    his[t] = max(his[t], m[t])
            ranges = [
                range(int(lo) - 2, int(hi) + 3) for lo, hi in zip(los, his)
            ]
            for m in itertools.product(*ranges):
                vec = [w[t] + m[t] for t in range(p.dim)]
                x = [c * e for e in ila.vec_mat(vec, M)]
                if all(
                    (e - bnd).sign() <= 0 and (e + bnd).sign() >= 0 for e in x
                ):
                    points.add(tuple(e.coeffs for e in x))
    return frozenset(points)
