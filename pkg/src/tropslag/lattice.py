"""Exact integer linear algebra on rank-2 sublattices of Z^n.

All arithmetic uses Python integers, so nothing here can overflow. Vectors
are plain tuples of ints.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Sequence

from .errors import NotSaturated, RankMismatch, ZeroVector

IntVec = tuple[int, ...]


def primitive(v: Sequence[int]) -> IntVec:
    """Return ``v`` divided by the gcd of its entries."""
    v = tuple(int(x) for x in v)
    g = reduce(gcd, v, 0)
    if g == 0:
        raise ZeroVector(f"zero vector {v} has no primitive direction")
    return tuple(x // g for x in v)


def is_primitive(v: Sequence[int]) -> bool:
    return reduce(gcd, (int(x) for x in v), 0) == 1


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    # returns (g, x, y) with x*a + y*b = g >= 0
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def _identity(n: int) -> list[list[int]]:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def column_echelon(rows: Sequence[Sequence[int]]):
    """Column-reduce an integer matrix by unimodular column operations.

    Returns ``(H, U, Uinv, rank)`` with ``A @ U = H``, where the first
    ``rank`` columns of ``H`` are in lower echelon form and the remaining
    columns vanish. ``Uinv`` is the exact inverse of ``U``.
    """
    A = [list(map(int, r)) for r in rows]
    k = len(A)
    n = len(A[0]) if k else 0
    U = _identity(n)
    V = _identity(n)
    col = 0
    for i in range(k):
        if col >= n:
            break
        for q in range(col + 1, n):
            a, b = A[i][col], A[i][q]
            if b == 0:
                continue
            g, x, y = _egcd(a, b)
            ag, bg = a // g, b // g
            # new_col = x*col + y*q ; new_q = -bg*col + ag*q
            for M in (A, U):
                for r in M:
                    cp, cq = r[col], r[q]
                    r[col] = x * cp + y * cq
                    r[q] = -bg * cp + ag * cq
            # inverse acts on rows col, q of V
            rp, rq = V[col], V[q]
            V[col] = [ag * s + bg * t for s, t in zip(rp, rq)]
            V[q] = [-y * s + x * t for s, t in zip(rp, rq)]
        if A[i][col] != 0:
            if A[i][col] < 0:
                for M in (A, U):
                    for r in M:
                        r[col] = -r[col]
                V[col] = [-s for s in V[col]]
            col += 1
    return A, U, V, col


def row_hnf(rows: Sequence[Sequence[int]]) -> list[IntVec]:
    """Row Hermite normal form of a full-row-rank integer matrix."""
    H, _, _, r = column_echelon([list(c) for c in zip(*rows)])
    # transpose back: column HNF of A^T gives row echelon of A
    cols = [list(c) for c in zip(*H)][:r]
    # reduce entries above each pivot into [0, pivot)
    pivots = []
    for i, c in enumerate(cols):
        j = next(j for j, x in enumerate(c) if x != 0)
        pivots.append(j)
    for i in range(len(cols)):
        pj = pivots[i]
        p = cols[i][pj]
        for k in range(i):
            q = cols[k][pj] // p
            if q:
                cols[k] = [a - q * b for a, b in zip(cols[k], cols[i])]
    return [tuple(c) for c in cols]


def rank(vectors: Sequence[Sequence[int]]) -> int:
    if not vectors:
        return 0
    return column_echelon(vectors)[3]


def saturated_rank2_basis(vectors: Sequence[Sequence[int]]) -> tuple[IntVec, IntVec]:
    """Hermite-normal-form basis of Z^n intersected with the rational span.

    Raises RankMismatch unless the vectors span a rank-2 subgroup.
    """
    vecs = [tuple(int(x) for x in v) for v in vectors]
    if not vecs:
        raise RankMismatch("no vectors given")
    n = len(vecs[0])
    _, U, _, r = column_echelon(vecs)
    if r != 2:
        raise RankMismatch(f"span has rank {r}, expected 2")
    if n == 2:
        basis = [(1, 0), (0, 1)]
    else:
        # integer kernel of the vectors, then the kernel of that kernel
        K = [[U[i][j] for i in range(n)] for j in range(r, n)]
        _, U2, _, r2 = column_echelon(K)
        basis = [tuple(U2[i][j] for i in range(n)) for j in range(r2, n)]
    b1, b2 = row_hnf(basis)
    return b1, b2


@dataclass(frozen=True)
class UnimodularFrame:
    """Integer change of coordinates ``y = matrix @ x`` with integer inverse.

    The first two rows give coordinates on the rank-2 lattice the frame was
    built from; the remaining rows are the fibre directions.
    """

    matrix: tuple[IntVec, ...]
    inverse: tuple[IntVec, ...]

    @property
    def dim(self) -> int:
        return len(self.matrix)

    def apply(self, v):
        return tuple(sum(a * x for a, x in zip(row, v)) for row in self.matrix)

    def apply_inverse(self, y):
        return tuple(sum(a * x for a, x in zip(row, y)) for row in self.inverse)

    def det(self) -> int:
        return int(_det_exact(self.matrix))

    def check(self) -> bool:
        n = self.dim
        prod = [
            [sum(self.matrix[i][k] * self.inverse[k][j] for k in range(n)) for j in range(n)]
            for i in range(n)
        ]
        return prod == _identity(n)


def _det_exact(M) -> Fraction:
    A = [[Fraction(x) for x in r] for r in M]
    n = len(A)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if A[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            A[c], A[p] = A[p], A[c]
            det = -det
        det *= A[c][c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            if f:
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return det


def complete_to_unimodular(basis: Sequence[Sequence[int]]) -> UnimodularFrame:
    """Unimodular frame F with F @ b1 = e1 and F @ b2 = e2."""
    b1, b2 = (tuple(int(x) for x in b) for b in basis)
    n = len(b1)
    H, U, V, r = column_echelon([b1, b2])
    if r != 2:
        raise NotSaturated("basis vectors are linearly dependent")
    h11, h12 = H[0][0], H[0][1]
    h21, h22 = H[1][0], H[1][1]
    d = h11 * h22 - h12 * h21
    if abs(d) != 1:
        raise NotSaturated(f"basis spans an index-{abs(d)} sublattice of its saturation")
    # B^T U = [H 0]  =>  U^T B = [H^T; 0];  F = diag(H^-T, I) U^T
    hinvT = [[h22 * d, -h21 * d], [-h12 * d, h11 * d]]
    UT = [list(c) for c in zip(*U)]
    VT = [list(c) for c in zip(*V)]
    F = [
        [hinvT[i][0] * UT[0][j] + hinvT[i][1] * UT[1][j] for j in range(n)] for i in range(2)
    ] + UT[2:]
    # F^-1 = U^-T diag(H^T, I)
    HT = [[h11, h21], [h12, h22]]
    Finv = [
        [VT[i][0] * HT[0][j] + VT[i][1] * HT[1][j] for j in range(2)] + VT[i][2:]
        for i in range(n)
    ]
    frame = UnimodularFrame(tuple(map(tuple, F)), tuple(map(tuple, Finv)))
    assert frame.check()
    return frame


def complement_vector(m: Sequence[int], normal: Sequence[int]) -> tuple[int, int]:
    """Shortest m' in Z^2 with <normal, m'> = 1, reduced modulo ``m``.

    ``m`` spans the kernel of ``normal``; ties are broken lexicographically.
    """
    n1, n2 = int(normal[0]), int(normal[1])
    g, x, y = _egcd(n1, n2)
    if g != 1:
        raise ZeroVector(f"normal {tuple(normal)} is not primitive")
    base = (x, y)
    m1, m2 = int(m[0]), int(m[1])
    mm = m1 * m1 + m2 * m2
    k0 = -round((base[0] * m1 + base[1] * m2) / mm)
    cands = [(base[0] + k * m1, base[1] + k * m2) for k in range(k0 - 2, k0 + 3)]
    return min(cands, key=lambda c: (c[0] ** 2 + c[1] ** 2, c))
