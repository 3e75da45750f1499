"""Independent reference implementations used by the tests.

These deliberately avoid the package's tables: multiplication is shift-and-add
with polynomial reduction, inversion is exhaustive search.
"""
from __future__ import annotations


def slow_mul(a: int, b: int, poly: int) -> int:
    deg = poly.bit_length() - 1
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
        if a >> deg & 1:
            a ^= poly
    return acc


def slow_inv(a: int, poly: int) -> int:
    q = 1 << (poly.bit_length() - 1)
    for x in range(1, q):
        if slow_mul(a, x, poly) == 1:
            return x
    raise ZeroDivisionError


def slow_rank(rows: list[list[int]], poly: int) -> int:
    """Rank by textbook Gaussian elimination with explicit pivot search."""
    m = [list(r) for r in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    for col in range(ncols):
        piv = next((i for i in range(rank, len(m)) if m[i][col]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = slow_inv(m[rank][col], poly)
        m[rank] = [slow_mul(inv, x, poly) for x in m[rank]]
        for i in range(len(m)):
            if i != rank and m[i][col]:
                c = m[i][col]
                m[i] = [x ^ slow_mul(c, y, poly) for x, y in zip(m[i], m[rank])]
        rank += 1
    return rank
