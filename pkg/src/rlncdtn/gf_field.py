"""Arithmetic over GF(2^k), 1 <= k <= 16.

Elements are plain ints in ``[0, q)``. A :class:`FieldSpec` owns the
log/antilog tables (and, for k <= 8, a full multiplication table) so the
row operations used by Gaussian elimination stay cheap. :class:`FieldElement`
is a small value wrapper for callers that prefer operator syntax.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

# Irreducible reduction polynomials, bit i = coefficient of x^i.
DEFAULT_POLYS = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x83,
    8: 0x11B,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,
}

# Full q*q product table only up to this width (64K entries at k=8).
_FULL_TABLE_MAX_K = 8


class FieldError(ValueError):
    pass


def poly_degree(p: int) -> int:
    return p.bit_length() - 1


def poly_mod(a: int, m: int) -> int:
    """Remainder of a modulo m over GF(2)[x]."""
    dm = poly_degree(m)
    while a and poly_degree(a) >= dm:
        a ^= m << (poly_degree(a) - dm)
    return a


def clmul_mod(a: int, b: int, poly: int) -> int:
    """Shift-and-reduce product of a and b modulo poly."""
    k = poly_degree(poly)
    top = 1 << k
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= poly
    return r


def is_irreducible(poly: int) -> bool:
    """Trial division by every polynomial of degree 1..deg/2."""
    k = poly_degree(poly)
    if k < 1:
        return False
    for d in range(1, k // 2 + 1):
        for f in range(1 << d, 1 << (d + 1)):
            if poly_mod(poly, f) == 0:
                return False
    return True


class FieldSpec:
    """GF(2^k) defined by an irreducible reduction polynomial.

    Immutable after construction; instances are cached by :func:`get_field`
    and safe to share between simulations.
    """

    __slots__ = ("k", "reduction_poly", "q", "generator", "exp", "log",
                 "inverse", "_mul_rows")

    def __init__(self, k: int = 8, reduction_poly: int | None = None):
        if not 1 <= k <= 16:
            raise FieldError(f"k must be in [1, 16], got {k}")
        if reduction_poly is None:
            reduction_poly = DEFAULT_POLYS[k]
        if poly_degree(reduction_poly) != k:
            raise FieldError(
                f"reduction polynomial {reduction_poly:#x} has degree "
                f"{poly_degree(reduction_poly)}, expected {k}")
        if not is_irreducible(reduction_poly):
            raise FieldError(f"reduction polynomial {reduction_poly:#x} is reducible")
        self.k = k
        self.reduction_poly = reduction_poly
        self.q = 1 << k
        self.generator = self._find_generator()
        self._build_tables()

    def _find_generator(self) -> int:
        q = self.q
        if q == 2:
            return 1
        order = q - 1
        # Only the prime divisors of q-1 need checking.
        primes = []
        n, p = order, 2
        while p * p <= n:
            if n % p == 0:
                primes.append(p)
                while n % p == 0:
                    n //= p
            p += 1
        if n > 1:
            primes.append(n)
        for g in range(2, q):
            if all(self._pow_slow(g, order // p) != 1 for p in primes):
                return g
        raise FieldError("no generator found")  # unreachable for a field

    def _pow_slow(self, a: int, e: int) -> int:
        r = 1
        while e:
            if e & 1:
                r = clmul_mod(r, a, self.reduction_poly)
            a = clmul_mod(a, a, self.reduction_poly)
            e >>= 1
        return r

    def _build_tables(self) -> None:
        q = self.q
        n = q - 1
        exp = [0] * (2 * q)
        log = [0] * q
        x = 1
        for i in range(n):
            exp[i] = x
            log[x] = i
            x = clmul_mod(x, self.generator, self.reduction_poly)
        for i in range(n, 2 * q):
            exp[i] = exp[i - n]
        self.exp = exp
        self.log = log
        inverse = [0] * q
        for a in range(1, q):
            inverse[a] = exp[(n - log[a]) % n]
        self.inverse = inverse
        if self.k <= _FULL_TABLE_MAX_K:
            rows = [[0] * q]
            for a in range(1, q):
                la = log[a]
                rows.append([0] + [exp[la + log[b]] for b in range(1, q)])
            self._mul_rows = rows
        else:
            self._mul_rows = None

    def __repr__(self) -> str:
        return f"FieldSpec(k={self.k}, reduction_poly={self.reduction_poly:#x})"

    def __eq__(self, other) -> bool:
        return (isinstance(other, FieldSpec) and self.k == other.k
                and self.reduction_poly == other.reduction_poly)

    def __hash__(self) -> int:
        return hash((self.k, self.reduction_poly))

    def __reduce__(self):
        return (get_field, (self.k, self.reduction_poly))

    # scalar operations -------------------------------------------------

    def add(self, a: int, b: int) -> int:
        return a ^ b

    sub = add

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[self.log[a] + self.log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return self.inverse[a]

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def element(self, value: int) -> "FieldElement":
        return FieldElement(value, self)

    # row operations (hot path of elimination) ---------------------------

    def scale(self, c: int, row: list[int]) -> list[int]:
        """c * row."""
        if c == 0:
            return [0] * len(row)
        if c == 1:
            return list(row)
        if self._mul_rows is not None:
            m = self._mul_rows[c]
            return [m[b] for b in row]
        exp, log = self.exp, self.log
        lc = log[c]
        return [exp[lc + log[b]] if b else 0 for b in row]

    def axpy(self, v: list[int], c: int, row: list[int]) -> list[int]:
        """v + c * row."""
        if c == 1:
            return [a ^ b for a, b in zip(v, row)]
        if self._mul_rows is not None:
            m = self._mul_rows[c]
            return [a ^ m[b] for a, b in zip(v, row)]
        exp, log = self.exp, self.log
        lc = log[c]
        return [a ^ exp[lc + log[b]] if b else a for a, b in zip(v, row)]

    def dot(self, u: list[int], v: list[int]) -> int:
        acc = 0
        for a, b in zip(u, v):
            if a and b:
                acc ^= self.exp[self.log[a] + self.log[b]]
        return acc


@lru_cache(maxsize=None)
def get_field(k: int = 8, reduction_poly: int | None = None) -> FieldSpec:
    """Shared, cached field instance."""
    if reduction_poly is None:
        reduction_poly = DEFAULT_POLYS.get(k)
    return FieldSpec(k, reduction_poly)


def field_for_q(q: int) -> FieldSpec:
    k = q.bit_length() - 1
    if q < 2 or (1 << k) != q:
        raise FieldError(f"q must be a power of two, got {q}")
    return get_field(k)


@dataclass(frozen=True, slots=True)
class FieldElement:
    value: int
    field: FieldSpec

    def __post_init__(self):
        if not 0 <= self.value < self.field.q:
            raise FieldError(f"{self.value} is outside GF({self.field.q})")

    def _same(self, other: "FieldElement") -> None:
        if other.field != self.field:
            raise FieldError("operands belong to different fields")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        self._same(other)
        return FieldElement(self.value ^ other.value, self.field)

    __sub__ = __add__

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        self._same(other)
        return FieldElement(self.field.mul(self.value, other.value), self.field)

    def __truediv__(self, other: "FieldElement") -> "FieldElement":
        self._same(other)
        return FieldElement(self.field.div(self.value, other.value), self.field)

    def inverse(self) -> "FieldElement":
        return FieldElement(self.field.inv(self.value), self.field)

    def __int__(self) -> int:
        return self.value

    def __bool__(self) -> bool:
        return self.value != 0


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def inv(a: FieldElement) -> FieldElement:
    return a.inverse()
