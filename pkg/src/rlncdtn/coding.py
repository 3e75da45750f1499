"""Random linear network coding over GF(2^k).

A node's :class:`Buffer` is a growing linear system. It keeps the received
packets plus an incrementally reduced echelon form of ``coefficients ||
payload`` rows, so innovativeness checks and inserts cost O(rank * row
length) instead of a full elimination per contact.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field as dc_field

from .gf_field import FieldSpec, get_field


class CodingError(ValueError):
    pass


@dataclass
class VariableBatch:
    """nu original (uncoded) source packets, each ``packet_size`` bits long."""

    batch_id: int
    variables: list[list[int]]
    field: FieldSpec = dc_field(default_factory=get_field)

    def __post_init__(self):
        if not self.variables:
            raise CodingError("a batch needs at least one variable")
        lengths = {len(v) for v in self.variables}
        if len(lengths) != 1:
            raise CodingError("all variables in a batch must have the same length")
        if 0 in lengths:
            raise CodingError("variables must carry at least one symbol")

    @property
    def nu(self) -> int:
        return len(self.variables)

    @property
    def payload_len(self) -> int:
        return len(self.variables[0])

    @property
    def packet_size(self) -> int:
        """K, in bits."""
        return self.payload_len * self.field.k

    @classmethod
    def random(cls, batch_id: int, nu: int, packet_size: int,
               field: FieldSpec | None = None,
               rng: random.Random | None = None) -> "VariableBatch":
        field = field or get_field()
        rng = rng or random.Random()
        if nu < 1:
            raise CodingError("nu must be >= 1")
        if packet_size <= 0 or packet_size % field.k:
            raise CodingError(
                f"packet size {packet_size} is not a positive multiple of k={field.k}")
        width = packet_size // field.k
        k = field.k
        variables = [[rng.getrandbits(k) for _ in range(width)] for _ in range(nu)]
        return cls(batch_id, variables, field)


@dataclass(slots=True)
class CodedPacket:
    batch_id: int
    coefficients: list[int]
    payload: list[int]
    release_time: float | None = None
    # Index of the batch packet this is a copy of (seeded / Delta packets).
    lineage: int | None = None

    @property
    def packet_id(self) -> tuple[int, int | None]:
        return (self.batch_id, self.lineage)


class InsertResult(enum.Enum):
    INSERTED = "inserted"
    REDUNDANT = "redundant"
    FULL = "full"

    def __bool__(self) -> bool:
        return self is InsertResult.INSERTED


class Buffer:
    """Innovative coded packets of one batch held by a node."""

    __slots__ = ("batch_id", "nu", "capacity", "field", "rows", "_ech", "_piv")

    def __init__(self, batch_id: int, nu: int, field: FieldSpec | None = None,
                 capacity: int | None = None):
        if nu < 1:
            raise CodingError("nu must be >= 1")
        self.batch_id = batch_id
        self.nu = nu
        self.field = field or get_field()
        self.capacity = nu if capacity is None else capacity
        self.rows: list[CodedPacket] = []
        self._ech: list[list[int]] = []
        self._piv: list[int] = []

    def __len__(self) -> int:
        return len(self.rows)

    def __repr__(self) -> str:
        return f"Buffer(batch={self.batch_id}, rank={self.rank}/{self.nu})"

    @property
    def rank(self) -> int:
        return len(self._piv)

    @property
    def full_rank(self) -> bool:
        return len(self._piv) == self.nu

    @property
    def echelon(self) -> list[list[int]]:
        """Reduced coefficient rows (copies)."""
        return [r[:self.nu] for r in self._ech]

    def clear(self, batch_id: int | None = None) -> None:
        if batch_id is not None:
            self.batch_id = batch_id
        self.rows.clear()
        self._ech.clear()
        self._piv.clear()

    def _reduce(self, v: list[int]) -> list[int]:
        # Insertion order works: row j has zeros at the pivots of rows i < j.
        axpy = self.field.axpy
        for r, p in zip(self._ech, self._piv):
            c = v[p]
            if c:
                v = axpy(v, c, r)
        return v

    def _pivot_of(self, v: list[int]) -> int:
        for i in range(self.nu):
            if v[i]:
                return i
        return -1

    def _check_batch(self, pkt: CodedPacket) -> None:
        if pkt.batch_id != self.batch_id:
            raise CodingError(
                f"packet of batch {pkt.batch_id} offered to buffer of batch {self.batch_id}")
        if len(pkt.coefficients) != self.nu:
            raise CodingError("coefficient vector length does not match nu")

    def is_innovative(self, pkt: CodedPacket) -> bool:
        self._check_batch(pkt)
        return self.vector_is_innovative(pkt.coefficients)

    def vector_is_innovative(self, coefficients: list[int]) -> bool:
        if len(self._piv) == self.nu:
            return False
        return self._pivot_of(self._reduce(list(coefficients))) >= 0

    def contains(self, coefficients: list[int]) -> bool:
        """Is the coefficient vector in this buffer's row space?"""
        return not self.vector_is_innovative(coefficients)

    def insert(self, pkt: CodedPacket) -> InsertResult:
        self._check_batch(pkt)
        if len(self.rows) >= self.capacity or len(self._piv) == self.nu:
            # A full-rank buffer cannot gain anything, even with free slots.
            return InsertResult.FULL if len(self.rows) >= self.capacity else InsertResult.REDUNDANT
        v = self._reduce(pkt.coefficients + pkt.payload)
        p = self._pivot_of(v)
        if p < 0:
            return InsertResult.REDUNDANT
        inv = self.field.inverse[v[p]]
        if inv != 1:
            v = self.field.scale(inv, v)
        self._ech.append(v)
        self._piv.append(p)
        self.rows.append(pkt)
        return InsertResult.INSERTED

    def absorb(self, vector: list[int]) -> InsertResult:
        """Insert a raw ``coefficients || payload`` vector (simulation fast path)."""
        if len(self.rows) >= self.capacity:
            return InsertResult.FULL
        if len(self._piv) == self.nu:
            return InsertResult.REDUNDANT
        v = self._reduce(vector)
        p = self._pivot_of(v)
        if p < 0:
            return InsertResult.REDUNDANT
        inv = self.field.inverse[v[p]]
        if inv != 1:
            v = self.field.scale(inv, v)
        self._ech.append(v)
        self._piv.append(p)
        nu = self.nu
        self.rows.append(CodedPacket(self.batch_id, vector[:nu], vector[nu:]))
        return InsertResult.INSERTED

    def random_vector(self, rng: random.Random) -> list[int]:
        """Uniform random element of the row space, as ``coeffs || payload``."""
        ech = self._ech
        if not ech:
            raise CodingError("cannot combine from an empty buffer")
        k = self.field.k
        axpy = self.field.axpy
        out = [0] * len(ech[0])
        for r in ech:
            c = rng.getrandbits(k)
            if c:
                out = axpy(out, c, r)
        return out

    def decode(self) -> list[list[int]] | None:
        """Original variables, or None while rank < nu."""
        nu = self.nu
        if len(self._piv) < nu:
            return None
        f = self.field
        rows = sorted(zip(self._piv, [list(r) for r in self._ech]))
        mat = [r for _, r in rows]
        # Back substitution; rows are already normalised on their pivots.
        for i in range(nu - 1, -1, -1):
            for j in range(i):
                c = mat[j][i]
                if c:
                    mat[j] = f.axpy(mat[j], c, mat[i])
        return [r[nu:] for r in mat]


def random_combination(buffer: Buffer, rng: random.Random) -> CodedPacket:
    """Scale every buffered packet by a random field element and add them up.

    The result may be the zero vector or lie in the receiver's span; that
    1/q loss is part of the model and is not filtered out.
    """
    v = buffer.random_vector(rng)
    nu = buffer.nu
    return CodedPacket(buffer.batch_id, v[:nu], v[nu:])


def encode_batch(batch: VariableBatch, rng: random.Random,
                 max_tries: int = 10_000) -> list[CodedPacket]:
    """nu coded packets with an invertible coefficient matrix.

    Rejection sampling: draw random nu x nu matrices until one has full rank.
    """
    f = batch.field
    nu = batch.nu
    for _ in range(max_tries):
        coeffs = [[rng.getrandbits(f.k) for _ in range(nu)] for _ in range(nu)]
        probe = Buffer(batch.batch_id, nu, f)
        ok = all(probe.insert(CodedPacket(batch.batch_id, c, [])) for c in coeffs)
        if ok:
            break
    else:
        raise CodingError("could not draw an invertible coefficient matrix")
    packets = []
    for j, c in enumerate(coeffs):
        payload = [0] * batch.payload_len
        for coef, var in zip(c, batch.variables):
            if coef:
                payload = f.axpy(payload, coef, var)
        packets.append(CodedPacket(batch.batch_id, c, payload, lineage=j))
    return packets


def source_buffer(batch: VariableBatch) -> Buffer:
    """Buffer holding the plain variables (identity coefficients)."""
    nu = batch.nu
    buf = Buffer(batch.batch_id, nu, batch.field)
    for i, var in enumerate(batch.variables):
        coeffs = [0] * nu
        coeffs[i] = 1
        buf.insert(CodedPacket(batch.batch_id, coeffs, list(var), lineage=i))
    return buf


def header_overhead_bits(field: FieldSpec, nu: int, id_bits: int) -> int:
    """Coefficient vector plus the identities of the combined variables."""
    if nu < 0 or id_bits < 0:
        raise CodingError("nu and id_bits must be non-negative")
    return nu * field.k + nu * id_bits
