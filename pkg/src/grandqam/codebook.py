"""Binary linear block codes with bit-packed GF(2) matrices.

Rows of the generator and parity-check matrices are stored as Python
integers (bit ``j`` of a row is column ``j``), so row operations are
word-parallel XORs and a codebook-membership query costs ``n - k``
AND + popcount operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GeneratorMatrix",
    "ParityCheckMatrix",
    "LinearCode",
    "pack_bits",
    "unpack_bits",
    "make_random_linear_code",
    "make_crc_code",
    "systematic_code",
    "encode",
    "is_member",
    "syndrome",
    "codebook_table",
    "crc_remainder",
]

# A binary word is a 1-D uint8 array of 0/1 values.
BinaryWord = np.ndarray


def pack_bits(bits: Iterable[int]) -> int:
    """Pack a 0/1 sequence into an int with bit j = position j."""
    b = np.ascontiguousarray(bits, dtype=np.uint8)
    if b.ndim != 1:
        raise ValueError("expected a 1-D bit sequence")
    return int.from_bytes(np.packbits(b, bitorder="little").tobytes(), "little")


def unpack_bits(word: int, n: int) -> BinaryWord:
    """Unpack the low n bits of an int into a uint8 array."""
    raw = np.frombuffer(word.to_bytes((n + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, count=n, bitorder="little")


@dataclass
class GeneratorMatrix:
    """k x n generator over GF(2), rows bit-packed."""

    n: int
    k: int
    rows: tuple[int, ...]
    systematic: bool = True

    def to_array(self) -> np.ndarray:
        return np.array([unpack_bits(r, self.n) for r in self.rows], dtype=np.uint8)


@dataclass
class ParityCheckMatrix:
    """(n-k) x n parity-check matrix over GF(2), rows bit-packed."""

    n: int
    rows: tuple[int, ...]

    def to_array(self) -> np.ndarray:
        return np.array([unpack_bits(r, self.n) for r in self.rows], dtype=np.uint8)


@dataclass
class LinearCode:
    """An [n, k] binary linear code.

    Immutable after construction; instances may be shared freely across
    simulation workers.
    """

    n: int
    k: int
    generator: GeneratorMatrix
    parity: ParityCheckMatrix
    label: str = ""

    @property
    def rate(self) -> float:
        return self.k / self.n

    @cached_property
    def parity_columns(self) -> tuple[int, ...]:
        """Column j of H packed into an (n-k)-bit int.

        The syndrome of a word is the XOR of the columns at its set bits,
        which is what lets decoders update syndromes incrementally as
        they flip bits.
        """
        cols = []
        for j in range(self.n):
            c = 0
            for r, row in enumerate(self.parity.rows):
                c |= ((row >> j) & 1) << r
            cols.append(c)
        return tuple(cols)

    @cached_property
    def generator_array(self) -> np.ndarray:
        return self.generator.to_array()


def systematic_code(p_block: np.ndarray, label: str = "") -> LinearCode:
    """Build the systematic code G = [I | P], H = [P^T | I] from a k x (n-k) P."""
    p = np.asarray(p_block, dtype=np.uint8)
    if p.ndim != 2:
        raise ValueError("P must be a 2-D bit matrix")
    k, m = p.shape
    n = k + m
    g_rows = tuple((1 << i) | (pack_bits(p[i]) << k) for i in range(k))
    h_rows = tuple(pack_bits(p[:, r]) | (1 << (k + r)) for r in range(m))
    return LinearCode(
        n=n,
        k=k,
        generator=GeneratorMatrix(n=n, k=k, rows=g_rows, systematic=True),
        parity=ParityCheckMatrix(n=n, rows=h_rows),
        label=label,
    )


def make_random_linear_code(n: int, k: int, seed: int) -> LinearCode:
    """Random systematic linear code with P drawn uniformly over GF(2).

    Deterministic for a fixed seed. rank(G) = k holds by the identity
    prefix regardless of the draw.
    """
    if not 0 < k < n:
        raise ValueError(f"need 0 < k < n, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    p = rng.integers(0, 2, size=(k, n - k), dtype=np.uint8)
    return systematic_code(p, label=f"RLC[{n},{k}],seed={seed}")


def crc_remainder(bits: Sequence[int], poly_int: int, degree: int) -> int:
    """Remainder of bits(x) * x^degree modulo the generator polynomial.

    MSB-first long division with a zero initial register; ``poly_int``
    carries the leading coefficient at bit ``degree``.
    """
    reg = 0
    top = 1 << degree
    for b in bits:
        reg = (reg << 1) | int(b)
        if reg & top:
            reg ^= poly_int
    for _ in range(degree):
        reg <<= 1
        if reg & top:
            reg ^= poly_int
    return reg


def _poly_to_int(poly: Sequence[int]) -> int:
    # coefficients MSB-first: poly[0] is the leading term
    v = 0
    for c in poly:
        v = (v << 1) | (int(c) & 1)
    return v


def make_crc_code(n: int, k: int, poly: Sequence[int]) -> LinearCode:
    """Systematic CRC code: parity bits are the CRC remainder of the message.

    Args:
        n: codeword length in bits.
        k: message length in bits.
        poly: generator polynomial coefficients, MSB first; the degree
            must equal n - k and the leading coefficient must be 1.

    A word is a member iff the CRC remainder of the whole word is zero,
    which coincides with the syndrome test against H.
    """
    if not 0 < k < n:
        raise ValueError(f"need 0 < k < n, got n={n}, k={k}")
    coeffs = [int(c) & 1 for c in poly]
    degree = len(coeffs) - 1
    if degree != n - k:
        raise ValueError(f"polynomial degree {degree} != n-k = {n - k}")
    if coeffs[0] != 1:
        raise ValueError("leading polynomial coefficient must be 1")
    poly_int = _poly_to_int(coeffs)

    p = np.zeros((k, n - k), dtype=np.uint8)
    msg = [0] * k
    for i in range(k):
        msg[i] = 1
        rem = crc_remainder(msg, poly_int, degree)
        msg[i] = 0
        # parity bit t carries the coefficient of x^(degree-1-t)
        for t in range(degree):
            p[i, t] = (rem >> (degree - 1 - t)) & 1
    code = systematic_code(p, label=f"CRC[{n},{k}],poly=0x{poly_int:x}")
    return code


def _check_word(code: LinearCode, word: Iterable[int], length: int) -> np.ndarray:
    w = np.asarray(word, dtype=np.uint8)
    if w.shape != (length,):
        raise ValueError(f"expected a length-{length} word, got shape {w.shape}")
    return w


def encode(code: LinearCode, message: Iterable[int]) -> BinaryWord:
    """Encode a k-bit message as message @ G over GF(2)."""
    m = _check_word(code, message, code.k)
    acc = 0
    rows = code.generator.rows
    for i in np.flatnonzero(m):
        acc ^= rows[i]
    return unpack_bits(acc, code.n)


def is_member(code: LinearCode, word: Iterable[int]) -> bool:
    """Codebook membership: true iff H @ word^T = 0 over GF(2)."""
    w = _check_word(code, word, code.n)
    wint = pack_bits(w)
    return all((row & wint).bit_count() % 2 == 0 for row in code.parity.rows)


def syndrome(code: LinearCode, packed_word: int) -> int:
    """Syndrome of a bit-packed word, packed into an (n-k)-bit int."""
    s = 0
    for r, row in enumerate(code.parity.rows):
        s |= ((row & packed_word).bit_count() & 1) << r
    return s


def codebook_table(code: LinearCode) -> np.ndarray:
    """All 2^k codewords as a (2^k, n) uint8 array, message order.

    Only for small codes; refuses k > 20.
    """
    if code.k > 20:
        raise ValueError(f"codebook too large to enumerate: k={code.k}")
    msgs = ((np.arange(1 << code.k)[:, None] >> np.arange(code.k)) & 1).astype(np.uint8)
    return (msgs @ code.generator_array) % 2
