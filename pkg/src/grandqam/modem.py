"""Gray-mapped square QAM, AWGN channel, candidate sets, and Log-MAP demapping.

Constellations are normalized to unit average symbol energy, so the
Eb/N0 conversion is the same for every modulation order. Bit patterns
are the concatenation of the per-axis reflected Gray labels, I axis
first, MSB first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Constellation",
    "ChannelParams",
    "build_constellation",
    "bpsk_constellation",
    "modulate",
    "awgn",
    "hard_detect",
    "candidates",
    "logmap_demap",
    "ebn0_to_n0",
    "symbols_to_bits",
]


@dataclass
class Constellation:
    """A 2^ms point constellation indexed by bit pattern.

    ``points[p]`` is the complex coordinate of the pattern ``p`` read
    MSB first. Immutable after construction.
    """

    ms: int
    points: np.ndarray
    label: str = ""

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @cached_property
    def index_bits(self) -> np.ndarray:
        """(2^ms, ms) uint8 table: row p holds the bits of pattern p, MSB first."""
        p = np.arange(self.size)[:, None]
        shifts = np.arange(self.ms - 1, -1, -1)
        return ((p >> shifts) & 1).astype(np.uint8)

    @cached_property
    def bit_is_one(self) -> np.ndarray:
        """(ms, 2^ms) bool masks selecting the points whose bit l equals 1."""
        return self.index_bits.T == 1


def build_constellation(ms: int) -> Constellation:
    """Square QAM with per-axis reflected Gray labels, unit average energy.

    Per-axis amplitude levels are {±1, ±3, ..., ±(2^(ms/2)-1)} before
    scaling. Only ms in {2, 4, 6, 8} is accepted.
    """
    if ms % 2 != 0 or ms not in (2, 4, 6, 8):
        raise ValueError(f"unsupported bits per symbol: {ms}")
    half = ms // 2
    levels_per_axis = 1 << half
    levels = 2 * np.arange(levels_per_axis) - (levels_per_axis - 1)
    gray = np.arange(levels_per_axis) ^ (np.arange(levels_per_axis) >> 1)
    pts = np.empty(1 << ms, dtype=np.complex128)
    for ui in range(levels_per_axis):
        for uq in range(levels_per_axis):
            pattern = (int(gray[ui]) << half) | int(gray[uq])
            pts[pattern] = levels[ui] + 1j * levels[uq]
    # mean per-axis level energy is (L^2 - 1) / 3
    pts /= math.sqrt(2 * (levels_per_axis**2 - 1) / 3)
    return Constellation(ms=ms, points=pts, label=f"{1 << ms}-QAM")


def bpsk_constellation() -> Constellation:
    """Two-point real constellation: bit 0 -> -1, bit 1 -> +1.

    The one-bit-per-symbol case used to check that symbol-level
    decoding degenerates to the binary path.
    """
    return Constellation(ms=1, points=np.array([-1.0 + 0j, 1.0 + 0j]), label="BPSK")


@dataclass
class ChannelParams:
    """AWGN parameters for a unit-energy constellation.

    ``n0 == 0`` with infinite ebn0_db is the exact noiseless limit.
    """

    n0: float
    ebn0_db: float
    rate: float
    ms: int

    def __post_init__(self):
        if not 0 < self.rate <= 1:
            raise ValueError(f"rate must be in (0, 1], got {self.rate}")
        expected = ebn0_to_n0(self.ebn0_db, self.rate, self.ms)
        if not math.isclose(self.n0, expected, rel_tol=1e-9, abs_tol=1e-300):
            raise ValueError(f"n0={self.n0} inconsistent with ebn0_db={self.ebn0_db}")
        if self.n0 < 0:
            raise ValueError("n0 must be nonnegative")

    @classmethod
    def from_ebn0(cls, ebn0_db: float, rate: float, ms: int) -> "ChannelParams":
        return cls(n0=ebn0_to_n0(ebn0_db, rate, ms), ebn0_db=ebn0_db, rate=rate, ms=ms)


def ebn0_to_n0(ebn0_db: float, rate: float, ms: int) -> float:
    """N0 for a given per-information-bit SNR under unit symbol energy."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    if ms < 1:
        raise ValueError("ms must be at least 1")
    return 1.0 / (rate * ms * 10.0 ** (ebn0_db / 10.0))


def modulate(constellation: Constellation, codeword: np.ndarray) -> np.ndarray:
    """Map an n-bit word to n/ms symbols, ms bits per symbol, MSB first."""
    bits = np.asarray(codeword, dtype=np.uint8)
    ms = constellation.ms
    if bits.ndim != 1 or bits.size % ms != 0:
        raise ValueError(f"codeword length {bits.size} not divisible by ms={ms}")
    powers = 1 << np.arange(ms - 1, -1, -1)
    idx = bits.reshape(-1, ms) @ powers
    return constellation.points[idx]


def symbols_to_bits(constellation: Constellation, indices: np.ndarray) -> np.ndarray:
    """Invert the bit map: point indices back to the flat bit sequence."""
    return constellation.index_bits[np.asarray(indices)].reshape(-1)


def awgn(block: np.ndarray, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. circular complex Gaussian noise, variance N0/2 per dimension."""
    block = np.asarray(block)
    if params.n0 == 0:
        return block.copy()
    sigma = math.sqrt(params.n0 / 2.0)
    noise = rng.standard_normal(block.shape) + 1j * rng.standard_normal(block.shape)
    return block + sigma * noise


def _distances(constellation: Constellation, y: np.ndarray) -> np.ndarray:
    d = y[:, None] - constellation.points[None, :]
    return d.real**2 + d.imag**2


def hard_detect(constellation: Constellation, y) -> np.ndarray | int:
    """Nearest constellation point per sample; ties go to the lowest index."""
    scalar = np.ndim(y) == 0
    ya = np.atleast_1d(np.asarray(y, dtype=np.complex128))
    idx = np.argmin(_distances(constellation, ya), axis=1)
    return int(idx[0]) if scalar else idx


def candidates(constellation: Constellation, y, mu: int):
    """Per-sample mu nearest points with exceedance distances.

    Returns ``(indices, deltas)`` of shape (n_s, mu); column 0 is the
    hard decision with delta exactly 0, and deltas are nondecreasing
    along each row. Ordering ties go to the lowest point index.
    """
    if not 1 <= mu <= constellation.size:
        raise ValueError(f"mu must be in [1, {constellation.size}], got {mu}")
    scalar = np.ndim(y) == 0
    ya = np.atleast_1d(np.asarray(y, dtype=np.complex128))
    d2 = _distances(constellation, ya)
    order = np.argsort(d2, axis=1, kind="stable")[:, :mu]
    d2_sorted = np.take_along_axis(d2, order, axis=1)
    deltas = d2_sorted - d2_sorted[:, :1]
    if scalar:
        return order[0], deltas[0]
    return order, deltas


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1)
    return m + np.log(np.exp(a - m[:, None]).sum(axis=1))


def logmap_demap(constellation: Constellation, y, n0: float) -> np.ndarray:
    """Exact Log-MAP per-bit LLRs; positive means bit 1 is more likely.

    Computed with overflow-safe log-sum-exp over the two bit subsets of
    the constellation. Returns a flat vector of ms LLRs per sample in
    codeword bit order.
    """
    if n0 <= 0:
        raise ValueError("n0 must be positive")
    ya = np.atleast_1d(np.asarray(y, dtype=np.complex128))
    a = -_distances(constellation, ya) / n0
    llr = np.empty((ya.size, constellation.ms))
    for l in range(constellation.ms):
        ones = constellation.bit_is_one[l]
        llr[:, l] = _logsumexp_rows(a[:, ones]) - _logsumexp_rows(a[:, ~ones])
    return llr.reshape(-1)
