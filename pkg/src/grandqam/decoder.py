"""GRAND query loops over bit flips and symbol substitutions.

All variants share the same structure: walk putative noise-effect
patterns in schedule order, apply each to the hard-detected word, and
return the first codebook member. Membership tests are incremental --
the syndrome of the hard word is computed once and every pattern only
XORs the precomputed parity-column deltas of its touched positions, so
a query costs a handful of word operations regardless of n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import LinearCode, codebook_table, pack_bits, syndrome, unpack_bits
from .modem import Constellation, candidates, symbols_to_bits
from .patterns import fit_weight_model, iter_patterns, rank

__all__ = [
    "DecodeOutcome",
    "DECODED",
    "ABANDONED",
    "grand_hard",
    "orbgrand_binary",
    "orbgrand_symbol",
    "ml_oracle",
    "symbol_reliability_count",
]

DECODED = "decoded"
ABANDONED = "abandoned"


@dataclass
class DecodeOutcome:
    """Result of one decode attempt.

    ``queries`` counts codebook-membership tests only; patterns skipped
    by the symbol-mode validity rule are tallied in ``skipped`` and cost
    no query. ``query_words`` holds the tested words in order when the
    decoder was asked to record them.
    """

    codeword: np.ndarray | None
    queries: int
    status: str
    skipped: int = 0
    query_words: list[np.ndarray] | None = None

    @property
    def decoded(self) -> bool:
        return self.status == DECODED


def _weights_for(values: np.ndarray, segments: int) -> tuple[np.ndarray, np.ndarray]:
    """Rank reliabilities and build the integer weight table.

    Degenerate candidate lists (fewer than two values, or fewer samples
    than the requested lines support) fall back to unit weights, which
    reduces the schedule to flip-count order.
    """
    ranking = rank(values)
    n = len(ranking)
    seg = min(segments, n - 1)
    if seg >= 1:
        model = fit_weight_model(ranking, seg)
        return ranking.perm, model.weights
    return ranking.perm, np.ones(n, dtype=np.int64)


def grand_hard(
    code: LinearCode,
    hard_bits: np.ndarray,
    max_queries: int,
    record_queries: bool = False,
) -> DecodeOutcome:
    """Hard-detection GRAND: test bit-flip patterns in flip-count order."""
    bits = np.asarray(hard_bits, dtype=np.uint8)
    if bits.shape != (code.n,):
        raise ValueError(f"expected {code.n} hard bits")
    flip_masks = [1 << j for j in range(code.n)]
    return _flip_loop(
        code,
        bits,
        cols_by_rank=list(code.parity_columns),
        flip_by_rank=flip_masks,
        weights=np.ones(code.n, dtype=np.int64),
        max_queries=max_queries,
        record_queries=record_queries,
    )


def orbgrand_binary(
    code: LinearCode,
    llrs: np.ndarray,
    max_queries: int,
    segments: int = 3,
    record_queries: bool = False,
) -> DecodeOutcome:
    """Binary ORBGRAND on demapped LLRs.

    Hard bits are the LLR sign decisions; flip patterns are scheduled by
    the piecewise-linear weight model over |LLR| ranks.
    """
    llr = np.asarray(llrs, dtype=np.float64)
    if llr.shape != (code.n,):
        raise ValueError(f"expected {code.n} LLRs")
    bits = (llr > 0).astype(np.uint8)
    perm, weights = _weights_for(np.abs(llr), segments)
    cols = code.parity_columns
    return _flip_loop(
        code,
        bits,
        cols_by_rank=[cols[p] for p in perm],
        flip_by_rank=[1 << int(p) for p in perm],
        weights=weights,
        max_queries=max_queries,
        record_queries=record_queries,
    )


def _flip_loop(code, bits, cols_by_rank, flip_by_rank, weights, max_queries, record_queries):
    if max_queries < 1:
        raise ValueError("query budget must be at least 1")
    base = pack_bits(bits)
    s0 = syndrome(code, base)
    queries = 0
    trace: list[np.ndarray] | None = [] if record_queries else None
    for pat in iter_patterns(weights):
        if queries >= max_queries:
            return DecodeOutcome(None, queries, ABANDONED, query_words=trace)
        s, flips = s0, 0
        for j in pat.indices:
            s ^= cols_by_rank[j]
            flips ^= flip_by_rank[j]
        queries += 1
        if trace is not None:
            trace.append(unpack_bits(base ^ flips, code.n))
        if s == 0:
            word = unpack_bits(base ^ flips, code.n)
            return DecodeOutcome(word, queries, DECODED, query_words=trace)
    return DecodeOutcome(None, queries, ABANDONED, query_words=trace)


def symbol_reliability_count(n: int, ms: int, mu: int) -> int:
    """Number of symbol-level reliabilities the symbol decoder rank-orders."""
    if n % ms != 0:
        raise ValueError(f"ms={ms} must divide n={n}")
    return (n // ms) * (mu - 1)


def orbgrand_symbol(
    code: LinearCode,
    constellation: Constellation,
    received: np.ndarray,
    mu: int,
    max_queries: int,
    segments: int = 3,
    record_queries: bool = False,
) -> DecodeOutcome:
    """Symbol-level ORBGRAND driven by exceedance distances.

    Builds the mu-nearest candidate set per received signal, ranks the
    n_s*(mu-1) non-hard candidates by exceedance distance, and walks
    substitution patterns in model-weight order. A pattern that selects
    two candidates for the same symbol position is skipped without a
    codebook query. No LLR is ever computed.
    """
    if max_queries < 1:
        raise ValueError("query budget must be at least 1")
    ms = constellation.ms
    if code.n % ms != 0:
        raise ValueError(f"ms={ms} must divide n={code.n}")
    y = np.asarray(received, dtype=np.complex128)
    n_sym = code.n // ms
    if y.shape != (n_sym,):
        raise ValueError(f"expected {n_sym} received symbols")

    idx, dlt = candidates(constellation, y, mu)
    hard_bits = symbols_to_bits(constellation, idx[:, 0])
    base = pack_bits(hard_bits)
    s0 = syndrome(code, base)

    # flatten the non-hard candidates: id c -> (symbol position, point)
    deltas = dlt[:, 1:].reshape(-1)
    sympos = np.repeat(np.arange(n_sym), mu - 1)
    points = idx[:, 1:].reshape(-1)
    assert deltas.size == symbol_reliability_count(code.n, ms, mu)

    perm, weights = _weights_for(deltas, segments)

    # per ranked candidate: syndrome delta, packed bit difference, position
    cols = code.parity_columns
    table = constellation.index_bits
    synd_by_rank: list[int] = []
    bdiff_by_rank: list[int] = []
    pos_by_rank: list[int] = []
    for c in perm:
        i = int(sympos[c])
        diff = table[points[c]] ^ table[idx[i, 0]]
        s_delta, b_delta = 0, 0
        for t in np.flatnonzero(diff):
            b = i * ms + int(t)
            s_delta ^= cols[b]
            b_delta |= 1 << b
        synd_by_rank.append(s_delta)
        bdiff_by_rank.append(b_delta)
        pos_by_rank.append(i)

    queries = 0
    skipped = 0
    trace: list[np.ndarray] | None = [] if record_queries else None
    for pat in iter_patterns(weights):
        sel = pat.indices
        if len(sel) > 1:
            occupied = {pos_by_rank[j] for j in sel}
            if len(occupied) < len(sel):
                skipped += 1
                continue
        if queries >= max_queries:
            return DecodeOutcome(None, queries, ABANDONED, skipped, trace)
        s, flips = s0, 0
        for j in sel:
            s ^= synd_by_rank[j]
            flips ^= bdiff_by_rank[j]
        queries += 1
        if trace is not None:
            trace.append(unpack_bits(base ^ flips, code.n))
        if s == 0:
            word = unpack_bits(base ^ flips, code.n)
            return DecodeOutcome(word, queries, DECODED, skipped, trace)
    return DecodeOutcome(None, queries, ABANDONED, skipped, trace)


def exact_symbol_grand(
    code: LinearCode,
    constellation: Constellation,
    received: np.ndarray,
    max_sequences: int | None = None,
) -> tuple[np.ndarray | None, int]:
    """Symbol GRAND in exact total-distance order; verification use only.

    Materializes every candidate symbol sequence (all points at every
    position), sorts by summed squared distance to the received block,
    and walks until a codebook member appears. Equivalent to exhaustive
    candidate sets scheduled by exact nondecreasing total exceedance
    distance, so the first hit is a maximum-likelihood decoding up to
    distance ties. Returns (codeword or None, sequences tested).
    """
    y = np.asarray(received, dtype=np.complex128)
    ms = constellation.ms
    n_sym = code.n // ms
    if y.shape != (n_sym,):
        raise ValueError(f"expected {n_sym} received symbols")
    m = constellation.size
    if m**n_sym > 1 << 22:
        raise ValueError("candidate sequence space too large to enumerate")
    grids = np.indices((m,) * n_sym).reshape(n_sym, -1)
    d = constellation.points[grids] - y[:, None]
    totals = (d.real**2 + d.imag**2).sum(axis=0)
    order = np.argsort(totals, kind="stable")
    if max_sequences is not None:
        order = order[:max_sequences]
    for tested, column in enumerate(order, start=1):
        bits = symbols_to_bits(constellation, grids[:, column])
        if syndrome(code, pack_bits(bits)) == 0:
            return bits, tested
    return None, len(order)


def ml_oracle(
    code: LinearCode, constellation: Constellation, received: np.ndarray
) -> np.ndarray:
    """Brute-force maximum-likelihood decoding by codebook enumeration.

    Minimizes the summed squared Euclidean distance between the
    modulated codeword and the received block; distance ties go to the
    lexicographically smallest codeword. Test ground truth only; refuses
    k > 20.
    """
    y = np.asarray(received, dtype=np.complex128)
    table = codebook_table(code)
    ms = constellation.ms
    powers = 1 << np.arange(ms - 1, -1, -1)
    sym_idx = table.reshape(table.shape[0], -1, ms) @ powers
    sym = constellation.points[sym_idx]
    if y.shape != (sym.shape[1],):
        raise ValueError(f"expected {sym.shape[1]} received symbols")
    diff = sym - y[None, :]
    dist = (diff.real**2 + diff.imag**2).sum(axis=1)
    ties = np.flatnonzero(dist == dist.min())
    best = min(ties, key=lambda i: tuple(table[i]))
    return table[best]
