"""Seeded Monte Carlo sweeps: paired decoder variants on shared noise.

Every configured variant decodes the exact same received block, which
makes BLER-parity comparisons meaningful at far lower block counts than
independent runs. Each block's random stream is derived from
(master seed, grid point, block index), so reports are byte-identical
regardless of how many workers execute the sweep. Blocks are scheduled
in fixed-size waves and the stopping rule is evaluated only at wave
boundaries, keeping the processed block count worker-independent too.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .codebook import LinearCode, encode, make_crc_code, make_random_linear_code
from .decoder import DECODED, DecodeOutcome, grand_hard, orbgrand_binary, orbgrand_symbol
from .modem import (
    ChannelParams,
    Constellation,
    awgn,
    bpsk_constellation,
    build_constellation,
    ebn0_to_n0,
    hard_detect,
    logmap_demap,
    modulate,
    symbols_to_bits,
)

__all__ = [
    "SimConfig",
    "VariantStats",
    "PointReport",
    "SimReport",
    "KNOWN_VARIANTS",
    "parse_config",
    "load_config",
    "build_code",
    "constellation_for",
    "block_rng",
    "run_sweep",
    "emit_report",
    "report_to_json",
    "report_from_json",
    "wilson_interval",
    "paired_parity_ok",
    "CSV_HEADER",
]

KNOWN_VARIANTS = ("hard", "orb_binary", "orb_symbol")

CSV_HEADER = (
    "ebn0_db,variant,blocks,errors,bler,ci_lo,ci_hi,"
    "mean_queries,median_queries,p99_queries"
)

# blocks per scheduling wave; the stop rule fires only at wave edges
_WAVE = 1024


@dataclass
class SimConfig:
    """Everything a sweep needs; mirrors the flat key=value config file."""

    family: str
    n: int
    k: int
    ms: int
    seed: int | None = None
    poly_hex: str | None = None
    mu: int = 3
    lines: int = 3
    variants: tuple[str, ...] = ("orb_binary", "orb_symbol")
    ebn0_db: tuple[float, ...] = ()
    min_errors: int = 100
    max_blocks: int = 1_000_000
    budget: int = 1_000_000
    master_seed: int = 0
    noiseless: bool = False
    out: str | None = None

    def validate(self) -> None:
        if self.family not in ("rlc", "crc"):
            raise ValueError(f"unknown code family: {self.family!r}")
        if not 0 < self.k < self.n:
            raise ValueError(f"need 0 < k < n, got n={self.n}, k={self.k}")
        if self.family == "rlc" and self.seed is None:
            raise ValueError("rlc codes require a seed")
        if self.family == "crc":
            if self.poly_hex is None:
                raise ValueError("crc codes require poly_hex")
            poly = int(self.poly_hex, 16)
            if poly.bit_length() - 1 != self.n - self.k:
                raise ValueError(
                    f"poly degree {poly.bit_length() - 1} != n-k = {self.n - self.k}"
                )
        if self.ms not in (1, 2, 4, 6, 8):
            raise ValueError(f"unsupported ms: {self.ms}")
        if self.n % self.ms != 0:
            raise ValueError(f"ms={self.ms} must divide n={self.n}")
        if not 1 <= self.mu <= 1 << self.ms:
            raise ValueError(f"mu must be in [1, {1 << self.ms}]")
        if self.lines < 1:
            raise ValueError("lines must be >= 1")
        if not self.variants:
            raise ValueError("need at least one decoder variant")
        for v in self.variants:
            if v not in KNOWN_VARIANTS:
                raise ValueError(f"unknown variant {v!r}; known: {KNOWN_VARIANTS}")
        if not self.ebn0_db:
            raise ValueError("ebn0_db grid must be nonempty")
        if any(not math.isfinite(e) for e in self.ebn0_db):
            raise ValueError("ebn0_db grid must be finite")
        if self.min_errors < 1 or self.max_blocks < 1 or self.budget < 1:
            raise ValueError("min_errors, max_blocks and budget must be >= 1")

    @property
    def rate(self) -> float:
        return self.k / self.n


_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}

_INT_KEYS = {"n", "k", "ms", "seed", "mu", "lines", "min_errors", "max_blocks",
             "budget", "master_seed"}
_STR_KEYS = {"family", "poly_hex", "out"}


def parse_config(text: str) -> SimConfig:
    """Parse the flat key = value config format (# starts a comment)."""
    fields: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _INT_KEYS:
            fields[key] = int(value)
        elif key in _STR_KEYS:
            fields[key] = value
        elif key == "variants":
            fields[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key == "ebn0_db":
            fields[key] = tuple(float(v) for v in value.split(",") if v.strip())
        elif key == "noiseless":
            try:
                fields[key] = _BOOL_WORDS[value.lower()]
            except KeyError:
                raise ValueError(f"line {lineno}: bad boolean {value!r}") from None
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    for required in ("family", "n", "k", "ms"):
        if required not in fields:
            raise ValueError(f"missing required key {required!r}")
    config = SimConfig(**fields)
    config.validate()
    return config


def load_config(path: str) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_code(config: SimConfig) -> LinearCode:
    if config.family == "rlc":
        return make_random_linear_code(config.n, config.k, config.seed)
    poly_int = int(config.poly_hex, 16)
    degree = poly_int.bit_length() - 1
    coeffs = [(poly_int >> (degree - i)) & 1 for i in range(degree + 1)]
    return make_crc_code(config.n, config.k, coeffs)


def constellation_for(config: SimConfig) -> Constellation:
    return bpsk_constellation() if config.ms == 1 else build_constellation(config.ms)


def block_rng(master_seed: int, point_idx: int, block_idx: int) -> np.random.Generator:
    """Random stream for one block; independent of worker layout."""
    return np.random.default_rng([master_seed, point_idx, block_idx])


@dataclass
class VariantStats:
    variant: str
    blocks: int
    errors: int
    bler: float
    ci_lo: float
    ci_hi: float
    mean_queries: float
    median_queries: float
    p99_queries: float
    mean_skipped: float


@dataclass
class PointReport:
    ebn0_db: float
    stats: list[VariantStats]
    joint_errors: dict[str, int] = field(default_factory=dict)

    def variant(self, name: str) -> VariantStats:
        for s in self.stats:
            if s.variant == name:
                return s
        raise KeyError(name)


@dataclass
class SimReport:
    config: SimConfig
    points: list[PointReport]


def wilson_interval(errors: int, blocks: int, z: float = 1.96) -> tuple[float, float]:
    """95% (by default) Wilson score interval for a binomial proportion."""
    if blocks == 0:
        return 0.0, 1.0
    p = errors / blocks
    z2 = z * z
    denom = 1.0 + z2 / blocks
    center = (p + z2 / (2 * blocks)) / denom
    half = z * math.sqrt(p * (1 - p) / blocks + z2 / (4 * blocks * blocks)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def paired_parity_ok(point: PointReport, v1: str, v2: str, z: float = 1.96) -> bool:
    """Whether two variants' BLERs agree within the paired 95% CI.

    Uses the discordant-pair normal approximation: with n10 blocks where
    only v1 errs and n01 where only v2 errs, the difference n10 - n01 is
    compared against z * sqrt(n10 + n01 - (n10 - n01)^2 / blocks).
    """
    e1 = point.variant(v1).errors
    e2 = point.variant(v2).errors
    blocks = point.variant(v1).blocks
    both = point.joint_errors.get(f"{v1}&{v2}", point.joint_errors.get(f"{v2}&{v1}", 0))
    n10 = e1 - both
    n01 = e2 - both
    t = n10 + n01
    if t == 0:
        return True
    diff = n10 - n01
    return abs(diff) <= z * math.sqrt(t - diff * diff / blocks)


_CODE_CACHE: dict = {}
_CONST_CACHE: dict = {}


def _cached_code(config: SimConfig) -> LinearCode:
    key = (config.family, config.n, config.k, config.seed, config.poly_hex)
    if key not in _CODE_CACHE:
        _CODE_CACHE[key] = build_code(config)
    return _CODE_CACHE[key]


def _cached_constellation(ms: int) -> Constellation:
    if ms not in _CONST_CACHE:
        _CONST_CACHE[ms] = bpsk_constellation() if ms == 1 else build_constellation(ms)
    return _CONST_CACHE[ms]


def _decode_one(
    variant: str,
    code: LinearCode,
    constellation: Constellation,
    y: np.ndarray,
    n0: float,
    config: SimConfig,
) -> DecodeOutcome:
    if variant == "hard":
        bits = symbols_to_bits(constellation, hard_detect(constellation, y))
        return grand_hard(code, bits, config.budget)
    if variant == "orb_binary":
        llrs = logmap_demap(constellation, y, n0)
        return orbgrand_binary(code, llrs, config.budget, config.lines)
    if variant == "orb_symbol":
        return orbgrand_symbol(code, constellation, y, config.mu, config.budget, config.lines)
    raise ValueError(f"unknown variant {variant!r}")


def _run_chunk(config: SimConfig, point_idx: int, ebn0_db: float, start: int, count: int):
    """Decode blocks [start, start+count) of one grid point with all variants."""
    code = _cached_code(config)
    constellation = _cached_constellation(config.ms)
    n0 = ebn0_to_n0(ebn0_db, config.rate, config.ms)
    params = ChannelParams.from_ebn0(ebn0_db, config.rate, config.ms)
    nvar = len(config.variants)
    err = np.zeros((nvar, count), dtype=bool)
    queries = np.zeros((nvar, count), dtype=np.int64)
    skipped = np.zeros((nvar, count), dtype=np.int64)
    for b in range(count):
        rng = block_rng(config.master_seed, point_idx, start + b)
        msg = rng.integers(0, 2, size=config.k, dtype=np.uint8)
        cw = encode(code, msg)
        x = modulate(constellation, cw)
        y = x.copy() if config.noiseless else awgn(x, params, rng)
        for vi, variant in enumerate(config.variants):
            out = _decode_one(variant, code, constellation, y, n0, config)
            err[vi, b] = out.status != DECODED or not np.array_equal(out.codeword, cw)
            queries[vi, b] = out.queries
            skipped[vi, b] = out.skipped
    return start, err, queries, skipped


def _run_wave(config, point_idx, ebn0_db, start, count, pool, workers):
    if pool is None:
        return [_run_chunk(config, point_idx, ebn0_db, start, count)]
    per = -(-count // workers)
    futures = []
    offset = start
    remaining = count
    while remaining > 0:
        c = min(per, remaining)
        futures.append(pool.submit(_run_chunk, config, point_idx, ebn0_db, offset, c))
        offset += c
        remaining -= c
    return sorted((f.result() for f in futures), key=lambda r: r[0])


def run_sweep(config: SimConfig, workers: int = 1) -> SimReport:
    """Run the full Eb/N0 sweep; deterministic for a fixed master seed.

    Each grid point stops once every variant has accumulated
    ``min_errors`` block errors, or at ``max_blocks``. All variants of a
    block decode the identical received signal (paired comparison).
    """
    config.validate()
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    points: list[PointReport] = []
    try:
        for point_idx, ebn0_db in enumerate(config.ebn0_db):
            nvar = len(config.variants)
            err_parts, q_parts, s_parts = [], [], []
            blocks = 0
            errors = np.zeros(nvar, dtype=np.int64)
            while blocks < config.max_blocks:
                if blocks > 0 and errors.min() >= config.min_errors:
                    break
                wave = min(_WAVE, config.max_blocks - blocks)
                for _, err, queries, skipped in _run_wave(
                    config, point_idx, ebn0_db, blocks, wave, pool, workers
                ):
                    err_parts.append(err)
                    q_parts.append(queries)
                    s_parts.append(skipped)
                    errors += err.sum(axis=1)
                blocks += wave
            err_all = np.concatenate(err_parts, axis=1)
            q_all = np.concatenate(q_parts, axis=1)
            s_all = np.concatenate(s_parts, axis=1)
            stats = []
            for vi, variant in enumerate(config.variants):
                e = int(err_all[vi].sum())
                lo, hi = wilson_interval(e, blocks)
                stats.append(
                    VariantStats(
                        variant=variant,
                        blocks=blocks,
                        errors=e,
                        bler=e / blocks,
                        ci_lo=lo,
                        ci_hi=hi,
                        mean_queries=float(q_all[vi].mean()),
                        median_queries=float(np.median(q_all[vi])),
                        p99_queries=float(np.percentile(q_all[vi], 99)),
                        mean_skipped=float(s_all[vi].mean()),
                    )
                )
            joint = {}
            for i in range(nvar):
                for j in range(i + 1, nvar):
                    key = f"{config.variants[i]}&{config.variants[j]}"
                    joint[key] = int((err_all[i] & err_all[j]).sum())
            points.append(PointReport(ebn0_db=float(ebn0_db), stats=stats, joint_errors=joint))
    finally:
        if pool is not None:
            pool.shutdown()
    return SimReport(config=config, points=points)


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def report_to_csv(report: SimReport) -> str:
    lines = [CSV_HEADER]
    for point in report.points:
        for s in point.stats:
            lines.append(
                ",".join(
                    [
                        _fmt(point.ebn0_db),
                        s.variant,
                        str(s.blocks),
                        str(s.errors),
                        _fmt(s.bler),
                        _fmt(s.ci_lo),
                        _fmt(s.ci_hi),
                        _fmt(s.mean_queries),
                        _fmt(s.median_queries),
                        _fmt(s.p99_queries),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def report_to_json(report: SimReport) -> str:
    payload = {
        "config": asdict(report.config),
        "points": [
            {
                "ebn0_db": p.ebn0_db,
                "stats": [asdict(s) for s in p.stats],
                "joint_errors": p.joint_errors,
            }
            for p in report.points
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> SimReport:
    payload = json.loads(text)
    cfg = payload["config"]
    cfg["variants"] = tuple(cfg["variants"])
    cfg["ebn0_db"] = tuple(cfg["ebn0_db"])
    config = SimConfig(**cfg)
    points = [
        PointReport(
            ebn0_db=p["ebn0_db"],
            stats=[VariantStats(**s) for s in p["stats"]],
            joint_errors={k: int(v) for k, v in p["joint_errors"].items()},
        )
        for p in payload["points"]
    ]
    return SimReport(config=config, points=points)


def emit_report(report: SimReport, path: str, fmt: str = "csv") -> str:
    """Write the report as CSV (fixed schema) or a JSON mirror with config."""
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt == "json":
        text = report_to_json(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path
