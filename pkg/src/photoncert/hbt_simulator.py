"""Monte Carlo four-detector Hanbury Brown-Twiss experiment.

Each pulse carries ``n`` photons drawn from the source. Every photon is routed
to one of four threshold detectors with probabilities ``split_probs`` and is
registered there with probability ``efficiency``; a detector clicks if it
registers at least one photon or fires a dark count. Zero-delay coincidences
are clicks sharing a pulse slot.

Pulses are generated in fixed-size batches. Batch ``k`` draws from its own
generator seeded with ``SeedSequence(seed, spawn_key=(k,))``, so any batch can
be produced independently and the stream does not depend on how the work is
split across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptyStream, InsufficientCounts, InvalidConfig, ValidationError
from .photon_model import SourceKind

N_DETECTORS = 4
BATCH_SIZE = 1 << 20
PAIRS = tuple(combinations(range(N_DETECTORS), 2))
TRIPLES = tuple(combinations(range(N_DETECTORS), 3))
QUAD = tuple(range(N_DETECTORS))


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float
    eta0_cap: float = 0.01
    split_probs: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    dark_count_prob: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "split_probs", tuple(float(s) for s in self.split_probs))
        if not (0.0 < self.efficiency <= self.eta0_cap):
            raise InvalidConfig(
                f"efficiency {self.efficiency} must lie in (0, {self.eta0_cap}]; "
                "the linear-detector approximation needs low efficiency"
            )
        if len(self.split_probs) != N_DETECTORS or any(s < 0 for s in self.split_probs):
            raise InvalidConfig("split_probs needs four non-negative entries")
        if abs(math.fsum(self.split_probs) - 1.0) > 1e-12:
            raise InvalidConfig(f"split_probs {self.split_probs} must sum to 1")
        if not (0.0 <= self.dark_count_prob <= 1.0):
            raise InvalidConfig("dark_count_prob must be a probability")


@dataclass(frozen=True)
class DetectionRecord:
    pulse_index: int
    clicks: tuple[bool, bool, bool, bool]


@dataclass(frozen=True)
class DetectionBatch:
    """A contiguous run of records: ``pulse_index`` (uint64) and ``clicks`` (k x 4 bool)."""

    pulse_index: np.ndarray
    clicks: np.ndarray

    def __len__(self) -> int:
        return len(self.pulse_index)

    def records(self) -> Iterator[DetectionRecord]:
        for idx, row in zip(self.pulse_index.tolist(), self.clicks.tolist()):
            yield DetectionRecord(idx, tuple(row))

    @classmethod
    def from_records(cls, records: Sequence[DetectionRecord]) -> "DetectionBatch":
        idx = np.array([r.pulse_index for r in records], dtype=np.uint64)
        clicks = np.array([r.clicks for r in records], dtype=bool).reshape(-1, N_DETECTORS)
        return cls(idx, clicks)


def iter_records(batches: Iterable[DetectionBatch]) -> Iterator[DetectionRecord]:
    for batch in batches:
        yield from batch.records()


def _batch_rng(seed: int, batch_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(batch_index,)))


def simulate_batch(
    source: SourceKind, cfg: DetectorConfig, seed: int, batch_index: int, size: int
) -> DetectionBatch:
    """Pulses ``batch_index * BATCH_SIZE ...`` (``size`` of them) of a seeded run."""
    rng = _batch_rng(seed, batch_index)
    photons = np.asarray(source.sample(rng, size), dtype=np.int64)
    clicks = np.zeros((size, N_DETECTORS), dtype=bool)
    lit = np.flatnonzero(photons > 0)
    # Binomial thinning first, then route only the detected photons.
    detected = rng.binomial(photons[lit], cfg.efficiency)
    hit = detected > 0
    if hit.any():
        routed = rng.multinomial(detected[hit], np.array(cfg.split_probs))
        clicks[lit[hit]] = routed > 0
    if cfg.dark_count_prob > 0:
        clicks |= rng.random((size, N_DETECTORS)) < cfg.dark_count_prob
    start = batch_index * BATCH_SIZE
    index = np.arange(start, start + size, dtype=np.uint64)
    return DetectionBatch(index, clicks)


def simulate_pulse_train(
    source: SourceKind,
    n_pulses: int,
    cfg: DetectorConfig,
    seed: int,
    workers: int = 1,
) -> Iterator[DetectionBatch]:
    """Deterministic stream of detection batches covering ``n_pulses`` pulses."""
    if not isinstance(cfg, DetectorConfig):
        raise InvalidConfig("cfg must be a DetectorConfig")
    if n_pulses < 1:
        raise InvalidConfig("n_pulses must be >= 1")
    if not (0 <= seed < 2**64):
        raise InvalidConfig("seed must be a 64-bit natural number")
    n_batches = -(-n_pulses // BATCH_SIZE)
    sizes = [min(BATCH_SIZE, n_pulses - k * BATCH_SIZE) for k in range(n_batches)]
    if workers <= 1:
        for k, size in enumerate(sizes):
            yield simulate_batch(source, cfg, seed, k, size)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(lambda k: simulate_batch(source, cfg, seed, k, sizes[k]), range(n_batches))


@dataclass
class CoincidenceCounts:
    """Zero-delay singles and coincidence tallies; ``+`` merges disjoint streams."""

    n_pulses: int = 0
    singles: tuple[int, ...] = (0, 0, 0, 0)
    pair_counts: dict[tuple[int, int], int] = field(default_factory=lambda: {p: 0 for p in PAIRS})
    triple_counts: dict[tuple[int, int, int], int] = field(
        default_factory=lambda: {t: 0 for t in TRIPLES}
    )
    quad_count: int = 0

    def __add__(self, other: "CoincidenceCounts") -> "CoincidenceCounts":
        return CoincidenceCounts(
            self.n_pulses + other.n_pulses,
            tuple(a + b for a, b in zip(self.singles, other.singles)),
            {k: self.pair_counts[k] + other.pair_counts[k] for k in PAIRS},
            {k: self.triple_counts[k] + other.triple_counts[k] for k in TRIPLES},
            self.quad_count + other.quad_count,
        )

    def combination_count(self, combo: tuple[int, ...]) -> int:
        if len(combo) == 2:
            return self.pair_counts[combo]
        if len(combo) == 3:
            return self.triple_counts[combo]
        if tuple(combo) == QUAD:
            return self.quad_count
        raise ValidationError(f"no coincidence tally for detectors {combo}")

    def to_dict(self) -> dict:
        return {
            "n_pulses": self.n_pulses,
            "singles": list(self.singles),
            "pairs": {f"{i}{j}": c for (i, j), c in self.pair_counts.items()},
            "triples": {"".join(map(str, t)): c for t, c in self.triple_counts.items()},
            "quad": self.quad_count,
        }


def _count_batch(batch: DetectionBatch) -> CoincidenceCounts:
    c = batch.clicks
    return CoincidenceCounts(
        n_pulses=len(batch),
        singles=tuple(int(x) for x in c.sum(axis=0)),
        pair_counts={p: int(np.count_nonzero(c[:, p[0]] & c[:, p[1]])) for p in PAIRS},
        triple_counts={t: int(np.count_nonzero(c[:, t].all(axis=1))) for t in TRIPLES},
        quad_count=int(np.count_nonzero(c.all(axis=1))),
    )


def count_coincidences(
    stream: Iterable[DetectionBatch | DetectionRecord], n_pulses: int | None = None
) -> CoincidenceCounts:
    """Tally singles and same-slot coincidences over a stream.

    ``n_pulses`` overrides the record count, for recordings that list only
    pulses with at least one click.
    """
    total = CoincidenceCounts()
    pending: list[DetectionRecord] = []
    seen = False
    for item in stream:
        seen = True
        if isinstance(item, DetectionRecord):
            pending.append(item)
            if len(pending) >= BATCH_SIZE:
                total = total + _count_batch(DetectionBatch.from_records(pending))
                pending = []
        else:
            total = total + _count_batch(item)
    if pending:
        total = total + _count_batch(DetectionBatch.from_records(pending))
    if not seen or total.n_pulses == 0:
        raise EmptyStream("no detection records to count")
    if n_pulses is not None:
        if n_pulses < total.n_pulses:
            raise ValidationError("n_pulses cannot be smaller than the number of records")
        total.n_pulses = int(n_pulses)
    return total


@dataclass(frozen=True)
class CorrelationMeasurement:
    order: int
    value: float
    sigma: float

    def __post_init__(self):
        if self.order not in (2, 3, 4):
            raise ValidationError(f"correlation order must be 2, 3 or 4, got {self.order}")
        if not (self.value >= 0 and self.sigma >= 0):
            raise ValidationError("correlation value and sigma must be non-negative")

    def to_dict(self) -> dict:
        return {"order": self.order, "value": self.value, "sigma": self.sigma}


_COMBOS = {2: PAIRS, 3: TRIPLES, 4: (QUAD,)}


def estimate_correlation(counts: CoincidenceCounts, order: int) -> CorrelationMeasurement:
    """Count-ratio estimate ``C * N**(m-1) / prod(S_i)`` averaged over detector combinations.

    Each combination carries Poisson counting error on its coincidence and
    singles counts; combinations are combined in quadrature. The variance of a
    combination is written as ``C (N**(m-1)/prod S)**2 + g**2 sum(1/S_i)``,
    which equals ``g**2 (1/C + sum 1/S_i)`` and stays finite when ``C = 0``.
    """
    if order not in _COMBOS:
        raise ValidationError(f"correlation order must be 2, 3 or 4, got {order}")
    if any(s == 0 for s in counts.singles):
        raise InsufficientCounts("a detector recorded no clicks; correlations are undefined")
    combos = _COMBOS[order]
    n = counts.n_pulses
    values, variances, total_c = [], [], 0
    for combo in combos:
        c = counts.combination_count(combo)
        total_c += c
        singles = [counts.singles[i] for i in combo]
        scale = float(n) ** (order - 1) / math.prod(float(s) for s in singles)
        g = c * scale
        values.append(g)
        variances.append(c * scale**2 + g**2 * sum(1.0 / s for s in singles))
    if total_c == 0:
        raise InsufficientCounts(
            f"no {order}-fold coincidences in {n} pulses; g{order} has no finite uncertainty"
        )
    k = len(combos)
    value = math.fsum(values) / k
    sigma = math.sqrt(math.fsum(variances)) / k
    return CorrelationMeasurement(order, value, sigma)


def estimate_correlations(
    counts: CoincidenceCounts, orders: Sequence[int] = (2, 3, 4)
) -> list[CorrelationMeasurement]:
    return [estimate_correlation(counts, m) for m in orders]
