"""Incremental occurrence index for the forward estimator.

Recomputing the estimator from scratch after every new symbol costs O(n) per
step.  This index instead maintains, for every block length k <= k_max and
every block value, how often the block has occurred with a successor inside
the segment and the histogram of those successors.  A push then costs
amortized O(k_max) and a query O(K(n) + alphabet size), with results equal
bit for bit to the scanning evaluator in :mod:`nextsym.estimator`.

Blocks are keyed by their base-|alphabet| integer encoding, which is
injective for a fixed length, so no hashing of symbol slices is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

from .estimator import (
    DistributionEstimate,
    EstimateResult,
    PayoffFunction,
    Schedules,
    payoff_mean,
)
from .sequences import Alphabet, SymbolSequence

__all__ = ["StreamingEstimator", "BlockStats", "CapacityError"]

# internal per-block layout: [count_with_successor, last_end_position,
#                             succ_count_0, ..., succ_count_{B-1}]
_COUNT = 0
_LAST_END = 1
_HIST = 2


class CapacityError(RuntimeError):
    """Raised when a push or query exceeds the horizon fixed at construction."""


@dataclass(frozen=True)
class BlockStats:
    """Read-only view of the statistics stored for one (length, block) key."""

    count_with_successor: int
    successor_histogram: tuple
    last_end_position: int


class StreamingEstimator:
    """Single-writer streaming realization of the forward estimator.

    The context-length cap k_max is fixed at construction from the horizon
    (k_max = K(horizon)); K grows so slowly that this stays tiny for any
    realistic run, and a fixed cap keeps the push loop branch-free.  Pushing
    past the horizon raises :class:`CapacityError` instead of silently
    under-indexing longer blocks.
    """

    __slots__ = ("seq", "schedules", "horizon", "k_max", "op_count", "_stats", "_codes", "_size")

    def __init__(self, alphabet: Alphabet, schedules: Schedules | None = None, horizon: int = 1 << 20):
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.seq = SymbolSequence(alphabet)
        self.schedules = schedules if schedules is not None else Schedules.default(alphabet.size)
        self.horizon = horizon
        self.k_max = max(1, self.schedules.K(horizon))
        self.op_count = 0
        self._size = alphabet.size
        self._stats = [{} for _ in range(self.k_max)]  # index k-1 -> {code: stats list}
        self._codes = [0] * self.k_max  # rolling code of the suffix of length k (index k-1)

    @property
    def position(self) -> int:
        """Index n of the last pushed symbol, or -1 when empty."""
        return len(self.seq) - 1

    def push(self, symbol_index: int) -> int:
        """Append one symbol and credit it as successor of every block ending
        just before it; returns the new position."""
        size = self._size
        if not 0 <= symbol_index < size:
            raise ValueError(f"symbol index {symbol_index} outside alphabet of size {size}")
        m = len(self.seq)
        if m > self.horizon:
            raise CapacityError(f"horizon {self.horizon} exhausted")
        codes = self._codes
        k_max = self.k_max
        record = m if m < k_max else k_max
        for i in range(record):  # i = k-1; block of length k ends at m-1 once m >= k
            stats = self._stats[i]
            code = codes[i]
            cell = stats.get(code)
            if cell is None:
                cell = [0, 0] + [0] * size
                stats[code] = cell
            cell[_COUNT] += 1
            cell[_LAST_END] = m - 1
            cell[_HIST + symbol_index] += 1
        for i in range(k_max - 1, 0, -1):  # roll codes to end at m
            codes[i] = codes[i - 1] * size + symbol_index
        codes[0] = symbol_index
        self.op_count += record + k_max
        self.seq._data.append(symbol_index)
        return m

    def probe(self):
        """Allocation-light query: (context_len, matches, histogram cell) for
        the current position, or None when abstaining.

        The histogram cell is the internal stats list; treat it as read-only.
        """
        n = len(self.seq) - 1
        if n < 1:
            return None
        schedules = self.schedules
        k_n = schedules.K(n)
        if k_n > self.k_max:
            raise CapacityError(
                f"schedule K({n})={k_n} exceeds k_max={self.k_max} fixed at construction"
            )
        j_n = schedules.J(n)
        if k_n > n + 1:
            k_n = n + 1
        codes = self._codes
        stats = self._stats
        for k in range(k_n, 0, -1):
            cell = stats[k - 1].get(codes[k - 1])
            if cell is not None and cell[_COUNT] >= j_n:
                return k, cell[_COUNT], cell
        return None

    def current_estimate(self, payoff: PayoffFunction) -> EstimateResult:
        """Same result as the scanning evaluator at the current position."""
        hit = self.probe()
        if hit is None:
            return EstimateResult(0.0, 0, 0, True)
        k, matches, cell = hit
        value = payoff_mean(cell[_HIST:], payoff.values, matches)
        return EstimateResult(value, k, matches, False)

    def current_distribution(self) -> DistributionEstimate:
        hit = self.probe()
        if hit is None:
            return DistributionEstimate((0.0,) * self._size, 0, 0, True)
        k, matches, cell = hit
        probs = tuple(c / matches for c in cell[_HIST:])
        return DistributionEstimate(probs, k, matches, False)

    def stats_for(self, k: int, block: tuple) -> BlockStats | None:
        """Stored statistics for an explicit block (tuple of symbol indices)."""
        if not 1 <= k <= self.k_max or len(block) != k:
            raise ValueError(f"block of length {len(block)} does not match k={k} <= k_max={self.k_max}")
        code = 0
        for s in block:
            if not 0 <= s < self._size:
                raise ValueError(f"symbol index {s} outside alphabet")
            code = code * self._size + s
        cell = self._stats[k - 1].get(code)
        if cell is None:
            return None
        return BlockStats(cell[_COUNT], tuple(cell[_HIST:]), cell[_LAST_END])

    def stored_keys(self) -> int:
        """Number of (length, block) keys currently held."""
        return sum(len(d) for d in self._stats)
