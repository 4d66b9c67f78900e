"""Forward estimator for next-symbol conditional expectations.

Given the data segment (X_0, ..., X_n), the estimator looks for the longest
recent suffix block that has recurred often enough earlier in the segment and
averages the payoff of the symbols that followed those earlier occurrences.
Everything here evaluates from scratch on a sequence by direct scanning; the
incremental realization lives in :mod:`nextsym.streaming` and must agree with
these functions bit for bit.

Conventions: an occurrence of the length-k suffix "at backshift t" means
X_{n-k+1-t..n-t} equals X_{n-k+1..n}; only backshifts with n-k+1-t >= 0 (the
occurrence lies fully inside the segment) are counted, and overlapping
occurrences count separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .sequences import Alphabet, SymbolSequence

__all__ = [
    "Schedules",
    "PayoffFunction",
    "EstimateResult",
    "DistributionEstimate",
    "schedule_K",
    "schedule_J",
    "recurrence_times",
    "context_length",
    "occurrence_count",
    "successor_histogram",
    "estimate",
    "estimate_distribution",
    "payoff_mean",
    "d_star",
]


def schedule_K(n: int, alphabet_size: int) -> int:
    """Default context-length cap: max(1, floor(0.1 * log_base(n))).

    The floor sits exactly on integer boundaries when n is a power of the
    alphabet size, where floating logs are unreliable, so the float value
    only proposes a candidate and integer power comparisons settle it.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if alphabet_size < 2:
        raise ValueError("alphabet_size must be >= 2")
    b = alphabet_size
    if n < b ** 10:
        return 1
    m = int(0.1 * math.log(n) / math.log(b) + 1e-9)
    while b ** (10 * (m + 1)) <= n:
        m += 1
    while m > 1 and b ** (10 * m) > n:
        m -= 1
    return m


def schedule_J(n: int) -> int:
    """Default occurrence threshold: max(1, ceil(sqrt(n))), exact in integers."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.isqrt(n - 1) + 1 if n > 1 else 1


@dataclass(frozen=True)
class Schedules:
    """Growth schedules: K caps the context length, J is the occurrence
    threshold a block must meet before it is trusted.

    Both must be nondecreasing and tend to infinity for the consistency
    results to apply (and J(n)/n -> 0 for the context length to diverge).
    Custom schedules are accepted; the defaults are :func:`schedule_K` and
    :func:`schedule_J`.
    """

    K: Callable[[int], int]
    J: Callable[[int], int]

    @classmethod
    def default(cls, alphabet_size: int) -> "Schedules":
        if alphabet_size < 2:
            raise ValueError("alphabet_size must be >= 2")
        return cls(K=_LogK(alphabet_size), J=schedule_J)


class _LogK:
    """Picklable wrapper binding schedule_K to an alphabet size.

    schedule_K is a step function, constant between consecutive powers
    base^(10m); the last bracket is cached so streaming queries with slowly
    growing n avoid recomputing integer powers.
    """

    __slots__ = ("alphabet_size", "_lo", "_hi", "_value")

    def __init__(self, alphabet_size: int):
        self.alphabet_size = alphabet_size
        self._lo = 0
        self._hi = 0
        self._value = 1

    def __call__(self, n: int) -> int:
        if self._lo <= n < self._hi:
            return self._value
        value = schedule_K(n, self.alphabet_size)
        step = self.alphabet_size ** (10 * value)
        self._lo = step if n >= step else 1
        self._hi = step * (self.alphabet_size**10)
        self._value = value
        return value

    def __eq__(self, other):
        return isinstance(other, _LogK) and other.alphabet_size == self.alphabet_size

    def __hash__(self):
        return hash(("_LogK", self.alphabet_size))

    def __getstate__(self):
        return self.alphabet_size

    def __setstate__(self, state):
        self.alphabet_size = state
        self._lo = self._hi = 0
        self._value = 1


@dataclass(frozen=True)
class PayoffFunction:
    """A real payoff per alphabet symbol, stored in alphabet index order."""

    alphabet: Alphabet
    values: tuple

    def __post_init__(self):
        if len(self.values) != self.alphabet.size:
            raise ValueError("payoff must assign a value to every symbol")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def from_map(cls, alphabet: Alphabet, mapping: dict) -> "PayoffFunction":
        missing = [s for s in alphabet.symbols if s not in mapping]
        if missing:
            raise ValueError(f"payoff missing symbols {missing!r}")
        return cls(alphabet, tuple(mapping[s] for s in alphabet.symbols))

    @classmethod
    def indicator(cls, alphabet: Alphabet, symbol) -> "PayoffFunction":
        z = alphabet.encode(symbol)
        return cls(alphabet, tuple(1.0 if i == z else 0.0 for i in range(alphabet.size)))

    @classmethod
    def constant(cls, alphabet: Alphabet, value: float) -> "PayoffFunction":
        return cls(alphabet, (float(value),) * alphabet.size)

    def lo(self) -> float:
        return min(self.values)

    def hi(self) -> float:
        return max(self.values)


@dataclass(frozen=True)
class EstimateResult:
    """Estimate of E(g(X_{n+1}) | X_0..X_n) plus selection diagnostics.

    ``context_len`` is the matched suffix length (0 when no block met the
    threshold), ``matches`` the number of prior in-segment occurrences of
    that suffix.  An abstained result carries value 0 by convention.
    """

    value: float
    context_len: int
    matches: int
    abstained: bool


@dataclass(frozen=True)
class DistributionEstimate:
    """Estimated conditional distribution of the next symbol; all-zero when
    abstained."""

    probs: tuple
    context_len: int
    matches: int
    abstained: bool


def recurrence_times(seq: SymbolSequence, n: int, k: int, count: int | None = None) -> list[int]:
    """Backshifts t at which the length-k suffix of X_0..X_n recurs, ascending.

    Returns at most ``count`` entries (all of them when count is None); the
    list is shorter when fewer in-segment occurrences exist.
    """
    _check_position(seq, n)
    if not 1 <= k <= n + 1:
        raise ValueError(f"k={k} outside [1, n+1]={n + 1}")
    if count is not None and count < 1:
        raise ValueError("count must be >= 1")
    arr = seq.as_array()
    starts = _match_starts(arr, n, k)
    times = (n - k + 1 - starts)[::-1]
    if count is not None:
        times = times[:count]
    return times.tolist()


def occurrence_count(seq: SymbolSequence, n: int, k: int) -> int:
    """Number of prior in-segment occurrences of the length-k suffix of X_0..X_n."""
    _check_position(seq, n)
    if not 1 <= k <= n + 1:
        raise ValueError(f"k={k} outside [1, n+1]={n + 1}")
    return len(_match_starts(seq.as_array(), n, k))


def context_length(seq: SymbolSequence, n: int, schedules: Schedules) -> int:
    """Longest k <= K(n) whose suffix block recurred at least J(n) times, else 0.

    A zero return signals abstention, never an error.
    """
    _check_position(seq, n)
    if n < 1:
        raise ValueError("n must be >= 1")
    arr = seq.as_array()
    j_n = schedules.J(n)
    for k in range(min(schedules.K(n), n + 1), 0, -1):
        if len(_match_starts(arr, n, k)) >= j_n:
            return k
    return 0


def successor_histogram(seq: SymbolSequence, n: int, k: int) -> list[int]:
    """Per-symbol counts of the successors of prior occurrences of the suffix.

    Every in-segment prior occurrence ends strictly before n, so its
    successor is inside the segment; the counts sum to occurrence_count.
    """
    _check_position(seq, n)
    if not 1 <= k <= n + 1:
        raise ValueError(f"k={k} outside [1, n+1]={n + 1}")
    arr = seq.as_array()
    starts = _match_starts(arr, n, k)
    succ = arr[starts + k]
    return np.bincount(succ, minlength=seq.alphabet.size).tolist()


def estimate(seq: SymbolSequence, n: int, payoff: PayoffFunction, schedules: Schedules) -> EstimateResult:
    """Average payoff of the symbols following prior occurrences of the
    matched suffix block; abstains (value 0) at n=0 or when nothing matched."""
    _check_position(seq, n)
    if n == 0:
        return EstimateResult(0.0, 0, 0, True)
    k = context_length(seq, n, schedules)
    if k == 0:
        return EstimateResult(0.0, 0, 0, True)
    hist = successor_histogram(seq, n, k)
    matches = sum(hist)
    return EstimateResult(payoff_mean(hist, payoff.values, matches), k, matches, False)


def estimate_distribution(seq: SymbolSequence, n: int, schedules: Schedules) -> DistributionEstimate:
    """Empirical successor distribution of the matched block (the estimate
    with every indicator payoff at once); all-zero when abstained."""
    _check_position(seq, n)
    size = seq.alphabet.size
    if n == 0:
        return DistributionEstimate((0.0,) * size, 0, 0, True)
    k = context_length(seq, n, schedules)
    if k == 0:
        return DistributionEstimate((0.0,) * size, 0, 0, True)
    hist = successor_histogram(seq, n, k)
    matches = sum(hist)
    return DistributionEstimate(tuple(c / matches for c in hist), k, matches, False)


def payoff_mean(hist: Sequence[int], values: Sequence[float], matches: int) -> float:
    """Histogram-weighted payoff mean, accumulated in alphabet index order.

    Both the scanning evaluator and the streaming index reduce their integer
    histograms through this one function, so equal histograms give
    bit-identical floats.  The two rounding steps (product-sum, quotient) can
    land one ulp outside the range of the observed payoffs; the result is
    clamped back so the range invariant holds exactly.
    """
    total = 0.0
    lo = hi = None
    for c, v in zip(hist, values):
        if c:
            total += c * v
            if lo is None or v < lo:
                lo = v
            if hi is None or v > hi:
                hi = v
    mean = total / matches
    if mean < lo:
        return lo
    if mean > hi:
        return hi
    return mean


def d_star(x: Sequence[int], y: Sequence[int], depth: int) -> float:
    """Distance between one-sided pasts, truncated to ``depth`` coordinates.

    Coordinate i is the symbol i steps back; term i contributes 2^{-i-1}
    when the coordinates differ.  The ignored tail is bounded by 2^{-depth}.
    Conditional expectations that are continuous in this metric are the
    class for which pointwise consistency holds: coordinates far in the
    past must matter vanishingly.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    total = 0.0
    for i in range(depth):
        if x[i] != y[i]:
            total += 2.0 ** (-i - 1)
    return total


def _match_starts(arr: np.ndarray, n: int, k: int) -> np.ndarray:
    """Start positions s <= n-k of windows equal to the suffix X_{n-k+1..n}."""
    if k == 1:
        return np.nonzero(arr[:n] == arr[n])[0]
    if n + 1 - k <= 0:
        return np.empty(0, dtype=np.intp)
    windows = sliding_window_view(arr[: n + 1], k)
    suffix = arr[n - k + 1 : n + 1]
    return np.nonzero((windows[:-1] == suffix).all(axis=1))[0]


def _check_position(seq: SymbolSequence, n: int) -> None:
    if not 0 <= n < len(seq):
        raise ValueError(f"position n={n} outside sequence of length {len(seq)}")
