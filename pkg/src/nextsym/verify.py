"""Exact equivalence suite: scanning evaluator vs streaming index.

For random sequences the streaming estimator must reproduce the scanning
evaluator bit for bit at every prefix: context length, match count, payoff
estimate and successor distribution.  Recurrence-time lists are verified
in-place at every prefix: each listed backshift must actually match the
suffix, the list must be strictly increasing, and its length must equal the
independently computed match count, which together pin the list down to the
exact set of in-segment occurrences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import (
    PayoffFunction,
    Schedules,
    estimate,
    estimate_distribution,
    recurrence_times,
)
from .seeding import derive_seed
from .sequences import Alphabet, SymbolSequence
from .streaming import StreamingEstimator

__all__ = ["EquivalenceReport", "verify_equivalence"]


@dataclass(frozen=True)
class EquivalenceReport:
    ok: bool
    cases: int
    prefixes_checked: int
    counterexample: dict | None


def verify_equivalence(
    cases: int = 200,
    max_n: int = 2000,
    seed: int = 2026,
    alphabet_sizes: tuple = (2, 3, 4),
    schedules_for: callable = None,
    estimator_factory: type = StreamingEstimator,
) -> EquivalenceReport:
    """Compare evaluator and index on random sequences at every prefix.

    ``estimator_factory`` exists so the suite can be pointed at a broken
    build and demonstrate that it reports a counterexample; ``schedules_for``
    maps an alphabet size to custom schedules (defaults otherwise).
    """
    if cases < 1 or max_n < 1:
        raise ValueError("need cases >= 1 and max_n >= 1")
    prefixes = 0
    for case in range(cases):
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, case)))
        size = int(alphabet_sizes[int(rng.integers(len(alphabet_sizes)))])
        length = int(rng.integers(max(1, max_n // 2), max_n + 1))
        data = rng.integers(0, size, length).astype(np.uint8)
        alphabet = Alphabet.of_size(size)
        schedules = schedules_for(size) if schedules_for else Schedules.default(size)
        payoff = PayoffFunction(alphabet, tuple((x + 1.0) / (x + 2.0) for x in range(size)))
        seq = SymbolSequence(alphabet, data.tobytes())
        arr = seq.as_array()
        streaming = estimator_factory(alphabet, schedules, horizon=length - 1 if length > 1 else 1)

        def fail(n: int, field: str, expected, got) -> EquivalenceReport:
            head = data[: n + 1]
            shown = head.tolist() if n < 40 else head[:20].tolist() + ["..."]
            return EquivalenceReport(
                ok=False,
                cases=cases,
                prefixes_checked=prefixes,
                counterexample={
                    "case": case,
                    "alphabet_size": size,
                    "n": n,
                    "field": field,
                    "scanning": expected,
                    "streaming": got,
                    "prefix": shown,
                },
            )

        for n in range(length):
            streaming.push(int(data[n]))
            want_dist = estimate_distribution(seq, n, schedules)
            got_dist = streaming.current_distribution()
            if want_dist != got_dist:
                for field in ("context_len", "matches", "abstained", "probs"):
                    w, g = getattr(want_dist, field), getattr(got_dist, field)
                    if w != g:
                        return fail(n, field, w, g)
            want_est = estimate(seq, n, payoff, schedules)
            got_est = streaming.current_estimate(payoff)
            if want_est != got_est:
                return fail(n, "estimate", want_est, got_est)
            k = want_dist.context_len
            if k > 0:
                times = recurrence_times(seq, n, k)
                problem = _times_defect(arr, n, k, times, want_dist.matches)
                if problem:
                    return fail(n, "recurrence_times", problem, times)
            prefixes += 1
    return EquivalenceReport(ok=True, cases=cases, prefixes_checked=prefixes, counterexample=None)


def _times_defect(arr: np.ndarray, n: int, k: int, times: list, matches: int) -> str | None:
    """Reason the recurrence-time list is wrong, or None when it is exact."""
    if len(times) != matches:
        return f"expected {matches} entries, got {len(times)}"
    if any(b <= a for a, b in zip(times, times[1:])):
        return "entries not strictly increasing"
    if not times:
        return None
    t_arr = np.array(times)
    if t_arr[0] < 1 or t_arr[-1] > n - k + 1:
        return "entry outside [1, n-k+1]"
    starts = n - k + 1 - t_arr
    suffix = arr[n - k + 1 : n + 1]
    for i in range(k):
        if not (arr[starts + i] == suffix[i]).all():
            return "listed backshift does not match the suffix"
    return None
