"""Monte Carlo harness: consistency experiments and lemma checks.

``run_experiment`` streams replicate trajectories through the incremental
estimator, scores every step against the exact oracle (pointwise error for a
payoff, total-variation distance in distribution mode) and keeps the running
Cesaro average; rows are recorded on an evaluation grid and tail fractions
per epsilon summarize the weak-consistency picture.

Abstentions are scored with the estimator's literal value 0 inside the
Cesaro average (that is what the averaged theorem bounds), but each row
carries the abstained flag so pointwise plots can exclude them.

The three lemma checks are separate entry points: the resampling-distribution
check (recurrence-time resampling preserves the law), the context-length
divergence check, and the short-return-time bound.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .estimator import PayoffFunction, Schedules, payoff_mean, recurrence_times
from .processes import Oracle, ProcessSpec, generate, stationary_block_law
from .seeding import derive_seed
from .streaming import _HIST, StreamingEstimator

__all__ = [
    "ExperimentConfig",
    "MetricsRow",
    "TailEstimate",
    "ExperimentResult",
    "run_experiment",
    "LemmaResamplingReport",
    "check_lemma_resampling",
    "KappaDivergenceReport",
    "check_kappa_divergence",
    "ReturnTimeReport",
    "check_return_time_bound",
    "total_variation",
]

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


def default_eval_grid(horizon: int) -> tuple:
    """Powers of two up to the horizon, plus the horizon itself."""
    grid = set()
    p = 1
    while p <= horizon:
        grid.add(p)
        p *= 2
    grid.add(horizon)
    return tuple(sorted(grid))


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment; every output is a pure function
    of this object."""

    spec: ProcessSpec
    horizon: int
    replicates: int
    schedules: Schedules | None = None
    eval_grid: tuple | None = None
    epsilons: tuple = (0.05, 0.1)
    payoff: PayoffFunction | None = None  # None = full-distribution mode
    base_seed: int = 0
    workers: int = 1

    def resolved(self) -> "ExperimentConfig":
        """Validate and fill defaults, returning a self-contained config."""
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.base_seed < 1 << 64:
            raise ValueError("base_seed must be a 64-bit unsigned integer")
        schedules = self.schedules or Schedules.default(self.spec.alphabet.size)
        grid = self.eval_grid if self.eval_grid is not None else default_eval_grid(self.horizon)
        grid = tuple(sorted(set(int(n) for n in grid)))
        if not grid:
            raise ValueError("eval_grid must not be empty")
        if grid[0] < 1 or grid[-1] > self.horizon:
            raise ValueError(f"eval_grid must lie within [1, {self.horizon}]")
        if not self.epsilons:
            raise ValueError("epsilons must not be empty")
        indicator_like = self.payoff is None or set(self.payoff.values) <= {0.0, 1.0}
        for eps in self.epsilons:
            if eps <= 0:
                raise ValueError("epsilons must be positive")
            if indicator_like and eps > 1:
                raise ValueError("epsilons must lie in (0, 1] for indicator payoffs")
        if self.payoff is not None and self.payoff.alphabet != self.spec.alphabet:
            raise ValueError("payoff alphabet does not match the process alphabet")
        return replace(self, schedules=schedules, eval_grid=grid, epsilons=tuple(self.epsilons))


@dataclass(frozen=True)
class MetricsRow:
    """Diagnostics at one grid position of one replicate.

    ``estimate`` and ``oracle`` are floats in payoff mode and probability
    tuples in distribution mode; ``abs_error`` is |estimate - oracle| or the
    total-variation distance accordingly.  ``cesaro_avg`` is the mean of
    abs_error over all earlier steps i < n, abstentions included with the
    estimator's zero convention.
    """

    replicate: int
    n: int
    context_len: int
    matches: int
    abstained: bool
    estimate: object
    oracle: object
    abs_error: float
    cesaro_avg: float


@dataclass(frozen=True)
class TailEstimate:
    """Share of replicates whose error exceeded epsilon at grid position n."""

    n: int
    epsilon: float
    fraction: float
    wilson_halfwidth: float
    replicates: int


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple
    tails: tuple


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    return 0.5 * sum(abs(a - b) for a, b in zip(p, q))


def _wilson_halfwidth(fraction: float, n: int) -> float:
    z2 = _Z95 * _Z95
    return (_Z95 * math.sqrt(fraction * (1.0 - fraction) / n + z2 / (4.0 * n * n))) / (1.0 + z2 / n)


def _run_replicate(cfg: ExperimentConfig, replicate: int) -> list:
    """Rows for one replicate; the per-step loop is the hot path and the
    error stream feeds the Cesaro accumulator in time order."""
    seed = derive_seed(cfg.base_seed, replicate)
    traj = generate(cfg.spec, seed, cfg.horizon)
    est = StreamingEstimator(cfg.spec.alphabet, cfg.schedules, horizon=cfg.horizon)
    cursor = Oracle(cfg.spec).cursor()
    push = est.push
    probe = est.probe
    observe = cursor.observe
    conditional = cursor.conditional
    grid = cfg.eval_grid
    gi = 0
    next_grid = grid[0]
    scalar = cfg.payoff is not None
    gvals = cfg.payoff.values if scalar else None
    # indicator payoffs reduce the estimate to one histogram cell and the
    # oracle expectation to one conditional entry, with identical arithmetic
    zi = None
    if scalar and sorted(gvals) == [0.0] * (len(gvals) - 1) + [1.0]:
        zi = gvals.index(1.0)
    size = cfg.spec.alphabet.size
    rows: list = []
    err_sum = 0.0
    n = 0
    for x in traj.seq:
        push(x)
        observe(x)
        hit = probe()
        cond = conditional()
        if scalar:
            if zi is None:
                o = 0.0
                for p, v in zip(cond, gvals):
                    o += p * v
            else:
                o = cond[zi]
            if hit is None:
                k = matches = 0
                val = 0.0
            elif zi is None:
                k, matches, cell = hit
                val = payoff_mean(cell[_HIST:], gvals, matches)
            else:
                k, matches, cell = hit
                val = cell[_HIST + zi] / matches
            err = val - o
            if err < 0.0:
                err = -err
        else:
            if hit is None:
                k = matches = 0
                err = 0.5 * sum(cond)  # TV against the all-zero abstention vector
            else:
                k, matches, cell = hit
                s = 0.0
                i = _HIST
                for q in cond:
                    d = cell[i] / matches - q
                    s += d if d >= 0.0 else -d
                    i += 1
                err = 0.5 * s
        if n == next_grid:
            if scalar:
                est_out, oracle_out = val, o
            else:
                oracle_out = cond
                if hit is None:
                    est_out = (0.0,) * size
                else:
                    est_out = tuple(c / matches for c in cell[_HIST:])
            rows.append(
                MetricsRow(replicate, n, k, matches, hit is None, est_out, oracle_out, err, err_sum / n)
            )
            gi += 1
            next_grid = grid[gi] if gi < len(grid) else -1
        err_sum += err
        n += 1
    return rows


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run all replicates and aggregate tail fractions.

    Rows come back sorted by (replicate, n) whatever the worker scheduling,
    so output bytes depend only on the config.
    """
    cfg = config.resolved()
    if cfg.workers == 1 or cfg.replicates == 1:
        per_rep = [_run_replicate(cfg, r) for r in range(cfg.replicates)]
    else:
        per_rep = [None] * cfg.replicates
        with ProcessPoolExecutor(max_workers=min(cfg.workers, cfg.replicates)) as pool:
            futures = {pool.submit(_run_replicate, cfg, r): r for r in range(cfg.replicates)}
            for fut in as_completed(futures):
                per_rep[futures[fut]] = fut.result()
    rows = tuple(row for rep_rows in per_rep for row in rep_rows)
    by_n: dict = {n: [] for n in cfg.eval_grid}
    for row in rows:
        by_n[row.n].append(row.abs_error)
    tails = []
    for n in cfg.eval_grid:
        errs = by_n[n]
        for eps in cfg.epsilons:
            exceed = sum(1 for e in errs if e > eps)
            frac = exceed / cfg.replicates
            tails.append(TailEstimate(n, eps, frac, _wilson_halfwidth(frac, cfg.replicates), cfg.replicates))
    return ExperimentResult(rows=rows, tails=tuple(tails))


# ---------------------------------------------------------------------------
# Lemma checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LemmaResamplingReport:
    """Chi-square comparison of resampled blocks against the stationary law.

    Replicates where the requested recurrence does not exist inside the
    segment are excluded and counted; with fewer than 50 usable replicates
    the verdict is 'inconclusive' rather than a failure.
    """

    k: int
    j: int
    n: int
    block_len: int
    replicates: int
    usable: int
    excluded: int
    counts: tuple
    expected: tuple
    statistic: float
    dof: int
    threshold: float
    status: str


def check_lemma_resampling(
    spec: ProcessSpec,
    k: int,
    j: int,
    n: int,
    replicates: int,
    base_seed: int = 101,
    block_len: int = 1,
) -> LemmaResamplingReport:
    """Locate the j-th recurrence of the length-k suffix at time n and test
    whether the symbols found there are distributed like the process itself.

    The resampled coordinates start one step after the located occurrence,
    so trajectories are generated ``block_len - 1`` steps past n.
    """
    if k < 1 or j < 1 or n < 0:
        raise ValueError("need k >= 1, j >= 1, n >= 0")
    if k > n + 1:
        raise ValueError(f"k={k} exceeds n+1={n + 1}")
    if not 1 <= block_len <= 3:
        raise ValueError("block_len must be in 1..3")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    size = spec.alphabet.size
    horizon = max(1, n + block_len - 1)
    counts = [0] * size**block_len
    excluded = 0
    for r in range(replicates):
        traj = generate(spec, derive_seed(base_seed, r), horizon)
        times = recurrence_times(traj.seq, n, k, count=j)
        if len(times) < j:
            excluded += 1
            continue
        t = times[-1]
        code = 0
        data = traj.seq
        for i in range(n - t + 1, n - t + 1 + block_len):
            code = code * size + data[i]
        counts[code] += 1
    usable = replicates - excluded
    law = stationary_block_law(spec, block_len)
    support = [i for i in range(len(law)) if law[i] > 0]
    impossible = any(counts[i] > 0 for i in range(len(law)) if law[i] <= 0)
    dof = len(support) - 1
    statistic = 0.0
    if usable > 0:
        for i in support:
            expected = usable * law[i]
            diff = counts[i] - expected
            statistic += diff * diff / expected
    threshold = _chi2_quantile_999(dof) if dof >= 1 else 0.0
    if impossible:
        status = "fail"
    elif usable < 50:
        status = "inconclusive"
    else:
        status = "pass" if statistic <= threshold else "fail"
    return LemmaResamplingReport(
        k=k,
        j=j,
        n=n,
        block_len=block_len,
        replicates=replicates,
        usable=usable,
        excluded=excluded,
        counts=tuple(counts),
        expected=tuple(float(usable * p) for p in law),
        statistic=float(statistic),
        dof=dof,
        threshold=float(threshold),
        status=status,
    )


def _chi2_quantile_999(dof: int) -> float:
    from scipy.stats import chi2

    return float(chi2.ppf(0.999, dof))


@dataclass(frozen=True)
class KappaDivergenceReport:
    """Empirical divergence of the matched context length.

    ``fraction_at_cap`` is the share of replicates whose context length hit
    the schedule cap K at the final position.  The 0.95 pass rule is only
    decisive when every cap-length block has positive stationary
    probability; otherwise a miss is reported as inconclusive.
    """

    horizon: int
    replicates: int
    grid: tuple
    min_context: tuple
    median_context: tuple
    final_cap: int
    fraction_at_cap: float
    all_blocks_positive: bool
    status: str
    note: str = ""


def _schedule_hypothesis_note(schedules: Schedules, horizon: int) -> str:
    """Empty string when the divergence hypotheses look satisfied on a grid:
    K and J nondecreasing, J(n)/n nonincreasing and strictly smaller at the
    horizon than at the start."""
    grid = sorted({min(16, horizon), 256, 4096, 65536, horizon})
    grid = [n for n in grid if 1 <= n <= horizon]
    if len(grid) < 2:
        return "grid too short to assess schedule growth"
    ks = [schedules.K(n) for n in grid]
    js = [schedules.J(n) for n in grid]
    if any(b < a for a, b in zip(ks, ks[1:])):
        return f"K is not nondecreasing on grid {grid}"
    if any(b < a for a, b in zip(js, js[1:])):
        return f"J is not nondecreasing on grid {grid}"
    ratios = [j / n for j, n in zip(js, grid)]
    if any(b > a + 1e-12 for a, b in zip(ratios, ratios[1:])) or not ratios[-1] < ratios[0]:
        return f"J(n)/n does not decay on grid {grid}"
    return ""


def check_kappa_divergence(
    spec: ProcessSpec,
    horizon: int,
    replicates: int,
    schedules: Schedules | None = None,
    base_seed: int = 102,
) -> KappaDivergenceReport:
    """Record matched context lengths along the grid and test that they reach
    the schedule cap at the horizon in at least 95% of replicates."""
    if horizon < 1 or replicates < 1:
        raise ValueError("need horizon >= 1 and replicates >= 1")
    schedules = schedules or Schedules.default(spec.alphabet.size)
    note = _schedule_hypothesis_note(schedules, horizon)
    grid = default_eval_grid(horizon)
    if note:
        return KappaDivergenceReport(
            horizon=horizon,
            replicates=replicates,
            grid=grid,
            min_context=(),
            median_context=(),
            final_cap=0,
            fraction_at_cap=0.0,
            all_blocks_positive=False,
            status="hypothesis_violation",
            note=note,
        )
    final_cap = schedules.K(horizon)
    law = stationary_block_law(spec, final_cap)
    all_positive = bool(law.min() > 0)
    per_grid: list[list[int]] = [[] for _ in grid]
    at_cap = 0
    for r in range(replicates):
        traj = generate(spec, derive_seed(base_seed, r), horizon)
        est = StreamingEstimator(spec.alphabet, schedules, horizon=horizon)
        push = est.push
        probe = est.probe
        gi = 0
        next_grid = grid[0]
        n = 0
        for x in traj.seq:
            push(x)
            if n == next_grid:
                hit = probe()
                per_grid[gi].append(hit[0] if hit is not None else 0)
                gi += 1
                next_grid = grid[gi] if gi < len(grid) else -1
            n += 1
        if per_grid[-1][-1] == final_cap:  # grid always ends at the horizon
            at_cap += 1
    fraction = at_cap / replicates
    if final_cap < 2:
        status = "inconclusive"
        note = f"K(horizon)={final_cap} < 2: cap too small to witness divergence"
    elif fraction > 0.95:
        status = "pass"
    elif not all_positive:
        status = "inconclusive"
        note = "some cap-length blocks have zero stationary probability"
    else:
        status = "fail"
    return KappaDivergenceReport(
        horizon=horizon,
        replicates=replicates,
        grid=grid,
        min_context=tuple(min(v) for v in per_grid),
        median_context=tuple(statistics.median(v) for v in per_grid),
        final_cap=final_cap,
        fraction_at_cap=fraction,
        all_blocks_positive=all_positive,
        status=status,
        note=note,
    )


@dataclass(frozen=True)
class ReturnTimeReport:
    """Monte Carlo bound check: starting inside the block event, fewer than
    ``threshold`` occurrences among the first ``window`` shifts should happen
    with probability at most threshold/window."""

    block: tuple
    window: int
    threshold: int
    replicates: int
    events: int
    frequency: float
    sigma: float
    bound: float
    status: str


def check_return_time_bound(
    spec: ProcessSpec,
    window: int,
    threshold: int,
    replicates: int,
    block: Sequence[int],
    base_seed: int = 104,
) -> ReturnTimeReport:
    """Estimate P(block at time 0 and fewer than ``threshold`` occurrences in
    the first ``window`` shifts); pass when the frequency is within
    threshold/window plus three binomial sigmas."""
    block = tuple(int(b) for b in block)
    k = len(block)
    if k < 1:
        raise ValueError("block must be nonempty")
    size = spec.alphabet.size
    if any(not 0 <= b < size for b in block):
        raise ValueError("block symbols outside alphabet")
    if window < 1 or threshold < 1 or replicates < 1:
        raise ValueError("need window >= 1, threshold >= 1, replicates >= 1")
    pattern = np.array(block, dtype=np.uint8)
    events = 0
    horizon = window + k - 1
    for r in range(replicates):
        traj = generate(spec, derive_seed(base_seed, r), horizon)
        arr = traj.seq.as_array()
        if k == 1:
            mask = arr[:window] == pattern[0]
        else:
            mask = (sliding_window_view(arr[: window + k - 1], k) == pattern).all(axis=1)
        if mask[0] and int(mask.sum()) < threshold:
            events += 1
    frequency = events / replicates
    sigma = math.sqrt(frequency * (1.0 - frequency) / replicates)
    bound = threshold / window + 3.0 * sigma
    status = "pass" if frequency <= bound else "fail"
    return ReturnTimeReport(
        block=block,
        window=window,
        threshold=threshold,
        replicates=replicates,
        events=events,
        frequency=frequency,
        sigma=sigma,
        bound=bound,
        status=status,
    )
