"""Stationary ergodic source generators with exactly computable conditionals.

Three families are provided, chosen because each admits an exact conditional
distribution of the next symbol given the observed prefix:

- ``IIDProcess``: independent draws from a fixed distribution.
- ``MarkovProcess``: order-k chains; the conditional is a transition row once
  k symbols have been seen, and for shorter prefixes it is computed exactly
  from the stationary block law (no burn-in bias anywhere).
- ``HiddenMarkovProcess``: the conditional comes from the forward filter,
  renormalized each step so underflow cannot occur at any horizon.

Trajectories are drawn with the stationary law as the initial condition, so
the generated segment is exactly stationary, and are bit-reproducible given
(spec, seed): the generator is numpy's PCG64 and the draw order is fixed and
documented in :func:`generate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .sequences import Alphabet, SymbolSequence

__all__ = [
    "IIDProcess",
    "MarkovProcess",
    "HiddenMarkovProcess",
    "ProcessSpec",
    "Trajectory",
    "Oracle",
    "generate",
    "stationary_distribution",
    "stationary_block_law",
    "RNG_ALGORITHM",
]

RNG_ALGORITHM = "numpy-pcg64"

_ROW_TOL = 1e-12
_STATIONARY_TOL = 1e-12
_MAX_CONTEXTS = 65536
_MAX_POWER_ITERS = 200_000


def _check_rows(rows, n_rows: int, width: int, what: str) -> tuple:
    """Validate an n_rows x width stochastic matrix given as nested sequences."""
    rows = tuple(rows)
    if len(rows) != n_rows:
        raise ValueError(f"{what} must have {n_rows} rows, got {len(rows)}")
    out = []
    for i, row in enumerate(rows):
        row = tuple(row)
        if len(row) != width:
            raise ValueError(f"{what}[{i}] must have {width} entries, got {len(row)}")
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValueError(f"{what}[{i}][{j}] must be a number, got {v!r}")
            if v < 0:
                raise ValueError(f"{what}[{i}][{j}] is negative")
        s = math.fsum(row)
        if abs(s - 1.0) > _ROW_TOL:
            raise ValueError(f"{what}[{i}] sums to {s!r}, expected 1 within {_ROW_TOL}")
        out.append(tuple(float(v) for v in row))
    return tuple(out)


def _successors(P: np.ndarray) -> list[list[int]]:
    return [list(np.nonzero(P[i] > 0)[0]) for i in range(P.shape[0])]


def _check_irreducible_aperiodic(succ: list[list[int]], what: str) -> None:
    """BFS strong-connectivity plus BFS-level gcd period check."""
    n = len(succ)
    preds: list[list[int]] = [[] for _ in range(n)]
    for u, vs in enumerate(succ):
        if not vs:
            raise ValueError(f"{what}: state {u} has no outgoing transition")
        for v in vs:
            preds[v].append(u)
    for graph, direction in ((succ, "forward"), (preds, "backward")):
        seen = [False] * n
        seen[0] = True
        frontier = [0]
        count = 1
        while frontier:
            nxt = []
            for u in frontier:
                for v in graph[u]:
                    if not seen[v]:
                        seen[v] = True
                        count += 1
                        nxt.append(v)
            frontier = nxt
        if count != n:
            raise ValueError(f"{what} is reducible ({direction} reachability covers {count}/{n} states)")
    # period = gcd of level[u] + 1 - level[v] over all edges, on the BFS tree from 0
    level = [-1] * n
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in succ[u]:
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u, vs in enumerate(succ):
        for v in vs:
            g = math.gcd(g, level[u] + 1 - level[v])
    if g != 1:
        raise ValueError(f"{what} is periodic with period {g}")


@dataclass(frozen=True)
class IIDProcess:
    """Independent draws from ``probs`` (indexed like the alphabet)."""

    alphabet: Alphabet
    probs: tuple

    def __post_init__(self):
        rows = _check_rows([self.probs], 1, self.alphabet.size, "probs")
        object.__setattr__(self, "probs", rows[0])


@dataclass(frozen=True)
class MarkovProcess:
    """Order-k chain; ``rows[c]`` is the next-symbol distribution for the
    context whose base-|alphabet| code is c (earliest symbol most significant).

    The induced chain on k-blocks must be irreducible and aperiodic; this is
    validated at construction because stationary-ergodic generation depends
    on it.
    """

    alphabet: Alphabet
    order: int
    rows: tuple

    def __post_init__(self):
        size = self.alphabet.size
        if self.order < 1:
            raise ValueError("order must be >= 1")
        n_ctx = size**self.order
        if n_ctx > _MAX_CONTEXTS:
            raise ValueError(f"alphabet^order = {n_ctx} exceeds supported {_MAX_CONTEXTS} contexts")
        rows = _check_rows(self.rows, n_ctx, size, "transition")
        object.__setattr__(self, "rows", rows)
        mod = size ** (self.order - 1)
        succ = [
            [(c % mod) * size + b for b in range(size) if rows[c][b] > 0]
            for c in range(n_ctx)
        ]
        _check_irreducible_aperiodic(succ, "block chain")


@dataclass(frozen=True)
class HiddenMarkovProcess:
    """Hidden chain ``transition`` (S x S) with per-state emission rows (S x |alphabet|)."""

    alphabet: Alphabet
    transition: tuple
    emission: tuple

    def __post_init__(self):
        n_states = len(tuple(self.transition))
        if n_states < 1:
            raise ValueError("transition must have at least one state")
        trans = _check_rows(self.transition, n_states, n_states, "transition")
        emit = _check_rows(self.emission, n_states, self.alphabet.size, "emission")
        object.__setattr__(self, "transition", trans)
        object.__setattr__(self, "emission", emit)
        if n_states > 1:
            _check_irreducible_aperiodic(_successors(np.array(trans)), "hidden chain")


ProcessSpec = Union[IIDProcess, MarkovProcess, HiddenMarkovProcess]


@dataclass(frozen=True)
class Trajectory:
    """A generated segment X_0..X_N plus optional exact conditionals.

    ``oracle_conditionals[n]`` is P(X_{n+1} = . | X_0..X_n) for each n that
    was requested at generation time.  Same (spec, seed, horizon) always
    reproduces the identical trajectory and conditionals.
    """

    seq: SymbolSequence
    rng_seed: int
    oracle_conditionals: dict = field(default_factory=dict)


def stationary_distribution(transition) -> np.ndarray:
    """Stationary row vector of an irreducible aperiodic stochastic matrix.

    Exact shortcuts cover the symmetric cases (doubly stochastic -> uniform,
    two states -> closed form); otherwise power iteration runs until the
    residual ||pi P - pi||_inf is at most 1e-12.
    """
    P = np.asarray(transition, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition must be a square matrix")
    n = P.shape[0]
    _check_rows([tuple(row) for row in P], n, n, "transition")
    if n > 1:
        _check_irreducible_aperiodic(_successors(P), "chain")
    if n == 1:
        return np.array([1.0])
    if np.abs(P.sum(axis=0) - 1.0).max() <= 1e-14:  # doubly stochastic
        return np.full(n, 1.0 / n)
    if n == 2:
        a, b = P[0, 1], P[1, 0]
        return np.array([b / (a + b), a / (a + b)])
    pi = np.full(n, 1.0 / n)
    for _ in range(_MAX_POWER_ITERS):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.abs(nxt - pi).max() <= 1e-15:
            pi = nxt
            break
        pi = nxt
    residual = np.abs(pi @ P - pi).max()
    if residual > _STATIONARY_TOL:
        raise ValueError(f"power iteration did not converge (residual {residual:.3e})")
    return pi


def _markov_block_stationary(spec: MarkovProcess) -> np.ndarray:
    """Stationary law over order-k context codes, by sparse power iteration."""
    size = spec.alphabet.size
    k = spec.order
    P = np.array(spec.rows)  # (size^k, size)
    n_ctx = size**k
    if k == 1:
        return stationary_distribution(P)
    mod = size ** (k - 1)
    pi = np.full(n_ctx, 1.0 / n_ctx)
    for _ in range(_MAX_POWER_ITERS):
        # mass pi[c] * P[c, b] flows to context (c mod mod) * size + b
        nxt = (pi[:, None] * P).reshape(size, mod * size).sum(axis=0)
        nxt /= nxt.sum()
        if np.abs(nxt - pi).max() <= 1e-15:
            pi = nxt
            break
        pi = nxt
    residual = np.abs((pi[:, None] * P).reshape(size, mod * size).sum(axis=0) - pi).max()
    if residual > _STATIONARY_TOL:
        raise ValueError(f"block-chain power iteration did not converge (residual {residual:.3e})")
    return pi


def stationary_block_law(spec: ProcessSpec, length: int) -> np.ndarray:
    """Stationary probability of every length-``length`` block, indexed by the
    block's base-|alphabet| code (earliest symbol most significant)."""
    if length < 1:
        raise ValueError("length must be >= 1")
    size = spec.alphabet.size
    if size**length > _MAX_CONTEXTS:
        raise ValueError("block space too large")
    if isinstance(spec, IIDProcess):
        law = np.array(spec.probs)
        base = np.array(spec.probs)
        for _ in range(length - 1):
            law = np.kron(law, base)
        return law
    if isinstance(spec, MarkovProcess):
        k = spec.order
        pi_k = _markov_block_stationary(spec)
        if length <= k:
            return pi_k.reshape(size**length, -1).sum(axis=1)
        law = pi_k
        P = np.array(spec.rows)
        for i in range(k, length):
            ctx = np.arange(size**i) % (size**k)
            law = (law[:, None] * P[ctx]).reshape(-1)
        return law
    if isinstance(spec, HiddenMarkovProcess):
        A = np.array(spec.transition)
        E = np.array(spec.emission)
        pi_h = stationary_distribution(A)
        law = np.empty(size**length)
        for code in range(size**length):
            syms = _decode_block(code, size, length)
            v = pi_h * E[:, syms[0]]
            for s in syms[1:]:
                v = (v @ A) * E[:, s]
            law[code] = v.sum()
        return law
    raise TypeError(f"unsupported process spec {type(spec).__name__}")


def _decode_block(code: int, size: int, length: int) -> list[int]:
    syms = [0] * length
    for i in range(length - 1, -1, -1):
        syms[i] = code % size
        code //= size
    return syms


def _cumulative(row: Sequence[float]) -> list[float]:
    acc = 0.0
    out = []
    for v in row:
        acc += v
        out.append(acc)
    out[-1] = 1.0  # saturate the last boundary against rounding
    return out


def generate(spec: ProcessSpec, seed: int, horizon: int, eval_set: Sequence[int] = ()) -> Trajectory:
    """Draw X_0..X_horizon with the stationary law as initial condition.

    Draw order (fixed for reproducibility): IID consumes one uniform per
    symbol; Markov consumes one uniform for the initial k-block then one per
    subsequent symbol; HMM consumes one uniform for the initial hidden state
    then an (emission, transition) pair per time step.  Uniforms are mapped
    to symbols by inverse CDF over cumulative row sums.

    ``eval_set`` positions get their exact conditional P(X_{n+1}=.|X_0..X_n)
    recorded in the returned trajectory.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    size = spec.alphabet.size
    n_sym = horizon + 1
    if isinstance(spec, IIDProcess):
        cum = np.cumsum(spec.probs)
        draws = np.searchsorted(cum, rng.random(n_sym), side="right")
        data = bytearray(np.minimum(draws, size - 1).astype(np.uint8).tobytes())
    elif isinstance(spec, MarkovProcess):
        k = spec.order
        pi_k = _markov_block_stationary(spec)
        state = min(int(np.searchsorted(np.cumsum(pi_k), rng.random(), side="right")), size**k - 1)
        data = bytearray(_decode_block(state, size, k)[:n_sym])
        if n_sym > k:
            cums = [_cumulative(row) for row in spec.rows]
            mod = size ** (k - 1)
            for u in rng.random(n_sym - k).tolist():
                row = cums[state]
                x = 0
                while u >= row[x]:
                    x += 1
                data.append(x)
                state = (state % mod) * size + x
    elif isinstance(spec, HiddenMarkovProcess):
        A_cums = [_cumulative(row) for row in spec.transition]
        E_cums = [_cumulative(row) for row in spec.emission]
        pi_h = np.cumsum(stationary_distribution(np.array(spec.transition)))
        s = min(int(np.searchsorted(pi_h, rng.random(), side="right")), len(spec.transition) - 1)
        data = bytearray(n_sym)
        us = rng.random(2 * n_sym).tolist()
        for m in range(n_sym):
            u = us[2 * m]
            row = E_cums[s]
            x = 0
            while u >= row[x]:
                x += 1
            data[m] = x
            u = us[2 * m + 1]
            row = A_cums[s]
            s = 0
            while u >= row[s]:
                s += 1
    else:
        raise TypeError(f"unsupported process spec {type(spec).__name__}")
    seq = SymbolSequence(spec.alphabet, data)
    conditionals: dict = {}
    if eval_set:
        cursor = Oracle(spec).cursor()
        wanted = sorted(set(eval_set))
        if wanted[0] < 0 or wanted[-1] > horizon:
            raise ValueError("eval_set positions must lie in [0, horizon]")
        it = iter(wanted)
        target = next(it)
        for n, x in enumerate(data):
            cursor.observe(x)
            if n == target:
                conditionals[n] = cursor.conditional()
                target = next(it, None)
                if target is None:
                    break
    return Trajectory(seq=seq, rng_seed=seed, oracle_conditionals=conditionals)


class Oracle:
    """Exact evaluator of P(X_{n+1} = . | X_0..X_n) for a process spec.

    ``cursor()`` returns a stateful stream (observe one symbol at a time and
    read the current conditional in O(1)-ish work); ``conditional`` answers
    for a whole prefix at once.
    """

    def __init__(self, spec: ProcessSpec):
        self.spec = spec
        size = spec.alphabet.size
        if isinstance(spec, IIDProcess):
            self._kind = "iid"
        elif isinstance(spec, MarkovProcess):
            self._kind = "markov"
            # conditional tables for prefixes shorter than the order, derived
            # from the stationary block law so no approximation enters at n=0
            k = spec.order
            pi_k = _markov_block_stationary(spec)
            marginals = [None] * (k + 1)
            marginals[k] = pi_k
            for j in range(k - 1, 0, -1):
                marginals[j] = marginals[j + 1].reshape(size**j, size).sum(axis=1)
            short: list = [None]
            for m in range(1, k):
                p_m, p_next = marginals[m], marginals[m + 1]
                table = []
                for h in range(size**m):
                    if p_m[h] <= 0:
                        table.append(None)
                        continue
                    table.append(tuple(float(p_next[h * size + x] / p_m[h]) for x in range(size)))
                short.append(table)
            self._short = short
        elif isinstance(spec, HiddenMarkovProcess):
            self._kind = "hmm"
            self._A = np.array(spec.transition)
            self._E = np.array(spec.emission)
            self._pi_h = stationary_distribution(self._A)
        else:
            raise TypeError(f"unsupported process spec {type(spec).__name__}")

    def cursor(self):
        if self._kind == "iid":
            return _IIDCursor(self.spec)
        if self._kind == "markov":
            return _MarkovCursor(self.spec, self._short)
        return _HMMCursor(self._A, self._E, self._pi_h, self.spec.alphabet.size)

    def conditional(self, history, n: int | None = None) -> tuple:
        """Conditional next-symbol distribution given history[0..n]."""
        if n is None:
            n = len(history) - 1
        if n < 0 or n >= len(history):
            raise ValueError(f"n={n} outside history of length {len(history)}")
        size = self.spec.alphabet.size
        if self._kind == "markov":
            spec = self.spec
            k = spec.order
            if n >= k - 1:
                code = _encode_slice(history, n - k + 1, n + 1, size)
                return spec.rows[code]
            cond = self._short[n + 1][_encode_slice(history, 0, n + 1, size)]
            if cond is None:
                raise ValueError("history has zero probability under the model")
            return cond
        cursor = self.cursor()
        for i in range(n + 1):
            cursor.observe(history[i])
        return cursor.conditional()

    def expectation(self, history, payoff, n: int | None = None) -> float:
        """E(g(X_{n+1}) | history[0..n]) as a dot product with the conditional."""
        cond = self.conditional(history, n)
        return math.fsum(p * v for p, v in zip(cond, payoff.values))


def _encode_slice(history, start: int, stop: int, size: int) -> int:
    code = 0
    for i in range(start, stop):
        x = history[i]
        if not 0 <= x < size:
            raise ValueError(f"symbol index {x} at position {i} outside alphabet")
        code = code * size + x
    return code


class _IIDCursor:
    __slots__ = ("_probs", "_size", "_seen")

    def __init__(self, spec: IIDProcess):
        self._probs = spec.probs
        self._size = spec.alphabet.size
        self._seen = 0

    def observe(self, x: int) -> None:
        if not 0 <= x < self._size:
            raise ValueError(f"symbol index {x} outside alphabet")
        self._seen += 1

    def conditional(self) -> tuple:
        if self._seen == 0:
            raise ValueError("conditional undefined before any observation")
        return self._probs


class _MarkovCursor:
    __slots__ = ("_rows", "_short", "_k", "_size", "_mod", "_code", "_seen")

    def __init__(self, spec: MarkovProcess, short):
        self._rows = spec.rows
        self._short = short
        self._k = spec.order
        self._size = spec.alphabet.size
        self._mod = self._size ** (self._k - 1)
        self._code = 0
        self._seen = 0

    def observe(self, x: int) -> None:
        if not 0 <= x < self._size:
            raise ValueError(f"symbol index {x} outside alphabet")
        if self._seen < self._k:
            self._code = self._code * self._size + x
        else:
            self._code = (self._code % self._mod) * self._size + x
        self._seen += 1

    def conditional(self) -> tuple:
        seen = self._seen
        if seen == 0:
            raise ValueError("conditional undefined before any observation")
        if seen >= self._k:
            return self._rows[self._code]
        cond = self._short[seen][self._code]
        if cond is None:
            raise ValueError("history has zero probability under the model")
        return cond


class _HMMCursor:
    __slots__ = ("_A", "_E", "_pi", "_alpha", "_size")

    def __init__(self, A: np.ndarray, E: np.ndarray, pi_h: np.ndarray, size: int):
        self._A = A
        self._E = E
        self._pi = pi_h
        self._alpha = None
        self._size = size

    def observe(self, x: int) -> None:
        if not 0 <= x < self._size:
            raise ValueError(f"symbol index {x} outside alphabet")
        if self._alpha is None:
            alpha = self._pi * self._E[:, x]
        else:
            alpha = (self._alpha @ self._A) * self._E[:, x]
        total = alpha.sum()
        if total <= 0.0:
            raise ValueError("history has zero probability under the model")
        self._alpha = alpha / total  # renormalize every step; no underflow at any horizon

    def conditional(self) -> tuple:
        if self._alpha is None:
            raise ValueError("conditional undefined before any observation")
        cond = (self._alpha @ self._A) @ self._E
        return tuple(float(v) for v in cond)
