"""Config document parsing and validation for the CLI.

One JSON document with sections ``process``, ``schedules`` and (for the
simulate command) ``experiment``; the lemmas command reads sections
``resampling``, ``divergence`` and ``return_time`` instead.  Validation
errors carry the offending field path.  Numbers must be JSON numbers:
decimals as strings are rejected to avoid locale ambiguity.
"""

from __future__ import annotations

import json
import math

from .estimator import PayoffFunction, Schedules, schedule_J, schedule_K
from .harness import ExperimentConfig
from .processes import HiddenMarkovProcess, IIDProcess, MarkovProcess, ProcessSpec
from .sequences import Alphabet

__all__ = [
    "ConfigError",
    "load_document",
    "build_process",
    "build_schedules",
    "build_experiment",
    "build_lemma_plan",
    "LemmaPlan",
]


class ConfigError(ValueError):
    """A config document failed validation; the message names the field."""


def load_document(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return doc


def _number(value, path: str, *, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number, got {value!r}")
    if integer:
        if not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer, got {value!r}")
        return value
    return float(value)


def _matrix(value, path: str) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path} must be a non-empty list of rows")
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list) or not row:
            raise ConfigError(f"{path}[{i}] must be a non-empty list of numbers")
        rows.append([_number(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)])
    return rows


def build_alphabet(value, path: str = "process.alphabet") -> Alphabet:
    if isinstance(value, str):
        symbols = list(value)
    elif isinstance(value, list):
        symbols = value
    elif isinstance(value, int) and not isinstance(value, bool):
        if value < 2:
            raise ConfigError(f"{path} size must be >= 2")
        return Alphabet.of_size(value)
    else:
        raise ConfigError(f"{path} must be a string, list of tokens, or integer size")
    try:
        return Alphabet(symbols)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def build_process(doc: dict) -> ProcessSpec:
    section = doc.get("process")
    if section is None:
        section = {"kind": "iid", "alphabet": "01", "probs": [0.5, 0.5]}
    if not isinstance(section, dict):
        raise ConfigError("process must be an object")
    kind = section.get("kind")
    if kind not in ("iid", "markov", "hmm"):
        raise ConfigError(f"process.kind must be one of iid/markov/hmm, got {kind!r}")
    alphabet = build_alphabet(section.get("alphabet", "01"))
    try:
        if kind == "iid":
            probs = section.get("probs")
            if not isinstance(probs, list):
                raise ConfigError("process.probs must be a list of numbers")
            vals = [_number(v, f"process.probs[{i}]") for i, v in enumerate(probs)]
            return IIDProcess(alphabet, tuple(vals))
        if kind == "markov":
            order = _number(section.get("order", 1), "process.order", integer=True)
            rows = _matrix(section.get("transition"), "process.transition")
            return MarkovProcess(alphabet, order, tuple(tuple(r) for r in rows))
        transition = _matrix(section.get("transition"), "process.transition")
        emission = _matrix(section.get("emission"), "process.emission")
        return HiddenMarkovProcess(
            alphabet, tuple(tuple(r) for r in transition), tuple(tuple(r) for r in emission)
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"process: {exc}") from exc


class _ScaledLogK:
    """K(n) = max(1, floor(coeff * log_base(n))); exact path for coeff 0.1."""

    __slots__ = ("base", "coeff")

    def __init__(self, base: int, coeff: float):
        self.base = base
        self.coeff = coeff

    def __call__(self, n: int) -> int:
        if self.coeff == 0.1:
            return schedule_K(n, self.base)
        if n < 1:
            raise ValueError("n must be >= 1")
        return max(1, int(self.coeff * math.log(n) / math.log(self.base) + 1e-9))


class _ConstantSchedule:
    __slots__ = ("value",)

    def __init__(self, value: int):
        self.value = value

    def __call__(self, n: int) -> int:
        if n < 1:
            raise ValueError("n must be >= 1")
        return self.value


class _LinearJ:
    """J(n) = max(1, ceil(coeff * n)); violates J/n -> 0 on purpose when
    coeff is positive, which the lemma checks must detect."""

    __slots__ = ("coeff",)

    def __init__(self, coeff: float):
        self.coeff = coeff

    def __call__(self, n: int) -> int:
        if n < 1:
            raise ValueError("n must be >= 1")
        return max(1, math.ceil(self.coeff * n))


def build_schedules(doc: dict, alphabet: Alphabet, path: str = "schedules") -> Schedules:
    section = doc.get("schedules", {})
    if not isinstance(section, dict):
        raise ConfigError(f"{path} must be an object")
    defaults = Schedules.default(alphabet.size)

    k_desc = section.get("K")
    if k_desc is None:
        k_fn = defaults.K
    else:
        if not isinstance(k_desc, dict):
            raise ConfigError(f"{path}.K must be an object")
        kind = k_desc.get("kind", "log")
        if kind == "log":
            coeff = _number(k_desc.get("coeff", 0.1), f"{path}.K.coeff")
            base = _number(k_desc.get("base", alphabet.size), f"{path}.K.base", integer=True)
            if coeff <= 0 or base < 2:
                raise ConfigError(f"{path}.K needs coeff > 0 and base >= 2")
            k_fn = _ScaledLogK(base, coeff)
        elif kind == "constant":
            value = _number(k_desc.get("value"), f"{path}.K.value", integer=True)
            if value < 1:
                raise ConfigError(f"{path}.K.value must be >= 1")
            k_fn = _ConstantSchedule(value)
        else:
            raise ConfigError(f"{path}.K.kind must be log or constant, got {kind!r}")

    j_desc = section.get("J")
    if j_desc is None:
        j_fn = schedule_J
    else:
        if not isinstance(j_desc, dict):
            raise ConfigError(f"{path}.J must be an object")
        kind = j_desc.get("kind", "sqrt")
        if kind == "sqrt":
            j_fn = schedule_J
        elif kind == "linear":
            coeff = _number(j_desc.get("coeff", 1.0), f"{path}.J.coeff")
            if coeff <= 0:
                raise ConfigError(f"{path}.J.coeff must be positive")
            j_fn = _LinearJ(coeff)
        elif kind == "constant":
            value = _number(j_desc.get("value"), f"{path}.J.value", integer=True)
            if value < 1:
                raise ConfigError(f"{path}.J.value must be >= 1")
            j_fn = _ConstantSchedule(value)
        else:
            raise ConfigError(f"{path}.J.kind must be sqrt/linear/constant, got {kind!r}")
    return Schedules(K=k_fn, J=j_fn)


def build_payoff(desc, alphabet: Alphabet, path: str = "experiment.payoff") -> PayoffFunction | None:
    """None means full-distribution mode."""
    if desc is None:
        return None
    if not isinstance(desc, dict):
        raise ConfigError(f"{path} must be an object")
    kind = desc.get("kind", "distribution")
    if kind == "distribution":
        return None
    if kind == "indicator":
        symbol = desc.get("symbol")
        try:
            return PayoffFunction.indicator(alphabet, symbol)
        except ValueError as exc:
            raise ConfigError(f"{path}.symbol: {exc}") from exc
    if kind == "table":
        values = desc.get("values")
        if not isinstance(values, dict):
            raise ConfigError(f"{path}.values must be an object mapping symbols to numbers")
        mapping = {}
        for token, v in values.items():
            mapping[token] = _number(v, f"{path}.values[{token!r}]")
        try:
            return PayoffFunction.from_map(alphabet, mapping)
        except ValueError as exc:
            raise ConfigError(f"{path}.values: {exc}") from exc
    raise ConfigError(f"{path}.kind must be distribution/indicator/table, got {kind!r}")


def build_experiment(doc: dict, spec: ProcessSpec, schedules: Schedules) -> ExperimentConfig:
    section = doc.get("experiment")
    if not isinstance(section, dict):
        raise ConfigError("experiment section is required and must be an object")
    horizon = _number(section.get("horizon"), "experiment.horizon", integer=True)
    replicates = _number(section.get("replicates", 1), "experiment.replicates", integer=True)
    base_seed = _number(section.get("base_seed", 0), "experiment.base_seed", integer=True)
    workers = _number(section.get("workers", 1), "experiment.workers", integer=True)
    grid = section.get("eval_grid")
    if grid is not None:
        if not isinstance(grid, list) or not grid:
            raise ConfigError("experiment.eval_grid must be a non-empty list of integers")
        grid = tuple(_number(v, f"experiment.eval_grid[{i}]", integer=True) for i, v in enumerate(grid))
    epsilons = section.get("epsilons")
    if epsilons is None:
        epsilons = (0.05, 0.1)
    else:
        if not isinstance(epsilons, list) or not epsilons:
            raise ConfigError("experiment.epsilons must be a non-empty list of numbers")
        epsilons = tuple(_number(v, f"experiment.epsilons[{i}]") for i, v in enumerate(epsilons))
    payoff = build_payoff(section.get("payoff"), spec.alphabet)
    cfg = ExperimentConfig(
        spec=spec,
        horizon=horizon,
        replicates=replicates,
        schedules=schedules,
        eval_grid=grid,
        epsilons=epsilons,
        payoff=payoff,
        base_seed=base_seed,
        workers=workers,
    )
    try:
        return cfg.resolved()
    except ValueError as exc:
        raise ConfigError(f"experiment: {exc}") from exc


class LemmaPlan:
    """Parsed parameters for the three lemma checks."""

    def __init__(self, resampling_cases, resampling_replicates, resampling_seed,
                 divergence_horizon, divergence_replicates, divergence_schedules, divergence_seed,
                 return_block, return_window, return_threshold, return_replicates, return_seed):
        self.resampling_cases = resampling_cases
        self.resampling_replicates = resampling_replicates
        self.resampling_seed = resampling_seed
        self.divergence_horizon = divergence_horizon
        self.divergence_replicates = divergence_replicates
        self.divergence_schedules = divergence_schedules
        self.divergence_seed = divergence_seed
        self.return_block = return_block
        self.return_window = return_window
        self.return_threshold = return_threshold
        self.return_replicates = return_replicates
        self.return_seed = return_seed


def build_lemma_plan(doc: dict, spec: ProcessSpec, schedules: Schedules) -> LemmaPlan:
    alphabet = spec.alphabet

    res = doc.get("resampling", {})
    if not isinstance(res, dict):
        raise ConfigError("resampling must be an object")
    raw_cases = res.get("cases", [{"k": 1, "j": 1, "n": 100}])
    if not isinstance(raw_cases, list) or not raw_cases:
        raise ConfigError("resampling.cases must be a non-empty list")
    cases = []
    for i, case in enumerate(raw_cases):
        if not isinstance(case, dict):
            raise ConfigError(f"resampling.cases[{i}] must be an object")
        cases.append(
            (
                _number(case.get("k", 1), f"resampling.cases[{i}].k", integer=True),
                _number(case.get("j", 1), f"resampling.cases[{i}].j", integer=True),
                _number(case.get("n", 100), f"resampling.cases[{i}].n", integer=True),
                _number(case.get("block_len", 1), f"resampling.cases[{i}].block_len", integer=True),
            )
        )

    div = doc.get("divergence", {})
    if not isinstance(div, dict):
        raise ConfigError("divergence must be an object")
    if "schedules" in div:
        div_sched = build_schedules(div, alphabet, path="divergence.schedules")
    else:
        div_sched = schedules

    ret = doc.get("return_time", {})
    if not isinstance(ret, dict):
        raise ConfigError("return_time must be an object")
    block_value = ret.get("block", alphabet.symbols[-1])
    tokens = list(block_value) if isinstance(block_value, (str, list)) else [block_value]
    try:
        block = tuple(alphabet.encode(t) for t in tokens)
    except ValueError as exc:
        raise ConfigError(f"return_time.block: {exc}") from exc

    return LemmaPlan(
        resampling_cases=cases,
        resampling_replicates=_number(res.get("replicates", 5000), "resampling.replicates", integer=True),
        resampling_seed=_number(res.get("base_seed", 101), "resampling.base_seed", integer=True),
        divergence_horizon=_number(div.get("horizon", 16384), "divergence.horizon", integer=True),
        divergence_replicates=_number(div.get("replicates", 100), "divergence.replicates", integer=True),
        divergence_schedules=div_sched,
        divergence_seed=_number(div.get("base_seed", 102), "divergence.base_seed", integer=True),
        return_block=block,
        return_window=_number(ret.get("window", 100), "return_time.window", integer=True),
        return_threshold=_number(ret.get("threshold", 30), "return_time.threshold", integer=True),
        return_replicates=_number(ret.get("replicates", 20000), "return_time.replicates", integer=True),
        return_seed=_number(ret.get("base_seed", 104), "return_time.base_seed", integer=True),
    )
