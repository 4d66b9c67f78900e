import math

import numpy as np
import pytest

from nextsym import (
    Alphabet,
    ExperimentConfig,
    IIDProcess,
    MarkovProcess,
    PayoffFunction,
    Schedules,
    check_kappa_divergence,
    check_lemma_resampling,
    check_return_time_bound,
    derive_seed,
    estimate,
    generate,
    run_experiment,
    schedule_J,
    total_variation,
)
from nextsym.config import build_schedules
from nextsym.harness import _wilson_halfwidth, default_eval_grid

BINARY = Alphabet("01")
COIN = IIDProcess(BINARY, (0.5, 0.5))
CONSTANT = IIDProcess(BINARY, (1.0, 0.0))
FLIP = MarkovProcess(BINARY, 1, ((0.7, 0.3), (0.3, 0.7)))
IND1 = PayoffFunction.indicator(BINARY, "1")


class TestSeeding:
    def test_frozen_splitmix_values(self):
        # canonical splitmix64 outputs from state 0
        assert derive_seed(0, 0) == 16294208416658607535
        assert derive_seed(0, 1) == 7960286522194355700
        assert derive_seed(0, 2) == 487617019471545679
        assert derive_seed(12345, 7) == 7959005890829367068

    def test_wraps_and_validates(self):
        assert 0 <= derive_seed(2**64 - 1, 0) < 2**64
        with pytest.raises(ValueError):
            derive_seed(1, -1)

    def test_distinct_streams(self):
        seeds = {derive_seed(999, i) for i in range(1000)}
        assert len(seeds) == 1000


class TestConfig:
    def test_defaults_resolved(self):
        cfg = ExperimentConfig(spec=COIN, horizon=100, replicates=2).resolved()
        assert cfg.eval_grid == default_eval_grid(100)
        assert cfg.eval_grid[0] == 1 and cfg.eval_grid[-1] == 100
        assert cfg.schedules is not None and cfg.payoff is None

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            ExperimentConfig(spec=COIN, horizon=0, replicates=1).resolved()
        with pytest.raises(ValueError):
            ExperimentConfig(spec=COIN, horizon=10, replicates=0).resolved()
        with pytest.raises(ValueError):
            ExperimentConfig(spec=COIN, horizon=10, replicates=1, eval_grid=(0, 5)).resolved()
        with pytest.raises(ValueError):
            ExperimentConfig(spec=COIN, horizon=10, replicates=1, eval_grid=(5, 11)).resolved()
        with pytest.raises(ValueError):
            ExperimentConfig(spec=COIN, horizon=10, replicates=1, epsilons=(0.0,)).resolved()
        with pytest.raises(ValueError):
            ExperimentConfig(spec=COIN, horizon=10, replicates=1, epsilons=(1.5,)).resolved()
        with pytest.raises(ValueError):
            ExperimentConfig(
                spec=COIN, horizon=10, replicates=1, payoff=PayoffFunction.indicator(Alphabet("ab"), "a")
            ).resolved()


class TestRunExperiment:
    def test_rows_sorted_and_complete(self):
        cfg = ExperimentConfig(spec=FLIP, horizon=256, replicates=3, payoff=IND1, base_seed=5)
        res = run_experiment(cfg)
        grid = default_eval_grid(256)
        assert [(r.replicate, r.n) for r in res.rows] == [
            (rep, n) for rep in range(3) for n in grid
        ]
        assert len(res.tails) == len(grid) * 2

    def test_cesaro_bookkeeping_exact(self):
        n_max = 300
        cfg = ExperimentConfig(
            spec=FLIP,
            horizon=n_max,
            replicates=2,
            payoff=IND1,
            eval_grid=tuple(range(1, n_max + 1)),
            base_seed=3,
        )
        res = run_experiment(cfg)
        for rep in range(2):
            rows = [r for r in res.rows if r.replicate == rep]
            running = rows[0].cesaro_avg * 1  # cesaro(1) = err_0 exactly
            for row in rows:
                assert row.cesaro_avg == running / row.n
                running += row.abs_error

    def test_abstention_scored_with_zero_convention(self):
        cfg = ExperimentConfig(
            spec=FLIP, horizon=4, replicates=1, payoff=IND1, eval_grid=(1, 2, 3, 4), base_seed=3
        )
        res = run_experiment(cfg)
        for row in res.rows:
            if row.abstained:
                assert row.estimate == 0.0 and row.abs_error == abs(row.oracle)
                assert row.context_len == 0 and row.matches == 0

    def test_iid_coin_example_matches_scanning_evaluator(self):
        cfg = ExperimentConfig(spec=COIN, horizon=4096, replicates=1, payoff=IND1, base_seed=29)
        res = run_experiment(cfg)
        final = res.rows[-1]
        assert final.n == 4096
        assert final.abs_error <= 0.1
        traj = generate(COIN, derive_seed(29, 0), 4096)
        want = estimate(traj.seq, 4096, IND1, Schedules.default(2))
        assert final.estimate == want.value
        assert final.context_len == want.context_len and final.matches == want.matches
        assert final.oracle == 0.5

    def test_distribution_mode_rows(self):
        cfg = ExperimentConfig(
            spec=FLIP, horizon=512, replicates=2, base_seed=8, eval_grid=(1, 2, 64, 512)
        )
        res = run_experiment(cfg)
        for row in res.rows:
            assert 0.0 <= row.abs_error <= 1.0
            assert isinstance(row.estimate, tuple) and isinstance(row.oracle, tuple)
            if row.abstained:
                assert row.estimate == (0.0, 0.0)
                assert row.abs_error == 0.5 * sum(row.oracle)
            else:
                assert abs(sum(row.estimate) - 1.0) <= 1e-12
                assert row.abs_error == total_variation(row.estimate, row.oracle)

    def test_workers_do_not_change_output(self):
        cfg1 = ExperimentConfig(spec=FLIP, horizon=2048, replicates=4, payoff=IND1, base_seed=11, workers=1)
        cfg2 = ExperimentConfig(spec=FLIP, horizon=2048, replicates=4, payoff=IND1, base_seed=11, workers=2)
        res1, res2 = run_experiment(cfg1), run_experiment(cfg2)
        assert res1.rows == res2.rows and res1.tails == res2.tails

    def test_replicate_rows_depend_only_on_base_seed_and_index(self):
        small = run_experiment(ExperimentConfig(spec=FLIP, horizon=512, replicates=3, payoff=IND1, base_seed=21))
        large = run_experiment(ExperimentConfig(spec=FLIP, horizon=512, replicates=6, payoff=IND1, base_seed=21))
        assert small.rows == large.rows[: len(small.rows)]

    def test_tail_fractions_recomputable_from_rows(self):
        cfg = ExperimentConfig(
            spec=FLIP, horizon=256, replicates=5, payoff=IND1, base_seed=13, epsilons=(0.02, 0.2)
        )
        res = run_experiment(cfg)
        for tail in res.tails:
            errs = [r.abs_error for r in res.rows if r.n == tail.n]
            assert tail.fraction == sum(1 for e in errs if e > tail.epsilon) / 5
            assert tail.replicates == 5
            assert tail.wilson_halfwidth == _wilson_halfwidth(tail.fraction, 5)

    def test_wilson_halfwidth_frozen_value(self):
        assert _wilson_halfwidth(0.1, 100) == pytest.approx(0.05956826222211918, abs=1e-15)


class TestLemmaResampling:
    def test_iid_uniform_passes(self):
        report = check_lemma_resampling(COIN, k=1, j=1, n=100, replicates=400, base_seed=17)
        assert report.status == "pass"
        assert report.excluded <= 2  # matching symbol almost surely recurs in 100 steps
        assert report.dof == 1

    def test_constant_process_trivial(self):
        report = check_lemma_resampling(CONSTANT, k=1, j=2, n=50, replicates=100, base_seed=18)
        assert report.status == "pass"
        assert report.counts[0] == 100 and report.counts[1] == 0
        assert report.dof == 0 and report.statistic == 0.0

    def test_markov_pair_block_passes(self):
        report = check_lemma_resampling(FLIP, k=2, j=3, n=200, replicates=400, base_seed=19)
        assert report.status == "pass"

    def test_small_sample_is_inconclusive(self):
        report = check_lemma_resampling(COIN, k=1, j=1, n=100, replicates=10, base_seed=20)
        assert report.status == "inconclusive"
        assert report.usable < 50

    def test_multicoordinate_block_option(self):
        report = check_lemma_resampling(COIN, k=1, j=2, n=80, replicates=400, base_seed=21, block_len=2)
        assert report.status == "pass"
        assert len(report.counts) == 4 and report.dof == 3

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            check_lemma_resampling(COIN, k=0, j=1, n=10, replicates=10)
        with pytest.raises(ValueError):
            check_lemma_resampling(COIN, k=5, j=1, n=3, replicates=10)
        with pytest.raises(ValueError):
            check_lemma_resampling(COIN, k=1, j=1, n=10, replicates=10, block_len=4)


class TestKappaDivergence:
    def aggressive(self):
        return build_schedules({"schedules": {"K": {"kind": "log", "coeff": 0.25}}}, BINARY)

    def test_iid_coin_reaches_cap(self):
        report = check_kappa_divergence(COIN, horizon=4096, replicates=40, schedules=self.aggressive())
        assert report.final_cap == 3
        assert report.status == "pass"
        assert report.fraction_at_cap > 0.95
        assert report.all_blocks_positive
        assert report.min_context[-1] >= 2

    def test_constant_process_pins_cap(self):
        report = check_kappa_divergence(CONSTANT, horizon=2048, replicates=20, schedules=self.aggressive())
        assert report.status == "pass" and report.fraction_at_cap == 1.0
        assert not report.all_blocks_positive

    def test_linear_J_flags_hypothesis_violation(self):
        sch = build_schedules({"schedules": {"J": {"kind": "linear"}}}, BINARY)
        report = check_kappa_divergence(COIN, horizon=4096, replicates=5, schedules=sch)
        assert report.status == "hypothesis_violation"
        assert "J(n)/n" in report.note

    def test_default_schedules_small_horizon_inconclusive(self):
        report = check_kappa_divergence(COIN, horizon=4096, replicates=5)
        assert report.status == "inconclusive"
        assert report.final_cap == 1

    def test_median_context_grows(self):
        report = check_kappa_divergence(COIN, horizon=4096, replicates=20, schedules=self.aggressive())
        med = report.median_context
        assert med[0] <= med[len(med) // 2] <= med[-1]


class TestReturnTimeBound:
    def test_iid_coin_within_bound(self):
        report = check_return_time_bound(COIN, window=100, threshold=30, replicates=2000, block=(1,))
        assert report.status == "pass"
        # Binomial(99, 1/2) below 29 has probability ~1e-5; virtually no events
        assert report.frequency <= 0.001
        assert report.bound >= 0.3

    def test_constant_process_never_fails_event(self):
        report = check_return_time_bound(CONSTANT, window=50, threshold=50, replicates=200, block=(0,))
        assert report.status == "pass" and report.events == 0

    def test_pair_block(self):
        report = check_return_time_bound(FLIP, window=60, threshold=5, replicates=500, block=(1, 1))
        assert report.status == "pass"

    def test_validation(self):
        with pytest.raises(ValueError):
            check_return_time_bound(COIN, window=10, threshold=1, replicates=10, block=())
        with pytest.raises(ValueError):
            check_return_time_bound(COIN, window=10, threshold=1, replicates=10, block=(2,))
        with pytest.raises(ValueError):
            check_return_time_bound(COIN, window=0, threshold=1, replicates=10, block=(1,))


def test_default_eval_grid_shape():
    grid = default_eval_grid(100)
    assert grid[0] == 1 and grid[-1] == 100 and 64 in grid
    assert default_eval_grid(64)[-1] == 64 and default_eval_grid(64).count(64) == 1


def test_schedule_J_growth_used_by_hypothesis_check():
    ratios = [schedule_J(n) / n for n in (16, 256, 4096)]
    assert ratios == sorted(ratios, reverse=True)
