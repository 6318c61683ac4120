import csv
import math

import numpy as np
import pytest
from scipy.stats import chisquare

from hideseek.distributions import BanditLossSpec, sample_bandit_loss_batch
from hideseek.estimators import most_common_action
from hideseek.learners import (
    Exp3Bandit,
    appendix_rho,
    default_exploration,
    default_hedge_rate,
    run_coordinate_bandit,
    run_hedge,
)
from hideseek.protocol import ProtocolSpec, run_protocol
from hideseek.rng import stream


def test_default_rates():
    assert default_hedge_rate(8, 100) == pytest.approx(math.sqrt(8 * math.log(8) / 100))
    assert default_exploration(32, 20000) == pytest.approx(math.sqrt(32 * math.log(32) / 20000))
    assert default_exploration(32, 10) == 1.0


def test_appendix_rho():
    assert appendix_rho(32, 20000) == pytest.approx(5.9e-3 * 0.04)
    assert appendix_rho(4, 10) == pytest.approx(5.9e-3 * 0.25)
    assert appendix_rho(32, 20000, c2=1.0) == pytest.approx(0.04)


def test_hedge_single_round():
    for k in range(20):
        trace = run_hedge(BanditLossSpec(3, 0.1, 0), 1, rng=stream(1, k))
        assert trace.regret_best() <= 1


def test_hedge_rejects_bad_arguments():
    with pytest.raises(ValueError):
        run_hedge(BanditLossSpec(3, 0.1, 0), 0)
    with pytest.raises(ValueError):
        run_hedge(BanditLossSpec(3, 0.1, 0), 10, eta=0.0)
    with pytest.raises(ValueError):
        run_coordinate_bandit(BanditLossSpec(3, 0.1, 0), 0)


def test_hedge_regret_bound_no_signal():
    d, T = 8, 10_000
    bound = 2 * math.sqrt(T * math.log(d))
    for t in range(50):
        trace = run_hedge(BanditLossSpec(d, 0.0, 0), T, rng=stream(2, t))
        assert trace.regret_best() <= bound


def test_hedge_regret_vs_biased_arm():
    d, T = 32, 20_000
    bound = 2 * math.sqrt(T * math.log(d))
    regrets = []
    for t in range(5):
        spec = BanditLossSpec(d, 0.05, 0)
        trace = run_hedge(spec, T, rng=stream(3, t))
        regrets.append(trace.regret_vs(0))
        half = trace.regret_vs(0, T // 2)
        # sublinear: the second half costs less than the first
        assert trace.regret_vs(0) - half < half
    assert np.mean(regrets) <= bound


def test_hedge_uniform_losses_keep_uniform_play():
    d, T = 4, 20_000
    losses = np.repeat(stream(4).integers(0, 2, size=(T, 1)), d, axis=1).astype(np.uint8)
    trace = run_hedge(BanditLossSpec(d, 0.0, 0), T, rng=stream(5), losses=losses)
    counts = np.bincount(trace.actions, minlength=d)
    assert chisquare(counts).pvalue > 1e-3


def test_trace_consistency():
    spec = BanditLossSpec(6, 0.1, 2)
    for runner in (run_hedge, run_coordinate_bandit):
        trace = runner(spec, 500, rng=stream(6))
        for j in range(6):
            assert trace.regret_vs(j) == pytest.approx(trace.accumulated[j], abs=1e-9)
        vs_j, best = trace.curves([100, 500], 2)
        assert vs_j[-1] == pytest.approx(trace.regret_vs(2))
        assert best[-1] == pytest.approx(trace.regret_best())
        assert best[0] == pytest.approx(trace.regret_best(100))


def test_bandit_no_signal_regret_near_zero():
    d, T, trials = 2, 1000, 40
    regrets = [
        run_coordinate_bandit(BanditLossSpec(d, 0.0, 0), T, rng=stream(7, t)).regret_vs(0)
        for t in range(trials)
    ]
    assert abs(np.mean(regrets)) <= 3 * math.sqrt(T)


def test_bandit_structure_and_budget():
    spec = BanditLossSpec(5, 0.2, 3)
    T = 300
    losses = sample_bandit_loss_batch(spec, stream(8), T)
    learner = Exp3Bandit(spec.d, T)
    transcript = run_protocol(learner, ProtocolSpec(1, 1, T), losses, stream(9))
    assert all(len(m) == 1 for m in transcript.messages)
    actions = np.asarray(transcript.final_output)
    assert actions.min() >= 0 and actions.max() < spec.d
    # each message is exactly the loss of the arm played
    assert [m.bits[0] for m in transcript.messages] == losses[np.arange(T), actions].tolist()


def test_bandit_reproducible_with_same_stream():
    spec = BanditLossSpec(4, 0.1, 1)
    a = run_coordinate_bandit(spec, 200, rng=stream(10))
    b = run_coordinate_bandit(spec, 200, rng=stream(10))
    assert np.array_equal(a.actions, b.actions)


def test_bandit_majority_recovers_biased_arm():
    spec = BanditLossSpec(4, 0.25, 2)
    trace = run_coordinate_bandit(spec, 5000, rng=stream(11))
    assert np.mean(trace.actions == 2) > 0.5
    assert most_common_action(trace.actions) == 2


def test_trace_csv(tmp_path):
    trace = run_hedge(BanditLossSpec(3, 0.1, 0), 20, rng=stream(12))
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "action", "loss", "cum_regret_best"]
    assert len(rows) == 21
    assert float(rows[-1][3]) == pytest.approx(trace.regret_best())
