import json

import numpy as np
import pytest

from ldpc_lab.decoder import bp_decode, sample_erasures
from ldpc_lab.ensemble import EnsembleParams, sample_graph
from ldpc_lab.error_floor import expected_floor
from ldpc_lab.montecarlo import (
    ConfigError,
    ScalingError,
    ScalingRule,
    SimConfig,
    TrialBlock,
    TrialRecord,
    aggregate,
    iteration_distribution,
    min_iterations,
    phi_rows,
    run_sweep,
    scaling_experiment,
    sweep_rows,
    tail_exponent,
    trial_seeds,
)
from ldpc_lab.seeding import as_generator


def cfg(L=4, M=32, eps=(0.0, 0.4, 0.47), trials=300, **kw):
    return SimConfig(EnsembleParams(3, 2, L, M), list(eps), trials, **kw)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            cfg(trials=0)
        with pytest.raises(ConfigError):
            cfg(eps=())
        with pytest.raises(ConfigError):
            cfg(eps=(1.2,))
        with pytest.raises(ConfigError):
            cfg(delta=1.0)

    def test_json_round_trip(self, tmp_path):
        c = cfg(codes=2, seed=9, max_iters=500, stop_after_failures=10)
        path = tmp_path / "c.json"
        path.write_text(json.dumps(c.to_dict()))
        back = SimConfig.from_json(path)
        assert back.to_dict() == c.to_dict()

    def test_json_errors(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"l": 3, "k": 2, "L": 4, "M": 31, "epsilons": [0.3]}')
        with pytest.raises(ConfigError, match="divisible"):
            SimConfig.from_json(path)
        path.write_text('{"l": 3, "k": 2, "L": 4, "M": 32, "epsilons": [0.3], "colour": 1}')
        with pytest.raises(ConfigError, match="unknown"):
            SimConfig.from_json(path)
        path.write_text("not json")
        with pytest.raises(ConfigError):
            SimConfig.from_json(path)


class TestSweep:
    def test_eps_zero(self):
        s = run_sweep(cfg(eps=(0.0,), trials=50))
        p = s.points[0]
        assert p.Pb == 0.0 and p.PB == 0.0
        assert np.all(s.blocks[0][0].iterations == 0)

    def test_records_stream(self):
        s = run_sweep(cfg(trials=20))
        recs = list(s.records())
        assert len(recs) == 60
        assert all(isinstance(r, TrialRecord) for r in recs)
        assert all((r.residual == 0) == r.success for r in recs)

    def test_worker_independent(self):
        a = run_sweep(cfg(codes=2, seed=4), workers=1)
        b = run_sweep(cfg(codes=2, seed=4), workers=5)
        assert sweep_rows(a) == sweep_rows(b)
        assert phi_rows(a) == phi_rows(b)
        for x, y in zip(a.records(), b.records()):
            assert x == y

    def test_stop_after_failures_worker_independent(self):
        c = dict(eps=(0.5,), trials=2000, stop_after_failures=100)
        a = run_sweep(cfg(**c), workers=1)
        b = run_sweep(cfg(**c), workers=3)
        assert a.points[0].trials == b.points[0].trials < 2000
        assert a.points[0].failures >= 100
        assert sweep_rows(a) == sweep_rows(b)

    def test_invariants(self):
        s = run_sweep(cfg(codes=2))
        for p in s.points:
            assert p.Pb <= p.PB
            assert np.all(np.diff(p.dist.Phi) >= 0)
            assert p.dist.success_counts.sum() + p.failures == p.trials
            assert p.dist.Phi[-1] + p.PB == pytest.approx(1.0, abs=1e-12)

    def test_reordering_trials(self):
        s = run_sweep(cfg(eps=(0.47,)))
        blk = s.blocks[0][0]
        perm = np.random.default_rng(0).permutation(blk.trials)
        shuffled = TrialBlock(blk.epsilon, 0, blk.success[perm], blk.iterations[perm],
                              blk.residual[perm], blk.truncated[perm])
        a = aggregate([blk], s.params.n, 0.9, as_generator(1))
        b = aggregate([shuffled], s.params.n, 0.9, as_generator(1))
        assert (a.Pb, a.PB) == (b.Pb, b.PB)
        assert np.array_equal(a.dist.phi, b.dist.phi)

    def test_mean_over_codes(self):
        s = run_sweep(cfg(eps=(0.47,), codes=3))
        per_code = [b[0].residual.mean() / s.params.n for b in s.blocks]
        assert s.points[0].Pb == pytest.approx(np.mean(per_code), rel=1e-15)
        assert len(set(s.code_seeds)) == 3

    def test_estimator_against_stub(self):
        p_fail = 0.23

        def stub(graph, eps, seed, max_iters):
            fail = as_generator(seed).random() < p_fail
            return (not fail, 5, 7 if fail else 0, False)

        trials = 10_000
        s = run_sweep(cfg(eps=(0.3,), trials=trials), decode_fn=stub)
        sigma = np.sqrt(p_fail * (1 - p_fail) / trials)
        assert abs(s.points[0].PB - p_fail) < 3 * sigma
        assert s.points[0].PB_ci == pytest.approx(1.96 * sigma, rel=0.05)

    def test_section_recording_matches_traces(self):
        c = cfg(eps=(0.45,), trials=150, codes=2, record_sections=True, seed=3)
        s = run_sweep(c, workers=3)
        per_code = []
        for cid, cs in enumerate(s.code_seeds):
            g = sample_graph(c.params, cs)
            trs = [bp_decode(g, sample_erasures(g.n, 0.45, sd), record_sections=True)
                   for sd in trial_seeds(3, cid, 0, 150)]
            depth = max(len(t.residual_by_section) for t in trs)
            acc = np.zeros((depth, c.params.num_sections))
            for t in trs:
                r = t.residual_by_section
                acc[: len(r)] += r
                acc[len(r):] += r[-1]
            per_code.append(acc / (150 * c.params.M))
        depth = max(len(a) for a in per_code)
        expect = sum(np.vstack([a, np.repeat(a[-1:], depth - len(a), axis=0)]) for a in per_code) / 2
        got = s.points[0].sections
        assert got.shape == expect.shape
        assert np.allclose(got, expect, rtol=0, atol=1e-15)
        assert got[0].mean() == pytest.approx(0.45, abs=0.03)

    def test_section_recording_worker_independent(self):
        c = dict(eps=(0.5,), trials=1000, stop_after_failures=70, record_sections=True)
        a = run_sweep(cfg(**c), workers=1).points[0].sections
        b = run_sweep(cfg(**c), workers=6).points[0].sections
        assert np.array_equal(a, b)
        assert cfg().record_sections is False and run_sweep(cfg(trials=5)).points[0].sections is None

    @pytest.mark.slow
    def test_steeper_with_M(self):
        PB = [run_sweep(cfg(L=100, M=M, eps=(0.45,), trials=100, seed=3)).points[0].PB
              for M in (256, 512, 1024)]
        assert PB[0] > PB[1] > PB[2]

    @pytest.mark.slow
    def test_fixed_M_worse_with_L(self):
        Pb = [run_sweep(cfg(L=L, M=256, eps=(0.47,), trials=200, seed=3)).points[0].Pb
              for L in (50, 100, 200)]
        assert Pb[0] < Pb[1] < Pb[2]


class TestIterationDistribution:
    def test_all_zero(self):
        recs = [TrialRecord(0.0, 0, t, True, 0, 0) for t in range(10)]
        d = iteration_distribution(recs)
        assert d.phi.tolist() == [1.0] and d.failures == 0

    def test_records_and_failures(self):
        recs = [TrialRecord(0.4, 0, 0, True, 2, 0), TrialRecord(0.4, 0, 1, True, 3, 0),
                TrialRecord(0.4, 0, 2, False, 4, 9), TrialRecord(0.4, 0, 3, True, 3, 0)]
        d = iteration_distribution(recs)
        assert d.phi.tolist() == [0.0, 0.0, 0.25, 0.5]
        assert d.Phi[-1] == 0.75 and d.failures == 1
        assert d.mean() == pytest.approx((2 + 3 + 3) / 3)

    def test_empty(self):
        with pytest.raises(ValueError):
            iteration_distribution([])

    def test_min_iterations(self):
        Phi = np.array([0, 0, 0.1, 0.3, 0.5, 0.8, 0.95, 1.0])
        assert min_iterations(Phi, 0.99) == 7
        assert min_iterations(np.array([0.5, 0.9, 0.95]), 0.99) is None
        with pytest.raises(ValueError):
            min_iterations(Phi, 1.0)

    @pytest.mark.xfail(strict=True, reason="measured l_min ~ 52 rounds at eps=0.44: the wave "
                       "crosses L=20 in ~50 flooding rounds, in line with DE")
    def test_lmin_wave(self):
        s = run_sweep(cfg(L=20, M=1024, eps=(0.44,), trials=100, seed=1))
        assert s.points[0].ell_min >= 100

    def test_mean_grows_and_concentrates(self):
        d = {}
        for L in (5, 10, 20):
            for M in (512, 1024):
                s = run_sweep(cfg(L=L, M=M, eps=(0.465,), trials=200, seed=2))
                d[L, M] = s.points[0].dist
        for M in (512, 1024):
            means = [d[L, M].mean() for L in (5, 10, 20)]
            assert means[0] < means[1] < means[2]
        for L in (10, 20):
            assert d[L, 1024].variance() < d[L, 512].variance()

    def test_tail_exponent_synthetic(self):
        ell = np.arange(1, 400)
        phi = np.concatenate(([0.0], 3.0 * ell**-2.5))
        assert tail_exponent(phi, 20, 399) == pytest.approx(-2.5)
        assert tail_exponent(phi, 20, 200) == pytest.approx(tail_exponent(phi, 20, 399))
        with pytest.raises(ValueError):
            tail_exponent(np.zeros(10), 1, 9)


class TestScaling:
    def test_rules(self):
        assert ScalingRule("constant", L0=100)(512) == 100
        assert ScalingRule("linear", c=0.5)(128) == 64
        assert ScalingRule("polynomial", c=0.5, p=2)(128) == 4096
        rule = ScalingRule("exponential").resolve([32, 34])
        assert rule(32) == 16 and rule(34) == 64
        with pytest.raises(ScalingError):
            ScalingRule("exponential").resolve([32])(200)
        with pytest.raises(ScalingError):
            ScalingRule("cubic")
        with pytest.raises(ScalingError):
            ScalingRule("exponential")(10)

    def test_overflow_guard_before_simulating(self):
        with pytest.raises(ScalingError):
            scaling_experiment(ScalingRule("exponential"), [32, 64], [0.4], 10, 0)

    @pytest.mark.slow
    def test_linear_improves(self):
        pts = scaling_experiment(ScalingRule("linear", c=0.5), [128, 256, 512], [0.45], 100, 3)
        assert [p.L for p in pts] == [64, 128, 256]
        Pb = [p.stats.points[0].Pb for p in pts]
        assert Pb[0] > Pb[1] > Pb[2]

    @pytest.mark.slow
    def test_quadratic_floor(self):
        pts = scaling_experiment(ScalingRule("polynomial", c=0.5, p=2), [64, 128], [0.3], 20, 3)
        for p in pts:
            q = p.stats.points[0]
            assert q.bit_errors >= 100
            assert 0.5 < q.Pb / expected_floor(p.stats.params, 0.3) < 2.0
        assert pts[1].stats.points[0].Pb < pts[0].stats.points[0].Pb

    def test_exponential_worsens(self):
        pts = scaling_experiment(ScalingRule("exponential"), [32, 34, 36], [0.45], 300, 3)
        assert [p.L for p in pts] == [16, 64, 256]
        Pb = [p.stats.points[0].Pb for p in pts]
        assert Pb[0] < Pb[1] < Pb[2]
