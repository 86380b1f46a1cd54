import numpy as np
import pytest

from ldpc_lab.density_evolution import (
    EPS_MAP_3_6,
    DEState,
    ThresholdError,
    Verdict,
    bp_threshold,
    de_converges,
    de_iterate,
    reflection_permutation,
    scalar_recursion,
)
from ldpc_lab.ensemble import EnsembleParams, build_coupled_protograph, uncoupled_protograph


def coupled(L):
    return build_coupled_protograph(EnsembleParams(3, 2, L))


class TestIterate:
    def test_eps_zero_clears_state(self, backend):
        proto = coupled(5)
        st = de_iterate(proto, 0.0, DEState.ones(proto.num_edges), backend)
        assert np.all(st.x == 0.0)

    def test_eps_one_fixed_point(self, backend):
        proto = uncoupled_protograph(3, 2)
        st = DEState.ones(proto.num_edges)
        for _ in range(5):
            st = de_iterate(proto, 1.0, st, backend)
        assert np.all(st.x == 1.0)

    def test_input_not_mutated(self):
        proto = coupled(2)
        st = DEState.ones(proto.num_edges)
        de_iterate(proto, 0.4, st)
        assert np.all(st.x == 1.0)

    def test_uncoupled_matches_scalar_recursion(self, backend):
        proto = uncoupled_protograph(3, 2)
        st = DEState.ones(proto.num_edges)
        x = 1.0
        prev = st.x.copy()
        for _ in range(300):
            st = de_iterate(proto, 0.42, st, backend)
            x = scalar_recursion(0.42, 3, 6, x)
            assert np.max(np.abs(st.x - x)) < 1e-12
            assert np.all(st.x <= prev)
            prev = st.x
        assert x < 1e-6  # 0.42 is below the uncoupled threshold

    @pytest.mark.parametrize("eps", [0.3, 0.45, 0.5, 0.7])
    def test_monotone_in_iteration(self, eps, backend):
        proto = coupled(8)
        st = DEState.ones(proto.num_edges)
        for _ in range(200):
            nxt = de_iterate(proto, eps, st, backend)
            assert np.all(nxt.x <= st.x + 1e-15)
            assert np.all((nxt.x >= 0) & (nxt.x <= 1))
            st = nxt

    @pytest.mark.parametrize("eps", [0.45, 0.49, 0.55])
    def test_reflection_symmetry(self, eps, backend):
        params = EnsembleParams(3, 2, 7)
        proto = build_coupled_protograph(params)
        perm = reflection_permutation(params)
        # the permutation maps edges onto their mirror images
        assert np.array_equal(proto.var_position[proto.edge_var[perm]], -proto.var_position[proto.edge_var])
        assert np.array_equal(proto.check_position[proto.edge_check[perm]],
                              -proto.check_position[proto.edge_check])
        st = DEState.ones(proto.num_edges)
        for _ in range(150):
            st = de_iterate(proto, eps, st, backend)
            assert np.max(np.abs(st.x - st.x[perm])) < 1e-12
            assert np.max(np.abs(st.y - st.y[perm])) < 1e-12


class TestConverges:
    def test_below_uncoupled_threshold(self, backend):
        assert de_converges(coupled(20), 0.40, backend=backend).verdict is Verdict.DECODES

    def test_above_map_threshold(self, backend):
        out = de_converges(coupled(20), 0.49, backend=backend)
        assert out.verdict is Verdict.STUCK
        assert out.max_erasure > 0.1
        assert 0.49 > EPS_MAP_3_6

    def test_eps_zero_one_iteration(self, backend):
        out = de_converges(coupled(3), 0.0, backend=backend)
        assert out.verdict is Verdict.DECODES and out.iterations == 1

    def test_undecided_when_capped(self, backend):
        out = de_converges(coupled(20), 0.47, max_iters=5, backend=backend)
        assert out.verdict is Verdict.UNDECIDED and out.iterations == 5

    def test_bad_args(self):
        with pytest.raises(ValueError):
            de_converges(coupled(2), 1.5)
        with pytest.raises(ValueError):
            de_converges(coupled(2), 0.3, tol=0)

    def test_monotone_in_eps(self):
        proto = coupled(10)
        grid = np.linspace(0.3, 0.6, 31)
        ok = [de_converges(proto, e).verdict is Verdict.DECODES for e in grid]
        # decodable set is a prefix of the grid
        assert ok == sorted(ok, reverse=True)
        assert ok[0] and not ok[-1]


class TestThreshold:
    def test_uncoupled(self, backend):
        res = bp_threshold((3, 6), backend=backend)
        assert abs(res.epsilon_bp - 0.4294) <= 0.001
        lo, hi = res.bracket
        assert hi - lo <= res.tol
        assert de_converges(uncoupled_protograph(3, 2), lo).verdict is Verdict.DECODES
        assert de_converges(uncoupled_protograph(3, 2), hi).verdict is Verdict.STUCK

    def test_even_l_rejected(self):
        with pytest.raises(ValueError):
            bp_threshold((2, 4))

    def test_coupled_L100_anchor(self):
        res = bp_threshold(EnsembleParams(3, 2, 100))
        assert 0.48 <= res.epsilon_bp <= 0.50
        # regression anchor computed by this operation at tol 1e-4
        assert res.epsilon_bp == pytest.approx(0.48813, abs=2e-4)
        assert res.to_json()["L"] == 100

    def test_saturation_ordering(self):
        unc = bp_threshold((3, 6), tol_bisect=1e-3).epsilon_bp
        vals = [bp_threshold(EnsembleParams(3, 2, L), tol_bisect=1e-3).epsilon_bp for L in (1, 5, 20, 100)]
        assert all(v >= unc for v in vals)
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_undecided_probe_fails_loudly(self):
        with pytest.raises(ThresholdError):
            bp_threshold(EnsembleParams(3, 2, 20), max_iters=2, max_retries=0)

    def test_json_shape(self):
        out = bp_threshold((3, 6), tol_bisect=1e-2).to_json()
        assert set(out) == {"l", "k", "L", "epsilon_bp", "bracket", "tol"}
        assert out["L"] is None and len(out["bracket"]) == 2
