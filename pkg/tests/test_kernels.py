"""Compiled and numpy kernels must agree exactly."""
import numpy as np
import pytest

from ldpc_lab import _pykernels, kernels
from ldpc_lab.density_evolution import DEState
from ldpc_lab.ensemble import EnsembleParams, build_coupled_protograph, sample_graph

pytestmark = pytest.mark.skipif("cython" not in kernels.available(), reason="C kernels not built")


@pytest.mark.parametrize("eps", [0.0, 0.3, 0.44, 0.5, 0.7, 1.0])
def test_bp_flood_identical(eps):
    C = kernels.get("cython")
    g = sample_graph(EnsembleParams(3, 2, 8, 128), 4)
    rng = np.random.default_rng(int(eps * 100))
    for _ in range(5):
        erased = (rng.random(g.n) < eps).astype(np.uint8)
        a = C.bp_flood(g.var_checks, g.num_checks, erased, 10**9)
        b = _pykernels.bp_flood(g.var_checks, g.num_checks, erased, 10**9)
        assert np.array_equal(a[0], b[0]) and a[1:] == b[1:]


def test_bp_flood_truncation_identical():
    C = kernels.get("cython")
    g = sample_graph(EnsembleParams(3, 2, 10, 64), 2)
    erased = (np.random.default_rng(0).random(g.n) < 0.45).astype(np.uint8)
    for cap in (0, 1, 3, 10):
        a = C.bp_flood(g.var_checks, g.num_checks, erased, cap)
        b = _pykernels.bp_flood(g.var_checks, g.num_checks, erased, cap)
        assert np.array_equal(a[0], b[0]) and a[1:] == b[1:]
        assert a[2] and a[1] == cap


@pytest.mark.parametrize("L", [1, 4, 20])
def test_de_step_identical(L):
    C = kernels.get("cython")
    proto = build_coupled_protograph(EnsembleParams(3, 2, L))
    ve, ce = proto.var_edge_table(), proto.check_edge_table()
    s1, s2 = DEState.ones(proto.num_edges), DEState.ones(proto.num_edges)
    for _ in range(40):
        r1 = C.de_step(ve, ce, 0.47, s1.x, s1.y)
        r2 = _pykernels.de_step(ve, ce, 0.47, s2.x, s2.y)
        np.testing.assert_allclose(s1.x, s2.x, rtol=0, atol=1e-15)
        np.testing.assert_allclose(s1.y, s2.y, rtol=0, atol=1e-15)
        assert r1 == pytest.approx(r2, abs=1e-15)


def test_de_run_identical():
    C = kernels.get("cython")
    proto = build_coupled_protograph(EnsembleParams(3, 2, 6))
    ve, ce = proto.var_edge_table(), proto.check_edge_table()
    for eps in (0.45, 0.52, 0.6):
        s1, s2 = DEState.ones(proto.num_edges), DEState.ones(proto.num_edges)
        a = C.de_run(ve, ce, eps, s1.x, s1.y, 1e-10, 1e-12, 5000)
        b = _pykernels.de_run(ve, ce, eps, s2.x, s2.y, 1e-10, 1e-12, 5000)
        assert a[0] == b[0] and a[3] == b[3]
