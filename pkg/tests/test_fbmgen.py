import io

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import linalg, stats

from fwnoise import fbmgen as fg
from fwnoise import frackernel as fk
from fwnoise.errors import ConfigurationError, DomainError
from fwnoise.fbmgen import Method, TimeGrid

from conftest import mean_se, within_se

GRID = TimeGrid(1.0, 65)
GENERATORS = [fg.generate_cholesky, fg.generate_circulant]


# -- grid and covariance --------------------------------------------------------

def test_time_grid():
    g = TimeGrid(2.0, 9)
    assert g.dt == 0.25 and g.cells == 8
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 2.0
    assert np.all(np.diff(g.nodes) > 0)
    assert g.index_of(0.5) == 2
    with pytest.raises(DomainError):
        g.index_of(0.3)
    with pytest.raises(ConfigurationError):
        TimeGrid(1.0, 10)
    with pytest.raises(DomainError):
        TimeGrid(-1.0, 9)


def test_fgn_covariance_examples(model):
    g = TimeGrid(4.0, 5)  # dt = 1
    assert fg.fgn_covariance(model, g, 0) == pytest.approx(2 * model.c_h)
    assert fg.fgn_covariance(model, g, 1) == pytest.approx(model.c_h * (2 ** 1.5 - 2))
    assert fg.fgn_covariance(model, g, 1) == pytest.approx(0.12366, abs=1e-5)
    with pytest.raises(DomainError):
        fg.fgn_covariance(model, g, 4)
    with pytest.raises(DomainError):
        fg.fgn_covariance(model, g, -1)


def test_fgn_covariance_long_memory(any_model):
    g = TimeGrid(4096.0, 4097)
    k = np.arange(1, 65)
    assert np.all(fg.fgn_covariance(any_model, g, k) > 0)
    H = any_model.H
    far = 2000
    ratio = fg.fgn_covariance(any_model, g, far) / (2 * H * (2 * H - 1) * any_model.c_h
                                                   * far ** (2 * H - 2))
    assert ratio == pytest.approx(1.0, abs=1e-3)


@given(H=st.floats(0.55, 0.95), k=st.integers(1, 64))
def test_increment_covariance_sums_to_variance(H, k):
    m = fk.HurstModel(H)
    col = fg.fgn_covariance(m, GRID, np.arange(GRID.cells))
    cov = linalg.toeplitz(col)[:k, :k]
    assert cov.sum() == pytest.approx(m.variance(GRID.nodes[k]), rel=1e-10)


@pytest.mark.parametrize("cells", [2 ** 8, 2 ** 10, 2 ** 12])
def test_circulant_eigenvalues_nonnegative(any_model, cells):
    lam = fg.circulant_eigenvalues(any_model, TimeGrid(1.0, cells + 1))
    assert lam.min() >= 0.0


def test_cholesky_factor_reproduces_covariance(model):
    L = fg._cholesky_factor(model.H, GRID.T, GRID.n)
    col = fg.fgn_covariance(model, GRID, np.arange(GRID.cells))
    assert np.allclose(L @ L.T, linalg.toeplitz(col), atol=1e-15)


def test_cholesky_size_limit(model):
    with pytest.raises(ConfigurationError):
        fg.generate_cholesky(model, TimeGrid(1.0, 2 ** 12 + 1), 1, 0)


def test_method_parse():
    assert Method.parse("circulant") is Method.CIRCULANT
    assert Method.parse("M_SYNTHESIS") is Method.M_SYNTHESIS
    assert Method.parse(Method.CIRCULANT) is Method.CIRCULANT
    with pytest.raises(ConfigurationError):
        Method.parse("fourier")


# -- ensemble structure ------------------------------------------------------------

@pytest.mark.parametrize("method", list(Method))
def test_ensemble_structure(model, method):
    e = fg.generate(method, model, GRID, 7, 3, path_offset=5)
    assert e.paths_bh.shape == (7, GRID.n)
    assert np.all(e.paths_bh[:, 0] == 0.0)
    assert e.path_offset == 5 and e.method is method
    if method is Method.M_SYNTHESIS:
        assert e.coupled and e.paths_b is not None and np.all(e.paths_b[:, 0] == 0.0)
    else:
        assert not e.coupled and e.paths_b is None
        with pytest.raises(ConfigurationError):
            e.require_coupled()
        with pytest.raises(ConfigurationError):
            e.increments_b


def test_independent_b_flagged_uncoupled(model):
    e = fg.generate_circulant(model, GRID, 4, 1, include_b=True)
    assert e.paths_b.shape == (4, GRID.n) and not e.coupled


@pytest.mark.parametrize("method", list(Method))
def test_unit_variance_mode(model, method):
    a = fg.generate(method, model, GRID, 5, 11)
    b = fg.generate(method, model, GRID, 5, 11, unit_variance=True)
    assert np.allclose(b.paths_bh, a.paths_bh / np.sqrt(2 * model.c_h), rtol=1e-14)
    assert b.variance_scale == pytest.approx(1 / (2 * model.c_h))


@pytest.mark.parametrize("method", list(Method))
def test_chunking_is_invisible(model, method):
    whole = fg.generate(method, model, GRID, 10, 99)
    parts = [fg.generate(method, model, GRID, c, 99, path_offset=s)
             for s, c in ((0, 3), (3, 4), (7, 3))]
    joined = np.vstack([p.paths_bh for p in parts])
    if method is Method.M_SYNTHESIS:
        # the weight product goes through gemm, whose blocking depends on the row count
        assert np.allclose(whole.paths_bh, joined, rtol=0, atol=1e-14)
        assert np.array_equal(whole.paths_b, np.vstack([p.paths_b for p in parts]))
    else:
        assert np.array_equal(whole.paths_bh, joined)


def test_map_ensembles_thread_independent(model):
    run = lambda threads: fg.map_ensembles(lambda e: e.paths_bh.sum(axis=0), "m_synthesis",
                                           model, GRID, 50, 4, chunk=16, threads=threads)
    one, three = run(1), run(3)
    assert all(np.array_equal(a, b) for a, b in zip(one, three))


# -- laws -------------------------------------------------------------------------------

@pytest.fixture(scope="module", params=GENERATORS, ids=["cholesky", "circulant"])
def exact_paths(request):
    m = fk.HurstModel(0.75)
    return m, request.param(m, GRID, 40_000, 2026).paths_bh


def test_exact_generator_moments(exact_paths):
    m, x = exact_paths
    x1 = x[:, -1]
    assert within_se(*mean_se(x1), 0.0)
    assert within_se(*mean_se(x1 ** 2), 2 * m.c_h)
    assert within_se(*mean_se(x1 ** 4), 12 * m.c_h ** 2)
    half = GRID.index_of(0.5)
    assert within_se(*mean_se(x[:, half] * x1), m.c_h)


def test_stationary_increments(exact_paths):
    m, x = exact_paths
    lag = GRID.index_of(0.5)
    for s in (0.0, 0.25, 0.5):
        k = GRID.index_of(s)
        d = x[:, k + lag] - x[:, k]
        assert within_se(*mean_se(d ** 2), m.variance(0.5))


def test_self_similarity(exact_paths):
    m, x = exact_paths
    var = lambda t: mean_se(x[:, GRID.index_of(t)] ** 2)
    v_half, se_half = var(0.5)
    for a, t in ((0.5, 0.5), (2.0, 0.5)):
        v, se = var(a * t)
        scaled = a ** (2 * m.H) * v_half
        assert abs(v - scaled) <= 4 * np.hypot(se, a ** (2 * m.H) * se_half)


def test_gaussianity(exact_paths):
    m, x = exact_paths
    z = x[:10_000, -1] / np.sqrt(2 * m.c_h)
    assert stats.normaltest(z).pvalue > 0.01


def test_generators_agree_in_law(model):
    a = fg.generate_cholesky(model, GRID, 10_000, 1)
    b = fg.generate_circulant(model, GRID, 10_000, 2)
    crit = 1.628 * np.sqrt(2 / 10_000)
    for q in (16, 32, 48, 64):
        assert stats.ks_2samp(a.paths_bh[:, q], b.paths_bh[:, q]).statistic < crit


# -- white-noise synthesis ------------------------------------------------------------------

def test_spatial_grid_layout():
    g = TimeGrid(1.0, 1025)
    sp = fg.SpatialGrid.default(g)
    assert np.allclose(sp.edges[sp.inner_slice.start: sp.inner_slice.stop + 1], g.nodes)
    assert sp.edges[0] == pytest.approx(-20.0) and sp.edges[-1] == pytest.approx(21.0)
    assert np.all(sp.widths > 0)
    assert sp.n_noise == sp.n_cells + 2


def test_synthesis_variance_is_nearly_exact(any_model):
    g = TimeGrid(1.0, 1025)
    W = fg.m_synthesis_weights(any_model, fg.SpatialGrid.default(g))
    var = (W ** 2).sum(axis=1)
    assert var[0] == 0.0
    target = any_model.variance(g.nodes[1:])
    assert np.max(np.abs(var[1:] / target - 1)) < 0.02
    assert abs(var[-1] / target[-1] - 1) < 1e-4


def test_synthesis_cross_covariance_exact(model):
    g = TimeGrid(1.0, 257)
    sp = fg.SpatialGrid.default(g)
    W = fg.m_synthesis_weights(model, sp)
    inner = W[:, sp.inner_slice] * np.sqrt(g.dt)
    u, t = g.index_of(0.5), g.index_of(1.0)
    cov = inner[t, :u].sum()
    assert cov == pytest.approx(fg.cross_covariance(model, 0.5, 1.0), rel=1e-10)


def test_synthesis_monte_carlo(model):
    g = TimeGrid(1.0, 257)
    e = fg.generate_via_m(model, g, 40_000, 8)
    assert np.all(e.paths_bh[:, 0] == 0.0)
    x1 = e.paths_bh[:, -1]
    assert within_se(*mean_se(x1 ** 2), 2 * model.c_h)
    b_half = e.paths_b[:, g.index_of(0.5)]
    assert within_se(*mean_se(b_half * x1), fg.cross_covariance(model, 0.5, 1.0))
    assert within_se(*mean_se(b_half ** 2), 0.5)


def test_cross_covariance_values(model):
    assert fg.cross_covariance(model, 0.0, 1.0) == 0.0
    assert fg.cross_covariance(model, 1.0, 1.0) == pytest.approx(
        fk.m_indicator_integral(model, 1.0, 0.0, 1.0), rel=1e-10)
    us = np.linspace(0.05, 1.0, 12)
    vals = [fg.cross_covariance(model, u, 1.0) for u in us]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(DomainError):
        fg.cross_covariance(model, -0.1, 1.0)


def test_spatial_grid_mismatch(model):
    sp = fg.SpatialGrid.default(TimeGrid(1.0, 33))
    with pytest.raises(ConfigurationError):
        fg.generate_via_m(model, TimeGrid(1.0, 65), 2, 0, spatial_grid=sp)


# -- export ------------------------------------------------------------------------------

def test_csv_export(model):
    e = fg.generate_via_m(model, TimeGrid(1.0, 5), 2, 1, path_offset=3)
    buf = io.StringIO()
    e.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "path,node,t,b,bh"
    assert len(lines) == 1 + 2 * 5
    path, node, t, b, bh = lines[7].split(",")
    assert (int(path), int(node), float(t)) == (4, 1, 0.25)
    assert float(bh) == e.paths_bh[1, 1] and float(b) == e.paths_b[1, 1]


def test_binary_round_trip(model):
    e = fg.generate_circulant(model, TimeGrid(2.0, 9), 3, 2 ** 63 + 5)
    data = e.to_bytes()
    assert data[:4] == b"FWN1"
    assert len(data) == 32 + 2 * 8 * 3 * 9
    back = fg.read_binary(data)
    assert back["n"] == 9 and back["n_paths"] == 3 and back["seed"] == 2 ** 63 + 5
    assert back["method"] is Method.CIRCULANT and back["T"] == 2.0
    assert back["H"] == pytest.approx(0.75)
    assert np.array_equal(back["bh"], e.paths_bh) and np.all(back["b"] == 0.0)
    with pytest.raises(ConfigurationError):
        fg.read_binary(b"XXXX" + data[4:])
    with pytest.raises(ConfigurationError):
        fg.read_binary(data[:-8])
