import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fwnoise import frackernel as fk
from fwnoise.errors import AccuracyError, ConfigurationError, DomainError

HURSTS = (0.6, 0.75, 0.9)
GAUSS = lambda x: np.exp(-np.asarray(x, dtype=float) ** 2)
GAUSS1 = lambda x: np.exp(-(np.asarray(x, dtype=float) - 1.0) ** 2)
SUPPORT0, SUPPORT1 = (-12.0, 12.0), (-11.0, 13.0)


def mp_c_h(H):
    mp.mp.dps = 40
    a = mp.mpf(H) - mp.mpf(1) / 2
    return 1 / (2 * mp.gamma(a) * mp.cos(mp.pi / 2 * a))


def mp_k_h(H):
    c = mp_c_h(H)
    H = mp.mpf(H)
    return 4 * c ** 2 * (mp.pi * mp.power(5, 2 * H - 1) / (2 * H - 1) + 2 / (1 - H))


def shape_energy_closed(H):
    """Plancherel evaluation of the squared norm of the unit-time indicator shape."""
    mp.mp.dps = 40
    a = mp.mpf(H) - mp.mpf(1) / 2
    return float(4 * mp.gamma(a + 1) ** 2 * mp.cos(mp.pi * a / 2) ** 2
                 / (mp.gamma(2 * H + 1) * mp.sin(mp.pi * H)))


# -- constants -------------------------------------------------------------------

@pytest.mark.parametrize("H", HURSTS)
def test_c_h_matches_arbitrary_precision(H):
    assert fk.c_h(H) == pytest.approx(float(mp_c_h(H)), rel=1e-13)


@pytest.mark.parametrize("H", HURSTS)
def test_k_h_matches_arbitrary_precision(H):
    assert fk.k_h(H) == pytest.approx(float(mp_k_h(H)), rel=1e-13)


def test_frozen_constants():
    # values from the arbitrary-precision evaluation above
    assert fk.c_h(0.75) == pytest.approx(0.14927036108294767, rel=1e-14)
    assert fk.k_h(0.75) == pytest.approx(1.9652076847778577, rel=1e-14)


def test_constant_orderings():
    assert fk.c_h(0.5001) < fk.c_h(0.6)
    assert fk.k_h(0.75) > 2 * fk.c_h(0.75)
    assert all(fk.k_h(H) > 0 for H in np.linspace(0.51, 0.99, 25))


@pytest.mark.parametrize("H", [0.5, 1.0, 0.3, float("nan"), float("inf")])
def test_hurst_domain(H):
    with pytest.raises(DomainError):
        fk.HurstModel(H)


# -- calibration ---------------------------------------------------------------

@pytest.mark.parametrize("H", HURSTS)
def test_shape_energy_closed_form(H):
    assert fk.shape_energy(H, 1.0) == pytest.approx(shape_energy_closed(H), rel=1e-12)


@given(H=st.floats(0.55, 0.95), t=st.floats(0.05, 20.0))
def test_shape_energy_scaling(H, t):
    assert fk.shape_energy(H, t) == pytest.approx(t ** (2 * H) * fk.shape_energy(H, 1.0),
                                                  rel=1e-9)


@pytest.mark.parametrize("H", HURSTS)
def test_calibration_gate(H):
    cal = fk.calibrate_prefactor(H)
    assert cal.max_rel_err <= fk.CALIBRATION_TOL
    model = fk.HurstModel(H)
    assert model.m_prefactor == cal.prefactor
    assert model.prefactor_source == cal.chosen
    for t in fk.CALIBRATION_TIMES:
        energy = model.m_prefactor ** 2 * shape_energy_closed(H) * t ** (2 * H)
        assert energy == pytest.approx(2 * model.c_h * t ** (2 * H), rel=fk.CALIBRATION_TOL)


@pytest.mark.parametrize("H", HURSTS)
def test_closed_form_prefactors_miss_the_gate(H):
    cal = fk.calibrate_prefactor(H)
    assert cal.chosen == "least_squares"
    assert cal.candidates["printed"][1] > fk.CALIBRATION_TOL
    assert cal.candidates["derived"][1] > fk.CALIBRATION_TOL


def test_second_kernel_constant(any_model):
    H = any_model.H
    assert any_model.kernel2_const == pytest.approx(2 * H * (2 * H - 1) * any_model.c_h,
                                                    rel=1e-12)


def _quad_line(f, points):
    from scipy import integrate
    edges = sorted(set([-np.inf, np.inf] + list(points) + [-50.0, 50.0]))
    total = err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(f, lo, hi, limit=400, epsabs=1e-11, epsrel=1e-9)
        total += v
        err += e
    return total, err


# -- closed form of M_t ----------------------------------------------------------------

def test_m_indicator_examples(model):
    assert fk.m_indicator(model, 0.0, np.linspace(-3, 3, 13)) == pytest.approx(0.0, abs=0)
    assert fk.m_indicator(model, 1.0, 0.5) == pytest.approx(
        2 * model.m_prefactor * 0.5 ** 0.25, rel=1e-15)
    assert 2 * 0.5 ** 0.25 == pytest.approx(1.68179, abs=1e-5)


def test_m_indicator_rejects_negative_time(model):
    with pytest.raises(DomainError):
        fk.m_indicator(model, -1.0, 0.0)


@given(j=st.integers(0, 320), k=st.integers(-640, 640))
def test_m_indicator_symmetry(j, k):
    # dyadic points keep t - x exact
    t, x = j / 64, k / 64
    m = fk.HurstModel(0.75)
    assert fk.m_indicator(m, t, x) == pytest.approx(fk.m_indicator(m, t, t - x),
                                                    rel=1e-14, abs=1e-15)


@given(t=st.floats(0.01, 5.0), x=st.floats(-10.0, 10.0), c=st.floats(0.1, 10.0))
def test_m_indicator_self_similar(t, x, c):
    m = fk.HurstModel(0.6)
    assert fk.m_indicator(m, c * t, c * x) == pytest.approx(
        c ** m.alpha * fk.m_indicator(m, t, x), rel=1e-9, abs=1e-12)


def test_m_indicator_integral(model):
    from scipy import integrate
    v, _ = integrate.quad(lambda x: fk.m_indicator(model, 1.0, x), -2.0, 0.7, points=[0.0])
    assert fk.m_indicator_integral(model, 1.0, -2.0, 0.7) == pytest.approx(v, rel=1e-10)


def test_tail_energy(model):
    v, _ = _quad_line(lambda x: fk.m_indicator(model, 1.0, x) ** 2 if x > 3.0 else 0.0, [3.0])
    assert float(fk.tail_energy(model, 1.0, 3.0)[0]) == pytest.approx(v, rel=1e-8)
    vec = fk.tail_energy(model, 1.0, np.array([3.0, 4.0]))
    assert vec.shape == (2,) and vec[1] < vec[0]
    with pytest.raises(DomainError):
        fk.tail_energy(model, 1.0, 0.5)


# -- M by quadrature --------------------------------------------------------------------

def test_quadrature_of_zero(model):
    assert fk.apply_m_quadrature(model, lambda x: 0.0 * x, 0.3) == 0.0
    zero = fk.GridFunction(np.linspace(-1, 1, 5), np.zeros(5))
    assert fk.apply_m_quadrature(model, zero, [0.0, 0.5]) == pytest.approx([0.0, 0.0])


def test_quadrature_reproduces_indicator(model):
    target = fk.m_indicator(model, 1.0, 0.5)
    step = fk.GridFunction.indicator(0.0, 1.0)
    assert fk.apply_m_quadrature(model, step, 0.5) == pytest.approx(target, abs=1e-12)
    chi = lambda x: float(0.0 <= x <= 1.0)
    assert fk.apply_m_quadrature(model, chi, 0.5, support=(0.0, 1.0), tol=1e-10) == \
        pytest.approx(target, abs=1e-8)


def test_quadrature_needs_finite_support(model):
    with pytest.raises(ConfigurationError):
        fk.apply_m_quadrature(model, GAUSS, 0.0, support=(-np.inf, np.inf))


def test_quadrature_reports_unreachable_tolerance(model):
    with pytest.raises(AccuracyError) as info:
        fk.apply_m_quadrature(model, lambda x: np.sin(50 * x) ** 2, 0.0, support=(-5, 5),
                              tol=1e-30)
    assert info.value.estimate is not None and info.value.error > 0


@pytest.mark.parametrize("H", HURSTS)
def test_adjointness(H):
    m = fk.HurstModel(H)
    m_psi = lambda x: fk.apply_m_quadrature(m, GAUSS1, x, support=SUPPORT1)
    m_phi = lambda x: fk.apply_m_quadrature(m, GAUSS, x, support=SUPPORT0)
    left = fk.l2_pairing(GAUSS, m_psi, *SUPPORT0)
    right = fk.l2_pairing(m_phi, GAUSS1, *SUPPORT1)
    assert left == pytest.approx(right, abs=1e-6)


@pytest.mark.parametrize("H", HURSTS)
def test_m_squared_double_kernel(H):
    m = fk.HurstModel(H)
    xs = np.array([-1.0, 0.0, 0.3, 2.0])
    single = fk.m_squared_kernel(m, GAUSS, xs, support=SUPPORT0)
    nested = fk.m_squared_quadrature(m, GAUSS, xs, support=SUPPORT0)
    assert single == pytest.approx(nested, abs=1e-6)


@pytest.mark.parametrize("H", HURSTS)
def test_extended_equality(H):
    m = fk.HurstModel(H)
    mm = fk.l2_pairing(lambda x: fk.apply_m_quadrature(m, GAUSS, x, support=SUPPORT0),
                       lambda x: fk.apply_m_quadrature(m, GAUSS1, x, support=SUPPORT1))
    phi_m2psi = fk.l2_pairing(GAUSS, lambda x: fk.m_squared_kernel(m, GAUSS1, x,
                                                                    support=SUPPORT1), *SUPPORT0)
    psi_m2phi = fk.l2_pairing(GAUSS1, lambda x: fk.m_squared_kernel(m, GAUSS, x,
                                                                     support=SUPPORT0), *SUPPORT1)
    assert phi_m2psi == pytest.approx(mm, abs=1e-6)
    assert psi_m2phi == pytest.approx(mm, abs=1e-6)


def test_m_squared_of_indicator_at_endpoint(model):
    # derivative of 2 c_h t^(2H) at t = 1, halved
    step = fk.GridFunction.indicator(0.0, 1.0)
    value = fk.m_squared_kernel(model, step, 1.0)
    assert value == pytest.approx(2 * 0.75 * model.c_h, rel=1e-10)
    assert value == pytest.approx(0.22390, abs=1e-5)


# -- M by FFT -----------------------------------------------------------------------------------

def _gauss_grid(n=4096, reach=20.0):
    return fk.GridFunction.symmetric(GAUSS, reach, n)


@pytest.mark.parametrize("H", HURSTS)
def test_fft_matches_quadrature(H):
    m = fk.HurstModel(H)
    f = _gauss_grid()
    out = fk.apply_m_fft(m, f)
    xs = f.nodes[::97]
    ref = fk.apply_m_quadrature(m, GAUSS, xs, support=SUPPORT0)
    assert np.max(np.abs(out.values[::97] - ref)) < fk.FFT_TOL


@pytest.mark.parametrize("H", HURSTS)
def test_fft_m_squared_matches_kernel(H):
    m = fk.HurstModel(H)
    f = _gauss_grid()
    out = fk.apply_m_squared(m, f)
    idx = np.arange(0, 4096, 211)
    ref = fk.m_squared_kernel(m, GAUSS, f.nodes[idx], support=SUPPORT0)
    assert np.max(np.abs(out.values[idx] - ref)) < 1e-6


@pytest.mark.parametrize("H", HURSTS)
def test_bare_symbol_composition(H):
    m = fk.HurstModel(H)
    f = _gauss_grid()
    twice = fk.apply_m_fft(m, fk.apply_m_fft(m, f, dc="zero"), dc="zero")
    once = fk.apply_m_squared(m, f, dc="zero")
    assert np.max(np.abs(twice.values - once.values)) < 1e-13


def test_fft_of_zero(model):
    f = fk.GridFunction.symmetric(lambda x: 0.0 * x, 5.0, 256)
    assert np.all(fk.apply_m_fft(model, f).values == 0.0)
    assert np.all(fk.apply_m_squared(model, f).values == 0.0)


@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_fft_linearity(a, b):
    m = fk.HurstModel(0.75)
    f = fk.GridFunction.symmetric(GAUSS, 10.0, 512)
    g = fk.GridFunction.symmetric(lambda x: x * np.exp(-x ** 2), 10.0, 512)
    combo = fk.GridFunction(f.nodes, a * f.values + b * g.values)
    lhs = fk.apply_m_fft(m, combo).values
    rhs = a * fk.apply_m_fft(m, f).values + b * fk.apply_m_fft(m, g).values
    assert np.allclose(lhs, rhs, atol=1e-13 * (1 + abs(a) + abs(b)))


def test_fft_grid_checks(model):
    with pytest.raises(ConfigurationError):
        fk.apply_m_fft(model, fk.GridFunction.symmetric(GAUSS, 5.0, 300))
    with pytest.raises(ConfigurationError):
        fk.apply_m_fft(model, fk.GridFunction(np.cumsum(np.arange(1, 9.0)), np.zeros(8)))
    with pytest.raises(ConfigurationError):
        fk.apply_m_fft(model, GAUSS)
    with pytest.raises(ConfigurationError):
        fk.apply_m_fft(model, _gauss_grid(256), dc="other")


# -- H inner product ------------------------------------------------------------------------------

@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_inner_product_of_indicators(any_model, t):
    step = fk.GridFunction.indicator(0.0, t)
    target = 2 * any_model.c_h * t ** (2 * any_model.H)
    assert fk.inner_product_h_kernel(any_model, step, step) == pytest.approx(target, rel=1e-6)
    assert fk.inner_product_h(any_model, step, step) == pytest.approx(target, rel=1e-4)


def test_inner_product_basic(model):
    f = fk.GridFunction.indicator(0.0, 1.0, n=9)
    g = fk.GridFunction(np.linspace(0, 0.5, 9), np.r_[np.linspace(1, 2, 8), 0.0], "step")
    zero = fk.GridFunction(np.linspace(0, 1, 3), np.zeros(3), "step")
    assert fk.inner_product_h(model, zero, f) == 0.0
    assert fk.inner_product_h(model, f, g) == fk.inner_product_h(model, g, f)
    assert fk.inner_product_h_kernel(model, f, g) == pytest.approx(
        fk.inner_product_h(model, f, g), rel=1e-4)


def test_inner_product_window_pair(model):
    # (chi_[0,1], chi_[0,1/2])_H equals c_h for every H
    f = fk.GridFunction.indicator(0.0, 1.0)
    g = fk.GridFunction.indicator(0.0, 0.5)
    assert fk.inner_product_h_kernel(model, f, g) == pytest.approx(model.c_h, rel=1e-10)


# -- GridFunction -----------------------------------------------------------------------------------

def test_grid_function_csv_round_trip(tmp_path):
    f = fk.GridFunction.symmetric(np.sin, 3.0, 16)
    path = tmp_path / "f.csv"
    f.to_csv(path)
    assert path.read_text().splitlines()[0] == "node,value"
    g = fk.GridFunction.from_csv(path)
    assert np.array_equal(f.nodes, g.nodes) and np.array_equal(f.values, g.values)


def test_grid_function_validation():
    with pytest.raises(ConfigurationError):
        fk.GridFunction([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ConfigurationError):
        fk.GridFunction([0.0, 1.0], [1.0])
    with pytest.raises(ConfigurationError):
        fk.GridFunction([0.0, 1.0], [1.0, 1.0], kind="cubic")


def test_grid_function_evaluation():
    step = fk.GridFunction.indicator(0.0, 1.0)
    assert list(step(np.array([-0.1, 0.0, 0.5, 1.0]))) == [0.0, 1.0, 1.0, 0.0]
    assert step.integral() == 1.0
    lin = fk.GridFunction([0.0, 2.0], [0.0, 2.0])
    assert lin(1.0) == 1.0 and lin(3.0) == 0.0 and lin.integral() == 2.0
