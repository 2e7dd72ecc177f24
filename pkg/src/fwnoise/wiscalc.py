"""Wick-Ito-Skorohod integrals against fractional Brownian motion.

Two discretizations:

* :func:`wiener_integral` for deterministic integrands realizes
  ``int phi dB^H = int M(phi chi_[0,t]) dB`` on the white noise behind an
  ``m_synthesis`` ensemble.
* :func:`wick_riemann_integral` forms left-point sums
  ``sum_i phi(t_i) Delta B^H_i - kappa_i`` where ``kappa_i`` is the covariance
  of the two factors, which turns the ordinary product into the Wick product
  for jointly Gaussian factors.

Second moments come from :func:`expected_square`, and :func:`bound_check`
compares them with ``k_h E[int_0^t phi^2] t^(2H-1)``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from . import frackernel as fk
from .errors import ConfigurationError, ContractError
from .fbmgen import DriverEnsemble, SpatialGrid, TimeGrid

DETERMINISTIC = "deterministic"
FIRST_CHAOS = "first_chaos"
PATHWISE = "pathwise_adapted"
_QTOL = 1e-10


def _as_vector_func(func):
    def wrapped(t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(np.asarray(func(t), dtype=float), t.shape).copy()
    return wrapped


@dataclass(frozen=True, eq=False)
class Integrand:
    """An integrand ``phi(t, omega)`` on a time grid.

    Use the constructors :meth:`deterministic`, :meth:`first_chaos` and
    :meth:`pathwise`.  A first-chaos integrand is
    ``phi(s) = int_0^s h(u) dB(u)``, realized on a grid as
    ``phi(t_i) = sum_{j<i} h(t_j) Delta B_j``.
    """

    kind: str
    func: Optional[Callable] = None
    chaos_kernel: Optional[Callable] = None
    sampler: Optional[Callable] = field(default=None, repr=False)
    label: str = ""
    breaks: tuple = ()

    @classmethod
    def deterministic(cls, func, label="", breaks=()):
        """``breaks`` lists points where ``func`` jumps or kinks; quadratures split there."""
        return cls(DETERMINISTIC, func=_as_vector_func(func), label=label,
                   breaks=tuple(float(b) for b in breaks))

    @classmethod
    def first_chaos(cls, kernel, label=""):
        return cls(FIRST_CHAOS, chaos_kernel=_as_vector_func(kernel), label=label)

    @classmethod
    def pathwise(cls, sampler, label=""):
        """``sampler(driver)`` must return an ``(n_paths, n)`` array adapted to the drivers."""
        return cls(PATHWISE, sampler=sampler, label=label)

    @property
    def is_gaussian(self):
        return self.kind in (DETERMINISTIC, FIRST_CHAOS)

    def values(self, driver: DriverEnsemble):
        """Samples at the grid nodes; shape ``(n,)`` if deterministic, else ``(n_paths, n)``."""
        if self.kind == DETERMINISTIC:
            return self.func(driver.grid.nodes)
        if self.kind == FIRST_CHAOS:
            if driver.paths_b is None:
                raise ConfigurationError("a first-chaos integrand needs Brownian paths")
            h = self.chaos_kernel(driver.grid.nodes[:-1])
            out = np.zeros_like(driver.paths_b)
            np.cumsum(driver.increments_b * h, axis=1, out=out[:, 1:])
            return out
        vals = np.asarray(self.sampler(driver), dtype=float)
        if vals.shape != driver.paths_bh.shape:
            raise ConfigurationError("sampler returned the wrong shape")
        return vals

    def second_moment(self, s):
        """``E[phi(s)^2]`` for Gaussian kinds, by quadrature."""
        if self.kind == DETERMINISTIC:
            return float(self.func(s)) ** 2
        if self.kind == FIRST_CHAOS:
            return _quad(lambda u: float(self.chaos_kernel(u)) ** 2, 0.0, s)
        raise ContractError("second moments of general adapted integrands need samples")


def _quad(f, a, b, breaks=(), **kw):
    if b <= a:
        return 0.0
    inside = sorted(p for p in breaks if a < p < b)
    if inside:
        edges = [a] + inside + [b]
        return sum(_quad(f, lo, hi, **kw) for lo, hi in zip(edges[:-1], edges[1:]))
    kw.setdefault("epsabs", _QTOL)
    kw.setdefault("epsrel", 1e-10)
    kw.setdefault("limit", 200)
    return integrate.quad(f, a, b, **kw)[0]


@dataclass
class WisIntegralResult:
    """Running values ``X(t_i)`` per path of a WIS integral.

    ``correction_total[i]`` is the accumulated Wick correction
    ``sum_{j<i} kappa_j`` (zero for deterministic integrands).
    """

    values: np.ndarray
    method: str
    correction_total: np.ndarray
    approximate: bool = False

    @property
    def terminal(self):
        return self.values[:, -1]

    def at(self, grid: TimeGrid, t):
        return self.values[:, grid.index_of(t)]


# -- deterministic integrands through the white noise ---------------------------

def _G1(v, a):
    return np.abs(v) ** (a + 1) / (a + 1)


def _G2(v, a):
    return np.sign(v) * np.abs(v) ** (a + 2) / (a + 2)


def wiener_weights(model, phi, spatial: SpatialGrid):
    """Matrix ``W`` with ``int_0^{t_k} phi dB^H = sum_c W[k, c] Z_c`` on the synthesis noise.

    ``phi`` is interpolated linearly between grid nodes and
    ``M(phi chi_[0,t_k])`` is averaged exactly over every spatial cell.
    """
    if phi.kind != DETERMINISTIC:
        raise ContractError("wiener_integral takes deterministic integrands only; "
                            "use wick_riemann_integral for first-chaos integrands")
    grid = spatial.grid
    a = model.alpha
    t = grid.nodes
    f = phi.func(t)
    slope = np.diff(f) / grid.dt
    e = spatial.edges[None, :]
    v0 = t[:-1, None] - e
    v1 = t[1:, None] - e
    c = f[:-1, None] + slope[:, None] * (e - t[:-1, None])
    # P[i, e] = int_{t_i}^{t_{i+1}} phi(u) sgn(u - e)|u - e|^a du
    P = c * (_G1(v1, a) - _G1(v0, a)) + slope[:, None] * (_G2(v1, a) - _G2(v0, a))
    per_cell = (P[:, :-1] - P[:, 1:]) * (model.kernel_const / a)
    cells = np.zeros((grid.n, spatial.n_cells))
    np.cumsum(per_cell, axis=0, out=cells[1:])
    cells /= np.sqrt(spatial.widths)[None, :]
    mass = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * grid.dt)])
    left, right = spatial.far_weights(model, mass)
    return np.concatenate([cells, left[:, None], right[:, None]], axis=1)


def wiener_integral(model, phi, driver: DriverEnsemble, weights=None):
    """``X(t_k) = int_0^{t_k} phi dB^H`` for deterministic ``phi`` on an m_synthesis ensemble."""
    if phi.kind != DETERMINISTIC:
        raise ContractError("wiener_integral takes deterministic integrands only")
    if driver.noise is None or driver.spatial is None:
        raise ConfigurationError("wiener_integral needs the white noise of an "
                                 "m_synthesis ensemble")
    W = wiener_weights(model, phi, driver.spatial) if weights is None else weights
    X = driver.noise @ W.T
    X[:, 0] = 0.0
    if driver.unit_variance:
        X *= 1.0 / math.sqrt(2.0 * model.c_h)
    return WisIntegralResult(X, "wiener_m_transform", np.zeros(driver.grid.n))


def wiener_at(model, phi, driver: DriverEnsemble, nodes, weights=None):
    """``int_0^{t_k} phi dB^H`` only at node indices ``nodes``; shape ``(n_paths, len(nodes))``."""
    if driver.noise is None or driver.spatial is None:
        raise ConfigurationError("wiener_at needs the white noise of an m_synthesis ensemble")
    W = wiener_weights(model, phi, driver.spatial) if weights is None else weights
    X = driver.noise @ W[np.asarray(nodes)].T
    if driver.unit_variance:
        X *= 1.0 / math.sqrt(2.0 * model.c_h)
    return X


# -- Wick-Riemann sums -----------------------------------------------------------

def indicator_cell_integrals(model, grid: TimeGrid):
    """``A[k, j] = int_{t_j}^{t_{j+1}} M_{t_k}(u) du`` for all nodes ``k`` and cells ``j``."""
    t = grid.nodes
    F = fk.m_indicator_antiderivative(model, t[:, None], t[None, :])
    return np.diff(F, axis=1)


def wick_corrections(model, phi, grid: TimeGrid):
    """``kappa_i = Cov(phi(t_i), Delta B^H_i)`` for a first-chaos integrand.

    With ``phi(t_i) = sum_{j<i} h(t_j) Delta B_j``,
    ``kappa_i = sum_{j<i} h(t_j) int_{t_j}^{t_{j+1}} (M_{t_{i+1}} - M_{t_i})``,
    which is exact for the m_synthesis drivers.
    """
    if phi.kind != FIRST_CHAOS:
        raise ContractError("exact Wick corrections exist for first-chaos integrands only")
    A = indicator_cell_integrals(model, grid)
    D = np.diff(A, axis=0)  # D[i, j] for increment i and Brownian cell j
    h = phi.chaos_kernel(grid.nodes[:-1])
    return np.tril(D, k=-1) @ h


def _riemann(phi_vals, dbh, kappa):
    terms = phi_vals[..., :-1] * dbh - kappa
    X = np.zeros((dbh.shape[0], dbh.shape[1] + 1))
    np.cumsum(terms, axis=1, out=X[:, 1:])
    return X


def wick_riemann_integral(model, phi, driver: DriverEnsemble, kappa=None):
    """Left-point Wick-Riemann sums ``sum_i phi(t_i) Delta B^H_i - kappa_i``.

    Deterministic integrands need no correction.  First-chaos integrands
    need a coupled ensemble; ``kappa`` may be passed in to reuse a
    precomputed :func:`wick_corrections` vector.
    """
    grid = driver.grid
    scale = 1.0 / math.sqrt(2.0 * model.c_h) if driver.unit_variance else 1.0
    if phi.kind == DETERMINISTIC:
        kap = np.zeros(grid.cells)
    elif phi.kind == FIRST_CHAOS:
        driver.require_coupled()
        kap = (wick_corrections(model, phi, grid) if kappa is None else kappa) * scale
    else:
        raise ContractError("general adapted integrands have no exact Wick correction; "
                            "use pathwise_adapted_integral")
    X = _riemann(phi.values(driver), driver.increments_bh, kap)
    return WisIntegralResult(X, "wick_riemann", np.concatenate([[0.0], np.cumsum(kap)]))


def pathwise_adapted_integral(model, phi, driver: DriverEnsemble):
    """Wick-Riemann sums with ``kappa_i`` estimated as the ensemble covariance.

    Exact in law only for Gaussian integrands; the result is flagged
    ``approximate``.  The estimate uses the paths of ``driver`` alone.
    """
    vals = phi.values(driver)
    if vals.ndim == 1:
        vals = np.broadcast_to(vals, driver.paths_bh.shape)
    dbh = driver.increments_bh
    if driver.n_paths < 2:
        raise ConfigurationError("covariance estimation needs at least two paths")
    left = vals[:, :-1]
    kap = ((left - left.mean(axis=0)) * (dbh - dbh.mean(axis=0))).sum(axis=0) / (driver.n_paths - 1)
    X = _riemann(vals, dbh, kap)
    return WisIntegralResult(X, "wick_riemann", np.concatenate([[0.0], np.cumsum(kap)]),
                             approximate=True)


def integrate_wis(model, phi, driver, kappa=None):
    """The natural integral for ``phi``'s kind on ``driver``."""
    if phi.kind == DETERMINISTIC and driver.noise is not None:
        return wiener_integral(model, phi, driver)
    if phi.kind == PATHWISE:
        return pathwise_adapted_integral(model, phi, driver)
    return wick_riemann_integral(model, phi, driver, kappa)


# -- second moments by quadrature ----------------------------------------------------

def _alg_quad(f, a, b, left=0.0, right=0.0):
    """``int_a^b (x-a)^left (b-x)^right f(x) dx`` with scipy's algebraic-weight rule."""
    if b <= a:
        return 0.0
    return integrate.quad(f, a, b, weight="alg", wvar=(left, right),
                          epsabs=_QTOL, epsrel=1e-10, limit=200)[0]


def _memory(g, s, e, breaks):
    """``int_0^s g(u) (s-u)^e du`` split at the jumps of ``g``."""
    edges = [0.0] + sorted(p for p in breaks if 0.0 < p < s) + [s]
    total = _alg_quad(g, edges[-2], s, right=e)
    for lo, hi in zip(edges[:-2], edges[1:-1]):
        total += _quad(lambda u: g(u) * (s - u) ** e, lo, hi)
    return total


def _deterministic_running(model, phi, t):
    # 2 int_0^t phi(s) M^2(phi chi_[0,s])(s) ds with the single M^2 kernel
    f = lambda u: float(phi.func(u))
    e = 2 * model.H - 2
    inner = lambda s: _memory(f, s, e, phi.breaks)
    return 2.0 * model.kernel2_const * _quad(lambda s: f(s) * inner(s), 0.0, t, phi.breaks)


def _deterministic_window(model, phi, t):
    # int_0^t phi(s) M^2(phi chi_[0,t])(s) ds through the kernel form of M^2
    f = lambda u: float(phi.func(u))
    m2 = lambda s: fk.m_squared_kernel(model, f, s, support=(0.0, t), tol=1e-9,
                                       breaks=phi.breaks)
    return _quad(lambda s: f(s) * m2(s), 0.0, t, phi.breaks)


@functools.lru_cache(maxsize=64)
def _jacobi01(n, p, q):
    """Nodes and weights for ``int_0^1 f(x) x^p (1-x)^q dx``."""
    y, w = special.roots_jacobi(n, q, p)
    return 0.5 * (y + 1.0), w * 0.5 ** (p + q + 1.0)


def _chaos_terms(model, phi, t, n=48):
    """Covariance and trace parts of ``E[X(t)^2]`` for a first-chaos integrand.

    With ``u = s w`` every algebraic endpoint factor is carried by a
    Gauss-Jacobi weight, leaving smooth integrands for smooth kernels ``h``.
    """
    h = phi.chaos_kernel
    a = model.alpha
    e = 2 * model.H - 2
    kap = model.kernel_const
    xg, wg = _jacobi01(n, 0.0, 0.0)
    xa, wa = _jacobi01(n, a - 1.0, 0.0)

    def Q(u):
        u = np.asarray(u, dtype=float)
        return u * (h(u[..., None] * xg) ** 2 @ wg)

    # covariance: 2 kappa2 int_0^t s^(2H-1) int_0^1 Q(s w) (1-w)^e dw ds
    ys, wys = _jacobi01(n, 2 * model.H - 1, 0.0)
    ws, wws = _jacobi01(n, 0.0, e)
    s = t * ys
    inner = Q(s[:, None] * ws[None, :]) @ wws
    cov = 2.0 * model.kernel2_const * t ** (2 * model.H) * float(wys @ inner)

    # trace: 2 kappa^2 int_0^t s^(2a+1) int_0^1 F(s, w) dw ds
    def J(lo, span):
        # int_0^1 h(lo + span x) x^(a-1) dx, elementwise over lo and span
        return h(lo[..., None] + span[..., None] * xa) @ wa

    yo, wyo = _jacobi01(n, 2 * a + 1, 0.0)
    s = t * yo
    A_hat = J(s, -s)  # s^-a int_0^s h(r) (s-r)^(a-1) dr
    total = 0.0
    # F = A C w^a + A D (1-w)^a - B C w^a (1-w)^a - B D (1-w)^(2a)
    for p, q, part in ((a, 0.0, "AC"), (0.0, a, "AD"), (a, a, "BC"), (0.0, 2 * a, "BD")):
        w, ww = _jacobi01(n, p, q)
        S = s[:, None] * np.ones_like(w)[None, :]
        U = S * w[None, :]
        first = A_hat[:, None] if part[0] == "A" else J(S, U - S)   # B(u, s)
        second = J(U, -U) if part[1] == "C" else J(U, S - U)        # C(u) or D(u, s)
        sign = -1.0 if part[0] == "B" else 1.0
        total += sign * float(wyo @ ((first * second) @ ww))
    trace = 2.0 * kap ** 2 * t ** (2 * a + 2) * total
    return cov, trace


def _chaos_terms_adaptive(model, phi, t):
    """Nested adaptive quadrature version of :func:`_chaos_terms`; slow, used as a cross-check."""
    h = lambda u: float(phi.chaos_kernel(u))
    a = model.alpha
    kap = model.kernel_const
    e = 2 * model.H - 2
    Q = lambda u: _quad(lambda r: h(r) ** 2, 0.0, u)
    # E[phi(u) phi(s)] = Q(min(u, s))
    cov = 2.0 * model.kernel2_const * _quad(lambda s: _alg_quad(Q, 0.0, s, right=e), 0.0, t)

    def g_before(u, s):
        # Cov(phi(u), dB^H(s)/ds) for u < s: kappa int_0^u h(r) (s - r)^(a-1) dr
        w = lambda x: h(s - x)
        return kap * (_alg_quad(w, 0.0, s, left=a - 1) - _alg_quad(w, 0.0, s - u, left=a - 1))

    def g_after(s, u):
        # Cov(phi(s), dB^H(u)/du) for u < s: kappa int_0^s h(r) |u - r|^(a-1) dr
        return kap * (_alg_quad(h, 0.0, u, right=a - 1) + _alg_quad(h, u, s, left=a - 1))

    # Monte-Carlo checks need far less than the inner accuracy here
    loose = dict(epsabs=1e-12, epsrel=1e-7)
    trace = 2.0 * _quad(lambda s: _quad(lambda u: g_before(u, s) * g_after(s, u), 0.0, s,
                                        **loose), 0.0, t, **loose)
    return cov, trace


def expected_square(model, phi, t, form="running", trace=True, method="gauss"):
    """``E[X(t)^2]`` for ``X(t) = int_0^t phi dB^H``, by quadrature.

    Parameters
    ----------
    phi : Integrand
        Deterministic or first-chaos.
    form : {"running", "window"}
        For deterministic ``phi``: ``"running"`` evaluates
        ``2 int_0^t phi(s) M^2(phi chi_[0,s])(s) ds`` and ``"window"`` evaluates
        ``int_0^t phi(s) M^2(phi chi_[0,t])(s) ds``; the two agree.
    trace : bool
        For first-chaos ``phi``, include the Skorohod trace
        ``int int Cov(phi(u), dB^H(v)) Cov(phi(v), dB^H(u))``.  Without it
        only the covariance part ``E int int phi(u) phi(v) M^2-kernel`` is
        returned, which underestimates the second moment.
    method : {"gauss", "adaptive"}
        First-chaos quadrature: Gauss-Jacobi product rules, or nested
        adaptive quadrature (much slower).
    """
    t = float(t)
    if t < 0:
        raise ConfigurationError("t must be non-negative")
    if t == 0.0:
        return 0.0
    if phi.kind == DETERMINISTIC:
        if form == "running":
            return _deterministic_running(model, phi, t)
        if form == "window":
            return _deterministic_window(model, phi, t)
        raise ConfigurationError(f"unknown form {form!r}")
    if phi.kind == FIRST_CHAOS:
        terms = _chaos_terms if method == "gauss" else _chaos_terms_adaptive
        cov, tr = terms(model, phi, t)
        return cov + tr if trace else cov
    raise ContractError("use expected_square_mc for general adapted integrands")


def inner_product_window(model, f, g, t):
    """``(f chi_[0,t], g chi_[0,t])_H`` for deterministic ``f`` and ``g``, by quadrature.

    Uses ``int_0^t int_0^s [f(s) g(u) + f(u) g(s)] kappa2 (s-u)^(2H-2) du ds``.
    """
    if f.kind != DETERMINISTIC or g.kind != DETERMINISTIC:
        raise ContractError("inner_product_window takes deterministic integrands")
    t = float(t)
    if t <= 0:
        return 0.0
    ff = lambda u: float(f.func(u))
    gg = lambda u: float(g.func(u))
    e = 2 * model.H - 2
    inner = lambda s: (ff(s) * _memory(gg, s, e, g.breaks) + gg(s) * _memory(ff, s, e, f.breaks))
    return model.kernel2_const * _quad(inner, 0.0, t, f.breaks + g.breaks)


def fgn_gram(model, grid: TimeGrid):
    """``Cov(Delta B^H_i, Delta B^H_j)``: the M^2 kernel integrated over pairs of cells."""
    from scipy.linalg import toeplitz
    from .fbmgen import fgn_covariance
    return toeplitz(fgn_covariance(model, grid, np.arange(grid.cells)))


def pathwise_double_integral(model, values, grid: TimeGrid, k=None, gram=None):
    """Per-path ``int_0^t int_0^t phi(u) phi(v) M^2-kernel du dv`` with ``phi`` held left-point.

    ``k`` is the node index of ``t`` (default: the horizon).  Averaging over
    paths estimates the covariance part of :func:`expected_square`.
    """
    k = grid.cells if k is None else int(k)
    G = fgn_gram(model, grid) if gram is None else gram
    v = np.atleast_2d(values)[:, :k]
    return np.einsum("pi,ij,pj->p", v, G[:k, :k], v)


# -- the L2 estimate ------------------------------------------------------------------

@dataclass(frozen=True)
class BoundRecord:
    """Outcome of the L2 estimate ``E[X(t)^2] <= k_h E[int_0^t phi^2] t^(2H-1)``.

    ``tight_ratio`` compares ``lhs`` with the halved constant for
    nonnegative integrands and is ``None`` otherwise.
    """

    lhs: float
    rhs: float
    ratio: float
    passed: bool
    lhs_se: float = 0.0
    tight_ratio: Optional[float] = None

    def as_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "pass": self.passed,
                "lhs_se": self.lhs_se, "tight_ratio": self.tight_ratio}


def energy(phi, t, driver=None):
    """``E[int_0^t phi^2]`` by quadrature (Gaussian kinds) or by samples."""
    if phi.kind == DETERMINISTIC:
        return _quad(lambda s: float(phi.func(s)) ** 2, 0.0, t, phi.breaks)
    if phi.kind == FIRST_CHAOS:
        return _quad(phi.second_moment, 0.0, t)
    if driver is None:
        raise ContractError("energy of a general adapted integrand needs an ensemble")
    grid = driver.grid
    k = grid.index_of(t)
    v = phi.values(driver)[:, : k + 1]
    return float(np.mean(integrate.trapezoid(v ** 2, dx=grid.dt, axis=1)))


def bound_check(model, phi, t, estimate=None, nonnegative=None):
    """Compare ``E[X(t)^2]`` with ``k_h E[int_0^t phi^2] t^(2H-1)``.

    Parameters
    ----------
    estimate : (float, float), optional
        Monte-Carlo ``(mean, standard error)`` of ``X(t)^2``.  Without it the
        left side comes from :func:`expected_square`.
    nonnegative : bool, optional
        Whether ``phi >= 0``; decides if ``tight_ratio`` is reported.  By
        default deterministic integrands are probed on a fine grid.
    """
    t = float(t)
    if estimate is None:
        lhs, se = expected_square(model, phi, t), 0.0
    else:
        lhs, se = float(estimate[0]), float(estimate[1])
    rhs = model.k_h * energy(phi, t) * t ** (2 * model.H - 1)
    if rhs == 0.0:
        passed = abs(lhs) <= 4 * se or lhs == 0.0
        ratio = 0.0 if lhs == 0.0 else math.inf
    else:
        ratio = lhs / rhs
        rel = se / abs(lhs) if lhs != 0 else 0.0
        passed = lhs <= rhs * (1 + 3 * rel)
    if nonnegative is None:
        nonnegative = (phi.kind == DETERMINISTIC
                       and bool(np.all(phi.func(np.linspace(0.0, t, 1025)) >= 0)))
    tight = 2.0 * ratio if nonnegative and rhs > 0 else None
    return BoundRecord(lhs, rhs, ratio, passed, se, tight)


@dataclass(frozen=True)
class ItoRecord:
    lhs: float
    rhs: float
    lhs_se: float
    passed: bool

    def as_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "lhs_se": self.lhs_se, "pass": self.passed}


def ito_square_check(model, sigma, t, estimate):
    """Check ``E[X(t)^2] = int_0^t 2 sigma(s) M^2(sigma chi_[0,s])(s) ds`` for ``X = int sigma dB^H``.

    This is the expectation of the Ito formula for ``f(x) = x^2``; the
    ``2 X dX`` term has mean zero.  ``estimate`` is the Monte-Carlo
    ``(mean, standard error)`` of ``X(t)^2``.
    """
    rhs = expected_square(model, sigma, t, form="running")
    lhs, se = float(estimate[0]), float(estimate[1])
    passed = abs(lhs - rhs) <= 4 * se if se > 0 else abs(lhs - rhs) <= 1e-12
    return ItoRecord(lhs, rhs, se, passed)
