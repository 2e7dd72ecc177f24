"""Fractional Brownian driver paths under the ``Var B^H(t) = 2 c_h t^(2H)`` law.

Three generators share one output type:

* ``cholesky``: exact, factorizes the increment covariance (small grids).
* ``circulant``: exact, Davies-Harte embedding, ``O(n log n)`` per path.
* ``m_synthesis``: draws white noise on a spatial grid and applies ``M_t``
  cell by cell, so ``B`` and ``B^H`` come from the same noise.

All randomness comes from :mod:`fwnoise.rng`, so path ``p`` depends only on
``(seed, p)`` and never on chunking or worker count.
"""
from __future__ import annotations

import enum
import functools
import io
import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, linalg

from . import frackernel as fk
from .errors import AccuracyError, ConfigurationError, DomainError, NumericError
from .parallel import DEFAULT_CHUNK, map_chunks
from .rng import Stream, normals

BINARY_MAGIC = b"FWN1"
_HEADER = struct.Struct("<4sffIIQB3x")


class Method(enum.IntEnum):
    CHOLESKY = 0
    CIRCULANT = 1
    M_SYNTHESIS = 2

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ConfigurationError(
                f"unknown method {value!r}; choose from "
                + ", ".join(m.name.lower() for m in cls)) from None

    @property
    def label(self):
        return self.name.lower()


def _is_pow2(k):
    return k >= 1 and not k & (k - 1)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes ``t_i = i T / (n - 1)`` on ``[0, T]``; ``n - 1`` must be a power of two."""

    T: float
    n: int

    def __post_init__(self):
        T = float(self.T)
        if not (math.isfinite(T) and T > 0):
            raise DomainError(f"horizon T must be positive and finite, got {self.T}")
        if int(self.n) != self.n or not _is_pow2(int(self.n) - 1):
            raise ConfigurationError(f"node count must be 2^k + 1, got {self.n}")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "n", int(self.n))

    @property
    def dt(self):
        return self.T / (self.n - 1)

    @property
    def nodes(self):
        return np.arange(self.n) * self.dt

    @property
    def cells(self):
        return self.n - 1

    def index_of(self, t):
        """Node index of time ``t``, which must lie on the grid."""
        k = int(round(t / self.dt))
        if not (0 <= k < self.n) or abs(k * self.dt - t) > 1e-9 * self.T:
            raise DomainError(f"time {t} is not a grid node")
        return k


def fgn_covariance(model, grid, k):
    """Covariance of increments ``k`` cells apart: ``c_h dt^2H (|k+1|^2H + |k-1|^2H - 2|k|^2H)``."""
    k_arr = np.asarray(k)
    if not np.issubdtype(k_arr.dtype, np.integer):
        if not np.all(k_arr == np.round(k_arr)):
            raise DomainError("lag must be an integer")
        k_arr = k_arr.astype(np.int64)
    if np.any(k_arr < 0) or np.any(k_arr >= grid.cells):
        raise DomainError(f"lag must lie in [0, {grid.cells - 1}]")
    return _fgn_cov(model.H, model.c_h, grid.dt, k_arr)


def _fgn_cov(H, ch, dt, k):
    k = np.abs(np.asarray(k, dtype=float))
    e = 2 * H
    out = ch * dt ** e * (np.abs(k + 1) ** e + np.abs(k - 1) ** e - 2 * k ** e)
    return float(out) if out.ndim == 0 else out


# -- spatial grid for white-noise synthesis ----------------------------------

@dataclass(frozen=True, eq=False)
class SpatialGrid:
    """Cells covering ``[-R, T + R]`` plus one far-field term per side.

    The cells inside ``[0, T]`` coincide with the time cells.  Outside, widths
    grow geometrically from ``dt`` by ``ratio`` until they reach ``R``.  The
    noise beyond ``R`` enters through one extra Gaussian per side whose
    weight reproduces the exact tail energy of ``M_t``.
    """

    grid: TimeGrid
    reach: float
    ratio: float
    edges: np.ndarray = field(repr=False)

    @classmethod
    def default(cls, grid, reach=None, ratio=1.05):
        reach = fk.DEFAULT_REACH * grid.T if reach is None else float(reach)
        return _spatial(grid, reach, float(ratio))

    @classmethod
    def build(cls, grid, reach, ratio):
        if reach <= 0 or ratio < 1:
            raise ConfigurationError("reach must be positive and ratio at least 1")
        dt = grid.dt
        outer = [0.0]
        width = dt
        while outer[-1] < reach:
            outer.append(min(outer[-1] + width, reach))
            width *= ratio
        outer = np.asarray(outer)
        if outer.size > 2 and outer[-1] - outer[-2] < 0.5 * (outer[-2] - outer[-3]):
            outer = np.delete(outer, -2)  # fold a sliver into its neighbour
        edges = np.concatenate([-outer[:0:-1], grid.nodes, grid.T + outer[1:]])
        return cls(grid, reach, ratio, edges)

    @property
    def n_cells(self):
        return self.edges.size - 1

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def inner_slice(self):
        """Cells that coincide with the time cells."""
        first = int(np.searchsorted(self.edges, 0.0))
        return slice(first, first + self.grid.cells)

    @property
    def n_noise(self):
        """Gaussians per path: one per cell plus two far-field terms."""
        return self.n_cells + 2

    def far_weights(self, model, mass):
        """Far-field weights for an integrand of running mass ``mass(t_k)``.

        Returns two vectors (left, right).  For the indicator integrand
        ``mass = t`` they are the exact tail norms of ``M_t``; otherwise the
        leading-order far field ``kappa * mass * |x|^(H-3/2)`` is assumed.
        """
        t = self.grid.nodes
        left = np.zeros_like(t)
        right = np.zeros_like(t)
        pos = t > 0
        left[pos] = np.sqrt(fk.tail_energy(model, t[pos], t[pos] + self.reach))
        right[pos] = np.sqrt(fk.tail_energy(model, t[pos], self.grid.T + self.reach))
        scale = np.zeros_like(t)
        scale[pos] = np.asarray(mass, dtype=float)[pos] / t[pos]
        return left * scale, right * scale


@functools.lru_cache(maxsize=8)
def _spatial(grid, reach, ratio):
    return SpatialGrid.build(grid, reach, ratio)


def m_synthesis_weights(model, spatial):
    """Matrix ``W`` with ``B^H(t_k) = sum_c W[k, c] Z_c`` for iid standard ``Z``."""
    return _weights(model.H, spatial)


@functools.lru_cache(maxsize=8)
def _weights(H, spatial):
    model = fk.HurstModel(H)
    t = spatial.grid.nodes[:, None]
    e = spatial.edges[None, :]
    F = fk.m_indicator_antiderivative(model, t, e)
    cells = np.diff(F, axis=1) / np.sqrt(spatial.widths)[None, :]
    left, right = spatial.far_weights(model, spatial.grid.nodes)
    W = np.concatenate([cells, left[:, None], right[:, None]], axis=1)
    W[0] = 0.0  # M_0 vanishes identically
    W.setflags(write=False)
    return W


# -- ensembles -----------------------------------------------------------------

@dataclass(eq=False)
class DriverEnsemble:
    """Driver paths for paths ``path_offset .. path_offset + n_paths - 1``.

    Attributes
    ----------
    paths_bh : ndarray, shape (n_paths, n)
        Fractional Brownian motion at the grid nodes.
    paths_b : ndarray or None
        Brownian motion at the grid nodes.  For ``m_synthesis`` it is built
        from the same noise as ``paths_bh`` (``coupled=True``); for the exact
        generators it is either absent or independent.
    noise : ndarray or None
        For ``m_synthesis``, the standard normals ``Z`` behind both drivers,
        shape ``(n_paths, spatial.n_noise)``.
    """

    grid: TimeGrid
    hurst: fk.HurstModel
    seed: int
    method: Method
    paths_bh: np.ndarray
    paths_b: Optional[np.ndarray] = None
    coupled: bool = False
    path_offset: int = 0
    spatial: Optional[SpatialGrid] = None
    noise: Optional[np.ndarray] = None
    unit_variance: bool = False

    @property
    def n_paths(self):
        return self.paths_bh.shape[0]

    @property
    def increments_bh(self):
        return np.diff(self.paths_bh, axis=1)

    @property
    def increments_b(self):
        if self.paths_b is None:
            raise ConfigurationError("ensemble carries no Brownian paths")
        return np.diff(self.paths_b, axis=1)

    @property
    def variance_scale(self):
        """Factor between this ensemble's variance and ``2 c_h t^2H``."""
        return 1.0 / (2.0 * self.hurst.c_h) if self.unit_variance else 1.0

    def require_coupled(self):
        if not (self.coupled and self.noise is not None):
            raise ConfigurationError(
                "this operation needs jointly coupled drivers from m_synthesis")

    # -- export --------------------------------------------------------------
    def to_csv(self, fh):
        """Write rows ``path,node,t,b,bh``; ``b`` is empty when absent."""
        t = self.grid.nodes
        fh.write("path,node,t,b,bh\n")
        for p in range(self.n_paths):
            pid = self.path_offset + p
            bh = self.paths_bh[p]
            b = self.paths_b[p] if self.paths_b is not None else None
            rows = []
            for i in range(self.grid.n):
                bv = repr(float(b[i])) if b is not None else ""
                rows.append(f"{pid},{i},{float(t[i])!r},{bv},{float(bh[i])!r}\n")
            fh.write("".join(rows))

    def to_bytes(self):
        """Header then ``b`` block (zeros when absent) then ``bh`` block, float64 LE."""
        header = binary_header(self.hurst.H, self.grid.T, self.grid.n, self.n_paths,
                               self.seed, self.method)
        b = self.paths_b if self.paths_b is not None else np.zeros_like(self.paths_bh)
        buf = io.BytesIO()
        buf.write(header)
        buf.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(self.paths_bh, dtype="<f8").tobytes())
        return buf.getvalue()


def binary_header(H, T, n, n_paths, seed, method):
    """Fixed 32-byte header: magic, ``H`` and ``T`` as float32, ``n``, ``n_paths``, seed, method."""
    return _HEADER.pack(BINARY_MAGIC, H, T, n, n_paths, seed & 0xFFFFFFFFFFFFFFFF, int(method))


def read_binary(data):
    """Parse :meth:`DriverEnsemble.to_bytes` output into a dict of fields and arrays.

    Files written by the solver carry an extra ``x`` block after ``bh``.
    """
    magic, H, T, n, n_paths, seed, method = _HEADER.unpack_from(data, 0)
    if magic != BINARY_MAGIC:
        raise ConfigurationError("not an FWN1 file")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    block = n * n_paths
    # a third block carries solution paths when present
    if body.size not in (2 * block, 3 * block):
        raise ConfigurationError("truncated FWN1 payload")
    out = {"H": H, "T": T, "n": n, "n_paths": n_paths, "seed": seed,
           "method": Method(method)}
    for i, name in enumerate(("b", "bh", "x")[: body.size // block]):
        out[name] = body[i * block: (i + 1) * block].reshape(n_paths, n)
    return out


# -- exact generators -------------------------------------------------------------

def _check_paths(n_paths, path_offset):
    if int(n_paths) != n_paths or n_paths < 1:
        raise ConfigurationError(f"n_paths must be a positive integer, got {n_paths}")
    if path_offset < 0:
        raise ConfigurationError("path_offset must be non-negative")


def _cumulate(increments):
    out = np.zeros((increments.shape[0], increments.shape[1] + 1))
    np.cumsum(increments, axis=1, out=out[:, 1:])
    return out


def _independent_b(grid, n_paths, seed, path_offset):
    z = normals(seed, Stream.INDEPENDENT_B, path_offset, n_paths, grid.cells)
    return _cumulate(z * math.sqrt(grid.dt))


@functools.lru_cache(maxsize=8)
def _cholesky_factor(H, T, n):
    grid = TimeGrid(T, n)
    model = fk.HurstModel(H)
    col = _fgn_cov(H, model.c_h, grid.dt, np.arange(grid.cells))
    cov = linalg.toeplitz(col)
    L, info = linalg.lapack.dpotrf(cov, lower=1, clean=1)
    if info > 0:
        pivot = cov[info - 1, info - 1] - np.dot(L[info - 1, :info - 1], L[info - 1, :info - 1])
        raise NumericError(
            f"increment covariance is not positive definite: pivot {info} equals {pivot:.3e}")
    if info < 0:
        raise NumericError(f"dpotrf rejected argument {-info}")
    L.setflags(write=False)
    return L


CHOLESKY_MAX_NODES = 2 ** 11 + 1


def generate_cholesky(model, grid, n_paths, seed, path_offset=0, include_b=False,
                      unit_variance=False):
    """Exact sampler: lower Cholesky factor of the increment covariance times normals."""
    _check_paths(n_paths, path_offset)
    if grid.n > CHOLESKY_MAX_NODES:
        raise ConfigurationError(f"cholesky is limited to {CHOLESKY_MAX_NODES} nodes")
    L = _cholesky_factor(model.H, grid.T, grid.n)
    z = normals(seed, Stream.FGN, path_offset, n_paths, grid.cells)
    bh = _cumulate(z @ L.T)
    return _finish(model, grid, seed, Method.CHOLESKY, bh, n_paths, path_offset,
                   include_b, unit_variance)


def circulant_eigenvalues(model, grid):
    """Eigenvalues of the minimal circulant embedding of the increment covariance."""
    return _circulant_eigs(model.H, grid.T, grid.n).copy()


@functools.lru_cache(maxsize=8)
def _circulant_eigs(H, T, n):
    grid = TimeGrid(T, n)
    N = grid.cells
    col = _fgn_cov(H, fk.c_h(H), grid.dt, np.arange(N + 1))
    row = np.concatenate([col, col[-2:0:-1]])
    lam = np.fft.rfft(row).real
    lam.setflags(write=False)
    return lam


def generate_circulant(model, grid, n_paths, seed, path_offset=0, include_b=False,
                       unit_variance=False):
    """Exact sampler by circulant embedding; uses ``2 (n - 1)`` normals per path."""
    _check_paths(n_paths, path_offset)
    lam = _circulant_eigs(model.H, grid.T, grid.n)
    if lam.min() < -1e-12 * lam.max():
        raise NumericError(
            f"circulant embedding has a negative eigenvalue {lam.min():.3e}; "
            "double the grid and retry")
    N = grid.cells
    M = 2 * N
    z = normals(seed, Stream.FGN, path_offset, n_paths, M)
    # Hermitian half-spectrum: real ends, complex pairs with variance 1/2 per part
    spec = np.empty((n_paths, N + 1), dtype=complex)
    spec[:, 0] = z[:, 0]
    spec[:, N] = z[:, 1]
    spec[:, 1:N] = (z[:, 2::2] + 1j * z[:, 3::2]) * math.sqrt(0.5)
    spec *= np.sqrt(np.clip(lam, 0.0, None))
    inc = np.fft.irfft(spec, n=M, axis=1)[:, :N] * math.sqrt(M)
    bh = _cumulate(inc)
    return _finish(model, grid, seed, Method.CIRCULANT, bh, n_paths, path_offset,
                   include_b, unit_variance)


def _finish(model, grid, seed, method, bh, n_paths, path_offset, include_b, unit_variance):
    b = _independent_b(grid, n_paths, seed, path_offset) if include_b else None
    if unit_variance:
        bh *= 1.0 / math.sqrt(2.0 * model.c_h)
    return DriverEnsemble(grid, model, int(seed), method, bh, b, False, path_offset,
                          unit_variance=unit_variance)


# -- white-noise synthesis -------------------------------------------------------

def generate_via_m(model, grid, n_paths, seed, spatial_grid=None, path_offset=0,
                   unit_variance=False):
    """Coupled ``(B, B^H)`` from one white-noise sample.

    With ``Z`` standard normal per spatial cell of width ``h_c``,
    ``Delta B_c = sqrt(h_c) Z_c``, ``B^H(t_k) = sum_c avg_c(M_{t_k}) Delta B_c``
    and ``B(t_k)`` sums the ``Delta B_c`` over ``[0, t_k]``.  Cell averages are
    exact integrals of ``M_t``, so ``Cov(B(u), B^H(t)) = int_0^u M_t`` holds
    exactly at the nodes.
    """
    _check_paths(n_paths, path_offset)
    spatial = spatial_grid or SpatialGrid.default(grid)
    if spatial.grid != grid:
        raise ConfigurationError("spatial grid was built for a different time grid")
    W = m_synthesis_weights(model, spatial)
    z = normals(seed, Stream.WHITE_NOISE, path_offset, n_paths, spatial.n_noise)
    bh = z @ W.T
    bh[:, 0] = 0.0
    inner = z[:, spatial.inner_slice] * math.sqrt(grid.dt)
    b = _cumulate(inner)
    if unit_variance:
        bh *= 1.0 / math.sqrt(2.0 * model.c_h)
    return DriverEnsemble(grid, model, int(seed), Method.M_SYNTHESIS, bh, b, True,
                          path_offset, spatial, z, unit_variance)


def generate(method, model, grid, n_paths, seed, path_offset=0, **kwargs):
    """Dispatch on ``method`` (name or :class:`Method`)."""
    method = Method.parse(method)
    if method is Method.CHOLESKY:
        return generate_cholesky(model, grid, n_paths, seed, path_offset, **kwargs)
    if method is Method.CIRCULANT:
        return generate_circulant(model, grid, n_paths, seed, path_offset, **kwargs)
    return generate_via_m(model, grid, n_paths, seed, path_offset=path_offset, **kwargs)


def map_ensembles(func, method, model, grid, n_paths, seed, chunk=DEFAULT_CHUNK,
                  threads=1, **kwargs):
    """Apply ``func`` to consecutive ensembles of at most ``chunk`` paths.

    Results come back in path order.  Because the chunk size is fixed and the
    noise is keyed by path index, the outcome is independent of ``threads``.
    """
    return map_chunks(
        lambda start, count: func(generate(method, model, grid, count, seed,
                                           path_offset=start, **kwargs)),
        n_paths, chunk, threads)


def cross_covariance(model, u, t):
    """``Cov(B(u), B^H(t)) = int_0^u M_t(s) ds`` by adaptive quadrature."""
    u = float(u)
    t = float(t)
    if u < 0 or t < 0:
        raise DomainError("times must be non-negative")
    if u == 0.0 or t == 0.0:
        return 0.0
    pts = [p for p in (t,) if 0 < p < u]
    a = model.alpha
    total = 0.0
    # the integrand behaves like |s|^a and |t - s|^a near its two kinks
    edges = [0.0] + pts + [u]
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, err = integrate.quad(lambda s: fk.m_indicator(model, t, s), lo, hi,
                                epsabs=1e-12, epsrel=1e-11, limit=200)
        if err > 1e-8:
            raise AccuracyError("cross-covariance quadrature did not converge",
                                   estimate=v, error=err)
        total += v
    return total
