"""Solvers for ``dX = alpha(t,X) dt + beta(t,X) dB + sigma(t) dB^H``, ``X_0 = Z``.

:func:`picard_solve` iterates the integral map
``Y -> Z + int alpha(s, Y) ds + int beta(s, Y) dB + int sigma dB^H``; the last
term does not depend on ``Y`` and is computed once.  :func:`euler_solve` is
the explicit one-step scheme with Wick-corrected fractional increments.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import wiscalc as wc
from .errors import ConfigurationError, ContractError, DivergenceError
from .fbmgen import DriverEnsemble
from .rng import Stream, normals


# -- coefficient registry -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class Coefficient:
    """A named coefficient ``f(t, x)``, vectorized in both arguments."""

    name: str
    func: Callable = field(repr=False)
    zero: bool = False

    def __call__(self, t, x):
        return self.func(t, x)


def _params(text, names):
    """Parse ``"a=-1,b=2"`` or ``"-1,2"`` into floats keyed by ``names``."""
    out = {}
    if not text:
        return out
    for i, item in enumerate(text.split(",")):
        item = item.strip()
        if "=" in item:
            k, v = item.split("=", 1)
            k = k.strip()
        else:
            if i >= len(names):
                raise ConfigurationError(f"too many parameters in {text!r}")
            k, v = names[i], item
        if k not in names:
            raise ConfigurationError(f"unknown parameter {k!r}; expected {names}")
        try:
            out[k] = float(v)
        except ValueError:
            raise ConfigurationError(f"parameter {k} is not a number: {v!r}") from None
    return out


def _split(name):
    m = re.fullmatch(r"\s*([a-z_]+)\s*(?::(.*))?", str(name))
    if not m:
        raise ConfigurationError(f"malformed coefficient name {name!r}")
    return m.group(1), (m.group(2) or "").strip()


def _spread(values, other):
    """``values`` broadcast against the shape of ``other`` (a view, no copy)."""
    values = np.asarray(values, dtype=float)
    shape = np.broadcast_shapes(values.shape, np.shape(other))
    return values if shape == values.shape else np.broadcast_to(values, shape)


def state_coefficient(name):
    """Drift or Brownian coefficient by name.

    ``zero``, ``const:c``, ``linear:a=..,b=..`` (``a x + b``), ``sin`` and
    ``cos`` (of ``x``), ``sin_t`` and ``cos_t`` (of ``t``).
    """
    kind, arg = _split(name)
    if kind == "zero":
        return Coefficient(name, lambda t, x: np.zeros(np.broadcast(t, x).shape), zero=True)
    if kind == "const":
        c = _params(arg, ["c"]).get("c")
        if c is None:
            raise ConfigurationError("const needs a value, e.g. const:1")
        return Coefficient(name, lambda t, x: np.full(np.broadcast(t, x).shape, c), zero=c == 0)
    if kind == "linear":
        p = _params(arg, ["a", "b"])
        a, b = p.get("a", 1.0), p.get("b", 0.0)
        return Coefficient(name, lambda t, x: _spread(a * np.asarray(x, float) + b, t),
                           zero=a == 0 and b == 0)
    simple = {
        "sin": lambda t, x: _spread(np.sin(x), t),
        "cos": lambda t, x: _spread(np.cos(x), t),
        "sin_t": lambda t, x: _spread(np.sin(t), x),
        "cos_t": lambda t, x: _spread(np.cos(t), x),
    }
    if kind in simple and not arg:
        return Coefficient(name, simple[kind])
    raise ConfigurationError(f"unknown coefficient {name!r}")


def sigma_integrand(name):
    """Fractional coefficient by name.

    Deterministic: ``zero``, ``const:c``, ``sin``, ``cos``, ``identity``
    (``sigma(t) = t``), ``exp:a=..`` (``e^(a t)``), ``indicator:b=..``
    (``chi_[0,b]``).  First chaos:
    ``brownian`` (``sigma = B``) and ``chaos_exp:a=..``
    (``sigma(s) = int_0^s e^(a u) dB(u)``).
    """
    kind, arg = _split(name)
    det = None
    if kind == "zero":
        det = lambda t: 0.0 * t
    elif kind == "const":
        c = _params(arg, ["c"]).get("c")
        if c is None:
            raise ConfigurationError("const needs a value, e.g. const:1")
        det = lambda t: c + 0.0 * t
    elif kind == "sin" and not arg:
        det = np.sin
    elif kind == "cos" and not arg:
        det = np.cos
    elif kind == "identity" and not arg:
        det = lambda t: 1.0 * t
    elif kind == "exp":
        a = _params(arg, ["a"]).get("a", 1.0)
        det = lambda t: np.exp(a * t)
    elif kind == "indicator":
        b = _params(arg, ["b"]).get("b")
        if b is None:
            raise ConfigurationError("indicator needs an end point, e.g. indicator:b=0.5")
        return wc.Integrand.deterministic(lambda t: (np.asarray(t) <= b) * 1.0, label=name,
                                          breaks=(b,))
    if det is not None:
        return wc.Integrand.deterministic(det, label=name)
    if kind == "brownian" and not arg:
        return wc.Integrand.first_chaos(lambda u: 1.0 + 0.0 * u, label=name)
    if kind == "chaos_exp":
        a = _params(arg, ["a"]).get("a", -1.0)
        return wc.Integrand.first_chaos(lambda u: np.exp(a * u), label=name)
    raise ConfigurationError(f"unknown fractional coefficient {name!r}")


# -- initial laws ----------------------------------------------------------------

@dataclass(frozen=True)
class InitialLaw:
    """Law of ``X_0``: ``mean + sd * N(0,1)``, sampled on its own RNG stream.

    The normal for path ``p`` depends only on ``(seed, p)``, so two laws that
    differ only in ``mean`` are coupled path by path.
    """

    mean: float = 0.0
    sd: float = 1.0
    name: str = ""

    @classmethod
    def parse(cls, text):
        kind, arg = _split(text)
        if kind == "normal":
            p = _params(arg, ["mu", "sd"])
            mu, sd = p.get("mu", 0.0), p.get("sd", 1.0)
            if sd < 0:
                raise ConfigurationError("sd must be non-negative")
            return cls(mu, sd, text)
        if kind == "const":
            c = _params(arg, ["c"]).get("c")
            if c is None:
                raise ConfigurationError("const needs a value")
            return cls(c, 0.0, text)
        raise ConfigurationError(f"unknown initial law {text!r}")

    def shifted(self, delta):
        return InitialLaw(self.mean + delta, self.sd, f"{self.name}+{delta}")

    @property
    def second_moment(self):
        return self.mean ** 2 + self.sd ** 2

    def sample(self, seed, path_start, n_paths):
        z = normals(seed, Stream.INITIAL, path_start, n_paths, 1)[:, 0]
        return self.mean + self.sd * z


# -- equation ------------------------------------------------------------------------

LATTICE_X = np.linspace(-10.0, 10.0, 41)


@dataclass(frozen=True, eq=False)
class SdeSpec:
    """Coefficients, initial law and the declared growth and Lipschitz constants."""

    alpha: Coefficient
    beta: Coefficient
    sigma: wc.Integrand
    initial: InitialLaw
    D: float
    C: float
    T: float
    names: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_names(cls, alpha, beta, sigma, Z, T, D, C, check=True):
        spec = cls(state_coefficient(alpha), state_coefficient(beta), sigma_integrand(sigma),
                   InitialLaw.parse(Z), float(D), float(C), float(T),
                   {"alpha": alpha, "beta": beta, "sigma": sigma, "Z": Z,
                    "T": float(T), "D": float(D), "C": float(C)})
        if check:
            spec.validate()
        return spec

    def with_initial(self, law):
        names = dict(self.names, Z=law.name)
        return SdeSpec(self.alpha, self.beta, self.sigma, law, self.D, self.C, self.T, names)

    def validate(self):
        """Spot-check growth and Lipschitz bounds on a ``(t, x)`` lattice."""
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigurationError("T must be positive")
        if self.D < 0 or self.C < 0:
            raise ConfigurationError("D and C must be non-negative")
        t = np.linspace(0.0, self.T, 9)[:, None]
        x = LATTICE_X[None, :]
        a = np.asarray(self.alpha(t, x), float)
        b = np.asarray(self.beta(t, x), float)
        if self.sigma.kind == wc.DETERMINISTIC:
            s = np.abs(self.sigma.func(t))
        else:
            s = 0.0  # random coefficient: the bound is checked on alpha and beta
        slack = 1e-12 * (1 + np.abs(x))
        if np.any(np.abs(a) + np.abs(b) + s > self.C * (1 + np.abs(x)) + slack):
            raise ConfigurationError(f"growth bound C={self.C} fails on the lattice")
        da = np.abs(a[:, :, None] - a[:, None, :])
        db = np.abs(b[:, :, None] - b[:, None, :])
        dx = np.abs(x[0][:, None] - x[0][None, :])
        if np.any(da + db > self.D * dx[None] + 1e-12 * (1 + dx[None])):
            raise ConfigurationError(f"Lipschitz bound D={self.D} fails on the lattice")
        return self

    def fingerprint(self):
        blob = json.dumps(self.names, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# -- results ------------------------------------------------------------------------------

@dataclass
class SolveResult:
    """Solution paths and, for Picard, the iterate differences.

    ``iterates_delta[k]`` is ``||Y^(k+1) - Y^(k)||`` in ``L2(dt x dP)``.
    """

    paths: np.ndarray
    method: str
    iterates_delta: list = field(default_factory=list)
    delta_se: list = field(default_factory=list)
    k_used: int = 0
    residual: float = float("nan")
    converged: bool = True

    def sidecar(self, spec=None):
        out = {"method": self.method, "k_used": self.k_used,
               "iterates_delta": [float(d) for d in self.iterates_delta],
               "residual": float(self.residual), "converged": self.converged}
        if spec is not None:
            out["spec"] = spec.names
            out["spec_fingerprint"] = spec.fingerprint()
        return out


def _l2_norm(diff, dt):
    """``sqrt(E int diff^2 dt)`` and its standard error, trapezoid in time."""
    return _l2_norm_of(integrate.trapezoid(diff * diff, dx=dt, axis=1))


def _l2_norm_of(per_path):
    m = float(per_path.mean())
    se = float(per_path.std(ddof=1) / math.sqrt(per_path.size)) if per_path.size > 1 else 0.0
    norm = math.sqrt(m)
    return norm, (se / (2 * norm) if norm > 0 else se)


def fractional_term(spec, driver):
    """``int_0^{t_i} sigma dB^H`` per path, by the scheme matching ``sigma``'s kind."""
    model = driver.hurst
    sigma = spec.sigma
    if sigma.kind == wc.DETERMINISTIC:
        if driver.noise is not None:
            return wc.wiener_integral(model, sigma, driver)
        return wc.wick_riemann_integral(model, sigma, driver)
    if sigma.kind == wc.FIRST_CHAOS:
        return wc.wick_riemann_integral(model, sigma, driver)
    return wc.pathwise_adapted_integral(model, sigma, driver)


def _check_driver(spec, driver):
    if abs(driver.grid.T - spec.T) > 1e-12 * spec.T:
        raise ConfigurationError(f"driver horizon {driver.grid.T} differs from spec T={spec.T}")
    if not spec.beta.zero and driver.paths_b is None:
        raise ConfigurationError("a Brownian coefficient needs an ensemble with B paths")
    if spec.sigma.kind == wc.FIRST_CHAOS:
        driver.require_coupled()


class _PicardMap:
    """``Y -> Z + int alpha(s, Y) ds + int beta(s, Y) dB + F`` on one ensemble."""

    def __init__(self, spec, driver, x0, frac):
        self.spec = spec
        self.t = driver.grid.nodes
        self.dt = driver.grid.dt
        self.dB = None if spec.beta.zero else driver.increments_b
        self.base = x0[:, None] + frac

    def __call__(self, Y):
        out = self.base.copy()
        if not self.spec.alpha.zero:
            a = self.spec.alpha(self.t[None, :], Y)
            out[:, 1:] += np.cumsum(0.5 * (a[:, 1:] + a[:, :-1]) * self.dt, axis=1)
        if self.dB is not None:
            b = self.spec.beta(self.t[None, :-1], Y[:, :-1])
            out[:, 1:] += np.cumsum(b * self.dB, axis=1)
        return out


def picard_sequence(spec, driver, k_max, initial=None):
    """Yield ``(k, Y^(k+1), int (Y^(k+1) - Y^(k))^2 dt per path)`` for ``k = 0..k_max``."""
    _check_driver(spec, driver)
    law = initial or spec.initial
    x0 = law.sample(driver.seed, driver.path_offset, driver.n_paths)
    frac = fractional_term(spec, driver).values
    F = _PicardMap(spec, driver, x0, frac)
    Y = np.repeat(x0[:, None], driver.grid.n, axis=1)
    for k in range(k_max + 1):
        Y_next = F(Y)
        d = Y_next - Y
        yield k, Y_next, integrate.trapezoid(d * d, dx=driver.grid.dt, axis=1)
        Y = Y_next


def picard_iterates(spec, driver, k_max, initial=None):
    """Run ``k_max`` Picard steps; yields ``(k, Y^(k+1), ||Y^(k+1) - Y^(k)||, se)``."""
    for k, Y, per_path in picard_sequence(spec, driver, k_max, initial):
        yield (k, Y) + _l2_norm_of(per_path)


def _diverging(deltas, floor):
    if len(deltas) < 6:
        return False
    tail = deltas[-4:]
    grows = all(tail[i + 1] > tail[i] for i in range(3))
    return grows and tail[-1] > floor and len(deltas) - 1 > 2


def picard_solve(spec, driver, k_max=12, tol=1e-4, initial=None):
    """Picard iteration until ``||Y^(k+1) - Y^(k)|| < tol`` or ``k = k_max``.

    Returns the last iterate; ``k_used`` is the first ``k`` meeting ``tol``
    and ``residual`` is ``||Y - Phi(Y)||`` for the returned ``Y``.
    """
    deltas, ses = [], []
    Y = None
    k_used = k_max
    converged = False
    floor = 0.0
    for k, Y_next, norm, se in picard_iterates(spec, driver, k_max + 1, initial):
        if converged:
            # one extra application of the map gives the fixed-point residual
            return SolveResult(Y, "picard", deltas, ses, k_used, norm, True)
        deltas.append(norm)
        ses.append(se)
        if k == 0:
            floor = 1e-13 * max(1.0, float(np.sqrt(np.mean(Y_next ** 2))))
        Y = Y_next
        if _diverging(deltas, floor):
            raise DivergenceError(
                f"Picard differences grew three times in a row (D={spec.D}, T={spec.T}): "
                + ", ".join(f"{d:.3e}" for d in deltas[-4:]))
        if norm < tol:
            k_used = k
            converged = True
        elif k == k_max:
            break
    residual = deltas[-1] if deltas else float("nan")
    return SolveResult(Y, "picard", deltas, ses, k_max, residual, False)


def euler_solve(spec, driver, initial=None):
    """``X_{i+1} = X_i + alpha dt + beta Delta B_i + (sigma Delta B^H)_i`` with Wick correction."""
    _check_driver(spec, driver)
    law = initial or spec.initial
    grid = driver.grid
    x = law.sample(driver.seed, driver.path_offset, driver.n_paths)
    if spec.sigma.kind == wc.DETERMINISTIC:
        dfrac = np.diff(wc.wick_riemann_integral(driver.hurst, spec.sigma, driver).values, axis=1)
    else:
        dfrac = np.diff(fractional_term(spec, driver).values, axis=1)
    dB = None if spec.beta.zero else driver.increments_b
    t = grid.nodes
    out = np.empty((driver.n_paths, grid.n))
    out[:, 0] = x
    for i in range(grid.cells):
        step = dfrac[:, i].copy()
        if not spec.alpha.zero:
            step += spec.alpha(t[i], x) * grid.dt
        if dB is not None:
            step += spec.beta(t[i], x) * dB[:, i]
        x = x + step
        out[:, i + 1] = x
    return SolveResult(out, "euler")


# -- experiments ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContractionReport:
    deltas: tuple
    ratios: tuple
    envelope: tuple
    A2: float
    geometric: bool
    cauchy_tail: float

    def as_dict(self):
        return {"deltas": list(self.deltas), "ratios": list(self.ratios),
                "envelope": list(self.envelope), "A2": self.A2,
                "geometric": self.geometric, "cauchy_tail": self.cauchy_tail}


def contraction_summary(deltas, T, max_ratio=0.9, ks=range(2, 7), floor=1e-13):
    """Ratios, fitted factorial envelope and decay verdict for a delta sequence.

    The envelope is ``(A2^(k+1) T^(k+2) / (k+2)!)^(1/2)`` with the smallest
    ``A2`` that keeps it above the first two deltas; it is reported, not tested.
    """
    d = np.asarray(deltas, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(d[:-1] > 0, d[1:] / d[:-1], 0.0)
    cands = []
    if d.size > 0 and d[0] > 0:
        cands.append(2.0 * d[0] ** 2 / T ** 2)
    if d.size > 1 and d[1] > 0:
        cands.append(math.sqrt(6.0 * d[1] ** 2 / T ** 3))
    A2 = max(cands) if cands else 0.0
    k = np.arange(d.size)
    logs = 0.5 * ((k + 1) * math.log(A2 if A2 > 0 else 1.0) + (k + 2) * math.log(T)
                  - np.array([math.lgamma(j + 3) for j in k]))
    env = np.exp(logs) if A2 > 0 else np.zeros(d.size)
    checked = [j for j in ks if j + 1 < d.size and d[j] > floor]
    geometric = all(ratios[j] <= max_ratio for j in checked)
    tail = float(d[-3:].sum()) if d.size else 0.0
    return ContractionReport(tuple(map(float, d)), tuple(map(float, ratios)),
                             tuple(map(float, env)), float(A2), bool(geometric), tail)


def contraction_experiment(spec, driver, k_max=12):
    """Picard deltas for ``k = 0..k_max`` with their envelope and decay verdict."""
    deltas = [norm for _, _, norm, _ in picard_iterates(spec, driver, k_max)]
    return contraction_summary(deltas, spec.T)


@dataclass(frozen=True)
class GronwallReport:
    w: np.ndarray
    w_se: np.ndarray
    bound: np.ndarray
    passed: bool
    initial_gap: float

    def as_dict(self):
        return {"w": self.w.tolist(), "w_se": self.w_se.tolist(), "bound": self.bound.tolist(),
                "pass": self.passed, "initial_gap": self.initial_gap}


def gronwall_bound(spec, gap, t):
    """``3 E|Z - Z'|^2 exp(3 T D^2 t)``."""
    return 3.0 * gap * np.exp(3.0 * spec.T * spec.D ** 2 * np.asarray(t))


def gronwall_verdict(w, w_se, bound):
    rel = np.where(w > 0, w_se / np.where(w > 0, w, 1.0), 0.0)
    return bool(np.all(w <= bound * (1 + 3 * rel)))


def gronwall_experiment(spec, driver, Z, Z_hat, k_max=12, tol=1e-4):
    """``w(t) = E|X_t - X'_t|^2`` for two initial laws on the same drivers, against its bound."""
    a = picard_solve(spec, driver, k_max, tol, initial=Z).paths
    b = picard_solve(spec, driver, k_max, tol, initial=Z_hat).paths
    d2 = (a - b) ** 2
    n = d2.shape[0]
    w = d2.mean(axis=0)
    w_se = d2.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(w)
    gap = float(w[0])
    bound = gronwall_bound(spec, gap, driver.grid.nodes)
    return GronwallReport(w, w_se, bound, gronwall_verdict(w, w_se, bound), gap)


def ode_reference(spec, x0, t_eval):
    """High-accuracy solution of ``x' = alpha(t, x)``, shape ``(len(x0), len(t_eval))``."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    sol = integrate.solve_ivp(lambda t, x: spec.alpha(t, x), (0.0, t_eval[-1]), x0,
                              method="DOP853", t_eval=t_eval, rtol=1e-12, atol=1e-12,
                              vectorized=False)
    if not sol.success:
        raise ContractError(f"reference ODE solve failed: {sol.message}")
    return sol.y
