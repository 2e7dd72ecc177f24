"""Acceptance criteria at desk scale: 1e5 paths, 1025 nodes, H in {0.6, 0.75, 0.9}.

Each test prints one ``criterion N ...: PASS|FAIL`` line, and the lines are
repeated in the terminal summary.  Deselect with ``-m "not acceptance"``.
"""
import json

import mpmath as mp
import numpy as np
import pytest

from fwnoise import frackernel as fk
from fwnoise import mcharness as mh

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance

HURSTS = mh.HURST_SET
DESK = mh.ExperimentConfig()  # 1e5 paths, n = 2^10 + 1, seed 0
_REPORTS = {}


def report(name, H):
    key = (name, H)
    if key not in _REPORTS:
        cfg = DESK.replace(H=H, **mh._DEFAULT_OVERRIDES.get(name, {}))
        _REPORTS[key] = mh.run_experiment(name, cfg)
    return _REPORTS[key]


def verdict(number, title, failures, note=""):
    status = "PASS" if not failures else "FAIL"
    line = f"criterion {number} {title}: {status}"
    if note:
        line += f" ({note})"
    if failures:
        line += " | " + "; ".join(failures)
    ACCEPTANCE_LINES[number] = line
    print(line)
    assert not failures, line


def failing_checks(rep):
    return [f"{rep.name} H={rep.config.H} {c.label}: est={c.estimate:.6g} se={c.std_error:.3g} "
            f"target={c.target:.6g} margin={c.margin:.3g} [{c.verdict}]"
            for c in rep.checks if c.verdict != mh.PASS]


# -- 1 ------------------------------------------------------------------------------------

def _mp_c_h(H):
    a = mp.mpf(H) - mp.mpf(1) / 2
    return 1 / (2 * mp.gamma(a) * mp.cos(mp.pi / 2 * a))


def _mp_k_h(H):
    H = mp.mpf(H)
    return 4 * _mp_c_h(H) ** 2 * (mp.pi * mp.power(5, 2 * H - 1) / (2 * H - 1) + 2 / (1 - H))


def test_criterion_1_constants():
    mp.mp.dps = 50
    failures = []
    worst = 0.0
    for H in HURSTS:
        m = fk.HurstModel(H)
        for label, got, ref in (("c_h", m.c_h, _mp_c_h(H)), ("k_h", m.k_h, _mp_k_h(H))):
            rel = float(abs((mp.mpf(got) - ref) / ref))
            worst = max(worst, rel)
            if mp.nstr(mp.mpf(got), 12) != mp.nstr(ref, 12):
                failures.append(f"{label}({H}) = {got!r}, reference {mp.nstr(ref, 20)}")
    m = fk.HurstModel(0.75)
    verdict(1, "constants", failures,
            f"c_h(0.75)={m.c_h:.12g}, k_h(0.75)={m.k_h:.12g}, worst rel err {worst:.1e}")


# -- 2 ------------------------------------------------------------------------------------

# smooth nonnegative functions, each with the finite support its quadratures run over
CORPUS = (
    (lambda x: np.exp(-np.asarray(x, float) ** 2), (-12.0, 12.0)),
    (lambda x: np.exp(-(np.asarray(x, float) - 1.0) ** 2), (-11.0, 13.0)),
    (lambda x: np.asarray(x, float) ** 2 * np.exp(-np.asarray(x, float) ** 2), (-12.0, 12.0)),
)
PAIRS = ((0, 1), (1, 2), (2, 0))
IDENTITY_TOL = 1e-6


def test_criterion_2_operator_identities():
    failures, worst = [], 0.0
    xs = np.array([-1.0, 0.0, 0.3, 2.0])

    def note(label, a, b):
        nonlocal worst
        worst = max(worst, abs(a - b))
        if abs(a - b) > IDENTITY_TOL:
            failures.append(f"{label}: {a:.10g} vs {b:.10g}")

    for H in HURSTS:
        m = fk.HurstModel(H)
        M = lambda f, s: (lambda x: fk.apply_m_quadrature(m, f, x, support=s))
        M2 = lambda f, s: (lambda x: fk.m_squared_kernel(m, f, x, support=s))
        for f, s in CORPUS:
            single = fk.m_squared_kernel(m, f, xs, support=s)
            nested = fk.m_squared_quadrature(m, f, xs, support=s)
            for a, b in zip(single, nested):
                note(f"H={H} M^2 single vs nested", a, b)
        for i, j in PAIRS:
            (f, sf), (g, sg) = CORPUS[i], CORPUS[j]
            note(f"H={H} adjoint ({i},{j})", fk.l2_pairing(f, M(g, sg), *sf),
                 fk.l2_pairing(M(f, sf), g, *sg))
            mm = fk.l2_pairing(M(f, sf), M(g, sg))
            note(f"H={H} extended ({i},{j})", fk.l2_pairing(f, M2(g, sg), *sf), mm)
            note(f"H={H} extended ({j},{i})", fk.l2_pairing(g, M2(f, sf), *sg), mm)
    verdict(2, "operator identities", failures, f"worst abs gap {worst:.1e}, tol {IDENTITY_TOL}")


# -- 3 ------------------------------------------------------------------------------------

def test_criterion_3_calibration():
    failures, notes = [], []
    for H in HURSTS:
        rep = report("calibration", H)
        failures += failing_checks(rep)
        times = sorted(float(c.label.rsplit("=", 1)[1]) for c in rep.checks)
        if times != [0.5, 1.0, 2.0]:
            failures.append(f"H={H}: checked times {times}")
        worst = max(abs(c.estimate / c.target - 1) for c in rep.checks)
        if worst > 0.005:
            failures.append(f"H={H}: relative error {worst:.2e} above 0.5%")
        notes.append(f"H={H} prefactor {rep.details['prefactor']:.10g} "
                     f"[{rep.details['source']}] err {worst:.1e}")
    verdict(3, "calibration gate", failures, "; ".join(notes))


# -- 4 ------------------------------------------------------------------------------------

def test_criterion_4_fbm_law():
    failures, methods = [], set()
    for H in HURSTS:
        for name in ("variance", "covariance", "moment4"):
            rep = report(name, H)
            methods.update(rep.details["methods"])
            failures += failing_checks(rep)
        failures += failing_checks(report("generator_equiv", H))
    if methods != {"circulant", "cholesky"}:
        failures.append(f"generators covered: {sorted(methods)}")
    ks = max(report("generator_equiv", H).estimate for H in HURSTS)
    verdict(4, "fBm law", failures,
            f"variance, covariance, fourth moment on both generators; worst KS {ks:.4f} "
            f"< {report('generator_equiv', 0.75).target:.4f}")


# -- 5 ------------------------------------------------------------------------------------

def test_criterion_5_wis_properties():
    failures, n = [], 0
    for H in HURSTS:
        for name in ("zero_mean", "isometry"):
            rep = report(name, H)
            n += len(rep.checks)
            failures += failing_checks(rep)
    verdict(5, "WIS zero mean and isometry", failures, f"{n} checks")


# -- 6 ------------------------------------------------------------------------------------

def test_criterion_6_l2_bound():
    failures, tight = [], []
    for H in HURSTS:
        rep = report("l2_bound", H)
        failures += failing_checks(rep)
        covered = {r["phi"] for r in rep.details["records"]}
        if covered != set(mh.INTEGRAND_CORPUS):
            failures.append(f"H={H}: corpus covered {sorted(covered)}")
        for r in rep.details["records"]:
            if r["phi"] in mh.DETERMINISTIC_CORPUS:
                if r["tight_ratio"] is None:
                    failures.append(f"H={H} {r['phi']}: no tight ratio recorded")
                else:
                    tight.append(r["tight_ratio"])
    verdict(6, "L2 bound", failures,
            f"tight ratios for nonnegative integrands in [{min(tight):.3f}, {max(tight):.3f}]"
            if tight else "")


# -- 7 ------------------------------------------------------------------------------------

def test_criterion_7_ito_and_product_rule():
    failures = []
    for H in HURSTS:
        for name in ("ito_square", "product_rule"):
            rep = report(name, H)
            sigmas = {c.label.rsplit("=", 1)[1] for c in rep.checks}
            if sigmas != set(mh.ITO_CORPUS):
                failures.append(f"{name} H={H}: integrands {sorted(sigmas)}")
            failures += failing_checks(rep)
    verdict(7, "Ito square and product rule", failures, "sigma in {1, cos, identity}")


# -- 8 ------------------------------------------------------------------------------------

def test_criterion_8_sde():
    failures, notes = [], []
    for H in HURSTS:
        pic = report("picard", H)
        failures += failing_checks(pic)
        labels = " | ".join(c.label for c in pic.checks)
        for part in ("delta ratio", "fixed-point residual", "Picard - Euler", "closed form"):
            if part not in labels:
                failures.append(f"picard H={H}: no check for {part}")
        gr = report("gronwall", H)
        failures += failing_checks(gr)
        if not gr.details["all_nodes_pass"]:
            failures.append(f"gronwall H={H}: bound violated at some node")
        ratios = pic.details["contraction"]["ratios"]
        notes.append(f"H={H} k_used={pic.details['k_used']} "
                     f"max ratio {max(ratios[2:7]):.3f}")
    verdict(8, "SDE existence and uniqueness", failures, "; ".join(notes))


# -- 9 ------------------------------------------------------------------------------------

RERUN = ("calibration", "covariance", "isometry", "l2_bound", "ito_square", "picard")


def test_criterion_9_determinism():
    failures = []
    for name in RERUN:
        first = report(name, 0.75)
        text = mh.reports_to_json([first])
        mh.clear_caches()
        cfg = mh.ExperimentConfig.from_dict(json.loads(text)[0]["config"]).replace(threads=2)
        again = mh.run_experiment(name, cfg)
        if mh.reports_to_json([again]) != text:
            failures.append(f"{name}: rerun with 2 threads differs")
    verdict(9, "determinism", failures,
            f"{len(RERUN)} experiments rerun from their metadata with 2 threads")
