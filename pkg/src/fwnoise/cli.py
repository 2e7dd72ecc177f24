"""Batch front end: ``fwn gen | solve | verify | report``.

Exit codes: 0 success, 1 an experiment failed, 2 usage or configuration
error, 3 numerical failure (factorization, accuracy target, divergence).
Settings are layered: built-in defaults, then ``FWN_SEED``, then the
``--config`` JSON file, then explicit flags.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from contextlib import contextmanager

import numpy as np

from . import fbmgen as fg
from . import frackernel as fk
from . import mcharness as mh
from . import sdesolve as sd
from .errors import (AccuracyError, ConfigurationError, ContractError, DivergenceError,
                     DomainError, FwnError, NumericError)
from .parallel import DEFAULT_CHUNK, map_chunks, pairwise

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULTS = {"hurst": 0.75, "T": 1.0, "n": 1025, "seed": 0, "format": "csv", "threads": 1,
            "solver": "picard", "k_max": 12, "tol": 1e-4}
DEFAULT_PATHS = {"gen": 1000, "solve": 1000, "verify": 100_000}
DEFAULT_METHOD = {"gen": "circulant", "solve": "m_synthesis"}
FORMATS = ("csv", "json", "bin")


class UsageError(FwnError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="fwn", description="Fractional white-noise simulation and verification.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, paths=True):
        sp.add_argument("--config", help="JSON file whose fields act as defaults for flags")
        sp.add_argument("--hurst", type=float)
        sp.add_argument("--T", type=float)
        sp.add_argument("--n", type=int, help="grid nodes; n - 1 must be a power of two")
        if paths:
            sp.add_argument("--paths", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, help="worker cap, 0 = one per core")
        sp.add_argument("--out")
        sp.add_argument("--format", choices=FORMATS)

    g = sub.add_parser("gen", help="generate driver paths")
    common(g)
    g.add_argument("--method", choices=[m.label for m in fg.Method])

    s = sub.add_parser("solve", help="solve an SDE given by a JSON spec")
    common(s)
    s.add_argument("--spec", help="JSON spec file")
    s.add_argument("--method", choices=[m.label for m in fg.Method])
    s.add_argument("--solver", choices=("picard", "euler"))

    v = sub.add_parser("verify", help="run verification experiments")
    common(v)
    v.add_argument("--experiment", help="experiment name or 'all'")
    v.add_argument("--method", choices=[m.label for m in fg.Method],
                   help="generator for the fBm law experiments")
    v.add_argument("--spec", help="JSON spec file for the picard and gronwall experiments")

    r = sub.add_parser("report", help="summarize or re-run a saved report file")
    r.add_argument("input", help="JSON report file written by verify")
    r.add_argument("--out")
    r.add_argument("--format", choices=("csv", "json"))
    r.add_argument("--rerun", action="store_true",
                   help="re-run every report from its metadata and compare bytes")
    r.add_argument("--threads", type=int)
    return p


def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {what} {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{what} {path!r} is not valid JSON: {exc}") from None


def resolve(args, environ=None):
    """Merge defaults, ``FWN_SEED``, the config file and flags into one dict."""
    environ = os.environ if environ is None else environ
    cfg = dict(DEFAULTS)
    cfg["paths"] = DEFAULT_PATHS.get(args.command)
    cfg["method"] = DEFAULT_METHOD.get(args.command)
    if environ.get("FWN_SEED"):
        try:
            cfg["seed"] = int(environ["FWN_SEED"])
        except ValueError:
            raise ConfigurationError(f"FWN_SEED is not an integer: {environ['FWN_SEED']!r}") \
                from None
    cfg["hurst_given"] = False
    path = getattr(args, "config", None)
    if path:
        data = _read_json(path, "config file")
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
        known = set(cfg) | {"experiment", "spec", "out", "experiment_config"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        cfg.update(data)
        cfg["hurst_given"] = "hurst" in data
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        cfg[key] = value
        if key == "hurst":
            cfg["hurst_given"] = True
    cfg["command"] = args.command
    return cfg


def validate(cfg):
    """Check every numeric field against the library preconditions."""
    if cfg["command"] == "report":
        return cfg
    fk._check_hurst(cfg["hurst"])
    fg.TimeGrid(cfg["T"], cfg["n"])
    if cfg.get("paths") is not None and (int(cfg["paths"]) != cfg["paths"] or cfg["paths"] < 1):
        raise ConfigurationError("--paths must be a positive integer")
    if not 0 <= int(cfg["seed"]) < 2 ** 64:
        raise ConfigurationError("--seed must fit in 64 unsigned bits")
    if cfg["threads"] < 0:
        raise ConfigurationError("--threads must be non-negative")
    if cfg.get("method"):
        fg.Method.parse(cfg["method"])
    if cfg["format"] not in FORMATS:
        raise ConfigurationError(f"unknown format {cfg['format']!r}")
    return cfg


# -- output ----------------------------------------------------------------------------

@contextmanager
def atomic_output(path, binary=False, stream=None):
    """Write to a temporary file beside ``path`` and rename it into place on success.

    Without a path the output goes to ``stream`` (standard output by default).
    """
    if path is None or path == "-":
        stream = stream or sys.stdout
        yield stream.buffer if binary else stream
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".fwn-", dir=directory)
    try:
        if binary:
            fh = os.fdopen(fd, "wb")
        else:
            fh = os.fdopen(fd, "w", encoding="utf-8", newline="\n")
        with fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _fmt(v):
    return repr(float(v))


class PathWriter:
    """Streams chunks of paths to CSV, JSON or the binary layout.

    ``columns`` names the per-node arrays, e.g. ``("b", "bh")``.  Chunks must
    arrive in path order.  The binary layout stores one block per column, so
    chunks are placed with seeks.
    """

    def __init__(self, fh, fmt, meta, columns, grid):
        self.fh, self.fmt, self.meta, self.columns, self.grid = fh, fmt, meta, columns, grid
        self.first = True
        self.t = grid.nodes
        if fmt == "csv":
            fh.write("path,node,t," + ",".join(columns) + "\n")
        elif fmt == "json":
            head = dict(meta, t=[float(x) for x in self.t])
            fh.write(json.dumps(head, sort_keys=True)[:-1] + ', "paths": [\n')
        else:
            fh.write(fg.binary_header(meta["H"], meta["T"], meta["n"], meta["n_paths"],
                                      meta["seed"], fg.Method.parse(meta["method"])))
            self.base = fh.tell()

    def write(self, start, arrays):
        fmt, fh = self.fmt, self.fh
        count = arrays[self.columns[0]].shape[0] if arrays[self.columns[0]] is not None \
            else arrays[self.columns[1]].shape[0]
        n = self.grid.n
        if fmt == "csv":
            tcol = [_fmt(x) for x in self.t]
            for p in range(count):
                cols = [[_fmt(v) for v in arrays[c][p]] if arrays[c] is not None else [""] * n
                        for c in self.columns]
                pid = start + p
                fh.write("".join(f"{pid},{i},{tcol[i]}," + ",".join(col[i] for col in cols) + "\n"
                                 for i in range(n)))
        elif fmt == "json":
            for p in range(count):
                rec = {"path": start + p}
                for c in self.columns:
                    rec[c] = None if arrays[c] is None else [float(v) for v in arrays[c][p]]
                fh.write(("" if self.first else ",\n") + json.dumps(rec, sort_keys=True))
                self.first = False
        else:
            total = self.meta["n_paths"]
            for j, c in enumerate(self.columns):
                a = arrays[c] if arrays[c] is not None else np.zeros((count, n))
                fh.seek(self.base + 8 * n * (j * total + start))
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())

    def close(self):
        if self.fmt == "json":
            self.fh.write("\n]}\n")
        elif self.fmt == "bin":
            self.fh.seek(0, os.SEEK_END)


def _is_binary(cfg):
    return cfg["format"] == "bin"


def _require_out_for_binary(cfg):
    if _is_binary(cfg) and not cfg.get("out"):
        raise ConfigurationError("binary output needs --out")


# -- commands ---------------------------------------------------------------------------

def _meta(cfg, method):
    return {"H": float(cfg["hurst"]), "T": float(cfg["T"]), "n": int(cfg["n"]),
            "n_paths": int(cfg["paths"]), "seed": int(cfg["seed"]),
            "method": fg.Method.parse(method).label}


def cmd_gen(cfg, stdout, stderr):
    _require_out_for_binary(cfg)
    model = fk.HurstModel(cfg["hurst"])
    grid = fg.TimeGrid(cfg["T"], cfg["n"])
    method = fg.Method.parse(cfg["method"])
    kw = {} if method is fg.Method.M_SYNTHESIS else {"include_b": True}
    # fail before any output if the factorization is impossible
    fg.generate(method, model, grid, 1, cfg["seed"], **kw)
    meta = _meta(cfg, method)
    with atomic_output(cfg.get("out"), _is_binary(cfg), stdout) as fh:
        w = PathWriter(fh, cfg["format"], meta, ("b", "bh"), grid)
        for start in range(0, cfg["paths"], DEFAULT_CHUNK):
            count = min(DEFAULT_CHUNK, cfg["paths"] - start)
            e = fg.generate(method, model, grid, count, cfg["seed"], path_offset=start, **kw)
            w.write(start, {"b": e.paths_b, "bh": e.paths_bh})
        w.close()
    print(f"wrote {cfg['paths']} paths x {grid.n} nodes ({method.label})", file=stderr)
    return EXIT_OK


def load_spec(path, T=None):
    """Read a JSON SDE spec and return a validated :class:`SdeSpec`."""
    data = _read_json(path, "spec file")
    if not isinstance(data, dict):
        raise ConfigurationError("spec file must hold a JSON object")
    required = ("alpha", "beta", "sigma", "Z", "T", "D", "C")
    missing = [k for k in required if k not in data]
    if missing:
        raise ConfigurationError(f"spec is missing fields: {missing}")
    extra = set(data) - set(required)
    if extra:
        raise ConfigurationError(f"unknown spec fields: {sorted(extra)}")
    return sd.SdeSpec.from_names(*(data[k] for k in required))


def _solve_drivers(spec, method, model, grid, seed, start, count):
    kw = {}
    if method is not fg.Method.M_SYNTHESIS and not spec.beta.zero:
        kw["include_b"] = True
    return fg.generate(method, model, grid, count, seed, path_offset=start, **kw)


def cmd_solve(cfg, stdout, stderr):
    if not cfg.get("spec"):
        raise ConfigurationError("solve needs --spec")
    _require_out_for_binary(cfg)
    spec = load_spec(cfg["spec"])
    if abs(spec.T - cfg["T"]) > 1e-12 * spec.T:
        if cfg.get("T_given"):
            raise ConfigurationError(f"--T {cfg['T']} differs from spec T={spec.T}")
        cfg["T"] = spec.T
    model = fk.HurstModel(cfg["hurst"])
    grid = fg.TimeGrid(cfg["T"], cfg["n"])
    method = fg.Method.parse(cfg["method"])
    seed, N, k_max, tol = cfg["seed"], cfg["paths"], int(cfg["k_max"]), float(cfg["tol"])
    threads = cfg["threads"]

    def drivers(start, count):
        return _solve_drivers(spec, method, model, grid, seed, start, count)

    if cfg["solver"] == "picard":
        # pass 1: per-iterate squared differences summed over all paths, in a fixed order
        def sums(start, count):
            e = drivers(start, count)
            return np.array([float(np.sum(per_path)) for _, _, per_path
                             in sd.picard_sequence(spec, e, k_max + 1)])
        parts = map_chunks(sums, N, DEFAULT_CHUNK, threads)
        total = pairwise(parts, np.add)
        deltas = np.sqrt(total / N)
        k_used = next((k for k in range(k_max + 1) if deltas[k] < tol), None)
        if k_used is None:
            if sd._diverging(list(deltas), 1e-13):
                raise DivergenceError(
                    f"Picard differences kept growing (D={spec.D}, T={spec.T}): "
                    + ", ".join(f"{d:.3e}" for d in deltas[-4:]))
            raise AccuracyError(f"Picard did not reach tol={tol} within k_max={k_max}",
                                estimate=float(deltas[-1]), error=float(deltas[-1]))
        residual = float(deltas[k_used + 1])

        def final(start, count):
            e = drivers(start, count)
            for _, Y, _ in sd.picard_sequence(spec, e, k_used):
                pass
            return e, Y
        result = sd.SolveResult(None, "picard", list(deltas[: k_used + 1]), [], k_used,
                                residual, True)
    else:
        def final(start, count):
            e = drivers(start, count)
            return e, sd.euler_solve(spec, e).paths
        result = sd.SolveResult(None, "euler")

    meta = _meta(cfg, method)
    with atomic_output(cfg.get("out"), _is_binary(cfg), stdout) as fh:
        w = PathWriter(fh, cfg["format"], meta, ("b", "bh", "x"), grid)
        for start in range(0, N, DEFAULT_CHUNK):
            count = min(DEFAULT_CHUNK, N - start)
            e, X = final(start, count)
            w.write(start, {"b": e.paths_b, "bh": e.paths_bh, "x": X})
        w.close()
    side = dict(meta, driver=meta["method"], **result.sidecar(spec))
    if cfg.get("out") and cfg["out"] != "-":
        with atomic_output(cfg["out"] + ".sidecar.json") as fh:
            fh.write(json.dumps(side, indent=2, sort_keys=True) + "\n")
    else:
        print(json.dumps(side, sort_keys=True), file=stderr)
    print(f"{result.method}: k_used={result.k_used} residual={result.residual:.3e}",
          file=stderr)
    return EXIT_OK


def _experiment_configs(cfg):
    name = cfg.get("experiment")
    if not name:
        raise ConfigurationError("verify needs --experiment NAME or --experiment all")
    extra = dict(cfg.get("experiment_config") or {})
    if cfg.get("spec"):
        extra["spec"] = _read_json(cfg["spec"], "spec file")
        extra["T"] = float(extra["spec"].get("T", cfg["T"]))
    base = mh.ExperimentConfig.from_dict(dict(
        {"H": cfg["hurst"], "T": cfg["T"], "n": cfg["n"], "n_paths": cfg["paths"],
         "seed": cfg["seed"], "method": cfg.get("method"), "threads": cfg["threads"]}, **extra))
    if name == "all":
        hursts = (cfg["hurst"],) if cfg["hurst_given"] else mh.HURST_SET
        return mh.default_suite(hursts, base)
    if name not in mh.EXPERIMENTS:
        raise UsageError(f"unknown experiment {name!r}; choose from "
                         f"{', '.join(sorted(mh.EXPERIMENTS))} or all")
    return [(name, base)]


def _summary_line(d):
    return (f"{d['verdict'].upper():12s} {d['name']:16s} H={d['H']:<5g} "
            f"estimate={d['estimate']:.6g} se={d['se']:.3g} target={d['target']:.6g} "
            f"margin={d['margin']:.3g}")


def _write_reports(cfg, reports, fmt, stdout):
    text = mh.reports_to_csv(reports) if fmt == "csv" else mh.reports_to_json(reports)
    with atomic_output(cfg.get("out"), stream=stdout) as fh:
        fh.write(text)


def _exit_for(dicts, stderr):
    verdicts = [d["verdict"] for d in dicts]
    if "fail" in verdicts:
        return EXIT_FAIL
    if "inconclusive" in verdicts:
        print("some checks were inconclusive: increase --paths", file=stderr)
    return EXIT_OK


def cmd_verify(cfg, stdout, stderr):
    plan = _experiment_configs(cfg)
    fmt = cfg["format"] if cfg["format"] != "bin" else None
    if fmt is None:
        raise ConfigurationError("reports are written as csv or json")
    if cfg.get("out") and "format" not in cfg.get("_flags", ()) \
            and cfg["out"].endswith(".json"):
        fmt = "json"
    reports = []
    for name, c in plan:
        r = mh.run_experiment(name, c)
        reports.append(r)
        print(_summary_line(r.as_dict()), file=stderr)
    _write_reports(cfg, reports, fmt, stdout)
    return _exit_for([r.as_dict() for r in reports], stderr)


def cmd_report(cfg, stdout, stderr):
    data = _read_json(cfg["input"], "report file")
    if not isinstance(data, list):
        raise ConfigurationError("a report file holds a JSON array")
    for d in data:
        print(_summary_line(d), file=stderr)
    code = _exit_for(data, stderr)
    if cfg.get("rerun"):
        mismatched = 0
        for d in data:
            cfg_d = dict(d["config"])
            if cfg.get("threads") is not None:
                cfg_d["threads"] = cfg["threads"]
            again = mh.run_experiment(d["name"], mh.ExperimentConfig.from_dict(cfg_d))
            same = json.dumps(again.as_dict(), sort_keys=True) == json.dumps(d, sort_keys=True)
            print(f"{'identical' if same else 'DIFFERENT':10s} {d['name']} H={d['H']}",
                  file=stderr)
            mismatched += not same
        if mismatched:
            code = EXIT_FAIL
    fmt = cfg.get("format")
    if fmt or cfg.get("out"):
        if fmt == "csv" or (fmt is None and str(cfg.get("out")).endswith(".csv")):
            text = _csv_from_dicts(data)
        else:
            text = json.dumps(data, indent=2, sort_keys=True) + "\n"
        with atomic_output(cfg.get("out"), stream=stdout) as fh:
            fh.write(text)
    return code


def _csv_from_dicts(dicts):
    lines = [",".join(mh.CSV_FIELDS)]
    for d in dicts:
        lines.append(",".join(str(x) for x in (
            d["name"], repr(d["H"]), repr(d["estimate"]), repr(d["se"]), repr(d["target"]),
            d["mode"], d["pass"], d["verdict"], repr(d["margin"]), d["seed"], d["n_paths"],
            repr(d["grid"]["T"]), d["grid"]["n"])))
    return "\n".join(lines) + "\n"


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "verify": cmd_verify, "report": cmd_report}


def main(argv=None, stdout=None, stderr=None, environ=None):
    """Run the command line and return the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.command == "report":
            cfg = {"command": "report", **{k: v for k, v in vars(args).items()}}
        else:
            cfg = resolve(args, environ)
            cfg["T_given"] = args.T is not None
            cfg["_flags"] = {k for k, v in vars(args).items() if v is not None}
            validate(cfg)
        return COMMANDS[cfg["command"]](cfg, stdout, stderr)
    except (UsageError, ConfigurationError, DomainError, ContractError) as exc:
        print(f"fwn: error: {exc}", file=stderr)
        return EXIT_USAGE
    except (NumericError, AccuracyError, DivergenceError, FloatingPointError) as exc:
        print(f"fwn: numerical failure: {exc}", file=stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"fwn: error: {exc}", file=stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
