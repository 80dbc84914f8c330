"""Command-line front end.

Five subcommands cover the analysis workflows: `chernoff` summarizes one
outcome pair, `errors` tabulates the analytic error-rate curves,
`advantage` compares soft against binarized decoding (single pair or a
parameter grid), `simulate` runs the Monte Carlo engine, and `collapse`
overlays several simulated models in reduced coordinates.

Inputs come from a TOML config file with one typed section per concern;
unknown keys are rejected so a typo cannot silently fall back to a
default. Results go to stdout or --out as CSV or JSON with floats
printed to 12 significant digits. Monte Carlo runs also emit a manifest
with everything needed to reproduce the run. Exit status: 0 on success
(warnings go to stderr), 1 on numerical failure, 2 on bad configs or
usage.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
import warnings

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__, chernoff as chern, distributions as dist
from . import error_model, hmm

__all__ = ["main", "ConfigError"]

_MISSING = object()


class ConfigError(ValueError):
    """A config file or flag value failed validation."""


# ---------------------------------------------------------------------------
# config plumbing


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    try:
        config = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path!r}: {exc}") from exc
    digest = hashlib.sha256(raw).hexdigest()
    return config, os.path.dirname(os.path.abspath(path)), digest


def _check_keys(table, allowed, where):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(
            f"unknown key(s) in [{where}]: {', '.join(unknown)}; "
            f"allowed: {', '.join(sorted(allowed))}")


def _get_table(config, name):
    table = config[name]
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    return table


def _get(table, key, where, kind, default=_MISSING):
    if key not in table:
        if default is _MISSING:
            raise ConfigError(f"missing required key '{key}' in [{where}]")
        return default
    value = table[key]
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{key}' in [{where}] must be a number")
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{key}' in [{where}] must be an integer")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"'{key}' in [{where}] must be true or false")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"'{key}' in [{where}] must be a string")
        return value
    if kind == "number-list":
        if (not isinstance(value, list) or not value
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       for v in value)):
            raise ConfigError(
                f"'{key}' in [{where}] must be a nonempty list of numbers")
        return [float(v) for v in value]
    if kind == "int-list":
        if (not isinstance(value, list) or not value
                or any(isinstance(v, bool) or not isinstance(v, int)
                       for v in value)):
            raise ConfigError(
                f"'{key}' in [{where}] must be a nonempty list of integers")
        return list(value)
    raise AssertionError(kind)


_FAMILIES = {
    "gaussian": ("r",),
    "poissonian": ("mu_plus", "mu_minus"),
    "binary": ("eps_plus", "eps_minus"),
    "cauchy": ("gamma",),
    "gaussian-conversion": ("r", "eta"),
    "gaussian-mixture": ("weights_plus", "means_plus", "sigmas_plus",
                         "weights_minus", "means_minus", "sigmas_minus"),
    "empirical": ("csv_plus", "csv_minus", "floor", "lambda_clamp"),
}


def build_pair(table, base_dir, where="pair"):
    """Construct an OutcomePair from a config table (fail-closed)."""
    family = _get(table, "family", where, "str")
    if family not in _FAMILIES:
        raise ConfigError(
            f"unknown family {family!r} in [{where}]; known: "
            f"{', '.join(sorted(_FAMILIES))}")
    _check_keys(table, ("family",) + _FAMILIES[family], where)
    try:
        if family == "gaussian":
            return dist.gaussian_pair(_get(table, "r", where, "number"))
        if family == "poissonian":
            return dist.poissonian_pair(_get(table, "mu_plus", where, "number"),
                                        _get(table, "mu_minus", where, "number"))
        if family == "binary":
            return dist.binary_pair(_get(table, "eps_plus", where, "number"),
                                    _get(table, "eps_minus", where, "number"))
        if family == "cauchy":
            return dist.cauchy_pair(_get(table, "gamma", where, "number"))
        if family == "gaussian-conversion":
            return dist.gaussian_conversion_pair(
                _get(table, "r", where, "number"),
                _get(table, "eta", where, "number"))
        if family == "gaussian-mixture":
            parts = [_get(table, k, where, "number-list")
                     for k in _FAMILIES["gaussian-mixture"]]
            return dist.gaussian_mixture_pair(*parts)
        path_plus = _get(table, "csv_plus", where, "str")
        path_minus = _get(table, "csv_minus", where, "str")
        kwargs = {}
        if "floor" in table:
            kwargs["floor"] = _get(table, "floor", where, "number")
        if "lambda_clamp" in table:
            kwargs["lambda_clamp"] = _get(table, "lambda_clamp", where, "number")
        return dist.empirical_pair_from_csv(
            os.path.join(base_dir, path_plus),
            os.path.join(base_dir, path_minus), **kwargs)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"invalid [{where}] config: {exc}") from exc


def _n_values_real(table, where):
    """Repetition counts for analytic curves: explicit list or a range."""
    if "n_values" in table:
        _check_extra_range_keys(table, where, forbidden=("n_min", "n_max", "n_count", "spacing"))
        n = np.asarray(_get(table, "n_values", where, "number-list"))
    else:
        lo = _get(table, "n_min", where, "number")
        hi = _get(table, "n_max", where, "number")
        count = _get(table, "n_count", where, "int")
        spacing = _get(table, "spacing", where, "str", default="linear")
        if spacing not in ("linear", "log"):
            raise ConfigError(f"'spacing' in [{where}] must be linear or log")
        if count < 2 or not 0 < lo < hi:
            raise ConfigError(f"[{where}] range needs 0 < n_min < n_max and n_count >= 2")
        n = np.linspace(lo, hi, count) if spacing == "linear" else np.geomspace(lo, hi, count)
    if np.any(n <= 0):
        raise ConfigError(f"repetition counts in [{where}] must be positive")
    return n


def _check_extra_range_keys(table, where, forbidden):
    present = [k for k in forbidden if k in table]
    if present:
        raise ConfigError(
            f"[{where}] mixes 'n_values' with range key(s): {', '.join(present)}")


def _n_values_int(table, where):
    """Prefix lengths for simulation: explicit integer list or 1..n_max."""
    if "n_values" in table and "n_max" in table:
        raise ConfigError(f"[{where}] sets both 'n_values' and 'n_max'")
    if "n_values" in table:
        n = _get(table, "n_values", where, "int-list")
    elif "n_max" in table:
        n_max = _get(table, "n_max", where, "int")
        if n_max < 1:
            raise ConfigError(f"'n_max' in [{where}] must be at least 1")
        n = list(range(1, n_max + 1))
    else:
        raise ConfigError(f"[{where}] needs 'n_values' or 'n_max'")
    if any(v < 1 for v in n):
        raise ConfigError(f"prefix lengths in [{where}] must be >= 1")
    return n


def _mc_params(table, where, args):
    """Monte Carlo size/seed/threads with flag overrides."""
    m = args.m if args.m is not None else _get(table, "m", where, "int",
                                               default=hmm.DEFAULT_M)
    seed = args.seed if args.seed is not None else _get(table, "seed", where,
                                                        "int", default=0)
    threads = args.threads if args.threads is not None else _get(
        table, "threads", where, "int", default=1)
    if m < 1:
        raise ConfigError("m must be at least 1")
    if seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    return m, seed, threads


# ---------------------------------------------------------------------------
# emission


def _fmt(x):
    return f"{x:.12g}"


def _csv_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _fmt(float(value))
    return str(value)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    """Plain-python copy with floats rounded to 12 significant digits."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(_fmt(x)) if math.isfinite(x) else x
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    return obj


def _json_text(obj):
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def _emit(args, meta, header, rows, manifest):
    if args.format == "csv":
        if header is None:
            header, rows = list(meta), [list(meta.values())]
        text = _csv_text(header, rows)
    else:
        obj = dict(meta or {})
        if rows is not None:
            obj["rows"] = [dict(zip(header, row)) for row in rows]
        text = _json_text(obj)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if manifest is not None:
        if args.out:
            with open(args.out + ".manifest.json", "w") as fh:
                fh.write(_json_text(manifest))
        else:
            print("manifest: " + json.dumps(_jsonable(manifest)),
                  file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommand runners: each returns (meta, header, rows, manifest)


def _run_chernoff(config, args, base_dir, digest):
    _check_keys(config, ("pair", "chernoff"), "top level")
    if "pair" not in config:
        raise ConfigError("missing required [pair] section")
    pair = build_pair(_get_table(config, "pair"), base_dir)
    opts = _get_table(config, "chernoff") if "chernoff" in config else {}
    _check_keys(opts, ("s_tol",), "chernoff")
    s_tol = args.tol if args.tol is not None else _get(opts, "s_tol",
                                                       "chernoff", "number",
                                                       default=1e-10)
    summary = chern.chernoff_information(pair, s_tol=s_tol)
    return summary.to_json_dict(), None, None, None


def _run_errors(config, args, base_dir, digest):
    _check_keys(config, ("pair", "summary", "errors"), "top level")
    if ("pair" in config) == ("summary" in config):
        raise ConfigError("provide exactly one of [pair] or [summary]")
    if "errors" not in config:
        raise ConfigError("missing required [errors] section")
    opts = _get_table(config, "errors")
    _check_keys(opts, ("n_values", "n_min", "n_max", "n_count", "spacing",
                       "include_bound", "s_tol"), "errors")
    n = _n_values_real(opts, "errors")
    include_bound = _get(opts, "include_bound", "errors", "bool", default=False)

    if "pair" in config:
        pair = build_pair(_get_table(config, "pair"), base_dir)
        s_tol = args.tol if args.tol is not None else _get(
            opts, "s_tol", "errors", "number", default=1e-10)
        summary = chern.chernoff_information(pair, s_tol=s_tol)
    else:
        table = _get_table(config, "summary")
        _check_keys(table, ("c", "alpha", "s_star"), "summary")
        try:
            summary = error_model.summary_from_values(
                _get(table, "c", "summary", "number"),
                _get(table, "alpha", "summary", "number"),
                _get(table, "s_star", "summary", "number"))
        except ValueError as exc:
            raise ConfigError(f"invalid [summary] config: {exc}") from exc

    ansatz = error_model.gaussian_ansatz(summary.c, n)
    saddle = error_model.saddle_point(summary, n)
    header = ["n", "gaussian_ansatz", "saddle_avg", "saddle_plus",
              "saddle_minus", "fallback"]
    columns = [n, ansatz.e_avg, saddle.e_avg, saddle.e_plus, saddle.e_minus,
               saddle.fallback]
    if include_bound:
        header.append("chernoff_bound")
        columns.append(error_model.chernoff_upper_bound(summary.c, n).e_avg)
    rows = [[float(col[i]) if not isinstance(col[i], (bool, np.bool_))
             else bool(col[i]) for col in columns] for i in range(n.size)]
    meta = {"C": summary.c, "alpha": summary.alpha, "s_star": summary.s_star}
    return meta, header, rows, None


def _grid_axis(table, prefix, where, lo_open):
    lo = _get(table, f"{prefix}_min", where, "number")
    hi = _get(table, f"{prefix}_max", where, "number")
    count = _get(table, f"{prefix}_count", where, "int")
    if count < 1 or not lo <= hi or lo < 0 or (lo_open and lo <= 0):
        raise ConfigError(f"invalid {prefix} range in [{where}]")
    if count == 1 and lo != hi:
        raise ConfigError(f"{prefix}_count = 1 needs {prefix}_min == {prefix}_max")
    return lo, hi, count


def _run_advantage(config, args, base_dir, digest):
    _check_keys(config, ("pair", "grid"), "top level")
    if ("pair" in config) == ("grid" in config):
        raise ConfigError("provide exactly one of [pair] or [grid]")

    if "pair" in config:
        if args.format is None:
            args.format = "json"
        pair = build_pair(_get_table(config, "pair"), base_dir)
        report = error_model.advantage(pair)
        meta = {"C": report.c, "C_b": report.c_b, "advantage": report.advantage,
                "eps_plus": report.eps_plus, "eps_minus": report.eps_minus,
                "s_star_b": report.s_star_b,
                "c_b_infinite": report.c_b_infinite}
        return meta, None, None, None

    if args.format is None:
        args.format = "csv"
    table = _get_table(config, "grid")
    _check_keys(table, ("eps_g_min", "eps_g_max", "eps_g_count",
                        "eta_min", "eta_max", "eta_count", "spacing"), "grid")
    spacing = _get(table, "spacing", "grid", "str", default="log")
    if spacing not in ("linear", "log"):
        raise ConfigError("'spacing' in [grid] must be linear or log")
    eg_lo, eg_hi, eg_n = _grid_axis(table, "eps_g", "grid", lo_open=True)
    et_lo, et_hi, et_n = _grid_axis(table, "eta", "grid",
                                    lo_open=spacing == "log")
    space = np.geomspace if spacing == "log" else np.linspace
    grid = error_model.advantage_grid(space(eg_lo, eg_hi, eg_n),
                                      space(et_lo, et_hi, et_n))
    header = ["eps_g", "eta", "r", "C", "C_b", "advantage"]
    return None, header, list(grid.rows()), None


def _run_simulate(config, args, base_dir, digest):
    _check_keys(config, ("pair", "simulate"), "top level")
    for name in ("pair", "simulate"):
        if name not in config:
            raise ConfigError(f"missing required [{name}] section")
    pair = build_pair(_get_table(config, "pair"), base_dir)
    opts = _get_table(config, "simulate")
    _check_keys(opts, ("p_relax", "p_excite", "m", "seed", "threads",
                       "n_values", "n_max"), "simulate")
    p_relax = _get(opts, "p_relax", "simulate", "number", default=0.0)
    p_excite = _get(opts, "p_excite", "simulate", "number", default=0.0)
    n = _n_values_int(opts, "simulate")
    m, seed, threads = _mc_params(opts, "simulate", args)
    try:
        spec = hmm.HmmSpec(pair, p_relax, p_excite, n_max=max(n))
    except ValueError as exc:
        raise ConfigError(f"invalid [simulate] config: {exc}") from exc

    summary = chern.chernoff_information(pair)
    t0 = time.perf_counter()
    est = hmm.monte_carlo(spec, m, n, seed=seed, threads=threads,
                          chernoff_c=summary.c)
    wall = time.perf_counter() - t0
    header = ["n", "e_plus", "delta_plus", "e_minus", "delta_minus",
              "e_avg", "delta_avg"]
    rows = [[int(est.n_values[i]), float(est.e_plus[i]),
             float(est.delta_plus[i]), float(est.e_minus[i]),
             float(est.delta_minus[i]), float(est.e_avg[i]),
             float(est.delta_avg[i])] for i in range(est.n_values.size)]
    manifest = {
        "subcommand": "simulate",
        "config_path": os.path.abspath(args.config),
        "config_sha256": digest,
        "m": est.m, "seed": est.seed, "threads": threads,
        "p_relax": p_relax, "p_excite": p_excite,
        "n_values": [int(v) for v in est.n_values],
        "zero_error_upper_bound": est.zero_upper_bound,
        "wall_time_s": wall,
        "chernoff": summary.to_json_dict(),
    }
    return None, header, rows, manifest


def _run_collapse(config, args, base_dir, digest):
    _check_keys(config, ("collapse", "model"), "top level")
    for name in ("collapse", "model"):
        if name not in config:
            raise ConfigError(f"missing required [{name}] section(s)")
    opts = _get_table(config, "collapse")
    _check_keys(opts, ("m", "seed", "threads", "n_values", "n_max"), "collapse")
    n = _n_values_int(opts, "collapse")
    m, seed, threads = _mc_params(opts, "collapse", args)

    models = config["model"]
    if not isinstance(models, list) or not models or not all(
            isinstance(t, dict) for t in models):
        raise ConfigError("[[model]] must appear at least once")
    entries = []
    for k, table in enumerate(models):
        where = f"model.{k}"
        _check_keys(table, ("label", "p_relax", "p_excite", "pair"), where)
        if "pair" not in table or not isinstance(table["pair"], dict):
            raise ConfigError(f"missing required [{where}.pair] table")
        label = _get(table, "label", where, "str", default=f"model-{k}")
        pair = build_pair(table["pair"], base_dir, where=f"{where}.pair")
        p_relax = _get(table, "p_relax", where, "number", default=0.0)
        p_excite = _get(table, "p_excite", where, "number", default=0.0)
        try:
            spec = hmm.HmmSpec(pair, p_relax, p_excite, n_max=max(n))
        except ValueError as exc:
            raise ConfigError(f"invalid [{where}] config: {exc}") from exc
        entries.append(hmm.CollapseEntry(label, spec,
                                         chern.chernoff_information(pair)))

    t0 = time.perf_counter()
    result = hmm.universality_collapse(entries, m, n, seed=seed,
                                       threads=threads)
    wall = time.perf_counter() - t0
    header = ["label", "C", "c_over_p", "n", "cn", "e_avg", "ln_e", "delta_ln"]
    rows = []
    for curve in result.curves:
        for i in range(curve.n_values.size):
            rows.append([curve.label, curve.c, curve.c_over_p,
                         int(curve.n_values[i]), float(curve.cn[i]),
                         float(curve.e_avg[i]), float(curve.ln_e[i]),
                         float(curve.delta_ln[i])])
    manifest = {
        "subcommand": "collapse",
        "config_path": os.path.abspath(args.config),
        "config_sha256": digest,
        "m": m, "seed": seed, "threads": threads,
        "n_values": [int(v) for v in n],
        "wall_time_s": wall,
        "models": [{"label": c.label, "C": c.c, "c_over_p": c.c_over_p}
                   for c in result.curves],
        "comparisons": [{"label_a": cmp.label_a, "label_b": cmp.label_b,
                         "points": int(cmp.cn.size),
                         "max_deviation": cmp.max_deviation}
                        for cmp in result.comparisons],
        "max_deviation": result.max_deviation,
    }
    meta = {"max_deviation": result.max_deviation}
    return meta if args.format == "json" else None, header, rows, manifest


_RUNNERS = {
    "chernoff": _run_chernoff,
    "errors": _run_errors,
    "advantage": _run_advantage,
    "simulate": _run_simulate,
    "collapse": _run_collapse,
}


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="qndreadout",
        description="Chernoff-information analysis and Monte Carlo "
                    "validation of repetitive qubit readout.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text, fmt_default, tol=False, mc=False):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, metavar="PATH",
                        help="TOML config file")
        sp.add_argument("--out", metavar="PATH",
                        help="output file (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"),
                        default=fmt_default)
        if tol:
            sp.add_argument("--tol", type=float, metavar="REAL",
                            help="optimizer tolerance on s*")
        if mc:
            sp.add_argument("--seed", type=int, metavar="U64")
            sp.add_argument("--m", type=int, metavar="COUNT",
                            help="trajectories per initial state")
            sp.add_argument("--threads", type=int, metavar="K")
        else:
            sp.set_defaults(seed=None, m=None, threads=None)
        if not tol:
            sp.set_defaults(tol=None)
        return sp

    add("chernoff", "Chernoff summary of one outcome pair", "json", tol=True)
    add("errors", "analytic error-rate curves", "csv", tol=True)
    add("advantage", "soft- versus hard-decoding comparison", None)
    add("simulate", "Monte Carlo error rates", "csv", mc=True)
    add("collapse", "overlay models in reduced coordinates", "csv", mc=True)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        config, base_dir, digest = _load_config(args.config)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            meta, header, rows, manifest = _RUNNERS[args.subcommand](
                config, args, base_dir, digest)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.format is None:
        args.format = "csv" if rows is not None else "json"
    try:
        _emit(args, meta, header, rows, manifest)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
