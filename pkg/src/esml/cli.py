"""Command-line front end.

Usage::

    esml <subcommand> --config PATH [--jobs N] [--out DIR]

Exit status: 0 on success, 1 on invalid configuration or arguments, 2 on
numerical failure. Failures also write ``error.json`` to the output
directory. Artifacts are written atomically and contain no timestamps, so
identical inputs give byte-identical files whatever ``--jobs`` is.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .analysis import (
    DiagnosticsReport,
    delta_infinity,
    drift_curve,
    ergodicity_diagnostics,
    exp_moment,
    find_beta,
    kernel_continuity_probe,
    transition_prob,
)
from .analysis.diagnostics import _clean
from .config import FORMAT_VERSION, SUBCOMMANDS, parse_config
from .dist_core.copulas import ArchimedeanCopula, m_monotone_check
from .dist_core.validation import validate_copula
from .errors import ConfigError, EsmlError, NumericError
from .es_sim import STREAM_DERIVATION, run_chain, write_trace_csv

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


def provenance(cfg, subcommand):
    return {"tool": "esml", "version": __version__, "format_version": FORMAT_VERSION,
            "subcommand": subcommand, "config_hash": cfg.config_hash,
            "seed": cfg.es.seed, "stream_derivation": STREAM_DERIVATION}


def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_json(out, name, cfg, subcommand, body):
    path = os.path.join(out, name)
    atomic_write(path, dump_json({"provenance": provenance(cfg, subcommand), **body}))
    return path


def _interval(pair):
    a, b = pair
    return float(a), float("inf") if b is None else float(b)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg, out, jobs):
    sec = cfg.section("simulate")
    traces = run_chain(cfg.es, sec["T"], sec["replicas"], jobs=jobs, record_x=sec["record_x"])
    files = []
    for tr in traces:
        buf = io.StringIO()
        prov = {**provenance(cfg, "simulate"), "replica": tr.replica}
        write_trace_csv(tr, buf, prov, include_x=sec["record_x"])
        name = f"trace_r{tr.replica:04d}.csv"
        atomic_write(os.path.join(out, name), buf.getvalue())
        files.append(name)
    _write_json(out, "simulate.json", cfg, "simulate",
                {"T": sec["T"], "replicas": sec["replicas"], "files": files,
                 "config": cfg.es.to_dict()})


def cmd_kernel(cfg, out, jobs):
    sec, es, spec = cfg.section("kernel"), cfg.es, cfg.quadrature
    rows, probes = [], []
    mass_err = 0.0
    for delta in sec["deltas"]:
        for pair in sec["intervals"]:
            a, b = _interval(pair)
            p = transition_prob(es.movement, es.n, es.lam, delta, (a, b), spec)
            rows.append({"delta": delta, "interval": [a, None if b == float("inf") else b],
                         "probability": p})
        full = transition_prob(es.movement, es.n, es.lam, delta, (0.0, float("inf")), spec)
        mass_err = max(mass_err, abs(full - 1.0))
        for pair in sec["intervals"]:
            a, b = _interval(pair)
            eps = [e for e in sec["eps"] if delta - e > 0]
            probes.append(kernel_continuity_probe(es.movement, es.n, es.lam, delta, (a, b),
                                                  eps, spec).to_dict())
    _write_json(out, "kernel.json", cfg, "kernel",
                {"probabilities": rows, "kernel_mass_error": mass_err,
                 "continuity": probes, "quadrature": spec.to_dict()})


def _drift_grid(sec):
    return np.linspace(sec["delta_min"], sec["delta_max"], sec["points"]).tolist()


def cmd_drift(cfg, out, jobs):
    sec, es, spec = cfg.section("drift"), cfg.es, cfg.quadrature
    grid = _drift_grid(sec)
    rng = np.random.default_rng(spec.mc_seed)
    curves = [drift_curve(es.movement, es.n, es.lam, a, grid, spec, rng) for a in sec["alphas"]]
    negative = [c.alpha for c in curves if np.all(c.ratios < 0)]
    _write_json(out, "drift.json", cfg, "drift",
                {"grid": grid, "curves": [c.to_dict() for c in curves],
                 "largest_alpha_with_negative_drift": max(negative) if negative else None,
                 "quadrature": spec.to_dict()})


def cmd_delta_inf(cfg, out, jobs):
    sec, es, spec = cfg.section("delta-inf"), cfg.es, cfg.quadrature
    res = delta_infinity(es.movement, es.n, es.lam, spec)
    moments = []
    for a in sec["moment_alphas"]:
        try:
            moments.append({"alpha": a, "value": exp_moment(es.movement, es.n, a, spec),
                            "finite": True})
        except NumericError as err:
            moments.append({"alpha": a, "value": None, "finite": False, "reason": str(err)})
    _write_json(out, "delta_inf.json", cfg, "delta-inf",
                {**res.to_dict(), "positive": res.estimate > 0, "exp_moments": moments,
                 "quadrature": spec.to_dict()})


def cmd_validate_copula(cfg, out, jobs):
    sec = cfg.section("validate-copula")
    rep = validate_copula(cfg.copula, sec["grid"], sec["step"]).to_dict()
    if isinstance(cfg.copula, ArchimedeanCopula):
        rep["m_monotone"] = m_monotone_check(cfg.copula.generator,
                                             sec["monotone_order"]).to_dict()
    _write_json(out, "copula_report.json", cfg, "validate-copula", rep)


def cmd_diagnose(cfg, out, jobs):
    sec, es, spec = cfg.section("diagnose"), cfg.es, cfg.quadrature
    M, n, lam = es.movement, es.n, es.lam
    dinf = delta_infinity(M, n, lam, spec)
    beta = find_beta(M, n, lam, spec, grid=np.geomspace(1e-3, 100.0, sec["beta_points"]),
                     limit=dinf.limit_gain)
    grid = np.linspace(2.0, 10.0, sec["drift_points"]).tolist()
    curve = drift_curve(M, n, lam, sec["alpha"], grid, spec)
    mass_err = max(abs(transition_prob(M, n, lam, d, (0.0, float("inf")), spec) - 1.0)
                   for d in (0.1, 1.0, 5.0))
    traces = run_chain(es, sec["T"], sec["replicas"], jobs=jobs)
    erg = ergodicity_diagnostics(traces, sec["alpha"], window=sec["window"],
                                 ks_threshold=sec["ks_threshold"])
    rep = DiagnosticsReport((dinf.estimate, dinf.ci), beta.beta, curve, mass_err,
                            erg.ks_window, (erg.rate_fit.rate, erg.rate_fit.r2),
                            {"delta_infinity": dinf.to_dict(), "beta": beta.to_dict(),
                             "ergodicity": erg.to_dict(), "quadrature": spec.to_dict(),
                             "T": sec["T"], "replicas": sec["replicas"]})
    _write_json(out, "diagnostics.json", cfg, "diagnose", rep.to_dict())


COMMANDS = {"simulate": cmd_simulate, "kernel": cmd_kernel, "drift": cmd_drift,
            "delta-inf": cmd_delta_inf, "validate-copula": cmd_validate_copula,
            "diagnose": cmd_diagnose}


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    p = argparse.ArgumentParser(prog="esml", description=__doc__.split("\n\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for replicas")
    p.add_argument("--out", default="esml_out", help="output directory")
    p.add_argument("--version", action="version", version=f"esml {__version__}")
    return p


def _error_record(err, code):
    rec = {"error": type(err).__name__, "message": str(err), "exit_code": code}
    if isinstance(err, ConfigError):
        rec["violations"] = err.violations
    for attr in ("generation", "replica", "count"):
        if hasattr(err, attr):
            rec[attr] = getattr(err, attr)
    return rec


def run_subcommand(cfg, name, out, jobs=1):
    """Run one subcommand; returns the exit status."""
    COMMANDS[name](cfg, out, jobs)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("esml: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = parse_config(args.config, args.subcommand)
        return run_subcommand(cfg, args.subcommand, args.out, args.jobs)
    except EsmlError as err:
        code = EXIT_NUMERIC if isinstance(err, NumericError) else EXIT_INVALID
        rec = _error_record(err, code)
        print(json.dumps(rec, sort_keys=True), file=sys.stderr)
        try:
            atomic_write(os.path.join(args.out, "error.json"), dump_json(rec))
        except OSError:
            pass
        return code


if __name__ == "__main__":
    sys.exit(main())
