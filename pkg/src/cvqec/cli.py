"""Command-line front end: sweeps and verification reports as CSV/JSON.

Settings are resolved in the order: command-line flag, environment variable
``CVQEC_<KEY>`` (upper case, dashes as underscores), config file, built-in
default. The config file is INI; keys live in ``[defaults]`` or in a section
named after the command, the latter winning::

    [defaults]
    eta = 0.9

    [fig2]
    chi = 0.5
    points = 50

Every output starts with ``#`` lines recording the effective settings.

Exit codes: 0 success, 1 a verification suite failed, 2 invalid parameters,
3 the simulation exceeds its memory budget.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    CvqecError,
    DomainError,
    GridTooCoarseError,
    InvalidParameterError,
    ResourceError,
    UnphysicalOutputError,
)
from .nla import (
    EnsembleSpec,
    effective_epr_params,
    ensemble_success,
    gaussian_ensemble_bound,
    lossy_epr_components,
    success_bound,
    verify_epr_identity,
)
from .protocol import (
    ProtocolConfig,
    best_transmission,
    corrected_transmission,
    end_to_end_verify,
    fig2_curve,
    fig3_curve,
    fig3_window,
    gain_window,
    log_sweep,
    max_gain,
)
from .states import EprParams
from .teleport import BellGrid, classical_gain, lossy_gain, teleport_channel

ENV_PREFIX = "CVQEC_"
FLOAT_FMT = ".12g"

FIG2_HEADER = "G,eta_ec,p_bound"
FIG3_HEADER = "chi,G,eta_ec,p_success,fidelity"

# Built-in defaults per command; None means "derived at run time".
DEFAULTS = {
    "fig2": {"eta": 0.9, "chi": 0.5, "points": 50, "g_start": None, "g_stop": None,
             "scale": "log"},
    "fig3": {"eta": 0.01, "chis": "0.33,0.6,0.82", "paths": 2, "points": 8,
             "g_start": 1.0, "g_stop": None, "scale": "log", "f_min": 0.995,
             "in_dim": 4, "workers": 1},
    "verify": {"eta": 0.5, "chi": 0.5, "gain": 1.5, "dim": 14, "grid_extent": 6.0,
               "grid_step": 0.25, "teleport_dim": 10, "in_dim": 4, "seed": 0,
               "samples": 10000, "rel_tol": 0.02, "fid_tol": 0.999, "coarse_grid": False},
    "epr-params": {"chi": None, "V": None},
    "bounds": {"eta": 0.9, "chi": 0.5, "gain": 2.0, "V_t": 2.0},
}

TYPES = {
    "eta": float, "chi": float, "gain": float, "points": int, "g_start": float,
    "g_stop": float, "scale": str, "chis": str, "paths": int, "f_min": float,
    "in_dim": int, "workers": int, "dim": int, "grid_extent": float, "grid_step": float,
    "teleport_dim": int, "seed": int, "samples": int, "rel_tol": float, "fid_tol": float,
    "coarse_grid": lambda s: str(s).strip().lower() in ("1", "true", "yes", "on"),
    "V": float, "V_t": float,
}

VERIFY_SCHEMA = {
    "type": "object",
    "required": ["command", "config", "passed", "suites"],
    "properties": {
        "command": {"const": "verify"},
        "config": {"type": "object"},
        "passed": {"type": "boolean"},
        "failed": {"type": "array", "items": {"type": "string"}},
        "suites": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["passed", "status", "measured", "tolerances"],
                "properties": {
                    "passed": {"type": "boolean"},
                    "status": {"enum": ["ok", "failed", "grid-too-coarse", "error"]},
                    "measured": {"type": "object"},
                    "tolerances": {"type": "object"},
                    "message": {"type": "string"},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class SweepSpec:
    start: float | None
    stop: float | None
    count: int
    scale: str = "log"

    def __post_init__(self):
        if self.count < 1:
            raise InvalidParameterError("sweep count must be >= 1")
        if self.scale not in ("log", "linear"):
            raise InvalidParameterError(f"sweep scale must be log or linear, got {self.scale!r}")

    def values(self, start=None, stop=None):
        lo = self.start if self.start is not None else start
        hi = self.stop if self.stop is not None else stop
        if self.scale == "log":
            return log_sweep(lo, hi, self.count)
        g = np.linspace(lo, hi, self.count)
        if self.count > 1:
            g[0], g[-1] = lo, hi
        return g


@dataclass(frozen=True)
class RunConfig:
    """Effective settings of one command, after all sources are merged."""

    command: str
    params: dict = field(default_factory=dict)
    output: str | None = None

    def get(self, key):
        return self.params[key]

    def sweep(self) -> SweepSpec:
        p = self.params
        return SweepSpec(p.get("g_start"), p.get("g_stop"), p["points"], p["scale"])

    def provenance(self) -> list[str]:
        lines = [f"# cvqec {self.command}"]
        for k in sorted(self.params):
            lines.append(f"# {k}={_fmt_value(self.params[k])}")
        return lines


def _fmt(x) -> str:
    return format(float(x), FLOAT_FMT)


def _fmt_value(v):
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


# -- configuration -------------------------------------------------------------


def _read_config_file(path, command):
    if not path:
        return {}
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if not parser.read(path):
        raise InvalidParameterError(f"cannot read config file {path}")
    out = {}
    for section in ("defaults", command):
        if parser.has_section(section):
            out.update({k.replace("-", "_"): v for k, v in parser.items(section)})
    return out


def _read_env(keys, environ):
    out = {}
    for k in keys:
        name = ENV_PREFIX + k.upper()
        if name in environ:
            out[k] = environ[name]
    return out


def resolve_config(command, flags: dict, config_path=None, environ=None, output=None) -> RunConfig:
    """Merge defaults, config file, environment and flags (highest last)."""
    environ = os.environ if environ is None else environ
    defaults = DEFAULTS[command]
    params = dict(defaults)
    layered = [_read_config_file(config_path, command), _read_env(defaults, environ)]
    for layer in layered:
        for k, v in layer.items():
            if k not in defaults:
                raise InvalidParameterError(f"unknown setting {k!r} for {command}")
            params[k] = v
    params.update({k: v for k, v in flags.items() if v is not None and k in defaults})
    for k, v in params.items():
        if v is not None and isinstance(v, str) and TYPES[k] is not str:
            try:
                params[k] = TYPES[k](v)
            except ValueError as exc:
                raise InvalidParameterError(f"bad value for {k}: {v!r}") from exc
    return RunConfig(command, params, output)


# -- commands ------------------------------------------------------------------


def cmd_fig2(cfg: RunConfig) -> str:
    """Success bound versus corrected transmission across the useful gain window."""
    eta, chi = cfg.get("eta"), cfg.get("chi")
    lo, hi = gain_window(eta, chi)
    gains = cfg.sweep().values(lo, hi)
    rows = fig2_curve(eta, chi, gains)
    lines = cfg.provenance()
    lines.append(f"# gain_window={_fmt(lo)},{_fmt(hi)}")
    lines.append(FIG2_HEADER)
    for r in rows:
        lines.append(f"{_fmt(r.G)},{_fmt(r.eta_ec)},{_fmt(r.p_success)}")
    return "\n".join(lines) + "\n"


def _parse_chis(text):
    try:
        chis = [float(c) for c in str(text).split(",") if c.strip()]
    except ValueError as exc:
        raise InvalidParameterError(f"bad chi list {text!r}") from exc
    if not chis:
        raise InvalidParameterError("empty chi list")
    for c in chis:
        if not 0.0 < c < 1.0:
            raise InvalidParameterError(f"chi must lie in (0, 1), got {c}")
    return chis


def cmd_fig3(cfg: RunConfig) -> str:
    """Linear-optics amplifier curves, one block per chi.

    Without an explicit ``g_stop`` each block sweeps from ``g_start`` up to
    the largest gain whose channel keeps fidelity ``f_min`` with the ideal
    amplifier.
    """
    eta, paths = cfg.get("eta"), cfg.get("paths")
    kw = {"in_dim": cfg.get("in_dim")}
    lines = cfg.provenance()
    lines.append(FIG3_HEADER)
    for chi in _parse_chis(cfg.get("chis")):
        stop = cfg.get("g_stop")
        if stop is None:
            stop = fig3_window(eta, chi, paths, cfg.get("f_min"), **kw)
        gains = cfg.sweep().values(cfg.get("g_start"), stop)
        for r in fig3_curve(eta, chi, paths, gains, workers=cfg.get("workers"), **kw):
            lines.append(",".join(_fmt(x) for x in (chi, r.G, r.eta_ec, r.p_success, r.fidelity)))
    return "\n".join(lines) + "\n"


def _suite(passed, measured, tolerances, status=None, message=None):
    out = {
        "passed": bool(passed),
        "status": status or ("ok" if passed else "failed"),
        "measured": {k: float(v) for k, v in measured.items()},
        "tolerances": {k: float(v) for k, v in tolerances.items()},
    }
    if message:
        out["message"] = message
    return out


def _suite_algebra(eta, chi, gain):
    g_max = max_gain(eta, chi)
    errs = {
        "classical_gain": abs(classical_gain(chi).lam - chi**2),
        "transmission_at_max_gain": abs(corrected_transmission(g_max, eta, chi).raw
                                        - best_transmission(eta, chi)),
        "bound_at_max_gain": abs(success_bound(chi, eta, g_max)),
    }
    tol = 1e-12
    return _suite(all(v <= tol for v in errs.values()), errs, {"abs": tol})


def _suite_epr(eta, chi, gain, dim, fid_tol):
    rep = verify_epr_identity(chi, eta, gain, dim)
    ok = rep.fidelity >= fid_tol and rep.p_success <= rep.p_bound + 1e-9
    return _suite(ok, {"fidelity": rep.fidelity, "p_success": rep.p_success,
                       "p_bound": rep.p_bound, "tail": rep.tail},
                  {"fidelity_min": fid_tol, "p_slack": 1e-9})


def _suite_teleport(eta, chi, grid, dim, in_dim, rel_tol):
    comps = lossy_epr_components(chi, eta, dim, dim)
    expected = lossy_gain(chi, eta)
    tol = {"rel": rel_tol, "residual": 1e-2}
    try:
        fit = teleport_channel(comps, expected, grid, in_dim=in_dim).fit()
    except GridTooCoarseError as exc:
        return _suite(False, {"completeness_defect": exc.defect}, tol, "grid-too-coarse", str(exc))
    rel = abs(fit.eta_est - expected.lam) / expected.lam
    return _suite(rel <= rel_tol and fit.residual < 1e-2,
                  {"eta_est": fit.eta_est, "eta_expected": expected.lam,
                   "rel_error": rel, "residual": fit.residual}, tol)


def _suite_end_to_end(eta, chi, gain, in_dim, rel_tol):
    rep = end_to_end_verify(ProtocolConfig(eta, chi, gain, in_dim=in_dim), rel_tol)
    return _suite(rep.passed, {"eta_est": rep.eta_est, "eta_expected": rep.eta_expected,
                               "rel_error": rep.rel_error, "residual": rep.residual},
                  {"rel": rep.rel_tol, "residual": rep.residual_tol})


def _suite_ensemble(gain, seed, samples):
    measured, ok = {}, True
    for v_t in (1.5, 2.0, 4.0):
        chk = ensemble_success(v_t, gain, n_samples=samples, seed=seed)
        ok &= chk.passed
        measured[f"mean_p_V{_fmt(v_t)}"] = chk.mean_p
        measured[f"bound_V{_fmt(v_t)}"] = chk.bound
    return _suite(ok, measured, {"sigma": 3.0})


def cmd_verify(cfg: RunConfig) -> tuple[str, bool]:
    """Run every invariant suite; returns (JSON text, all passed)."""
    p = cfg.params
    eta, chi, gain = p["eta"], p["chi"], p["gain"]
    grid = BellGrid(2.0, 1.0) if p["coarse_grid"] else BellGrid(p["grid_extent"], p["grid_step"])
    runners = {
        "algebra": lambda: _suite_algebra(eta, chi, gain),
        "epr_identity": lambda: _suite_epr(eta, chi, gain, p["dim"], p["fid_tol"]),
        "teleport_oracle": lambda: _suite_teleport(eta, chi, grid, p["teleport_dim"],
                                                   p["in_dim"], p["rel_tol"]),
        "end_to_end": lambda: _suite_end_to_end(eta, chi, gain, p["in_dim"], p["rel_tol"]),
        "ensemble_bound": lambda: _suite_ensemble(gain, p["seed"], p["samples"]),
    }
    suites = {}
    for name, run in runners.items():
        try:
            suites[name] = run()
        except CvqecError as exc:
            suites[name] = _suite(False, {}, {}, "error", f"{type(exc).__name__}: {exc}")
    failed = sorted(k for k, v in suites.items() if not v["passed"])
    report = {
        "command": "verify",
        "config": {k: p[k] for k in sorted(p)},
        "passed": not failed,
        "failed": failed,
        "suites": suites,
    }
    return json.dumps(report, sort_keys=True, indent=2) + "\n", not failed


def cmd_epr_params(cfg: RunConfig) -> str:
    chi, V = cfg.get("chi"), cfg.get("V")
    if (chi is None) == (V is None):
        raise InvalidParameterError("give exactly one of --chi or --V")
    ep = EprParams.from_chi(chi) if chi is not None else EprParams.from_V(V)
    lines = cfg.provenance() + ["chi,V,lambda"]
    lines.append(f"{_fmt(ep.chi)},{_fmt(ep.V)},{_fmt(classical_gain(ep.chi).lam)}")
    return "\n".join(lines) + "\n"


def cmd_bounds(cfg: RunConfig) -> str:
    """Closed-form quantities at one operating point, as key,value rows."""
    eta, chi, gain, v_t = cfg.get("eta"), cfg.get("chi"), cfg.get("gain"), cfg.get("V_t")
    if gain < 1:
        raise InvalidParameterError(f"NLA gain must be >= 1, got {gain}")
    rows = [
        ("lambda", classical_gain(chi).lam),
        ("teleport_transmission", lossy_gain(chi, eta).lam),
        ("eta_ec", corrected_transmission(gain, eta, chi).value),
        ("break_even_gain", 1 / chi**2 if chi > 0 else math.inf),
        ("max_gain", max_gain(eta, chi)),
        ("eta_ec_limit", best_transmission(eta, chi)),
        ("p_bound", success_bound(chi, eta, gain)),
        ("ensemble_bound", gaussian_ensemble_bound(EnsembleSpec(v_t, 1 + gain * (v_t - 1)))),
    ]
    try:
        chi_eff, eta_eff = effective_epr_params(chi, eta, gain)
        rows += [("chi_eff", chi_eff), ("eta_eff", eta_eff)]
    except UnphysicalOutputError:
        pass
    lines = cfg.provenance() + ["quantity,value"]
    lines += [f"{k},{_fmt(v)}" for k, v in rows]
    return "\n".join(lines) + "\n"


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cvqec", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="INI config file")
    ap.add_argument("-o", "--output", help="output file (default: stdout)")
    # the same options are accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="INI config file")
    common.add_argument("-o", "--output", default=argparse.SUPPRESS, help="output file")
    sub = ap.add_subparsers(dest="command", required=True)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **kw: _add(*a, parents=[common], **kw)

    def sweep_args(p):
        p.add_argument("--points", type=int, help="number of gains")
        p.add_argument("--g-start", dest="g_start", type=float)
        p.add_argument("--g-stop", dest="g_stop", type=float)
        p.add_argument("--scale", choices=("log", "linear"))

    p = sub.add_parser("fig2", help="success bound versus corrected transmission")
    p.add_argument("--eta", type=float)
    p.add_argument("--chi", type=float)
    sweep_args(p)

    p = sub.add_parser("fig3", help="linear-optics amplifier curves")
    p.add_argument("--eta", type=float)
    p.add_argument("--chis", help="comma-separated chi values")
    p.add_argument("--paths", type=int)
    p.add_argument("--f-min", dest="f_min", type=float)
    p.add_argument("--in-dim", dest="in_dim", type=int)
    p.add_argument("--workers", type=int)
    sweep_args(p)

    p = sub.add_parser("verify", help="run the invariant suites, emit a JSON report")
    for k in ("eta", "chi", "gain", "grid_extent", "grid_step", "rel_tol", "fid_tol"):
        p.add_argument("--" + k.replace("_", "-"), dest=k, type=float)
    for k in ("dim", "teleport_dim", "in_dim", "seed", "samples"):
        p.add_argument("--" + k.replace("_", "-"), dest=k, type=int)
    p.add_argument("--coarse-grid", dest="coarse_grid", action="store_const", const=True,
                   help="use a deliberately coarse Bell grid")
    p.add_argument("--json", action="store_true", help="accepted for clarity; output is JSON")

    p = sub.add_parser("epr-params", help="convert between chi, V and the teleport gain")
    p.add_argument("--chi", type=float)
    p.add_argument("--V", type=float)

    p = sub.add_parser("bounds", help="closed-form quantities at one operating point")
    p.add_argument("--eta", type=float)
    p.add_argument("--chi", type=float)
    p.add_argument("--gain", type=float)
    p.add_argument("--V-t", dest="V_t", type=float)
    return ap


def _write(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None, environ=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "output")}
    try:
        cfg = resolve_config(args.command, flags, args.config, environ, args.output)
        if args.command == "verify":
            text, ok = cmd_verify(cfg)
            _write(text, cfg.output)
            if not ok:
                failed = json.loads(text)["failed"]
                print(f"verify: failing suites: {', '.join(failed)}", file=sys.stderr)
                return 1
            return 0
        handler = {"fig2": cmd_fig2, "fig3": cmd_fig3, "epr-params": cmd_epr_params,
                   "bounds": cmd_bounds}[args.command]
        _write(handler(cfg), cfg.output)
    except DomainError as exc:
        lo, hi = exc.interval
        print(f"error: {exc} (valid interval [{lo:.12g}, {hi:.12g}])", file=sys.stderr)
        return 2
    except (InvalidParameterError, UnphysicalOutputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"error: {exc}; try fewer paths or a smaller --in-dim", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
