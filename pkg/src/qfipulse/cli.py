"""Command-line entry point: ``qfipulse <subcommand> [flags]``.

Every subcommand prints one JSON or CSV document on stdout (or writes it to
``--out``). Values are in units where Gamma = 1 unless ``--gamma`` is given;
QFI outputs always carry Gamma^2 F next to F. Errors go to stderr as JSON.
Exit codes: 0 ok, 1 computation error, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bilinear, engine, oracle, sweep
from .analytic import gamma_T_from_sigma, qfi_long_table, qfi_short_table
from .errors import InvalidInput, QfiError, UsageError
from .optimizer import OptConfig, optimize
from .pulses import (SIGMA_OVER_T, Harmonic, HermiteGaussian, PlaneWave, PulseSpec, canonical_family,
                     make_family, synthesize, to_dict)

SUBCOMMANDS = ("qfi", "sweep", "eig", "optimize", "oracle-check", "table")

# option name -> (type, default, help); shared across subcommands that use it
_OPTIONS = {
    "pulse": (str, "rect", "pulse family (rect, gauss, decexp, risexp, symexp, sine); comma list for sweep"),
    "T": (float, 1.0, "pulse width parameter T (physical time)"),
    "t0": (float, None, "centre for gauss/risexp/symexp or Hermite-Gaussian basis"),
    "omega": (float, None, "angular frequency for the sine family"),
    "alpha_sq": (str, "1.0", "mean photon number; comma list for sweep"),
    "gamma": (float, 1.0, "decay rate Gamma"),
    "delta": (float, 0.0, "atom-field detuning"),
    "carrier": (float, 0.0, "carrier detuning applied to the pulse itself"),
    "chirp": (float, 0.0, "quadratic phase coefficient"),
    "basis": (str, None, "basis kind: harmonic, plane-wave, hermite-gaussian"),
    "n_max": (int, 16, "largest basis index"),
    "n_min": (int, None, "smallest plane-wave index (default -n_max)"),
    "coeffs_file": (str, None, "basis coefficients: JSON list (numbers or [re, im]) or text columns"),
    "h": (float, 1e-3, "finite-difference step in Gamma for the oracle"),
    "seeds": (int, 10, "number of optimizer seeds"),
    "rng_seed": (int, 0, "random seed"),
    "jobs": (int, None, "worker processes (default: available CPUs)"),
    "out": (str, None, "write the output document here instead of stdout"),
    "tol_rel": (float, 1e-9, "engine relative tolerance"),
    "tol_abs": (float, 1e-12, "engine absolute tolerance"),
    "horizon_factor": (float, 60.0, "post-pulse horizon in units of 1/Gamma"),
    "gamma_T": (float, None, "dimensionless width Gamma*T"),
    "gamma_Tsigma": (float, None, "dimensionless width Gamma*T_sigma"),
    "family": (str, None, "table family (comma list or 'all')"),
    "widths": (str, "0.05:20:8", "Gamma*T_sigma grid: comma list or lo:hi:n (log spaced)"),
    "store": (str, None, "JSON-lines store for resumable sweeps"),
    "method": (str, "closed", "eig kernel: closed or numeric"),
    "grad_mode": (str, "finite_difference", "finite_difference or adjoint"),
    "max_iters": (int, 200, "optimizer iteration cap per seed"),
    "fd_step": (float, 1e-4, "relative finite-difference step for gradients"),
    "complex_coeffs": (bool, False, "optimize complex coefficients even at zero detuning"),
    "trajectory": (str, None, "write the ODE trajectory CSV to this path"),
    "config": (str, None, "JSON config file mirroring the flag names"),
}

_COMMON = ["gamma", "delta", "tol_rel", "tol_abs", "horizon_factor", "out", "config"]
_PULSE = ["pulse", "T", "t0", "omega", "alpha_sq", "carrier", "chirp", "basis", "n_max", "n_min", "coeffs_file"]
_PER_COMMAND = {
    "qfi": _PULSE + ["trajectory"],
    "oracle-check": _PULSE + ["h"],
    "sweep": ["pulse", "alpha_sq", "widths", "store", "jobs"],
    "eig": ["basis", "T", "t0", "n_max", "n_min", "method"],
    "optimize": ["basis", "T", "t0", "n_max", "n_min", "alpha_sq", "seeds", "rng_seed", "grad_mode",
                 "max_iters", "fd_step", "complex_coeffs", "jobs"],
    "table": ["family", "gamma_T", "gamma_Tsigma", "alpha_sq"],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, prog=self.prog)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qfipulse", description="QFI of decay-rate estimation with pulsed coherent light")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        for key in _PER_COMMAND[name] + _COMMON:
            typ, _, hlp = _OPTIONS[key]
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                p.add_argument(flag, dest=key, action="store_true", default=argparse.SUPPRESS, help=hlp)
            else:
                p.add_argument(flag, dest=key, type=typ, default=argparse.SUPPRESS, help=hlp)
    return parser


def _load_config(path: str, command: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config: {exc}", path=path) from None
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object", path=path)
    allowed = set(_PER_COMMAND[command] + _COMMON) - {"config"}
    out = {}
    for k, v in raw.items():
        key = k.replace("-", "_")
        if key not in allowed:
            raise UsageError(f"unknown config key {k!r}", path=path, allowed=sorted(allowed))
        out[key] = v
    return out


def resolve(argv) -> tuple[str, dict]:
    """Parse argv; values come from defaults, then the config file, then flags."""
    ns = build_parser().parse_args(argv)
    if ns.command is None:
        raise UsageError("missing subcommand", choices=list(SUBCOMMANDS))
    cmd = ns.command
    flags = {k: v for k, v in vars(ns).items() if k != "command"}
    opts = {k: _OPTIONS[k][1] for k in _PER_COMMAND[cmd] + _COMMON}
    if flags.get("config"):
        opts.update(_load_config(flags["config"], cmd))
    opts.update(flags)
    for k, v in list(opts.items()):
        typ = _OPTIONS[k][0]
        if v is not None and typ in (int, float) and not isinstance(v, bool):
            try:
                opts[k] = typ(v)
            except (TypeError, ValueError):
                raise UsageError(f"bad value for {k}", value=v) from None
    return cmd, opts


# ---------------------------------------------------------------- builders

def _params(o) -> engine.PhysicsParams:
    return engine.PhysicsParams(gamma=o["gamma"], delta=o["delta"], horizon_factor=o["horizon_factor"],
                                rel_tol=o["tol_rel"], abs_tol=o["tol_abs"])


def _float_list(v) -> list[float]:
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    try:
        return [float(x) for x in str(v).split(",") if x.strip()]
    except ValueError:
        raise UsageError("expected a number or comma-separated numbers", value=v) from None


def _single_alpha(o) -> float:
    vals = _float_list(o["alpha_sq"])
    if len(vals) != 1:
        raise UsageError("this subcommand takes one --alpha-sq value")
    return vals[0]


def _basis(o):
    kind = (o.get("basis") or "").lower().replace("_", "-")
    n_max = o["n_max"]
    if kind in ("harmonic", "sine"):
        return Harmonic(o["T"], n_max)
    if kind in ("plane-wave", "planewave", "periodic"):
        n_min = o["n_min"] if o.get("n_min") is not None else -n_max
        return PlaneWave(o["T"], n_min, n_max)
    if kind in ("hermite-gaussian", "hermite", "hg"):
        return HermiteGaussian(o["T"], n_max, o.get("t0"))
    raise UsageError(f"unknown basis {o.get('basis')!r}", choices=["harmonic", "plane-wave", "hermite-gaussian"])


def read_coeffs(path: str) -> np.ndarray:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        arr = np.loadtxt(path, delimiter="," if "," in text else None, ndmin=2)
        if arr.shape[1] == 1:
            return arr[:, 0].astype(complex)
        return arr[:, 0] + 1j * arr[:, 1]
    if isinstance(data, dict):
        data = data.get("coeffs", data.get("best_coeffs"))
    return np.array([complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in data])


def _pulse(o) -> PulseSpec:
    alpha_sq = _single_alpha(o)
    if o.get("basis"):
        if not o.get("coeffs_file"):
            raise UsageError("--basis needs --coeffs-file")
        return synthesize(_basis(o), read_coeffs(o["coeffs_file"]), alpha_sq, o["carrier"])
    fam = make_family(o["pulse"], o["T"], o.get("t0"), o.get("omega"))
    return PulseSpec(fam, alpha_sq, o["carrier"], o["chirp"])


def _with_physical(d: dict, gamma: float, keys) -> dict:
    for k in keys:
        if d.get(k) is not None:
            d[k + "_physical"] = d[k] / gamma**2
    return d


# ---------------------------------------------------------------- commands

def cmd_qfi(o) -> str:
    pulse = _pulse(o)
    res = engine.solve(pulse, _params(o), with_trajectory=bool(o.get("trajectory")))
    if o.get("trajectory"):
        Path(o["trajectory"]).write_text(engine.trajectory_csv(res))
    out = res.to_dict()
    out["solver"] = {k: v for k, v in out["solver"].items() if k != "wall_time"}
    _with_physical(out, res.gamma, ["f_p", "f_z", "f_x", "z1_term", "work_term"])
    out["qfi_per_photon"] = res.total / pulse.alpha_sq if pulse.alpha_sq else None
    return _json({"pulse": to_dict(pulse), "result": out})


def cmd_oracle_check(o) -> str:
    pulse = _pulse(o)
    params = _params(o)
    eng = engine.solve(pulse, params).total
    fd = oracle.qfi_fd_global(pulse, params, h=o["h"] * params.gamma)
    disc = abs(eng - fd.qfi) / abs(eng) if eng else abs(fd.qfi)
    tol = max(1e-3 * abs(eng), 10 * fd.richardson_err)
    return _json({
        "pulse": to_dict(pulse),
        "engine_qfi": eng, "engine_qfi_physical": eng / params.gamma**2,
        "oracle": fd.to_dict(), "oracle_qfi_physical": fd.qfi / params.gamma**2,
        "rel_discrepancy": disc, "agrees": abs(eng - fd.qfi) <= tol,
    })


def _widths(spec) -> list[float]:
    if isinstance(spec, str) and ":" in spec:
        lo, hi, n = spec.split(":")
        return sweep.log_grid(float(lo), float(hi), int(n))
    return _float_list(spec)


def cmd_sweep(o) -> str:
    fams = [f for f in str(o["pulse"]).split(",") if f.strip()]
    plan = sweep.SweepPlan(tuple(fams), tuple(_float_list(o["alpha_sq"])), tuple(_widths(o["widths"])),
                           _params(o))
    jobs = o.get("jobs") or os.cpu_count() or 1
    rows = sweep.run_sweep(plan, o.get("store"), jobs=jobs)
    return sweep.rows_to_csv(rows)


def cmd_eig(o) -> str:
    basis = _basis(o)
    params = _params(o)
    if o["method"] == "closed":
        if params.delta != 0.0:
            raise UsageError("closed-form kernels need --delta 0; use --method numeric")
        K = bilinear.closed_total(basis, params.gamma)
    elif o["method"] == "numeric":
        K = bilinear.k_numeric(basis, params)
    else:
        raise UsageError("method must be closed or numeric", method=o["method"])
    res = bilinear.max_eig(K)
    v = np.asarray(res.vector)
    freqs = basis.frequencies()
    top = int(np.argmax(res.mode_populations))
    return _json({
        "lambda_max": res.lambda_max, "lambda_max_physical": res.lambda_max / params.gamma**2,
        "top_mode": res.top_mode, "top_omega": float(freqs[top]),
        "top_population": float(res.mode_populations[top]),
        "degenerate": res.degenerate, "kernel": K.provenance,
        "modes": [{"n": int(n), "omega": float(w), "population": float(p), "re": float(c.real),
                   "im": float(np.imag(c))} for n, w, p, c in zip(res.indices, freqs, res.mode_populations, v)],
    })


def cmd_optimize(o) -> tuple[str, str]:
    cfg = OptConfig(basis=_basis(o), alpha_sq=_single_alpha(o), params=_params(o), n_seeds=o["seeds"],
                    rng_seed=o["rng_seed"], max_iters=o["max_iters"], grad_mode=o["grad_mode"],
                    fd_step=o["fd_step"], complex_coeffs=True if o.get("complex_coeffs") else None)
    res = optimize(cfg)
    return _json(res.to_dict()), res.populations_csv()


def cmd_table(o) -> str:
    fams = o.get("family") or "all"
    fams = list(SIGMA_OVER_T) if fams == "all" else [canonical_family(f) for f in fams.split(",")]
    alpha_vals = _float_list(o["alpha_sq"])
    lines = ["family,gamma_T,gamma_Tsigma,alpha_sq,long,short"]
    for fam in fams:
        if o.get("gamma_T") is not None:
            gT = o["gamma_T"]
        elif o.get("gamma_Tsigma") is not None:
            gT = gamma_T_from_sigma(fam, o["gamma_Tsigma"])
        else:
            raise UsageError("table needs --gamma-T or --gamma-Tsigma")
        for a in alpha_vals:
            lines.append(",".join([fam] + [repr(float(v)) for v in
                                           (gT, gT * SIGMA_OVER_T[fam], a, qfi_long_table(fam, gT),
                                            qfi_short_table(fam, gT, a))]))
    return "\n".join(lines) + "\n"


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v).__name__}")


_DISPATCH = {"qfi": cmd_qfi, "oracle-check": cmd_oracle_check, "sweep": cmd_sweep, "eig": cmd_eig,
             "optimize": cmd_optimize, "table": cmd_table}


def _emit_error(exc: QfiError):
    sys.stderr.write(json.dumps(exc.to_dict(), sort_keys=True, default=_jsonable) + "\n")


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cmd, opts = resolve(argv)
        doc = _DISPATCH[cmd](opts)
    except (UsageError, InvalidInput) as exc:
        _emit_error(exc)
        return 2
    except QfiError as exc:
        _emit_error(exc)
        return 1
    extra = None
    if isinstance(doc, tuple):
        doc, extra = doc
    if opts.get("out"):
        out = Path(opts["out"])
        out.write_text(doc)
        if extra is not None:
            out.with_name(out.stem + ".populations.csv").write_text(extra)
    else:
        sys.stdout.write(doc)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
