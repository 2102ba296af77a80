"""
Batch command-line front end.

    wbiharm --config run.json --out results/ [--jobs 4] [--tol 1e-10] [--quiet]

The configuration is a flat JSON object with a ``command`` key, the problem
parameters N, alpha, l, p and command options. Every run writes
``summary.json`` plus command-specific CSV files into the output directory.

Exit codes: 0 success, 2 invalid configuration or parameters, 3 solver
non-convergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import check_bounds, fit_tail, monotonicity_report
from .exponents import (
    InvalidParamsError,
    ProblemParams,
    classify_regime,
    derive_exponents,
    linearization_spectrum,
    pohozaev_coefficient,
    similarity_exponents,
)
from .identities import energy, pde_residual, pohozaev_check
from .radial_ode import DEFAULT_RTOL, ShootingError, StiffnessError, liouville_scan, shoot_navier_ball
from .transform import RadialProfile, to_transformed
from .variational import ConvergenceError, Grid1D, OperatorAssemblyError, first_eigenpair, minimize_rayleigh

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4

COMMANDS = ("exponents", "shoot", "scan", "minimize", "eigen", "pohozaev", "asymptotics")

# Per-command options and their defaults. REQUIRED marks options without a default.
REQUIRED = object()
PARAM_KEYS = ("N", "alpha", "l", "p")
DEFAULTS = {
    "exponents": {},
    "shoot": {"R": 1.0, "tol": DEFAULT_RTOL, "n_nodes": 4096, "r_max": 1e6},
    "scan": {"p_grid": REQUIRED, "b_min": 1e-4, "b_max": 1e4, "n_b": 40, "r_max": 1e4, "tol": DEFAULT_RTOL},
    "minimize": {"R": 1.0, "n": 2000, "q": None, "window": None, "boundary": "navier"},
    "eigen": {"R": 1.0, "n": 2000, "window": None, "boundary": "navier"},
    "pohozaev": {"profile": REQUIRED, "R": None},
    "asymptotics": {"profile": REQUIRED, "window": None},
}
# p may be omitted here: exponents falls back to p = p_s, scan takes p from p_grid
P_OPTIONAL = ("exponents", "scan")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    params: ProblemParams
    options: dict = field(default_factory=dict)
    p_defaulted: bool = False

    def effective(self) -> dict:
        """Settings actually used, for the run summary."""
        out = {"command": self.command, **self.params.to_dict()}
        if self.p_defaulted:
            out["p"] = "p_s"
        out.update(self.options)
        return out


def _exact(x) -> Fraction:
    """Rational value of a JSON number taken from its decimal text, so 0.1 -> 1/10."""
    if isinstance(x, bool):
        raise ConfigError("booleans are not numbers")
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def parse_config(text: str) -> RunConfig:
    """Validate a JSON configuration and apply defaults.

    Raises ConfigError for malformed documents, missing or unknown keys and
    InvalidParamsError for inadmissible (N, alpha, l, p).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    command = doc.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}; got {command!r}")
    table = DEFAULTS[command]
    allowed = {"command", *PARAM_KEYS, *table}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) for command {command!r}: {', '.join(unknown)}")
    need = [k for k in ("N", "alpha", "l") if k not in doc]
    if "p" not in doc and command not in P_OPTIONAL:
        need.append("p")
    need += [k for k, v in table.items() if v is REQUIRED and k not in doc]
    if need:
        raise ConfigError(f"missing required key(s): {', '.join(need)}")
    N = doc["N"]
    if isinstance(N, float) and N.is_integer():
        N = int(N)
    if not isinstance(N, int) or isinstance(N, bool):
        raise ConfigError(f"N must be an integer, got {N!r}")
    try:
        alpha, l = _exact(doc["alpha"]), _exact(doc["l"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"alpha and l must be numbers: {exc}") from exc
    p_defaulted = False
    if "p" in doc:
        p = _exact(doc["p"])
    elif command == "scan":
        grid = doc["p_grid"]
        if not isinstance(grid, list) or not grid:
            raise ConfigError("p_grid must be a non-empty list of exponents")
        p = _exact(grid[0])
    else:
        p_defaulted = True
        p = None
    if p is None:
        params = ProblemParams.critical(N, alpha, l)
    else:
        params = ProblemParams(N, alpha, l, p)
    options = {k: (doc[k] if k in doc else v) for k, v in table.items()}
    if command == "scan":
        for q in options["p_grid"]:
            params.with_p(_exact(q))
    if command != "exponents":
        params = params.as_float()
    return RunConfig(command, params, options, p_defaulted)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _exact_strings(params: ProblemParams) -> dict:
    ex = derive_exponents(params.exact())
    return {k: str(v) for k, v in ex.__dict__.items()}


def _t_w_csv(tprofile) -> str:
    lines = ["t,w"] + [f"{t:.17g},{w:.17g}" for t, w in zip(tprofile.t_nodes, tprofile.w)]
    return "\n".join(lines) + "\n"


def _grid(cfg: RunConfig) -> Grid1D:
    o = cfg.options
    return Grid1D.for_ball(cfg.params, float(o["R"]), int(o["n"]), o["window"])


def _load_profile(cfg: RunConfig) -> RadialProfile:
    text = Path(cfg.options["profile"]).read_text(encoding="utf-8")
    try:
        return RadialProfile.from_csv(text, cfg.params, origin="file")
    except ValueError as exc:
        raise ConfigError(f"profile {cfg.options['profile']}: {exc}") from exc


def run_exponents(cfg: RunConfig, out: Path, jobs: int) -> dict:
    P = cfg.params
    spec = linearization_spectrum(P)
    return {
        "exact": _exact_strings(P),
        "regime": classify_regime(P).to_dict(),
        "pohozaev_coefficient": pohozaev_coefficient(P),
        "linearization_eigenvalues": spec.eigenvalues.tolist(),
        "similarity_exponents": list(similarity_exponents(P)),
    }


def run_shoot(cfg: RunConfig, out: Path, jobs: int) -> dict:
    o, P = cfg.options, cfg.params
    R = float(o["R"])
    sol = shoot_navier_ball(P, R, float(o["tol"]), r_max=float(o["r_max"]))
    n = int(o["n_nodes"])
    prof = sol.resample(np.linspace(R / n, R, n))
    _atomic_write(out / "profile.csv", prof.to_csv())
    return {
        "shooting_parameter": sol.shooting_parameter,
        "center_values": list(sol.center_values),
        "boundary_residuals": list(sol.residuals),
        "scale": sol.scale,
        "pde_residual": pde_residual(P, prof),
        "files": ["profile.csv"],
    }


def run_scan(cfg: RunConfig, out: Path, jobs: int) -> dict:
    o = cfg.options
    b_grid = np.geomspace(float(o["b_min"]), float(o["b_max"]), int(o["n_b"]))
    rep = liouville_scan(cfg.params, [float(p) for p in o["p_grid"]], b_grid, float(o["r_max"]), float(o["tol"]), jobs)
    _atomic_write(out / "scan.csv", rep.to_csv())
    return {
        "rows": len(rep.rows),
        "positive_on_window": sum(r.outcome.value == "PositiveOnWindow" for r in rep.rows),
        "violations_below_p_s": len(rep.violations),
        "files": ["scan.csv"],
    }


def run_minimize(cfg: RunConfig, out: Path, jobs: int) -> dict:
    o, P = cfg.options, cfg.params
    q = float(P.p) + 1 if o["q"] is None else float(o["q"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = minimize_rayleigh(P, _grid(cfg), q, boundary=o["boundary"])
    _atomic_write(out / "minimizer.csv", _t_w_csv(res.minimizer))
    return {**res.to_dict(), "warnings": [str(w.message) for w in caught], "files": ["minimizer.csv"]}


def run_eigen(cfg: RunConfig, out: Path, jobs: int) -> dict:
    o = cfg.options
    res = first_eigenpair(cfg.params, _grid(cfg), boundary=o["boundary"])
    _atomic_write(out / "eigenfunction.csv", _t_w_csv(res.eigenfunction))
    return {**res.to_dict(), "files": ["eigenfunction.csv"]}


def run_pohozaev(cfg: RunConfig, out: Path, jobs: int) -> dict:
    prof = _load_profile(cfg)
    R = float(prof.r_nodes[-1]) if cfg.options["R"] is None else float(cfg.options["R"])
    rep = pohozaev_check(cfg.params, prof, R)
    en = energy(cfg.params, prof, R)
    _atomic_write(out / "pohozaev.json", _dumps(rep.to_dict()))
    return {"pohozaev": rep.to_dict(), "energy": en.to_dict(), "files": ["pohozaev.json"]}


def run_asymptotics(cfg: RunConfig, out: Path, jobs: int) -> dict:
    P = cfg.params
    prof = _load_profile(cfg)
    tp = to_transformed(prof)
    window = cfg.options["window"]
    fits = {}
    for comp in ("w", "z"):
        try:
            fits[comp] = fit_tail(tp, comp, window).to_dict()
        except ValueError as exc:
            fits[comp] = {"error": str(exc)}
    bounds = [b.to_dict() for b in check_bounds(P, prof)]
    mono = monotonicity_report(P, prof).to_dict()
    lines = ["bound_name,exponent,sup_constant,argmax_r,satisfied"]
    lines += [f"{b['bound_name']},{b['exponent']:.17g},{b['sup_constant']:.17g},{b['argmax_r']:.17g},{b['satisfied']}" for b in bounds]
    _atomic_write(out / "bounds.csv", "\n".join(lines) + "\n")
    expected = {"w": (P.N + float(P.alpha) - 4) / 2, "z": (P.N - float(P.alpha)) / 2}
    return {"fits": fits, "expected_rates": expected, "bounds": bounds, "monotonicity": mono, "files": ["bounds.csv"]}


RUNNERS = {
    "exponents": run_exponents,
    "shoot": run_shoot,
    "scan": run_scan,
    "minimize": run_minimize,
    "eigen": run_eigen,
    "pohozaev": run_pohozaev,
    "asymptotics": run_asymptotics,
}


def execute(cfg: RunConfig, out: Path, jobs: int = 1) -> dict:
    """Run the command, write its artifacts and the summary; return the summary."""
    results = RUNNERS[cfg.command](cfg, out, jobs)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "inputs": cfg.effective(),
        "derived": derive_exponents(cfg.params).to_dict(),
        "results": results,
    }
    _atomic_write(out / "summary.json", _dumps(summary))
    return summary


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wbiharm", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=".", help="output directory (default: current directory)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for scan")
    ap.add_argument("--tol", type=float, default=None, help="override the integrator tolerance")
    ap.add_argument("--quiet", action="store_true", help="do not print the summary")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
        if args.tol is not None:
            if "tol" not in cfg.options:
                raise ConfigError(f"--tol does not apply to command {cfg.command!r}")
            cfg.options["tol"] = args.tol
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
    except (ConfigError, InvalidParamsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        summary = execute(cfg, Path(args.out), args.jobs)
    except (ConfigError, InvalidParamsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ShootingError, ConvergenceError, StiffnessError, OperatorAssemblyError) as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    if not args.quiet:
        print(_dumps(summary), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
