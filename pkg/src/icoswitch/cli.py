"""Command-line entry point: ``icoswitch {simulate,fit,report,oracle-check}``.

Exit codes: 0 success, 1 oracle mismatch, 2 invalid configuration,
3 I/O failure, 4 fit did not converge, 5 truncation budget exceeded.
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
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import yaml

from . import __version__
from .exceptions import ConfigError, FitConvergenceError, TruncationError
from .experiment import ExperimentConfig, assemble_report, fringe_data, per_pair_phase, reference_curves, run_sweep
from .estimation import TrialOutcome, crb, fisher_noisy
from .fitting import FRINGE_MODELS, FringeFitter, binomial_weights
from .fock import DEFAULT_BUDGET, DEFAULT_CUTOFF, FockState, oracle_probabilities
from .noise import resource_account
from .switch import DisplacementSequence, geometric_phase, ideal_probabilities

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_FIT = 4
EXIT_TRUNCATION = 5

TRIALS_COLUMNS = ("n", "trial_index", "k_minus", "m")
RMSE_COLUMNS = ("n", "rmse", "rmse_std", "crb", "hl_bound", "sql_bound")
BOUNDS_COLUMNS = ("n", "hl_bound", "sql_bound", "crb", "crb_best_phase", "ref_sqrt_nu")

# oracle-check keys share the flat config document with the experiment keys
ORACLE_DEFAULTS = {
    "oracle_cutoff": DEFAULT_CUTOFF,
    "oracle_budget": DEFAULT_BUDGET,
    "oracle_means": [-0.1, -0.02, 0.02, 0.1],
    "oracle_coherent_alpha": 0.5,
}
ORACLE_TOLERANCE = 1e-6


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _fmt(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".16e")


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _csv_text(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _json_text(obj):
    return json.dumps(_json_safe(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> str:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _read_text(path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc


def load_document(path) -> dict:
    """Parse a flat YAML key-value config; an empty file is an empty mapping."""
    try:
        doc = yaml.safe_load(_read_text(path))
    except yaml.YAMLError as exc:
        raise CliError(f"{path}: not valid YAML: {exc}", EXIT_CONFIG) from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise CliError(f"{path}: config must be a key-value mapping", EXIT_CONFIG)
    return doc


def split_config(doc: dict, seed=None):
    """Return ``(ExperimentConfig, oracle settings)``; unknown keys are rejected."""
    doc = dict(doc)
    oracle = {k: doc.pop(k, v) for k, v in ORACLE_DEFAULTS.items()}
    if seed is not None:
        doc["seed"] = seed
    try:
        config = ExperimentConfig.from_dict(doc)
        oracle["oracle_cutoff"] = int(oracle["oracle_cutoff"])
        oracle["oracle_budget"] = float(oracle["oracle_budget"])
        oracle["oracle_means"] = [float(v) for v in oracle["oracle_means"]]
        oracle["oracle_coherent_alpha"] = complex(oracle["oracle_coherent_alpha"])
    except (ConfigError, TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_CONFIG) from exc
    return config, oracle


def _config_echo(config, oracle):
    echo = config.to_dict()
    echo.update({k: v for k, v in oracle.items() if k != "oracle_coherent_alpha"})
    alpha = oracle["oracle_coherent_alpha"]
    echo["oracle_coherent_alpha"] = alpha.real if alpha.imag == 0 else str(alpha)
    return echo


def _created():
    # wall-clock time would break byte-identical reruns; honour SOURCE_DATE_EPOCH only
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()


def _update_manifest(out_dir: Path, command: str, digests: dict, config_echo=None, seed=None):
    path = out_dir / "manifest.json"
    manifest = {}
    if path.exists():
        try:
            manifest = json.loads(_read_text(path))
        except json.JSONDecodeError:
            manifest = {}
    manifest.setdefault("artifact", "icoswitch")
    manifest["version"] = __version__
    if config_echo is not None:
        manifest["config"] = config_echo
    if seed is not None:
        manifest["seed"] = seed
    manifest.setdefault("timestamps", {})[command] = _created()
    files = manifest.setdefault("files", {})
    files.update({name: {"sha256": d} for name, d in digests.items()})
    manifest["files"] = dict(sorted(files.items()))
    _write(path, _json_text(manifest))


def _load(args):
    if args.config is None:
        return split_config({}, args.seed)
    return split_config(load_document(args.config), args.seed)


def cmd_simulate(args) -> int:
    if args.out is None:
        raise CliError("simulate needs --out", EXIT_CONFIG)
    config, oracle = _load(args)
    out = Path(args.out)
    sweep = run_sweep(config, workers=args.threads)
    trials = [
        {"n": r.n, "trial_index": i, "k_minus": o.k_minus, "m": o.m}
        for r in sweep for i, o in enumerate(r.outcomes)
    ]
    rows = []
    for r in sweep:
        curves = reference_curves(config, r.n)
        rows.append({
            "n": r.n,
            "rmse": r.rmse.rmse if r.rmse else math.nan,
            "rmse_std": r.bootstrap.rmse_std if r.bootstrap else math.nan,
            "crb": r.crb,
            "hl_bound": curves["hl_bound"],
            "sql_bound": curves["sql_bound"],
        })
    digests = {
        "trials.csv": _write(out / "trials.csv", _csv_text(TRIALS_COLUMNS, trials)),
        "rmse.csv": _write(out / "rmse.csv", _csv_text(RMSE_COLUMNS, rows)),
    }
    _update_manifest(out, "simulate", digests, _config_echo(config, oracle), config.seed)
    return EXIT_OK


def _read_csv(path, columns):
    text = _read_text(path)
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames[: len(columns)]) != tuple(columns):
        raise CliError(f"{path}: expected columns {','.join(columns)}", EXIT_CONFIG)
    try:
        return [{k: float(v) for k, v in row.items() if k in columns} for row in reader]
    except (TypeError, ValueError) as exc:
        raise CliError(f"{path}: non-numeric field: {exc}", EXIT_CONFIG) from exc


def read_trials(path):
    pairs = []
    for row in _read_csv(path, TRIALS_COLUMNS):
        try:
            pairs.append((int(row["n"]), TrialOutcome(int(row["k_minus"]), int(row["m"]))))
        except (TypeError, ValueError) as exc:
            raise CliError(f"{path}: invalid trial row {row}: {exc}", EXIT_CONFIG) from exc
    if not pairs:
        raise CliError(f"{path}: no trials", EXIT_CONFIG)
    return pairs


def cmd_fit(args) -> int:
    if args.trials is None:
        raise CliError("fit needs --trials", EXIT_CONFIG)
    config = _load(args)[0] if args.config else None
    model = args.model or (config.fit_model if config else "cosine")
    nuisance = (config.fit_nuisance if config else True) and not args.no_nuisance
    n, p, shots = fringe_data(read_trials(args.trials))
    out = Path(args.out) if args.out else Path(args.trials).parent
    fitter = FringeFitter(model=model, fix_nu=args.fix_nu, fit_nuisance=nuisance, a_bounds=args.a_bounds)
    code = EXIT_OK
    try:
        fit = fitter.fit(n, p, sample_weight=binomial_weights(p, shots)).result()
    except FitConvergenceError as exc:
        fit, code = exc.best, EXIT_FIT
        print(f"icoswitch fit: {exc}", file=sys.stderr)
    doc = {
        "a": fit.a_fit, "c": fit.c_fit, "phi0": fit.phi0_fit, "nu": fit.nu_fit, "sse": fit.sse,
        "model": fit.model, "nu_fixed": fit.nu_fixed, "fit_nuisance": nuisance,
        "converged": fit.converged, "grad_norm": fit.grad_norm, "points": int(n.size),
    }
    digest = _write(out / "fringe_fit.json", _json_text(doc))
    _update_manifest(out, "fit", {"fringe_fit.json": digest})
    return code


def cmd_report(args) -> int:
    if args.rmse is None or args.config is None:
        raise CliError("report needs --rmse and --config", EXIT_CONFIG)
    config, _ = _load(args)
    rows = _read_csv(args.rmse, RMSE_COLUMNS)
    if not rows:
        raise CliError(f"{args.rmse}: no rows", EXIT_CONFIG)
    for row in rows:
        row["n"] = int(row["n"])
    report = assemble_report(rows, config)
    out = Path(args.out) if args.out else Path(args.rmse).parent
    n_max = report.criterion_n
    account = asdict(resource_account(config.m, n_max, config.noise)) if n_max > 0 else None
    doc = {
        "criterion_value": report.criterion_value,
        "criterion_n": n_max,
        "criterion_exceeds_threshold": report.criterion_value > 1.0,
        "criterion_formula": "eta^2 nu^2 n^2 / (m (1 + xi)^2)",
        "hl_bound_formula": "eta / (m n (1 + xi))",
        "resources": account,
        "noise": asdict(config.noise),
        "m": config.m,
        "records": [asdict(r) for r in report.records],
    }
    bounds = []
    for row in rows:
        n = row["n"]
        curves = reference_curves(config, n)
        a_n = per_pair_phase(config, n)
        curves["crb"] = crb(config.m, fisher_noisy(n, a_n, config.noise.visibility))
        curves["n"] = n
        bounds.append(curves)
    digests = {
        "violation.json": _write(out / "violation.json", _json_text(doc)),
        "bounds.csv": _write(out / "bounds.csv", _csv_text(BOUNDS_COLUMNS, bounds)),
    }
    _update_manifest(out, "report", digests)
    return EXIT_OK


def oracle_grid(config, oracle):
    means = oracle["oracle_means"]
    for n in config.n_range:
        for x in means:
            for p in means:
                yield DisplacementSequence.uniform(n, x, p)


def cmd_oracle_check(args) -> int:
    config, oracle = _load(args)
    cutoff = args.cutoff if args.cutoff is not None else oracle["oracle_cutoff"]
    budget = oracle["oracle_budget"]
    try:
        states = [
            ("vacuum", FockState.vacuum(cutoff, budget)),
            ("coherent", FockState.coherent(oracle["oracle_coherent_alpha"], cutoff, budget)),
        ]
        worst, count = 0.0, 0
        for seq in oracle_grid(config, oracle):
            analytic = ideal_probabilities(geometric_phase(seq)).p_minus
            for _, psi in states:
                diff = abs(oracle_probabilities(seq, psi).p_minus - analytic)
                worst = max(worst, diff)
                count += 1
    except TruncationError as exc:
        print(f"icoswitch oracle-check: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except ValueError as exc:
        raise CliError(f"invalid oracle settings: {exc}", EXIT_CONFIG) from exc
    status = "ok" if worst < ORACLE_TOLERANCE else "MISMATCH"
    print(f"max |analytic - oracle| = {worst:.3e} over {count} evaluations (cutoff {cutoff}): {status}")
    return EXIT_OK if worst < ORACLE_TOLERANCE else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat YAML config document")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")

    parser = argparse.ArgumentParser(prog="icoswitch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="run the Monte Carlo sweep")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", parents=[common], help="fit the fringe to trials.csv")
    fit.add_argument("--trials", help="trials.csv from simulate")
    fit.add_argument("--model", choices=FRINGE_MODELS)
    fit.add_argument("--fix-nu", type=float, default=None, help="hold the visibility fixed")
    fit.add_argument("--no-nuisance", action="store_true", help="drop the c n + phi0 terms")
    fit.add_argument("--a-bounds", type=float, nargs=2, metavar=("LO", "HI"), help="search range for A")
    fit.set_defaults(func=cmd_fit)

    rep = sub.add_parser("report", parents=[common], help="compare RMSE with the HL/SQL bounds")
    rep.add_argument("--rmse", help="rmse.csv from simulate")
    rep.set_defaults(func=cmd_report)

    orc = sub.add_parser("oracle-check", parents=[common], help="compare analytic and Fock-space fringes")
    orc.add_argument("--cutoff", type=int, default=None, help="override oracle_cutoff")
    orc.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("icoswitch: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except CliError as exc:
        print(f"icoswitch {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
