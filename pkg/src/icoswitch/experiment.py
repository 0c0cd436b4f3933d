"""Monte Carlo photon-counting experiments and the precision/violation analysis.

Each trial detects exactly ``m`` photons. Losses and multi-pair emission
only enter through the resource count behind the Heisenberg bound. Each
``(n, trial_index)`` pair draws from its own counter-based stream, so
sweeps are reproducible however the work is scheduled.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Mapping, Sequence

import numpy as np

from . import _random
from ._validation import check_int, check_interval, check_seed
from .estimation import (
    BootstrapResult,
    Estimate,
    RmseResult,
    TrialOutcome,
    bootstrap_rmse_std,
    crb,
    fisher_noisy,
    mle_many,
    prior_branch,
    rmse,
)
from .exceptions import ConfigError
from .fitting import FRINGE_MODELS, FringeFit, binomial_weights, fit_fringe
from .noise import NoiseParams, hl_bound, hl_criterion, sql_bound

__all__ = [
    "ExperimentConfig",
    "SweepRecord",
    "ViolationRecord",
    "ViolationReport",
    "per_pair_phase",
    "phase_offset",
    "run_trial",
    "run_sweep",
    "fringe_data",
    "fit_sweep_fringe",
    "scaling_filter",
    "assemble_report",
    "sweep_rows",
    "reference_curves",
    "violation_report",
]

_BOOTSTRAP_STREAM = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a simulated run.

    ``inject_c`` and ``inject_phi0`` add an apparatus phase ``c n + phi0``
    to the sampled fringe. The estimator is told about it, as for a
    calibrated setup, and the fringe fit recovers it as a nuisance.
    ``estimator_visibility`` lets the likelihood assume a visibility other
    than the true one.
    """

    a_true: float = 0.00647
    n_range: tuple[int, ...] = tuple(range(31))
    m: int = 60
    trials: int = 30
    noise: NoiseParams = field(default_factory=NoiseParams)
    seed: int = 0
    optimal_phase_mode: bool = False
    fit_nuisance: bool = True
    fit_model: str = "cosine"
    bootstrap_resamples: int = 10_000
    estimator_visibility: float | None = None
    inject_c: float = 0.0
    inject_phi0: float = 0.0

    def __post_init__(self):
        ns = tuple(check_int(n, "n_range entry", minimum=0) for n in self.n_range)
        if not ns:
            raise ConfigError("n_range must be non-empty")
        object.__setattr__(self, "n_range", ns)
        check_int(self.m, "m", minimum=1)
        check_int(self.trials, "trials", minimum=1)
        check_int(self.bootstrap_resamples, "bootstrap_resamples", minimum=100)
        check_seed(self.seed)
        if self.fit_model not in FRINGE_MODELS:
            raise ConfigError(f"fit_model must be one of {FRINGE_MODELS}, got {self.fit_model!r}")
        if self.estimator_visibility is not None:
            check_interval(self.estimator_visibility, "estimator_visibility", 0.0, 1.0, low_open=True)
        for name in ("a_true", "inject_c", "inject_phi0"):
            if not math.isfinite(float(getattr(self, name))):
                raise ConfigError(f"{name} must be finite")

    @property
    def likelihood_visibility(self) -> float:
        if self.estimator_visibility is None:
            return self.noise.visibility
        return self.estimator_visibility

    def to_dict(self) -> dict[str, Any]:
        """Flat key-value form; ``from_dict`` inverts it exactly."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "noise":
                out.update(asdict(value))
            elif f.name == "n_range":
                out[f.name] = list(value)
            else:
                out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        data = dict(data)
        noise_keys = {f.name for f in fields(NoiseParams)}
        own_keys = {f.name for f in fields(cls)} - {"noise"}
        unknown = set(data) - noise_keys - own_keys
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        noise = {k: data.pop(k) for k in list(data) if k in noise_keys}
        try:
            if "n_range" in data:
                data["n_range"] = tuple(data["n_range"])
            return cls(noise=NoiseParams(**noise), **data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def phase_offset(config: ExperimentConfig, n: int) -> float:
    return config.inject_c * n + config.inject_phi0


def per_pair_phase(config: ExperimentConfig, n: int) -> float:
    """True ``A`` used at ``n`` pairs.

    In ``optimal_phase_mode`` the total phase is moved to the quadrature point
    ``pi/2 (mod 2 pi)`` nearest the configured one, where the Fisher
    information peaks.
    """
    if not config.optimal_phase_mode or n == 0:
        return config.a_true
    n2 = n * n
    target = n2 * config.a_true + phase_offset(config, n)
    k = round((target - math.pi / 2) / (2 * math.pi))
    return (math.pi / 2 + 2 * math.pi * k - phase_offset(config, n)) / n2


def _p_minus(config, n):
    a = per_pair_phase(config, n)
    phase = n * n * a + phase_offset(config, n)
    return 0.5 * (1.0 - config.noise.visibility * math.cos(phase))


def run_trial(config: ExperimentConfig, n: int, trial_index: int) -> TrialOutcome:
    n = check_int(n, "n", minimum=0)
    trial_index = check_int(trial_index, "trial_index", minimum=0)
    rng = _random.stream(config.seed, (n,), trial_index)
    k = int(rng.binomial(config.m, _p_minus(config, n)))
    return TrialOutcome(k, config.m)


@dataclass(frozen=True)
class SweepRecord:
    """Trials and statistics at one ``n``; the statistics are None when ``n = 0``."""

    n: int
    a_true: float
    outcomes: tuple[TrialOutcome, ...]
    estimates: tuple[Estimate, ...]
    rmse: RmseResult | None
    bootstrap: BootstrapResult | None
    crb: float


def _sweep_one(config: ExperimentConfig, n: int) -> SweepRecord:
    outcomes = tuple(run_trial(config, n, t) for t in range(config.trials))
    a_n = per_pair_phase(config, n)
    if n == 0:
        return SweepRecord(n, a_n, outcomes, (), None, None, math.inf)
    offset = phase_offset(config, n)
    nu = config.likelihood_visibility
    k = np.array([o.k_minus for o in outcomes])
    a_hat, clamped = mle_many(k, config.m, n, nu, prior_branch(a_n, n, offset), offset)
    estimates = tuple(Estimate(float(a), bool(c)) for a, c in zip(a_hat, clamped))
    boot = bootstrap_rmse_std(
        estimates, a_n, config.bootstrap_resamples, config.seed, key=(_BOOTSTRAP_STREAM, n)
    )
    bound = crb(config.m, fisher_noisy(n, a_n, config.noise.visibility))
    return SweepRecord(n, a_n, outcomes, estimates, rmse(estimates, a_n), boot, bound)


def run_sweep(config: ExperimentConfig, workers: int | None = None) -> list[SweepRecord]:
    """Simulate, estimate and bootstrap every ``n`` in ``config.n_range``.

    Records come back in ``n_range`` order whatever ``workers`` is set to.
    """
    workers = workers or os.cpu_count() or 1
    if workers == 1 or len(config.n_range) == 1:
        return [_sweep_one(config, n) for n in config.n_range]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda n: _sweep_one(config, n), config.n_range))


def fringe_data(outcomes: Sequence[tuple[int, TrialOutcome]]):
    """Pool ``(n, outcome)`` pairs into per-n ``(n, mean P_minus, shots)`` arrays."""
    clicks: dict[int, int] = {}
    shots: dict[int, int] = {}
    for n, o in outcomes:
        clicks[n] = clicks.get(n, 0) + o.k_minus
        shots[n] = shots.get(n, 0) + o.m
    ns = sorted(clicks)
    s = np.array([shots[n] for n in ns], dtype=float)
    p = np.array([clicks[n] for n in ns], dtype=float) / s
    return np.array(ns, dtype=float), p, s


def fit_sweep_fringe(config: ExperimentConfig, sweep: Sequence[SweepRecord], fix_nu=None) -> FringeFit:
    pairs = [(r.n, o) for r in sweep for o in r.outcomes]
    n, p, shots = fringe_data(pairs)
    return fit_fringe(
        n, p, binomial_weights(p, shots), model=config.fit_model,
        fix_nu=fix_nu, fit_nuisance=config.fit_nuisance,
    )


def scaling_filter(config: ExperimentConfig):
    """Predicate keeping the ``n`` where the fringe is far enough from an extremum.

    At fixed ``A`` the information oscillates with ``n``, so only points
    with ``sin^2`` of the phase above 0.3 are used. In
    ``optimal_phase_mode`` every ``n > 0`` qualifies.
    """

    def keep(n):
        if n <= 0:
            return False
        if config.optimal_phase_mode:
            return True
        phase = n * n * per_pair_phase(config, n) + phase_offset(config, n)
        return math.sin(phase) ** 2 > 0.3

    return keep


@dataclass(frozen=True)
class ViolationRecord:
    n: int
    rmse: float
    rmse_std: float
    crb: float
    hl_bound: float
    sql_bound: float
    sigma_margin: float
    violated: bool


@dataclass(frozen=True)
class ViolationReport:
    records: tuple[ViolationRecord, ...]
    criterion_value: float
    criterion_n: int

    def by_n(self) -> dict[int, ViolationRecord]:
        return {r.n: r for r in self.records}


def _bounds(config, n):
    if n == 0:
        return math.inf, math.inf
    eta, xi = config.noise.efficiency, config.noise.multi_pair
    return hl_bound(config.m, n, eta, xi), sql_bound(config.m, n, eta, xi)


def assemble_report(rows: Sequence[Mapping[str, float]], config: ExperimentConfig) -> ViolationReport:
    """Build the per-n comparison from rows carrying ``n``, ``rmse``, ``rmse_std`` (and optionally ``crb``).

    The bounds are recomputed from ``config``, so the same rows can be
    re-judged under different noise assumptions.
    """
    records = []
    for row in rows:
        n = int(row["n"])
        err, std = float(row["rmse"]), float(row["rmse_std"])
        hl, sql = _bounds(config, n)
        bound = float(row["crb"]) if "crb" in row else (
            crb(config.m, fisher_noisy(n, per_pair_phase(config, n), config.noise.visibility))
        )
        if math.isnan(err) or math.isinf(hl):
            margin, violated = math.nan, False
        else:
            violated = err < hl
            margin = (hl - err) / std if std > 0 else math.copysign(math.inf, hl - err)
        records.append(ViolationRecord(n, err, std, bound, hl, sql, margin, violated))
    n_max = max(int(r["n"]) for r in rows)
    value = hl_criterion(config.noise, config.m, n_max) if n_max > 0 else 0.0
    return ViolationReport(tuple(records), value, n_max)


def sweep_rows(sweep: Sequence[SweepRecord]) -> list[dict[str, float]]:
    rows = []
    for r in sweep:
        rows.append({
            "n": r.n,
            "rmse": r.rmse.rmse if r.rmse else math.nan,
            "rmse_std": r.bootstrap.rmse_std if r.bootstrap else math.nan,
            "crb": r.crb,
        })
    return rows


def violation_report(config: ExperimentConfig, sweep: Sequence[SweepRecord] | None = None, workers=None) -> ViolationReport:
    if sweep is None:
        sweep = run_sweep(config, workers)
    return assemble_report(sweep_rows(sweep), config)


def reference_curves(config: ExperimentConfig, n: int) -> dict[str, float]:
    """Theory lines for plotting next to the measured RMSE.

    Two readings of the ``1/(sqrt(nu) N^2)`` curve are emitted, because it is
    unclear whether ``N`` absorbs ``sqrt(m)``: ``1/(sqrt(m) nu n^2)``
    (best-phase Cramer-Rao bound) and the literal ``1/(sqrt(nu) n^2)``.
    """
    hl, sql = _bounds(config, n)
    if n == 0:
        return {"hl_bound": hl, "sql_bound": sql, "crb_best_phase": math.inf, "ref_sqrt_nu": math.inf}
    nu = config.noise.visibility
    best = math.inf if nu == 0 else 1.0 / (math.sqrt(config.m) * nu * n * n)
    lit = math.inf if nu == 0 else 1.0 / (math.sqrt(nu) * n * n)
    return {"hl_bound": hl, "sql_bound": sql, "crb_best_phase": best, "ref_sqrt_nu": lit}
