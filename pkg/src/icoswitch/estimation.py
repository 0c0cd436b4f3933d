"""Fisher information, Cramer-Rao bounds and maximum-likelihood phase inversion.

The fringe is periodic in the total phase, so inverting it is only local.
Every estimate is made inside a prior window of width at most one
half-period. Within that window the binomial likelihood has a single
maximum, which the closed-form inversion below finds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, column_or_1d

from . import _random
from ._validation import check_int, check_interval, check_seed
from .exceptions import InsufficientDataError, InvalidPriorError

__all__ = [
    "TrialOutcome",
    "Estimate",
    "RmseResult",
    "BootstrapResult",
    "fisher_ideal",
    "fisher_noisy",
    "crb",
    "prior_branch",
    "mle_estimate",
    "mle_many",
    "rmse",
    "bootstrap_rmse_std",
    "PhaseEstimator",
]

_TWO_PI = 2.0 * math.pi
# slack, in radians, when testing whether a window fits in a half-period
_WINDOW_TOL = 1e-9


@dataclass(frozen=True)
class TrialOutcome:
    """Number of ``|->`` clicks among ``m`` detected photons."""

    k_minus: int
    m: int = 60

    def __post_init__(self):
        m = check_int(self.m, "m", minimum=1)
        k = check_int(self.k_minus, "k_minus", minimum=0)
        if k > m:
            raise ValueError(f"k_minus={k} exceeds m={m}")


@dataclass(frozen=True)
class Estimate:
    a_hat: float
    clamped: bool = False


@dataclass(frozen=True)
class RmseResult:
    rmse: float
    trials: int
    a_true: float


@dataclass(frozen=True)
class BootstrapResult:
    rmse_std: float
    resamples: int
    seed: int


def fisher_ideal(n: int) -> int:
    """Fisher information ``n**4`` of the ideal switch fringe."""
    n = check_int(n, "n", minimum=0)
    return n**4


def fisher_noisy(n: int, a: float, visibility: float, return_flag: bool = False):
    """Classical Fisher information of the visibility-degraded fringe for ``A``.

    ``nu^2 n^4 sin^2(n^2 A) / (1 - nu^2 cos^2(n^2 A))``. At ``nu = 1`` with
    ``sin(n^2 A) = 0`` the ratio is 0/0; the removable limit ``n^4`` is
    returned and, with ``return_flag=True``, reported as ``(value, True)``.
    """
    n = check_int(n, "n", minimum=0)
    nu = check_interval(visibility, "visibility", 0.0, 1.0)
    phase = n * n * float(a)
    s2 = math.sin(phase) ** 2
    # 1 - nu^2 cos^2 written to avoid cancellation near the extrema
    denom = (1.0 - nu * nu) + nu * nu * s2
    limit = False
    if n == 0:
        value = 0.0
    elif denom == 0.0:
        value, limit = float(n**4), True
    else:
        value = nu * nu * n**4 * s2 / denom
    return (value, limit) if return_flag else value


def crb(m: int, fisher: float) -> float:
    """Cramer-Rao bound ``1/sqrt(m F)``; ``inf`` when there is no information."""
    m = check_int(m, "m", minimum=1)
    fisher = float(fisher)
    if fisher < 0 or math.isnan(fisher):
        raise ValueError(f"fisher information must be non-negative, got {fisher}")
    if fisher == 0.0:
        return math.inf
    return 1.0 / math.sqrt(m * fisher)


def prior_branch(a_design: float, n: int, offset: float = 0.0) -> tuple[float, float]:
    """The half-period ``[j pi, (j+1) pi]`` of total phase holding the design point, in units of ``A``."""
    n = check_int(n, "n", minimum=1)
    phase = n * n * float(a_design) + offset
    j = math.floor(phase / math.pi)
    n2 = float(n * n)
    return ((j * math.pi - offset) / n2, ((j + 1) * math.pi - offset) / n2)


def _cos_range(lo: float, hi: float) -> tuple[float, float]:
    """Range of ``cos`` over the phase interval ``[lo, hi]``."""
    has_max = math.floor(hi / _TWO_PI) >= math.ceil(lo / _TWO_PI)
    has_min = math.floor((hi - math.pi) / _TWO_PI) >= math.ceil((lo - math.pi) / _TWO_PI)
    ends = (math.cos(lo), math.cos(hi))
    return (-1.0 if has_min else min(ends)), (1.0 if has_max else max(ends))


def _invert(u, lo, hi):
    """Phase(s) in ``[lo, hi]`` with ``cos(phase) = u``; ties go to the window centre."""
    t = np.arccos(u)
    mid = 0.5 * (lo + hi)
    c1 = t + _TWO_PI * np.ceil((lo - t) / _TWO_PI - 1e-12)
    c2 = -t + _TWO_PI * np.ceil((lo + t) / _TWO_PI - 1e-12)
    ok1 = (c1 >= lo - _WINDOW_TOL) & (c1 <= hi + _WINDOW_TOL)
    ok2 = (c2 >= lo - _WINDOW_TOL) & (c2 <= hi + _WINDOW_TOL)
    d1 = np.where(ok1, np.abs(c1 - mid), np.inf)
    d2 = np.where(ok2, np.abs(c2 - mid), np.inf)
    phase = np.where(d1 <= d2, c1, c2)
    # rounding can leave neither candidate inside; fall back to the nearer edge
    edge = np.where(np.abs(np.cos(lo) - u) <= np.abs(np.cos(hi) - u), lo, hi)
    phase = np.where(ok1 | ok2, phase, edge)
    return np.clip(phase, lo, hi)


def _check_window(n, prior, offset):
    lo_a, hi_a = (float(v) for v in prior)
    if not (math.isfinite(lo_a) and math.isfinite(hi_a)) or hi_a < lo_a:
        raise InvalidPriorError(f"prior must be a finite interval (lo <= hi), got {prior!r}")
    n2 = n * n
    lo, hi = n2 * lo_a + offset, n2 * hi_a + offset
    if hi - lo > math.pi + _WINDOW_TOL:
        raise InvalidPriorError(
            f"prior {prior!r} spans {hi - lo:.4f} rad of fringe phase at n={n}; "
            "at most one half-period (pi) is invertible"
        )
    return lo, hi


def mle_many(k_minus, m: int, n: int, visibility: float, prior, offset: float = 0.0):
    """Vectorised MLE. Returns ``(a_hat, clamped)`` arrays for an array of counts.

    The log-likelihood depends on the phase only through ``u = cos(phase)``
    and is concave in ``u``. Its unconstrained maximiser is
    ``u = (1 - 2k/m)/nu``. Clipping that to the range ``cos`` takes over the
    window gives the constrained maximum, and the phase is recovered on the
    window.
    """
    m = check_int(m, "m", minimum=1)
    n = check_int(n, "n", minimum=1)
    nu = check_interval(visibility, "visibility", 0.0, 1.0, low_open=True)
    lo, hi = _check_window(n, prior, offset)
    k = np.asarray(k_minus, dtype=float)
    if np.any((k < 0) | (k > m)):
        raise ValueError("counts must lie in [0, m]")
    u_free = (1.0 - 2.0 * k / m) / nu
    u_min, u_max = _cos_range(lo, hi)
    u = np.clip(u_free, u_min, u_max)
    clamped = u != u_free
    phase = _invert(u, lo, hi)
    return (phase - offset) / (n * n), clamped


def mle_estimate(outcome: TrialOutcome, n: int, visibility: float, prior, offset: float = 0.0) -> Estimate:
    """Maximum-likelihood ``A`` from one trial, restricted to ``prior``.

    ``offset`` is a known extra phase added to ``n**2 A``. Set it when the
    apparatus contributes a calibrated phase.
    """
    a_hat, clamped = mle_many([outcome.k_minus], outcome.m, n, visibility, prior, offset)
    return Estimate(float(a_hat[0]), bool(clamped[0]))


def _errors(estimates, a_true):
    vals = np.array([e.a_hat if isinstance(e, Estimate) else float(e) for e in estimates], dtype=float)
    if vals.size == 0:
        raise InsufficientDataError("need at least one estimate")
    return vals - float(a_true)


def rmse(estimates: Iterable[Estimate | float], a_true: float) -> RmseResult:
    """Root-mean-square error about ``a_true``. Clamped estimates count like any other."""
    err = _errors(list(estimates), a_true)
    return RmseResult(float(np.sqrt(np.mean(err**2))), int(err.size), float(a_true))


_BOOT_CHUNK = 1000


def bootstrap_rmse_std(
    estimates: Sequence[Estimate | float],
    a_true: float,
    resamples: int = 10_000,
    seed: int = 0,
    key: tuple[int, ...] = (),
) -> BootstrapResult:
    """Standard deviation of the RMSE over with-replacement resamples.

    Resamples are drawn in fixed-size chunks, and each chunk has its own
    counter-based stream. The result depends only on ``(seed, key)``, not on
    how the chunks are scheduled.
    """
    resamples = check_int(resamples, "resamples", minimum=100)
    seed = check_seed(seed)
    sq = _errors(list(estimates), a_true) ** 2
    size = sq.size
    stats = []
    for block, start in enumerate(range(0, resamples, _BOOT_CHUNK)):
        count = min(_BOOT_CHUNK, resamples - start)
        idx = _random.stream(seed, key, block).integers(0, size, size=(count, size))
        stats.append(np.sqrt(sq[idx].mean(axis=1)))
    stats = np.concatenate(stats)
    return BootstrapResult(float(np.std(stats, ddof=1)), resamples, seed)


class PhaseEstimator(TransformerMixin, BaseEstimator):
    """Maps ``|->`` counts from fixed-size trials to maximum-likelihood ``A``.

    Parameters
    ----------
    n_pairs : int
        Number of displacement pairs in the switch.
    visibility : float
        Fringe visibility assumed by the likelihood.
    m : int
        Detected photons per trial.
    prior : (float, float) or None
        Window for ``A``. If None it is the half-period holding ``a_design``.
    a_design : float or None
        Design value used to pick the default window.
    offset : float
        Known phase added to ``n_pairs**2 * A``.

    Attributes
    ----------
    prior_ : (float, float)
    a_hat_ : ndarray
        Estimates for the counts passed to ``fit``.
    clamped_ : ndarray of bool
    """

    def __init__(self, n_pairs=1, visibility=0.989, m=60, prior=None, a_design=None, offset=0.0):
        self.n_pairs = n_pairs
        self.visibility = visibility
        self.m = m
        self.prior = prior
        self.a_design = a_design
        self.offset = offset

    def _window(self):
        if self.prior is not None:
            return tuple(float(v) for v in self.prior)
        if self.a_design is None:
            raise InvalidPriorError("set either prior or a_design")
        return prior_branch(self.a_design, self.n_pairs, self.offset)

    def fit(self, X, y=None):
        counts = column_or_1d(np.asarray(X))
        self.prior_ = self._window()
        self.a_hat_, self.clamped_ = mle_many(
            counts, self.m, self.n_pairs, self.visibility, self.prior_, self.offset
        )
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        """Return the 1-D array of estimates for counts ``X``."""
        check_is_fitted(self, "prior_")
        counts = column_or_1d(np.asarray(X))
        return mle_many(counts, self.m, self.n_pairs, self.visibility, self.prior_, self.offset)[0]

    def score(self, X, y):
        """Negative RMSE of the estimates against the true ``A`` (scalar or per sample)."""
        a_hat = self.transform(X)
        return -float(np.sqrt(np.mean((a_hat - np.asarray(y, dtype=float)) ** 2)))
