"""Fringe-curve and precision-scaling fits.

The fringe model is

    P_minus(n) = (1 - nu * g(A n^2 + c n + phi0)) / 2,

where ``g`` is ``cos`` or ``cos**2``. The ``c n + phi0`` terms absorb
apparatus phases that grow linearly with the number of pairs. They play no
part in the ``n**2`` scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_consistent_length, check_is_fitted, column_or_1d

from .exceptions import FitConvergenceError, InsufficientDataError

__all__ = [
    "FRINGE_MODELS",
    "FringeFit",
    "FringeFitter",
    "ScalingFit",
    "ScalingFitter",
    "binomial_weights",
    "fringe_model",
    "fit_fringe",
    "fit_scaling",
]

FRINGE_MODELS = ("cosine", "cosine_squared")


@dataclass(frozen=True)
class FringeFit:
    a_fit: float
    c_fit: float
    phi0_fit: float
    nu_fit: float
    sse: float
    model: str = "cosine"
    nu_fixed: bool = False
    converged: bool = True
    grad_norm: float = 0.0


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    prefactor: float
    n_used: tuple[int, ...]


def _g(model, phi):
    c = np.cos(phi)
    return c if model == "cosine" else c * c


def _dg(model, phi):
    return -np.sin(phi) if model == "cosine" else -np.sin(2.0 * phi)


def fringe_model(n, a, c=0.0, phi0=0.0, nu=1.0, model="cosine"):
    """Evaluate ``(1 - nu g(a n^2 + c n + phi0)) / 2``."""
    if model not in FRINGE_MODELS:
        raise ValueError(f"model must be one of {FRINGE_MODELS}, got {model!r}")
    n = np.asarray(n, dtype=float)
    return 0.5 * (1.0 - nu * _g(model, a * n * n + c * n + phi0))


def binomial_weights(p_minus, shots):
    """Inverse binomial variance ``1 / max(p(1-p)/shots, 1/(4 shots^2))``."""
    p = np.asarray(p_minus, dtype=float)
    shots = np.asarray(shots, dtype=float)
    var = np.maximum(p * (1.0 - p) / shots, 1.0 / (4.0 * shots**2))
    return 1.0 / var


class FringeFitter(RegressorMixin, BaseEstimator):
    """Weighted least-squares fit of the switch fringe against the number of pairs.

    A coarse grid over ``(A, c, phi0)`` picks the starting points and
    Levenberg-Marquardt refines them. The fit only counts as converged once
    the SSE gradient norm is below ``grad_tol * (1 + sse)``. Otherwise
    :class:`FitConvergenceError` is raised with the best point attached.
    """

    def __init__(
        self,
        model="cosine",
        fit_nuisance=True,
        fix_nu=None,
        a_bounds=None,
        c_bounds=(-0.25, 0.25),
        grid_size=(256, 51, 32),
        n_starts=3,
        max_nfev=5000,
        grad_tol=1e-8,
    ):
        self.model = model
        self.fit_nuisance = fit_nuisance
        self.fix_nu = fix_nu
        self.a_bounds = a_bounds
        self.c_bounds = c_bounds
        self.grid_size = grid_size
        self.n_starts = n_starts
        self.max_nfev = max_nfev
        self.grad_tol = grad_tol

    # parameter vector layout: [a, (c, phi0)?, (nu)?]
    def _unpack(self, theta):
        a = theta[0]
        c, phi0 = (theta[1], theta[2]) if self.fit_nuisance else (0.0, 0.0)
        nu = self.fix_nu if self.fix_nu is not None else theta[-1]
        return a, c, phi0, nu

    def _residuals(self, theta, n, y, sw):
        a, c, phi0, nu = self._unpack(theta)
        return sw * (fringe_model(n, a, c, phi0, nu, self.model) - y)

    def _jacobian(self, theta, n, y, sw):
        a, c, phi0, nu = self._unpack(theta)
        phi = a * n * n + c * n + phi0
        h = sw * (-0.5 * nu * _dg(self.model, phi))
        cols = [h * n * n]
        if self.fit_nuisance:
            cols += [h * n, h]
        if self.fix_nu is None:
            cols.append(sw * (-0.5 * _g(self.model, phi)))
        return np.column_stack(cols)

    def _grid_starts(self, n, y, w):
        n_max = float(n.max())
        a_lo, a_hi = self.a_bounds if self.a_bounds is not None else (0.0, math.pi / (2.0 * n_max))
        na, nc, nphi = self.grid_size
        a_grid = np.linspace(a_lo, a_hi, na)
        if self.fit_nuisance:
            c_grid = np.linspace(self.c_bounds[0], self.c_bounds[1], nc)
            span = 2.0 * math.pi if self.model == "cosine" else math.pi
            phi_grid = np.linspace(-span / 2, span / 2, nphi, endpoint=False)
        else:
            c_grid = phi_grid = np.zeros(1)
        cc, pp = np.meshgrid(c_grid, phi_grid, indexing="ij")
        cc, pp = cc.ravel(), pp.ravel()
        lin = cc[:, None] * n + pp[:, None]
        e = 0.5 - y
        best = []
        for a in a_grid:
            g = _g(self.model, a * n * n + lin)
            if self.fix_nu is None:
                # visibility enters linearly: solve it per grid point
                nu = np.clip(2.0 * (w * e * g).sum(1) / np.maximum((w * g * g).sum(1), 1e-300), 0.0, 1.0)
            else:
                nu = np.full(g.shape[0], float(self.fix_nu))
            sse = (w * (0.5 * nu[:, None] * g - e) ** 2).sum(1)
            i = int(np.argmin(sse))
            best.append((float(sse[i]), float(a), float(cc[i]), float(pp[i]), float(nu[i])))
        best.sort()
        starts = []
        for sse, a, c, phi0, nu in best:
            # keep starts that sit in different basins of the A grid
            if all(abs(a - s[0]) > 2 * (a_grid[1] - a_grid[0] if na > 1 else 0) for s in starts):
                theta = [a] + ([c, phi0] if self.fit_nuisance else []) + ([nu] if self.fix_nu is None else [])
                starts.append(theta)
            if len(starts) >= self.n_starts:
                break
        return starts

    def _normalise(self, a, c, phi0):
        if self.model == "cosine" and a < 0:
            a, c, phi0 = -a, -c, -phi0
        period = 2.0 * math.pi if self.model == "cosine" else math.pi
        phi0 = math.remainder(phi0, period)
        return a, c, phi0

    def fit(self, X, y, sample_weight=None):
        if self.model not in FRINGE_MODELS:
            raise ValueError(f"model must be one of {FRINGE_MODELS}, got {self.model!r}")
        n = column_or_1d(np.asarray(X, dtype=float))
        y = column_or_1d(np.asarray(y, dtype=float))
        check_consistent_length(n, y)
        if n.size < 4:
            raise InsufficientDataError(f"fringe fit needs at least 4 points, got {n.size}")
        if not (np.all(np.isfinite(n)) and np.all(np.isfinite(y))):
            raise ValueError("fringe data must be finite")
        if n.max() <= 0:
            raise InsufficientDataError("fringe fit needs some n > 0")
        w = np.ones_like(n) if sample_weight is None else column_or_1d(np.asarray(sample_weight, dtype=float))
        check_consistent_length(n, w)
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be positive and finite")
        sw = np.sqrt(w)

        eps = np.finfo(float).eps
        best = None
        for theta0 in self._grid_starts(n, y, w):
            res = least_squares(
                self._residuals, np.asarray(theta0, dtype=float), jac=self._jacobian,
                args=(n, y, sw), method="lm", x_scale="jac",
                ftol=eps, xtol=eps, gtol=eps, max_nfev=self.max_nfev,
            )
            theta = self._polish(res.x, n, y, sw)
            r = self._residuals(theta, n, y, sw)
            sse = float(r @ r)
            if best is None or sse < best[0]:
                best = (sse, theta, r)
        sse, theta, r = best
        grad = 2.0 * self._jacobian(theta, n, y, sw).T @ r
        self.grad_norm_ = float(np.linalg.norm(grad))
        a, c, phi0, nu = self._unpack(theta)
        self.a_, self.c_, self.phi0_ = self._normalise(float(a), float(c), float(phi0))
        self.nu_ = float(nu)
        self.sse_ = sse
        self.converged_ = self.grad_norm_ < self.grad_tol * (1.0 + abs(sse))
        self.n_features_in_ = 1
        if not self.converged_:
            raise FitConvergenceError(
                f"fringe fit stalled with gradient norm {self.grad_norm_:.3e} (sse {sse:.6g})",
                best=self.result(),
            )
        return self

    def _hessian(self, theta, n, y, sw):
        """Exact Hessian of ``sse / 2``: ``J^T J`` plus the residual-curvature term."""
        a, c, phi0, nu = self._unpack(theta)
        phi = a * n * n + c * n + phi0
        r = self._residuals(theta, n, y, sw)
        J = self._jacobian(theta, n, y, sw)
        if self.model == "cosine":
            d2g = -np.cos(phi)
        else:
            d2g = -2.0 * np.cos(2.0 * phi)
        v = [n * n] + ([n, np.ones_like(n)] if self.fit_nuisance else [])
        k = len(v)
        H = J.T @ J
        wr = sw * r
        for i in range(k):
            for j in range(k):
                H[i, j] += np.sum(wr * (-0.5 * nu * d2g) * v[i] * v[j])
        if self.fix_nu is None:
            for i in range(k):
                cross = np.sum(wr * (-0.5 * _dg(self.model, phi)) * v[i])
                H[i, k] += cross
                H[k, i] += cross
        return H

    def _polish(self, theta, n, y, sw, steps=50):
        """Newton iterations on the SSE until the gradient test passes.

        Near the optimum the SSE only moves at rounding level, so a step is
        accepted when it keeps the SSE within that level and shrinks the
        gradient.
        """
        r = self._residuals(theta, n, y, sw)
        sse = r @ r
        grad = self._jacobian(theta, n, y, sw).T @ r
        for _ in range(steps):
            if 2.0 * np.linalg.norm(grad) < self.grad_tol * (1.0 + sse):
                break
            try:
                step = np.linalg.solve(self._hessian(theta, n, y, sw), -grad)
            except np.linalg.LinAlgError:
                break
            cand = theta + step
            rc = self._residuals(cand, n, y, sw)
            sc = rc @ rc
            gc = self._jacobian(cand, n, y, sw).T @ rc
            if not (sc <= sse + 1e-12 * (1.0 + sse) and np.linalg.norm(gc) < np.linalg.norm(grad)):
                break
            theta, r, sse, grad = cand, rc, sc, gc
        return theta

    def result(self) -> FringeFit:
        check_is_fitted(self, "sse_")
        return FringeFit(
            self.a_, self.c_, self.phi0_, self.nu_, self.sse_, self.model,
            self.fix_nu is not None, bool(self.converged_), self.grad_norm_,
        )

    def predict(self, X):
        check_is_fitted(self, "sse_")
        n = column_or_1d(np.asarray(X, dtype=float))
        return fringe_model(n, self.a_, self.c_, self.phi0_, self.nu_, self.model)


def fit_fringe(n, p_minus, weights=None, model="cosine", fix_nu=None, fit_nuisance=True, **kwargs) -> FringeFit:
    """Fit per-n mean ``P_minus`` values; see :class:`FringeFitter`."""
    fitter = FringeFitter(model=model, fix_nu=fix_nu, fit_nuisance=fit_nuisance, **kwargs)
    return fitter.fit(n, p_minus, sample_weight=weights).result()


class ScalingFitter(BaseEstimator):
    """Power law ``rmse = prefactor * n**exponent`` fitted on log-log axes."""

    def fit(self, X, y):
        n = column_or_1d(np.asarray(X, dtype=float))
        r = column_or_1d(np.asarray(y, dtype=float))
        check_consistent_length(n, r)
        if n.size < 3:
            raise InsufficientDataError(f"scaling fit needs at least 3 points, got {n.size}")
        if np.any(n <= 0) or np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise ValueError("scaling fit needs positive n and positive finite rmse")
        slope, intercept = np.polyfit(np.log(n), np.log(r), 1)
        self.exponent_ = float(slope)
        self.prefactor_ = float(math.exp(intercept))
        self.n_used_ = tuple(int(v) for v in n)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        n = column_or_1d(np.asarray(X, dtype=float))
        return self.prefactor_ * n**self.exponent_


def fit_scaling(
    rmse_by_n: Mapping[int, float] | Iterable[tuple[int, float]],
    n_filter: Callable[[int], bool] | None = None,
) -> ScalingFit:
    pairs = sorted(dict(rmse_by_n).items())
    if n_filter is not None:
        pairs = [(n, r) for n, r in pairs if n_filter(n)]
    if len(pairs) < 3:
        raise InsufficientDataError(f"scaling fit needs at least 3 points after filtering, got {len(pairs)}")
    ns, rs = zip(*pairs)
    fitter = ScalingFitter().fit(ns, rs)
    return ScalingFit(fitter.exponent_, fitter.prefactor_, tuple(int(n) for n in ns))
