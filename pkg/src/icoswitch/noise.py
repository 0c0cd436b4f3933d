"""Imperfect fringes, resource accounting and the SQL/HL violation tests.

Loss is outcome independent: a detected photon still follows the degraded
fringe, and lost photons only enlarge the resource count. Multi-pair
emission is accounted the same way. It inflates the number of photons
consumed but does not alter the detected statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ._validation import check_int, check_interval
from .switch import GeometricPhase, OutcomeProbabilities, _phase_value

__all__ = [
    "NoiseParams",
    "ResourceAccount",
    "noisy_probabilities",
    "hl_bound",
    "sql_bound",
    "hl_criterion",
    "sql_criterion",
    "resource_account",
]


@dataclass(frozen=True)
class NoiseParams:
    """Visibility, end-to-end detection efficiency and multi-pair probability.

    Defaults are the experiment's worst-case numbers: visibility 0.989,
    efficiency 0.506 measured across the whole switch, and multi-pair
    probability 4e-4.
    """

    visibility: float = 0.989
    efficiency: float = 0.506
    multi_pair: float = 0.0004

    def __post_init__(self):
        check_interval(self.visibility, "visibility", 0.0, 1.0)
        check_interval(self.efficiency, "efficiency", 0.0, 1.0, low_open=True)
        check_interval(self.multi_pair, "multi_pair", 0.0, 1.0, high_open=True)


@dataclass(frozen=True)
class ResourceAccount:
    detected: int
    pairs: int
    consumed: float
    global_resource: float


def noisy_probabilities(phase: GeometricPhase | float, visibility: float) -> OutcomeProbabilities:
    """``(1 +- nu cos(phase)) / 2``."""
    nu = check_interval(visibility, "visibility", 0.0, 1.0)
    return OutcomeProbabilities.from_p_plus(0.5 * (1.0 + nu * math.cos(_phase_value(phase))))


def _check_mn(m, n):
    return check_int(m, "m", minimum=1), check_int(n, "n", minimum=1)


def hl_bound(m: int, n: int, efficiency: float, multi_pair: float) -> float:
    """Heisenberg-limited RMSE ``1/N`` for the global resource ``N = m n (1+xi) / eta``."""
    m, n = _check_mn(m, n)
    return efficiency / (m * n * (1.0 + multi_pair))


def sql_bound(m: int, n: int, efficiency: float, multi_pair: float) -> float:
    """Shot-noise RMSE ``1/sqrt(N)`` for the same global resource."""
    return math.sqrt(hl_bound(m, n, efficiency, multi_pair))


def hl_criterion(params: NoiseParams, m: int, n: int) -> float:
    """``eta^2 nu^2 n^2 / (m (1+xi)^2)``; the HL can be beaten iff this exceeds 1.

    Squaring ``sqrt(m) (1+xi) < eta nu n`` produces the two factors of
    ``(1+xi)``. That inequality is the condition for the best-phase
    Cramer-Rao bound to fall below :func:`hl_bound`.
    """
    m, n = _check_mn(m, n)
    eta, nu, xi = params.efficiency, params.visibility, params.multi_pair
    return (eta * nu * n) ** 2 / (m * (1.0 + xi) ** 2)


def sql_criterion(params: NoiseParams, n: int) -> float:
    """``eta nu^2 n``; independent of the number of repetitions."""
    n = check_int(n, "n", minimum=1)
    return params.efficiency * params.visibility**2 * n


def resource_account(m: int, n: int, params: NoiseParams) -> ResourceAccount:
    m, n = _check_mn(m, n)
    consumed = m * (1.0 + params.multi_pair) / params.efficiency
    return ResourceAccount(m, n, consumed, consumed * n)
