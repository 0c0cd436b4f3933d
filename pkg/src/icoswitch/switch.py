"""Noise-free algebra of the position/momentum quantum switch.

Units are dimensionless quadratures with ``[X, P] = i``. A position
displacement is ``exp(-i x P)`` and a momentum displacement ``exp(-i p X)``.
Placing the total displacements in both orders gives

    D_x D_p = exp(+i x p) D_p D_x,

so the two branches of the switch differ by the phase ``(sum x)(sum p)``.
That phase equals ``n**2 * A`` where ``A`` is the product of the mean
displacements. The sign is invisible in the outcome probabilities because
they depend only on its cosine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ._validation import check_finite, check_int

__all__ = [
    "DisplacementSequence",
    "GeometricPhase",
    "OutcomeProbabilities",
    "total_displacements",
    "geometric_phase",
    "ideal_probabilities",
    "phase_from_means",
]


@dataclass(frozen=True)
class DisplacementSequence:
    """The ``n`` position displacements and ``n`` momentum displacements."""

    x_list: tuple[float, ...]
    p_list: tuple[float, ...]

    def __post_init__(self):
        xs = tuple(check_finite(v, "x displacement") for v in self.x_list)
        ps = tuple(check_finite(v, "p displacement") for v in self.p_list)
        if len(xs) != len(ps):
            raise ValueError(
                f"x_list and p_list must have equal length, got {len(xs)} and {len(ps)}"
            )
        object.__setattr__(self, "x_list", xs)
        object.__setattr__(self, "p_list", ps)

    @classmethod
    def uniform(cls, n: int, x: float, p: float) -> "DisplacementSequence":
        n = check_int(n, "n", minimum=0)
        return cls((x,) * n, (p,) * n)

    @classmethod
    def from_physical(
        cls, n: int, x_metres: float, p_rad_per_metre: float, scale: float | None = None
    ) -> "DisplacementSequence":
        """Uniform sequence from a lateral shift (m) and a transverse wavevector (rad/m).

        Any length ``scale`` works since only the product ``x*p`` is physical;
        the default splits it evenly between the two quadratures.
        """
        if scale is None:
            scale = math.sqrt(abs(p_rad_per_metre / x_metres)) if x_metres else 1.0
        return cls.uniform(n, x_metres * scale, p_rad_per_metre / scale)

    @property
    def n(self) -> int:
        return len(self.x_list)

    @property
    def x_mean(self) -> float:
        return math.fsum(self.x_list) / self.n if self.n else 0.0

    @property
    def p_mean(self) -> float:
        return math.fsum(self.p_list) / self.n if self.n else 0.0


@dataclass(frozen=True)
class GeometricPhase:
    """Total phase between the two causal orders and the per-pair value ``A``."""

    value: float
    per_pair: float


@dataclass(frozen=True)
class OutcomeProbabilities:
    """Probabilities of the ``|+>`` and ``|->`` control outcomes."""

    p_plus: float
    p_minus: float

    @classmethod
    def from_p_plus(cls, p_plus: float) -> "OutcomeProbabilities":
        p_plus = min(max(float(p_plus), 0.0), 1.0)
        return cls(p_plus, 1.0 - p_plus)


def total_displacements(seq: DisplacementSequence) -> tuple[float, float]:
    """Return ``(sum x_j, sum p_k)``; same-type displacements commute and add."""
    return math.fsum(seq.x_list), math.fsum(seq.p_list)


def geometric_phase(seq: DisplacementSequence) -> GeometricPhase:
    x_tot, p_tot = total_displacements(seq)
    value = x_tot * p_tot
    per_pair = value / seq.n**2 if seq.n else 0.0
    return GeometricPhase(value, per_pair)


def _phase_value(phase) -> float:
    if isinstance(phase, GeometricPhase):
        phase = phase.value
    return check_finite(phase, "phase")


def ideal_probabilities(phase: GeometricPhase | float) -> OutcomeProbabilities:
    """Fourier-basis outcome probabilities ``(1 +- cos(phase)) / 2``."""
    return OutcomeProbabilities.from_p_plus(0.5 * (1.0 + math.cos(_phase_value(phase))))


def phase_from_means(n: int, a: float) -> GeometricPhase:
    """Phase of a uniform sequence with ``n`` pairs and per-pair product ``a``."""
    n = check_int(n, "n", minimum=0)
    return GeometricPhase(n * n * a, a if n else 0.0)

