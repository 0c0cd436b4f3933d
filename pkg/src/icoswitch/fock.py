"""Brute-force truncated Fock-space model of the switch.

Displacements are built element by element from the closed-form
number-basis matrix elements of ``D(alpha) = exp(alpha a^dag - alpha^* a)``
(Cahill & Glauber), so each truncated matrix is an exact block of the
infinite operator. The norm that leaks past the cutoff is therefore a direct
measure of the truncation error, and it is checked against a budget after
every displacement.

The control qubit is never stored as a tensor factor. Projecting it onto
``|+->`` only needs the two branch states, so the probabilities come from
``||A +- B||^2 / 4``. A switch over three or more orders would need a
different construction.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from ._validation import check_int
from .exceptions import TruncationError
from .switch import DisplacementSequence, OutcomeProbabilities

__all__ = [
    "DEFAULT_CUTOFF",
    "DEFAULT_BUDGET",
    "FockState",
    "ModeOperator",
    "Order",
    "displacement_matrix",
    "position_displacement",
    "momentum_displacement",
    "apply_order",
    "branch_overlap",
    "oracle_probabilities",
]

DEFAULT_CUTOFF = 64
DEFAULT_BUDGET = 1e-7


class Order(enum.Enum):
    """Operator ordering of one switch branch.

    ``XP`` is the product ``prod D_x prod D_p`` (momentum kicks act first) and
    is the branch tied to control ``|0>``; ``PX`` is the reverse.
    """

    XP = "XP"
    PX = "PX"


@dataclass(frozen=True)
class FockState:
    amplitudes: np.ndarray
    budget: float = DEFAULT_BUDGET
    norm_loss: float = field(init=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 1:
            raise ValueError("amplitudes must be a non-empty vector")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        loss = 1.0 - float(np.vdot(amps, amps).real)
        object.__setattr__(self, "norm_loss", loss)
        if loss > self.budget:
            raise TruncationError(loss, self.budget)
        if loss < -1e-10:
            raise ValueError(f"state norm exceeds one by {-loss:.3e}")

    @property
    def cutoff(self) -> int:
        return self.amplitudes.size

    @classmethod
    def vacuum(cls, cutoff=DEFAULT_CUTOFF, budget=DEFAULT_BUDGET):
        amps = np.zeros(check_int(cutoff, "cutoff", minimum=1), dtype=complex)
        amps[0] = 1.0
        return cls(amps, budget)

    @classmethod
    def coherent(cls, alpha, cutoff=DEFAULT_CUTOFF, budget=DEFAULT_BUDGET):
        """Coherent state ``|alpha>`` from its Poisson amplitudes, truncated."""
        cutoff = check_int(cutoff, "cutoff", minimum=1)
        alpha = complex(alpha)
        k = np.arange(cutoff)
        if alpha == 0:
            amps = (k == 0).astype(complex)
        else:
            log_mag = -0.5 * abs(alpha) ** 2 + k * math.log(abs(alpha)) - 0.5 * gammaln(k + 1)
            amps = np.exp(log_mag) * np.exp(1j * cmath.phase(alpha) * k)
        return cls(amps, budget)


@dataclass(frozen=True)
class ModeOperator:
    matrix: np.ndarray

    @property
    def cutoff(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        if isinstance(other, ModeOperator):
            return ModeOperator(self.matrix @ other.matrix)
        return self.matrix @ other

    def unitarity_defect(self, block=None) -> float:
        """Max-abs entry of ``M^dag M - I`` on the leading ``block`` levels."""
        block = self.cutoff if block is None else block
        m = self.matrix[:, :block]
        return float(np.max(np.abs(m.conj().T @ m - np.eye(block))))


@lru_cache(maxsize=256)
def _displacement_array(alpha: complex, cutoff: int) -> np.ndarray:
    r2 = abs(alpha) ** 2
    row, col = np.indices((cutoff, cutoff))
    hi = np.maximum(row, col)
    lo = np.minimum(row, col)
    d = hi - lo
    # <m|D|n> for m >= n uses alpha; the upper triangle uses -alpha^*
    base = np.where(row >= col, alpha, -np.conj(alpha))
    power = np.power(base, d)
    norm = np.exp(0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) - 0.5 * r2)
    lag = eval_genlaguerre(lo, d, r2)
    out = norm * power * lag
    out.setflags(write=False)
    return out


def displacement_matrix(alpha, cutoff=DEFAULT_CUTOFF) -> ModeOperator:
    """Leading ``cutoff x cutoff`` block of ``exp(alpha a^dag - alpha^* a)``."""
    alpha = complex(alpha)
    if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
        raise ValueError(f"alpha must be finite, got {alpha!r}")
    cutoff = check_int(cutoff, "cutoff", minimum=2)
    return ModeOperator(_displacement_array(alpha, cutoff))


def position_displacement(x, cutoff=DEFAULT_CUTOFF) -> ModeOperator:
    """``exp(-i x P)`` with ``P = i(a^dag - a)/sqrt 2``: a real amplitude ``x/sqrt 2``."""
    return displacement_matrix(complex(x / math.sqrt(2.0), 0.0), cutoff)


def momentum_displacement(p, cutoff=DEFAULT_CUTOFF) -> ModeOperator:
    """``exp(-i p X)`` with ``X = (a + a^dag)/sqrt 2``: amplitude ``-i p/sqrt 2``."""
    return displacement_matrix(complex(0.0, -p / math.sqrt(2.0)), cutoff)


def apply_order(seq: DisplacementSequence, order: Order | str, psi: FockState) -> FockState:
    """Evolve ``psi`` through one branch of the switch.

    Raises :class:`TruncationError` as soon as the accumulated norm loss
    exceeds ``psi.budget``.
    """
    order = Order(order)
    cutoff = psi.cutoff
    if cutoff < 2:
        raise ValueError("cutoff must be at least 2")
    x_ops = [position_displacement(x, cutoff) for x in seq.x_list]
    p_ops = [momentum_displacement(p, cutoff) for p in seq.p_list]
    factors = x_ops + p_ops if order is Order.XP else p_ops + x_ops
    vec = np.array(psi.amplitudes)
    # rightmost factor acts first
    for op in reversed(factors):
        vec = op.matrix @ vec
        loss = 1.0 - float(np.vdot(vec, vec).real)
        if loss > psi.budget:
            raise TruncationError(loss, psi.budget)
    return FockState(vec, psi.budget)


def branch_overlap(seq: DisplacementSequence, psi: FockState) -> complex:
    """``<PX branch | XP branch>``; for exact displacements this is ``exp(+i n^2 A)``."""
    a = apply_order(seq, Order.XP, psi).amplitudes
    b = apply_order(seq, Order.PX, psi).amplitudes
    return complex(np.vdot(b, a))


def oracle_probabilities(seq: DisplacementSequence, psi: FockState) -> OutcomeProbabilities:
    a = apply_order(seq, Order.XP, psi).amplitudes
    b = apply_order(seq, Order.PX, psi).amplitudes
    plus = 0.25 * float(np.vdot(a + b, a + b).real)
    minus = 0.25 * float(np.vdot(a - b, a - b).real)
    return OutcomeProbabilities.from_p_plus(plus / (plus + minus))
