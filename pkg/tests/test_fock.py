import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from icoswitch.exceptions import TruncationError
from icoswitch.fock import (
    FockState,
    Order,
    apply_order,
    branch_overlap,
    displacement_matrix,
    momentum_displacement,
    oracle_probabilities,
    position_displacement,
)
from icoswitch.switch import DisplacementSequence, geometric_phase, ideal_probabilities


def _generator(alpha, dim):
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    return alpha * a.conj().T - np.conj(alpha) * a


def _taylor_block(alpha, cutoff, pad=40, terms=40):
    """exp of the generator by its power series on a padded space, then truncated."""
    g = _generator(alpha, cutoff + pad)
    out = np.eye(cutoff + pad, dtype=complex)
    term = np.eye(cutoff + pad, dtype=complex)
    for k in range(1, terms):
        term = term @ g / k
        out = out + term
    return out[:cutoff, :cutoff]


@pytest.mark.parametrize("alpha", [1e-3, 0.01 + 0.02j, -0.05j, 0.1])
def test_matches_taylor_series(alpha):
    got = displacement_matrix(alpha, 64).matrix
    assert np.max(np.abs(got - _taylor_block(alpha, 64))) < 1e-10


def test_matches_expm_at_larger_alpha():
    alpha = 0.7 - 0.4j
    ref = expm(_generator(alpha, 160))[:32, :32]
    assert np.max(np.abs(displacement_matrix(alpha, 32).matrix - ref)) < 1e-10


def test_zero_displacement_is_identity():
    assert np.allclose(displacement_matrix(0, 16).matrix, np.eye(16), atol=0)


def test_inverse_pair_on_low_block():
    d = displacement_matrix(0.4 + 0.3j, 64).matrix
    dinv = displacement_matrix(-(0.4 + 0.3j), 64).matrix
    assert np.max(np.abs((d @ dinv)[:20, :20] - np.eye(20))) < 1e-10


def test_vacuum_overlap():
    assert displacement_matrix(1.0, 64).matrix[0, 0].real == pytest.approx(math.exp(-0.5), abs=1e-14)
    assert displacement_matrix(1.0, 64).matrix[0, 0].real == pytest.approx(0.60653066, abs=1e-8)


def test_unitary_on_low_block():
    assert position_displacement(0.3).unitarity_defect(block=30) < 1e-12


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        displacement_matrix(complex(math.nan, 0), 8)
    with pytest.raises(ValueError):
        displacement_matrix(0.1, 1)


def test_quadrature_mapping():
    # exp(-i x P) with P = i(a^dag - a)/sqrt2, built directly
    dim = 120
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    X = (a + a.T) / math.sqrt(2)
    P = 1j * (a.T - a) / math.sqrt(2)
    ref_x = expm(-1j * 0.3 * P)[:32, :32]
    ref_p = expm(-1j * 0.4 * X)[:32, :32]
    assert np.max(np.abs(position_displacement(0.3, 32).matrix - ref_x)) < 1e-10
    assert np.max(np.abs(momentum_displacement(0.4, 32).matrix - ref_p)) < 1e-10


def test_empty_sequence_leaves_state():
    psi = FockState.coherent(0.5)
    out = apply_order(DisplacementSequence([], []), Order.PX, psi)
    assert np.array_equal(out.amplitudes, psi.amplitudes)
    assert oracle_probabilities(DisplacementSequence([], []), psi).p_minus == 0.0


def test_commuting_case_orders_agree():
    seq = DisplacementSequence([0.2, -0.1, 0.3], [0.0, 0.0, 0.0])
    psi = FockState.vacuum()
    a = apply_order(seq, "XP", psi).amplitudes
    b = apply_order(seq, "PX", psi).amplitudes
    assert np.max(np.abs(a - b)) < 1e-14


def test_branch_phase_single_pair():
    seq = DisplacementSequence([0.3], [0.4])
    psi = FockState.vacuum()
    a = apply_order(seq, Order.XP, psi).amplitudes
    b = apply_order(seq, Order.PX, psi).amplitudes
    ratio = np.vdot(b, a)
    assert abs(ratio) == pytest.approx(1.0, abs=1e-12)
    assert np.angle(ratio) == pytest.approx(0.12, abs=1e-12)
    assert np.max(np.abs(a - np.exp(0.12j) * b)) < 1e-12


def test_oracle_uniform_example():
    seq = DisplacementSequence.uniform(3, 0.2, 0.3)
    pr = oracle_probabilities(seq, FockState.vacuum(64))
    assert pr.p_minus == pytest.approx((1 - math.cos(0.54)) / 2, abs=1e-8)
    assert pr.p_minus == pytest.approx(0.0711, abs=1e-4)
    coh = oracle_probabilities(seq, FockState.coherent(0.5, 64))
    assert coh.p_minus == pytest.approx(pr.p_minus, abs=1e-10)


def test_design_phase_against_overlap():
    a = 0.00647
    seq = DisplacementSequence.uniform(30, math.sqrt(a), math.sqrt(a))
    phase = np.angle(branch_overlap(seq, FockState.vacuum()))
    value = geometric_phase(seq).value
    assert math.remainder(phase - value, 2 * math.pi) == pytest.approx(0.0, abs=1e-8)
    assert oracle_probabilities(seq, FockState.vacuum()).p_minus == pytest.approx(
        ideal_probabilities(value).p_minus, abs=1e-8)


def test_phase_additivity_non_uniform():
    rng = np.random.default_rng(3)
    xs, ps = rng.uniform(-0.2, 0.2, 6), rng.uniform(-0.2, 0.2, 6)
    seq = DisplacementSequence(xs, ps)
    pair_phases = sum(x * p for x in xs for p in ps)
    assert np.angle(branch_overlap(seq, FockState.vacuum())) == pytest.approx(pair_phases, abs=1e-10)


# corner of the displacement loop must stay well inside the cutoff
@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_oracle_matches_or_refuses(n, x, p):
    seq = DisplacementSequence.uniform(n, x, p)
    psi = FockState.vacuum(64)
    corner = (n * x) ** 2 / 2 + (n * p) ** 2 / 2
    try:
        pr = oracle_probabilities(seq, psi)
    except TruncationError:
        assert corner > 15  # only refuses when the state genuinely reaches the cutoff
        return
    assert abs(pr.p_minus - ideal_probabilities(geometric_phase(seq)).p_minus) < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.floats(-0.1, 0.1), st.floats(-0.1, 0.1))
def test_unitarity_and_convergence(n, x, p):
    seq = DisplacementSequence.uniform(n, x, p)
    out = apply_order(seq, Order.XP, FockState.vacuum(64))
    assert abs(out.norm_loss) < 1e-8
    hi = oracle_probabilities(seq, FockState.vacuum(64)).p_minus
    lo = oracle_probabilities(seq, FockState.vacuum(32)).p_minus
    assert abs(hi - lo) < 1e-4


def test_truncation_budget_enforced():
    seq = DisplacementSequence.uniform(10, 0.5, 0.5)
    with pytest.raises(TruncationError) as info:
        oracle_probabilities(seq, FockState.vacuum(4))
    assert info.value.norm_loss > info.value.budget


def test_state_validation():
    with pytest.raises(TruncationError):
        FockState.coherent(5.0, cutoff=8)
    with pytest.raises(ValueError):
        FockState(np.array([2.0, 0.0]))
