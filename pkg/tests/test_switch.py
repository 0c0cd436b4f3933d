import math

import pytest
from hypothesis import given, strategies as st

from icoswitch.switch import (
    DisplacementSequence,
    GeometricPhase,
    OutcomeProbabilities,
    geometric_phase,
    ideal_probabilities,
    phase_from_means,
    total_displacements,
)

finite = st.floats(-5, 5, allow_nan=False)


def test_total_displacements_sums():
    assert total_displacements(DisplacementSequence([0.1, 0.1], [0.2, 0.2])) == pytest.approx((0.2, 0.4))


def test_empty_sequence():
    seq = DisplacementSequence([], [])
    assert total_displacements(seq) == (0.0, 0.0)
    assert geometric_phase(seq) == GeometricPhase(0.0, 0.0)
    assert seq.x_mean == 0.0


def test_physical_units_design_point():
    seq = DisplacementSequence.from_physical(30, 9.125e-6, 709.4)
    x_tot, p_tot = total_displacements(seq)
    assert x_tot == pytest.approx(30 * seq.x_mean)
    assert p_tot == pytest.approx(30 * seq.p_mean)
    assert seq.x_mean * seq.p_mean == pytest.approx(9.125e-6 * 709.4, rel=1e-12)
    assert geometric_phase(seq).per_pair == pytest.approx(0.006473, abs=2e-6)


def test_geometric_phase_examples():
    assert geometric_phase(DisplacementSequence([0.1, 0.1], [0.2, 0.2])).value == pytest.approx(0.08)
    assert geometric_phase(DisplacementSequence([0.0], [3.7])).value == 0.0
    a = 0.00647
    seq = DisplacementSequence.uniform(30, math.sqrt(a), math.sqrt(a))
    ph = geometric_phase(seq)
    assert ph.value == pytest.approx(5.823, abs=1e-12)
    assert ph.per_pair == pytest.approx(a)


def test_ideal_probabilities_examples():
    assert ideal_probabilities(0.0) == OutcomeProbabilities(1.0, 0.0)
    assert ideal_probabilities(math.pi).p_minus == pytest.approx(1.0)
    # (1 - cos 5.823)/2 evaluated directly
    assert ideal_probabilities(GeometricPhase(5.823, 0.00647)).p_minus == pytest.approx(0.05203, abs=5e-5)


def test_rejects_bad_sequences():
    with pytest.raises(ValueError):
        DisplacementSequence([0.1], [])
    with pytest.raises(ValueError):
        DisplacementSequence([math.inf], [0.0])
    with pytest.raises(ValueError):
        ideal_probabilities(math.nan)


def test_phase_from_means_matches_uniform_sequence():
    seq = DisplacementSequence.uniform(7, 0.2, 0.3)
    assert phase_from_means(7, 0.06).value == pytest.approx(geometric_phase(seq).value)


@given(st.lists(st.tuples(finite, finite), max_size=12), st.randoms())
def test_permutation_invariance(pairs, rnd):
    xs = [p[0] for p in pairs]
    ps = [p[1] for p in pairs]
    base = geometric_phase(DisplacementSequence(xs, ps)).value
    rnd.shuffle(xs)
    rnd.shuffle(ps)
    assert geometric_phase(DisplacementSequence(xs, ps)).value == pytest.approx(base, abs=1e-9)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=12), st.floats(-3, 3))
def test_bilinearity(pairs, s):
    xs = [p[0] for p in pairs]
    ps = [p[1] for p in pairs]
    base = geometric_phase(DisplacementSequence(xs, ps)).value
    scaled_x = geometric_phase(DisplacementSequence([s * x for x in xs], ps)).value
    scaled_p = geometric_phase(DisplacementSequence(xs, [s * p for p in ps])).value
    assert scaled_x == pytest.approx(s * base, abs=1e-9)
    assert scaled_p == pytest.approx(s * base, abs=1e-9)


@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_normalisation_and_periodicity(phase):
    pr = ideal_probabilities(phase)
    assert pr.p_plus + pr.p_minus == 1.0
    assert 0.0 <= pr.p_minus <= 1.0
    shifted = ideal_probabilities(phase + 2 * math.pi)
    assert shifted.p_plus == pytest.approx(pr.p_plus, abs=1e-12)
