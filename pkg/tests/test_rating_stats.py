import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dosiqa.errors import (
    DegenerateFit,
    EmptyRatings,
    InvalidDistribution,
    InvalidLevel,
    InvalidSigma,
    OutOfRange,
    ScaleMismatch,
    ValidationError,
)
from dosiqa.rating_stats import (
    LabelCategory,
    OpinionDistribution,
    QualityScale,
    SampleLabels,
    clamp_mos,
    dos_from_ratings,
    expected_sos,
    fit_a,
    gaussian_dos,
    mos_of,
    sos_of,
)

from conftest import random_simplex


def dist(p, scale):
    return OpinionDistribution(np.asarray(p, dtype=float), scale)


# --- scale / distribution types -------------------------------------------

def test_scale_rejects_unsorted_scores():
    with pytest.raises(ValueError):
        QualityScale((1.0, 3.0, 2.0), 1.0, 3.0)


def test_scale_roundtrip(scale100):
    assert QualityScale.from_dict(scale100.to_dict()) == scale100
    assert scale100.scores == (10.0, 30.0, 50.0, 70.0, 90.0)


def test_distribution_must_sum_to_one(scale5):
    with pytest.raises(InvalidDistribution):
        dist([0.5, 0.5, 0.5, 0, 0], scale5)
    with pytest.raises(InvalidDistribution):
        dist([1.2, -0.2, 0, 0, 0], scale5)
    with pytest.raises(ScaleMismatch):
        dist([1.0, 0, 0, 0], scale5)


def test_sample_labels_category_invariants(scale5):
    with pytest.raises(ValidationError):
        SampleLabels(3.0, LabelCategory.MOS_SOS_AVAILABLE)
    with pytest.raises(ValidationError):
        SampleLabels(3.0, LabelCategory.MOS_ONLY, sos=0.5)
    with pytest.raises(ValidationError):
        SampleLabels(2.0, LabelCategory.DOS_AVAILABLE, dos=dist([0, 0, 1, 0, 0], scale5))
    SampleLabels(3.0, LabelCategory.DOS_AVAILABLE, dos=dist([0, 0, 1, 0, 0], scale5))


# --- dos_from_ratings -------------------------------------------------------

def test_histogram_single_level(scale5):
    assert dos_from_ratings([3, 3, 3], scale5).tolist() == [0, 0, 1, 0, 0]


def test_histogram_counts(scale5):
    assert dos_from_ratings([1, 2, 2, 5], scale5).tolist() == [0.25, 0.5, 0, 0, 0.25]


def test_histogram_errors(scale5):
    with pytest.raises(EmptyRatings):
        dos_from_ratings([], scale5)
    with pytest.raises(InvalidLevel):
        dos_from_ratings([1, 6], scale5)
    with pytest.raises(InvalidLevel):
        dos_from_ratings([0], scale5)


# --- mos_of / sos_of --------------------------------------------------------

def test_mos_examples(scale5):
    assert mos_of(dist([0.2] * 5, scale5)) == 3.0
    assert mos_of(dist([0, 0, 0, 1, 0], scale5)) == 4.0
    assert mos_of(dist([0.25, 0.5, 0, 0, 0.25], scale5)) == pytest.approx(2.5, abs=1e-15)


def test_sos_examples(scale5):
    for k in range(5):
        onehot = np.zeros(5)
        onehot[k] = 1
        assert sos_of(dist(onehot, scale5)) == 0.0
    assert sos_of(dist([0.5, 0, 0, 0, 0.5], scale5)) == pytest.approx(2.0, abs=1e-15)
    assert sos_of(dist([0.2] * 5, scale5)) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_mos_sos_match_direct_sums(scale5, rng):
    s = np.arange(1.0, 6.0)
    for p in random_simplex(rng, 200):
        d = dist(p, scale5)
        mean = math.fsum(p * s)
        var = math.fsum(p * (s - mean) ** 2)
        assert mos_of(d) == pytest.approx(mean, abs=1e-12)
        assert sos_of(d) == pytest.approx(math.sqrt(var), abs=1e-12)
        assert 1.0 <= mos_of(d) <= 5.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5).filter(lambda w: sum(w) > 1e-3),
       st.floats(-50, 50))
def test_sos_shift_invariance(weights, k):
    base = QualityScale.integer(5, 1)
    shifted = QualityScale(tuple(s + k for s in base.scores), base.range_start + k, base.range_end + k)
    p = np.asarray(weights) / sum(weights)
    a, b = dist(p, base), dist(p, shifted)
    assert abs(sos_of(a) - sos_of(b)) <= 1e-12 * max(1.0, abs(k))
    assert mos_of(b) == pytest.approx(mos_of(a) + k, abs=1e-12 * max(1.0, abs(k)))


# --- quadratic law ----------------------------------------------------------

def test_expected_sos_examples(scale5):
    assert expected_sos(1.0, scale5, 0.1477) == 0.0
    assert expected_sos(5.0, scale5, 0.1477) == 0.0
    assert expected_sos(3.0, scale5, 0.1477) == pytest.approx(math.sqrt(0.1477 * 4), rel=1e-14)
    assert expected_sos(3.0, scale5, 0.1477) == pytest.approx(0.76864, abs=5e-6)
    wide = QualityScale.bins(5, 0.0, 100.0)
    assert expected_sos(50.0, wide, 0.1477) == pytest.approx(19.2159, abs=5e-5)


def test_expected_sos_range_and_a(scale5):
    with pytest.raises(OutOfRange):
        expected_sos(5.5, scale5, 0.1)
    with pytest.raises(ValueError):
        expected_sos(3.0, scale5, 0.0)


def test_expected_sos_concave_max_at_midpoint(scale5):
    ms = np.linspace(1, 5, 401)
    vals = np.array([expected_sos(m, scale5, 0.2) for m in ms])
    assert ms[np.argmax(vals)] == 3.0
    sq = vals ** 2  # the squared law is an exact downward parabola
    assert np.all(np.diff(sq, 2) < 0)


def test_fit_a_noiseless_any_a(scale5, rng):
    for a in np.concatenate([[0.01, 0.2, 1.0], rng.uniform(0.01, 1.0, 20)]):
        mos = rng.uniform(1.05, 4.95, 30)
        pairs = [(m, expected_sos(m, scale5, a)) for m in mos]
        assert fit_a(pairs, scale5) == pytest.approx(a, rel=1e-9)


def test_fit_a_errors(scale5):
    with pytest.raises(DegenerateFit):
        fit_a([(1.0, 0.1), (5.0, 0.2)], scale5)
    with pytest.raises(DegenerateFit):
        fit_a([(3.0, 0.5)], scale5)


# --- gaussian_dos -----------------------------------------------------------

def test_gaussian_symmetric_at_centre(scale5):
    for sigma in (0.3, 0.7686, 2.0):
        p = gaussian_dos(3.0, sigma, scale5).probs
        assert p[0] == p[4] and p[1] == p[3]
    assert mos_of(gaussian_dos(3.0, 0.7686, scale5)) == pytest.approx(3.0, abs=1e-6)


def test_gaussian_decreasing_right_of_mode(scale5):
    p = gaussian_dos(1.2, 0.5, scale5).probs
    assert np.all(np.diff(p) < 0)


def test_gaussian_matches_pointwise_density(scale5, rng):
    for _ in range(50):
        m, s = rng.uniform(1, 5), rng.uniform(0.2, 2.0)
        dens = [math.exp(-0.5 * ((c - m) / s) ** 2) / (s * math.sqrt(2 * math.pi)) for c in range(1, 6)]
        total = math.fsum(dens)
        np.testing.assert_allclose(gaussian_dos(m, s, scale5).probs, [d / total for d in dens],
                                   rtol=0, atol=1e-14)


def test_gaussian_errors(scale5):
    with pytest.raises(InvalidSigma):
        gaussian_dos(3.0, 0.0, scale5)
    with pytest.raises(InvalidSigma):
        gaussian_dos(3.0, -1.0, scale5)
    with pytest.raises(OutOfRange):
        gaussian_dos(0.5, 1.0, scale5)


def test_clamp_keeps_law_positive(scale5):
    lo, hi = clamp_mos(1.0, scale5), clamp_mos(5.0, scale5)
    assert lo == pytest.approx(1.004) and hi == pytest.approx(4.996)
    assert expected_sos(lo, scale5, 0.1477) > 0
    assert clamp_mos(3.0, scale5) == 3.0
