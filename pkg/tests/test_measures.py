"""Measure arithmetic, tightness, outer regularity, and the Radon classifier.

Hand-computed oracles are spelled out next to each assertion.
"""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from exchkit import (
    EventSet,
    ProbMeasure,
    classify_radon,
    complement,
    countable,
    default_compact_family,
    dyadic,
    finite,
    is_outer_regular_on,
    is_tight,
    mass,
    mix_measures,
    tv_distance,
)
from exchkit.measures import GeometricComponent, marginal_complement_mass

F = Fraction


@st.composite
def exact_measures(draw, k=4):
    """Random rational measure on finite(k) via normalized positive integers."""
    raw = draw(st.lists(st.integers(0, 9), min_size=k, max_size=k).filter(sum))
    total = sum(raw)
    return ProbMeasure.from_weights(finite(k), [F(r, total) for r in raw])


# -- construction ------------------------------------------------------------


def test_subprobability_rejected_at_construction():
    with pytest.raises(ValueError, match="total mass"):
        ProbMeasure.from_weights(finite(2), [F(1, 4), F(1, 4)])


def test_superprobability_rejected_too():
    with pytest.raises(ValueError):
        ProbMeasure.from_weights(finite(2), [F(3, 4), F(3, 4)])


def test_negative_weight_rejected():
    with pytest.raises(ValueError, match="negative"):
        ProbMeasure(finite(2), {0: F(3, 2), 1: F(-1, 2)})


def test_float_weights_within_tolerance_accepted():
    mu = ProbMeasure.from_weights(finite(2), [0.25, 0.75])
    assert mu.mode == "float"


def test_exact_mode_cannot_hold_floats():
    with pytest.raises(ValueError, match="exact"):
        ProbMeasure(finite(2), {0: 0.5, 1: 0.5}, mode="exact")


def test_geometric_components_need_countable_space():
    with pytest.raises(ValueError):
        ProbMeasure(finite(2), components=[GeometricComponent(F(1), F(1, 2))])


def test_geometric_ratio_range_enforced():
    with pytest.raises(ValueError):
        ProbMeasure.geometric(countable(), F(3, 2))


def test_uniform_needs_a_sized_space():
    with pytest.raises(ValueError):
        ProbMeasure.uniform(countable())


def test_support_of_analytic_law_is_refused():
    mu = ProbMeasure.geometric(countable(), F(1, 2))
    with pytest.raises(ValueError):
        mu.support()


# -- evaluation oracles ------------------------------------------------------


def test_geometric_atoms_and_tail():
    mu = ProbMeasure.geometric(countable(), F(1, 2))
    # P(j) = (1/2)^(j+1), tail from 3 = (1/2)^3
    assert mu.atom_mass(2) == F(1, 8)
    assert mu.tail_mass(3) == F(1, 8)


def test_mass_of_cofinite_event():
    mu = ProbMeasure.geometric(countable(), F(1, 2))
    ev = EventSet.cofinite_of(countable(), [0])
    assert mass(mu, ev) == F(1, 2)


def test_mass_is_additive_on_fixed_partition():
    mu = ProbMeasure.from_weights(finite(4), [F(1, 8), F(3, 8), F(3, 8), F(1, 8)])
    a = EventSet.of(finite(4), [0, 1])
    b = EventSet.of(finite(4), [2, 3])
    assert mass(mu, a) + mass(mu, b) == 1


@given(exact_measures(), st.frozensets(st.integers(0, 3), max_size=4))
def test_complement_mass_sums_to_one(mu, idx):
    ev = EventSet.of(finite(4), idx)
    assert mass(mu, ev) + marginal_complement_mass(mu, ev) == 1


def test_tv_uniform_vs_delta_is_half():
    space = finite(2)
    assert tv_distance(ProbMeasure.uniform(space), ProbMeasure.delta(space, 0)) == F(1, 2)


def test_tv_geometric_vs_delta_truncates():
    mu = ProbMeasure.geometric(countable(), F(1, 2))
    nu = ProbMeasure.delta(countable(), 0)
    # sum of |diffs| = (1 - 1/2) + sum_{j>=1} 2^-(j+1) = 1
    assert tv_distance(mu, nu) == pytest.approx(0.5, abs=1e-12)


@given(exact_measures(), exact_measures(), exact_measures())
def test_tv_is_a_metric(a, b, c):
    assert tv_distance(a, a) == 0
    assert tv_distance(a, b) == tv_distance(b, a)
    assert tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c)


@given(exact_measures())
def test_tv_bounded_by_one(mu):
    nu = ProbMeasure.delta(finite(4), 0)
    assert 0 <= tv_distance(mu, nu) <= 1


def test_mix_measures_of_coins():
    space = finite(2)
    mixed = mix_measures(
        [(F(1, 2), ProbMeasure.bernoulli(space, F(1, 4))),
         (F(1, 2), ProbMeasure.bernoulli(space, F(3, 4)))]
    )
    assert mixed.atom_mass(1) == F(1, 2)


def test_mix_measures_scales_geometric_components():
    space = countable()
    mixed = mix_measures(
        [(F(1, 2), ProbMeasure.geometric(space, F(1, 2))),
         (F(1, 2), ProbMeasure.geometric(space, F(1, 4)))]
    )
    assert mixed.atom_mass(0) == F(1, 2) * F(1, 2) + F(1, 2) * F(1, 4)


def test_mix_measures_rejects_mixed_spaces():
    with pytest.raises(ValueError):
        mix_measures(
            [(F(1, 2), ProbMeasure.uniform(finite(2))),
             (F(1, 2), ProbMeasure.uniform(finite(3)))]
        )


# -- tightness ---------------------------------------------------------------


def test_tightness_witness_is_the_first_strict_segment():
    mu = ProbMeasure.geometric(countable(), F(1, 2))
    compacts = default_compact_family(countable())
    res = is_tight(mu, compacts, [F(1, 8)])
    # mass{0..2} = 7/8 is not > 7/8; mass{0..3} = 15/16 is
    assert res.tight
    assert res.witness_for(F(1, 8)) == EventSet.initial_segment(countable(), 4)


def test_tightness_fails_for_slow_tails():
    mu = ProbMeasure.geometric(countable(), F(1, 1000))
    res = classify_radon(mu)
    # (999/1000)^64 ~ 0.94, so no 64-segment passes even eps = 1/2
    assert not res.tight and not res.radon


def test_tightness_requires_positive_epsilons():
    mu = ProbMeasure.uniform(finite(2))
    fam = default_compact_family(finite(2))
    with pytest.raises(ValueError):
        is_tight(mu, fam, [])
    with pytest.raises(ValueError):
        is_tight(mu, fam, [0])


# -- outer regularity and the classifier -------------------------------------


def test_outer_regularity_threshold_on_dyadic():
    space = dyadic(2)
    mu = ProbMeasure.from_weights(space, [F(1, 8), F(3, 8), F(3, 8), F(1, 8)])
    target = EventSet.of(space, [0, 1])
    opens = [EventSet.full(space)]
    # only candidate has mass 1 = mu(target) + 1/2
    ok_wide, wit = is_outer_regular_on(mu, target, opens, F(1, 2))
    ok_narrow, none_wit = is_outer_regular_on(mu, target, opens, F(1, 4))
    assert ok_wide and wit.is_full
    assert not ok_narrow and none_wit is None


def test_outer_regularity_rejects_non_superset_candidates():
    space = finite(3)
    mu = ProbMeasure.uniform(space)
    with pytest.raises(ValueError):
        is_outer_regular_on(mu, EventSet.of(space, [0, 1]), [EventSet.of(space, [0])], F(1, 2))


def test_classifier_passes_geometric_with_witnesses():
    report = classify_radon(ProbMeasure.geometric(countable(), F(1, 2)))
    assert report.radon and report.tight and report.outer_regular_on_compacts
    assert all(w is not None for _, w in report.tight_witnesses)
    assert all(w is not None for _, _, w in report.outer_witnesses)


def test_classifier_always_passes_finite_spaces():
    report = classify_radon(ProbMeasure.uniform(finite(5)))
    assert report.radon


def test_classifier_validates_eps_schedule():
    mu = ProbMeasure.uniform(finite(2))
    with pytest.raises(ValueError):
        classify_radon(mu, eps_schedule=[F(1, 8), F(1, 2)])
    with pytest.raises(ValueError):
        classify_radon(mu, eps_schedule=[])


def test_classifier_report_serializes():
    d = classify_radon(ProbMeasure.geometric(countable(), F(1, 2))).to_dict()
    assert d["radon"] is True
    assert d["tight_witnesses"][0]["witness"].startswith("cells:")


def test_regularity_report_flag_consistency():
    from exchkit.measures import RegularityReport

    with pytest.raises(ValueError):
        RegularityReport(
            tight=True,
            tight_witnesses=(),
            outer_regular_on_compacts=False,
            outer_witnesses=(),
            radon=True,
        )


@given(exact_measures())
def test_every_finite_measure_is_radon(mu):
    assert classify_radon(mu).radon


def test_complement_respects_mass():
    mu = ProbMeasure.geometric(countable(), F(1, 2))
    seg = EventSet.initial_segment(countable(), 4)
    assert mass(mu, complement(seg)) == mu.tail_mass(4)
