"""Kernel images, product-cylinder masses, and the frequency-level verifier."""

from fractions import Fraction

import numpy as np
import pytest

from exchkit import (
    BetaBernoulliProcess,
    EventSet,
    IIDProcess,
    PolyaUrnProcess,
    ProbMeasure,
    countable,
    finite,
)
from exchkit.kernels import (
    CylinderEvent,
    MarkovKernel,
    UnknownParameterError,
    bernoulli_kernel,
    constant_kernel,
    geometric_kernel,
    indicator_array,
    kernel_mass,
    product_cylinder_mass,
    verify_rcd,
)

F = Fraction


def test_bernoulli_kernel_image():
    kappa = bernoulli_kernel(finite(2))
    mu = kappa.measure(F(1, 3))
    assert mu.atom_mass(0) == F(2, 3)
    assert mu.atom_mass(1) == F(1, 3)


def test_geometric_kernel_image():
    kappa = geometric_kernel(countable())
    assert kappa.measure(F(1, 2)).atom_mass(0) == F(1, 2)


def test_grid_kernel_rejects_foreign_parameters():
    kappa = bernoulli_kernel(finite(2), domain=(F(1, 4), F(1, 2)))
    kappa.measure(F(1, 4))
    with pytest.raises(UnknownParameterError):
        kappa.measure(F(1, 3))


def test_grid_kernel_validates_images_eagerly():
    with pytest.raises(ValueError):
        bernoulli_kernel(finite(2), domain=(F(3, 2),))


def test_kernel_image_space_checked():
    bad = MarkovKernel(finite(3), lambda p: ProbMeasure.bernoulli(finite(2), p))
    with pytest.raises(ValueError):
        bad.measure(F(1, 2))


def test_constant_kernel_ignores_parameter():
    mu = ProbMeasure.uniform(finite(4))
    kappa = constant_kernel(mu)
    assert kappa.measure("anything") is mu
    assert kappa.measure(17) is mu


def test_kernel_mass_shortcut():
    kappa = bernoulli_kernel(finite(2))
    assert kernel_mass(kappa, F(1, 3), EventSet.of(finite(2), [1])) == F(1, 3)


# -- cylinders ----------------------------------------------------------------


def test_cylinder_mass_oracle():
    # Bern(1/3) on ({1}, {0}, {1}): 1/3 * 2/3 * 1/3 = 2/27
    space = finite(2)
    kappa = bernoulli_kernel(space)
    cyl = CylinderEvent(
        (EventSet.of(space, [1]), EventSet.of(space, [0]), EventSet.of(space, [1]))
    )
    assert product_cylinder_mass(kappa, F(1, 3), cyl) == F(2, 27)


def test_cylinder_padding_preserves_mass():
    space = finite(2)
    kappa = bernoulli_kernel(space)
    cyl = CylinderEvent((EventSet.of(space, [1]),))
    for extra in (1, 3, 7):
        assert product_cylinder_mass(kappa, F(1, 3), cyl.padded(extra)) == F(1, 3)


def test_cylinder_needs_consistent_spaces():
    with pytest.raises(ValueError):
        CylinderEvent(())
    with pytest.raises(ValueError):
        CylinderEvent((EventSet.full(finite(2)), EventSet.full(finite(3))))


def test_indicator_array_both_representations():
    obs = np.array([0, 3, 1, 3])
    fin = EventSet.of(countable(), [3])
    cof = EventSet.cofinite_of(countable(), [0, 1])
    assert indicator_array(obs, fin).tolist() == [False, True, False, True]
    assert indicator_array(obs, cof).tolist() == [False, True, False, True]


# -- the Monte Carlo verifier --------------------------------------------------


def test_verify_rcd_accepts_the_true_kernel():
    gen = BetaBernoulliProcess(1, 1)
    events = [EventSet.of(finite(2), [1]), EventSet.full(finite(2))]
    report = verify_rcd(gen.latent_kernel(), gen, events, n_paths=60, n_steps=4000, master_seed=11)
    assert report.passed
    assert all(r.pass_fraction >= 0.95 for r in report.per_event)


def test_verify_rcd_flags_a_wrong_kernel():
    gen = BetaBernoulliProcess(1, 1)
    wrong = constant_kernel(ProbMeasure.bernoulli(finite(2), F(1, 2)))
    events = [EventSet.of(finite(2), [1])]
    report = verify_rcd(wrong, gen, events, n_paths=60, n_steps=4000, master_seed=11)
    # latent biases are spread over (0,1); a fixed 1/2 target misses most paths
    assert not report.passed


def test_verify_rcd_needs_a_realized_latent():
    gen = PolyaUrnProcess(1, 1)
    events = [EventSet.of(finite(2), [1])]
    with pytest.raises(ValueError, match="latent"):
        verify_rcd(bernoulli_kernel(finite(2)), gen, events, n_paths=5, n_steps=10)


def test_verify_rcd_needs_events():
    gen = IIDProcess(ProbMeasure.bernoulli(finite(2), F(1, 2)))
    with pytest.raises(ValueError):
        verify_rcd(gen.latent_kernel(), gen, [], n_paths=5, n_steps=10)


def test_verify_rcd_iid_degenerate_case():
    gen = IIDProcess(ProbMeasure.bernoulli(finite(2), F(1, 3)))
    events = [EventSet.of(finite(2), [1])]
    report = verify_rcd(gen.latent_kernel(), gen, events, n_paths=40, n_steps=4000, master_seed=2)
    assert report.passed


def test_verify_rcd_report_serializes():
    gen = IIDProcess(ProbMeasure.bernoulli(finite(2), F(1, 3)))
    events = [EventSet.of(finite(2), [1])]
    report = verify_rcd(gen.latent_kernel(), gen, events, n_paths=10, n_steps=500, master_seed=2)
    d = report.to_dict()
    assert d["events"][0]["event"] == "cells:1"
    assert isinstance(d["events"][0]["max_gap"], float)
