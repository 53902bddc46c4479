"""Markov kernels, product-kernel cylinder masses, and the Monte Carlo
regular-conditional-distribution verifier.

A kernel is a parameter-indexed family of probability measures on a fixed
target space. The infinite product kernel is represented only through its
cylinder values: the mass of A_1 x ... x A_m x S x S x ... under parameter w
is the product of the per-coordinate kernel masses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .measures import EXACT, ProbMeasure, mass
from .spaces import EventSet, SpaceDescriptor, SpaceMismatchError, event_spec


class UnknownParameterError(KeyError):
    """A kernel was evaluated at a parameter outside its declared domain."""


@dataclass(frozen=True)
class MarkovKernel:
    """Parameter -> probability measure on a fixed target space.

    ``domain`` is a finite parameter grid, or None for kernels defined on a
    continuum (e.g. p -> Bernoulli(p) on [0,1]); grid kernels validate their
    images eagerly, continuum kernels at call time.
    """

    target: SpaceDescriptor
    law: Callable[[object], ProbMeasure] = field(compare=False)
    domain: tuple | None = None

    def __post_init__(self) -> None:
        if self.domain is not None:
            for param in self.domain:
                self._checked_measure(param)

    def _checked_measure(self, param) -> ProbMeasure:
        mu = self.law(param)
        if mu.space != self.target:
            raise SpaceMismatchError("kernel image on wrong space")
        return mu

    def measure(self, param) -> ProbMeasure:
        if self.domain is not None and param not in self.domain:
            raise UnknownParameterError(param)
        return self._checked_measure(param)


def kernel_mass(kappa: MarkovKernel, param, event: EventSet):
    """kappa(param, event) = mass of the event under the image measure."""
    return mass(kappa.measure(param), event)


def bernoulli_kernel(target: SpaceDescriptor, domain: tuple | None = None) -> MarkovKernel:
    """p -> Bernoulli(p) on a two-cell space."""
    return MarkovKernel(target, lambda p: ProbMeasure.bernoulli(target, p), domain)


def geometric_kernel(target: SpaceDescriptor, domain: tuple | None = None) -> MarkovKernel:
    """q -> Geometric(q) on the countable space."""
    return MarkovKernel(target, lambda q: ProbMeasure.geometric(target, q), domain)


def constant_kernel(mu: ProbMeasure) -> MarkovKernel:
    """Every parameter maps to the same measure (degenerate conditioning)."""
    return MarkovKernel(mu.space, lambda _param: mu)


@dataclass(frozen=True)
class CylinderEvent:
    """A_1 x ... x A_m x S x S x ...; all coordinate events share one space."""

    events: tuple[EventSet, ...]

    def __post_init__(self) -> None:
        if not self.events:
            raise ValueError("cylinder needs at least one coordinate event")
        space = self.events[0].space
        for ev in self.events:
            if ev.space != space:
                raise SpaceMismatchError("cylinder events on mixed spaces")

    @property
    def m(self) -> int:
        return len(self.events)

    @property
    def space(self) -> SpaceDescriptor:
        return self.events[0].space

    def padded(self, extra: int) -> "CylinderEvent":
        """Append full-space coordinates; never changes the cylinder's mass."""
        full = EventSet.full(self.space)
        return CylinderEvent(self.events + (full,) * extra)


def product_cylinder_mass(kappa: MarkovKernel, param, cyl: CylinderEvent):
    """Mass of the cylinder under the product of the image measure."""
    mu = kappa.measure(param)
    result = Fraction(1) if mu.mode == EXACT else 1.0
    for ev in cyl.events:
        result = result * mass(mu, ev)
    return result


@dataclass(frozen=True)
class RcdEventResult:
    event: EventSet
    pass_fraction: float
    gaps: tuple[float, ...]
    tolerances: tuple[float, ...]


@dataclass(frozen=True)
class RcdReport:
    """Per-event agreement between kernel masses and long-run frequencies."""

    n_paths: int
    n_steps: int
    coverage: float
    per_event: tuple[RcdEventResult, ...]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "n_steps": self.n_steps,
            "coverage": self.coverage,
            "events": [
                {
                    "event": event_spec(r.event),
                    "pass_fraction": r.pass_fraction,
                    "max_gap": max(r.gaps) if r.gaps else None,
                }
                for r in self.per_event
            ],
            "passed": self.passed,
        }


def verify_rcd(
    kappa: MarkovKernel,
    gen,
    events: Sequence[EventSet],
    n_paths: int,
    n_steps: int,
    tol: float | None = None,
    master_seed: int = 0,
    coverage: float = 0.95,
) -> RcdReport:
    """Check that kappa is the conditional law of the generator's coordinates.

    For each independently seeded path, the realized latent parameter selects
    a kernel measure; the check compares kappa(latent, A) with the path's
    empirical frequency of A after ``n_steps`` observations. Almost-sure
    agreement is operationalized as: at least ``coverage`` of paths agree
    within ``tol`` (default 3 binomial standard errors at the kernel mass).
    """
    if not events:
        raise ValueError("event list must be non-empty")
    if not getattr(gen, "realized_latent", False):
        raise ValueError("generator does not expose a realized latent parameter")

    per_event_gaps: list[list[float]] = [[] for _ in events]
    per_event_tols: list[list[float]] = [[] for _ in events]
    for i in range(n_paths):
        path = gen.sample_path(n_steps, master_seed, path_index=i)
        obs = np.asarray(path.observations)
        for k, ev in enumerate(events):
            target = float(kernel_mass(kappa, path.latent, ev))
            freq = float(np.mean(indicator_array(obs, ev)))
            per_event_gaps[k].append(abs(freq - target))
            if tol is None:
                se = (target * (1.0 - target) / n_steps) ** 0.5
                per_event_tols[k].append(3.0 * max(se, 1.0 / n_steps))
            else:
                per_event_tols[k].append(float(tol))

    results = []
    all_ok = True
    for k, ev in enumerate(events):
        hits = sum(g <= t for g, t in zip(per_event_gaps[k], per_event_tols[k]))
        frac = hits / n_paths
        results.append(
            RcdEventResult(ev, frac, tuple(per_event_gaps[k]), tuple(per_event_tols[k]))
        )
        all_ok = all_ok and frac >= coverage
    return RcdReport(n_paths, n_steps, coverage, tuple(results), all_ok)


def indicator_array(obs: np.ndarray, event: EventSet) -> np.ndarray:
    """Boolean membership of each observation in the event."""
    if event.cofinite:
        return ~np.isin(obs, sorted(event.indices))
    return np.isin(obs, sorted(event.indices))
