"""Probability measures on desk-scale spaces: mass, distance, tightness,
outer regularity, and the tight+outer-regular Radon classifier.

A measure is a finitely supported weight table, optionally combined (on the
countable space) with geometric components ``weight * Geom(q)`` whose atom and
tail masses have closed forms. That keeps cofinite-event masses and tightness
witnesses exactly computable in rational mode.

Arithmetic modes:

* ``exact`` -- weights are :class:`fractions.Fraction`; total mass must be
  exactly 1. Used by all brute-force oracle comparisons.
* ``float`` -- float64 weights; total mass within 1e-12 of 1. Used by Monte
  Carlo runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

from .spaces import (
    ClosedFamily,
    CompactFamily,
    EventSet,
    SpaceDescriptor,
    SpaceMismatchError,
    complement,
    default_compact_family,
    event_spec,
)

FLOAT_MASS_TOL = 1e-12

EXACT = "exact"
FLOAT = "float"


def _is_exact(x) -> bool:
    return isinstance(x, Rational)


@dataclass(frozen=True)
class GeometricComponent:
    """One mixture component ``weight * Geom(ratio)``: P(j) = q*(1-q)**j."""

    weight: object  # Fraction or float, > 0
    ratio: object  # q in (0, 1]

    def atom_mass(self, j: int):
        q = self.ratio
        return self.weight * q * (1 - q) ** j

    def tail_mass(self, m: int):
        """Mass of atoms {m, m+1, ...}: weight * (1-q)**m."""
        return self.weight * (1 - self.ratio) ** m


class ProbMeasure:
    """A probability measure over the cells of a :class:`SpaceDescriptor`."""

    def __init__(
        self,
        space: SpaceDescriptor,
        weights: Mapping[int, object] | None = None,
        components: Sequence[GeometricComponent] = (),
        mode: str | None = None,
    ):
        weights = dict(weights or {})
        if components and not space.is_countable:
            raise ValueError("geometric components exist only on the countable space")
        for j, w in weights.items():
            if not space.valid_index(j):
                raise ValueError(f"cell index {j} invalid for {space}")
            if w < 0:
                raise ValueError(f"negative weight at cell {j}")
        for comp in components:
            if comp.weight <= 0 or not (0 < comp.ratio <= 1):
                raise ValueError("geometric component needs weight > 0, 0 < ratio <= 1")

        values = list(weights.values()) + [c.weight for c in components] + [c.ratio for c in components]
        inferred = EXACT if all(_is_exact(v) for v in values) else FLOAT
        self.mode = mode or inferred
        if self.mode not in (EXACT, FLOAT):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == EXACT and inferred == FLOAT:
            raise ValueError("exact mode requires rational weights and ratios")

        total = sum(weights.values()) + sum(c.weight for c in components)
        if self.mode == EXACT:
            if total != 1:
                raise ValueError(f"total mass {total} != 1")
        elif abs(total - 1) > FLOAT_MASS_TOL:
            raise ValueError(f"total mass {total} not within {FLOAT_MASS_TOL} of 1")

        self.space = space
        self._weights = {j: w for j, w in weights.items() if w > 0}
        self._components = tuple(components)

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_weights(space: SpaceDescriptor, weights: Sequence) -> "ProbMeasure":
        return ProbMeasure(space, dict(enumerate(weights)))

    @staticmethod
    def delta(space: SpaceDescriptor, j: int) -> "ProbMeasure":
        return ProbMeasure(space, {j: Fraction(1)})

    @staticmethod
    def uniform(space: SpaceDescriptor) -> "ProbMeasure":
        n = space.num_cells
        if n is None:
            raise ValueError("no uniform measure on the countable space")
        return ProbMeasure(space, {j: Fraction(1, n) for j in range(n)})

    @staticmethod
    def bernoulli(space: SpaceDescriptor, p) -> "ProbMeasure":
        if space.num_cells != 2:
            raise ValueError("bernoulli needs a two-cell space")
        one = Fraction(1) if _is_exact(p) else 1.0
        return ProbMeasure(space, {0: one - p, 1: p})

    @staticmethod
    def geometric(space: SpaceDescriptor, q) -> "ProbMeasure":
        one = Fraction(1) if _is_exact(q) else 1.0
        return ProbMeasure(space, components=[GeometricComponent(one, q)])

    @staticmethod
    def geometric_mixture(space: SpaceDescriptor, parts: Iterable[tuple]) -> "ProbMeasure":
        comps = [GeometricComponent(w, q) for w, q in parts]
        return ProbMeasure(space, components=comps)

    # -- evaluation --------------------------------------------------------

    @property
    def is_finitely_supported(self) -> bool:
        return not self._components

    def support(self) -> list[int]:
        """Support cells; only available for finitely supported measures."""
        if self._components:
            raise ValueError("support of an analytic law is infinite")
        return sorted(self._weights)

    def atom_mass(self, j: int):
        w = self._weights.get(j, Fraction(0) if self.mode == EXACT else 0.0)
        for comp in self._components:
            w = w + comp.atom_mass(j)
        return w

    def tail_mass(self, m: int):
        """Mass of the cells {m, m+1, ...} on the countable space."""
        if not self.space.is_countable:
            raise ValueError("tail_mass applies to the countable space")
        w = sum((v for j, v in self._weights.items() if j >= m), Fraction(0) if self.mode == EXACT else 0.0)
        for comp in self._components:
            w = w + comp.tail_mass(m)
        return w

    def weights_dict(self) -> dict[int, object]:
        return dict(self._weights)


def mix_measures(parts: Sequence[tuple]) -> ProbMeasure:
    """Convex combination sum_i w_i * mu_i of measures on a common space."""
    if not parts:
        raise ValueError("mixture needs at least one part")
    space = parts[0][1].space
    weights: dict[int, object] = {}
    comps: list[GeometricComponent] = []
    for w, mu in parts:
        if mu.space != space:
            raise SpaceMismatchError("mixture parts on different spaces")
        if w < 0:
            raise ValueError("mixture weights must be non-negative")
        if w == 0:
            continue
        for j, v in mu.weights_dict().items():
            weights[j] = weights.get(j, 0) + w * v
        for c in mu._components:
            comps.append(GeometricComponent(w * c.weight, c.ratio))
    return ProbMeasure(space, weights, comps)


def mass(mu: ProbMeasure, event: EventSet):
    """mu(event); additive over disjoint events, 1 on the full space."""
    if event.space != mu.space:
        raise SpaceMismatchError(f"event on {event.space}, measure on {mu.space}")
    zero = Fraction(0) if mu.mode == EXACT else 0.0
    finite_part = sum((mu.atom_mass(j) for j in event.indices), zero)
    if event.cofinite:
        return 1 - finite_part
    return finite_part


def tv_distance(mu: ProbMeasure, nu: ProbMeasure):
    """Total variation distance (1/2) sum_j |mu_j - nu_j|.

    Exact when both measures are finitely supported; analytic countable laws
    are truncated once both remaining tails are below 1e-13, and the result is
    returned as a float in that case.
    """
    if mu.space != nu.space:
        raise SpaceMismatchError("tv_distance needs a common space")
    if mu.is_finitely_supported and nu.is_finitely_supported:
        cells = set(mu.weights_dict()) | set(nu.weights_dict())
        return sum((abs(mu.atom_mass(j) - nu.atom_mass(j)) for j in cells), Fraction(0)) / 2
    # Truncate: |sum_{j>=M} |mu_j - nu_j|| <= tail_mu(M) + tail_nu(M).
    m = 1
    while float(mu.tail_mass(m)) + float(nu.tail_mass(m)) > 1e-13:
        m *= 2
        if m > 1 << 20:
            raise ValueError("tails decay too slowly for tv_distance truncation")
    acc = 0.0
    for j in range(m):
        acc += abs(float(mu.atom_mass(j)) - float(nu.atom_mass(j)))
    return acc / 2


@dataclass(frozen=True)
class TightnessResult:
    tight: bool
    # eps -> first family member K with mu(K) > 1 - eps, or None
    witnesses: tuple[tuple[object, EventSet | None], ...]

    def witness_for(self, eps) -> EventSet | None:
        for e, w in self.witnesses:
            if e == eps:
                return w
        raise KeyError(eps)


def is_tight(mu: ProbMeasure, compacts: CompactFamily, epsilons: Sequence) -> TightnessResult:
    """Scan the compact family for a witness mu(K) > 1 - eps per epsilon."""
    if not epsilons:
        raise ValueError("epsilon list must be non-empty")
    if any(e <= 0 for e in epsilons):
        raise ValueError("epsilons must be positive")
    if compacts.space != mu.space:
        raise SpaceMismatchError("compact family on wrong space")
    witnesses = []
    ok = True
    for eps in epsilons:
        found = None
        for k in compacts:
            if mass(mu, k) > 1 - eps:
                found = k
                break
        witnesses.append((eps, found))
        ok = ok and found is not None
    return TightnessResult(ok, tuple(witnesses))


def is_outer_regular_on(
    mu: ProbMeasure,
    target: EventSet,
    opens: Sequence[EventSet],
    eps,
) -> tuple[bool, EventSet | None]:
    """True iff some open superset O of target has mu(O) <= mu(target) + eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    for o in opens:
        if not target.is_subset(o):
            raise ValueError("candidate open set does not contain the target")
    bound = mass(mu, target) + eps
    for o in opens:
        if mass(mu, o) <= bound:
            return True, o
    return False, None


@dataclass(frozen=True)
class RegularityReport:
    """Outcome of the Radon classifier: tight and outer regular on compacts."""

    tight: bool
    tight_witnesses: tuple[tuple[object, EventSet | None], ...]
    outer_regular_on_compacts: bool
    # (compact K, eps) -> witnessing open superset, or None
    outer_witnesses: tuple[tuple[EventSet, object, EventSet | None], ...]
    radon: bool

    def __post_init__(self) -> None:
        if self.radon != (self.tight and self.outer_regular_on_compacts):
            raise ValueError("radon flag must equal tight AND outer_regular_on_compacts")

    def to_dict(self) -> dict:
        return {
            "tight": self.tight,
            "tight_witnesses": [
                {"eps": str(e), "witness": event_spec(w)} for e, w in self.tight_witnesses
            ],
            "outer_regular_on_compacts": self.outer_regular_on_compacts,
            "outer_witnesses": [
                {"compact": event_spec(k), "eps": str(e), "witness": event_spec(w)}
                for k, e, w in self.outer_witnesses
            ],
            "radon": self.radon,
        }


DEFAULT_EPS_SCHEDULE = tuple(Fraction(1, 2**k) for k in range(1, 11))


def classify_radon(
    mu: ProbMeasure,
    compacts: CompactFamily | None = None,
    eps_schedule: Sequence = DEFAULT_EPS_SCHEDULE,
    opens_for: ClosedFamily | None = None,
) -> RegularityReport:
    """Certify Radon-ness as tightness plus outer regularity on compacts.

    The default open-superset candidates for a compact K are K itself and the
    full space: in the discrete convention every event is open, and on the
    dyadic space the only default compact is the full space, so the candidate
    list is honest for every supported kind. ``opens_for`` may supply extra
    candidates (any family member containing K is tried).
    """
    if not eps_schedule:
        raise ValueError("eps schedule must be non-empty")
    if list(eps_schedule) != sorted(eps_schedule, reverse=True):
        raise ValueError("eps schedule must be decreasing")
    if compacts is None:
        compacts = default_compact_family(mu.space)

    tight_res = is_tight(mu, compacts, eps_schedule)

    outer_ok = True
    outer_witnesses = []
    full = EventSet.full(mu.space)
    for k in compacts:
        candidates = [k, full]
        if opens_for is not None:
            candidates.extend(o for o in opens_for if k.is_subset(o))
        for eps in eps_schedule:
            ok, wit = is_outer_regular_on(mu, k, candidates, eps)
            outer_witnesses.append((k, eps, wit))
            outer_ok = outer_ok and ok

    return RegularityReport(
        tight=tight_res.tight,
        tight_witnesses=tight_res.witnesses,
        outer_regular_on_compacts=outer_ok,
        outer_witnesses=tuple(outer_witnesses),
        radon=tight_res.tight and outer_ok,
    )


def marginal_complement_mass(mu: ProbMeasure, event: EventSet):
    """Convenience: mass of the complement, computed through `complement`."""
    return mass(mu, complement(event))
