"""Desk-scale state spaces, their events, and compact/closed set families.

Three space kinds are supported, chosen so that every topological predicate
used downstream (tightness, outer regularity, A-convergence) is decidable by
enumeration:

* ``finite(k)``   -- k discrete atoms 0..k-1; every event is clopen and compact.
* ``countable()`` -- atoms 0,1,2,...; events are finite or cofinite index sets;
  compact sets are the finite ones.
* ``dyadic(L)``   -- the 2**L half-open dyadic cells of [0,1); the closure of a
  cell is compact and finite unions of closed cells count as closed.

Events are cell-index sets, not arbitrary Borel sets, which keeps complements
and masses exactly computable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Iterator

FINITE = "finite"
COUNTABLE = "countable"
DYADIC = "dyadic"


class SpaceMismatchError(ValueError):
    """An event or measure was used with a space it does not belong to."""


@dataclass(frozen=True)
class SpaceDescriptor:
    """A desk-scale state space: discrete atoms or dyadic cells of [0,1)."""

    kind: str
    param: int = 0  # atom count for finite, resolution level for dyadic

    def __post_init__(self) -> None:
        if self.kind not in (FINITE, COUNTABLE, DYADIC):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.kind == FINITE and self.param < 1:
            raise ValueError("finite space needs at least one atom")
        if self.kind == DYADIC and self.param < 0:
            raise ValueError("dyadic resolution level must be >= 0")

    @property
    def num_cells(self) -> int | None:
        """Number of cells, or None for the countable space."""
        if self.kind == FINITE:
            return self.param
        if self.kind == DYADIC:
            return 2**self.param
        return None

    @property
    def is_countable(self) -> bool:
        return self.kind == COUNTABLE

    def valid_index(self, j: int) -> bool:
        n = self.num_cells
        return j >= 0 and (n is None or j < n)

    def cell_label(self, j: int) -> str:
        if not self.valid_index(j):
            raise ValueError(f"cell index {j} invalid for {self}")
        if self.kind == DYADIC:
            d = 2**self.param
            return f"[{Fraction(j, d)},{Fraction(j + 1, d)})"
        return str(j)

    def cells(self) -> Iterator[int]:
        """Iterate cell indices; infinite for the countable space."""
        n = self.num_cells
        j = 0
        while n is None or j < n:
            yield j
            j += 1


def finite(k: int) -> SpaceDescriptor:
    return SpaceDescriptor(FINITE, k)


def countable() -> SpaceDescriptor:
    return SpaceDescriptor(COUNTABLE)


def dyadic(level: int) -> SpaceDescriptor:
    return SpaceDescriptor(DYADIC, level)


@dataclass(frozen=True)
class EventSet:
    """A set of cells, stored as a finite index set or its complement.

    ``cofinite=True`` (countable spaces only) means the event is everything
    except ``indices``. Complements therefore always stay representable.
    """

    space: SpaceDescriptor
    indices: frozenset[int]
    cofinite: bool = False

    def __post_init__(self) -> None:
        if self.cofinite and not self.space.is_countable:
            raise ValueError("cofinite events exist only on the countable space")
        for j in self.indices:
            if not self.space.valid_index(j):
                raise ValueError(f"cell index {j} invalid for {self.space}")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def of(space: SpaceDescriptor, indices: Iterable[int]) -> "EventSet":
        return EventSet(space, frozenset(indices))

    @staticmethod
    def cofinite_of(space: SpaceDescriptor, excluded: Iterable[int]) -> "EventSet":
        return EventSet(space, frozenset(excluded), cofinite=True)

    @staticmethod
    def empty(space: SpaceDescriptor) -> "EventSet":
        return EventSet(space, frozenset())

    @staticmethod
    def full(space: SpaceDescriptor) -> "EventSet":
        if space.is_countable:
            return EventSet(space, frozenset(), cofinite=True)
        return EventSet(space, frozenset(range(space.num_cells)))

    @staticmethod
    def initial_segment(space: SpaceDescriptor, m: int) -> "EventSet":
        """Cells 0..m-1 (clipped to the space size for sized spaces)."""
        n = space.num_cells
        top = m if n is None else min(m, n)
        return EventSet(space, frozenset(range(top)))

    # -- predicates --------------------------------------------------------

    def contains(self, j: int) -> bool:
        return (j in self.indices) != self.cofinite

    @property
    def is_empty(self) -> bool:
        return not self.cofinite and not self.indices

    @property
    def is_full(self) -> bool:
        if self.cofinite:
            return not self.indices
        n = self.space.num_cells
        return n is not None and len(self.indices) == n

    def is_subset(self, other: "EventSet") -> bool:
        _same_space(self, other)
        if not self.cofinite and not other.cofinite:
            return self.indices <= other.indices
        if not self.cofinite and other.cofinite:
            return self.indices.isdisjoint(other.indices)
        if self.cofinite and other.cofinite:
            return other.indices <= self.indices
        return False  # a cofinite set is infinite, never inside a finite one

    # -- algebra -----------------------------------------------------------

    def union(self, other: "EventSet") -> "EventSet":
        _same_space(self, other)
        if not self.cofinite and not other.cofinite:
            return EventSet(self.space, self.indices | other.indices)
        if self.cofinite and other.cofinite:
            return EventSet(self.space, self.indices & other.indices, cofinite=True)
        fin, cof = (self, other) if other.cofinite else (other, self)
        return EventSet(self.space, cof.indices - fin.indices, cofinite=True)

    def intersection(self, other: "EventSet") -> "EventSet":
        return complement(complement(self).union(complement(other)))

    def difference(self, other: "EventSet") -> "EventSet":
        return self.intersection(complement(other))


def _same_space(a, b) -> None:
    if a.space != b.space:
        raise SpaceMismatchError(f"space mismatch: {a.space} vs {b.space}")


def complement(event: EventSet) -> EventSet:
    """The complementary event; an involution on every space kind."""
    if event.space.is_countable:
        return EventSet(event.space, event.indices, cofinite=not event.cofinite)
    full = frozenset(range(event.space.num_cells))
    return EventSet(event.space, full - event.indices)


def all_events(space: SpaceDescriptor) -> list[EventSet]:
    """Every event of a small sized space, in a deterministic order."""
    n = space.num_cells
    if n is None:
        raise ValueError("cannot enumerate all events of the countable space")
    if n > 16:
        raise ValueError(f"refusing to enumerate 2**{n} events")
    out = []
    cells = list(range(n))
    for r in range(n + 1):
        for combo in combinations(cells, r):
            out.append(EventSet.of(space, combo))
    return out


@dataclass(frozen=True)
class CompactFamily:
    """An inclusion-increasing list of events designated compact.

    On the countable space only finite index sets qualify; on the finite and
    dyadic spaces every event does (dyadic cells are compact after closure).
    """

    space: SpaceDescriptor
    members: tuple[EventSet, ...]

    def __post_init__(self) -> None:
        for ev in self.members:
            if ev.space != self.space:
                raise SpaceMismatchError("compact family member on wrong space")
            if self.space.is_countable and ev.cofinite:
                raise ValueError("cofinite sets are not compact on the countable space")
        for small, big in zip(self.members, self.members[1:]):
            if not small.is_subset(big):
                raise ValueError("compact family must be inclusion-increasing")

    def __iter__(self) -> Iterator[EventSet]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)


def default_compact_family(space: SpaceDescriptor, max_members: int = 64) -> CompactFamily:
    """Initial segments on the countable space; the full space otherwise."""
    if space.is_countable:
        members = tuple(
            EventSet.initial_segment(space, m) for m in range(1, max_members + 1)
        )
        return CompactFamily(space, members)
    return CompactFamily(space, (EventSet.full(space),))


@dataclass(frozen=True)
class ClosedFamily:
    """A finite checklist of events designated closed.

    The listed family is closed under finite unions and intersections; the
    ``closure`` constructor enforces this by saturating a seed list.
    """

    space: SpaceDescriptor
    members: tuple[EventSet, ...]
    _validated: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        for ev in self.members:
            if ev.space != self.space:
                raise SpaceMismatchError("closed family member on wrong space")
        if not self._validated:
            have = set(self.members)
            for a, b in combinations(self.members, 2):
                if a.union(b) not in have or a.intersection(b) not in have:
                    raise ValueError(
                        "closed family not closed under finite union/intersection"
                    )

    @staticmethod
    def closure(
        space: SpaceDescriptor, seeds: Iterable[EventSet], max_size: int = 4096
    ) -> "ClosedFamily":
        """Saturate seed events under pairwise union and intersection.

        Saturation can be exponential in the seed count; the size cap keeps
        the family desk-scale and fails loudly otherwise.
        """
        current: set[EventSet] = set(seeds)
        while True:
            fresh: set[EventSet] = set()
            for a, b in combinations(sorted(current, key=_event_sort_key), 2):
                for ev in (a.union(b), a.intersection(b)):
                    if ev not in current:
                        fresh.add(ev)
            if not fresh:
                break
            current |= fresh
            if len(current) > max_size:
                raise ValueError(
                    f"closure exceeded {max_size} events; pick smaller seeds"
                )
        members = tuple(sorted(current, key=_event_sort_key))
        return ClosedFamily(space, members, _validated=True)

    def __iter__(self) -> Iterator[EventSet]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)


def _event_sort_key(ev: EventSet):
    return (ev.cofinite, len(ev.indices), tuple(sorted(ev.indices)))


def event_spec(ev: EventSet | None) -> str | None:
    """Canonical text form of an event: full, empty, cells:i,j or not:i,j.

    This is the grammar the command-line event parser accepts, so specs
    round-trip through reports.
    """
    if ev is None:
        return None
    if ev.is_full:
        return "full"
    if ev.is_empty:
        return "empty"
    cells = ",".join(str(j) for j in sorted(ev.indices))
    return f"not:{cells}" if ev.cofinite else f"cells:{cells}"


def default_closed_family(space: SpaceDescriptor, max_segment: int = 16) -> ClosedFamily:
    """A usable closed-set checklist per space kind.

    Finite/dyadic spaces with at most 10 cells get every event (all are closed
    in the discrete/closed-cell convention). Larger sized spaces and the
    countable space get the chain of initial segments plus the empty and full
    sets; a chain is trivially union/intersection-closed, and segment masses
    already pin down every atom of a measure.
    """
    n = space.num_cells
    if n is not None and n <= 10:
        return ClosedFamily(space, tuple(all_events(space)), _validated=True)
    members = [EventSet.empty(space)]
    top = max_segment if n is None else min(max_segment, n)
    for m in range(1, top + 1):
        members.append(EventSet.initial_segment(space, m))
    members.append(EventSet.full(space))
    deduped = tuple(dict.fromkeys(members))
    return ClosedFamily(space, deduped, _validated=True)
