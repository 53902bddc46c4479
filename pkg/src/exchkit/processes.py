"""Exchangeable sequence generators and exact prefix-law oracles.

A generator produces finite paths deterministically from a counter-based
stream keyed by (master seed, path index). On finite state spaces and small n
it also exposes the exact joint law of the first n coordinates in rational
arithmetic; that law is the brute-force oracle behind the exchangeability
check and the mixture-identity checks.

Generator variants:

* ``IIDProcess``            -- iid draws from a base measure.
* ``GridMixtureProcess``    -- latent parameter from a finite prior grid, then
  iid draws from a component kernel (conditionally iid by construction).
* ``BetaBernoulliProcess``  -- Beta(a, b) latent success probability, then iid
  coin flips; the realized latent is continuous and stored on the path.
* ``PolyaUrnProcess``       -- two-color urn with reinforcement; exchangeable
  with no realized latent at sampling time.
* ``MarkovChainProcess``    -- a deliberately non-exchangeable control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations, product
from typing import Sequence

import numpy as np

from .kernels import MarkovKernel, bernoulli_kernel, kernel_mass
from .measures import EXACT, ProbMeasure, mass
from .rng import path_stream
from .spaces import EventSet, SpaceDescriptor, finite

DEFAULT_ORACLE_BOUND = 6


# ---------------------------------------------------------------------------
# product-space pattern encoding

def product_space(space: SpaceDescriptor, n: int) -> SpaceDescriptor:
    """The n-fold product of a finite space, cells encoded base-k big-endian."""
    k = space.num_cells
    if k is None:
        raise ValueError("product space requires a finite base space")
    return finite(k**n)


def encode_pattern(space: SpaceDescriptor, pattern: Sequence[int]) -> int:
    k = space.num_cells
    idx = 0
    for x in pattern:
        idx = idx * k + x
    return idx


def decode_pattern(space: SpaceDescriptor, n: int, index: int) -> tuple[int, ...]:
    k = space.num_cells
    out = []
    for _ in range(n):
        index, x = divmod(index, k)
        out.append(x)
    return tuple(reversed(out))


def all_patterns(space: SpaceDescriptor, n: int):
    return product(range(space.num_cells), repeat=n)


# ---------------------------------------------------------------------------
# sampling from a measure

def sample_from_measure(mu: ProbMeasure, stream: np.random.Generator, n: int) -> np.ndarray:
    """Draw n iid cells from a measure using the given stream.

    Finitely supported measures consume one uniform per draw; measures with
    geometric components consume two (branch choice, then inverse cdf).
    """
    finite_weights = mu.weights_dict()
    cells = np.array(sorted(finite_weights), dtype=np.int64)
    probs = np.array([float(finite_weights[j]) for j in cells])
    comps = mu._components

    if not comps:
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        u = stream.random(n)
        return cells[np.searchsorted(cum, u, side="right")]

    branch_probs = np.concatenate([[probs.sum()], [float(c.weight) for c in comps]])
    branch_cum = np.cumsum(branch_probs)
    branch_cum[-1] = 1.0
    u1 = stream.random(n)
    u2 = stream.random(n)
    branch = np.searchsorted(branch_cum, u1, side="right")
    out = np.zeros(n, dtype=np.int64)

    mask0 = branch == 0
    if mask0.any():
        if probs.sum() <= 0:
            raise ValueError("branch selected an empty finite part")
        cum = np.cumsum(probs / probs.sum())
        cum[-1] = 1.0
        out[mask0] = cells[np.searchsorted(cum, u2[mask0], side="right")]
    for b, comp in enumerate(comps, start=1):
        maskb = branch == b
        if not maskb.any():
            continue
        q = float(comp.ratio)
        if q >= 1.0:
            out[maskb] = 0
        else:
            u = np.clip(u2[maskb], 1e-300, 1.0 - 1e-16)
            out[maskb] = np.floor(np.log(u) / math.log1p(-q)).astype(np.int64)
    return out


# ---------------------------------------------------------------------------
# paths and generators

@dataclass(frozen=True)
class PathSample:
    """One realized path: stream identity, latent draw, and observations."""

    generator: "ProcessGenerator"
    seed: tuple[int, int]  # (master seed, path index)
    latent: object | None
    observations: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.observations) < 1:
            raise ValueError("a path needs at least one observation")

    @property
    def length(self) -> int:
        return len(self.observations)

    @property
    def seed_label(self) -> str:
        return f"{self.seed[0]}:{self.seed[1]}"


class ProcessGenerator:
    """Base class; subclasses fill in sampling and the exact prefix law."""

    space: SpaceDescriptor
    exchangeable: bool
    is_conditionally_iid: bool

    def sample_path(self, n: int, master_seed: int, path_index: int = 0) -> PathSample:
        if n < 1:
            raise ValueError("path length must be >= 1")
        stream = path_stream(master_seed, path_index)
        latent, obs = self._draw(stream, n)
        return PathSample(self, (master_seed, path_index), latent, obs)

    def _draw(self, stream: np.random.Generator, n: int):
        raise NotImplementedError

    def prefix_pattern_law(self, n: int) -> dict[tuple[int, ...], Fraction]:
        raise NotImplementedError

    def marginal(self) -> ProbMeasure:
        """Exact law of a single coordinate."""
        raise NotImplementedError

    def latent_kernel(self) -> MarkovKernel | None:
        """Kernel mapping the realized latent to the conditional law, if any."""
        return None

    def path_target(self, path: PathSample, event: EventSet) -> float | None:
        """Conditional mass of the event given the path's latent, if defined."""
        kernel = self.latent_kernel()
        if kernel is not None and path.latent is not None:
            return float(kernel_mass(kernel, path.latent, event))
        return None

    @property
    def realized_latent(self) -> bool:
        return self.latent_kernel() is not None

    def spec_label(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class IIDProcess(ProcessGenerator):
    base: ProbMeasure

    exchangeable = True
    is_conditionally_iid = True

    @property
    def space(self) -> SpaceDescriptor:
        return self.base.space

    def _draw(self, stream, n):
        return None, sample_from_measure(self.base, stream, n)

    def prefix_pattern_law(self, n):
        law = {}
        for pattern in all_patterns(self.space, n):
            p = Fraction(1)
            for x in pattern:
                p *= self.base.atom_mass(x)
            law[pattern] = p
        return law

    def marginal(self) -> ProbMeasure:
        return self.base

    def latent_kernel(self) -> MarkovKernel | None:
        # Degenerate conditioning: the directing measure is the marginal.
        from .kernels import constant_kernel

        return constant_kernel(self.base)

    def path_target(self, path, event):
        return float(mass(self.base, event))

    def spec_label(self) -> str:
        return "iid"


@dataclass(frozen=True)
class GridMixtureProcess(ProcessGenerator):
    """Finite-grid prior over a component kernel; conditionally iid."""

    prior: tuple[tuple[object, object], ...]  # ((weight, parameter), ...)
    component: MarkovKernel

    exchangeable = True
    is_conditionally_iid = True

    def __post_init__(self) -> None:
        total = sum(w for w, _ in self.prior)
        if total != 1:
            raise ValueError(f"prior weights sum to {total}, not 1")
        if any(w < 0 for w, _ in self.prior):
            raise ValueError("prior weights must be non-negative")
        for _, theta in self.prior:
            self.component.measure(theta)  # validates the image

    @property
    def space(self) -> SpaceDescriptor:
        return self.component.target

    def _draw(self, stream, n):
        cum = np.cumsum([float(w) for w, _ in self.prior])
        cum[-1] = 1.0
        idx = int(np.searchsorted(cum, stream.random(), side="right"))
        theta = self.prior[idx][1]
        return theta, sample_from_measure(self.component.measure(theta), stream, n)

    def prefix_pattern_law(self, n):
        law = {}
        for pattern in all_patterns(self.space, n):
            p = Fraction(0)
            for w, theta in self.prior:
                mu = self.component.measure(theta)
                term = Fraction(w)
                for x in pattern:
                    term *= mu.atom_mass(x)
                p += term
            law[pattern] = p
        return law

    def marginal(self) -> ProbMeasure:
        from .measures import mix_measures

        return mix_measures([(w, self.component.measure(t)) for w, t in self.prior])

    def latent_kernel(self) -> MarkovKernel | None:
        return self.component

    def spec_label(self) -> str:
        pts = ",".join(str(t) for _, t in self.prior)
        return f"mixture(grid={pts})"


@dataclass(frozen=True)
class BetaBernoulliProcess(ProcessGenerator):
    """Beta(a, b) latent success probability, then iid coin flips.

    The exact prefix law is the Beta-Binomial pattern formula, available for
    integer a, b; sampling works for any positive shape parameters.
    """

    a: object
    b: object

    exchangeable = True
    is_conditionally_iid = True

    def __post_init__(self) -> None:
        if self.a <= 0 or self.b <= 0:
            raise ValueError("Beta shape parameters must be positive")

    @property
    def space(self) -> SpaceDescriptor:
        return finite(2)

    def _draw(self, stream, n):
        p = float(stream.beta(float(self.a), float(self.b)))
        obs = (stream.random(n) < p).astype(np.int64)
        return p, obs

    def prefix_pattern_law(self, n):
        a, b = self.a, self.b
        if int(a) != a or int(b) != b:
            raise ValueError("exact Beta-Bernoulli law needs integer shapes")
        law = {}
        for pattern in all_patterns(self.space, n):
            k = sum(pattern)
            law[pattern] = beta_binomial_pattern_prob(int(a), int(b), n, k)
        return law

    def marginal(self) -> ProbMeasure:
        p = Fraction(self.a) / (Fraction(self.a) + Fraction(self.b))
        return ProbMeasure.bernoulli(self.space, p)

    def latent_kernel(self) -> MarkovKernel | None:
        return bernoulli_kernel(self.space)

    def spec_label(self) -> str:
        return f"mixture(beta({self.a},{self.b}))"


def beta_binomial_pattern_prob(a: int, b: int, n: int, k: int) -> Fraction:
    """P(one fixed binary pattern with k ones) = B(a+k, b+n-k) / B(a, b).

    Computed through factorials, independent of any urn recursion.
    """
    f = math.factorial
    num = f(a + k - 1) * f(b + n - k - 1) * f(a + b - 1)
    den = f(a + b + n - 1) * f(a - 1) * f(b - 1)
    return Fraction(num, den)


@dataclass(frozen=True)
class PolyaUrnProcess(ProcessGenerator):
    """Two-color urn: draw a color, put it back with one extra of the same.

    ``a`` counts color 1, ``b`` color 0. Exchangeable; the directing measure
    only emerges as the limit of empirical frequencies, so paths carry no
    realized latent.
    """

    a: object
    b: object

    exchangeable = True
    is_conditionally_iid = False

    def __post_init__(self) -> None:
        if self.a < 1 or self.b < 1:
            raise ValueError("urn needs at least one ball of each color")

    @property
    def space(self) -> SpaceDescriptor:
        return finite(2)

    def _draw(self, stream, n):
        u = stream.random(n)
        ones = float(self.a)
        zeros = float(self.b)
        obs = np.zeros(n, dtype=np.int64)
        for i in range(n):
            if u[i] < ones / (ones + zeros):
                obs[i] = 1
                ones += 1.0
            else:
                zeros += 1.0
        return None, obs

    def prefix_pattern_law(self, n):
        a0, b0 = Fraction(self.a), Fraction(self.b)
        law = {}

        def walk(prefix, ones, zeros, prob):
            if len(prefix) == n:
                law[tuple(prefix)] = prob
                return
            total = ones + zeros
            walk(prefix + [1], ones + 1, zeros, prob * ones / total)
            walk(prefix + [0], ones, zeros + 1, prob * zeros / total)

        walk([], a0, b0, Fraction(1))
        return law

    def marginal(self) -> ProbMeasure:
        p = Fraction(self.a) / (Fraction(self.a) + Fraction(self.b))
        return ProbMeasure.bernoulli(self.space, p)

    def spec_label(self) -> str:
        return f"polya({self.a},{self.b})"


@dataclass(frozen=True)
class MarkovChainProcess(ProcessGenerator):
    """Negative control: a Markov chain with asymmetric transition rows."""

    initial: ProbMeasure
    rows: tuple[ProbMeasure, ...]

    exchangeable = False
    is_conditionally_iid = False

    def __post_init__(self) -> None:
        k = self.initial.space.num_cells
        if k is None or len(self.rows) != k:
            raise ValueError("need one transition row per state of a finite space")
        for row in self.rows:
            if row.space != self.initial.space:
                raise ValueError("transition rows on wrong space")

    @property
    def space(self) -> SpaceDescriptor:
        return self.initial.space

    def _draw(self, stream, n):
        u = stream.random(n)
        k = self.space.num_cells
        cums = []
        for row in self.rows:
            c = np.cumsum([float(row.atom_mass(j)) for j in range(k)])
            c[-1] = 1.0
            cums.append(c)
        init_cum = np.cumsum([float(self.initial.atom_mass(j)) for j in range(k)])
        init_cum[-1] = 1.0
        obs = np.zeros(n, dtype=np.int64)
        state = int(np.searchsorted(init_cum, u[0], side="right"))
        obs[0] = state
        for i in range(1, n):
            state = int(np.searchsorted(cums[state], u[i], side="right"))
            obs[i] = state
        return None, obs

    def prefix_pattern_law(self, n):
        law = {}
        for pattern in all_patterns(self.space, n):
            p = self.initial.atom_mass(pattern[0])
            for prev, cur in zip(pattern, pattern[1:]):
                p *= self.rows[prev].atom_mass(cur)
            law[pattern] = p
        return law

    def marginal(self) -> ProbMeasure:
        return self.initial

    def spec_label(self) -> str:
        return "markov-control"


# ---------------------------------------------------------------------------
# the spec operations

def sample_path(gen: ProcessGenerator, n: int, master_seed: int, path_index: int = 0) -> PathSample:
    return gen.sample_path(n, master_seed, path_index)


def ensure_oracle_domain(gen: ProcessGenerator, n: int, bound: int) -> None:
    if gen.space.num_cells is None:
        raise ValueError("exact prefix law requires a finite state space")
    if n < 1:
        raise ValueError("prefix length must be >= 1")
    if n > bound:
        raise ValueError(f"prefix length {n} exceeds the oracle bound {bound}")


def prefix_law(gen: ProcessGenerator, n: int, bound: int = DEFAULT_ORACLE_BOUND) -> ProbMeasure:
    """Exact joint law of the first n coordinates, as a measure on the
    n-fold product space (rational arithmetic)."""
    ensure_oracle_domain(gen, n, bound)
    pat_law = gen.prefix_pattern_law(n)
    if any(not isinstance(p, Fraction) for p in pat_law.values()):
        raise ValueError("prefix law requires exact-rational generator parameters")
    prod = product_space(gen.space, n)
    weights = {encode_pattern(gen.space, pat): p for pat, p in pat_law.items()}
    return ProbMeasure(prod, weights, mode=EXACT)


@dataclass(frozen=True)
class ExchangeabilityResult:
    exchangeable: bool
    worst_permutation: tuple[int, ...] | None
    max_discrepancy: Fraction

    def to_dict(self) -> dict:
        return {
            "exchangeable": self.exchangeable,
            "worst_permutation": list(self.worst_permutation) if self.worst_permutation else None,
            "max_discrepancy": str(self.max_discrepancy),
        }


def check_exchangeable(
    gen: ProcessGenerator, n: int, bound: int = DEFAULT_ORACLE_BOUND
) -> ExchangeabilityResult:
    """Brute-force invariance of the exact n-law under all n! permutations."""
    ensure_oracle_domain(gen, n, bound)
    law = gen.prefix_pattern_law(n)
    worst = None
    max_disc = Fraction(0)
    for sigma in permutations(range(n)):
        for pattern, p in law.items():
            permuted = tuple(pattern[sigma[i]] for i in range(n))
            d = abs(p - law[permuted])
            if d > max_disc:
                max_disc = d
                worst = sigma
    return ExchangeabilityResult(max_disc == 0, worst, max_disc)


def polya_beta_equivalence(
    a: int, b: int, n: int, bound: int = DEFAULT_ORACLE_BOUND
) -> tuple[bool, Fraction]:
    """Compare the urn's enumerated prefix law against the Beta-Binomial
    pattern formula; both sides exact rationals, equality required."""
    if int(a) != a or int(b) != b:
        raise ValueError("equivalence oracle needs integer urn counts")
    urn = PolyaUrnProcess(a, b)
    ensure_oracle_domain(urn, n, bound)
    urn_law = urn.prefix_pattern_law(n)
    max_disc = Fraction(0)
    for pattern, p in urn_law.items():
        q = beta_binomial_pattern_prob(int(a), int(b), n, sum(pattern))
        max_disc = max(max_disc, abs(p - q))
    return max_disc == 0, max_disc
