"""Scenario grammars, flat config files, and deterministic report emission.

Every CLI input is a short textual spec (space, measure, events, generator).
The same strings are echoed verbatim into reports, so a published report can
be re-run by copying its config block back into a file.

Config files are flat ``key = value`` lines; ``#`` starts a comment, blank
lines are ignored, later keys win. Command-line flags override file keys.

Reports are JSON with a fixed field order. The two volatile fields
(timestamp, wall clock) are emitted as the final two lines of the document
so determinism checks can strip them and compare the rest byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .kernels import bernoulli_kernel, geometric_kernel
from .measures import ProbMeasure
from .processes import (
    DEFAULT_ORACLE_BOUND,
    BetaBernoulliProcess,
    GridMixtureProcess,
    IIDProcess,
    MarkovChainProcess,
    PolyaUrnProcess,
    ProcessGenerator,
)
from .spaces import EventSet, SpaceDescriptor, countable, dyadic, event_spec, finite

SCHEMA_VERSION = 1
OUT_DIR_ENV = "EXCHKIT_OUT_DIR"


class SpecParseError(ValueError):
    """A textual spec does not follow the documented grammar."""


# ---------------------------------------------------------------------------
# primitive parsers


def parse_number(text: str) -> Fraction:
    """Exact rational from ``1/3``, ``0.25``, or ``2``."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise SpecParseError(f"expected a rational number, got {text!r}") from None


def _parse_int(text: str, what: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise SpecParseError(f"expected an integer {what}, got {text!r}") from None


def _parse_float(text: str, what: str) -> float:
    try:
        return float(text.strip())
    except ValueError:
        raise SpecParseError(f"expected a number for {what}, got {text!r}") from None


def _number_list(text: str, expect: int | None = None) -> list[Fraction]:
    vals = [parse_number(v) for v in text.split(",") if v.strip() != ""]
    if not vals:
        raise SpecParseError(f"expected a comma-separated number list, got {text!r}")
    if expect is not None and len(vals) != expect:
        raise SpecParseError(f"expected {expect} numbers, got {len(vals)} in {text!r}")
    return vals


def parse_space(text: str) -> SpaceDescriptor:
    """Space grammar: ``finite:<k>`` | ``countable`` | ``dyadic:<level>``."""
    head, sep, arg = text.strip().partition(":")
    try:
        if head == "countable" and not sep:
            return countable()
        if head == "finite":
            return finite(_parse_int(arg, "cell count"))
        if head == "dyadic":
            return dyadic(_parse_int(arg, "level"))
    except SpecParseError:
        raise
    except ValueError as exc:
        raise SpecParseError(f"invalid space {text!r}: {exc}") from None
    raise SpecParseError(f"unknown space spec {text!r}")


def parse_measure(space: SpaceDescriptor, text: str) -> ProbMeasure:
    """Measure grammar, interpreted on an explicit space.

    ``uniform`` | ``delta:<j>`` | ``bern:<p>`` | ``geometric:<q>`` |
    ``weights:<w0,w1,...>`` | ``geom-mixture:<w>@<q>;<w>@<q>;...``

    Numbers are exact rationals; a weights list that does not sum to one is
    rejected here, at construction time.
    """
    head, _, arg = text.strip().partition(":")
    try:
        if head == "uniform":
            return ProbMeasure.uniform(space)
        if head == "delta":
            return ProbMeasure.delta(space, _parse_int(arg, "cell"))
        if head == "bern":
            return ProbMeasure.bernoulli(space, parse_number(arg))
        if head == "geometric":
            return ProbMeasure.geometric(space, parse_number(arg))
        if head == "weights":
            return ProbMeasure.from_weights(space, _number_list(arg))
        if head == "geom-mixture":
            parts = []
            for chunk in arg.split(";"):
                w, at, q = chunk.partition("@")
                if not at:
                    raise SpecParseError(f"bad mixture part {chunk!r}, want w@q")
                parts.append((parse_number(w), parse_number(q)))
            return ProbMeasure.geometric_mixture(space, parts)
    except SpecParseError:
        raise
    except ValueError as exc:
        raise SpecParseError(f"invalid measure {text!r}: {exc}") from None
    raise SpecParseError(f"unknown measure spec {text!r}")


def parse_event(space: SpaceDescriptor, text: str) -> EventSet:
    """Event grammar, identical to the report rendering, so events round-trip:
    ``full`` | ``empty`` | ``cells:<i,j,...>`` | ``not:<i,j,...>``."""
    head, sep, arg = text.strip().partition(":")
    try:
        if head == "full" and not sep:
            return EventSet.full(space)
        if head == "empty" and not sep:
            return EventSet.empty(space)
        if head == "cells":
            return EventSet.of(space, [_parse_int(i, "cell") for i in arg.split(",")])
        if head == "not":
            cells = [_parse_int(i, "cell") for i in arg.split(",")]
            return EventSet.cofinite_of(space, cells)
    except SpecParseError:
        raise
    except ValueError as exc:
        raise SpecParseError(f"invalid event {text!r}: {exc}") from None
    raise SpecParseError(f"unknown event spec {text!r}")


def parse_events(space: SpaceDescriptor, text: str) -> tuple[EventSet, ...]:
    """Semicolon-separated list of event specs."""
    chunks = [c for c in text.split(";") if c.strip()]
    if not chunks:
        raise SpecParseError("event list is empty")
    return tuple(parse_event(space, c) for c in chunks)


def parse_grid(text: str) -> tuple[int, ...]:
    vals = tuple(_parse_int(v, "grid point") for v in text.split(","))
    if any(v <= 0 for v in vals) or list(vals) != sorted(set(vals)):
        raise SpecParseError(f"n_grid must be strictly increasing and positive: {text!r}")
    return vals


def parse_generator(text: str) -> ProcessGenerator:
    """Generator grammar; the state space is implied by the form.

    - ``iid:bern:<p>`` coin on two cells, ``iid:geom:<q>`` on the countable
      space, ``iid:uniform:<k>`` on k cells, ``iid:weights:<w0,w1,...>``
    - ``polya:<a>,<b>`` two-color urn, ``a`` initial balls of color 1
    - ``mixture:beta(<a>,<b>):bern`` latent coin bias drawn from Beta(a, b)
    - ``mixture:grid(<t1>,<t2>,...):bern`` or ``...:geom`` uniform prior
      over the listed parameter values
    - ``markov:<p01>,<p10>`` two-state chain started at 0; the intended
      negative control, not exchangeable for asymmetric rows
    """
    text = text.strip()
    head, _, rest = text.partition(":")
    try:
        if head == "iid":
            kind, _, arg = rest.partition(":")
            if kind == "bern":
                return IIDProcess(ProbMeasure.bernoulli(finite(2), parse_number(arg)))
            if kind == "geom":
                return IIDProcess(ProbMeasure.geometric(countable(), parse_number(arg)))
            if kind == "uniform":
                return IIDProcess(ProbMeasure.uniform(finite(_parse_int(arg, "cell count"))))
            if kind == "weights":
                ws = _number_list(arg)
                return IIDProcess(ProbMeasure.from_weights(finite(len(ws)), ws))
            raise SpecParseError(f"unknown iid marginal {rest!r}")
        if head == "polya":
            a, b = (_parse_int(v, "urn count") for v in rest.split(","))
            return PolyaUrnProcess(a, b)
        if head == "mixture":
            prior_txt, sep, kind = rest.partition("):")
            if not sep:
                raise SpecParseError(f"mixture needs prior(...):kind, got {text!r}")
            if prior_txt.startswith("beta("):
                if kind != "bern":
                    raise SpecParseError("a beta prior pairs with the bern kind")
                a, b = _number_list(prior_txt[5:], expect=2)
                return BetaBernoulliProcess(a, b)
            if prior_txt.startswith("grid("):
                thetas = _number_list(prior_txt[5:])
                w = Fraction(1, len(thetas))
                prior = tuple((w, t) for t in thetas)
                if kind == "bern":
                    return GridMixtureProcess(prior, bernoulli_kernel(finite(2)))
                if kind == "geom":
                    return GridMixtureProcess(prior, geometric_kernel(countable()))
                raise SpecParseError(f"unknown mixture kind {kind!r}")
            raise SpecParseError(f"unknown prior form {prior_txt!r}")
        if head == "markov":
            p01, p10 = _number_list(rest, expect=2)
            space = finite(2)
            rows = (
                ProbMeasure.from_weights(space, [1 - p01, p01]),
                ProbMeasure.from_weights(space, [p10, 1 - p10]),
            )
            return MarkovChainProcess(ProbMeasure.delta(space, 0), rows)
    except SpecParseError:
        raise
    except (ValueError, TypeError) as exc:
        raise SpecParseError(f"invalid generator {text!r}: {exc}") from None
    raise SpecParseError(f"unknown generator spec {text!r}")


# ---------------------------------------------------------------------------
# config files and per-command key schemas


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; OSError propagates for the I/O exit path."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise SpecParseError(f"{path}:{lineno}: expected key = value")
            out[key.strip()] = value.strip()
    return out


# Keys each subcommand understands, and the subset that must be present
# after merging the config file with the flags.
COMMAND_KEYS: dict[str, frozenset[str]] = {
    "simulate": frozenset({"gen", "n", "paths", "seed", "csv", "json", "out_dir"}),
    "check-exchangeable": frozenset({"gen", "n", "bound", "json", "out_dir"}),
    "estimate-mixing": frozenset(
        {"gen", "events", "n_grid", "paths", "seed", "tol", "coverage", "csv", "json", "out_dir"}
    ),
    "verify-rcd": frozenset(
        {"gen", "events", "steps", "paths", "seed", "tol", "coverage", "json", "out_dir"}
    ),
    "construct-rcd": frozenset(
        {"gen", "events", "n_grid", "paths", "seed", "tol", "coverage", "json", "out_dir"}
    ),
    "radon-classify": frozenset({"space", "measure", "json", "out_dir"}),
}

REQUIRED_KEYS: dict[str, frozenset[str]] = {
    "simulate": frozenset({"gen", "n", "seed"}),
    "check-exchangeable": frozenset({"gen", "n"}),
    "estimate-mixing": frozenset({"gen", "events", "seed"}),
    "verify-rcd": frozenset({"gen", "events", "seed"}),
    "construct-rcd": frozenset({"gen", "events", "seed"}),
    "radon-classify": frozenset({"space", "measure"}),
}

_DEFAULTS: dict[str, str] = {
    "paths": "100",
    "n_grid": "10,100,1000,10000",
    "coverage": "0.95",
    "steps": "10000",
    "bound": str(DEFAULT_ORACLE_BOUND),
}

# The extraction bisects per-cell mass clusters, so it needs several grid
# points inside the settled tail; a log-spaced grid starves it.
_COMMAND_DEFAULTS: dict[str, dict[str, str]] = {
    "construct-rcd": {"n_grid": "100,1000,4000,6000,8000,10000"},
}


def merge_config(
    command: str, flags: Mapping[str, object], config_path: str | None
) -> dict[str, str]:
    """File keys, overridden by flags, with defaults filled in.

    Unknown file keys are rejected so a typo cannot silently drop a setting.
    Every value is normalized to a string; parsing happens exactly once, in
    :meth:`ScenarioConfig.from_strings`.
    """
    allowed = COMMAND_KEYS[command]
    merged = dict(read_config_file(config_path)) if config_path else {}
    unknown = set(merged) - set(allowed)
    if unknown:
        raise SpecParseError(f"unknown config keys for {command}: {', '.join(sorted(unknown))}")
    for key, value in flags.items():
        if value is not None:
            merged[key] = str(value)
    per_command = _COMMAND_DEFAULTS.get(command, {})
    for key in allowed:
        if key not in merged and key in per_command:
            merged[key] = per_command[key]
        elif key not in merged and key in _DEFAULTS:
            merged[key] = _DEFAULTS[key]
    missing = set(REQUIRED_KEYS[command]) - set(merged)
    if missing:
        raise SpecParseError(f"{command} is missing required settings: {', '.join(sorted(missing))}")
    return merged


@dataclass
class ScenarioConfig:
    """One subcommand's resolved inputs, plus the raw strings for the echo."""

    command: str
    raw: dict[str, str]
    gen: ProcessGenerator | None = None
    space: SpaceDescriptor | None = None
    measure: ProbMeasure | None = None
    events: tuple[EventSet, ...] = ()
    n: int | None = None
    n_grid: tuple[int, ...] = ()
    n_paths: int = 1
    seed: int | None = None
    tol: float | None = None
    coverage: float = 0.95
    steps: int | None = None
    bound: int = DEFAULT_ORACLE_BOUND

    @staticmethod
    def from_strings(command: str, raw: Mapping[str, str]) -> "ScenarioConfig":
        cfg = ScenarioConfig(command=command, raw=dict(raw))
        if "gen" in raw:
            cfg.gen = parse_generator(raw["gen"])
        if "space" in raw:
            cfg.space = parse_space(raw["space"])
        if "measure" in raw:
            if cfg.space is None:
                raise SpecParseError("a measure spec needs a space spec")
            cfg.measure = parse_measure(cfg.space, raw["measure"])
        if "events" in raw:
            host = cfg.gen.space if cfg.gen is not None else cfg.space
            if host is None:
                raise SpecParseError("an events spec needs a generator or space")
            cfg.events = parse_events(host, raw["events"])
        if "n" in raw:
            cfg.n = _parse_int(raw["n"], "sequence length")
            if cfg.n < 1:
                raise SpecParseError("n must be at least 1")
        if "n_grid" in raw:
            cfg.n_grid = parse_grid(raw["n_grid"])
        if "paths" in raw:
            cfg.n_paths = _parse_int(raw["paths"], "path count")
            if cfg.n_paths < 1:
                raise SpecParseError("paths must be at least 1")
        if "seed" in raw:
            cfg.seed = _parse_int(raw["seed"], "master seed")
        if "tol" in raw:
            cfg.tol = _parse_float(raw["tol"], "tol")
        if "coverage" in raw:
            cfg.coverage = _parse_float(raw["coverage"], "coverage")
            if not 0 < cfg.coverage <= 1:
                raise SpecParseError("coverage must lie in (0, 1]")
        if "steps" in raw:
            cfg.steps = _parse_int(raw["steps"], "step count")
            if cfg.steps < 1:
                raise SpecParseError("steps must be at least 1")
        if "bound" in raw:
            cfg.bound = _parse_int(raw["bound"], "oracle bound")
        return cfg

    def echo(self) -> dict[str, str]:
        """The effective settings, sorted by key for a stable report block."""
        return {k: self.raw[k] for k in sorted(self.raw)}


# ---------------------------------------------------------------------------
# reports


def _json_default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, EventSet):
        return event_spec(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@dataclass
class RunReport:
    """Everything a run produced, ready for deterministic emission.

    ``results`` is the owning check's ``to_dict`` payload. ``csv_rows`` is
    the flat-table view of the same numbers; commands without a table leave
    it empty and a CSV emission is then just the header.
    """

    command: str
    config: dict[str, str]
    seeds: tuple[str, ...]
    results: dict
    passed: bool
    csv_header: tuple[str, ...] = ()
    csv_rows: tuple[tuple, ...] = ()
    schema_version: int = SCHEMA_VERSION

    def to_json(self, timestamp: str, wall_clock_s: float) -> str:
        body = {
            "schema_version": self.schema_version,
            "command": self.command,
            "config": self.config,
            "seeds": list(self.seeds),
            "results": self.results,
            "passed": self.passed,
            # volatile fields, deliberately last: each lands on its own
            # line, so byte comparisons drop exactly two lines
            "timestamp": timestamp,
            "wall_clock_s": wall_clock_s,
        }
        return json.dumps(body, indent=2, default=_json_default) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if self.csv_header:
            writer.writerow(self.csv_header)
        for row in self.csv_rows:
            writer.writerow(["" if c is None else str(c) for c in row])
        return buf.getvalue()


def resolve_out_path(filename: str, out_dir: str | None = None) -> str:
    """Relative outputs land in out_dir, else $EXCHKIT_OUT_DIR, else '.'."""
    if os.path.isabs(filename):
        return filename
    base = out_dir or os.environ.get(OUT_DIR_ENV) or "."
    return os.path.join(base, filename)


def atomic_write_text(path: str, text: str) -> None:
    """Write through a sibling temp file and rename; never a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".exchkit-tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def emit_report(
    report: RunReport, fmt: str, path: str, timestamp: str, wall_clock_s: float
) -> None:
    """Write one report artifact; ``fmt`` is ``json`` or ``csv``."""
    if fmt == "json":
        atomic_write_text(path, report.to_json(timestamp, wall_clock_s))
    elif fmt == "csv":
        atomic_write_text(path, report.to_csv())
    else:
        raise SpecParseError(f"unknown report format {fmt!r}")
