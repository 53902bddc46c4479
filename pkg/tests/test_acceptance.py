"""Acceptance suite: ten pinned desk-scale criteria, one printed line each.

Each test prints exactly one ``acceptance NN: PASS/FAIL`` line on the real
stdout (past pytest's capture) so a logged run shows the verdict table, and
then asserts. Tolerances and seeds are pinned constants; a rerun must
reproduce every number.
"""
from __future__ import annotations

import json
import math
import time
from fractions import Fraction as F

import numpy as np
import pytest
from click.testing import CliRunner

from exchkit import EventSet, ProbMeasure, countable, finite, mass
from exchkit.cli import main
from exchkit.convergence import (
    MeasureSequence,
    NotTightError,
    a_converges,
    construct_rcd_from_empiricals,
    default_closed_family,
    extract_convergent_subsequence,
    markov_bound_check,
    uniform_smallness_check,
)
from exchkit.empirical import (
    correction_factor,
    df_product_identity_check,
    df_product_identity_exact,
    ks_distance_uniform,
)
from exchkit.kernels import CylinderEvent, geometric_kernel
from exchkit.measures import classify_radon
from exchkit.processes import (
    BetaBernoulliProcess,
    GridMixtureProcess,
    IIDProcess,
    MarkovChainProcess,
    PolyaUrnProcess,
    check_exchangeable,
    polya_beta_equivalence,
)

B2 = finite(2)
NN = countable()
ONES = EventSet.of(B2, [1])
ZEROS = EventSet.of(B2, [0])

# pinned Monte Carlo seeds; chosen once, never tuned per run
SEED_BETA_BAND = 0
SEED_KS = 2
SEED_MC_IDENTITY = 3
SEED_MARKOV_BOUND = 0
SEED_SMALLNESS = 0
SEED_PIPELINE = 0
SEED_DETERMINISM = 17

# pinned tolerances
KS_BOUND = 0.05
BAND_FRACTION = 0.95
EXTRACTION_TOL = 1e-9
PIPELINE_COVERAGE = 0.95


def announce(capsys, num: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"acceptance {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"acceptance {num}: {detail}"


def geom_mixture():
    return GridMixtureProcess(((F(1, 2), F(1, 4)), (F(1, 2), F(1, 2))), geometric_kernel(NN))


def markov_control():
    return MarkovChainProcess(
        ProbMeasure.delta(B2, 0),
        (
            ProbMeasure.from_weights(B2, [F(1, 4), F(3, 4)]),
            ProbMeasure.from_weights(B2, [F(3, 4), F(1, 4)]),
        ),
    )


def test_01_exchangeability_oracle_exact(capsys):
    started = time.monotonic()
    ok = True
    for a in range(1, 5):
        for b in range(1, 5):
            res = check_exchangeable(PolyaUrnProcess(a, b), 6)
            ok = ok and res.exchangeable and res.max_discrepancy == 0
    res_iid = check_exchangeable(IIDProcess(ProbMeasure.bernoulli(B2, F(1, 3))), 6)
    ok = ok and res_iid.exchangeable and res_iid.max_discrepancy == 0
    res_neg = check_exchangeable(markov_control(), 2)
    ok = ok and not res_neg.exchangeable and res_neg.max_discrepancy > 0
    elapsed = time.monotonic() - started
    ok = ok and elapsed < 10.0
    announce(capsys, 1, ok, f"urns a,b in 1..4 and iid exact at n=6, control fails at n=2 ({elapsed:.1f}s < 10s)")


def test_02_urn_matches_conjugate_mixture(capsys):
    started = time.monotonic()
    ok = True
    for a in range(1, 5):
        for b in range(1, 5):
            for n in range(1, 7):
                equal, disc = polya_beta_equivalence(a, b, n)
                ok = ok and equal and disc == 0
    elapsed = time.monotonic() - started
    ok = ok and elapsed < 5.0
    announce(capsys, 2, ok, f"urn prefix law equals closed-form mixture for a,b in 1..4, n<=6 ({elapsed:.2f}s < 5s)")


def test_03_directing_measure_recovery(capsys):
    started = time.monotonic()
    n = 10_000
    gen = BetaBernoulliProcess(1, 1)
    inside = 0
    for i in range(400):
        path = gen.sample_path(n, master_seed=SEED_BETA_BAND, path_index=i)
        freq = float(np.mean(np.asarray(path.observations) == 1))
        p = path.latent
        if abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / n):
            inside += 1
    fraction = inside / 400

    urn = PolyaUrnProcess(1, 1)
    finals = [
        float(np.mean(np.asarray(urn.sample_path(n, master_seed=SEED_KS, path_index=i).observations) == 1))
        for i in range(400)
    ]
    ks = ks_distance_uniform(finals)
    elapsed = time.monotonic() - started
    ok = fraction >= BAND_FRACTION and ks <= KS_BOUND and elapsed < 60.0
    announce(
        capsys, 3, ok,
        f"3-sigma band fraction {fraction:.4f}>=0.95, uniform KS {ks:.4f}<=0.05 ({elapsed:.1f}s < 60s)",
    )


def test_04_product_moment_identity(capsys):
    cyl = CylinderEvent((ONES, ONES))
    r2 = df_product_identity_exact(PolyaUrnProcess(1, 1), cyl, 2)
    r3 = df_product_identity_exact(PolyaUrnProcess(1, 1), cyl, 3)
    exact_ok = (
        r2.identity_holds and r2.lhs == F(5, 12)
        and r3.identity_holds and r3.lhs == F(7, 18)
    )
    rep = df_product_identity_check(
        IIDProcess(ProbMeasure.bernoulli(B2, F(1, 2))),
        CylinderEvent((ONES, ZEROS)),
        n_grid=(10, 100, 1000),
        n_paths=400,
        master_seed=SEED_MC_IDENTITY,
    )
    corr_ok = correction_factor(10_000, 3) >= 1 - F(9, 10_000)
    ok = exact_ok and bool(rep.passed) and corr_ok
    announce(
        capsys, 4, ok,
        f"exact at n=2,3 (lhs 5/12, 7/18), MC gap {rep.gaps[-1]:.4f}<=tol {rep.tol:.4f}, "
        f"distinct-index factor within 9e-4 of 1 at n=1e4",
    )


def test_05_rare_event_occupation_bound(capsys):
    eps = F(1, 10)
    margin = 0.1 + 3 * math.sqrt(0.1 * 0.9 / 1000)
    fractions = []
    ok = True
    for gen in (IIDProcess(ProbMeasure.bernoulli(B2, F(1, 100))), PolyaUrnProcess(1, 99)):
        res = markov_bound_check(gen, ONES, eps, n_paths=1000, n_steps=1000, master_seed=SEED_MARKOV_BOUND)
        fractions.append(res.violating_fraction)
        ok = ok and res.passed and res.violating_fraction <= margin
    announce(
        capsys, 5, ok,
        f"violating fractions {fractions[0]:.4f}, {fractions[1]:.4f} <= {margin:.4f} over 1000 paths",
    )


def test_06_uniform_tail_smallness(capsys):
    tails = [EventSet.cofinite_of(NN, range(j)) for j in (2, 6, 12, 20)]
    rep = uniform_smallness_check(
        geom_mixture(),
        tails,
        eps_list=[F(1, 4), F(1, 16)],
        n_grid=(100, 1000, 10_000),
        n_paths=200,
        master_seed=SEED_SMALLNESS,
    )
    ok = rep.passed and all(f >= 0.95 for f in rep.found_fractions)
    announce(
        capsys, 6, ok,
        f"uniform tail index found on fractions {rep.found_fractions} of 200 paths for eps 1/4, 1/16",
    )


def test_07_extraction_and_limit_topology(capsys):
    def mu(k):
        return ProbMeasure.from_weights(B2, [F(1, 2**k), 1 - F(1, 2**k)])

    settling = MeasureSequence(B2, tuple(mu(k) for k in range(64)))
    res = extract_convergent_subsequence(settling, tol=EXTRACTION_TOL)
    limit_ok = abs(float(mass(res.limit, ONES)) - 1.0) <= EXTRACTION_TOL and res.full_sequence

    escaping = MeasureSequence(NN, tuple(ProbMeasure.delta(NN, 64 + k) for k in range(8)))
    try:
        extract_convergent_subsequence(escaping)
        raised = False
    except NotTightError:
        raised = True

    repass_ok = True
    for seq in (settling, MeasureSequence(B2, tuple(ProbMeasure.delta(B2, k % 2) for k in range(12)))):
        r = extract_convergent_subsequence(seq, tol=EXTRACTION_TOL)
        sub = MeasureSequence(seq.space, tuple(seq.measures[i] for i in r.indices))
        passes, _ = a_converges(sub, r.limit, default_closed_family(seq.space), EXTRACTION_TOL)
        repass_ok = repass_ok and passes

    ok = limit_ok and raised and repass_ok
    announce(
        capsys, 7, ok,
        "settling mixture converges to the point mass at tol 1e-9, escaping deltas "
        "raise the tightness error, extracted limits re-pass the independent check",
    )


def test_08_regularity_classifier(capsys):
    geo = classify_radon(ProbMeasure.geometric(NN, F(1, 2)))
    geo_ok = geo.radon and all(w is not None for _, w in geo.tight_witnesses)

    finite_ok = True
    for mu in (
        ProbMeasure.uniform(finite(5)),
        ProbMeasure.delta(finite(7), 3),
        ProbMeasure.bernoulli(B2, F(1, 3)),
        ProbMeasure.from_weights(finite(3), [F(1, 5), F(1, 5), F(3, 5)]),
    ):
        finite_ok = finite_ok and classify_radon(mu).radon

    try:
        ProbMeasure.from_weights(B2, [F(1, 2), F(1, 4)])
        rejected = False
    except ValueError:
        rejected = True

    ok = geo_ok and finite_ok and rejected
    announce(
        capsys, 8, ok,
        "geometric classified with witnesses, finite measures all certified, "
        "sub-probability weights rejected at construction",
    )


def test_09_end_to_end_limit_pipeline(capsys):
    started = time.monotonic()
    events = [EventSet.of(NN, [0]), EventSet.of(NN, [1, 2]), EventSet.cofinite_of(NN, [0])]
    rep = construct_rcd_from_empiricals(
        geom_mixture(),
        events,
        n_grid=(100, 1000, 4000, 6000, 8000, 10_000),
        n_paths=200,
        master_seed=SEED_PIPELINE,
        coverage=PIPELINE_COVERAGE,
    )
    elapsed = time.monotonic() - started
    kernel_ok = rep.kernel_report is not None and rep.kernel_report.passed
    ok = rep.passed and rep.pass_fraction >= 0.95 and kernel_ok and elapsed < 120.0
    announce(
        capsys, 9, ok,
        f"per-path limits match the latent kernel: pass fraction {rep.pass_fraction:.2f}>=0.95, "
        f"kernel check passed ({elapsed:.1f}s < 120s)",
    )


def test_10_byte_identical_reruns(capsys, tmp_path):
    runner = CliRunner()

    def stable(text: str) -> str:
        return "\n".join(
            line for line in text.splitlines()
            if '"timestamp"' not in line and '"wall_clock_s"' not in line
        )

    scenarios = {
        "simulate": [
            "simulate", "--gen", "polya:1,1", "--n", "200", "--paths", "5",
            "--seed", str(SEED_DETERMINISM), "--out-dir", str(tmp_path),
        ],
        "estimate-mixing": [
            "estimate-mixing", "--gen", "mixture:grid(1/4,3/4):bern",
            "--events", "cells:1", "--n-grid", "10,100,1000", "--paths", "20",
            "--seed", str(SEED_DETERMINISM), "--out-dir", str(tmp_path),
        ],
    }
    ok = True
    for name, args in scenarios.items():
        first = runner.invoke(main, args, catch_exceptions=False)
        json_a = stable((tmp_path / f"{name}.json").read_text())
        csv_a = (tmp_path / f"{name}.csv").read_text()
        second = runner.invoke(main, args, catch_exceptions=False)
        json_b = stable((tmp_path / f"{name}.json").read_text())
        csv_b = (tmp_path / f"{name}.csv").read_text()
        ok = ok and first.exit_code == 0 and second.exit_code == 0
        ok = ok and json_a == json_b and csv_a == csv_b
    announce(
        capsys, 10, ok,
        "rerun with the same master seed reproduces JSON (volatile lines aside) and CSV byte for byte",
    )
