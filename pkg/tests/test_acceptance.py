"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines,
or `pytest -v` to get one line per criterion from the test names.

Criterion 6 note: the urban preset pins L = 630 m at 5 m granularity
(grid 126), and 126 is not divisible by 5, so the kappa = 5 leg cannot run
on the literal preset under the hard no-padding rule for quantization.
The ordering/nesting sweep therefore runs on a dimension-compatible
variant of the preset (L = 600 m, grid 120, divisible by 15) across
several seeds, while the literal preset is swept at kappa in {1, 3} and
kappa = 5 is asserted to fail loudly as a configuration error.
"""

import hashlib
import math
import resource
import time

import numpy as np
import pytest

import skypath as sp
from skypath.cli import PAPER_UMA, main
from skypath.planner import _seg_len

from conftest import (
    MASK_TARGET_DB,
    PAPER_SEED,
    feasible_fine_instance,
    feasible_quantized_instance,
    mask_only_maps,
)
from test_planner import bellman_ford_length


def report(num: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num:02d} [{name}]: {status}  {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


PAPER_BUDGET = PAPER_UMA.budget

SWEEP_TARGETS = tuple(-50.0 + 0.5 * k for k in range(16))
VARIANT_SEEDS = (35, 60, 25)


@pytest.fixture(scope="module")
def variant_sweeps():
    """Length tables for the L=600 (grid 120) preset variant, kappa in {1, 3, 5}."""
    config = sp.EnvConfig(
        edge_length_m=600.0,
        granularity_m=5.0,
        altitude_m=90.0,
        gbs_count=6,
        gbs_height_m=25.0,
        obstacle_count=30,
        obstacle_side_range_m=(50.0, 70.0),
        obstacle_height_mean_m=40.0,
    )
    tables = {}
    for seed in VARIANT_SEEDS:
        env = sp.generate_environment(config, seed)
        maps = sp.build_radio_map_set(env, PAPER_UMA.epsilon_db)
        u0, uF = (2.5, 2.5), (597.5, 597.5)
        lengths = {}
        for target in SWEEP_TARGETS:
            for kappa in (1, 3, 5):
                try:
                    p = (
                        sp.plan_optimal(maps, target, u0, uF)
                        if kappa == 1
                        else sp.plan_quantized(maps, target, kappa, u0, uF)
                    )
                    lengths[(target, kappa)] = p.total_length_m
                except sp.PlanInfeasibleError:
                    lengths[(target, kappa)] = None
        tables[seed] = lengths
    return tables


def test_criterion_01_sinr_link_budget():
    hi = sp.expected_sinr(-42.4758, PAPER_BUDGET)
    lo = sp.expected_sinr(-50.3659, PAPER_BUDGET)
    ok = abs(hi - 11.0484) <= 1e-3 and abs(lo - (-4.7318)) <= 1e-3
    report(1, "sinr-link-budget", ok, f"sinr(-42.4758)={hi:.4f} dB, sinr(-50.3659)={lo:.4f} dB")


def test_criterion_02_graph_bounds():
    start = time.perf_counter()
    details = []
    ok = True
    for d in (2, 10, 126):
        maps = mask_only_maps(np.ones((d, d), bool))
        g = sp.build_graph_fine(sp.build_feasible_map(maps, MASK_TARGET_DB))
        v, e = g.vertex_count(), g.edge_count()
        ok &= v == d * d and e == 2 * (d - 1) * (2 * d - 1)
        details.append(f"D={d}: |V|={v}, |E|={e}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 1.0
    report(2, "graph-size-bounds", ok, "; ".join(details) + f" ({elapsed * 1e3:.0f} ms)")


def test_criterion_03_nonreproducible_figures_declared():
    # The reported map minimum (-50.3659 dB), the infeasibility onset
    # (-42.4758 dB), and the exact path geometries depend on an unpublished
    # random realization and unpublished channel constants.  They are NOT
    # reproduced numerically; criteria 4-9 cover the claims they illustrate
    # with property-based substitutes.
    report(
        3,
        "non-reproducible-figures-declared",
        True,
        "map minimum, onset target, and exact geometries are realization-specific",
    )


def test_criterion_04_dijkstra_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(20240)
    done = 0
    checked_connected = 0
    while done < 200:
        d = int(rng.integers(3, 13))
        mask = rng.random((d, d)) < float(rng.uniform(0.35, 0.95))
        cells = np.argwhere(mask)
        if len(cells) < 2:
            continue
        s_cell, t_cell = cells[rng.choice(len(cells), 2, replace=False)]
        s = (int(s_cell[0]) + 1, int(s_cell[1]) + 1)
        t = (int(t_cell[0]) + 1, int(t_cell[1]) + 1)
        g = sp.build_graph_fine(
            sp.build_feasible_map(mask_only_maps(mask), MASK_TARGET_DB)
        )
        got = sp.dijkstra(g, s, t)
        expected = bellman_ford_length(mask, s, t, 5.0)
        if expected is None:
            assert got is None
        else:
            assert got is not None and got[1] == expected
            checked_connected += 1
        done += 1
    elapsed = time.perf_counter() - start
    ok = elapsed < 30.0
    report(
        4,
        "dijkstra-oracle-equivalence",
        ok,
        f"200 masks (exact match, {checked_connected} connected) in {elapsed:.1f} s",
    )


def test_criterion_05_kappa1_collapse():
    start = time.perf_counter()
    matched = 0
    seed = 1000
    while matched < 50 and seed < 1600:
        instance = feasible_fine_instance(seed)
        seed += 1
        if instance is None:
            continue
        maps, target, u0, uF = instance
        fine = sp.plan_optimal(maps, target, u0, uF)
        coarse = sp.plan_quantized(maps, target, 1, u0, uF)
        assert coarse.waypoints == fine.waypoints
        assert coarse.total_length_m == fine.total_length_m
        matched += 1
    elapsed = time.perf_counter() - start
    ok = matched >= 50 and elapsed < 30.0
    report(5, "kappa1-collapse", ok, f"{matched} scenarios identical in {elapsed:.1f} s")


def test_criterion_06_suboptimality_ordering(variant_sweeps, paper_maps):
    start = time.perf_counter()
    ok = True
    details = []

    for seed, lengths in variant_sweeps.items():
        for target in SWEEP_TARGETS:
            l1, l3, l5 = (lengths[(target, k)] for k in (1, 3, 5))
            if l1 is not None and l3 is not None and l5 is not None:
                ok &= l1 <= l3 <= l5
            # nested feasibility: kappa=5 feasible -> kappa=3 feasible -> kappa=1
            ok &= l5 is None or l3 is not None
            ok &= l3 is None or l1 is not None
        # downward-closed per kappa: once infeasible, infeasible for all higher targets
        for kappa in (1, 3, 5):
            seen_infeasible = False
            for target in SWEEP_TARGETS:
                if lengths[(target, kappa)] is None:
                    seen_infeasible = True
                elif seen_infeasible:
                    ok = False
        onsets = {
            kappa: next(
                (t for t in SWEEP_TARGETS if lengths[(t, kappa)] is None), None
            )
            for kappa in (1, 3, 5)
        }
        details.append(f"seed {seed} onsets {onsets}")

    # literal preset: kappa in {1, 3} ordered; kappa = 5 must fail loudly (126 % 5 != 0)
    u0, uF = PAPER_UMA.u0, PAPER_UMA.uF
    for target in (-46.0, -44.0, -42.5):
        fine = sp.plan_optimal(paper_maps, target, u0, uF)
        coarse = sp.plan_quantized(paper_maps, target, 3, u0, uF)
        ok &= fine.total_length_m <= coarse.total_length_m
    with pytest.raises(sp.ConfigurationError):
        sp.plan_quantized(paper_maps, -46.0, 5, u0, uF)
    details.append("literal preset: k1<=k3 held, kappa=5 rejected (126 % 5 != 0)")

    elapsed = time.perf_counter() - start
    ok &= elapsed < 120.0
    report(6, "suboptimality-ordering", ok, "; ".join(details) + f" ({elapsed:.1f} s)")


def test_criterion_07_path_feasibility_certificates():
    start = time.perf_counter()
    validated = 0
    seed = 3000
    while validated < 50 and seed < 3800:
        instance = feasible_quantized_instance(seed, 3)
        seed += 1
        if instance is None:
            continue
        maps, target, u0, uF = instance
        fine = sp.plan_optimal(maps, target, u0, uF)
        coarse = sp.plan_quantized(maps, target, 3, u0, uF)
        for p in (fine, coarse):
            rep = sp.validate_path(p, maps, samples_per_segment=100)
            assert rep.passed, rep.failures
        validated += 1
    elapsed = time.perf_counter() - start
    ok = validated >= 50 and elapsed < 120.0
    report(
        7,
        "path-feasibility-certificates",
        ok,
        f"{validated} scenarios x 2 planners, zero violations, {elapsed:.1f} s",
    )


def test_criterion_08_monotonicity_in_target(variant_sweeps):
    ok = True
    for seed, lengths in variant_sweeps.items():
        for kappa in (1, 3, 5):
            series = [lengths[(t, kappa)] for t in SWEEP_TARGETS]
            values = [v for v in series if v is not None]
            ok &= all(a <= b + 1e-9 for a, b in zip(values, values[1:]))
    report(8, "length-monotone-in-target", ok, f"{len(variant_sweeps)} seeds x 3 kappa levels")


def test_criterion_09_pipeline_determinism(tmp_path):
    start = time.perf_counter()
    digests = []
    for run in range(2):
        root = tmp_path / f"run{run}"
        root.mkdir()
        env_path = root / "env.json"
        maps_dir = root / "maps"
        csv_path = root / "sweep.csv"
        assert main(["env-gen", "--preset", "paper-uma", "--seed", "42", "--out", str(env_path)]) == 0
        assert main(["map-build", "--env", str(env_path), "--out-dir", str(maps_dir)]) == 0
        assert (
            main(
                ["sweep", "--maps-dir", str(maps_dir), "--targets=-46:-44:1",
                 "--kappas", "1,3", "--from", "2.5,2.5", "--to", "627.5,627.5",
                 "--out-csv", str(csv_path)]
            )
            == 0
        )
        blob = {}
        blob["env"] = hashlib.sha256(env_path.read_bytes()).hexdigest()
        for p in sorted(maps_dir.glob("*.rmap")):
            blob[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
        blob["sweep"] = hashlib.sha256(csv_path.read_bytes()).hexdigest()
        digests.append(blob)
    elapsed = time.perf_counter() - start
    ok = digests[0] == digests[1] and elapsed < 120.0
    report(
        9,
        "pipeline-determinism",
        ok,
        f"{len(digests[0])} artifacts byte-identical across runs ({elapsed:.1f} s)",
    )


def test_criterion_10_performance_envelope(paper_env, paper_maps):
    # warm the compiled search kernel so the timings measure the algorithm,
    # not the one-time JIT (cached on disk after the first ever run)
    warm = mask_only_maps(np.ones((4, 4), bool))
    sp.plan_optimal(warm, MASK_TARGET_DB, (2.5, 2.5), (17.5, 17.5))

    start = time.perf_counter()
    maps = sp.build_radio_map_set(paper_env, PAPER_UMA.epsilon_db)
    build_s = time.perf_counter() - start

    start = time.perf_counter()
    p = sp.plan_optimal(paper_maps, -44.0, PAPER_UMA.u0, PAPER_UMA.uF)
    plan_ms = (time.perf_counter() - start) * 1e3

    big = 2000
    maps_big = mask_only_maps(np.ones((big, big), bool))
    start = time.perf_counter()
    p_big = sp.plan_optimal(
        maps_big, MASK_TARGET_DB, (2.5, 2.5), (big * 5.0 - 2.5, big * 5.0 - 2.5)
    )
    big_s = time.perf_counter() - start
    expected_diag = (big - 1) * math.sqrt(2.0 * 5.0 * 5.0)
    assert p_big.total_length_m == pytest.approx(expected_diag, rel=1e-9)

    peak_gb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / (1024.0 * 1024.0)

    ok = build_s < 5.0 and plan_ms < 100.0 and big_s < 10.0 and peak_gb < 1.0
    report(
        10,
        "performance-envelope",
        ok,
        f"6-map build {build_s:.2f} s; plan(D=126) {plan_ms:.1f} ms; "
        f"plan(D=2000) {big_s:.2f} s; peak RSS {peak_gb:.2f} GB",
    )
