import math
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from errors import FixtureError, SymmetryError, TilekitError
from grid_solver import SolveMode, solve_grid
from line_solver import solve_line
from tiling_core import FORBID, BoundaryCondition, RuleSet, Tiling, TilingInstance, validate_tiling
from variant_lab import (RowPairProblem, affine_fit, corner_to_three, even_periodic_reflection_minimum,
                         extend_reflection, fixture, fixture_ids, rotation_fill, rotation_thresholds,
                         row_pair_minimum, sweep_report, weighted_rotation_decide)

F = FORBID


def symmetric(rng, m, forbid=0.2):
    w = rng.integers(-2, 4, size=(m, m))
    w = np.triu(w) + np.triu(w, 1).T
    mask = np.triu(rng.random((m, m)) < forbid)
    mask = mask | mask.T
    return np.where(mask, F, w)


def rotation_rules(rng, m):
    w = symmetric(rng, m)
    return RuleSet(tuple(f"t{i}" for i in range(m)), w, w)


def reflection_rules(rng, m):
    return RuleSet(tuple(f"t{i}" for i in range(m)), symmetric(rng, m), symmetric(rng, m))


def loose(rules):
    return (0,) if rules.is_unweighted else (F,)


@pytest.mark.parametrize("fid,cost", [
    ("fig4", 0), ("fig5", -4), ("fig9", -84), ("fig10", -84), ("fig14", 52), ("fig15", 52),
])
def test_golden_tilings_validate_at_stated_cost(fid, cost):
    fx = fixture(fid)
    report = validate_tiling(fx.instance, fx.tiling)
    assert report.valid, report.violations[:3]
    assert fx.expected_cost == cost
    assert report.total_cost == cost


def test_fixture_ids_and_layers():
    assert "periodic-unweighted" in fixture_ids()
    assert fixture("periodic-unweighted").layers[0].m == 7
    assert len(fixture("reflection-weighted-L1").layers) == 1


def test_unknown_fixture():
    with pytest.raises(FixtureError):
        fixture("fig99")


def test_weighted_open_optimum():
    result = solve_grid(fixture("weighted-open").instance, 5, SolveMode.MINCOST)
    assert result.min_cost == -4
    assert result.exists


def test_weighted_periodic_small_torus():
    result = solve_grid(fixture("weighted-periodic").instance, 3, SolveMode.MINCOST)
    assert result.min_cost == 2


@pytest.mark.parametrize("mode,ends,value", [
    ("wprime", "free", -12),
    ("wprime", "oneblocked", -10),
    ("wprime", "bothblocked", 0),
    ("wdprime", "free", -78),
    ("wdprime", "onecorner", -62),
    ("wdprime", "corners", -42),
])
def test_row_pair_minimum_at_ten(mode, ends, value):
    rules = fixture("reflection-weighted-L1").rules
    prob = RowPairProblem(rules, mode, ends)
    got, top, bottom = row_pair_minimum(prob, 10)
    assert got == value
    assert len(top) == len(bottom) == 10
    assert prob.pair_cost([rules.index(t) for t in top], [rules.index(b) for b in bottom]) == value


def test_row_pair_corner_sweep_is_affine():
    prob = RowPairProblem(fixture("reflection-weighted-L1").rules, "wdprime", "corners")
    report = sweep_report(lambda n: row_pair_minimum(prob, n)[0], range(6, 13, 2))
    assert affine_fit(report) == (Fraction(-10), Fraction(58))


def test_row_pair_free_sweep_has_slope_minus_ten():
    prob = RowPairProblem(fixture("reflection-weighted-L1").rules, "wdprime", "free")
    report = sweep_report(lambda n: row_pair_minimum(prob, n)[0], range(6, 13, 2))
    slope, intercept = affine_fit(report)
    assert slope == -10
    assert intercept == 22


def test_row_pair_rejects_mismatched_ends():
    with pytest.raises(TilekitError):
        RowPairProblem(fixture("reflection-weighted-L1").rules, "wdprime", "oneblocked")


def test_affine_fit_detects_curves():
    assert affine_fit(pd.DataFrame({"N": [1, 2, 3], "value": [0, 1, 4]})) is None
    assert affine_fit(pd.DataFrame({"N": [1, 2, 3], "value": [None, 3, 5]})) == (2, -1)


def test_reflection_extension_matches_golden():
    fx = fixture("fig11")
    out = extend_reflection(fx.instance, fx.tiling)
    assert out == fx.extra["expected"]
    assert validate_tiling(fx.instance, out).valid


def test_corner_block_to_three():
    fx = fixture("fig12")
    assert corner_to_three(fx.rules, fx.tiling) == fx.extra["expected"]


def test_rotation_fill_matches_golden():
    fx = fixture("fig13")
    out = rotation_fill(fx.rules, fx.extra["side"])
    assert out == fx.tiling
    assert validate_tiling(fx.instance, out).valid


def test_uniform_extension_and_fill():
    rules = RuleSet(("a",), [[1]], [[1]])
    instance = TilingInstance(rules, BoundaryCondition.open(), (100,))
    out = extend_reflection(instance, Tiling.from_array(np.zeros((4, 4), dtype=int)))
    assert (out.height, out.width) == (6, 6)
    assert rotation_fill(rules, [0]) == Tiling(1, 1, (0,))
    assert rotation_fill(rules, [0] * 5).rows() == [[0] * 5] * 5


def test_symmetry_preconditions():
    skew = RuleSet(("a", "b"), [[0, 1], [2, 0]], [[0, 1], [2, 0]])
    instance = TilingInstance(skew, BoundaryCondition.open(), (100,))
    with pytest.raises(SymmetryError):
        extend_reflection(instance, Tiling.from_array(np.zeros((4, 4), dtype=int)))
    reflection = RuleSet(("a", "b"), [[0, 1], [1, 0]], [[3, 0], [0, 3]])
    with pytest.raises(SymmetryError):
        rotation_fill(reflection, [0, 1, 0])


def test_random_extensions_validate():
    rng = np.random.default_rng(17)
    checked = 0
    for _ in range(50):
        rules = reflection_rules(rng, int(rng.integers(1, 4)))
        instance = TilingInstance(rules, BoundaryCondition.open(), loose(rules))
        found = solve_grid(instance, 4, SolveMode.MINCOST)
        if found.witness is None:
            continue
        out = extend_reflection(instance, found.witness)
        assert validate_tiling(instance, out).valid
        checked += 1
    assert checked > 0


def test_random_rotation_fills_validate():
    rng = np.random.default_rng(23)
    checked = 0
    for _ in range(30):
        rules = rotation_rules(rng, int(rng.integers(1, 4)))
        n = int(rng.integers(3, 8))
        line = solve_line(rules, 0, 0, n, SolveMode.MINCOST)
        if not line.exists:
            continue
        out = rotation_fill(rules, list(line.witness.cells))
        instance = TilingInstance(rules, BoundaryCondition.four_corners(0), loose(rules))
        assert validate_tiling(instance, out).valid
        checked += 1
    assert checked > 0


def test_rotation_thresholds():
    loop = RuleSet(("a",), [[0]], [[0]])
    assert rotation_thresholds(loop, 0) == (2, 1)
    alt = [[F, 0], [0, F]]
    assert rotation_thresholds(RuleSet(("a", "b"), alt, alt), 0) == (math.inf, 1)
    tri = [[F, 0, 0], [0, F, 0], [0, 0, F]]
    assert rotation_thresholds(RuleSet(("a", "b", "c"), tri, tri), 0) == (4, 1)
    none = [[F, F], [F, F]]
    assert rotation_thresholds(RuleSet(("a", "b"), none, none), 0) == (math.inf, math.inf)


def test_even_torus_reflection_minimum_matches_solver():
    rng = np.random.default_rng(31)
    for _ in range(15):
        rules = reflection_rules(rng, int(rng.integers(1, 4)))
        for n in (2, 4):
            fast = even_periodic_reflection_minimum(rules, n)
            exact = solve_grid(TilingInstance(rules, BoundaryCondition.periodic(), loose(rules)), n, SolveMode.MINCOST)
            assert fast.min_cost == exact.min_cost
            if fast.exists:
                instance = TilingInstance(rules, BoundaryCondition.periodic(), loose(rules))
                assert validate_tiling(instance, fast.witness).total_cost == fast.min_cost


def test_rotation_open_is_checkerboard():
    w = [[-1, 2], [2, 3]]
    rules = RuleSet(("a", "b"), w, w)
    result = weighted_rotation_decide(TilingInstance(rules, BoundaryCondition.open(), (0,)), 4)
    assert result.min_cost == -24 and result.exists


@pytest.mark.parametrize("kind", ["open", "periodic"])
def test_rotation_decide_matches_solver(kind):
    rng = np.random.default_rng(41)
    bc = BoundaryCondition.open() if kind == "open" else BoundaryCondition.periodic()
    for _ in range(20):
        rules = rotation_rules(rng, int(rng.integers(1, 4)))
        instance = TilingInstance(rules, bc, loose(rules))
        for n in (2, 3):
            fast = weighted_rotation_decide(instance, n)
            exact = solve_grid(instance, n, SolveMode.MINCOST)
            assert fast.min_cost == exact.min_cost, (rules.h.tolist(), n)
            if fast.witness is not None:
                assert validate_tiling(instance, fast.witness).total_cost == fast.min_cost


def four_corner_instance():
    w = [[2, 0, 1], [0, 2, 0], [1, 0, 2]]
    return TilingInstance(RuleSet(("t1", "a", "b"), w, w), BoundaryCondition.four_corners(0), (1,))


@pytest.mark.parametrize("n", range(4, 10))
def test_four_corner_rotation_procedure(n):
    result = weighted_rotation_decide(four_corner_instance(), n)
    assert result.exists == (n % 2 == 1)
    if result.exists:
        assert result.min_cost == 0


def test_four_corner_needs_constant_bound():
    instance = four_corner_instance()
    linear = TilingInstance(instance.rules, instance.bc, (1, 1))
    with pytest.raises(TilekitError):
        weighted_rotation_decide(linear, 7)


@pytest.mark.slow
def test_four_corner_rotation_matches_solver():
    rng = np.random.default_rng(43)
    for k in range(40):
        m = int(rng.integers(1, 4))
        w = symmetric(rng, m)
        if k % 2:
            # a cheapest pair of weight 0 takes the corner-square path at N >= 6
            w = np.where(w >= F, F, np.abs(w))
        rules = RuleSet(tuple(f"t{i}" for i in range(m)), w, w)
        bc = BoundaryCondition.four_corners(int(rng.integers(0, m)))
        for c in ((0,) if rules.is_unweighted else (0, 1)):
            instance = TilingInstance(rules, bc, (c,))
            for n in range(4, 8):
                fast = weighted_rotation_decide(instance, n)
                exact = solve_grid(instance, n, SolveMode.MINCOST)
                assert fast.exists == (exact.exists and exact.min_cost <= c), (w.tolist(), c, n)
                if fast.exists and fast.min_cost is not None:
                    assert fast.min_cost == exact.min_cost, (w.tolist(), c, n)
                if fast.witness is not None and fast.exists:
                    report = validate_tiling(instance, fast.witness, n=n)
                    assert report.valid and report.total_cost <= c
