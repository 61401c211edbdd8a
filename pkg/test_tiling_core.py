import itertools
import json

import numpy as np
import pytest

from errors import DimensionError, RuleFileError, TilekitError, UnknownTileError
from tiling_core import (FORBID, BoundaryCondition, LayerSpec, RuleSet, Symmetry, Tiling, TilingInstance,
                         build_layered_ruleset, dump_instance, evaluate_bound, instance_from_dict,
                         load_instance, render_tiling, tiling_from_dict, tiling_from_names,
                         tiling_to_dict, validate_tiling)

F = FORBID


def checkerboard_rules():
    """Two tiles that must alternate in both directions"""
    alt = [[F, 0], [0, F]]
    return RuleSet(("a", "b"), alt, alt)


def test_evaluate_bound_is_exact_polynomial():
    assert evaluate_bound([1, 2, 3], 2) == 17
    assert evaluate_bound([0], 10 ** 30) == 0
    assert evaluate_bound([-4, 0, 1], 10 ** 20) == 10 ** 40 - 4


def test_sentinel_is_clamped():
    rules = RuleSet(("a",), [[5 * F]], [[F + 1]])
    assert rules.h[0, 0] == F and rules.v[0, 0] == F
    assert rules.is_unweighted


def test_duplicate_tiles_rejected():
    with pytest.raises(UnknownTileError):
        RuleSet(("a", "a"), np.zeros((2, 2)), np.zeros((2, 2)))


def test_weight_shape_checked():
    with pytest.raises(DimensionError):
        RuleSet(("a", "b"), np.zeros((2, 2)), np.zeros((3, 3)))


@pytest.mark.parametrize("h,v,expected", [
    ([[0, 1], [1, 2]], [[0, 1], [1, 2]], Symmetry.ROTATION),
    ([[0, 1], [1, 2]], [[3, 0], [0, 3]], Symmetry.REFLECTION),
    ([[0, 1], [2, 2]], [[0, 1], [2, 2]], Symmetry.NONE),
])
def test_symmetry_classes(h, v, expected):
    assert RuleSet(("a", "b"), h, v).symmetry() == expected


def test_shifted_moves_costs_by_pair_count():
    zero = RuleSet(("a", "b"), np.zeros((2, 2)), np.zeros((2, 2)))
    t = Tiling.from_rows([[0, 1, 0], [1, 1, 0], [0, 0, 1]])
    shifted = zero.shifted(1)
    open_cost = validate_tiling(TilingInstance(shifted, BoundaryCondition.open()), t).total_cost
    torus_cost = validate_tiling(TilingInstance(shifted, BoundaryCondition.periodic()), t).total_cost
    assert open_cost == -2 * 3 * 2
    assert torus_cost == -2 * 3 * 3


def test_shifted_keeps_sentinel():
    rules = checkerboard_rules().shifted(7)
    assert rules.h[0, 0] == F and rules.h[0, 1] == -7


def test_symmetrized_adds_transposes():
    rules = RuleSet.from_pairs(("a", "b"), [("a", "b")], [("b", "a")]).symmetrized()
    assert rules.h_allowed()[1, 0] and rules.v_allowed()[0, 1]
    assert not rules.h_allowed()[0, 0]


def test_from_pairs_unknown_tile():
    with pytest.raises(UnknownTileError):
        RuleSet.from_pairs(("a",), [("a", "z")], [])


def test_validate_counts_violations_and_corners():
    instance = TilingInstance(checkerboard_rules(), BoundaryCondition.four_corners(0))
    good = Tiling.from_rows([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    report = validate_tiling(instance, good)
    assert report.valid and report.total_cost == 0

    bad = Tiling.from_rows([[1, 1, 0], [1, 0, 1], [0, 1, 0]])
    report = validate_tiling(instance, bad)
    assert not report.valid
    assert report.boundary_mismatches == [((0, 0), 0, 1)]
    assert len(report.violations) == 2


def test_even_checkerboard_fails_four_corners():
    instance = TilingInstance(checkerboard_rules(), BoundaryCondition.four_corners(0))
    t = Tiling.from_array(np.indices((4, 4)).sum(axis=0) % 2)
    report = validate_tiling(instance, t)
    assert report.violations == []
    assert {cell for cell, _, _ in report.boundary_mismatches} == {(0, 3), (3, 0)}


def test_periodic_cost_invariant_under_shifts():
    rng = np.random.default_rng(5)
    h = rng.integers(-3, 4, size=(3, 3))
    v = rng.integers(-3, 4, size=(3, 3))
    instance = TilingInstance(RuleSet(("a", "b", "c"), h, v), BoundaryCondition.periodic())
    t = Tiling.from_array(rng.integers(0, 3, size=(4, 4)))
    base = validate_tiling(instance, t).total_cost
    for dr, dc in [(1, 0), (0, 1), (2, 3)]:
        assert validate_tiling(instance, t.rolled(dr, dc)).total_cost == base


def test_reflected_tiling_keeps_cost_under_reflection_symmetry():
    h = [[0, 2], [2, -1]]
    v = [[1, 0], [0, 3]]
    instance = TilingInstance(RuleSet(("a", "b"), h, v), BoundaryCondition.open())
    t = Tiling.from_rows([[0, 1, 1], [1, 0, 0]])
    cost = validate_tiling(instance, t).total_cost
    assert validate_tiling(instance, t.mirrored()).total_cost == cost
    assert validate_tiling(instance, t.flipped()).total_cost == cost


def test_unknown_tile_in_tiling():
    instance = TilingInstance(checkerboard_rules(), BoundaryCondition.open())
    with pytest.raises(UnknownTileError):
        validate_tiling(instance, Tiling.from_rows([[0, 2]]))


def test_boundary_condition_checks():
    with pytest.raises(TilekitError):
        BoundaryCondition("four_corners", 0, ("ul",))
    with pytest.raises(UnknownTileError):
        BoundaryCondition("one_corner")
    assert BoundaryCondition.two_corners(1).pinned_cells(3, 4) == {(0, 0): 1, (2, 3): 1}


def test_unweighted_instance_takes_zero_bound():
    with pytest.raises(TilekitError):
        TilingInstance(checkerboard_rules(), BoundaryCondition.open(), (1,))


def test_tiling_shape_checked():
    with pytest.raises(DimensionError):
        Tiling(2, 2, (0, 1, 0))
    with pytest.raises(DimensionError):
        Tiling.from_rows([[0, 1], [0]])


def test_rotation_is_clockwise():
    t = Tiling.from_rows([[0, 1], [2, 3]])
    assert t.rotated().rows() == [[2, 0], [3, 1]]


def test_layered_product_adds_weights_and_filters():
    a = RuleSet(("x", "y"), [[1, 0], [0, 1]], [[0, 0], [0, 0]])
    b = RuleSet(("p", "q"), [[0, 5], [5, 0]], [[0, 0], [0, 0]])
    rules = build_layered_ruleset(LayerSpec((a, b), cross_filter=lambda names: names != ("y", "q")))
    assert rules.m == 3
    assert rules.tiles == (("x", "p"), ("x", "q"), ("y", "p"))
    assert rules.name(1) == "x/q"
    assert rules.h[0, 1] == 1 + 5
    assert rules.h[0, 2] == 0


def test_layered_conditional_term():
    a = RuleSet(("x", "y"), np.zeros((2, 2)), np.zeros((2, 2)))
    rules = build_layered_ruleset(LayerSpec((a,), conditional=lambda s, t, axis: F if axis == "v" and s != t else 0))
    assert rules.v[0, 1] == F and rules.h[0, 1] == 0


def test_layered_forbidden_pair_survives_negative_companion():
    a = RuleSet(("x", "y"), [[0, F], [0, 0]], [[0, 0], [0, 0]])
    b = RuleSet(("p",), [[-5]], [[-5]])
    rules = build_layered_ruleset(LayerSpec((a, b)))
    assert rules.h[0, 1] == F
    assert rules.h[1, 0] == -5
    assert not rules.h_allowed()[0, 1]
    bonus = build_layered_ruleset(LayerSpec((a, b), conditional=lambda s, t, axis: -F if s != t else 0))
    assert bonus.h[0, 1] == F


def test_layered_cost_is_sum_of_layer_costs():
    rng = np.random.default_rng(61)

    def layer(names):
        h = rng.integers(-3, 4, size=(2, 2))
        v = rng.integers(-3, 4, size=(2, 2))
        h[rng.random((2, 2)) < 0.15] = F
        return RuleSet(names, h, v)

    for _ in range(40):
        a, b = layer(("x", "y")), layer(("p", "q"))
        table = {}
        for s in itertools.product(a.tiles, b.tiles):
            for t in itertools.product(a.tiles, b.tiles):
                for axis in "hv":
                    table[s, t, axis] = F if rng.random() < 0.05 else int(rng.integers(-2, 3))
        rules = build_layered_ruleset(LayerSpec((a, b), conditional=lambda s, t, axis: table[s, t, axis]))
        arr = rng.integers(0, 4, size=(3, 3))
        bc = BoundaryCondition.open()
        product = validate_tiling(TilingInstance(rules, bc), Tiling.from_array(arr))
        first = validate_tiling(TilingInstance(a, bc), Tiling.from_array(arr // 2))
        second = validate_tiling(TilingInstance(b, bc), Tiling.from_array(arr % 2))
        extra = []
        for r in range(3):
            for c in range(3):
                if c < 2:
                    extra.append(table[rules.tiles[arr[r, c]], rules.tiles[arr[r, c + 1]], "h"])
                if r < 2:
                    extra.append(table[rules.tiles[arr[r + 1, c]], rules.tiles[arr[r, c]], "v"])
        layers_valid = first.valid and second.valid and max(extra) < F
        assert product.valid == layers_valid
        if layers_valid:
            assert product.total_cost == first.total_cost + second.total_cost + sum(extra)


def test_rotation_keeps_cost_under_rotation_symmetry():
    rng = np.random.default_rng(67)
    for _ in range(30):
        m = int(rng.integers(1, 4))
        w = rng.integers(-3, 4, size=(m, m))
        w = np.triu(w) + np.triu(w, 1).T
        w[(rng.random((m, m)) < 0.1) & np.eye(m, dtype=bool)] = F
        rules = RuleSet(tuple(f"t{i}" for i in range(m)), w, w)
        assert rules.symmetry() == Symmetry.ROTATION
        instance = TilingInstance(rules, BoundaryCondition.open(), (F,) if not rules.is_unweighted else (0,))
        t = Tiling.from_array(rng.integers(0, m, size=(3, 4)))
        cost = validate_tiling(instance, t).total_cost
        turned = t
        for _ in range(4):
            turned = turned.rotated()
            assert validate_tiling(instance, turned).total_cost == cost
        assert turned == t


def test_validate_checks_requested_size():
    instance = TilingInstance(checkerboard_rules(), BoundaryCondition.open())
    square = Tiling.from_rows([[0, 1], [1, 0]])
    assert validate_tiling(instance, square, n=2).valid
    with pytest.raises(DimensionError):
        validate_tiling(instance, square, n=3)
    with pytest.raises(DimensionError):
        validate_tiling(instance, Tiling.from_rows([[0, 1, 0], [1, 0, 1]]), n=2)


def test_rule_file_roundtrip(tmp_path):
    instance = TilingInstance(RuleSet(("a", "b"), [[F, -1], [2, 0]], [[0, F], [3, 1]]),
                              BoundaryCondition.one_corner(1, "lr"), (4, -1))
    path = tmp_path / "rules.json"
    dump_instance(instance, path)
    doc = json.loads(path.read_text())
    assert doc["horizontal"][0][0] == "F"
    back = load_instance(path)
    assert np.array_equal(back.rules.h, instance.rules.h)
    assert np.array_equal(back.rules.v, instance.rules.v)
    assert back.bc == instance.bc
    assert back.cost_bound == (4, -1)


@pytest.mark.parametrize("doc,field", [
    ({"tiles": ["a", "b"], "horizontal": [[0, "G"], [0, 0]], "vertical": [[0, 0], [0, 0]]}, "horizontal[0][1]"),
    ({"tiles": ["a", "b"], "horizontal": [[0, 0]], "vertical": [[0, 0], [0, 0]]}, "horizontal"),
    ({"tiles": [], "horizontal": [], "vertical": []}, "tiles"),
    ({"tiles": ["a"], "horizontal": [[0]], "vertical": [[0]], "boundary": {"kind": "four_corners", "tile": "z"}},
     "boundary.tile"),
    ({"tiles": ["a"], "horizontal": [[0]], "vertical": [[0]], "boundary": {"kind": "spiral"}}, "boundary.kind"),
])
def test_rule_file_errors_name_the_field(doc, field):
    with pytest.raises(RuleFileError) as err:
        instance_from_dict(doc, "test.json")
    assert err.value.field == field
    assert "test.json" in str(err.value)


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"tiles": ["a"],\n "horizontal": [[0]]\n "vertical": [[0]]}')
    with pytest.raises(RuleFileError) as err:
        load_instance(path)
    assert err.value.field == "line 3"


def test_witness_json_and_rendering():
    rules = checkerboard_rules()
    t = Tiling.from_rows([[0, 1], [1, 0]])
    doc = tiling_to_dict(rules, t)
    assert doc == {"rows": [["a", "b"], ["b", "a"]]}
    assert tiling_from_dict(rules, doc) == t
    assert render_tiling(t, ["a", "bb"]) == "a  bb\nbb a"
    with pytest.raises(UnknownTileError):
        tiling_from_names(rules, [["a", "c"]])
