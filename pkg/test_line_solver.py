import itertools
import time
from collections import Counter
from functools import lru_cache

import numpy as np
import pytest

from grid_solver import SolveMode
from line_solver import (Knapsack, LineSolver, TileGraph, Walk, admission_order, brute_force_line,
                         is_allowed_set, knapsack_reachable, min_closed_walk, min_plus_walk, simple_cycles, solve_line)
from tiling_core import FORBID, RuleSet

F = FORBID


def rules_from_mask(mask: int, m: int = 3, weights=None) -> RuleSet:
    allowed = np.array([(mask >> k) & 1 for k in range(m * m)], dtype=bool).reshape(m, m)
    w = np.zeros((m, m), dtype=np.int64) if weights is None else np.asarray(weights)
    return RuleSet(tuple(f"t{i}" for i in range(m)), np.where(allowed, w, F), np.zeros((m, m)))


def assert_walk(rules, t0, t1, n, tiles):
    assert len(tiles) == n
    assert tiles[0] == t0 and tiles[-1] == t1
    assert all(rules.h[a, b] < F for a, b in zip(tiles, tiles[1:]))


def test_knapsack_reachable_small_and_large():
    assert not knapsack_reachable([3, 5], 7)
    assert knapsack_reachable([3, 5], 8)
    assert knapsack_reachable([3, 5], 10 ** 15)
    assert not knapsack_reachable([4, 6], 10 ** 15 + 1)
    assert knapsack_reachable([], 0)
    assert not knapsack_reachable([2], -2)


def test_knapsack_min_cost_exact_fill():
    k = Knapsack([(2, 5), (3, 6)])
    assert k.solve(7) == (16, {2: 2, 3: 1})
    assert k.solve(6)[0] == 12
    assert k.solve(1) is None
    value, counts = k.solve(3 * 10 ** 12)
    assert value == 6 * 10 ** 12
    assert sum(a * c for a, c in counts.items()) == 3 * 10 ** 12


def test_admission_order_needs_shared_nodes():
    path = Walk((0, 1), 0, False)
    near = Walk((1, 2), 0, True)
    far = Walk((2, 3), 0, True)
    assert admission_order(path, [far, near]) == [near, far]
    assert admission_order(path, [Walk((3, 4), 0, True)]) is None


def walk_exists(edges, start, end):
    """Is there a walk from start to end using every edge of the multiset exactly as often as listed?"""

    @lru_cache(maxsize=None)
    def go(node, remaining):
        if not remaining:
            return node == end
        for k, ((a, b), count) in enumerate(remaining):
            if a == node:
                rest = remaining[:k] + (((a, b), count - 1),) * (count > 1) + remaining[k + 1:]
                if go(b, rest):
                    return True
        return False

    return go(start, tuple(sorted(edges.items())))


def walk_edges(walks):
    edges = Counter()
    for w in walks:
        nodes = w.nodes + (w.nodes[0],) if w.is_cycle else w.nodes
        edges.update(zip(nodes, nodes[1:]))
    return edges


def test_allowed_sets_are_exactly_the_spliceable_ones():
    rng = np.random.default_rng(13)
    checked = 0
    for _ in range(25):
        m = int(rng.integers(1, 4))
        rules = rules_from_mask(int(rng.integers(0, 2 ** (m * m))), m=m)
        g = TileGraph(rules)
        for t0, t1 in itertools.product(range(m), repeat=2):
            catalog = simple_cycles(g, t0, t1)
            for path in catalog.paths:
                for r in range(len(catalog.cycles) + 1):
                    for chosen in itertools.combinations(catalog.cycles, r):
                        if len(path.nodes) + sum(len(c.nodes) for c in chosen) > 12:
                            continue
                        want = walk_exists(walk_edges([path, *chosen]), t0, t1)
                        assert is_allowed_set(path, chosen) == want, (path.nodes, [c.nodes for c in chosen])
                        checked += 1
    assert checked > 0


def test_catalog_lists_paths_and_cycles():
    rules = RuleSet(("a", "b", "c"), [[F, 0, F], [0, F, 0], [F, F, 0]], np.zeros((3, 3)))
    catalog = simple_cycles(TileGraph(rules), 0, 2)
    assert [p.nodes for p in catalog.paths] == [(0, 1, 2)]
    assert [c.nodes for c in catalog.cycles] == [(2,), (0, 1)]


def test_two_cycle_parity_at_huge_n():
    rules = RuleSet(("a", "b"), [[F, 1], [1, F]], np.zeros((2, 2)))
    n = 10 ** 12 + 3
    start = time.perf_counter()
    assert solve_line(rules, 0, 0, n).exists
    assert not solve_line(rules, 0, 0, n - 1).exists
    assert solve_line(rules, 0, 0, n, SolveMode.MINCOST).min_cost == n - 1
    assert time.perf_counter() - start < 1.0


def test_witness_is_a_valid_line():
    rules = RuleSet(("a", "b", "c"), [[0, 2, F], [F, F, -1], [3, F, F]], np.zeros((3, 3)))
    solver = LineSolver(rules, 0, 2)
    for n in range(3, 15):
        result = solver.solve(n, SolveMode.MINCOST)
        oracle = brute_force_line(rules, 0, 2, n, SolveMode.MINCOST)
        assert result.min_cost == oracle.min_cost
        tiles = list(result.witness.cells)
        assert_walk(rules, 0, 2, n, tiles)
        assert sum(int(rules.h[a, b]) for a, b in zip(tiles, tiles[1:])) == result.min_cost


def test_single_tile_line():
    rules = RuleSet(("a", "b"), [[F, F], [F, F]], np.zeros((2, 2)))
    assert solve_line(rules, 0, 0, 1).exists
    assert not solve_line(rules, 0, 1, 1).exists
    assert not solve_line(rules, 0, 0, 2).exists


def test_count_mode_rejected():
    rules = RuleSet(("a",), [[0]], [[0]])
    with pytest.raises(ValueError):
        solve_line(rules, 0, 0, 3, SolveMode.COUNT)


def test_random_weighted_lines_match_oracle():
    rng = np.random.default_rng(3)
    for _ in range(40):
        mask = int(rng.integers(0, 512))
        rules = rules_from_mask(mask, weights=rng.integers(-3, 4, size=(3, 3)))
        t0, t1 = (int(x) for x in rng.integers(0, 3, size=2))
        solver = LineSolver(rules, t0, t1)
        for n in range(1, 16):
            got = solver.solve(n, SolveMode.MINCOST, witness=False)
            want = brute_force_line(rules, t0, t1, n, SolveMode.MINCOST)
            assert (got.exists, got.min_cost) == (want.exists, want.min_cost), (mask, t0, t1, n)


def test_min_plus_walk_pays_nodes_and_edges():
    node = np.array([1.0, 0.0])
    edge = np.array([[np.inf, 2.0], [0.0, 5.0]])
    value, walk = min_plus_walk(node, edge, 3)
    assert (value, walk) == (3, [1, 0, 1])
    value, walk = min_plus_walk(node, edge, 3, end_mask=np.array([True, False]))
    assert (value, walk) == (4, [0, 1, 0])
    assert min_plus_walk(node, np.full((2, 2), np.inf), 2) == (None, None)


def test_min_closed_walk():
    rules = RuleSet(("a", "b"), [[5, 1], [1, 5]], [[5, 1], [1, 5]])
    assert min_closed_walk(rules, 4) == (4, [0, 1, 0, 1])
    assert min_closed_walk(rules, 3)[0] == 7


@lru_cache(maxsize=None)
def every_line(n):
    """Every sequence of n tiles over three tiles, one row each"""
    return np.indices((3,) * n, dtype=np.int8).reshape(n, -1).T


def enumerated_ends(rules, n):
    lines = every_line(n)
    allowed = rules.h_allowed()
    ok = allowed[lines[:, :-1], lines[:, 1:]].all(axis=1)
    return set(zip(lines[ok, 0].tolist(), lines[ok, -1].tolist()))


@pytest.mark.slow
def test_every_three_tile_graph_matches_enumeration():
    for mask in range(512):
        rules = rules_from_mask(mask)
        ends = {n: enumerated_ends(rules, n) for n in range(1, 13)}
        for t0, t1 in itertools.product(range(3), repeat=2):
            solver = LineSolver(rules, t0, t1)
            for n in range(1, 21):
                got = solver.solve(n, witness=False).exists
                want = (t0, t1) in ends[n] if n <= 12 else brute_force_line(rules, t0, t1, n).exists
                assert got == want, (mask, t0, t1, n)
