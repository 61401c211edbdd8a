"""
One-dimensional tiling from t0 to t1 in time independent of the size of N.

A line of N tiles is a walk of N-1 edges in the tile graph.  Every such walk
is a simple path from t0 to t1 with simple cycles spliced in, and a set of
cycles can be spliced in iff it grows from the path by shared nodes.  The
remaining question is an unbounded knapsack over cycle lengths, answered by
a small table below m'*g and a gcd test (or best-ratio extension) above it.
"""

import logging
from dataclasses import dataclass
from functools import reduce
from math import gcd
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from config import Config
from errors import ResourceBudgetError
from grid_solver import SolveMode, SolveResult, _mode
from tiling_core import FORBID, RuleSet, Tiling

logger = logging.getLogger(__name__)

INF = float("inf")


def _lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b)


@dataclass(frozen=True)
class Walk:
    """A simple path (nodes t0..t1) or a simple cycle (nodes without the repeated start)"""

    nodes: Tuple[int, ...]
    cost: int
    is_cycle: bool

    @property
    def length(self) -> int:
        # cycles: number of edges; paths: number of edges as well
        return len(self.nodes) if self.is_cycle else len(self.nodes) - 1

    @property
    def node_set(self) -> FrozenSet[int]:
        return frozenset(self.nodes)


class TileGraph:
    """Directed graph on tiles; an edge (i, j) whenever i may sit left of j"""

    def __init__(self, rules: RuleSet):
        self.rules = rules
        self.graph = nx.DiGraph()
        self.graph.add_nodes_from(range(rules.m))
        for i, j in zip(*np.nonzero(rules.h < FORBID)):
            self.graph.add_edge(int(i), int(j), weight=int(rules.h[i, j]))

    def cost(self, nodes: Sequence[int], closed: bool = False) -> int:
        total = sum(self.graph[a][b]["weight"] for a, b in zip(nodes, nodes[1:]))
        if closed:
            total += self.graph[nodes[-1]][nodes[0]]["weight"]
        return total


@dataclass
class CycleCatalog:
    paths: List[Walk]
    cycles: List[Walk]


def simple_cycles(g: TileGraph, t0: int, t1: int) -> CycleCatalog:
    if t0 == t1:
        raw_paths = [[t0]]
    else:
        raw_paths = list(nx.all_simple_paths(g.graph, t0, t1))
    paths = [Walk(tuple(p), g.cost(p), False) for p in raw_paths]
    paths.sort(key=lambda w: (len(w.nodes), w.nodes))
    cycles = []
    for c in nx.simple_cycles(g.graph):
        k = c.index(min(c))
        nodes = tuple(c[k:] + c[:k])
        cycles.append(Walk(nodes, g.cost(nodes, closed=True), True))
    cycles.sort(key=lambda w: (len(w.nodes), w.nodes))
    logger.debug(f"Catalog: {len(paths)} simple paths, {len(cycles)} simple cycles")
    return CycleCatalog(paths, cycles)


def admission_order(path: Walk, cycles: Sequence[Walk]) -> Optional[List[Walk]]:
    """Cycles in an order where each shares a node with what came before, or None"""
    covered = set(path.nodes)
    remaining = list(cycles)
    order = []
    while remaining:
        for k, c in enumerate(remaining):
            if covered & c.node_set:
                covered |= c.node_set
                order.append(remaining.pop(k))
                break
        else:
            return None
    return order


def is_allowed_set(path: Walk, cycles: Sequence[Walk]) -> bool:
    return admission_order(path, cycles) is not None


def knapsack_reachable(lengths: Sequence[int], target: int) -> bool:
    """Is target a non-negative integer combination of lengths?"""
    lengths = sorted(set(int(a) for a in lengths))
    if target < 0:
        return False
    if target == 0:
        return True
    if not lengths:
        return False
    g = reduce(_lcm, lengths)
    if target >= len(lengths) * g:
        return target % reduce(gcd, lengths) == 0
    reach = np.zeros(target + 1, dtype=bool)
    reach[0] = True
    for x in range(1, target + 1):
        reach[x] = any(a <= x and reach[x - a] for a in lengths)
    return bool(reach[target])


class Knapsack:
    """
    Minimum-cost exact fill of a target with items (length, cost), unbounded.
    Optimal fills use the best-ratio item for all but fewer than best_len
    copies of each other item, so a table up to best_len * sum(lengths) is enough.
    """

    def __init__(self, items: Sequence[Tuple[int, int]]):
        self.items = sorted(items)
        self.best_len, self.best_cost = self.items[0]
        for a, c in self.items[1:]:
            if c * self.best_len < self.best_cost * a:
                self.best_len, self.best_cost = a, c
        self.limit = self.best_len * sum(a for a, _ in self.items)
        self.table: List[Optional[int]] = [None] * (self.limit + 1)
        self.choice: List[int] = [-1] * (self.limit + 1)
        self.table[0] = 0
        for x in range(1, self.limit + 1):
            for k, (a, c) in enumerate(self.items):
                if a <= x and self.table[x - a] is not None:
                    value = self.table[x - a] + c
                    if self.table[x] is None or value < self.table[x]:
                        self.table[x] = value
                        self.choice[x] = k

    def solve(self, target: int) -> Optional[Tuple[int, Dict[int, int]]]:
        """(cost, copies per length) or None when the target cannot be filled"""
        if target < 0:
            return None
        best = None
        x = target % self.best_len
        while x <= min(target, self.limit):
            if self.table[x] is not None:
                extra = (target - x) // self.best_len
                value = self.table[x] + extra * self.best_cost
                if best is None or value < best[0]:
                    best = (value, x, extra)
            x += self.best_len
        if best is None:
            return None
        value, x, extra = best
        counts: Dict[int, int] = {}
        while x > 0:
            a = self.items[self.choice[x]][0]
            counts[a] = counts.get(a, 0) + 1
            x -= a
        if extra:
            counts[self.best_len] = counts.get(self.best_len, 0) + extra
        return value, counts


@dataclass(frozen=True)
class _Combo:
    path: Walk
    cycles: Tuple[Walk, ...]

    @property
    def base(self) -> int:
        return self.path.length + 1 + sum(c.length for c in self.cycles)

    @property
    def fixed_cost(self) -> int:
        return self.path.cost + sum(c.cost for c in self.cycles)

    def items(self) -> Tuple[Tuple[int, int], ...]:
        """Cheapest cycle cost per distinct length"""
        best: Dict[int, int] = {}
        for c in self.cycles:
            if c.length not in best or c.cost < best[c.length]:
                best[c.length] = c.cost
        return tuple(sorted(best.items()))


class LineSolver:
    """Preprocessing for one rule set and pair of end tiles, reused across N"""

    def __init__(self, rules: RuleSet, t0: int, t1: int, config: Optional[Config] = None):
        self.config = config or Config()
        self.rules = rules
        self.t0, self.t1 = t0, t1
        self.graph = TileGraph(rules)
        self.catalog = simple_cycles(self.graph, t0, t1)
        self.combos = self._allowed_combos()
        # dedupe to what the length equation and the cost actually depend on
        self.exists_keys: Dict[Tuple[int, FrozenSet[int]], _Combo] = {}
        self.cost_keys: Dict[Tuple[int, Tuple[Tuple[int, int], ...]], _Combo] = {}
        for combo in self.combos:
            ekey = (combo.base, frozenset(c.length for c in combo.cycles))
            self.exists_keys.setdefault(ekey, combo)
            ckey = (combo.base, combo.items())
            if ckey not in self.cost_keys or combo.fixed_cost < self.cost_keys[ckey].fixed_cost:
                self.cost_keys[ckey] = combo
        self._knapsacks: Dict[Tuple[Tuple[int, int], ...], Knapsack] = {}
        logger.info(f"Line solver: {len(self.catalog.paths)} paths, {len(self.catalog.cycles)} cycles, "
                    f"{len(self.cost_keys)} distinct combinations")

    def _allowed_combos(self) -> List[_Combo]:
        """Every (path, allowed cycle set), grown one shared-node cycle at a time"""
        cycles = self.catalog.cycles
        out = []
        budget = self.config.SEARCH_BUDGET
        for path in self.catalog.paths:
            seen = {frozenset()}
            frontier = [frozenset()]
            while frontier:
                nxt = []
                for chosen in frontier:
                    covered = set(path.nodes)
                    for k in chosen:
                        covered |= cycles[k].node_set
                    for k, c in enumerate(cycles):
                        if k in chosen or not (covered & c.node_set):
                            continue
                        grown = chosen | {k}
                        if grown not in seen:
                            seen.add(grown)
                            nxt.append(grown)
                    if len(seen) > budget:
                        raise ResourceBudgetError("SEARCH_BUDGET", budget, "allowed cycle sets")
                frontier = nxt
            for chosen in sorted(seen, key=lambda s: (len(s), sorted(s))):
                out.append(_Combo(path, tuple(cycles[k] for k in sorted(chosen))))
        return out

    def _knapsack(self, items) -> Knapsack:
        if items not in self._knapsacks:
            self._knapsacks[items] = Knapsack(items)
        return self._knapsacks[items]

    def exists(self, n: int) -> Optional[Tuple[_Combo, int]]:
        for (base, lengths), combo in sorted(self.exists_keys.items(), key=lambda kv: (kv[0][0], sorted(kv[0][1]))):
            rest = n - base
            if rest == 0 or (rest > 0 and lengths and knapsack_reachable(lengths, rest)):
                return combo, rest
        return None

    def min_cost(self, n: int) -> Optional[Tuple[int, _Combo, Dict[int, int]]]:
        best = None
        for (base, items), combo in sorted(self.cost_keys.items()):
            rest = n - base
            if rest < 0:
                continue
            if rest == 0:
                found = (0, {})
            elif not items:
                continue
            else:
                found = self._knapsack(items).solve(rest)
                if found is None:
                    continue
            value = combo.fixed_cost + found[0]
            if best is None or value < best[0]:
                best = (value, combo, found[1])
        return best

    def materialize(self, combo: _Combo, counts: Dict[int, int]) -> List[int]:
        """Explicit tile sequence: each cycle spliced at its first shared node"""
        copies = {c: 1 for c in combo.cycles}
        for length, k in counts.items():
            # extra copies go to the cheapest cycle of that length
            pick = min((c for c in combo.cycles if c.length == length), key=lambda c: (c.cost, c.nodes))
            copies[pick] += k
        walk = list(combo.path.nodes)
        for c in admission_order(combo.path, combo.cycles):
            at = next(i for i, t in enumerate(walk) if t in c.node_set)
            k = c.nodes.index(walk[at])
            loop = list(c.nodes[k:] + c.nodes[:k])
            walk[at:at + 1] = (loop * copies[c]) + [walk[at]]
        return walk

    def solve(self, n: int, mode=SolveMode.EXISTS, witness: bool = True) -> SolveResult:
        mode = _mode(mode)
        if mode == SolveMode.COUNT:
            raise ValueError("line solving has no counting mode")
        cap = self.config.LINE_MATERIALIZE_CAP
        if mode == SolveMode.EXISTS:
            found = self.exists(n)
            if found is None:
                return SolveResult(exists=False, method="line")
            combo, rest = found
            tiles = None
            if witness and n <= cap:
                counts = {}
                if rest:
                    lengths = sorted({c.length for c in combo.cycles})
                    counts = Knapsack([(a, 0) for a in lengths]).solve(rest)[1]
                tiles = self.materialize(combo, counts)
            return SolveResult(exists=True, witness=Tiling(n, 1, tuple(tiles)) if tiles else None, method="line")
        found = self.min_cost(n)
        if found is None:
            return SolveResult(exists=False, min_cost=None, method="line")
        value, combo, counts = found
        tiles = self.materialize(combo, counts) if witness and n <= cap else None
        return SolveResult(exists=True, min_cost=value,
                           witness=Tiling(n, 1, tuple(tiles)) if tiles else None, method="line")


def solve_line(rules: RuleSet, t0: int, t1: int, n: int, mode=SolveMode.EXISTS,
               config: Optional[Config] = None) -> SolveResult:
    return LineSolver(rules, t0, t1, config).solve(n, mode)


def brute_force_line(rules: RuleSet, t0: int, t1: int, n: int, mode=SolveMode.EXISTS) -> SolveResult:
    """Position-by-position dynamic programme, the reference for solve_line"""
    mode = _mode(mode)
    w = np.where(rules.h < FORBID, rules.h.astype(np.float64), INF)
    cost = np.full(rules.m, INF)
    cost[t0] = 0.0
    for _ in range(n - 1):
        cost = np.min(cost[:, None] + w, axis=0)
    value = cost[t1]
    if value == INF:
        return SolveResult(exists=False, min_cost=None, method="oracle")
    return SolveResult(exists=True, min_cost=int(value) if mode == SolveMode.MINCOST else None, method="oracle")


def min_plus_walk(node_cost: np.ndarray, edge_cost: np.ndarray, length: int,
                  start_mask: Optional[np.ndarray] = None,
                  end_mask: Optional[np.ndarray] = None) -> Tuple[Optional[int], Optional[List[int]]]:
    """
    Cheapest walk visiting `length` nodes, paying every node visit and every edge.
    edge_cost uses inf for missing edges.  Returns the lexicographically least
    optimal node sequence.
    """
    node_cost = np.asarray(node_cost, dtype=np.float64)
    edge_cost = np.asarray(edge_cost, dtype=np.float64)
    k = len(node_cost)
    start_mask = np.ones(k, dtype=bool) if start_mask is None else np.asarray(start_mask, dtype=bool)
    end_mask = np.ones(k, dtype=bool) if end_mask is None else np.asarray(end_mask, dtype=bool)
    best = [None] * length
    best[length - 1] = np.where(end_mask, node_cost, INF)
    for i in range(length - 2, -1, -1):
        best[i] = node_cost + np.min(edge_cost + best[i + 1][None, :], axis=1)
    first = np.where(start_mask, best[0], INF)
    value = first.min()
    if value == INF:
        return None, None
    walk = [int(np.flatnonzero(first == value)[0])]
    for i in range(1, length):
        u = walk[-1]
        target = best[i - 1][u] - node_cost[u]
        walk.append(int(np.flatnonzero(edge_cost[u] + best[i] == target)[0]))
    return int(value), walk


def min_closed_walk(rules: RuleSet, length: int) -> Tuple[Optional[int], Optional[List[int]]]:
    """Cheapest cyclic row of `length` tiles (the last tile sits left of the first)"""
    w = np.where(rules.h < FORBID, rules.h.astype(np.float64), INF)
    zero = np.zeros(rules.m)
    best_value, best_walk = None, None
    for s in range(rules.m):
        mask = np.zeros(rules.m, dtype=bool)
        mask[s] = True
        value, walk = min_plus_walk(zero, w, length + 1, mask, mask)
        if value is not None and (best_value is None or value < best_value):
            best_value, best_walk = value, walk[:-1]
    return best_value, best_walk
