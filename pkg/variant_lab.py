"""
Variant rule sets and the constructions that go with them: fixture loading,
the row-pair analysis for reflection-weighted rules, reflection and rotation
extensions, and the decision procedures for rotation-symmetric weights.
"""

import hashlib
import itertools
import json
import logging
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from config import Config
from errors import (DimensionError, FixtureError, ResourceBudgetError, RuleFileError,
                    SymmetryError, TilekitError)
from grid_solver import SolveMode, SolveResult, solve_grid
from line_solver import min_closed_walk, min_plus_walk
from tiling_core import (FORBID, LayerSpec, RuleSet, Symmetry, Tiling,
                         TilingInstance, build_layered_ruleset, instance_from_dict,
                         rules_from_dict, tiling_from_names, validate_tiling)

logger = logging.getLogger(__name__)

FIXTURE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")
MANIFEST = "manifest.json"

FIXTURES = {
    "periodic-unweighted": "periodic_unweighted.json",
    "weighted-open": "weighted_open.json",
    "weighted-periodic": "weighted_periodic.json",
    "reflection-weighted-L1": "reflection_weighted_l1.json",
    "reflection-weighted-L2L3": "reflection_weighted_l2l3.json",
    "periodic-reflection-weighted": "periodic_reflection_weighted.json",
    "fig4": "fig04.json",
    "fig5": "fig05.json",
    "fig9": "fig09.json",
    "fig10": "fig10.json",
    "fig11": "fig11.json",
    "fig12": "fig12.json",
    "fig13": "fig13.json",
    "fig14": "fig14.json",
    "fig15": "fig15.json",
}

FOUR_CORNER_CAP = 6


# ---------------------------------------------------------------- fixtures

@dataclass(frozen=True, eq=False)
class Fixture:
    id: str
    description: str
    layers: Tuple[RuleSet, ...]
    instance: TilingInstance
    tiling: Optional[Tiling] = None
    expected_cost: Optional[int] = None
    extra: Dict = field(default_factory=dict)

    @property
    def rules(self) -> RuleSet:
        return self.instance.rules


@lru_cache(maxsize=1)
def _manifest() -> Dict[str, str]:
    path = os.path.join(FIXTURE_DIR, MANIFEST)
    try:
        with open(path) as f:
            return json.load(f)["files"]
    except (OSError, KeyError, json.JSONDecodeError) as e:
        raise FixtureError(f"cannot read fixture manifest {path}: {e}") from None


def _read_fixture(filename: str) -> Dict:
    path = os.path.join(FIXTURE_DIR, filename)
    with open(path, "rb") as f:
        raw = f.read()
    expected = _manifest().get(filename)
    digest = hashlib.sha256(raw).hexdigest()
    if expected != digest:
        raise FixtureError(f"{filename}: checksum {digest[:12]} does not match the manifest")
    try:
        return json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as e:
        raise RuleFileError(filename, f"line {e.lineno}", e.msg) from None


def _compatibility_filter(doc: Dict, source: str) -> Callable[[Tuple], bool]:
    pairs = doc.get("compatibility")
    if not isinstance(pairs, list):
        raise RuleFileError(source, "compatibility", "expected a list of tile pairs")
    allowed = {tuple(p) for p in pairs}
    return lambda names: tuple(names[:2]) in allowed


def _layered_fixture(fid: str, doc: Dict, source: str) -> Fixture:
    raw_layers = doc.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise RuleFileError(source, "layers", "expected a non-empty list")
    layers = tuple(rules_from_dict(layer, source, f"layers[{k}].") for k, layer in enumerate(raw_layers))
    if len(layers) == 1:
        rules = layers[0]
    else:
        if len(layers) != 2:
            raise RuleFileError(source, "layers", "compatibility lists pair exactly two layers")
        rules = build_layered_ruleset(LayerSpec(layers, _compatibility_filter(doc, source)))
    return Fixture(fid, doc.get("description", ""), layers, instance_from_dict(doc, source, rules))


def _orientation_layers(doc: Dict, source: str, base: RuleSet) -> Fixture:
    """
    Layers 2 and 3 over the symmetry-breaking layer.  Each carries a cyclic
    orientation; next to exactly one marker tile the orientation pair must be
    one of the listed ones.
    """
    forbidden = int(doc.get("forbidden", 30))
    markers = set(doc.get("markers", ()))
    neutral = set(doc.get("neutral", ()))
    try:
        l2, l3 = doc["layer2"], doc["layer3"]
        t2, t3 = tuple(l2["tiles"]), tuple(l3["tiles"])
    except (KeyError, TypeError):
        raise RuleFileError(source, "layer2", "layer2 and layer3 need a tile list") from None
    if len(t2) != len(t3):
        raise RuleFileError(source, "layer3.tiles", "must match layer2 in length")
    to3 = dict(zip(t2, t3))
    canon = {t: doc["markers"][0] for t in markers}

    # layer 2 is constant down columns, layer 3 along rows
    off = np.where(np.eye(len(t2), dtype=bool), 0, forbidden)
    flat = np.zeros_like(off)
    layer2, layer3 = RuleSet(t2, flat, off), RuleSet(t3, off, flat)
    allowed2 = {tuple(x) for x in doc.get("allowed", ())}
    allowed3 = {(a, to3[p], b, to3[q]) for a, p, b, q in allowed2}
    forced2, forced3 = l2.get("forcedOver", {}), l3.get("forcedOver", {})

    def keep(names: Tuple) -> bool:
        a, p, q = names
        return forced2.get(a, p) == p and forced3.get(a, q) == q

    def pair_rule(allowed, x1, p, x2, q) -> int:
        if p == q:
            return forbidden
        m1, m2 = x1 in markers, x2 in markers
        if m1 == m2 or x1 in neutral or x2 in neutral:
            return 0
        return 0 if (canon.get(x1, x1), p, canon.get(x2, x2), q) in allowed else forbidden

    def conditional(a: Tuple, b: Tuple, axis: str) -> int:
        if axis == "h":
            return pair_rule(allowed2, a[0], a[1], b[0], b[1])
        # the upper tile comes first
        return pair_rule(allowed3, b[0], b[2], a[0], a[2])

    rules = build_layered_ruleset(LayerSpec((base, layer2, layer3), keep, conditional))
    instance = instance_from_dict(doc, source, rules)
    return Fixture(doc.get("id", ""), doc.get("description", ""), (base, layer2, layer3), instance)


def _observed_rules(grids: Sequence[Sequence[Sequence[str]]], rotation: bool) -> RuleSet:
    """Symmetric unweighted rules allowing exactly the pairs seen in the grids"""
    tiles: List[str] = []
    h_pairs, v_pairs = set(), set()
    for grid in grids:
        for r, row in enumerate(grid):
            for c, name in enumerate(row):
                if name not in tiles:
                    tiles.append(name)
                if c + 1 < len(row):
                    h_pairs.add((name, row[c + 1]))
                if r > 0:
                    v_pairs.add((name, grid[r - 1][c]))
    if rotation:
        h_pairs = v_pairs = h_pairs | v_pairs
    return RuleSet.from_pairs(tiles, h_pairs, v_pairs).symmetrized()


def _golden(doc: Dict, source: str) -> List[List[str]]:
    layers = doc.get("golden")
    if not isinstance(layers, list) or not layers:
        raise RuleFileError(source, "golden", "expected a list of per-layer grids")
    shape = (len(layers[0]), len(layers[0][0]))
    for k, grid in enumerate(layers):
        if len(grid) != shape[0] or any(len(row) != shape[1] for row in grid):
            raise RuleFileError(source, f"golden[{k}]", f"expected a {shape[0]}x{shape[1]} grid")
    return [["/".join(cell) for cell in zip(*rows)] for rows in zip(*layers)]


def _figure_fixture(fid: str, doc: Dict, source: str) -> Fixture:
    origin = doc.get("rulesFrom")
    golden = doc.get("golden", [])
    if origin in ("observed-reflection", "observed-rotation"):
        rules = _observed_rules(golden, origin == "observed-rotation")
        base = Fixture(origin, "", (rules,), instance_from_dict(doc, source, rules))
    elif origin in FIXTURES:
        base = fixture(origin)
    else:
        raise RuleFileError(source, "rulesFrom", f"unknown rule source {origin!r}")
    layers, instance = base.layers, base.instance
    if "layer" in doc:
        k = doc["layer"]
        if not isinstance(k, int) or not 0 <= k < len(base.layers):
            raise RuleFileError(source, "layer", f"no layer {k!r} in {origin}")
        layers = (base.layers[k],)
        instance = TilingInstance(layers[0], base.instance.bc, base.instance.cost_bound)
    tiling = tiling_from_names(instance.rules, _golden(doc, source))
    extra = {}
    if "expected" in doc:
        extra["expected"] = tiling_from_names(instance.rules, doc["expected"])
    if "side" in doc:
        extra["side"] = tuple(instance.rules.index(name) for name in doc["side"])
    return Fixture(fid, doc.get("description", ""), layers, instance, tiling, doc.get("expectedCost"), extra)


@lru_cache(maxsize=None)
def fixture(fid: str) -> Fixture:
    """Rule sets and golden tilings by id, checked against the manifest"""
    if fid not in FIXTURES:
        raise FixtureError(f"unknown fixture {fid!r}; known: {', '.join(FIXTURES)}")
    filename = FIXTURES[fid]
    doc = _read_fixture(filename)
    if "rulesFrom" in doc:
        out = _figure_fixture(fid, doc, filename)
    elif "baseFrom" in doc:
        base = fixture(doc["baseFrom"]).layers[0]
        out = _orientation_layers(doc, filename, base)
    else:
        out = _layered_fixture(fid, doc, filename)
    logger.debug(f"Loaded fixture {fid}: {out.rules.m} tiles, {len(out.layers)} layer(s)")
    return out


def fixture_ids() -> List[str]:
    return list(FIXTURES)


# ---------------------------------------------------------------- row pairs

ROW_PAIR_ENDS = {
    "wprime": ("free", "oneblocked", "bothblocked"),
    "wdprime": ("free", "onecorner", "corners"),
}


@dataclass(frozen=True, eq=False)
class RowPairProblem:
    """
    Two adjacent rows as one walk over vertical pairs.  Node k is the pair
    (top, bottom) = divmod(k, m) and costs twice its vertical weight; moving
    along the row pays both horizontal weights, the top one twice in wdprime
    mode (the top row of the grid counted twice).
    """

    rules: RuleSet
    mode: str = "wprime"
    ends: str = "free"
    blocked_tile: str = "V"
    corner_tile: str = "C"

    def __post_init__(self):
        if self.mode not in ROW_PAIR_ENDS:
            raise TilekitError(f"unknown row-pair mode {self.mode!r}")
        if self.ends not in ROW_PAIR_ENDS[self.mode]:
            raise TilekitError(f"{self.mode} takes ends {ROW_PAIR_ENDS[self.mode]}, got {self.ends!r}")

    @property
    def factor(self) -> int:
        return 2 if self.mode == "wdprime" else 1

    def _split(self):
        k = np.arange(self.rules.m ** 2)
        return k // self.rules.m, k % self.rules.m

    def node_costs(self) -> np.ndarray:
        top, bottom = self._split()
        v = self.rules.v[bottom, top]
        return np.where(v >= FORBID, np.inf, 2.0 * v)

    def edge_costs(self) -> np.ndarray:
        top, bottom = self._split()
        h = self.rules.h
        ht = h[top[:, None], top[None, :]]
        hb = h[bottom[:, None], bottom[None, :]]
        cost = self.factor * ht.astype(np.float64) + hb
        return np.where((ht >= FORBID) | (hb >= FORBID), np.inf, cost)

    def end_masks(self) -> Tuple[np.ndarray, np.ndarray]:
        top, bottom = self._split()
        everywhere = np.ones(len(top), dtype=bool)
        if self.mode == "wprime":
            blocked = self.rules.index(self.blocked_tile)
            clear = (top != blocked) & (bottom != blocked)
            if self.ends == "oneblocked":
                return everywhere, clear
            if self.ends == "bothblocked":
                return clear, clear
            return everywhere, everywhere
        corner = top == self.rules.index(self.corner_tile)
        if self.ends == "onecorner":
            return corner, everywhere
        if self.ends == "corners":
            return corner, corner
        return everywhere, everywhere

    def pair_cost(self, top: Sequence[int], bottom: Sequence[int]) -> int:
        """w' = w(Rt) + w(Rb) + 2 sum v, w'' counts w(Rt) twice"""
        h, v = self.rules.h, self.rules.v
        top, bottom = np.asarray(top), np.asarray(bottom)
        wt = int(h[top[:-1], top[1:]].sum())
        wb = int(h[bottom[:-1], bottom[1:]].sum())
        return self.factor * wt + wb + 2 * int(v[bottom, top].sum())


def row_pair_minimum(prob: RowPairProblem, n: int):
    """(minimum, top row names, bottom row names) over row pairs of width n"""
    if n < 1:
        raise DimensionError("row width must be at least 1")
    start, end = prob.end_masks()
    value, walk = min_plus_walk(prob.node_costs(), prob.edge_costs(), n, start, end)
    if value is None:
        return None, None, None
    m = prob.rules.m
    top = [prob.rules.name(k // m) for k in walk]
    bottom = [prob.rules.name(k % m) for k in walk]
    logger.debug(f"Row pair {prob.mode}/{prob.ends} at N={n}: {value}")
    return value, top, bottom


def sweep_report(fn: Callable[[int], Optional[int]], ns: Iterable[int]) -> pd.DataFrame:
    ns = list(ns)
    return pd.DataFrame({"N": ns, "value": [fn(n) for n in ns]})


def affine_fit(report: pd.DataFrame) -> Optional[Tuple[Fraction, Fraction]]:
    """Exact (slope, intercept) when every point lies on one line"""
    points = [(int(n), v) for n, v in zip(report["N"], report["value"]) if v is not None and not pd.isna(v)]
    if len(points) < 2:
        return None
    (n0, v0), (n1, v1) = points[0], points[1]
    slope = Fraction(int(v1) - int(v0), n1 - n0)
    intercept = int(v0) - slope * n0
    if any(slope * n + intercept != int(v) for n, v in points):
        return None
    return slope, intercept


# ---------------------------------------------------------------- symmetry constructions

def _require(rules: RuleSet, *allowed: Symmetry):
    sym = rules.symmetry()
    if sym not in allowed:
        raise SymmetryError(f"rules have {sym.value} symmetry; need {' or '.join(s.value for s in allowed)}")


def extend_reflection(instance: TilingInstance, t: Tiling) -> Tiling:
    """N x N to (N+2) x (N+2) by repeating the pair of rows and of columns next to the last"""
    _require(instance.rules, Symmetry.REFLECTION, Symmetry.ROTATION)
    if t.width != t.height:
        raise SymmetryError("extension needs a square tiling")
    n = t.width
    if n < 4:
        raise SymmetryError("extension needs N >= 4")
    if not validate_tiling(instance, t).valid:
        raise SymmetryError("the tiling to extend is not valid")
    rows = list(range(n - 1)) + [n - 3, n - 2, n - 1]
    cols = [0, 1, 2] + list(range(1, n))
    return Tiling.from_array(t.as_array()[np.ix_(rows, cols)])


def corner_to_three(rules: RuleSet, corner: Tiling) -> Tiling:
    """
    A 2 x 2 block whose upper-right cell is the corner tile becomes a 3 x 3
    block with the corner tile in all four corners.
    """
    _require(rules, Symmetry.REFLECTION, Symmetry.ROTATION)
    if (corner.height, corner.width) != (2, 2):
        raise DimensionError("the corner block must be 2x2")
    return Tiling.from_array(corner.as_array()[np.ix_([0, 1, 0], [1, 0, 1])])


def rotation_fill(rules: RuleSet, side: Sequence[int]) -> Tiling:
    """The side along every edge, constant anti-diagonals inside"""
    _require(rules, Symmetry.ROTATION)
    side = [int(s) for s in side]
    n = len(side)
    if n == 0:
        raise DimensionError("empty side")
    if n == 1:
        return Tiling(1, 1, (side[0],))
    if side[0] != side[-1]:
        raise SymmetryError("the side must start and end with the corner tile")
    ok = rules.h_allowed()
    for a, b in zip(side, side[1:]):
        if not ok[a, b]:
            raise SymmetryError(f"side pair ({rules.name(a)}, {rules.name(b)}) is not allowed")
    i, j = np.indices((n, n))
    return Tiling.from_array(np.asarray(side)[(i + j) % (n - 1)])


def rotation_thresholds(rules: RuleSet, tile: int) -> Tuple[float, float]:
    """
    (N_e, N_o): the least even and odd side lengths with a valid side through
    `tile` at both ends.  An odd side is a closed walk of even length, so one
    neighbour suffices; an even side needs the shortest odd closed walk.
    """
    _require(rules, Symmetry.ROTATION)
    ok = rules.h_allowed()
    n_o = 1 if ok[tile].any() else math.inf
    cover = nx.Graph()
    for a, b in zip(*np.nonzero(ok)):
        cover.add_edge((int(a), 0), (int(b), 1))
        cover.add_edge((int(a), 1), (int(b), 0))
    try:
        n_e = nx.shortest_path_length(cover, (tile, 0), (tile, 1)) + 1
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        n_e = math.inf
    return n_e, n_o


def even_periodic_reflection_minimum(rules: RuleSet, n: int, config: Optional[Config] = None) -> SolveResult:
    """
    Even N on the torus: every tiling's 2 x 2 windows sum to twice its cost, so
    the minimum is N^2 w / 2 for the cheapest square w, reached by repeating it.
    """
    config = config or Config()
    _require(rules, Symmetry.REFLECTION, Symmetry.ROTATION)
    if n < 2 or n % 2:
        raise DimensionError("the square construction needs an even N")
    m = rules.m
    if m ** 4 > config.ENUM_CAP:
        raise ResourceBudgetError("ENUM_CAP", config.ENUM_CAP, f"{m}^4 squares")
    h, vt = rules.h, rules.v.T
    # square [[a, b], [c, d]]; v[c, a] is vt[a, c]
    parts = (h[:, :, None, None], h[None, None, :, :], vt[:, None, :, None], vt[None, :, None, :])
    total = sum(parts)
    bad = np.zeros(total.shape, dtype=bool)
    for p in parts:
        bad = bad | (p >= FORBID)
    if bad.all():
        return SolveResult(exists=False, method="two-by-two")
    w = int(np.where(bad, np.iinfo(np.int64).max, total).min())
    flat = np.flatnonzero(~bad.ravel() & (total.ravel() == w))[0]
    a, b, c, d = np.unravel_index(flat, total.shape)
    square = np.array([[a, b], [c, d]], dtype=np.int64)
    i, j = np.indices((n, n))
    witness = Tiling.from_array(square[i % 2, j % 2])
    return SolveResult(exists=True, min_cost=n * n // 2 * w, witness=witness, method="two-by-two")


# ---------------------------------------------------------------- weighted rotation

def _exact(instance: TilingInstance, n: int, config: Config) -> SolveResult:
    res = solve_grid(instance, n, SolveMode.MINCOST, config)
    ok = res.min_cost is not None and res.min_cost <= instance.bound(n)
    return SolveResult(exists=ok, min_cost=res.min_cost, witness=res.witness, method=res.method)


def _checkerboard(n: int, a: int, b: int) -> np.ndarray:
    i, j = np.indices((n, n))
    return np.where((i + j) % 2 == 0, a, b)


def _min_pair(rules: RuleSet) -> Optional[Tuple[int, int, int]]:
    h = rules.h
    if not (h < FORBID).any():
        return None
    w = int(h.min())
    a, b = np.unravel_index(np.flatnonzero(h == w)[0], h.shape)
    return w, int(a), int(b)


class _ZeroWalks:
    """Which tiles reach which by a zero-cost walk of exactly d steps"""

    def __init__(self, zero: np.ndarray):
        self.adj = zero.astype(np.int64)
        self.cache: Dict[int, np.ndarray] = {0: np.eye(len(zero), dtype=bool)}

    def reach(self, d: int) -> np.ndarray:
        if d not in self.cache:
            out = np.eye(len(self.adj), dtype=np.int64)
            base = self.adj
            k = d
            while k:
                if k & 1:
                    out = ((out @ base) > 0).astype(np.int64)
                base = ((base @ base) > 0).astype(np.int64)
                k >>= 1
            self.cache[d] = out > 0
        return self.cache[d]


def _zero_components(zero: np.ndarray) -> Dict[int, int]:
    g = nx.Graph()
    g.add_nodes_from(range(len(zero)))
    g.add_edges_from((int(a), int(b)) for a, b in zip(*np.nonzero(zero)))
    label = {}
    for k, comp in enumerate(nx.connected_components(g)):
        if g.subgraph(comp).number_of_edges() > 0:
            for t in comp:
                label[t] = k
    return label


def _corner_squares(rules: RuleSet, corner: int, k: int, c: int, component: Dict[int, int],
                    config: Config) -> Dict[Tuple[int, int], int]:
    """
    Valid upper-left k-squares: the grid corner holds `corner`, the inner row
    and column use only zero-cost pairs, the total stays within c.  Keyed by
    (zero-cost component, inner-corner tile), valued by the cheapest cost.
    """
    h, v, m = rules.h, rules.v, rules.m
    grid = np.zeros((k, k), dtype=np.int64)
    best: Dict[Tuple[int, int], int] = {}
    nodes = [0]
    cells = [(r, cc) for r in range(k) for cc in range(k)]

    def place(pos: int, cost: int):
        nodes[0] += 1
        if nodes[0] > config.SEARCH_BUDGET:
            raise ResourceBudgetError("SEARCH_BUDGET", config.SEARCH_BUDGET, f"{k}-squares")
        if pos == len(cells):
            inner = int(grid[k - 1, k - 1])
            if inner in component:
                key = (component[inner], inner)
                best[key] = min(best.get(key, cost), cost)
            return
        r, col = cells[pos]
        choices = [corner] if pos == 0 else range(m)
        for t in choices:
            add = 0
            if col > 0:
                w = h[grid[r, col - 1], t]
                if w >= FORBID or (r == k - 1 and w != 0):
                    continue
                add += w
            if r > 0:
                w = v[t, grid[r - 1, col]]
                if w >= FORBID or (col == k - 1 and w != 0):
                    continue
                add += w
            if cost + add > c:
                continue
            grid[r, col] = t
            place(pos + 1, cost + int(add))

    place(0, 0)
    return best


def _four_corner_squares(instance: TilingInstance, n: int, c: int, config: Config) -> SolveResult:
    rules = instance.rules
    zero = rules.h == 0
    component = _zero_components(zero)
    walks = _ZeroWalks(zero)
    k_max = max(2 * c, 2)
    ks = list(range(max(c, 2), k_max + 1))
    squares = {k: _corner_squares(rules, instance.bc.tile, k, c, component, config) for k in ks}
    options: Dict[int, List[Tuple[int, int, int]]] = {}
    for k, table in squares.items():
        for (alpha, inner), cost in table.items():
            options.setdefault(alpha, []).append((k, inner, cost))

    def spot(which: str, k: int) -> Tuple[int, int]:
        lo, hi = k - 1, n - k
        return {"ul": (lo, lo), "ur": (lo, hi), "ll": (hi, lo), "lr": (hi, hi)}[which]

    def linked(p, q) -> bool:
        (r1, c1), t1 = p
        (r2, c2), t2 = q
        return bool(walks.reach(abs(r1 - r2) + abs(c1 - c2))[t1, t2])

    best = None
    for alpha, opts in options.items():
        for combo in itertools.product(opts, repeat=4):
            total = sum(o[2] for o in combo)
            if total > c or (best is not None and total >= best):
                continue
            placed = [(spot(w, o[0]), o[1]) for w, o in zip(("ul", "ur", "ll", "lr"), combo)]
            if all(linked(placed[i], placed[j]) for i, j in itertools.combinations(range(4), 2)):
                best = total
    logger.info(f"Corner squares at N={n}, k in {ks[0]}..{ks[-1]}: best {best}")
    return SolveResult(exists=best is not None, min_cost=best, method="corner-squares")


def weighted_rotation_decide(instance: TilingInstance, n: int, config: Optional[Config] = None) -> SolveResult:
    """
    Rotation-symmetric weights.  Open: a checkerboard of the cheapest pair.
    Periodic: the cheapest cyclic row repeated along anti-diagonals.  Four
    corners: the corner-square procedure for constant bounds once N is large
    enough, exact search otherwise.  One or two corners go to the exact solver.
    """
    config = config or Config()
    rules = instance.rules
    _require(rules, Symmetry.ROTATION)
    if n < 1:
        raise DimensionError("N must be at least 1")
    bc = instance.bc
    bound = instance.bound(n)
    if n == 1:
        tile = bc.tile if bc.tile is not None else 0
        if bc.is_periodic:
            tile = int(np.argmin(np.diag(rules.h)))
        periodic_cost = 2 * int(rules.h[tile, tile]) if bc.is_periodic else 0
        if periodic_cost >= 2 * FORBID:
            return SolveResult(exists=False, method="trivial")
        return SolveResult(exists=periodic_cost <= bound, min_cost=periodic_cost,
                           witness=Tiling(1, 1, (tile,)), method="trivial")

    if bc.kind == "open":
        pair = _min_pair(rules)
        if pair is None:
            return SolveResult(exists=False, method="checkerboard")
        w, a, b = pair
        cost = 2 * n * (n - 1) * w
        return SolveResult(exists=cost <= bound, min_cost=cost,
                           witness=Tiling.from_array(_checkerboard(n, a, b)), method="checkerboard")

    if bc.is_periodic:
        value, walk = min_closed_walk(rules, n)
        if value is None:
            return SolveResult(exists=False, method="closed-walk")
        i, j = np.indices((n, n))
        witness = Tiling.from_array(np.asarray(walk)[(i + j) % n])
        cost = 2 * n * value
        return SolveResult(exists=cost <= bound, min_cost=cost, witness=witness, method="closed-walk")

    if bc.kind != "four_corners":
        return _exact(instance, n, config)

    if any(instance.cost_bound[1:]):
        raise TilekitError("the four-corner procedure needs a constant cost bound")
    c = instance.cost_bound[0]
    if c > FOUR_CORNER_CAP or rules.m > FOUR_CORNER_CAP:
        raise ResourceBudgetError("FOUR_CORNER_CAP", FOUR_CORNER_CAP, f"c={c}, m={rules.m}")
    pair = _min_pair(rules)
    if pair is None:
        return SolveResult(exists=False, method="corner-squares")
    w, a, b = pair
    if w < 0:
        board = _checkerboard(n, a, b)
        for (r, col), tile in bc.pinned_cells(n, n).items():
            board[r, col] = tile
        witness = Tiling.from_array(board)
        report = validate_tiling(instance, witness)
        if report.valid and report.total_cost <= c:
            return SolveResult(exists=True, witness=witness, method="checkerboard")
        return _exact(instance, n, config)
    if w > 0:
        if 2 * n * (n - 1) * w > c:
            return SolveResult(exists=False, method="lower-bound")
        return _exact(instance, n, config)
    k_max = max(2 * c, 2)
    if n < 2 * k_max + 2:
        return _exact(instance, n, config)
    return _four_corner_squares(instance, n, c, config)
