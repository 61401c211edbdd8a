"""
Tiles, weighted adjacency rules, boundary conditions, layered products and
tiling validation.

Weights are integers.  Any weight >= FORBID is the hard-constraint sentinel:
a tiling using such a pair is invalid whatever the cost bound says.
Vertical weights are indexed v[below][above]; rows are numbered from the top.
"""

import itertools
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from errors import DimensionError, RuleFileError, TilekitError, UnknownTileError

logger = logging.getLogger(__name__)

FORBID = 10 ** 6

CORNERS = ("ul", "ur", "ll", "lr")


class Symmetry(Enum):
    NONE = "none"
    REFLECTION = "reflection"
    ROTATION = "rotation"


def _as_weights(matrix, m: int, name: str) -> np.ndarray:
    arr = np.asarray(matrix, dtype=np.int64)
    if arr.shape != (m, m):
        raise DimensionError(f"{name} weights must be {m}x{m}, got {arr.shape}")
    # every sentinel is stored as exactly FORBID
    return np.minimum(arr, FORBID)


@dataclass(frozen=True, eq=False)
class RuleSet:
    """Tiles plus horizontal h[left][right] and vertical v[below][above] weights"""

    tiles: Tuple
    h: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        tiles = tuple(self.tiles)
        if not tiles:
            raise DimensionError("a rule set needs at least one tile")
        if len(set(tiles)) != len(tiles):
            raise UnknownTileError("duplicate tile identifiers")
        m = len(tiles)
        h = _as_weights(self.h, m, "horizontal")
        v = _as_weights(self.v, m, "vertical")
        h.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "tiles", tiles)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "v", v)

    @property
    def m(self) -> int:
        return len(self.tiles)

    def index(self, tile) -> int:
        try:
            return self.tiles.index(tile)
        except ValueError:
            raise UnknownTileError(f"unknown tile {tile!r}") from None

    def name(self, i: int) -> str:
        t = self.tiles[i]
        if isinstance(t, tuple):
            return "/".join(str(x) for x in t)
        return str(t)

    @property
    def is_unweighted(self) -> bool:
        return bool(np.all((self.h == 0) | (self.h >= FORBID)) and
                    np.all((self.v == 0) | (self.v >= FORBID)))

    def symmetry(self) -> Symmetry:
        if not (np.array_equal(self.h, self.h.T) and np.array_equal(self.v, self.v.T)):
            return Symmetry.NONE
        if np.array_equal(self.h, self.v):
            return Symmetry.ROTATION
        return Symmetry.REFLECTION

    def h_allowed(self) -> np.ndarray:
        return self.h < FORBID

    def v_allowed(self) -> np.ndarray:
        return self.v < FORBID

    def shifted(self, r: int) -> "RuleSet":
        """Subtract r from every non-sentinel weight"""
        h = np.where(self.h >= FORBID, FORBID, self.h - r)
        v = np.where(self.v >= FORBID, FORBID, self.v - r)
        return RuleSet(self.tiles, h, v)

    def symmetrized(self) -> "RuleSet":
        """Allow every pair whose transpose is allowed (unweighted rules only)"""
        h = np.where(self.h_allowed() | self.h_allowed().T, 0, FORBID)
        v = np.where(self.v_allowed() | self.v_allowed().T, 0, FORBID)
        return RuleSet(self.tiles, h, v)

    @classmethod
    def from_pairs(cls, tiles: Sequence, h_pairs: Iterable, v_pairs: Iterable) -> "RuleSet":
        """Unweighted rules from allowed (left, right) and (below, above) pairs"""
        tiles = tuple(tiles)
        pos = {t: i for i, t in enumerate(tiles)}
        m = len(tiles)
        h = np.full((m, m), FORBID, dtype=np.int64)
        v = np.full((m, m), FORBID, dtype=np.int64)
        for target, pairs in ((h, h_pairs), (v, v_pairs)):
            for a, b in pairs:
                if a not in pos or b not in pos:
                    raise UnknownTileError(f"pair ({a!r}, {b!r}) references an unknown tile")
                target[pos[a], pos[b]] = 0
        return cls(tiles, h, v)

    def to_dict(self) -> Dict:
        def cell(w):
            return "F" if w >= FORBID else int(w)
        return {
            "tiles": [self.name(i) for i in range(self.m)],
            "horizontal": [[cell(w) for w in row] for row in self.h],
            "vertical": [[cell(w) for w in row] for row in self.v],
        }


def evaluate_bound(coeffs: Sequence[int], n: int) -> int:
    """p(n) for integer coefficients c0 + c1 n + c2 n^2 + ..., exact"""
    total = 0
    for c in reversed(list(coeffs)):
        total = total * n + int(c)
    return total


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str
    tile: Optional[int] = None
    corners: Tuple[str, ...] = ()

    KINDS = ("four_corners", "one_corner", "two_corners", "open", "periodic")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise TilekitError(f"unknown boundary condition {self.kind!r}")
        if self.kind in ("open", "periodic"):
            return
        if self.tile is None:
            raise UnknownTileError(f"{self.kind} needs a corner tile")
        expected = {"four_corners": 4, "one_corner": 1, "two_corners": 2}[self.kind]
        corners = tuple(self.corners) if self.corners else (CORNERS if expected == 4 else ())
        if len(corners) != expected or any(c not in CORNERS for c in corners):
            raise TilekitError(f"{self.kind} needs {expected} corner(s) from {CORNERS}, got {self.corners}")
        object.__setattr__(self, "corners", corners)

    @classmethod
    def four_corners(cls, tile: int) -> "BoundaryCondition":
        return cls("four_corners", tile, CORNERS)

    @classmethod
    def one_corner(cls, tile: int, corner: str = "ul") -> "BoundaryCondition":
        return cls("one_corner", tile, (corner,))

    @classmethod
    def two_corners(cls, tile: int, corners: Tuple[str, str] = ("ul", "lr")) -> "BoundaryCondition":
        return cls("two_corners", tile, tuple(corners))

    @classmethod
    def open(cls) -> "BoundaryCondition":
        return cls("open")

    @classmethod
    def periodic(cls) -> "BoundaryCondition":
        return cls("periodic")

    @property
    def is_periodic(self) -> bool:
        return self.kind == "periodic"

    def pinned_cells(self, height: int, width: int) -> Dict[Tuple[int, int], int]:
        if self.tile is None:
            return {}
        where = {"ul": (0, 0), "ur": (0, width - 1), "ll": (height - 1, 0), "lr": (height - 1, width - 1)}
        return {where[c]: self.tile for c in self.corners}

    def check(self, rules: RuleSet):
        if self.tile is not None and not (0 <= self.tile < rules.m):
            raise UnknownTileError(f"boundary tile index {self.tile} outside 0..{rules.m - 1}")

    def to_dict(self, rules: RuleSet) -> Dict:
        out = {"kind": self.kind}
        if self.tile is not None:
            out["tile"] = rules.name(self.tile)
            out["corners"] = list(self.corners)
        return out


@dataclass(frozen=True, eq=False)
class TilingInstance:
    rules: RuleSet
    bc: BoundaryCondition
    cost_bound: Tuple[int, ...] = (0,)

    def __post_init__(self):
        self.bc.check(self.rules)
        object.__setattr__(self, "cost_bound", tuple(int(c) for c in self.cost_bound) or (0,))
        if self.rules.is_unweighted and any(self.cost_bound):
            raise TilekitError("unweighted instances take the zero cost bound")

    def bound(self, n: int) -> int:
        return evaluate_bound(self.cost_bound, n)


@dataclass(frozen=True)
class Tiling:
    width: int
    height: int
    cells: Tuple[int, ...]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DimensionError("tiling dimensions must be positive")
        cells = tuple(int(c) for c in self.cells)
        if len(cells) != self.width * self.height:
            raise DimensionError(f"{len(cells)} cells for a {self.height}x{self.width} tiling")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "Tiling":
        rows = [list(r) for r in rows]
        if not rows or any(len(r) != len(rows[0]) for r in rows):
            raise DimensionError("rows must be non-empty and of equal length")
        return cls(len(rows[0]), len(rows), tuple(c for r in rows for c in r))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Tiling":
        arr = np.asarray(arr)
        return cls(arr.shape[1], arr.shape[0], tuple(int(c) for c in arr.ravel()))

    def cell(self, r: int, c: int) -> int:
        return self.cells[r * self.width + c]

    def rows(self) -> List[List[int]]:
        return [list(self.cells[r * self.width:(r + 1) * self.width]) for r in range(self.height)]

    def as_array(self) -> np.ndarray:
        return np.array(self.cells, dtype=np.int64).reshape(self.height, self.width)

    def mirrored(self) -> "Tiling":
        return Tiling.from_array(self.as_array()[:, ::-1])

    def flipped(self) -> "Tiling":
        return Tiling.from_array(self.as_array()[::-1, :])

    def rotated(self) -> "Tiling":
        """Quarter turn clockwise"""
        return Tiling.from_array(np.rot90(self.as_array(), k=-1))

    def rolled(self, dr: int, dc: int) -> "Tiling":
        return Tiling.from_array(np.roll(self.as_array(), (dr, dc), axis=(0, 1)))


@dataclass
class ValidationReport:
    total_cost: int
    violations: List[Tuple[Tuple[int, int], Tuple[int, int], int]] = field(default_factory=list)
    boundary_mismatches: List[Tuple[Tuple[int, int], int, int]] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations and not self.boundary_mismatches


def _pair_arrays(arr: np.ndarray, periodic: bool):
    """Index arrays of every adjacent pair: (first, second, first_site, second_site, axis)"""
    height, width = arr.shape
    rr, cc = np.indices(arr.shape)
    out = []
    # horizontal: (r, c) left of (r, c+1)
    if width > 1 or periodic:
        right = (cc + 1) % width
        keep = np.ones_like(arr, dtype=bool) if periodic else cc < width - 1
        out.append(("h", rr[keep], cc[keep], rr[keep], right[keep]))
    # vertical: (r+1, c) below (r, c)
    if height > 1 or periodic:
        below = (rr + 1) % height
        keep = np.ones_like(arr, dtype=bool) if periodic else rr < height - 1
        out.append(("v", below[keep], cc[keep], rr[keep], cc[keep]))
    return out


def validate_tiling(instance: TilingInstance, t: Tiling, n: Optional[int] = None) -> ValidationReport:
    """
    Total cost over all adjacent pairs, sentinel violations and corner mismatches.
    With n given the tiling must be n x n.
    """
    if n is not None and (t.height, t.width) != (n, n):
        raise DimensionError(f"tiling is {t.height}x{t.width}, expected {n}x{n}")
    rules = instance.rules
    arr = t.as_array()
    if arr.size and (arr.min() < 0 or arr.max() >= rules.m):
        bad = int(arr.max() if arr.max() >= rules.m else arr.min())
        raise UnknownTileError(f"tile index {bad} outside 0..{rules.m - 1}")
    periodic = instance.bc.is_periodic
    total = 0
    violations = []
    for axis, r1, c1, r2, c2 in _pair_arrays(arr, periodic):
        weights = rules.h if axis == "h" else rules.v
        w = weights[arr[r1, c1], arr[r2, c2]]
        total += int(w.sum())
        for k in np.flatnonzero(w >= FORBID):
            violations.append(((int(r1[k]), int(c1[k])), (int(r2[k]), int(c2[k])), int(w[k])))
    mismatches = []
    for (r, c), tile in sorted(instance.bc.pinned_cells(t.height, t.width).items()):
        if arr[r, c] != tile:
            mismatches.append(((r, c), tile, int(arr[r, c])))
    return ValidationReport(total, violations, mismatches)


@dataclass(frozen=True)
class LayerSpec:
    """
    Layers combined site by site.  cross_filter(tuple) says whether a tuple of
    per-layer tile identifiers may share a site; conditional(a, b, axis) adds a
    weight to the pair of tuples (axis 'h': a left of b, 'v': a below b).
    """

    layers: Tuple[RuleSet, ...]
    cross_filter: Optional[Callable[[Tuple], bool]] = None
    conditional: Optional[Callable[[Tuple, Tuple, str], int]] = None


def build_layered_ruleset(spec: LayerSpec) -> RuleSet:
    if not spec.layers:
        raise DimensionError("a layered rule set needs at least one layer")
    combos = []
    for combo in itertools.product(*(range(layer.m) for layer in spec.layers)):
        names = tuple(layer.tiles[i] for layer, i in zip(spec.layers, combo))
        if spec.cross_filter is None or spec.cross_filter(names):
            combos.append((combo, names))
    if not combos:
        raise DimensionError("every tuple was excluded by the cross-layer filter")
    idx = np.array([c for c, _ in combos], dtype=np.int64)
    tiles = tuple(n for _, n in combos)
    h = np.zeros((len(tiles), len(tiles)), dtype=np.int64)
    v = np.zeros_like(h)
    # a pair forbidden in any layer stays forbidden whatever the other layers add
    h_bad = np.zeros(h.shape, dtype=bool)
    v_bad = np.zeros(v.shape, dtype=bool)
    for k, layer in enumerate(spec.layers):
        lh = layer.h[np.ix_(idx[:, k], idx[:, k])]
        lv = layer.v[np.ix_(idx[:, k], idx[:, k])]
        h += lh
        v += lv
        h_bad |= lh >= FORBID
        v_bad |= lv >= FORBID
    if spec.conditional is not None:
        for i, a in enumerate(tiles):
            for j, b in enumerate(tiles):
                ch = int(spec.conditional(a, b, "h"))
                cv = int(spec.conditional(a, b, "v"))
                h[i, j] += ch
                v[i, j] += cv
                h_bad[i, j] |= ch >= FORBID
                v_bad[i, j] |= cv >= FORBID
    h = np.where(h_bad, FORBID, np.minimum(h, FORBID))
    v = np.where(v_bad, FORBID, np.minimum(v, FORBID))
    logger.debug(f"Layered rule set: {len(tiles)} product tiles from {len(spec.layers)} layers")
    return RuleSet(tiles, h, v)


# ---------------------------------------------------------------- files

def _parse_weights(source, field_name, raw, m):
    if not isinstance(raw, list) or len(raw) != m:
        raise RuleFileError(source, field_name, f"expected {m} rows")
    out = np.zeros((m, m), dtype=np.int64)
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != m:
            raise RuleFileError(source, f"{field_name}[{i}]", f"expected {m} entries")
        for j, w in enumerate(row):
            if w == "F":
                out[i, j] = FORBID
            elif isinstance(w, int) and not isinstance(w, bool):
                out[i, j] = w
            else:
                raise RuleFileError(source, f"{field_name}[{i}][{j}]", f"weight must be an integer or \"F\", got {w!r}")
    return out


def rules_from_dict(doc: Dict, source: str = "<rules>", prefix: str = "") -> RuleSet:
    if not isinstance(doc, dict):
        raise RuleFileError(source, prefix or "<root>", "expected a JSON object")
    tiles = doc.get("tiles")
    if not isinstance(tiles, list) or not tiles:
        raise RuleFileError(source, f"{prefix}tiles", "expected a non-empty list")
    if len(set(tiles)) != len(tiles):
        raise RuleFileError(source, f"{prefix}tiles", "duplicate tile names")
    m = len(tiles)
    h = _parse_weights(source, f"{prefix}horizontal", doc.get("horizontal"), m)
    v = _parse_weights(source, f"{prefix}vertical", doc.get("vertical"), m)
    return RuleSet(tuple(tiles), h, v)


def instance_from_dict(doc: Dict, source: str = "<rules>", rules: Optional[RuleSet] = None) -> TilingInstance:
    """Boundary and cost bound from doc; tiles and weights too unless rules is given"""
    if rules is None:
        rules = rules_from_dict(doc, source)
    tiles = [rules.name(i) for i in range(rules.m)]
    bdoc = doc.get("boundary", {"kind": "open"})
    if not isinstance(bdoc, dict) or "kind" not in bdoc:
        raise RuleFileError(source, "boundary", "expected an object with a 'kind'")
    kind = bdoc["kind"]
    if kind not in BoundaryCondition.KINDS:
        raise RuleFileError(source, "boundary.kind", f"unknown kind {kind!r}")
    tile = None
    if kind not in ("open", "periodic"):
        if bdoc.get("tile") not in tiles:
            raise RuleFileError(source, "boundary.tile", f"unknown tile {bdoc.get('tile')!r}")
        tile = tiles.index(bdoc["tile"])
    corners = tuple(bdoc.get("corners", ()))
    try:
        bc = BoundaryCondition(kind, tile, corners)
    except TilekitError as e:
        raise RuleFileError(source, "boundary.corners", str(e)) from None
    bound = doc.get("costBound", [0])
    if not isinstance(bound, list) or not all(isinstance(c, int) and not isinstance(c, bool) for c in bound):
        raise RuleFileError(source, "costBound", "expected a list of integers")
    try:
        return TilingInstance(rules, bc, tuple(bound))
    except TilekitError as e:
        raise RuleFileError(source, "costBound", str(e)) from None


def load_instance(path) -> TilingInstance:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise RuleFileError(str(path), f"line {e.lineno}", e.msg) from None
    return instance_from_dict(doc, str(path))


def instance_to_dict(instance: TilingInstance) -> Dict:
    doc = instance.rules.to_dict()
    doc["boundary"] = instance.bc.to_dict(instance.rules)
    doc["costBound"] = list(instance.cost_bound)
    return doc


def dump_instance(instance: TilingInstance, path):
    with open(path, "w") as f:
        json.dump(instance_to_dict(instance), f, indent=1)


def tiling_from_names(rules: RuleSet, rows: Sequence[Sequence]) -> Tiling:
    lookup = {rules.name(i): i for i in range(rules.m)}
    out = []
    for r, row in enumerate(rows):
        line = []
        for c, name in enumerate(row):
            if name not in lookup:
                raise UnknownTileError(f"unknown tile {name!r} at row {r}, column {c}")
            line.append(lookup[name])
        out.append(line)
    return Tiling.from_rows(out)


def tiling_to_dict(rules: RuleSet, t: Tiling) -> Dict:
    return {"rows": [[rules.name(i) for i in row] for row in t.rows()]}


def tiling_from_dict(rules: RuleSet, doc: Dict, source: str = "<tiling>") -> Tiling:
    rows = doc.get("rows") if isinstance(doc, dict) else None
    if not isinstance(rows, list) or not rows:
        raise RuleFileError(source, "rows", "expected a non-empty list of rows")
    return tiling_from_names(rules, rows)


def render_tiling(t: Tiling, names: Sequence[str]) -> str:
    """ASCII grid, fixed-width columns"""
    labels = [[str(names[i]) for i in row] for row in t.rows()]
    width = max(len(s) for row in labels for s in row)
    return "\n".join(" ".join(s.ljust(width) for s in row).rstrip() for row in labels)
