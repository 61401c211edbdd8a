"""
Exact N x N solvers: existence, counting and minimum cost under every
boundary condition, plus the exhaustive oracle they are tested against.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from config import Config
from errors import DimensionError, ResourceBudgetError
from tiling_core import FORBID, Tiling, TilingInstance, validate_tiling

logger = logging.getLogger(__name__)

INF = float("inf")


class SolveMode(Enum):
    EXISTS = "exists"
    COUNT = "count"
    MINCOST = "mincost"


@dataclass
class SolveResult:
    exists: bool
    count: Optional[int] = None
    min_cost: Optional[int] = None  # None means infeasible
    witness: Optional[Tiling] = None
    method: str = ""

    def to_dict(self, names=None) -> Dict:
        out = {"exists": self.exists, "count": self.count, "minCost": self.min_cost, "method": self.method}
        if self.count is not None:
            out["count"] = str(self.count) if self.count > 2 ** 53 else self.count
        if self.witness is not None:
            rows = self.witness.rows()
            out["witness"] = [[names[i] for i in row] for row in rows] if names else rows
        return out


def _mode(mode) -> SolveMode:
    return mode if isinstance(mode, SolveMode) else SolveMode(str(mode).lower())


# ---------------------------------------------------------------- row transfer

class RowTransfer:
    """Horizontally valid rows in lexicographic order and their vertical transfer matrix"""

    def __init__(self, instance: TilingInstance, n: int, config: Config):
        self.instance = instance
        self.n = n
        self.config = config
        self.rules = instance.rules
        self.periodic = instance.bc.is_periodic
        self.rows = self._enumerate_rows()

    def _enumerate_rows(self) -> Optional[np.ndarray]:
        allowed = self.rules.h_allowed()
        rows = np.arange(self.rules.m, dtype=np.int64)[:, None]
        for _ in range(1, self.n):
            pairs = np.argwhere(allowed[rows[:, -1]])
            if len(pairs) > self.config.ROW_BUDGET:
                return None
            rows = np.hstack([rows[pairs[:, 0]], pairs[:, 1:2]])
        if self.periodic:
            rows = rows[allowed[rows[:, -1], rows[:, 0]]]
        return rows

    @property
    def fits(self) -> bool:
        if self.rows is None:
            return False
        r = len(self.rows)
        return r <= self.config.ROW_BUDGET and r * r <= self.config.MEM_BUDGET

    def build(self):
        rows = self.rows
        h, v = self.rules.h, self.rules.v
        n = self.n
        self.row_cost = h[rows[:, :-1], rows[:, 1:]].sum(axis=1) if n > 1 else np.zeros(len(rows), dtype=np.int64)
        if self.periodic:
            self.row_cost = self.row_cost + h[rows[:, -1], rows[:, 0]]
        r = len(rows)
        cost = np.zeros((r, r), dtype=np.int64)
        ok = np.ones((r, r), dtype=bool)
        for c in range(n):
            # block[l, u] = v[lower_c][upper_c]
            block = v[np.ix_(rows[:, c], rows[:, c])]
            cost += block.T
            ok &= block.T < FORBID
        self.trans_cost = cost
        self.trans_ok = ok
        pins = self.instance.bc.pinned_cells(n, n)
        self.top_ok = np.ones(r, dtype=bool)
        self.bottom_ok = np.ones(r, dtype=bool)
        for (pr, pc), tile in pins.items():
            if pr == 0:
                self.top_ok &= rows[:, pc] == tile
            if pr == n - 1:
                self.bottom_ok &= rows[:, pc] == tile
        self.trans = np.where(ok, cost.astype(np.float64), INF)
        logger.debug(f"Row transfer: {r} rows, width {n}")

    def _tiling(self, path: List[int]) -> Tiling:
        return Tiling.from_rows([self.rows[i] for i in path])

    # minimum cost ------------------------------------------------------

    def _backward(self, start_weights: Optional[np.ndarray], closing: Optional[int]):
        """best[k][u]: cheapest completion of rows k.. given row u at depth k"""
        n = self.n
        rc = self.row_cost.astype(np.float64)
        last = np.where(self.bottom_ok, rc, INF)
        if closing is not None:
            last = last + self.trans[:, closing]
        best = [None] * n
        best[n - 1] = last
        for k in range(n - 2, -1, -1):
            best[k] = rc + np.min(self.trans + best[k + 1][None, :], axis=1)
        return best

    def _greedy(self, best, first: int) -> List[int]:
        path = [first]
        for k in range(1, self.n):
            u = path[-1]
            target = best[k - 1][u] - self.row_cost[u]
            options = self.trans[u] + best[k]
            path.append(int(np.flatnonzero(options == target)[0]))
        return path

    def min_cost(self) -> Tuple[Optional[int], Optional[Tiling]]:
        if not self.periodic:
            best = self._backward(None, None)
            start = np.where(self.top_ok, best[0], INF)
            value = start.min() if len(start) else INF
            if value == INF:
                return None, None
            first = int(np.flatnonzero(start == value)[0])
            return int(value), self._tiling(self._greedy(best, first))
        best_value, best_path = INF, None
        for s in range(len(self.rows)):
            best = self._backward(None, s)
            value = best[0][s]
            if value < best_value:
                best_value, best_path = value, self._greedy(best, s)
        if best_path is None:
            return None, None
        return int(best_value), self._tiling(best_path)

    # counting ----------------------------------------------------------

    def _int_dtype(self):
        m, n = self.rules.m, self.n
        return np.int64 if n * n * np.log2(max(m, 2)) < 62 else object

    def count(self, bound: int) -> int:
        if self.rules.is_unweighted:
            return self._count_unweighted() if bound >= 0 else 0
        return self._count_weighted(bound)

    def _count_unweighted(self) -> int:
        dtype = self._int_dtype()
        a = self.trans_ok.astype(dtype)
        if self.periodic:
            total = np.identity(len(self.rows), dtype=dtype)
            for _ in range(self.n):
                total = total.dot(a)
            return int(np.trace(total))
        vec = self.bottom_ok.astype(dtype)
        for _ in range(self.n - 1):
            vec = a.dot(vec)
        return int((vec * self.top_ok.astype(dtype)).sum())

    def _count_weighted(self, bound: int) -> int:
        r = len(self.rows)
        succ = [np.flatnonzero(self.trans_ok[u]) for u in range(r)]

        def run(init: List[Dict[int, int]], steps: int) -> List[Dict[int, int]]:
            layer = init
            for _ in range(steps):
                nxt = []
                for u in range(r):
                    acc: Dict[int, int] = {}
                    base = int(self.row_cost[u])
                    for l in succ[u]:
                        t = int(self.trans_cost[u, l])
                        for c, k in layer[l].items():
                            key = c + t + base
                            acc[key] = acc.get(key, 0) + k
                    nxt.append(acc)
                layer = nxt
            return layer

        total = 0
        if not self.periodic:
            init = [{int(self.row_cost[u]): 1} if self.bottom_ok[u] else {} for u in range(r)]
            top = run(init, self.n - 1)
            for u in np.flatnonzero(self.top_ok):
                total += sum(k for c, k in top[u].items() if c <= bound)
            return total
        for s in range(r):
            init = [{int(self.row_cost[u] + self.trans_cost[u, s]): 1} if self.trans_ok[u, s] else {}
                    for u in range(r)]
            top = run(init, self.n - 1)
            # the first row is s, so its own entry closes the ring
            total += sum(k for c, k in top[s].items() if c <= bound)
        return total


# ---------------------------------------------------------------- backtracking

class GridSearch:
    """Cell-by-cell backtracking with arc consistency and most-constrained-cell branching"""

    def __init__(self, instance: TilingInstance, n: int, config: Config):
        self.instance = instance
        self.n = n
        self.config = config
        rules = instance.rules
        self.m = rules.m
        self.periodic = instance.bc.is_periodic
        self.H = rules.h_allowed().astype(np.float32)
        self.V = rules.v_allowed().astype(np.float32)
        self.hw = rules.h.astype(np.float64)
        self.vw = rules.v.astype(np.float64)
        self.weighted = not rules.is_unweighted
        self.nodes = 0

    def initial_domains(self) -> np.ndarray:
        dom = np.ones((self.n, self.n, self.m), dtype=bool)
        for (r, c), tile in self.instance.bc.pinned_cells(self.n, self.n).items():
            keep = np.zeros(self.m, dtype=bool)
            keep[tile] = True
            dom[r, c] &= keep
        return dom

    def propagate(self, dom: np.ndarray) -> bool:
        n = self.n
        while True:
            before = dom.sum()
            d = dom.astype(np.float32)
            if self.periodic:
                left = np.roll(d, 1, axis=1)      # tile to the left of each cell
                right = np.roll(d, -1, axis=1)
                above = np.roll(d, 1, axis=0)
                below = np.roll(d, -1, axis=0)
                dom &= (left @ self.H) > 0
                dom &= (right @ self.H.T) > 0
                dom &= (above @ self.V.T) > 0
                dom &= (below @ self.V) > 0
            else:
                if n > 1:
                    dom[:, 1:] &= (d[:, :-1] @ self.H) > 0
                    dom[:, :-1] &= (d[:, 1:] @ self.H.T) > 0
                    dom[:-1, :] &= (d[1:, :] @ self.V) > 0
                    dom[1:, :] &= (d[:-1, :] @ self.V.T) > 0
            if not dom.any(axis=2).all():
                return False
            if dom.sum() == before:
                return True

    def lower_bound(self, dom: np.ndarray) -> float:
        if not self.weighted:
            return 0.0
        total = 0.0
        pairs = []
        if self.periodic:
            pairs.append((dom, np.roll(dom, -1, axis=1), self.hw))
            pairs.append((np.roll(dom, -1, axis=0), dom, self.vw))
        elif self.n > 1:
            pairs.append((dom[:, :-1], dom[:, 1:], self.hw))
            pairs.append((dom[1:, :], dom[:-1, :], self.vw))
        for first, second, w in pairs:
            both = first[..., :, None] & second[..., None, :]
            total += np.where(both, w, INF).min(axis=(-1, -2)).sum()
        return total

    def _tiling(self, dom: np.ndarray) -> Tiling:
        return Tiling.from_array(dom.argmax(axis=2))

    def _branch_cell(self, dom: np.ndarray):
        sizes = dom.sum(axis=2)
        open_cells = sizes > 1
        if not open_cells.any():
            return None
        masked = np.where(open_cells, sizes, np.iinfo(np.int64).max)
        flat = int(np.argmin(masked))
        return divmod(flat, self.n)

    def search(self, mode: SolveMode, bound: int):
        self.nodes = 0
        dom = self.initial_domains()
        state = {"best": INF, "witness": None, "count": 0}
        if self.propagate(dom):
            self._dfs(dom, mode, bound, state)
        return state

    def _dfs(self, dom: np.ndarray, mode: SolveMode, bound: int, state) -> bool:
        """
        Branch on the most constrained cell.  The first optimum found is kept, so
        the witness is optimal but not necessarily the lexicographically least.
        """
        self.nodes += 1
        if self.nodes > self.config.SEARCH_BUDGET:
            raise ResourceBudgetError("SEARCH_BUDGET", self.config.SEARCH_BUDGET,
                                      f"backtracking at N={self.n}")
        lb = self.lower_bound(dom)
        limit = state["best"] if mode == SolveMode.MINCOST else bound
        if mode == SolveMode.MINCOST and lb >= limit:
            return False
        if mode != SolveMode.MINCOST and lb > limit:
            return False
        cell = self._branch_cell(dom)
        if cell is None:
            cost = lb  # every domain is a singleton, so the bound is exact
            if mode == SolveMode.COUNT:
                if cost <= bound:
                    state["count"] += 1
                return False
            if mode == SolveMode.EXISTS:
                state["best"], state["witness"] = cost, self._tiling(dom)
                return True
            state["best"], state["witness"] = cost, self._tiling(dom)
            return False
        r, c = cell
        for t in np.flatnonzero(dom[r, c]):
            child = dom.copy()
            child[r, c] = False
            child[r, c, t] = True
            if self.propagate(child) and self._dfs(child, mode, bound, state):
                return True
        return False


# ---------------------------------------------------------------- public API

def solve_grid(instance: TilingInstance, n: int, mode=SolveMode.EXISTS,
               config: Optional[Config] = None, strategy: str = "auto") -> SolveResult:
    """
    Exists: a sentinel-free tiling with cost <= p(N).  Count: how many.
    MinCost: the minimum over sentinel-free tilings (None when there are none).
    strategy is 'auto', 'dp' or 'search'.
    Row-transfer witnesses are the lexicographically least optimal tiling;
    search witnesses (method "search") are only some optimal tiling.
    """
    if n < 1:
        raise DimensionError("N must be at least 1")
    config = config or Config()
    mode = _mode(mode)
    bound = instance.bound(n)
    use_dp = strategy == "dp"
    if strategy == "auto":
        transfer = RowTransfer(instance, n, config)
        use_dp = transfer.fits
    if use_dp:
        transfer = transfer if strategy == "auto" else RowTransfer(instance, n, config)
        if not transfer.fits:
            raise ResourceBudgetError("MEM_BUDGET", config.MEM_BUDGET,
                                      f"row transfer at N={n} needs more rows than the budget allows")
        return _solve_dp(transfer, mode, bound)
    logger.info(f"Row count over budget at N={n}; using backtracking")
    return _solve_search(GridSearch(instance, n, config), mode, bound)


def _solve_dp(transfer: RowTransfer, mode: SolveMode, bound: int) -> SolveResult:
    transfer.build()
    if mode == SolveMode.COUNT:
        count = transfer.count(bound)
        return SolveResult(exists=count > 0, count=count, method="transfer")
    cost, witness = transfer.min_cost()
    if mode == SolveMode.MINCOST:
        return SolveResult(exists=cost is not None, min_cost=cost, witness=witness, method="transfer")
    ok = cost is not None and cost <= bound
    return SolveResult(exists=ok, min_cost=cost, witness=witness if ok else None, method="transfer")


def _solve_search(search: GridSearch, mode: SolveMode, bound: int) -> SolveResult:
    state = search.search(mode, bound)
    logger.debug(f"Backtracking visited {search.nodes} nodes")
    if mode == SolveMode.COUNT:
        return SolveResult(exists=state["count"] > 0, count=state["count"], method="search")
    if state["witness"] is None:
        return SolveResult(exists=False, min_cost=None, method="search")
    cost = int(state["best"])
    if mode == SolveMode.MINCOST:
        return SolveResult(exists=True, min_cost=cost, witness=state["witness"], method="search")
    return SolveResult(exists=cost <= bound, min_cost=None, witness=state["witness"], method="search")


def brute_force_grid(instance: TilingInstance, n: int, config: Optional[Config] = None,
                     chunk: int = 1 << 18) -> SolveResult:
    """Exhaustive enumeration in lexicographic order; fills every field"""
    config = config or Config()
    rules = instance.rules
    m = rules.m
    cells = n * n
    total = m ** cells
    if total > config.ENUM_CAP:
        raise ResourceBudgetError("ENUM_CAP", config.ENUM_CAP, f"{m}^{cells} assignments")
    bound = instance.bound(n)
    periodic = instance.bc.is_periodic
    rr, cc = np.indices((n, n))
    pairs = []
    if periodic:
        pairs.append((rules.h, (rr * n + cc).ravel(), (rr * n + (cc + 1) % n).ravel()))
        pairs.append((rules.v, (((rr + 1) % n) * n + cc).ravel(), (rr * n + cc).ravel()))
    else:
        pairs.append((rules.h, (rr[:, :-1] * n + cc[:, :-1]).ravel(), (rr[:, 1:] * n + cc[:, 1:]).ravel()))
        pairs.append((rules.v, (rr[1:, :] * n + cc[1:, :]).ravel(), (rr[:-1, :] * n + cc[:-1, :]).ravel()))
    pins = instance.bc.pinned_cells(n, n)
    place = m ** np.arange(cells - 1, -1, -1, dtype=np.int64)
    count = 0
    best, best_index = None, None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        grid = (idx[:, None] // place[None, :]) % m
        ok = np.ones(len(idx), dtype=bool)
        for (r, c), tile in pins.items():
            ok &= grid[:, r * n + c] == tile
        cost = np.zeros(len(idx), dtype=np.int64)
        for w, a, b in pairs:
            pw = w[grid[:, a], grid[:, b]]
            ok &= (pw < FORBID).all(axis=1)
            cost += pw.sum(axis=1)
        count += int((ok & (cost <= bound)).sum())
        if ok.any():
            local = cost[ok].min()
            if best is None or local < best:
                best = int(local)
                best_index = int(idx[ok][np.argmin(cost[ok])])
    witness = None
    if best_index is not None:
        digits = (best_index // place) % m
        witness = Tiling(n, n, tuple(int(d) for d in digits))
    return SolveResult(exists=count > 0, count=count, min_cost=best, witness=witness, method="oracle")


def revalidate(instance: TilingInstance, result: SolveResult) -> bool:
    """A witness carries no sentinel pair and costs what the result says"""
    if result.witness is None:
        return True
    report = validate_tiling(instance, result.witness)
    if not report.valid:
        return False
    return result.min_cost is None or report.total_cost == result.min_cost
