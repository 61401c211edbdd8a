"""
The clock chain: a line of particles whose first two tracks run a clock of
4(N-2)^2 ticks, the illegal pairs and transition rules that pin it down, the
Hamiltonians they assemble into, and a classical simulator of all six tracks.

Interior sites are encoded as track1 * 5 + track2; the two end markers
follow as 40 and 41.  Two-site operators act on pair index a * 42 + b.
"""

import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from config import Config
from errors import ChainError, DimensionError, ResourceBudgetError
from tm_compiler import TMSpec

logger = logging.getLogger(__name__)

TRACK1 = ("_l", "_r", "R0", "R1", "R2", "L0", "L1", "L2")
TRACK2 = ("0", "1", "2", "0B", "1B")
ARROWS = TRACK1[2:]
INTERIOR = len(TRACK1) * len(TRACK2)
LEFT_END = INTERIOR
RIGHT_END = INTERIOR + 1
SITE_COUNT = INTERIOR + 2
END_NAMES = {LEFT_END: "⊢", RIGHT_END: "⊣"}

# arrow varieties and the Track 2 values they may never sit over
ILLEGAL_OVER = {
    "R0": ("1", "2", "1B"),
    "L0": ("1", "2", "1B"),
    "R1": ("2", "1B"),
    "L1": ("2", "1B", "0B"),
    "R2": ("0", "0B", "1B"),
    "L2": ("0", "0B"),
}

SECTORS = ("bracketed", "wellformed", "path")


def site(t1: str, t2: str) -> int:
    return TRACK1.index(t1) * len(TRACK2) + TRACK2.index(t2)


def split_site(idx: int) -> Tuple[str, str]:
    if idx >= INTERIOR:
        raise ChainError(f"site {idx} is an end marker")
    return TRACK1[idx // len(TRACK2)], TRACK2[idx % len(TRACK2)]


def site_name(idx: int) -> str:
    if idx in END_NAMES:
        return END_NAMES[idx]
    t1, t2 = split_site(idx)
    return f"[{t1},{t2}]"


@dataclass(frozen=True)
class ChainState:
    sites: Tuple[int, ...]

    @classmethod
    def from_tracks(cls, track1: Sequence[str], track2: Sequence[str]) -> "ChainState":
        if len(track1) != len(track2):
            raise DimensionError("tracks 1 and 2 must have the same length")
        return cls((LEFT_END,) + tuple(site(a, b) for a, b in zip(track1, track2)) + (RIGHT_END,))

    @property
    def length(self) -> int:
        return len(self.sites)

    @property
    def interior(self) -> Tuple[int, ...]:
        return self.sites[1:-1]

    def tracks(self) -> Tuple[List[str], List[str]]:
        pairs = [split_site(s) for s in self.interior]
        return [p[0] for p in pairs], [p[1] for p in pairs]

    def arrow(self) -> Tuple[int, str]:
        """(interior position, variety) of the single arrow"""
        t1, _ = self.tracks()
        where = [i for i, t in enumerate(t1) if t in ARROWS]
        if len(where) != 1:
            raise ChainError(f"{len(where)} arrows on track 1")
        return where[0], t1[where[0]]

    def frame(self) -> str:
        t1, t2 = self.tracks()
        return f"{' '.join(t1)} | {' '.join(t2)}"

    def __str__(self) -> str:
        return "".join(site_name(s) for s in self.sites)


def start_state(n_sites: int) -> ChainState:
    n = _interior_count(n_sites)
    return ChainState.from_tracks(["R0"] + ["_r"] * (n - 1), ["0B"] + ["0"] * (n - 1))


def final_state(n_sites: int) -> ChainState:
    n = _interior_count(n_sites)
    return ChainState.from_tracks(["L2"] + ["_r"] * (n - 1), ["1B"] + ["2"] * (n - 1))


def _interior_count(n_sites: int) -> int:
    if n_sites < 4:
        raise DimensionError("the clock needs N >= 4 particles")
    return n_sites - 2


# ---------------------------------------------------------------- rules

def _generic(a: str, b: str, c: str, d: str):
    """Track 1 pair ab -> cd whatever Track 2 holds"""
    return [((site(a, x), site(b, y)), (site(c, x), site(d, y))) for x in TRACK2 for y in TRACK2]


@lru_cache(maxsize=1)
def transition_rules() -> Tuple[Tuple[Tuple[int, int], Tuple[int, int]], ...]:
    """Every forward rule as (left-hand pair, right-hand pair)"""
    rules = []
    rules += _generic("R0", "_r", "_l", "R0")
    rules += _generic("R1", "_r", "_l", "R1")
    rules += _generic("_l", "L0", "L0", "_r")
    rules += _generic("_l", "L2", "L2", "_r")
    rules += [((site("R0", x), RIGHT_END), (site("L0", x), RIGHT_END)) for x in TRACK2]
    specific = [
        (("R1", "0"), "⊣", ("L1", "0"), "⊣"),
        (("R1", "0B"), "⊣", ("L2", "1B"), "⊣"),
        (("R2", "2"), "⊣", ("L2", "2"), "⊣"),
        (("R2", "1"), ("_r", "1"), ("_l", "1"), ("R2", "1")),
        (("R2", "2"), ("_r", "2"), ("_l", "2"), ("R2", "2")),
        (("R2", "1"), ("_r", "1B"), ("_l", "1B"), ("R2", "2")),
        ("⊢", ("L0", "0B"), "⊢", ("R1", "0B")),
        ("⊢", ("L1", "1"), "⊢", ("R1", "1")),
        (("_l", "0"), ("L1", "0"), ("L1", "0"), ("_r", "0")),
        (("_l", "1"), ("L1", "1"), ("L1", "1"), ("_r", "1")),
        (("_l", "0B"), ("L1", "0"), ("L1", "1"), ("_r", "0B")),
        ("⊢", ("L2", "1"), "⊢", ("R2", "1")),
    ]

    def code(x):
        if x == "⊢":
            return LEFT_END
        if x == "⊣":
            return RIGHT_END
        return site(*x)

    rules += [((code(a), code(b)), (code(c), code(d))) for a, b, c, d in specific]
    lhs = [r[0] for r in rules]
    rhs = [r[1] for r in rules]
    if len(set(lhs)) != len(lhs) or len(set(rhs)) != len(rhs):
        raise ChainError("a pair appears twice on one side of the transition rules")
    return tuple(rules)


@lru_cache(maxsize=2)
def _table(direction: str) -> Dict[Tuple[int, int], Tuple[int, int]]:
    if direction == "forward":
        return {a: b for a, b in transition_rules()}
    if direction == "backward":
        return {b: a for a, b in transition_rules()}
    raise ChainError(f"unknown direction {direction!r}")


def illegal_sites() -> List[int]:
    return sorted(site(a, x) for a, over in ILLEGAL_OVER.items() for x in over)


_TRACK2_PAIRS = {("1", "1"), ("1", "0B"), ("1", "1B"), ("0B", "0"), ("0", "0"), ("1B", "2"), ("2", "2")}


@lru_cache(maxsize=1)
def legal_pair_mask() -> np.ndarray:
    """
    Adjacent pairs that occur in some well-formed chain, minus the single-site
    prohibitions and the pair [R2,1][_r,0B]
    """
    ok = np.zeros((SITE_COUNT, SITE_COUNT), dtype=bool)
    bad = set(illegal_sites())
    good = [s for s in range(INTERIOR) if s not in bad]
    for a in good:
        a1, a2 = split_site(a)
        if a1 in ("_l",) + ARROWS and a2 in ("1", "0B", "1B"):
            ok[LEFT_END, a] = True
        if a1 in ("_r",) + ARROWS and a2 in ("0", "0B", "1B", "2"):
            ok[a, RIGHT_END] = True
        for b in good:
            b1, b2 = split_site(b)
            track1 = (a1 == "_l" and b1 in ("_l",) + ARROWS) or (b1 == "_r" and a1 in ("_r",) + ARROWS)
            if track1 and (a2, b2) in _TRACK2_PAIRS:
                ok[a, b] = True
    ok[site("R2", "1"), site("_r", "0B")] = False
    ok.setflags(write=False)
    return ok


def illegal_pairs() -> List[Tuple[int, int]]:
    """Every forbidden adjacent pair, ends included"""
    return [(int(a), int(b)) for a, b in zip(*np.nonzero(~legal_pair_mask()))]


def illegal_count(state: ChainState) -> int:
    s = np.asarray(state.sites)
    return int((~legal_pair_mask()[s[:-1], s[1:]]).sum())


def has_illegal_pair(state: ChainState) -> bool:
    return illegal_count(state) > 0


_T1_CODE = {"_l": "l", "_r": "r"}
_T2_CODE = {"0": "0", "1": "1", "2": "2", "0B": "b", "1B": "B"}


def is_bracketed(state: ChainState) -> bool:
    s = state.sites
    return len(s) >= 3 and s[0] == LEFT_END and s[-1] == RIGHT_END and all(x < INTERIOR for x in s[1:-1])


def is_well_formed(state: ChainState) -> bool:
    if not is_bracketed(state):
        return False
    t1, t2 = state.tracks()
    word1 = "".join(_T1_CODE.get(t, "A") for t in t1)
    word2 = "".join(_T2_CODE[t] for t in t2)
    return bool(re.fullmatch(r"l*Ar*", word1) and re.fullmatch(r"1*(b0*|B2*)", word2))


def wellformed_states(n_sites: int) -> List[ChainState]:
    n = _interior_count(n_sites)
    out = []
    for k in range(n):
        for t2 in (["1"] * k + ["0B"] + ["0"] * (n - 1 - k), ["1"] * k + ["1B"] + ["2"] * (n - 1 - k)):
            for p in range(n):
                for a in ARROWS:
                    out.append(ChainState.from_tracks(["_l"] * p + [a] + ["_r"] * (n - 1 - p), t2))
    return sorted(out, key=lambda s: s.sites)


def _moves(sites: Tuple[int, ...], table) -> List[Tuple[int, Tuple[int, ...]]]:
    out = []
    for i in range(len(sites) - 1):
        hit = table.get((sites[i], sites[i + 1]))
        if hit is not None:
            out.append((i, sites[:i] + hit + sites[i + 2:]))
    return out


def transition(state: ChainState, direction: str = "forward") -> Optional[ChainState]:
    """The unique successor (or predecessor) of a well-formed state, None at the ends"""
    if not is_well_formed(state):
        raise ChainError(f"{state} is not well formed")
    moves = _moves(state.sites, _table(direction))
    if len(moves) > 1:
        raise ChainError(f"{len(moves)} {direction} rules apply to {state}")
    return ChainState(moves[0][1]) if moves else None


def clock_sequence(n_sites: int) -> List[ChainState]:
    state = start_state(n_sites)
    seq = [state]
    table = _table("forward")
    expected = 4 * (n_sites - 2) ** 2
    while True:
        moves = _moves(state.sites, table)
        if not moves:
            break
        if len(moves) > 1 or len(seq) > expected:
            raise ChainError(f"clock schedule branches or overruns at tick {len(seq)}")
        state = ChainState(moves[0][1])
        seq.append(state)
    if len(seq) != expected or seq[-1] != final_state(n_sites):
        raise ChainError(f"clock ran {len(seq)} ticks, expected {expected}")
    return seq


def clock_frames(n_sites: int) -> List[str]:
    return [s.frame() for s in clock_sequence(n_sites)]


def steps_to_illegal(state: ChainState, limit: int) -> Optional[int]:
    """Fewest transitions, forward or backward, to a state with an illegal pair"""
    walkers = [state.sites, state.sites]
    tables = [_table("forward"), _table("backward")]
    for step in range(limit + 1):
        for k in range(2):
            if walkers[k] is None:
                continue
            if has_illegal_pair(ChainState(walkers[k])):
                return step
            moves = _moves(walkers[k], tables[k])
            walkers[k] = moves[0][1] if moves else None
        if walkers == [None, None]:
            return None
    return None


# ---------------------------------------------------------------- operators

@lru_cache(maxsize=1)
def pair_operator() -> sparse.csr_matrix:
    """
    One two-site term: a 0/1 projector on every illegal pair plus, per rule
    ab -> cd, 1/2 (|ab><ab| + |cd><cd| - |ab><cd| - |cd><ab|).
    """
    rows, cols, vals = [], [], []
    for a, b in illegal_pairs():
        k = a * SITE_COUNT + b
        rows.append(k)
        cols.append(k)
        vals.append(1.0)
    for lhs, rhs in transition_rules():
        x = lhs[0] * SITE_COUNT + lhs[1]
        y = rhs[0] * SITE_COUNT + rhs[1]
        rows += [x, y, x, y]
        cols += [x, y, y, x]
        vals += [0.5, 0.5, -0.5, -0.5]
    dim = SITE_COUNT ** 2
    return sparse.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()


def _apply_block(op, psi: np.ndarray, d: int, width: int, start: int, length: int) -> np.ndarray:
    """op acting on `width` consecutive sites starting at `start` of a length-site chain"""
    left = d ** start
    right = d ** (length - start - width)
    block = d ** width
    x = psi.reshape(left, block, right).transpose(1, 0, 2).reshape(block, left * right)
    y = op @ x
    return np.asarray(y).reshape(block, left, right).transpose(1, 0, 2).reshape(-1)


class ChainOperator:
    """A real symmetric operator, either an explicit sparse matrix or a matvec"""

    def __init__(self, dim: int, matvec: Optional[Callable] = None, matrix=None,
                 basis: Optional[List[ChainState]] = None, label: str = ""):
        self.dim = dim
        self.matrix = matrix
        self._matvec = matvec if matvec is not None else (lambda v: matrix @ v)
        self.basis = basis
        self.label = label

    def apply(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(self._matvec(np.asarray(v, dtype=np.float64))).reshape(-1)

    def linear_operator(self) -> LinearOperator:
        return LinearOperator((self.dim, self.dim), matvec=self.apply, rmatvec=self.apply, dtype=np.float64)

    def to_dense(self) -> np.ndarray:
        if self.matrix is not None:
            return np.asarray(self.matrix.todense())
        eye = np.eye(self.dim)
        return np.column_stack([self.apply(eye[:, j]) for j in range(self.dim)])


def _explicit(basis: List[ChainState], label: str) -> ChainOperator:
    index = {s.sites: i for i, s in enumerate(basis)}
    fwd, bwd = _table("forward"), _table("backward")
    rows, cols, vals = [], [], []
    for i, s in enumerate(basis):
        forward = _moves(s.sites, fwd)
        diag = illegal_count(s) + 0.5 * (len(forward) + len(_moves(s.sites, bwd)))
        rows.append(i)
        cols.append(i)
        vals.append(diag)
        for _, nxt in forward:
            j = index.get(nxt)
            if j is None:
                raise ChainError(f"transition leaves the {label} basis at {s}")
            rows += [i, j]
            cols += [j, i]
            vals += [-0.5, -0.5]
    n = len(basis)
    matrix = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return ChainOperator(n, matrix=matrix, basis=basis, label=label)


def path_hamiltonian(n_sites: int) -> sparse.csr_matrix:
    """The transition Hamiltonian on a path of 4(N-2)^2 states, written out directly"""
    t = 4 * (n_sites - 2) ** 2
    diag = np.ones(t)
    diag[0] = diag[-1] = 0.5
    off = -0.5 * np.ones(t - 1)
    return sparse.diags([off, diag, off], [-1, 0, 1], format="csr")


def bracketed_index(state: ChainState) -> int:
    idx = 0
    for s in state.interior:
        idx = idx * INTERIOR + s
    return idx


def full_index(state: ChainState) -> int:
    idx = 0
    for s in state.sites:
        idx = idx * SITE_COUNT + s
    return idx


def _bracketed_operator(n_sites: int, config: Config) -> ChainOperator:
    n = _interior_count(n_sites)
    dim = INTERIOR ** n
    if dim > config.MEM_BUDGET:
        raise ResourceBudgetError("MEM_BUDGET", config.MEM_BUDGET, f"bracketed chain of {dim} states")
    p = pair_operator()
    ids = np.arange(INTERIOR)
    inner = (ids[:, None] * SITE_COUNT + ids[None, :]).ravel()
    left = LEFT_END * SITE_COUNT + ids
    right = ids * SITE_COUNT + RIGHT_END
    inner_op = p[inner, :][:, inner].tocsr()
    left_op = p[left, :][:, left].tocsr()
    right_op = p[right, :][:, right].tocsr()

    def matvec(psi):
        out = _apply_block(left_op, psi, INTERIOR, 1, 0, n)
        out = out + _apply_block(right_op, psi, INTERIOR, 1, n - 1, n)
        for i in range(n - 1):
            out = out + _apply_block(inner_op, psi, INTERIOR, 2, i, n)
        return out

    return ChainOperator(dim, matvec=matvec, label="bracketed")


def _full_operator(n_sites: int, config: Config) -> ChainOperator:
    """3 H plus one unit of energy per particle that is not an end marker"""
    dim = SITE_COUNT ** n_sites
    if dim > config.MEM_BUDGET:
        raise ResourceBudgetError("MEM_BUDGET", config.MEM_BUDGET, f"full chain of {dim} states")
    p = pair_operator()
    interior = (np.arange(SITE_COUNT) < INTERIOR).astype(np.float64)
    diag = np.zeros((SITE_COUNT,) * n_sites)
    for j in range(n_sites):
        shape = [1] * n_sites
        shape[j] = SITE_COUNT
        diag = diag + interior.reshape(shape)
    diag = diag.reshape(-1)

    def matvec(psi):
        out = diag * psi
        for i in range(n_sites - 1):
            out = out + 3.0 * _apply_block(p, psi, SITE_COUNT, 2, i, n_sites)
        return out

    return ChainOperator(dim, matvec=matvec, label="full")


def build_hamiltonian(n_sites: int, sector: str = "bracketed", boundary: bool = False,
                      config: Optional[Config] = None) -> ChainOperator:
    """
    Sectors: 'bracketed' (ends fixed, every interior state), 'wellformed'
    (the 12(N-2)^2 well-formed states) and 'path' (the clock schedule).
    boundary=True builds the unrestricted chain with the bracketing term.
    """
    config = config or Config()
    if sector not in SECTORS:
        raise ChainError(f"unknown sector {sector!r}; expected one of {SECTORS}")
    _interior_count(n_sites)
    if boundary:
        if sector != "bracketed":
            raise ChainError("the boundary term is defined on the unrestricted chain only")
        return _full_operator(n_sites, config)
    if sector == "path":
        return _explicit(clock_sequence(n_sites), "path")
    if sector == "wellformed":
        return _explicit(wellformed_states(n_sites), "wellformed")
    return _bracketed_operator(n_sites, config)


@dataclass
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    method: str


def lowest_eigenpairs(op: ChainOperator, k: int = 2, config: Optional[Config] = None) -> EigenPairs:
    """
    The k smallest eigenpairs.  Small operators are diagonalized densely,
    larger ones by Lanczos from a seeded start vector.  Each vector is signed
    so that its largest component is positive.
    """
    config = config or Config()
    k = min(k, op.dim)
    if op.dim <= config.DENSE_EIG_DIM:
        dense = op.to_dense()
        if not np.allclose(dense, dense.T, atol=1e-12):
            raise ChainError(f"{op.label} operator is not symmetric")
        values, vectors = np.linalg.eigh(dense)
        values, vectors = values[:k], vectors[:, :k]
        method = "dense"
    else:
        if k >= op.dim - 1:
            raise ChainError("too many eigenpairs requested for the iterative solver")
        v0 = np.random.default_rng(config.SEED).standard_normal(op.dim)
        try:
            values, vectors = eigsh(op.linear_operator(), k=k, which="SA", tol=0, v0=v0,
                                    maxiter=config.EIG_MAXITER)
        except ArpackNoConvergence as e:
            raise ChainError(f"eigensolver did not converge on {op.label}: {e}") from None
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]
        method = "lanczos"
    residuals = np.empty(k)
    for j in range(k):
        v = vectors[:, j]
        top = np.argmax(np.abs(v))
        if v[top] < 0:
            vectors[:, j] = -v
        residuals[j] = np.linalg.norm(op.apply(vectors[:, j]) - values[j] * vectors[:, j])
    worst = float(residuals.max()) if k else 0.0
    if worst > config.EIG_RESIDUAL_TOL * max(1.0, float(np.abs(values).max()) if k else 1.0):
        raise ChainError(f"eigen residual {worst:.3e} above tolerance on {op.label}")
    logger.info(f"{method} eigensolve on {op.label} (dim {op.dim}): lowest {values[:k]}")
    return EigenPairs(values, vectors, residuals, method)


# ---------------------------------------------------------------- six-track simulator

BLANK_LEFT, BLANK_RIGHT = "_l", "_r"


@dataclass
class ConstructionTrace:
    n_sites: int
    frames: List[str] = field(default_factory=list)
    ticks: int = 0
    counter_steps: int = 0
    verifier_steps: int = 0
    counting_tape: Optional[Tuple[str, ...]] = None
    final_tape: Tuple[str, ...] = ()
    witness: Tuple[str, ...] = ()
    halted: Dict[str, int] = field(default_factory=dict)
    violations: List[Tuple[int, str]] = field(default_factory=list)
    accepted: bool = False


def _head(track: List[str]) -> Tuple[int, str, bool]:
    where = [i for i, x in enumerate(track) if x not in (BLANK_LEFT, BLANK_RIGHT)]
    if len(where) != 1:
        raise ChainError(f"{len(where)} heads on a machine track")
    q = track[where[0]]
    return (where[0], q[:-1], True) if q.endswith("'") else (where[0], q, False)


def _place(n: int, pos: int, label: str) -> List[str]:
    return [BLANK_LEFT] * pos + [label] + [BLANK_RIGHT] * (n - pos - 1)


class _Construction:
    """Tracks 3-6 riding on the clock; one machine step per right sweep"""

    def __init__(self, n_sites: int, counter: TMSpec, verifier: TMSpec, witness: str,
                 track4: Optional[Sequence[str]], keep_frames: bool):
        self.n = _interior_count(n_sites)
        self.counter, self.verifier = counter, verifier
        self.tables = {"counter": counter.moves(), "verifier": verifier.moves()}
        self.tape = [counter.blank] * self.n
        bits = list(witness)
        if len(bits) > self.n or any(b not in "01" for b in bits):
            raise ChainError(f"witness must be at most {self.n} bits")
        self.witness = bits + ["0"] * (self.n - len(bits))
        self.track4 = list(track4) if track4 is not None else _place(self.n, 0, counter.start)
        if len(self.track4) != self.n:
            raise DimensionError(f"track 4 needs {self.n} cells")
        self.track5 = _place(self.n, 0, verifier.start)
        self.keep_frames = keep_frames
        self.trace = ConstructionTrace(n_sites, witness=tuple(self.witness))

    def frame(self, clock: ChainState) -> str:
        return " | ".join([clock.frame(), " ".join(self.tape), " ".join(self.track4), " ".join(self.track5)])

    def initial_checks(self, clock: ChainState, tick: int) -> Optional[str]:
        if has_illegal_pair(clock):
            return "illegal clock pair"
        pos, kind = clock.arrow()
        if kind != "R0":
            return None
        want4 = self.counter.start if pos == 0 else BLANK_RIGHT
        want5 = self.verifier.start if pos == 0 else BLANK_RIGHT
        if self.tape[pos] != self.counter.blank:
            return f"track 3 not blank at site {pos + 1}"
        if self.track4[pos] != want4:
            return f"track 4 holds {self.track4[pos]!r} at site {pos + 1}, expected {want4!r}"
        if self.track5[pos] != want5:
            return f"track 5 holds {self.track5[pos]!r} at site {pos + 1}, expected {want5!r}"
        return None

    def _symbol(self, machine: TMSpec, p: int) -> str:
        if machine is self.verifier:
            joined = f"{self.tape[p]}.{self.witness[p]}"
            if joined in machine.alphabet:
                return joined
        return self.tape[p]

    def _write(self, machine: TMSpec, p: int, b: str):
        if machine is self.verifier and b[-2:] in (".0", ".1"):
            self.tape[p], self.witness[p] = b[:-2], b[-1]
        else:
            self.tape[p] = b

    def arrive(self, kind: str, p: int, tick: int) -> Optional[str]:
        """The right-moving arrow of the given variety has just reached site p"""
        name = "counter" if kind == "R1" else "verifier"
        machine = self.counter if kind == "R1" else self.verifier
        track = self.track4 if kind == "R1" else self.track5
        pos, q, primed = _head(track)
        if primed and pos == p - 1:
            track[:] = _place(self.n, p, q)
            return None
        if primed or pos != p:
            return None
        moves = self.tables[name].get((q, self._symbol(machine, p)), [])
        if not moves:
            self.trace.halted.setdefault(name, tick)
            return None
        t = moves[0]
        self._write(machine, p, t.b)
        if name == "counter":
            self.trace.counter_steps += 1
        else:
            self.trace.verifier_steps += 1
        if t.move == "L":
            if p == 0:
                return f"{name} head left the chain at tick {tick}"
            track[:] = _place(self.n, p - 1, t.q2)
        else:
            track[p] = t.q2 + "'"
        return None

    def turned(self, kind: str) -> Optional[str]:
        track = self.track4 if kind == "R1" else self.track5
        pos, _, primed = _head(track)
        if primed:
            return f"{'counter' if kind == 'R1' else 'verifier'} head ran off the right end"
        return None


def simulate_construction(n_sites: int, counter: TMSpec, verifier: TMSpec, witness: str = "",
                          config: Optional[Config] = None, track4: Optional[Sequence[str]] = None,
                          keep_frames: bool = True) -> ConstructionTrace:
    """
    Run every track forward from the initial clock state.  The counter steps
    once per R1 sweep (N-2 steps), the verifier once per R2 sweep (N-3 steps).
    A step fires when the arrow reaches the head; a right move parks the head
    primed and completes on the next tick.  Stops at the first illegal
    configuration.  A verifier that reads its witness declares tape symbols
    'a.w' for track 3 symbol a over witness bit w.
    """
    config = config or Config()
    if not (counter.deterministic and verifier.deterministic):
        raise ChainError("the simulator runs deterministic machines only")
    sim = _Construction(n_sites, counter, verifier, witness, track4, keep_frames)
    trace = sim.trace
    clock = start_state(n_sites)
    fwd, bwd = _table("forward"), _table("backward")
    tick = 0
    while True:
        if keep_frames:
            trace.frames.append(sim.frame(clock))
        problem = sim.initial_checks(clock, tick)
        if problem:
            trace.violations.append((tick, problem))
            break
        if len(_moves(clock.sites, bwd)) > 1:
            raise ChainError(f"backward transition ambiguous at tick {tick}")
        moves = _moves(clock.sites, fwd)
        if len(moves) > 1:
            raise ChainError(f"forward transition ambiguous at tick {tick}")
        if not moves:
            break
        if tick >= config.STEP_CAP:
            raise ResourceBudgetError("STEP_CAP", config.STEP_CAP, "clock ticks")
        before = clock.arrow()
        clock = ChainState(moves[0][1])
        tick += 1
        after = clock.arrow()
        if before[1] == "R1" and after[1] == "L2":
            trace.counting_tape = tuple(sim.tape)
        problem = None
        if after[1] in ("R1", "R2") and (after[0] != before[0] or before[1].startswith("L")):
            problem = sim.arrive(after[1], after[0], tick)
        elif before[1] in ("R1", "R2") and after[1].startswith("L") and before[0] == after[0]:
            problem = sim.turned(before[1])
        if problem:
            trace.violations.append((tick, problem))
            break
    trace.ticks = tick
    trace.final_tape = tuple(sim.tape)
    done = not trace.violations and clock == final_state(n_sites)
    trace.accepted = done and sim.track5[0] == verifier.accept
    logger.info(f"Construction at N={n_sites}: {tick} ticks, counter {trace.counter_steps} steps, "
                f"verifier {trace.verifier_steps} steps, accepted={trace.accepted}")
    return trace
