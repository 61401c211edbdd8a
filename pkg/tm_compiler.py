"""
Turing machines, the machine-to-tiles compiler, the binary counter that
turns a grid size into an input string, and the size reductions.

The compiled instance has the four-corner tile C.  Layer 1 runs the counter
downward from the top interior row; its last row is copied into Layer 2,
which runs the verifier upward and must show the accept state in its top row.
"""

import json
import logging
from dataclasses import dataclass, field
from math import isqrt
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from errors import CompileError, ReductionError, ResourceBudgetError, RuleFileError, TMError
from tiling_core import FORBID, BoundaryCondition, RuleSet, Tiling, TilingInstance

logger = logging.getLogger(__name__)

MOVES = ("L", "R")


@dataclass(frozen=True)
class Transition:
    q: str
    a: str
    b: str
    q2: str
    move: str


@dataclass(frozen=True)
class TMSpec:
    alphabet: Tuple[str, ...]
    blank: str
    states: Tuple[str, ...]
    start: str
    accept: Optional[str]
    delta: Tuple[Transition, ...]
    deterministic: bool = True

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "delta", tuple(self.delta))
        if self.blank not in self.alphabet:
            raise TMError(f"blank {self.blank!r} is not in the alphabet")
        if self.start not in self.states:
            raise TMError(f"start state {self.start!r} is not declared")
        if self.accept is not None and self.accept not in self.states:
            raise TMError(f"accept state {self.accept!r} is not declared")
        seen = set()
        for t in self.delta:
            for s in (t.q, t.q2):
                if s not in self.states:
                    raise TMError(f"transition {t} uses undeclared state {s!r}")
            for a in (t.a, t.b):
                if a not in self.alphabet:
                    raise TMError(f"transition {t} uses undeclared symbol {a!r}")
            if t.move not in MOVES:
                raise TMError(f"transition {t} has move {t.move!r}")
            if t.q == self.accept:
                raise TMError(f"transition out of the accept state: {t}")
            if t.q2 == self.start:
                raise TMError(f"transition back into the start state: {t}")
            if self.deterministic and (t.q, t.a) in seen:
                raise TMError(f"deterministic machine has two moves for ({t.q}, {t.a})")
            seen.add((t.q, t.a))

    def moves(self) -> Dict[Tuple[str, str], List[Transition]]:
        table: Dict[Tuple[str, str], List[Transition]] = {}
        for t in self.delta:
            table.setdefault((t.q, t.a), []).append(t)
        return table

    def to_dict(self) -> Dict:
        return {
            "alphabet": list(self.alphabet), "blank": self.blank, "states": list(self.states),
            "start": self.start, "accept": self.accept, "deterministic": self.deterministic,
            "delta": [{"q": t.q, "a": t.a, "b": t.b, "q2": t.q2, "move": t.move} for t in self.delta],
        }

    @classmethod
    def from_dict(cls, doc: Dict, source: str = "<tm>") -> "TMSpec":
        for key in ("alphabet", "blank", "states", "start", "delta"):
            if key not in doc:
                raise RuleFileError(source, key, "missing")
        delta = []
        for i, entry in enumerate(doc["delta"]):
            try:
                delta.append(Transition(entry["q"], entry["a"], entry["b"], entry["q2"], entry["move"]))
            except (KeyError, TypeError):
                raise RuleFileError(source, f"delta[{i}]", "needs q, a, b, q2 and move") from None
        try:
            return cls(tuple(doc["alphabet"]), doc["blank"], tuple(doc["states"]), doc["start"],
                       doc.get("accept"), tuple(delta), bool(doc.get("deterministic", True)))
        except TMError as e:
            raise RuleFileError(source, "delta", str(e)) from None


def load_tm(path) -> TMSpec:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise RuleFileError(str(path), f"line {e.lineno}", e.msg) from None
    return TMSpec.from_dict(doc, str(path))


# ---------------------------------------------------------------- simulation

@dataclass(frozen=True)
class Configuration:
    state: str
    head: int  # cells are numbered from 1
    tape: Tuple[str, ...]  # trailing blanks stripped

    def padded(self, blank: str, cells: int) -> Tuple[str, ...]:
        return self.tape + (blank,) * (cells - len(self.tape))


@dataclass
class RunResult:
    final: Optional[Configuration]
    steps: int
    halted: bool
    accept_steps: List[int] = field(default_factory=list)
    accepted: bool = False
    peak_configs: int = 1


def _strip(tape: Sequence[str], blank: str) -> Tuple[str, ...]:
    tape = list(tape)
    while tape and tape[-1] == blank:
        tape.pop()
    return tuple(tape)


def initial_configuration(tm: TMSpec, tape: Sequence[str] = ()) -> Configuration:
    return Configuration(tm.start, 1, _strip(tape, tm.blank))


def apply(tm: TMSpec, cfg: Configuration, t: Transition, tape_cells: Optional[int] = None) -> Optional[Configuration]:
    """Successor under one transition, or None when the head falls off the tape"""
    tape = list(cfg.tape) + [tm.blank] * max(0, cfg.head - len(cfg.tape))
    tape[cfg.head - 1] = t.b
    head = cfg.head + (1 if t.move == "R" else -1)
    if head < 1 or (tape_cells is not None and head > tape_cells):
        return None
    return Configuration(t.q2, head, _strip(tape, tm.blank))


def successors(tm: TMSpec, cfg: Configuration, table=None, tape_cells: Optional[int] = None) -> List[Configuration]:
    table = table if table is not None else tm.moves()
    symbol = cfg.tape[cfg.head - 1] if cfg.head <= len(cfg.tape) else tm.blank
    out = []
    for t in table.get((cfg.state, symbol), []):
        nxt = apply(tm, cfg, t, tape_cells)
        if nxt is not None:
            out.append(nxt)
    return out


def run_tm(tm: TMSpec, tape: Sequence[str] = (), steps: int = 0, config: Optional[Config] = None,
           tape_cells: Optional[int] = None, exact: bool = False, head_at_home: bool = False) -> RunResult:
    """
    Deterministic machines return the configuration after `steps` steps (or
    where they halted).  Nondeterministic machines are explored breadth-first
    with deduplication; `accept_steps` lists every step count at which some
    branch sits in the accept state.  With exact=True acceptance means being in
    the accept state at exactly `steps` steps.
    """
    config = config or Config()
    if steps > config.STEP_CAP:
        raise ResourceBudgetError("STEP_CAP", config.STEP_CAP, f"{steps} steps requested")
    table = tm.moves()
    level = {initial_configuration(tm, tape)}
    accept_steps = []
    peak = 1
    taken = 0

    def at_accept(cfgs) -> bool:
        return any(c.state == tm.accept and (not head_at_home or c.head == 1) for c in cfgs)

    if at_accept(level):
        accept_steps.append(0)
    for step in range(1, steps + 1):
        nxt = set()
        for cfg in level:
            nxt.update(successors(tm, cfg, table, tape_cells))
        if not nxt:
            break
        if len(nxt) > config.CONFIG_CAP:
            raise ResourceBudgetError("CONFIG_CAP", config.CONFIG_CAP, f"at step {step}")
        if tm.deterministic and len(nxt) > 1:
            raise TMError("deterministic machine branched")
        level = nxt
        taken = step
        peak = max(peak, len(level))
        if at_accept(level):
            accept_steps.append(step)
    halted = taken < steps
    accepted = (steps in accept_steps) if exact else bool(accept_steps)
    final = next(iter(level)) if len(level) == 1 else None
    return RunResult(final, taken, halted, accept_steps, accepted, peak)


# ---------------------------------------------------------------- binary counter

COUNTER_BLANK = "#"
COUNTER_ALPHABET = ("#", "$", "%", "0", "1", "J", "0r", "0k", "1t", "Jt")
COUNTER_STATES = ("s", "e", "c", "l", "k", "m", "qA")
COUNTER_N0 = 16
COUNTER_C1 = 0.5
COUNTER_C2 = 2.0
STEP_OFFSET = 3  # the counter's output for grid size N is its tape after N - 3 steps


def counter_machine() -> TMSpec:
    """
    Reversible binary counter.  At the start of each cycle the tape reads
    "$ b J" with b the bits of the count below its top bit, least significant
    first, and the machine is in state c on cell 2.
    """
    rows = [
        ("s", "#", "$", "e", "R"),
        ("e", "#", "Jt", "l", "L"),
        ("c", "1", "0r", "c", "R"),
        ("c", "J", "0r", "e", "R"),
        ("c", "0", "1t", "l", "L"),
        ("l", "0r", "0", "l", "L"),
        ("l", "$", "%", "k", "R"),
        ("k", "0", "0k", "k", "R"),
        ("k", "1t", "1", "m", "L"),
        ("k", "Jt", "J", "m", "L"),
        ("m", "0k", "0", "m", "L"),
        ("m", "%", "$", "c", "R"),
    ]
    return TMSpec(COUNTER_ALPHABET, COUNTER_BLANK, COUNTER_STATES, "s", "qA",
                  tuple(Transition(*r) for r in rows), True)


def cycle_start(u: int) -> int:
    """Step count at which the counter starts the cycle for value u"""
    return 1 + 8 * u - 4 * bin(u).count("1")


def _bits(b: Sequence[int]) -> List[str]:
    return [str(x) for x in b]


def counter_output(steps: int) -> Tuple[str, ...]:
    """Closed form of the counter's tape after `steps` steps"""
    if steps < 0:
        raise ReductionError("negative step count")
    if steps == 0:
        return ()
    lo, hi = 0, steps
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if cycle_start(mid) <= steps:
            lo = mid
        else:
            hi = mid - 1
    u = lo
    d = steps - cycle_start(u)
    k = u.bit_length() - 1
    b = [(u >> i) & 1 for i in range(max(k, 0))]
    t = 0
    while t < len(b) and b[t] == 1:
        t += 1
    if u >= 1 and t < k:
        rest = _bits(b[t + 1:]) + ["J"]
        if d <= t:
            return tuple(["$"] + ["0r"] * d + _bits(b[d:]) + ["J"])
        if d <= 2 * t + 1:
            i = d - t - 1
            return tuple(["$"] + ["0r"] * (t - i) + ["0"] * i + ["1t"] + rest)
        if d <= 3 * t + 2:
            j = d - 2 * t - 2
            return tuple(["%"] + ["0k"] * j + ["0"] * (t - j) + ["1t"] + rest)
        i = d - 3 * t - 3
        return tuple(["%"] + ["0k"] * (t - i) + ["0"] * i + ["1"] + rest)
    # every bit below the top is 1 (u = 0 counts as k = -1)
    if d <= k:
        return tuple(["$"] + ["0r"] * d + _bits(b[d:]) + ["J"])
    if d == k + 1:
        return tuple(["$"] + ["0r"] * (k + 1))
    if d <= 2 * k + 3:
        i = d - k - 2
        return tuple(["$"] + ["0r"] * (k + 1 - i) + ["0"] * i + ["Jt"])
    if d <= 3 * k + 5:
        j = d - 2 * k - 4
        return tuple(["%"] + ["0k"] * j + ["0"] * (k + 1 - j) + ["Jt"])
    i = d - 3 * k - 6
    return tuple(["%"] + ["0k"] * (k + 1 - i) + ["0"] * i + ["J"])


def counter_size_in_bounds(n: int) -> bool:
    """2^(c1 |x|) <= N <= 2^(c2 |x|) for the counter output x at grid size N"""
    if n < COUNTER_N0:
        raise ReductionError(f"the size bound holds from N = {COUNTER_N0}, got {n}")
    size = len(counter_output(n - STEP_OFFSET))
    return 2 ** (COUNTER_C1 * size) <= n <= 2 ** (COUNTER_C2 * size)


def _count_from_bits(b: Sequence[int]) -> int:
    """Value whose bits below the top bit are b (least significant first)"""
    return (1 << len(b)) + sum(bit << i for i, bit in enumerate(b))


def _bit(s: str) -> int:
    if s not in ("0", "1"):
        raise ReductionError(f"{s!r} is not a counter bit")
    return int(s)


def _run(tape: Sequence[str], symbols: Iterable[str]) -> int:
    n = 0
    allowed = set(symbols)
    while n < len(tape) and tape[n] in allowed:
        n += 1
    return n


def decode_counter(x: Sequence[str]) -> int:
    """Step count K with counter_output(K) == x"""
    x = tuple(x)
    while x and x[-1] == COUNTER_BLANK:
        x = x[:-1]
    if not x:
        return 0
    body = x[1:]
    head = _run(body, ("0r", "0k", "0"))
    marks = body[:head]
    after = body[head:]
    zeros = marks.count("0")
    if x[0] == "$" and "Jt" in x:
        k = head - 1
        guess = cycle_start((1 << (k + 1)) - 1) + k + 2 + zeros
    elif x[0] == "$" and "1t" in x:
        t = head
        u = _count_from_bits([1] * t + [0] + [_bit(s) for s in after[1:-1]])
        guess = cycle_start(u) + t + 1 + zeros
    elif x[0] == "$" and "J" not in x:
        k = head - 1
        guess = cycle_start((1 << (k + 1)) - 1 if k >= 0 else 0) + k + 1
    elif x[0] == "$":
        # raw bits may start with 0, so only the 0r marks count as processed
        j = _run(body, ("0r",))
        u = _count_from_bits([1] * j + [_bit(s) for s in body[j:-1]])
        guess = cycle_start(u) + j
    elif x[0] == "%" and "Jt" in x:
        k = head - 1
        guess = cycle_start((1 << (k + 1)) - 1 if k >= 0 else 0) + 2 * k + 4 + marks.count("0k")
    elif x[0] == "%" and "1t" in x:
        t = head
        u = _count_from_bits([1] * t + [0] + [_bit(s) for s in after[1:-1]])
        guess = cycle_start(u) + 2 * t + 2 + marks.count("0k")
    elif x[0] == "%" and after[:1] == ("1",):
        t = head
        u = _count_from_bits([1] * t + [0] + [_bit(s) for s in after[1:-1]])
        guess = cycle_start(u) + 3 * t + 3 + zeros
    elif x[0] == "%":
        k = head - 1
        guess = cycle_start((1 << (k + 1)) - 1 if k >= 0 else 0) + 3 * k + 6 + zeros
    else:
        raise ReductionError(f"{' '.join(x)} is not a counter output")
    try:
        ok = counter_output(guess) == x
    except (ValueError, ReductionError):
        ok = False
    if not ok:
        raise ReductionError(f"{' '.join(x)} is not a counter output")
    return guess


def slowed_counter(tm: Optional[TMSpec] = None) -> TMSpec:
    """
    The counter on a doubled tape: original cell i lives on cell 2i-1 and every
    original step takes two, the second one toggling the spacer it crosses.
    Its tape after 2K steps, read on the odd cells, is the original after K.
    """
    tm = tm or counter_machine()
    spacer = "·"
    alphabet = tm.alphabet + (spacer,)
    mids = {}
    delta = []
    for t in tm.delta:
        mid = f"{t.q2}~{t.move}"
        mids[mid] = (t.q2, t.move)
        delta.append(Transition(t.q, t.a, t.b, mid, t.move))
    for mid, (q2, move) in sorted(mids.items()):
        delta.append(Transition(mid, tm.blank, spacer, q2, move))
        delta.append(Transition(mid, spacer, tm.blank, q2, move))
    states = tm.states + tuple(sorted(mids))
    return TMSpec(alphabet, tm.blank, states, tm.start, tm.accept, tuple(delta), True)


def reduce_to_n(x: Sequence[str], odd: bool = False, config: Optional[Config] = None) -> int:
    """Grid size N whose counter output (after N - 3 steps) is x"""
    k = decode_counter(x)
    if not odd:
        return k + STEP_OFFSET
    n = 2 * k + STEP_OFFSET
    run = run_tm(slowed_counter(), (), n - STEP_OFFSET, config)
    tape = run.final.padded(COUNTER_BLANK, 2 * len(tuple(x)))
    if _strip(tape[0::2], COUNTER_BLANK) != _strip(x, COUNTER_BLANK):
        raise ReductionError("slowed counter does not reproduce the input")
    logger.info(f"Reduced {' '.join(x)} to odd N={n}")
    return n


# ---------------------------------------------------------------- prime interval

def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    for d in range(3, isqrt(n) + 1, 2):
        if n % d == 0:
            return False
    return True


def _ceil_two_thirds(n: int) -> int:
    """Smallest c with c^3 >= n^2"""
    target = n * n
    c = max(1, int(round(target ** (1.0 / 3.0))))
    while c ** 3 < target:
        c += 1
    while c > 1 and (c - 1) ** 3 >= target:
        c -= 1
    return c


def prime_interval(x: int) -> Tuple[int, int, int]:
    """(n0, start, stop) with the candidate primes in [start, stop)"""
    n0 = 2 * x.bit_length()
    start = x << n0
    return n0, start, start + _ceil_two_thirds(start)


def prime_reduce(x: int, seed: Optional[int] = None, samples: int = 64) -> int:
    """A prime N with N >> n0 == x: random draws first, then an ascending scan"""
    if x < 2:
        raise ReductionError("prime reduction needs x >= 2")
    n0, start, stop = prime_interval(x)
    rng = np.random.default_rng(Config.SEED if seed is None else seed)
    found = None
    for candidate in rng.integers(start, stop, size=samples):
        if is_prime(int(candidate)):
            found = int(candidate)
            break
    if found is None:
        found = next((n for n in range(start, stop) if is_prime(n)), None)
    if found is None:
        raise ReductionError(f"no prime in [{start}, {stop})")
    assert found >> n0 == x
    return found


# ---------------------------------------------------------------- compiler

BOUNDARY = ("C", "W", "N", "S", "E")


def layer_tiles(alphabet: Sequence[str], states: Sequence[str]) -> List[Tuple]:
    """The three varieties: (a,), (a, q, r|l) with the head, (a, q, R|L) just left"""
    out = [(a,) for a in alphabet]
    out += [(a, q, d) for a in alphabet for q in states for d in ("r", "l")]
    out += [(a, q, d) for a in alphabet for q in states for d in ("R", "L")]
    return out


def layer_tile_count(alphabet_size: int, state_count: int) -> int:
    return alphabet_size * (1 + 4 * state_count)


def _variety(t: Tuple) -> int:
    if len(t) == 1:
        return 1
    return 2 if t[2] in ("r", "l") else 3


def _name(t: Tuple) -> str:
    return ":".join(t)


def _h_rule(x: Tuple, y: Tuple) -> bool:
    vx, vy = _variety(x), _variety(y)
    if vx == 1:
        return vy == 1 or (len(y) == 3 and y[2] in ("r", "R"))
    d = x[2]
    if d == "r":
        return vy == 3 and y[2] == "L" and y[1] == x[1]
    if d == "R":
        return vy == 2 and y[2] == "l" and y[1] == x[1]
    return vy == 1  # l, L


def _v_rule(earlier: Tuple, later: Tuple, tm: TMSpec, table) -> bool:
    ve, vl = _variety(earlier), _variety(later)
    if ve in (1, 3):
        if later[0] != earlier[0]:
            return False
        return vl == 1 or (vl == 2 and later[1] != tm.start)
    if vl != 3:
        return False
    a, q = earlier[0], earlier[1]
    b, q2, move = later
    return any(t.b == b and t.q2 == q2 and t.move == move for t in table.get((q, a), []))


def _w_rule(y: Tuple, tm: TMSpec, plain_ok) -> bool:
    v = _variety(y)
    if v == 1:
        return plain_ok(y[0])
    if y[2] == "l":
        return y[1] == tm.start
    return y[2] in ("r", "R")


def _e_rule(x: Tuple) -> bool:
    return _variety(x) == 1 or x[2] in ("l", "L")


def rename_verifier(verifier: TMSpec, counter: TMSpec) -> TMSpec:
    """
    Verifier over counter and verifier symbols plus a primed copy of each.
    Moves out of the start state write primed symbols, so cell 1 is marked;
    every other move is duplicated on the primed symbols.
    """
    plain = list(dict.fromkeys(verifier.alphabet + counter.alphabet))
    primed = {a: a + "'" for a in plain}
    clash = set(primed.values()) & set(plain)
    if clash:
        raise CompileError(f"primed symbols collide with existing ones: {sorted(clash)}")
    delta = []
    for t in verifier.delta:
        if t.q == verifier.start:
            delta.append(Transition(t.q, t.a, primed[t.b], t.q2, t.move))
        else:
            delta.append(t)
            delta.append(Transition(t.q, primed[t.a], primed[t.b], t.q2, t.move))
    return TMSpec(tuple(plain) + tuple(primed[a] for a in plain), verifier.blank, verifier.states,
                  verifier.start, verifier.accept, tuple(delta), verifier.deterministic)


@dataclass
class CompiledTiles:
    counter: TMSpec
    verifier: TMSpec  # as run on layer 2 (after renaming)
    layer1: List[Tuple]
    layer2: List[Tuple]
    rules: Optional[RuleSet] = None
    instance: Optional[TilingInstance] = None

    @property
    def tile_count(self) -> int:
        return len(BOUNDARY) + len(self.layer1) * len(self.layer2)

    def interior(self, index: int) -> Tuple[Tuple, Tuple]:
        k = index - len(BOUNDARY)
        return self.layer1[k // len(self.layer2)], self.layer2[k % len(self.layer2)]


def _check_names(tm: TMSpec):
    for s in tm.alphabet + tm.states:
        if ":" in s or "/" in s:
            raise CompileError(f"symbol or state {s!r} contains a reserved character")


def compile_tm(counter: TMSpec, verifier: TMSpec, rename: bool = True, build: bool = True,
               config: Optional[Config] = None) -> CompiledTiles:
    config = config or Config()
    if not counter.deterministic:
        raise CompileError("the counter must be deterministic")
    _check_names(counter)
    _check_names(verifier)
    if rename:
        layer2_tm = rename_verifier(verifier, counter)
    else:
        written = {t.b for t in verifier.delta if t.q == verifier.start}
        if written & set(counter.alphabet):
            raise CompileError("verifier marks cell 1 with counter symbols; compile with renaming")
        layer2_tm = TMSpec(tuple(dict.fromkeys(verifier.alphabet + counter.alphabet)), verifier.blank,
                           verifier.states, verifier.start, verifier.accept, verifier.delta,
                           verifier.deterministic)
    l1 = layer_tiles(counter.alphabet, counter.states)
    l2 = layer_tiles(layer2_tm.alphabet, layer2_tm.states)
    compiled = CompiledTiles(counter, layer2_tm, l1, l2)
    m = compiled.tile_count
    logger.info(f"Compiled {len(l1)} x {len(l2)} interior tiles + {len(BOUNDARY)} boundary = {m}")
    if not build:
        return compiled
    if m * m > config.MEM_BUDGET:
        raise ResourceBudgetError("MEM_BUDGET", config.MEM_BUDGET, f"{m} compiled tiles")
    t1, t2 = counter.moves(), layer2_tm.moves()
    H1 = np.array([[_h_rule(x, y) for y in l1] for x in l1])
    H2 = np.array([[_h_rule(x, y) for y in l2] for x in l2])
    # layer 1 runs downward: the earlier row is above
    V1 = np.array([[_v_rule(above, below, counter, t1) for above in l1] for below in l1])
    V2 = np.array([[_v_rule(below, above, layer2_tm, t2) for above in l2] for below in l2])
    w1 = np.array([_w_rule(y, counter, lambda a: a != counter.blank) for y in l1])
    w2 = np.array([_w_rule(y, layer2_tm, lambda a: a not in counter.alphabet) for y in l2])
    e1 = np.array([_e_rule(x) for x in l1])
    e2 = np.array([_e_rule(x) for x in l2])
    n1 = np.array([_variety(x) == 1 and x[0] == counter.blank or
                   (_variety(x) == 2 and x[2] == "l" and x[0] == counter.blank and x[1] == counter.start)
                   for x in l1])
    n2 = np.array([_variety(x) != 2 or x[1] == layer2_tm.accept for x in l2])
    s12 = np.array([[(_variety(y) == 1 and y[0] == x[0]) or
                     (_variety(y) == 2 and y[2] == "l" and y[1] == layer2_tm.start and y[0] == x[0])
                     for y in l2] for x in l1])

    nb = len(BOUNDARY)
    allowed_h = np.zeros((m, m), dtype=bool)
    allowed_v = np.zeros((m, m), dtype=bool)
    idx = {b: i for i, b in enumerate(BOUNDARY)}
    for a, b in [("C", "N"), ("C", "S"), ("W", "E"), ("N", "C"), ("N", "N"), ("S", "C"), ("S", "S")]:
        allowed_h[idx[a], idx[b]] = True
    for below, above in [("C", "W"), ("C", "E"), ("W", "C"), ("W", "W"), ("E", "C"), ("E", "E"), ("S", "N")]:
        allowed_v[idx[below], idx[above]] = True
    allowed_h[nb:, nb:] = np.kron(H1, H2)
    allowed_v[nb:, nb:] = np.kron(V1, V2)
    allowed_h[idx["W"], nb:] = np.kron(w1, w2)
    allowed_h[nb:, idx["E"]] = np.kron(e1, e2)
    allowed_v[nb:, idx["N"]] = np.kron(n1, n2)
    allowed_v[idx["S"], nb:] = s12.ravel()
    names = list(BOUNDARY) + [f"{_name(a)}/{_name(b)}" for a in l1 for b in l2]
    rules = RuleSet(tuple(names), np.where(allowed_h, 0, FORBID), np.where(allowed_v, 0, FORBID))
    compiled.rules = rules
    compiled.instance = TilingInstance(rules, BoundaryCondition.four_corners(0))
    return compiled


def decode_layer_rows(compiled: CompiledTiles, t: Tiling):
    """
    Interior rows read back as configurations: Layer 1 from the top row down,
    Layer 2 from the bottom row up.  Each row must hold exactly one head tile
    per layer.
    """
    n = t.height
    layer1, layer2 = [], []
    for r in range(1, n - 1):
        cells = [compiled.interior(t.cell(r, c)) for c in range(1, n - 1)]
        for k, out, blank in ((0, layer1, compiled.counter.blank), (1, layer2, compiled.verifier.blank)):
            tiles = [cell[k] for cell in cells]
            heads = [i for i, x in enumerate(tiles) if _variety(x) == 2]
            if len(heads) != 1:
                raise CompileError(f"row {r} of layer {k + 1} has {len(heads)} head tiles")
            head = heads[0]
            out.append(Configuration(tiles[head][1], head + 1, _strip([x[0] for x in tiles], blank)))
    return layer1, layer2[::-1]


def tm_accepts_grid(counter: TMSpec, verifier: TMSpec, n: int, config: Optional[Config] = None) -> bool:
    """The oracle the compiled instance must agree with"""
    steps = n - STEP_OFFSET
    width = n - 2
    out = run_tm(counter, (), steps, config, tape_cells=width)
    if out.halted or out.final is None:
        return False
    layer2_tm = rename_verifier(verifier, counter)
    run = run_tm(layer2_tm, out.final.tape, steps, config, tape_cells=width, exact=True)
    return run.accepted
