"""Growing computable sequences: a multi-tape Turing machine interpreter, a
resource-bounded rescheduler, and concrete sequence generators."""

from __future__ import annotations

import ast
import itertools
import math
import operator
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import CapExceeded, ConfigError, HypothesisViolation, NoValidWord

DEFAULT_MAX_STEPS = 10**7
DEFAULT_MAX_CELLS = 10**6

# ---------------------------------------------------------------------------
# Turing machines

MOVES = {"L": -1, "R": 1, "S": 0}


@dataclass(frozen=True)
class TMSpec:
    """Deterministic multi-tape machine.

    ``transitions`` maps (state, reads) to (next state, writes, moves) where
    reads and writes are tuples with one symbol per tape and moves use L/R/S.
    The input (binary by default, or unary 1^i) starts on ``input_tape`` under
    the head; the result is the non-blank content of ``output_tape``.
    """

    tapes: int
    states: tuple[str, ...]
    initial: str
    halting: frozenset
    blank: str
    symbols: tuple[str, ...]
    transitions: dict
    input_tape: int = 0
    output_tape: int | None = None
    input_encoding: str = "binary"

    def __post_init__(self):
        if self.tapes < 1:
            raise ConfigError("a machine needs at least one tape")
        if self.initial not in self.states:
            raise ConfigError(f"initial state {self.initial!r} not declared")
        if not set(self.halting) <= set(self.states):
            raise ConfigError("halting states must be declared states")
        if self.blank not in self.symbols:
            raise ConfigError("blank must be a tape symbol")
        if self.input_encoding not in ("binary", "unary"):
            raise ConfigError("input_encoding is 'binary' or 'unary'")
        needed = {"0", "1"} if self.input_encoding == "binary" else {"1"}
        if not needed <= set(self.symbols):
            raise ConfigError(f"tape alphabet must contain input symbols {sorted(needed)}")
        for (state, reads), (nxt, writes, moves) in self.transitions.items():
            if state in self.halting:
                raise ConfigError(f"halting state {state!r} has an outgoing transition")
            if state not in self.states or nxt not in self.states:
                raise ConfigError(f"transition uses an undeclared state: {state!r} -> {nxt!r}")
            if not (len(reads) == len(writes) == len(moves) == self.tapes):
                raise ConfigError("reads/writes/moves must have one entry per tape")
            if not set(reads) | set(writes) <= set(self.symbols):
                raise ConfigError("transition uses a symbol outside the tape alphabet")
            if not set(moves) <= set(MOVES):
                raise ConfigError("moves must be L, R or S")

    @property
    def out_tape(self) -> int:
        return self.tapes - 1 if self.output_tape is None else self.output_tape

    def encode_input(self, i: int) -> str:
        return bin(i)[2:] if self.input_encoding == "binary" else "1" * i

    @classmethod
    def from_json(cls, obj: dict) -> "TMSpec":
        try:
            tapes = int(obj.get("tapes", 1))
            trans = {}
            for rec in obj["transitions"]:
                reads = tuple(rec["read"]) if isinstance(rec["read"], list) else (rec["read"],)
                writes = tuple(rec["write"]) if isinstance(rec["write"], list) else (rec["write"],)
                moves = tuple(rec["move"]) if isinstance(rec["move"], list) else (rec["move"],)
                key = (rec["state"], reads)
                if key in trans:
                    raise ConfigError(f"duplicate transition for {key}")
                trans[key] = (rec["next"], writes, moves)
            return cls(
                tapes=tapes,
                states=tuple(obj["states"]),
                initial=obj["initial"],
                halting=frozenset(obj["halting"]),
                blank=obj.get("blank", "_"),
                symbols=tuple(obj["symbols"]),
                transitions=trans,
                input_tape=int(obj.get("input_tape", 0)),
                output_tape=obj.get("output_tape"),
                input_encoding=obj.get("input_encoding", "binary"),
            )
        except KeyError as exc:
            raise ConfigError(f"machine description misses {exc}") from None

    def to_json(self) -> dict:
        return {
            "tapes": self.tapes,
            "states": list(self.states),
            "initial": self.initial,
            "halting": sorted(self.halting),
            "blank": self.blank,
            "symbols": list(self.symbols),
            "input_tape": self.input_tape,
            "output_tape": self.output_tape,
            "input_encoding": self.input_encoding,
            "transitions": [
                {"state": s, "read": list(r), "next": n, "write": list(w), "move": list(m)}
                for (s, r), (n, w, m) in self.transitions.items()
            ],
        }


@dataclass
class TMRun:
    halted: bool
    steps: int
    cells: int
    output: str
    state: str


def run_tm(tm: TMSpec, i: int, max_steps: int = DEFAULT_MAX_STEPS, max_cells: int = DEFAULT_MAX_CELLS) -> TMRun:
    """Run ``tm`` on input ``i``; stops (without raising) at the step or cell cap."""
    n = tm.tapes
    word = tm.encode_input(i)
    tapes = [dict() for _ in range(n)]
    tapes[tm.input_tape].update(enumerate(word))
    heads = [0] * n
    lo = [0] * n
    hi = [0] * n
    hi[tm.input_tape] = max(0, len(word) - 1)
    used = sum(hi) + n
    blank = tm.blank
    halting = tm.halting
    trans = {key: (nxt, writes, tuple(MOVES[m] for m in moves)) for key, (nxt, writes, moves) in tm.transitions.items()}
    state = tm.initial
    steps = 0
    halted = True
    while state not in halting:
        if steps >= max_steps or used > max_cells:
            halted = False
            break
        rule = trans.get((state, tuple(t.get(h, blank) for t, h in zip(tapes, heads))))
        if rule is None:
            # no transition: the machine is stuck, which we treat as a halt
            break
        state, writes, moves = rule
        for k in range(n):
            tape, h = tapes[k], heads[k]
            if writes[k] == blank:
                tape.pop(h, None)
            else:
                tape[h] = writes[k]
            h += moves[k]
            heads[k] = h
            if h > hi[k]:
                hi[k] = h
                used += 1
            elif h < lo[k]:
                lo[k] = h
                used += 1
        steps += 1
    return TMRun(halted, steps, used, _tape_word(tapes[tm.out_tape], blank), state)


def _tape_word(tape: dict, blank: str) -> str:
    if not tape:
        return ""
    return "".join(tape.get(p, blank) for p in range(min(tape), max(tape) + 1))


def unary_writer_tm() -> TMSpec:
    """Three-state, two-tape machine writing 1^i from unary input 1^i."""
    t = {
        ("start", ("1", "_")): ("copy", ("1", "1"), ("R", "R")),
        ("start", ("_", "_")): ("halt", ("_", "_"), ("S", "S")),
        ("copy", ("1", "_")): ("copy", ("1", "1"), ("R", "R")),
        ("copy", ("_", "_")): ("halt", ("_", "_"), ("S", "S")),
    }
    return TMSpec(2, ("start", "copy", "halt"), "start", frozenset({"halt"}), "_", ("_", "1"), t, input_encoding="unary")


def halting_tm(delay: int = 0) -> TMSpec:
    """Halts after exactly ``delay`` steps on every input (moves right on tape 0)."""
    states = tuple(f"q{k}" for k in range(delay + 1))
    trans = {}
    for k in range(delay):
        for sym in ("_", "0", "1"):
            trans[(f"q{k}", (sym,))] = (f"q{k + 1}", (sym,), ("R",))
    return TMSpec(1, states, "q0", frozenset({f"q{delay}"}), "_", ("_", "0", "1"), trans)


def looping_tm() -> TMSpec:
    """Never halts: walks right forever."""
    trans = {("run", (s,)): ("run", (s,), ("R",)) for s in ("_", "0", "1")}
    return TMSpec(1, ("run", "halt"), "run", frozenset({"halt"}), "_", ("_", "0", "1"), trans)


def input_length_tm() -> TMSpec:
    """Scans its binary input and halts on the blank: len(bin(i)) + 1 steps."""
    trans = {
        ("scan", ("0",)): ("scan", ("0",), ("R",)),
        ("scan", ("1",)): ("scan", ("1",), ("R",)),
        ("scan", ("_",)): ("halt", ("_",), ("S",)),
    }
    return TMSpec(1, ("scan", "halt"), "scan", frozenset({"halt"}), "_", ("_", "0", "1"), trans)


# ---------------------------------------------------------------------------
# sequence specs


@dataclass
class ResourceReport:
    index: int
    steps: int
    cells: int
    word: str
    source_index: int | None = None  # which input-sequence word was copied (rescheduler)


class Generator:
    """Builtin generator: word(i) plus declared cost of producing it."""

    name = "generator"

    def word(self, i: int) -> str:
        raise NotImplementedError

    def steps(self, i: int) -> int:
        return max(1, len(self.word(i)))

    def cells(self, i: int) -> int:
        return max(1, len(self.word(i)))

    def to_json(self) -> dict:
        return {"builtin": self.name}


@dataclass
class ConstantGenerator(Generator):
    base: str = "ab"
    offset: int = 1
    name = "constant"

    def word(self, i):
        return self.base * (i + self.offset)

    def to_json(self):
        return {"builtin": "constant", "word": self.base, "offset": self.offset}


@dataclass
class UnaryGenerator(Generator):
    symbol: str = "a"
    name = "unary"

    def word(self, i):
        return self.symbol * (i + 1)

    def to_json(self):
        return {"builtin": "unary", "symbol": self.symbol}


@dataclass
class ExponentialGenerator(Generator):
    """Same words as ``inner`` but declared to take 2^i steps."""

    inner: Generator = field(default_factory=ConstantGenerator)
    name = "exponential"

    def word(self, i):
        return self.inner.word(i)

    def steps(self, i):
        return 2**i

    def cells(self, i):
        return self.inner.cells(i)

    def to_json(self):
        return {"builtin": "exponential", "inner": self.inner.to_json()}


@dataclass
class FunctionGenerator(Generator):
    fn: Callable[[int], tuple[str, int, int]] = None  # i -> (word, steps, cells)
    name: str = "function"

    def word(self, i):
        return self.fn(i)[0]

    def steps(self, i):
        return self.fn(i)[1]

    def cells(self, i):
        return self.fn(i)[2]

    def to_json(self):
        raise ConfigError(f"generator {self.name!r} has no JSON form")


@dataclass
class GrowingSequenceSpec:
    generator: object  # TMSpec | Generator | RescheduledGenerator
    time_bound: Callable[[int], int] | None = None
    space_bound: Callable[[int], int] | None = None
    name: str = ""


def eval_sequence(spec: GrowingSequenceSpec, i: int, max_steps: int = DEFAULT_MAX_STEPS, max_cells: int = DEFAULT_MAX_CELLS) -> tuple[str, ResourceReport]:
    if i < 0:
        raise ConfigError("index must be >= 0")
    gen = spec.generator
    if isinstance(gen, TMSpec):
        run = run_tm(gen, i, max_steps, max_cells)
        if not run.halted:
            raise CapExceeded(f"machine exceeded caps on input {i} (steps {run.steps}, cells {run.cells})", run.steps, run.cells)
        return run.output, ResourceReport(i, run.steps, run.cells, run.output)
    if isinstance(gen, RescheduledGenerator):
        rep = gen.evaluate(i)
        return rep.word, rep
    steps, cells = gen.steps(i), gen.cells(i)
    if steps > max_steps or cells > max_cells:
        raise CapExceeded(f"declared cost of index {i} exceeds caps", steps, cells)
    w = gen.word(i)
    return w, ResourceReport(i, steps, cells, w)


def raw_cost(spec: GrowingSequenceSpec, j: int, max_steps: int, max_cells: int) -> tuple[str, int, int, bool]:
    """(word, steps, cells, finished) for the j-th word, without raising on caps."""
    gen = spec.generator
    if isinstance(gen, TMSpec):
        run = run_tm(gen, j, max_steps, max_cells)
        return run.output, run.steps, run.cells, run.halted
    steps, cells = gen.steps(j), gen.cells(j)
    if steps > max_steps or cells > max_cells:
        return "", steps, cells, False
    return gen.word(j), steps, cells, True


# ---------------------------------------------------------------------------
# bound expressions ("i**2", "ceil(i**(2/3))", ...)

_FUNCS = {"ceil": math.ceil, "floor": math.floor, "log2": math.log2, "log": math.log, "sqrt": math.sqrt, "min": min, "max": max}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.FloorDiv: operator.floordiv, ast.Pow: operator.pow, ast.Mod: operator.mod}


def bound_function(expr: str) -> Callable[[int], int]:
    """Compile a bound like ``"ceil(i**(2/3))"`` into an integer function of i."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad bound expression {expr!r}: {exc}") from None

    def ev(node, i):
        if isinstance(node, ast.Expression):
            return ev(node.body, i)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "i":
            return i
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left, i), ev(node.right, i))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand, i)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            return _FUNCS[node.func.id](*[ev(a, i) for a in node.args])
        raise ConfigError(f"unsupported element in bound expression {expr!r}")

    ev(tree, 2)  # validate eagerly

    def fn(i: int) -> int:
        return int(math.floor(ev(tree, i)))

    fn.expr = expr
    return fn


# ---------------------------------------------------------------------------
# rescheduler


@dataclass
class RescheduledGenerator:
    """Recomputes w_0, w_1, ... within time/space budgets tied to the index.

    Step accounting: the input word j is charged T0(j) = 2*T0(j-1) + raw(j)
    (the slowdown that recomputes the previous word twice).  A cumulative
    counter runs over all simulated steps; the run stops when the counter
    would reach lambda(i) or the work space would exceed S(i).  After each
    completed word the counter is compared with lambda(i-1) to decide whether
    to go on.  Reported steps add i for reading the input, a per-step
    counter overhead, and the copy/clean costs.
    """

    inner: GrowingSequenceSpec
    T: Callable[[int], int]
    S: Callable[[int], int]
    max_inner_steps: int = 10**12
    _cache: dict = field(default_factory=dict, repr=False)

    def lam(self, i: int) -> int:
        if i <= 0:
            return 0
        return max(0, (self.T(i) - i) // (2 * i))

    def _inner(self, j: int):
        if j not in self._cache:
            word, steps, cells, ok = raw_cost(self.inner, j, self.max_inner_steps, 10**9)
            if not ok:
                raise CapExceeded(f"input sequence did not produce word {j} within caps", steps, cells)
            prev = self._slowed(j - 1) if j > 0 else 0
            self._cache[j] = (word, 2 * prev + steps, cells)
        return self._cache[j]

    def _slowed(self, j: int) -> int:
        return self._inner(j)[1]

    def evaluate(self, i: int) -> ResourceReport:
        lam_i, lam_prev = self.lam(i), self.lam(i - 1)
        space = self.S(i)
        counter = 0
        out, source = "", None
        work_cells = 0
        copy_cost = 0
        overhead = 2 + max(1, lam_i.bit_length())
        for j in range(i + 1):
            word, slowed, cells = self._inner(j)
            if counter + slowed >= lam_i or cells > space or len(word) > space:
                break
            counter += slowed
            work_cells = max(work_cells, cells)
            out, source = word, j
            copy_cost += 2 * len(word) + cells  # copy the output, clean the work tape
            if counter >= lam_prev:
                break
        steps = i + overhead * counter + copy_cost
        used = max(work_cells, len(out), overhead)
        return ResourceReport(i, steps, used, out, source)

    def first_index_reaching(self, j: int, hi: int = 1 << 40) -> int:
        """Smallest i whose run completes word j (lambda is non-decreasing)."""
        need = sum(self._slowed(k) for k in range(j + 1))
        lo = 1
        while self.lam(lo) <= need and lo < hi:
            lo *= 2
        a, b = lo // 2, lo
        while a < b:
            mid = (a + b) // 2
            if self.lam(mid) > need:
                b = mid
            else:
                a = mid + 1
        return a

    def check_hypotheses(self, indices: Iterable[int]) -> int:
        """Sanity-check the bounds at sampled indices; return the first index from
        which every sampled check passes."""
        indices = sorted(indices)
        bad = []
        for i in indices:
            ok = self.T(i) > 2 * i and math.log2(max(i, 2)) < self.S(i) < i
            lp, ln = self.lam(i - 1), self.lam(i + 1)
            ok = ok and lp >= 1 and ln < 2 * lp
            if not ok:
                bad.append(i)
        if not indices or (bad and bad[-1] == indices[-1]):
            raise HypothesisViolation(f"bounds fail at sampled indices {bad[-5:]}")
        later = [i for i in indices if not bad or i > bad[-1]]
        return later[0]


def reschedule(spec: GrowingSequenceSpec, T, S, sample: Iterable[int] | None = None) -> GrowingSequenceSpec:
    """Wrap ``spec`` so that index i is produced within T(i) steps and S(i) cells."""
    T = bound_function(T) if isinstance(T, str) else T
    S = bound_function(S) if isinstance(S, str) else S
    gen = RescheduledGenerator(spec, T, S)
    sample = list(sample) if sample is not None else [2**k for k in range(3, 16)]
    gen.threshold = gen.check_hypotheses(sample)
    return GrowingSequenceSpec(gen, T, S, name=f"rescheduled({spec.name})")


# ---------------------------------------------------------------------------
# subshift avoider


def subshift_avoider(forbidden: Iterable[str] | Callable[[], Iterable[str]], alphabet: Sequence[str]) -> GrowingSequenceSpec:
    """w_i = lexicographically first length-i word avoiding the first i forbidden words."""
    source = forbidden() if callable(forbidden) else forbidden
    cached: list[str] = []
    it = iter(source)
    symbols = list(alphabet)

    def first_forbidden(n: int) -> list[str]:
        nonlocal it
        while len(cached) < n and it is not None:
            try:
                cached.append(next(it))
            except StopIteration:
                it = None
        return cached[:n]

    def fn(i: int):
        bad = first_forbidden(i)
        if i == 0:
            return "", 1, 1
        nodes = 0
        # iterative lexicographic DFS; a prefix is pruned when it ends with a forbidden word
        pos = [0]
        word: list[str] = []
        while True:
            if pos[-1] == len(symbols):
                pos.pop()
                if not word:
                    raise NoValidWord(f"no length-{i} word avoids {bad}")
                word.pop()
                pos[-1] += 1
                continue
            word.append(symbols[pos[-1]])
            nodes += 1
            s = "".join(word)
            if any(s.endswith(b) for b in bad if b):
                word.pop()
                pos[-1] += 1
                continue
            if len(word) == i:
                return s, nodes * max(1, len(bad)), i
            pos.append(0)

    return GrowingSequenceSpec(FunctionGenerator(fn, "subshift-avoider"), name="subshift-avoider")


def golden_mean_forbidden():
    return iter(["11"])


# ---------------------------------------------------------------------------
# pairings


def cantor_pair(a: int, b: int) -> int:
    return (a + b) * (a + b + 1) // 2 + b


def cantor_unpair(n: int) -> tuple[int, int]:
    w = (math.isqrt(8 * n + 1) - 1) // 2
    t = w * (w + 1) // 2
    b = n - t
    return w - b, b


def triple_of(n: int) -> tuple[int, int, int]:
    a, rest = cantor_unpair(n)
    b, c = cantor_unpair(rest)
    return a, b, c


def pairing_schedule(i: int) -> tuple[int, int]:
    """(code, repetition) for index i: every code recurs for infinitely many i."""
    return cantor_unpair(i)


def previous_same_code(i: int) -> int | None:
    code, rep = cantor_unpair(i)
    return cantor_pair(code, rep - 1) if rep > 0 else None


# ---------------------------------------------------------------------------
# witness sequences


@dataclass(frozen=True)
class Markers:
    d0: str = "["
    w: str = "w"
    d1: str = "|"
    d2: str = "]"


def _budgeted_halting(machine: TMSpec, inputs: Iterable[int], budget: int) -> tuple[bool, int]:
    total = 0
    for x in inputs:
        run = run_tm(machine, x, max_steps=budget - total, max_cells=10**7)
        total += run.steps
        if not run.halted:
            return False, total
    return True, total


def cof_witness(machine_of: Callable[[int], TMSpec], markers: Markers = Markers(), triple: Callable[[int], tuple[int, int, int]] | None = None, budget_cap: int = 1 << 16) -> GrowingSequenceSpec:
    """Witness words for co-finiteness of machines phi_j on runs k..k+l.

    f(i) = triple decoded from the first component of cantor_unpair(i), so each
    triple recurs infinitely often; the previous index with the same triple is
    the same code with repetition count minus one.
    """
    triple = triple or (lambda i: triple_of(pairing_schedule(i)[0]))

    def outcome(i: int) -> tuple[bool, int]:
        j, k, l = triple(i)
        budget = min(2**i, budget_cap)
        halted, tau = _budgeted_halting(machine_of(j), range(k, k + l + 1), budget)
        if not halted:
            return False, tau
        i0 = previous_same_code(i)
        if i0 is not None and tau <= 2**i0:
            return False, tau
        return True, tau

    def fn(i: int):
        j, k, l = triple(i)
        ok, tau = outcome(i)
        m = markers
        if ok:
            word = (m.d0 + m.w * j + m.d1 + m.w * k + m.d2) * i
        else:
            word = m.w * (i * (j + k + 3))
        return word, tau + len(word), max(len(word), 1)

    gen = FunctionGenerator(fn, "cof-witness")
    gen.outcome = outcome
    gen.triple = triple
    return GrowingSequenceSpec(gen, name="cof-witness")


def _mirror_extended(cells, left: int):
    """Cells of the generic configuration on [-left, len-left), mirrored at 0."""
    import numpy as np

    cells = np.asarray(cells)
    return np.concatenate([cells[:left][::-1], cells])


def rice_sequence(rule, machine: TMSpec, pair: Callable[[int], tuple[int, int]] | None = None, budget_cap: int = 1 << 16) -> GrowingSequenceSpec:
    """Words built from a generic configuration and its image under ``rule``.

    nu(i) = floor(log2 i); u_i is the length-nu prefix of the generic
    configuration c, v_i the length-nu prefix of A^nu(c).  c is the
    length-lex concatenation on the right half-line, mirrored on the left.
    """
    import numpy as np

    from .engine import Window, apply_rule
    from .measure import weakly_generic_cells

    pair = pair or (lambda i: cantor_unpair(pairing_schedule(i)[0]))
    alphabet = rule.alphabet

    def nu(i):
        return int(math.floor(math.log2(i))) if i >= 1 else 0

    def prefixes(i):
        n = nu(i)
        if n == 0:
            return "", ""
        reach = rule.radius * n
        right = weakly_generic_cells(alphabet, n + reach)
        u = right[:n]
        cells = _mirror_extended(right, reach)
        w = Window(cells)
        for _ in range(n):
            w = apply_rule(rule, w)
        v = w.cells[:n]
        return alphabet.decode(u), alphabet.decode(v)

    def outcome(i: int) -> bool:
        k, l = pair(i)
        halted, tau = _budgeted_halting(machine, range(k, k + l + 1), min(2**i, budget_cap))
        if not halted:
            return False
        i0 = previous_same_code(i)
        return not (i0 is not None and tau <= 2**i0)

    def fn(i: int):
        k, _ = pair(i)
        u, v = prefixes(i)
        sep = "" if alphabet.single_char else " "
        if outcome(i):
            word = sep.join([u] + [v] * k) if sep else u + v * k
        else:
            word = sep.join([v] * (k + 1)) if sep else v * (k + 1)
        return word, len(word) + 1, max(1, len(word))

    gen = FunctionGenerator(fn, "rice")
    gen.outcome = outcome
    gen.prefixes = prefixes
    return GrowingSequenceSpec(gen, name="rice")


def slow_convergence_sequence(machine_of: Callable[[int], TMSpec], enum: Callable[[int], int] | None = None) -> GrowingSequenceSpec:
    """f(i) = m; machine m runs on input 0 for i steps.  The first index of f^-1(m)
    at which it has halted gets (1^(m-1) 0)^i, every other index 1^(im).

    Default f(i) = a + 1 where (a, r) = cantor_unpair(i): each m >= 1 recurs
    infinitely often and f(i) <= i + 1.
    """
    enum = enum or (lambda i: pairing_schedule(i)[0] + 1)
    halt_time: dict[int, int | None] = {}

    def halts_within(m: int, steps: int) -> bool:
        known = halt_time.get(m)
        if known is not None:
            return known <= steps
        run = run_tm(machine_of(m), 0, max_steps=steps, max_cells=10**7)
        if run.halted:
            halt_time[m] = run.steps
        return run.halted

    def successful(i: int) -> bool:
        m = enum(i)
        if not halts_within(m, i):
            return False
        # unique success: no earlier index with the same m had already halted
        for i2 in range(i):
            if enum(i2) == m and halts_within(m, i2):
                return False
        return True

    def fn(i: int):
        m = enum(i)
        word = ("1" * (m - 1) + "0") * i if successful(i) else "1" * (i * m)
        return word, i + len(word), max(1, len(word))

    gen = FunctionGenerator(fn, "slow-convergence")
    gen.successful = successful
    gen.enum = enum
    return GrowingSequenceSpec(gen, name="slow-convergence")


# ---------------------------------------------------------------------------
# JSON


def sequence_from_json(obj: dict, base_dir=None) -> GrowingSequenceSpec:
    import json
    import os

    if "tm" in obj:
        tm = obj["tm"]
        if isinstance(tm, str):
            path = os.path.join(base_dir or ".", tm)
            if not os.path.exists(path):
                raise ConfigError(f"machine file not found: {path}")
            with open(path) as fh:
                tm = json.load(fh)
        spec = GrowingSequenceSpec(TMSpec.from_json(tm), name=obj.get("name", "tm"))
    elif "builtin" in obj:
        spec = GrowingSequenceSpec(generator_from_json(obj), name=obj["builtin"])
    else:
        raise ConfigError("sequence needs 'tm' or 'builtin'")
    if "reschedule" in obj:
        r = obj["reschedule"]
        spec = reschedule(spec, r["T"], r["S"])
    return spec


def generator_from_json(obj: dict) -> Generator:
    name = obj["builtin"]
    if name == "constant":
        return ConstantGenerator(obj.get("word", "ab"), int(obj.get("offset", 1)))
    if name == "unary":
        return UnaryGenerator(obj.get("symbol", "a"))
    if name == "exponential":
        return ExponentialGenerator(generator_from_json(obj.get("inner", {"builtin": "constant"})))
    raise ConfigError(f"unknown builtin sequence {name!r}")


def stutter_runs(reports: Sequence[ResourceReport]) -> list[tuple[int, int]]:
    """Collapse consecutive equal source indices into (source, run length)."""
    runs: list[tuple[int, int]] = []
    for rep in reports:
        if rep.source_index is None:
            continue
        if runs and runs[-1][0] == rep.source_index:
            runs[-1] = (rep.source_index, runs[-1][1] + 1)
        else:
            runs.append((rep.source_index, 1))
    return runs


def is_in_order_stutter(reports: Sequence[ResourceReport]) -> bool:
    """Empty words first, then w_j, ..., w_(j+1), ... with no index skipped."""
    seen_nonempty = False
    for rep in reports:
        if rep.source_index is None:
            if seen_nonempty:
                return False
        else:
            seen_nonempty = True
    runs = stutter_runs(reports)
    return all(b[0] == a[0] + 1 for a, b in itertools.pairwise(runs))
