"""Core cellular-automaton semantics: alphabets, local rules, windows, traces."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import BudgetExceeded, ConfigError, UnknownSymbol, WindowTooSmall

EXACT = "exact"
TORUS = "torus"


class Alphabet:
    """Ordered set of named states with a dense index <-> name bijection."""

    def __init__(self, states: Iterable[str]):
        states = tuple(str(s) for s in states)
        if not states:
            raise ConfigError("alphabet must be non-empty")
        if len(set(states)) != len(states):
            raise ConfigError(f"alphabet names must be unique: {states}")
        self._states = states
        self._index = {s: i for i, s in enumerate(states)}

    @property
    def states(self) -> tuple[str, ...]:
        return self._states

    @property
    def size(self) -> int:
        return len(self._states)

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Alphabet) and self.states == other.states

    def __hash__(self) -> int:
        return hash(self.states)

    def __repr__(self) -> str:
        return f"Alphabet({list(self.states)!r})"

    @property
    def single_char(self) -> bool:
        return all(len(s) == 1 for s in self._states)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownSymbol(f"symbol {name!r} not in alphabet {list(self.states)}") from None

    def name(self, i: int) -> str:
        return self._states[int(i)]

    def split(self, word: str | Sequence[str]) -> list[str]:
        """Split a word into symbol names.

        Strings are read character by character when every state name is a
        single character; otherwise they must be whitespace or comma separated.
        """
        if isinstance(word, str):
            if self.single_char:
                return list(word)
            return [p for p in word.replace(",", " ").split() if p]
        return [str(s) for s in word]

    def encode(self, word: str | Sequence[str]) -> np.ndarray:
        return np.array([self.index(s) for s in self.split(word)], dtype=np.int64)

    def decode(self, cells: Iterable[int]) -> str:
        names = [self.name(c) for c in cells]
        return "".join(names) if self.single_char else " ".join(names)


class CodedAlphabet(Alphabet):
    """Alphabet too large to list; names come from an encoder/decoder pair."""

    def __init__(self, size: int, name_of: Callable[[int], str], index_of: Callable[[str], int]):
        self._size = int(size)
        self._name_of = name_of
        self._index_of = index_of

    @property
    def states(self):
        raise ConfigError("coded alphabet is not enumerable")

    @property
    def size(self) -> int:
        return self._size

    def __eq__(self, other) -> bool:
        return self is other

    def __hash__(self) -> int:
        return id(self)

    def __repr__(self) -> str:
        return f"CodedAlphabet(size={self._size})"

    @property
    def single_char(self) -> bool:
        return False

    def index(self, name: str) -> int:
        try:
            return self._index_of(name)
        except (KeyError, ValueError) as exc:
            raise UnknownSymbol(f"symbol {name!r} not in coded alphabet: {exc}") from None

    def name(self, i: int) -> str:
        return self._name_of(int(i))

    def split(self, word):
        if isinstance(word, str):
            return [p for p in word.split() if p]
        return [str(s) for s in word]


def binary_alphabet() -> Alphabet:
    return Alphabet(["0", "1"])


# ---------------------------------------------------------------------------
# rules


class LocalRule:
    """A radius-r local map.

    Subclasses implement ``image(stack)`` where ``stack`` has shape
    ``(2r+1, N)`` (row k holds the cell at offset k-r of each of N
    neighbourhoods) and the result has shape ``(N,)``.
    """

    kind = "abstract"

    def __init__(self, alphabet: Alphabet, radius: int):
        if radius < 1:
            raise ConfigError("radius must be a positive integer")
        self.alphabet = alphabet
        self.radius = int(radius)

    @property
    def width(self) -> int:
        return 2 * self.radius + 1

    def image(self, stack: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def local(self, neighborhood: Sequence[int]) -> int:
        stack = np.asarray(neighborhood, dtype=np.int64).reshape(self.width, 1)
        return int(self.image(stack)[0])

    def to_json(self) -> dict:
        raise ConfigError(f"rule kind {self.kind} has no JSON form")

    def __repr__(self) -> str:
        return f"{type(self).__name__}(r={self.radius}, |Q|={self.alphabet.size})"


def _neighborhood_codes(stack: np.ndarray, q: int) -> np.ndarray:
    codes = np.zeros(stack.shape[1], dtype=np.int64)
    for row in stack:
        codes = codes * q + row
    return codes


class TableRule(LocalRule):
    kind = "table"

    def __init__(self, alphabet: Alphabet, radius: int, table: Sequence[int], name: str | None = None):
        super().__init__(alphabet, radius)
        self.name = name
        table = np.asarray(table, dtype=np.int64)
        expected = alphabet.size ** self.width
        if table.shape != (expected,):
            raise ConfigError(f"table must have {expected} entries, got {table.shape}")
        if table.size and (table.min() < 0 or table.max() >= alphabet.size):
            raise ConfigError("table entries must be valid states")
        self.table = table
        self.table.setflags(write=False)

    def image(self, stack):
        return self.table[_neighborhood_codes(stack, self.alphabet.size)]

    def to_json(self) -> dict:
        q = self.alphabet
        if self.name:
            return {"alphabet": list(q.states), "radius": self.radius, "kind": "builtin", "builtin": self.name}
        entries = {}
        for code, nb in enumerate(itertools.product(range(q.size), repeat=self.width)):
            entries[q.decode(nb)] = q.name(self.table[code])
        return {"alphabet": list(q.states), "radius": self.radius, "kind": "table", "entries": entries}


class FunctionRule(LocalRule):
    """Rule defined by a vectorised function of the neighbourhood stack."""

    kind = "builtin"

    def __init__(self, alphabet, radius, fn, name: str, spec: dict | None = None):
        super().__init__(alphabet, radius)
        self._fn = fn
        self.name = name
        self._spec = spec or {}

    def image(self, stack):
        return np.asarray(self._fn(stack), dtype=np.int64)

    def to_json(self) -> dict:
        out = {"alphabet": list(self.alphabet.states), "radius": self.radius, "kind": "builtin", "builtin": self.name}
        out.update(self._spec)
        return out

    def __repr__(self):
        return f"FunctionRule({self.name!r}, r={self.radius})"


class PowerRule(LocalRule):
    """The t-th iterate of a base rule, seen as one rule of radius r*t."""

    kind = "power"

    def __init__(self, base: LocalRule, t: int):
        if t < 1:
            raise ConfigError("power must be >= 1")
        super().__init__(base.alphabet, base.radius * t)
        self.base = base
        self.t = int(t)

    def image(self, stack):
        r = self.base.radius
        rows = np.asarray(stack, dtype=np.int64)
        for _ in range(self.t):
            n = rows.shape[0] - 2 * r
            rows = np.stack([self.base.image(rows[j : j + 2 * r + 1]) for j in range(n)])
        return rows[0]

    def to_json(self) -> dict:
        return {"kind": "power", "t": self.t, "base": self.base.to_json()}

    def __repr__(self):
        return f"PowerRule({self.base!r}, t={self.t})"


def table_rule(alphabet: Alphabet, radius: int, fn: Callable[[tuple[int, ...]], int]) -> TableRule:
    """Tabulate a per-neighbourhood Python function."""
    width = 2 * radius + 1
    table = [fn(nb) for nb in itertools.product(range(alphabet.size), repeat=width)]
    return TableRule(alphabet, radius, table)


def random_table_rule(alphabet: Alphabet, radius: int, rng: np.random.Generator) -> TableRule:
    size = alphabet.size ** (2 * radius + 1)
    return TableRule(alphabet, radius, rng.integers(0, alphabet.size, size=size))


def identity_rule(alphabet: Alphabet | None = None, radius: int = 1) -> FunctionRule:
    alphabet = alphabet or binary_alphabet()
    return FunctionRule(alphabet, radius, lambda s: s[radius], "identity")


def shift_left_rule(alphabet: Alphabet | None = None) -> FunctionRule:
    alphabet = alphabet or binary_alphabet()
    return FunctionRule(alphabet, 1, lambda s: s[2], "shift-left")


def max_rule(alphabet: Alphabet | None = None) -> FunctionRule:
    alphabet = alphabet or binary_alphabet()
    return FunctionRule(alphabet, 1, lambda s: s.max(axis=0), "max")


def eca_rule(number: int) -> TableRule:
    if not 0 <= number <= 255:
        raise ConfigError(f"elementary rule number out of range: {number}")
    table = [(number >> (4 * a + 2 * b + c)) & 1 for a, b, c in itertools.product((0, 1), repeat=3)]
    return TableRule(binary_alphabet(), 1, table, name=f"eca-{number}")


def spreading_rule(state: str, base: LocalRule | None = None) -> FunctionRule:
    """Add a spreading state to a radius-1 base rule.

    A cell whose neighbourhood contains the spreading state becomes it;
    otherwise the base rule applies.
    """
    if base is None:
        base = identity_rule(Alphabet(["0", "1"]))
    if base.radius != 1:
        raise ConfigError("spreading wrapper expects a radius-1 base rule")
    names = list(base.alphabet.states)
    if state in names:
        raise ConfigError(f"spreading state {state!r} already in the base alphabet")
    alphabet = Alphabet(names + [state])
    s = len(names)

    def fn(stack):
        hit = (stack == s).any(axis=0)
        safe = np.where(stack == s, 0, stack)
        return np.where(hit, s, base.image(safe))

    spec = {"base": base.to_json()}
    return FunctionRule(alphabet, 1, fn, f"spreading-{state}", spec)


def builtin_rule(name: str, alphabet: Alphabet | None = None, radius: int = 1, base: LocalRule | None = None) -> LocalRule:
    if name == "identity":
        return identity_rule(alphabet, radius)
    if name == "shift-left":
        return shift_left_rule(alphabet)
    if name == "max":
        return max_rule(alphabet)
    if name.startswith("eca-"):
        try:
            number = int(name[4:])
        except ValueError:
            raise ConfigError(f"bad elementary rule name {name!r}") from None
        return eca_rule(number)
    if name.startswith("spreading-"):
        return spreading_rule(name[len("spreading-"):], base)
    raise ConfigError(f"unknown builtin rule {name!r}")


def rule_from_json(obj: dict) -> LocalRule:
    """Build a rule from its JSON description."""
    if not isinstance(obj, dict):
        raise ConfigError("rule description must be a JSON object")
    kind = obj.get("kind", "builtin" if "builtin" in obj else "table")
    alphabet = Alphabet(obj["alphabet"]) if "alphabet" in obj else None
    if kind == "table":
        if alphabet is None or "entries" not in obj:
            raise ConfigError("table rule needs 'alphabet' and 'entries'")
        radius = int(obj.get("radius", 1))
        entries = obj["entries"]
        width = 2 * radius + 1
        table = []
        for nb in itertools.product(range(alphabet.size), repeat=width):
            key = alphabet.decode(nb)
            if key not in entries:
                raise ConfigError(f"table misses neighbourhood {key!r}")
            table.append(alphabet.index(entries[key]))
        return TableRule(alphabet, radius, table)
    if kind == "builtin":
        name = obj.get("builtin")
        if not name:
            raise ConfigError("builtin rule needs a 'builtin' name")
        base = rule_from_json(obj["base"]) if "base" in obj else None
        if alphabet is not None and name.startswith("spreading-") and base is None:
            state = name[len("spreading-"):]
            rest = [s for s in alphabet.states if s != state]
            base = identity_rule(Alphabet(rest))
        if name.startswith(("spreading-", "eca-")):
            return builtin_rule(name, base=base)
        return builtin_rule(name, alphabet, int(obj.get("radius", 1)))
    if kind == "power":
        return compose_power(rule_from_json(obj["base"]), int(obj["t"]))
    if kind == "construction":
        from .toolbox import rule_from_params

        return rule_from_params(obj.get("construction", {}))
    raise ConfigError(f"unknown rule kind {kind!r}")


# ---------------------------------------------------------------------------
# windows and evolution


@dataclass(frozen=True)
class Window:
    cells: np.ndarray
    origin: int = 0
    boundary: str = EXACT

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        if self.boundary not in (EXACT, TORUS):
            raise ConfigError(f"boundary must be 'exact' or 'torus', got {self.boundary!r}")

    def __len__(self) -> int:
        return int(self.cells.shape[0])

    @classmethod
    def from_word(cls, alphabet: Alphabet, word, origin: int = 0, boundary: str = EXACT) -> "Window":
        return cls(alphabet.encode(word), origin, boundary)

    def word(self, alphabet: Alphabet) -> str:
        return alphabet.decode(self.cells)

    def rotate(self, k: int = 1) -> "Window":
        return Window(np.roll(self.cells, -k), self.origin, self.boundary)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Window)
            and self.origin == other.origin
            and self.boundary == other.boundary
            and np.array_equal(self.cells, other.cells)
        )


@dataclass
class SpaceTimeTrace:
    rule: LocalRule
    rows: list[Window] = field(default_factory=list)
    times: list[int] = field(default_factory=list)

    def row_at(self, t: int) -> Window:
        return self.rows[self.times.index(t)]

    def __len__(self) -> int:
        return len(self.rows)


def _stack(cells: np.ndarray, r: int, boundary: str) -> np.ndarray:
    n = cells.shape[0]
    if boundary == EXACT:
        m = n - 2 * r
        return np.stack([cells[k : k + m] for k in range(2 * r + 1)])
    return np.stack([np.roll(cells, r - k) for k in range(2 * r + 1)])


def apply_rule(rule: LocalRule, w: Window) -> Window:
    r = rule.radius
    if w.boundary == EXACT and len(w) < 2 * r + 1:
        raise WindowTooSmall(f"exact window of length {len(w)} needs at least {2 * r + 1} cells")
    if w.boundary == TORUS and len(w) < 2 * r + 1:
        raise WindowTooSmall(f"torus of length {len(w)} needs at least {2 * r + 1} cells")
    out = rule.image(_stack(w.cells, r, w.boundary))
    origin = w.origin + r if w.boundary == EXACT else w.origin
    return Window(out, origin, w.boundary)


def evolve(rule: LocalRule, w: Window, steps: int, record="all") -> SpaceTimeTrace:
    """Iterate ``rule`` for ``steps`` steps.

    ``record`` is "all" or a collection of times to keep (time 0 and the final
    time are always kept) so that long runs need not hold every row.
    """
    if steps < 0:
        raise ConfigError("steps must be non-negative")
    if w.boundary == EXACT and len(w) < 2 * rule.radius * steps + 1:
        raise WindowTooSmall(f"exact window of length {len(w)} cannot run {steps} steps at radius {rule.radius}")
    keep_all = isinstance(record, str) and record == "all"
    wanted = set() if keep_all else {int(t) for t in record} | {0, steps}
    trace = SpaceTimeTrace(rule)
    trace.rows.append(w)
    trace.times.append(0)
    cur = w
    for t in range(1, steps + 1):
        cur = apply_rule(rule, cur)
        if keep_all or t in wanted:
            trace.rows.append(cur)
            trace.times.append(t)
    return trace


def flatten_rule(rule: LocalRule, budget: int = 10**6) -> np.ndarray:
    """Materialise the rule as an explicit table indexed by neighbourhood code."""
    if isinstance(rule.alphabet, CodedAlphabet):
        required = rule.alphabet.size ** rule.width
        raise BudgetExceeded(required, budget)
    required = rule.alphabet.size ** rule.width
    if required > budget:
        raise BudgetExceeded(required, budget)
    if isinstance(rule, TableRule):
        return rule.table.copy()
    q = rule.alphabet.size
    codes = np.arange(required, dtype=np.int64)
    stack = np.empty((rule.width, required), dtype=np.int64)
    for k in range(rule.width - 1, -1, -1):
        stack[k] = codes % q
        codes //= q
    return np.asarray(rule.image(stack), dtype=np.int64)


def compose_power(rule: LocalRule, t: int) -> LocalRule:
    if t < 1:
        raise ConfigError("compose_power needs t >= 1")
    if t == 1:
        return rule
    return PowerRule(rule, t)
