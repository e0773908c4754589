"""Layered cell states and their integer coding.

A cell is either a plain base symbol, or a base symbol together with a
secondary component.  The secondary component is one of

* the seed,
* a set of signal particles (at most one per slot), or
* a pair (q2, q3) of segment data and computation-tape data.

Particles carry their exact sub-cell offset on a per-kind grid so that
signals moving at fractional speeds have rational positions.  Offsets are
stored in units of 1/UNIT of a cell.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..engine import CodedAlphabet
from ..errors import ConfigError

UNIT = 864000  # position unit per cell; one step is 43200 time units
STEP = 43200

# particle kinds
O, N, S1, S2, K, V, D, SEED = range(8)
KIND_NAMES = ("O", "N", "S1", "S2", "K", "V", "D", "seed")

# velocities in position units per time unit (speed 1 = 20)
SPEED = {O: 5, N: 4, S1: 20, S2: 20, K: 20, V: 0, D: 0, SEED: 0}

# sub-cell grids: number of admissible offsets per cell
GRID = {O: 4, N: 5, S1: 8, S2: 48, K: 48, V: 8, D: 8}

# K signal modes
K_WIN, K_TIE, K_TIE_O, K_TIE_N = range(4)

SLOTS = ("O+", "O-", "N+", "N-", "S1+", "S1-", "X+", "X-", "VD")
RADIX = (9, 9, 11, 11, 9, 9, 1 + 48 + 4 * 48, 1 + 48 + 4 * 48, 25)
NQ1 = 1
for _r in RADIX:
    NQ1 *= _r


@dataclass
class Particle:
    """A signal inside one step of the kinetic simulation.

    ``x0`` is the position extrapolated back to the start of the step, so the
    position at time s (in STEP units) is ``x0 + a * s``.
    """

    kind: int
    a: int
    x0: int
    attr: int = 0
    alive: bool = True
    born: int = -1  # time of birth within the step (-1: present at start)
    group: int = -1  # particles born together never interact at birth

    def pos(self, s: int) -> int:
        return self.x0 + self.a * s

    @property
    def direction(self) -> int:
        return (self.a > 0) - (self.a < 0)

    def slot(self) -> int:
        if self.kind == O:
            return 0 if self.a > 0 else 1
        if self.kind == N:
            return 2 if self.a > 0 else 3
        if self.kind == S1:
            return 4 if self.a > 0 else 5
        if self.kind in (S2, K):
            return 6 if self.a > 0 else 7
        return 8


def _slot_value(p: Particle, offset: int) -> int:
    g = UNIT // GRID[p.kind]
    if offset % g:
        raise ValueError(f"{KIND_NAMES[p.kind]} offset {offset}/{UNIT} is off its grid")
    k = offset // g
    if p.kind == O:
        return 1 + 2 * k + p.attr
    if p.kind == N:
        return 1 + 2 * k + p.attr
    if p.kind == S1:
        return 1 + k
    if p.kind == S2:
        return 1 + k
    if p.kind == K:
        return 49 + 48 * p.attr + k
    if p.kind == V:
        return 1 + 8 * p.attr + k
    if p.kind == D:
        return 17 + k
    raise ValueError(p.kind)


def _from_slot(slot: int, v: int) -> tuple[int, int, int, int]:
    """(kind, velocity, offset, attr) for a non-empty slot value."""
    v -= 1
    if slot in (0, 1):
        k, attr = divmod(v, 2)
        return O, SPEED[O] * (1 if slot == 0 else -1), k * (UNIT // 4), attr
    if slot in (2, 3):
        k, attr = divmod(v, 2)
        return N, SPEED[N] * (1 if slot == 2 else -1), k * (UNIT // 5), attr
    if slot in (4, 5):
        return S1, 20 * (1 if slot == 4 else -1), v * (UNIT // 8), 0
    if slot in (6, 7):
        sign = 1 if slot == 6 else -1
        if v < 48:
            return S2, 20 * sign, v * (UNIT // 48), 0
        mode, k = divmod(v - 48, 48)
        return K, 20 * sign, k * (UNIT // 48), mode
    if v < 16:
        attr, k = divmod(v, 8)
        return V, 0, k * (UNIT // 8), attr
    return D, 0, (v - 16) * (UNIT // 8), 0


def particles_to_code(values: list[int]) -> int:
    code, mult = 0, 1
    for v, r in zip(values, RADIX):
        code += v * mult
        mult *= r
    return code


def code_to_values(code: int) -> list[int]:
    out = []
    for r in RADIX:
        code, v = divmod(code, r)
        out.append(v)
    return out


@dataclass(frozen=True)
class LayeredState:
    """Decoded cell: base symbol plus optional secondary component.

    ``secondary`` is None, the string "seed", a tuple of nine slot values
    (particles), or a (q2, q3) pair of names.
    """

    primary: str
    secondary: object = None

    @property
    def is_plain(self) -> bool:
        return self.secondary is None

    @property
    def is_seed(self) -> bool:
        return self.secondary == "seed"

    @property
    def has_particles(self) -> bool:
        return isinstance(self.secondary, tuple) and len(self.secondary) == len(SLOTS)

    @property
    def data(self) -> tuple[str, str] | None:
        if isinstance(self.secondary, tuple) and len(self.secondary) == 2:
            return self.secondary
        return None

    def particles(self) -> list[tuple[str, int, float, int]]:
        """Readable (kind, direction, offset in cells, attr) list."""
        if not self.has_particles:
            return []
        out = []
        for slot, v in enumerate(self.secondary):
            if v:
                kind, a, off, attr = _from_slot(slot, v)
                out.append((KIND_NAMES[kind], (a > 0) - (a < 0), off / UNIT, attr))
        return out


class LayeredCodec:
    """Bijection between LayeredState values and integer codes.

    code = primary_index + |Q0| * secondary_index, where secondary index 0 is
    "no secondary", 1 is the seed, 2 .. NQ1 are the non-empty particle sets
    and the rest enumerate Q2 x Q3.
    """

    def __init__(self, q0: tuple[str, ...], q2: tuple[str, ...] = (), q3: tuple[str, ...] = ("0",), seed_name: str = "S"):
        if len(set(q0)) != len(q0):
            raise ConfigError("base alphabet has repeated symbols")
        self.q0 = tuple(q0)
        self.q2 = tuple(q2)
        self.q3 = tuple(q3)
        self.seed_name = seed_name
        self.nq0 = len(self.q0)
        self.q23_base = 1 + NQ1  # secondary index of the first (q2, q3) pair
        self.n_secondary = self.q23_base + len(self.q2) * len(self.q3)
        self.size = self.nq0 * self.n_secondary
        self._q0_index = {s: i for i, s in enumerate(self.q0)}
        self._q2_index = {s: i for i, s in enumerate(self.q2)}
        self._q3_index = {s: i for i, s in enumerate(self.q3)}
        self.alphabet = CodedAlphabet(self.size, self.name, self.index)

    # integer level -------------------------------------------------------

    def primary_index(self, code: int) -> int:
        return code % self.nq0

    def secondary_index(self, code: int) -> int:
        return code // self.nq0

    def plain(self, primary: int) -> int:
        return primary

    def seed(self, primary: int) -> int:
        return primary + self.nq0

    def with_particles(self, primary: int, values: list[int]) -> int:
        c = particles_to_code(values)
        if c == 0:
            return primary
        return primary + self.nq0 * (1 + c)

    def with_data(self, primary: int, q2: int, q3: int) -> int:
        return primary + self.nq0 * (self.q23_base + q2 * len(self.q3) + q3)

    def data_code(self, primary: str | int, q2: str, q3: str = "0") -> int:
        p = primary if isinstance(primary, int) else self._q0_index[primary]
        return self.with_data(p, self._q2_index[q2], self._q3_index[q3])

    def particle_values(self, code: int) -> list[int] | None:
        s = self.secondary_index(code)
        if 2 <= s < self.q23_base:
            return code_to_values(s - 1)
        return None

    def data_indices(self, code: int) -> tuple[int, int] | None:
        s = self.secondary_index(code)
        if s >= self.q23_base:
            return divmod(s - self.q23_base, len(self.q3))
        return None

    # state level ---------------------------------------------------------

    def decode(self, code: int) -> LayeredState:
        code = int(code)
        if not 0 <= code < self.size:
            raise ValueError(f"code {code} outside the alphabet")
        p = self.q0[self.primary_index(code)]
        s = self.secondary_index(code)
        if s == 0:
            return LayeredState(p)
        if s == 1:
            return LayeredState(p, "seed")
        if s < self.q23_base:
            return LayeredState(p, tuple(code_to_values(s - 1)))
        q2, q3 = divmod(s - self.q23_base, len(self.q3))
        return LayeredState(p, (self.q2[q2], self.q3[q3]))

    def encode(self, st: LayeredState) -> int:
        p = self._q0_index[st.primary]
        if st.secondary is None:
            return p
        if st.secondary == "seed":
            return self.seed(p)
        if st.has_particles:
            return self.with_particles(p, list(st.secondary))
        q2, q3 = st.secondary
        return self.with_data(p, self._q2_index[q2], self._q3_index[q3])

    def name(self, code: int) -> str:
        st = self.decode(code)
        if st.secondary is None:
            return st.primary
        if st.is_seed:
            return f"{st.primary}|{self.seed_name}"
        if st.has_particles:
            return f"{st.primary}|p" + ".".join(str(v) for v in st.secondary)
        return f"{st.primary}|{st.secondary[0]}/{st.secondary[1]}"

    def index(self, name: str) -> int:
        primary, sep, rest = name.partition("|")
        if primary not in self._q0_index:
            raise ConfigError(f"unknown base symbol in state {name!r}")
        if not sep:
            return self._q0_index[primary]
        if rest == self.seed_name:
            return self.encode(LayeredState(primary, "seed"))
        if rest.startswith("p"):
            vals = tuple(int(v) for v in rest[1:].split("."))
            if len(vals) != len(SLOTS) or any(not 0 <= v < r for v, r in zip(vals, RADIX)) or not any(vals):
                raise ConfigError(f"bad particle state {name!r}")
            return self.encode(LayeredState(primary, vals))
        q2, _, q3 = rest.partition("/")
        if q2 not in self._q2_index or q3 not in self._q3_index:
            raise ConfigError(f"unknown segment state {name!r}")
        return self.encode(LayeredState(primary, (q2, q3)))
