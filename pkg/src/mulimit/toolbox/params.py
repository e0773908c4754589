"""Construction parameters, the merge schedule and the speed checks."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from decimal import ROUND_CEILING, Decimal, localcontext
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

from ..errors import ConfigError

SQRT5_MINUS_2 = math.sqrt(5) - 2


def _frac(x) -> Fraction:
    try:
        return Fraction(x)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"not a rational number: {x!r}") from e


@dataclass(frozen=True)
class ConstructionParams:
    """Everything the layered construction needs besides the two sequences.

    ``alphabet`` is the visible base alphabet Q0.  ``separator`` is the Q0
    symbol written between copies of w_i.  ``seed`` and ``delimiter`` name
    the bootstrap state and the segment boundary state; neither may be in Q0.
    """

    alphabet: tuple[str, ...] = ("a", "b", "c", "d", "#")
    K: int = 2
    s_i: Fraction = Fraction(1, 5)
    s_o: Fraction = Fraction(1, 4)
    seed: str = "S"
    delimiter: str = "D"
    separator: str = "#"
    cap_exponent: int = 3
    wait_policy: str = "cap"
    w: dict | None = None
    w_prime: dict | None = None
    reschedule: bool = True
    base_dir: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "s_i", _frac(self.s_i))
        object.__setattr__(self, "s_o", _frac(self.s_o))
        if self.wait_policy not in ("cap", "measured"):
            raise ConfigError(f"wait_policy must be 'cap' or 'measured', got {self.wait_policy!r}")

    # schedule -------------------------------------------------------------

    def t(self, i: int) -> int:
        """Merge time t_i = ceil(K^sqrt(i))."""
        return merge_time(self.K, i)

    def cap(self, i: int) -> int:
        """Upper size bound K_i = i^3 of a well-sized segment."""
        return i**self.cap_exponent

    def stage(self, t: int) -> int:
        """Largest i with t_i <= t (0 before t_1)."""
        return stage_of(self.K, t)

    def window(self, i: int) -> int:
        return self.t(i + 1) - self.t(i)

    def write_start(self, i: int) -> int:
        """t_{i,1}: the writing process starts half-way through the window."""
        return self.t(i) + self.window(i) // 2

    def write_times(self, i: int, len_w: int, len_wp: int) -> tuple[int, int, int]:
        """(t_{i,1}, t_{i,2}, t_{i,3}) for words of the given lengths."""
        t1 = self.write_start(i)
        return t1, t1 + len_w * self.cap(i), t1 + (len_w + len_wp + 1) * self.cap(i)

    def counter_width(self, t: int) -> int:
        """Base-K digits of the age t."""
        c = 1
        while t >= self.K:
            t //= self.K
            c += 1
        return c

    def admissible(self, t: int, n: int) -> bool:
        """Segment of size n admissible at time t: ceil(log_K t) <= floor(sqrt n)."""
        return ceil_log(self.K, max(t, 1)) <= math.isqrt(n)

    # serialisation ----------------------------------------------------------

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d["alphabet"] = list(self.alphabet)
        d["s_i"] = str(self.s_i)
        d["s_o"] = str(self.s_o)
        return d

    @classmethod
    def from_json(cls, obj: dict, base_dir: str | Path | None = None) -> "ConstructionParams":
        if not isinstance(obj, dict):
            raise ConfigError("construction parameters must be a JSON object")
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown construction parameter(s): {sorted(extra)}")
        kw = dict(obj)
        if "alphabet" in kw:
            kw["alphabet"] = tuple(kw["alphabet"])
        return cls(**kw, base_dir=str(base_dir) if base_dir is not None else None)

    @classmethod
    def load(cls, path: str | Path) -> "ConstructionParams":
        path = Path(path)
        try:
            obj = json.loads(path.read_text())
        except FileNotFoundError as e:
            raise ConfigError(f"parameter file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"parameter file is not valid JSON: {e}") from e
        return cls.from_json(obj, base_dir=path.parent)


@lru_cache(maxsize=None)
def merge_time(K: int, i: int) -> int:
    if i < 0:
        raise ValueError("i must be non-negative")
    r = math.isqrt(i)
    if r * r == i:
        return K**r
    with localcontext() as ctx:
        ctx.prec = 80
        v = Decimal(K) ** Decimal(i).sqrt()
        return int(v.to_integral_value(rounding=ROUND_CEILING))


def stage_of(K: int, t: int) -> int:
    if t < merge_time(K, 1):
        return 0
    guess = max(1, int(math.log(t, K) ** 2))
    i = max(1, guess - 3)
    while merge_time(K, i) > t:
        i -= 1
    while merge_time(K, i + 1) <= t:
        i += 1
    return i


def ceil_log(K: int, t: int) -> int:
    """Smallest c with K^c >= t."""
    c, v = 0, 1
    while v < t:
        v *= K
        c += 1
    return c


@dataclass(frozen=True)
class Check:
    name: str
    inequality: str
    lhs: float
    rhs: float
    ok: bool
    info: bool = False

    def line(self) -> str:
        status = "ok" if self.ok else ("note" if self.info else "VIOLATED")
        return f"[{status}] {self.name}: {self.inequality} ({self.lhs:.6g} vs {self.rhs:.6g})"


@dataclass(frozen=True)
class Diagnostics:
    checks: tuple[Check, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks if not c.info)

    @property
    def violations(self) -> list[Check]:
        return [c for c in self.checks if not c.ok and not c.info]

    def report(self) -> str:
        return "\n".join(c.line() for c in self.checks)

    def to_json(self) -> dict:
        return {"ok": self.ok, "checks": [asdict(c) for c in self.checks]}


def validate_params(p: ConstructionParams) -> Diagnostics:
    """Check every invariant; never raises, the caller decides what to do."""
    si, so = p.s_i, p.s_o
    bound = (1 - si) / (si + 3)
    checks = [
        Check("inner speed", "s_i < sqrt(5) - 2", float(si), SQRT5_MINUS_2, float(si) < SQRT5_MINUS_2),
        Check("outer speed", "s_o >= (1 - s_i)/(s_i + 3)", float(so), float(bound), so >= bound),
        Check("speed order", "0 < s_i < s_o <= 1", float(si), float(so), 0 < si < so <= 1),
        Check("counter base", "K >= 2", p.K, 2, p.K >= 2),
        Check("cap exponent", "cap_exponent >= 2", p.cap_exponent, 2, p.cap_exponent >= 2),
        Check("separator", "separator in Q0", float(p.separator in p.alphabet), 1.0, p.separator in p.alphabet),
        Check(
            "reserved names",
            "seed, delimiter not in Q0 and distinct",
            float(p.seed in p.alphabet or p.delimiter in p.alphabet),
            0.0,
            p.seed not in p.alphabet and p.delimiter not in p.alphabet and p.seed != p.delimiter,
        ),
        # Own derivation, reported only: the bouncing signal kills the older
        # outer border no later than it meets the younger inner border iff
        # s_o <= (1 - s_i)/(s_i + 3).
        Check("kill before crossing", "s_o <= (1 - s_i)/(s_i + 3) (derived, informational)", float(so), float(bound), so <= bound, info=True),
    ]
    return Diagnostics(tuple(checks))


def require_valid(p: ConstructionParams) -> None:
    d = validate_params(p)
    if not d.ok:
        raise ConfigError("invalid construction parameters:\n" + "\n".join(c.line() for c in d.violations))
