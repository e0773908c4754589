"""Bernoulli measures, seeded sampling, a computable generic prefix, and the exact pushforward oracle."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .engine import EXACT, Alphabet, LocalRule, Window, compose_power, flatten_rule
from .errors import BudgetExceeded, ConfigError

BLOCK = 1 << 16  # cells per independent RNG stream
FLOAT_TOL = 1e-12


def _as_number(v):
    if isinstance(v, (Fraction, int)):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, float):
        return float(v)
    raise ConfigError(f"bad coefficient {v!r}")


@dataclass(frozen=True)
class BernoulliMeasure:
    alphabet: Alphabet
    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(_as_number(c) for c in self.coefficients)
        if len(coeffs) != self.alphabet.size:
            raise ConfigError("one coefficient per state is required")
        if any(c < 0 for c in coeffs):
            raise ConfigError("coefficients must be non-negative")
        if all(isinstance(c, Fraction) for c in coeffs):
            if sum(coeffs) != 1:
                raise ConfigError(f"coefficients sum to {sum(coeffs)}, not 1")
        elif abs(math.fsum(float(c) for c in coeffs) - 1.0) > FLOAT_TOL:
            raise ConfigError("float coefficients must sum to 1 within 1e-12")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.coefficients)

    @property
    def full_support(self) -> bool:
        return all(c > 0 for c in self.coefficients)

    @classmethod
    def uniform(cls, alphabet: Alphabet) -> "BernoulliMeasure":
        return cls(alphabet, tuple(Fraction(1, alphabet.size) for _ in range(alphabet.size)))

    @classmethod
    def from_json(cls, obj, alphabet: Alphabet | None = None) -> "BernoulliMeasure":
        if obj == "uniform" or (isinstance(obj, dict) and obj.get("coefficients") == "uniform"):
            names = obj.get("alphabet") if isinstance(obj, dict) else None
            alpha = Alphabet(names) if names else alphabet
            if alpha is None:
                raise ConfigError("uniform measure needs an alphabet")
            return cls.uniform(alpha)
        if not isinstance(obj, dict) or "coefficients" not in obj:
            raise ConfigError("measure needs 'coefficients'")
        alpha = Alphabet(obj["alphabet"]) if "alphabet" in obj else alphabet
        if alpha is None:
            raise ConfigError("measure needs an alphabet")
        coeffs = obj["coefficients"]
        if isinstance(coeffs, dict):
            unknown = set(coeffs) - set(alpha.states)
            if unknown:
                raise ConfigError(f"coefficients for unknown states {sorted(unknown)}")
            values = [coeffs.get(s, 0) for s in alpha.states]
        else:
            values = list(coeffs)
        return cls(alpha, tuple(values))

    def to_json(self) -> dict:
        return {
            "alphabet": list(self.alphabet.states),
            "coefficients": {s: str(c) if isinstance(c, Fraction) else c for s, c in zip(self.alphabet.states, self.coefficients)},
        }

    def as_floats(self) -> np.ndarray:
        return np.array([float(c) for c in self.coefficients])


def cylinder_prob(m: BernoulliMeasure, u) -> Fraction | float:
    """Probability of the cylinder [u] (position independent)."""
    cells = m.alphabet.encode(u)
    one = Fraction(1) if m.exact else 1.0
    out = one
    for c in cells:
        out *= m.coefficients[c]
    return out


def sample_cells(m: BernoulliMeasure, length: int, seed: int) -> np.ndarray:
    if length < 1:
        raise ConfigError("length must be >= 1")
    cum = np.cumsum(m.as_floats())
    cum[-1] = 1.0
    out = np.empty(length, dtype=np.int64)
    for block, start in enumerate(range(0, length, BLOCK)):
        stop = min(start + BLOCK, length)
        gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**64 - 1), block])))
        u = gen.random(stop - start)
        out[start:stop] = np.searchsorted(cum, u, side="right")
    np.minimum(out, m.alphabet.size - 1, out=out)
    return out


def sample_window(m: BernoulliMeasure, length: int, seed: int, boundary: str = EXACT, origin: int = 0) -> Window:
    """i.i.d. cells drawn from ``m``; bit-identical for identical inputs."""
    return Window(sample_cells(m, length, seed), origin, boundary)


def _length_lex_words(alphabet: Alphabet):
    for n in itertools.count(1):
        yield from itertools.product(range(alphabet.size), repeat=n)


def weakly_generic_prefix(alphabet: Alphabet, length: int) -> str:
    """Prefix of the concatenation of all words in length-lexicographic order."""
    return alphabet.decode(weakly_generic_cells(alphabet, length))


def weakly_generic_cells(alphabet: Alphabet, length: int) -> np.ndarray:
    if length < 1:
        raise ConfigError("length must be >= 1")
    out: list[int] = []
    for w in _length_lex_words(alphabet):
        out.extend(w)
        if len(out) >= length:
            break
    return np.array(out[:length], dtype=np.int64)


def measure_generic_constants(alphabet: Alphabet, length: int, l: int) -> tuple[float, float]:
    """Return (A, B) with A <= density(u) * |Q|^l <= B over all length-l words u."""
    cells = weakly_generic_cells(alphabet, length)
    q = alphabet.size
    codes = np.zeros(len(cells) - l + 1, dtype=np.int64)
    for k in range(l):
        codes = codes * q + cells[k : len(cells) - l + 1 + k]
    counts = np.bincount(codes, minlength=q**l)
    dens = counts / (len(cells) - l)
    scaled = dens * q**l
    return float(scaled.min()), float(scaled.max())


def dp_budget_required(rule: LocalRule, t: int) -> int:
    return rule.alphabet.size ** (2 * rule.radius * t + 1)


def exact_pushforward(rule: LocalRule, m: BernoulliMeasure, u, t: int, budget: int = 10**8):
    """Probability that the t-th image of a m-random configuration shows ``u`` at 0.

    Left-to-right scan over preimages of length |u|+2rt; the DP state is the last
    2rt symbols, and each output symbol is checked against the tabulated t-th power.
    """
    if m.alphabet != rule.alphabet:
        raise ConfigError("measure and rule alphabets differ")
    target = m.alphabet.encode(u)
    if t < 0:
        raise ConfigError("t must be >= 0")
    if t == 0 or len(target) == 0:
        return cylinder_prob(m, u)
    required = dp_budget_required(rule, t)
    if required > budget:
        raise BudgetExceeded(required, budget, "DP states")
    power = compose_power(rule, t)
    table = flatten_rule(power, budget)
    q = rule.alphabet.size
    span = 2 * power.radius
    n_states = q**span
    if m.exact:
        den = math.lcm(*(c.denominator for c in m.coefficients))
        weights = [int(c * den) for c in m.coefficients]
        total_len = len(target) + span
        dtype = np.int64 if den ** total_len < 2**62 else object
        w = np.array(weights, dtype=dtype)
        v = np.ones(1, dtype=dtype)
    else:
        w = m.as_floats()
        v = np.ones(1)
    for _ in range(span):
        v = np.multiply.outer(v, w).reshape(-1)
    for sym in target:
        cand = np.multiply.outer(v, w).reshape(-1)  # index = state*q + new symbol
        cand = np.where(table == sym, cand, 0 if m.exact else 0.0)
        if m.exact and cand.dtype == object:
            cand = np.array(cand, dtype=object)
        v = cand.reshape(q, n_states).sum(axis=0)
    if m.exact:
        total = sum(int(x) for x in v)
        return Fraction(total, den ** (len(target) + span))
    return math.fsum(sorted(float(x) for x in v))


def brute_force_pushforward(rule: LocalRule, m: BernoulliMeasure, u, t: int):
    """Enumerate every preimage of length |u|+2rt.  Exponential; oracle for tests."""
    from .engine import apply_rule

    target = m.alphabet.encode(u)
    q = m.alphabet.size
    n = len(target) + 2 * rule.radius * t
    total = Fraction(0) if m.exact else 0.0
    for pre in itertools.product(range(q), repeat=n):
        w = Window(np.array(pre, dtype=np.int64))
        for _ in range(t):
            w = apply_rule(rule, w)
        if np.array_equal(w.cells, target):
            p = Fraction(1) if m.exact else 1.0
            for c in pre:
                p *= m.coefficients[c]
            total += p
    return total


def binomial_sigma(p: float, n: int) -> float:
    p = min(max(float(p), 0.0), 1.0)
    return math.sqrt(max(p * (1 - p), 1e-300) / n)


def words_of_length(alphabet: Alphabet, n: int) -> list[str]:
    return [alphabet.decode(w) for w in itertools.product(range(alphabet.size), repeat=n)]


def coefficients_from(alphabet: Alphabet, values: Sequence) -> BernoulliMeasure:
    return BernoulliMeasure(alphabet, tuple(values))
