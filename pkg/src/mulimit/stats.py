"""Occurrence counts, word densities, density traces and persistence estimates."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .engine import EXACT, Alphabet, LocalRule, SpaceTimeTrace, Window, apply_rule
from .errors import ConfigError, WindowTooSmall, WordTooLong
from .measure import BernoulliMeasure, sample_window

INSTANTANEOUS = "instantaneous"
CESARO = "cesaro"


class OverUnityWarning(UserWarning):
    """A density above 1, which the |v|-|u| denominator allows."""


def _seq(x) -> tuple:
    if isinstance(x, np.ndarray):
        return tuple(int(v) for v in x)
    return tuple(x)


def occurrences(v, u) -> int:
    """Number of (overlapping) positions where ``u`` occurs in ``v``."""
    if isinstance(v, np.ndarray) and isinstance(u, np.ndarray):
        return count_in_row(v, u)
    v, u = _seq(v), _seq(u)
    n, m = len(v), len(u)
    if m > n:
        return 0
    if m == 0:
        return n + 1
    return sum(1 for i in range(n - m + 1) if v[i : i + m] == u)


def count_in_row(row: np.ndarray, u: np.ndarray) -> int:
    n, m = len(row), len(u)
    if m > n:
        return 0
    if m == 0:
        return n + 1
    hits = np.ones(n - m + 1, dtype=bool)
    for k, c in enumerate(u):
        hits &= row[k : n - m + 1 + k] == c
    return int(hits.sum())


def is_over_unity(v, u) -> bool:
    return occurrences(v, u) > len(v) - len(u)


def density(v, u) -> Fraction:
    """|v|_u / (|v| - |u|), unclamped; warns when the value exceeds 1."""
    n, m = len(v), len(u)
    if m >= n:
        raise WordTooLong(f"word of length {m} needs a longer row than {n}")
    d = Fraction(occurrences(v, u), n - m)
    if d > 1:
        warnings.warn(f"density {d} exceeds 1 (denominator |v|-|u|)", OverUnityWarning, stacklevel=2)
    return d


def row_density(row: np.ndarray, u: np.ndarray) -> float:
    """Float version of :func:`density` for long integer rows."""
    n, m = len(row), len(u)
    if m >= n:
        raise WordTooLong(f"word of length {m} needs a longer row than {n}")
    return count_in_row(row, u) / (n - m)


def default_checkpoints(horizon: int, base: float = 1.3) -> list[int]:
    """Geometric schedule ceil(base^k) capped at (and including) the horizon."""
    pts = {0, horizon}
    k = 0
    while True:
        t = math.ceil(base**k)
        if t > horizon:
            break
        pts.add(t)
        k += 1
    return sorted(pts)


@dataclass
class DensityTrace:
    words: list[str]
    times: list[int]
    values: np.ndarray  # shape (len(times), len(words))
    mode: str = INSTANTANEOUS
    samples: list[int] = field(default_factory=list)  # denominator |row|-|u| per time (first word)
    replica: int = 0

    def series(self, word: str) -> np.ndarray:
        return self.values[:, self.words.index(word)]

    def rows(self) -> Iterable[dict]:
        for i, t in enumerate(self.times):
            for j, w in enumerate(self.words):
                yield {"time": t, "word": w, "density": float(self.values[i, j]), "mode": self.mode, "replica": self.replica}


def density_trace(trace: SpaceTimeTrace, words: Sequence[str], checkpoints: Sequence[int], mode: str = INSTANTANEOUS, alphabet: Alphabet | None = None) -> DensityTrace:
    alphabet = alphabet or trace.rule.alphabet
    encoded = [alphabet.encode(w) for w in words]
    times = list(checkpoints)
    missing = [t for t in times if t not in trace.times]
    if missing:
        raise ConfigError(f"checkpoints {missing[:5]} are not recorded in the trace")
    if mode not in (INSTANTANEOUS, CESARO):
        raise ConfigError(f"unknown mode {mode!r}")
    index = {t: k for k, t in enumerate(trace.times)}

    def inst(t):
        row = trace.rows[index[t]].cells
        return [row_density(row, u) for u in encoded]

    if mode == INSTANTANEOUS:
        values = np.array([inst(t) for t in times], dtype=float).reshape(len(times), len(words))
    else:
        horizon = max(times) if times else 0
        needed = [t for t in range(horizon + 1) if t not in index]
        if needed:
            raise ConfigError("cesaro mode needs every row up to the last checkpoint")
        running = np.zeros(len(words))
        out = []
        wanted = set(times)
        for t in range(horizon + 1):
            running += inst(t)
            if t in wanted:
                out.append(running / (t + 1))
        values = np.array(out, dtype=float).reshape(len(times), len(words))
    samples = [len(trace.rows[index[t]]) - len(encoded[0]) if encoded else 0 for t in times]
    return DensityTrace(list(words), times, values, mode, samples)


def cesaro_from_instantaneous(times: Sequence[int], values: np.ndarray) -> np.ndarray:
    """Running means of a trace recorded at every integer time 0..T."""
    times = list(times)
    if times != list(range(len(times))):
        raise ConfigError("running means need consecutive times starting at 0")
    csum = np.cumsum(values, axis=0)
    return csum / np.arange(1, len(times) + 1).reshape(-1, *([1] * (values.ndim - 1)))


# ---------------------------------------------------------------------------
# persistence estimates

PERSISTENT = "persistent-likely"
VANISHING = "vanishing-likely"
UNDETERMINED = "undetermined"


@dataclass
class PersistenceVerdict:
    word: str
    verdict: str
    trend_slope: float
    last_value: float
    confidence_radius: float
    tail_min: float
    tail_max: float

    def to_json(self) -> dict:
        return asdict(self)


def _tail_slope(times, vals) -> float:
    if len(times) < 2:
        return 0.0
    x = np.log1p(np.asarray(times, dtype=float))
    y = np.asarray(vals, dtype=float)
    x = x - x.mean()
    denom = float((x * x).sum())
    return float((x * (y - y.mean())).sum() / denom) if denom else 0.0


def estimate_persistence(
    rule: LocalRule,
    measure: BernoulliMeasure,
    words: Sequence[str],
    horizon: int,
    replicas: int,
    width: int,
    seed: int = 0,
    checkpoints: Sequence[int] | None = None,
    collect: list | None = None,
) -> list[PersistenceVerdict]:
    """Heuristic three-valued persistence verdicts from independent exact-policy runs.

    The threshold eps = 10 sigma uses the worst-case binomial sigma sqrt(1/4n)
    with n the pooled number of positions at the horizon.
    """
    if not words:
        raise ConfigError("no words to track")
    encoded = [measure.alphabet.encode(w) for w in words]
    longest = max(len(u) for u in encoded)
    need = 2 * rule.radius * horizon + longest + 1
    if width < need:
        raise WindowTooSmall(f"width {width} < 2rT+|u|+1 = {need}")
    times = sorted(set(checkpoints) if checkpoints else default_checkpoints(horizon))
    wanted = set(times)
    acc = np.zeros((len(times), len(words)))
    for rep in range(replicas):
        cur = sample_window(measure, width, seed * 1_000_003 + rep, EXACT)
        vals = []
        for t in range(horizon + 1):
            if t > 0:
                cur = apply_rule(rule, cur)
            if t in wanted:
                vals.append([row_density(cur.cells, u) for u in encoded])
        arr = np.array(vals)
        acc += arr
        if collect is not None:
            collect.append(DensityTrace(list(words), times, arr, INSTANTANEOUS, replica=rep))
    mean = acc / replicas
    n_final = (width - 2 * rule.radius * horizon - longest) * replicas
    eps = 10 * math.sqrt(0.25 / n_final)
    tail_start = len(times) - max(1, len(times) // 4)
    out = []
    for j, w in enumerate(words):
        tail = mean[tail_start:, j]
        tmax, tmin = float(tail.max()), float(tail.min())
        if tmax < eps:
            verdict = VANISHING
        elif tmin > 2 * eps:
            verdict = PERSISTENT
        else:
            verdict = UNDETERMINED
        out.append(PersistenceVerdict(w, verdict, _tail_slope(times[tail_start:], tail), float(mean[-1, j]), eps, tmin, tmax))
    return out


def write_trace_csv(traces: Iterable[DensityTrace], fh=None) -> str:
    buf = fh if fh is not None else io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["time", "word", "density", "mode", "replica"], lineterminator="\n")
    writer.writeheader()
    for tr in traces:
        for row in tr.rows():
            row = dict(row)
            row["density"] = repr(row["density"])
            writer.writerow(row)
    return buf.getvalue() if fh is None else ""


def verdicts_to_json(verdicts: Sequence[PersistenceVerdict]) -> str:
    return json.dumps([v.to_json() for v in verdicts], indent=2, sort_keys=True)
