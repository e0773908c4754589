"""Wall certificates, wall-based persistent-language enumeration, convergence
diagnostics and a nilpotency probe.

None of these procedures decides its underlying property; every verdict is
three-valued or bounded by an explicit horizon.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .engine import TORUS, LocalRule, Window, apply_rule
from .errors import ConfigError, CycleBudgetExceeded, StateExplosion
from .measure import BernoulliMeasure
from .stats import CESARO, PERSISTENT, VANISHING, DensityTrace, estimate_persistence

WALL_UP_TO_HORIZON = "wall-up-to-horizon"
REFUTED = "refuted"
PROVEN_BY_CYCLE = "proven-by-cycle"

LEFT = "left"  # condition: agreement left of the wall is preserved
RIGHT = "right"


def step_rows(rule: LocalRule, rows: np.ndarray) -> np.ndarray:
    """One exact step applied to every row of an (N, n) array -> (N, n - 2r)."""
    n_rows, n = rows.shape
    r = rule.radius
    out = n - 2 * r
    if out <= 0:
        return np.zeros((n_rows, 0), dtype=rows.dtype)
    stack = np.stack([rows[:, k : k + out].reshape(-1) for k in range(2 * r + 1)])
    return np.asarray(rule.image(stack), dtype=rows.dtype).reshape(n_rows, out)


def _all_words(q: int, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product(range(q), repeat=n)), dtype=np.int64)


@dataclass
class WallCertificate:
    word: str
    horizon: int
    status: str
    refuted_at: int | None = None
    witness: dict | None = None
    cycle_at: int | None = None
    abstract_ambiguity_at: int | None = None
    max_set_size: int = 0

    def to_json(self) -> dict:
        return asdict(self)


def _abstract_pairs_step(rule: LocalRule, pairs: np.ndarray, side: str) -> np.ndarray:
    """pairs: (N, 2, m).  The context on the protected side is shared by c and
    c'; the far side is unconstrained and independent.  Returns unique pairs."""
    q, r = rule.alphabet.size, rule.radius
    ctx = _all_words(q, r)
    k = len(ctx)
    n = len(pairs)
    # rows enumerate (pair, shared context, far context of c); far context of c' loops below
    p_idx = np.repeat(np.arange(n), k * k)
    shared = ctx[np.tile(np.repeat(np.arange(k), k), n)]
    far_c = ctx[np.tile(np.arange(k), k * n)]
    x, y = pairs[p_idx, 0], pairs[p_idx, 1]
    nx = step_rows(rule, np.concatenate([shared, x, far_c] if side == LEFT else [far_c, x, shared], axis=1))
    results = []
    for b in range(k):
        far_d = np.broadcast_to(ctx[b], far_c.shape)
        cy = np.concatenate([shared, y, far_d] if side == LEFT else [far_d, y, shared], axis=1)
        results.append(np.stack([nx, step_rows(rule, cy)], axis=1))
    allp = np.concatenate(results)
    flat = np.unique(allp.reshape(len(allp), -1), axis=0)
    return flat.reshape(len(flat), 2, -1)


def _frozen(pairs: np.ndarray) -> bytes:
    return np.ascontiguousarray(pairs).tobytes()


def _search_witness(rule: LocalRule, w: np.ndarray, t: int, side: str, budget: int, seed: int):
    """Concrete (c, c') agreeing on one side of w whose images differ there at time t.

    Contexts form a grid (protected-side context) x (far context): exhaustive
    when it fits the budget, otherwise seeded random rows of each.
    """
    q, r = rule.alphabet.size, rule.radius
    m = len(w)
    near = r * t + r  # protected-side context, enough to see r cells after t steps
    far = r * t
    if q ** (near + far) <= budget:
        near_ctx, far_ctx = _all_words(q, near), _all_words(q, far)
    else:
        rng = np.random.default_rng([seed, t])
        n_far = min(64, q**far)
        near_ctx = rng.integers(0, q, (max(1, budget // n_far), near))
        far_ctx = rng.integers(0, q, (n_far, far))
    n_near, n_far = len(near_ctx), len(far_ctx)
    nc = np.repeat(near_ctx, n_far, axis=0)
    fc = np.tile(far_ctx, (n_near, 1))
    body = np.broadcast_to(w, (len(nc), m))
    if side == LEFT:
        rows, origin = np.concatenate([nc, body, fc], axis=1), -near
    else:
        rows, origin = np.concatenate([fc, body, nc], axis=1), -far
    cur = rows
    for _ in range(t):
        cur = step_rows(rule, cur)
    zs = np.arange(origin + r * t, origin + r * t + cur.shape[1])
    mask = zs < 0 if side == LEFT else zs >= m
    observed = cur[:, mask].reshape(n_near, n_far, -1)
    differs = observed != observed[:, :1, :]
    hit = np.argwhere(differs)
    if len(hit) == 0:
        return None
    i, j, k = hit[0]
    a = rule.alphabet
    return {"time": t, "side": side, "z": int(zs[mask][k]), "origin": origin,
            "c": a.decode(rows[i * n_far]), "c_prime": a.decode(rows[i * n_far + j])}


def replay_witness(rule: LocalRule, witness: dict) -> bool:
    """True iff the two witness configurations disagree at (time, z) in the engine."""
    a = rule.alphabet
    c = Window.from_word(a, witness["c"], origin=witness["origin"])
    d = Window.from_word(a, witness["c_prime"], origin=witness["origin"])
    for _ in range(witness["time"]):
        c, d = apply_rule(rule, c), apply_rule(rule, d)
    k = witness["z"] - c.origin
    return 0 <= k < len(c) and c.cells[k] != d.cells[k]


def check_wall(rule: LocalRule, w: str, horizon: int, budget: int = 10**6, witness_budget: int = 50_000, seed: int = 0) -> WallCertificate:
    """Certify that ``w`` blocks information flow in both directions.

    For each side the set of possible (c, c') values on the wall region is
    propagated, with an arbitrary shared context on the protected side and
    independent arbitrary contexts on the far side.  This over-approximates
    the reachable pairs, so an unambiguous border column at every time is a
    proof; a repeated set sequence extends the proof to all times.  An
    ambiguous column is only reported as a refutation once a concrete
    witness pair is found.
    """
    cells = rule.alphabet.encode(w)
    if len(cells) == 0:
        raise ConfigError("a wall candidate must be non-empty")
    m, r = len(cells), rule.radius
    state = {side: np.array([[cells, cells]], dtype=np.int64) for side in (LEFT, RIGHT)}
    seen = {(_frozen(state[LEFT]), _frozen(state[RIGHT])): 0}
    biggest = 1
    for t in range(1, horizon + 1):
        for side in (LEFT, RIGHT):
            nxt = _abstract_pairs_step(rule, state[side], side)
            biggest = max(biggest, len(nxt))
            if len(nxt) > budget:
                raise StateExplosion(f"possible-set size {len(nxt)} exceeds budget {budget} at t={t}")
            state[side] = nxt
            border = slice(0, min(r, m)) if side == LEFT else slice(max(0, m - r), m)
            if np.any(nxt[:, 0, border] != nxt[:, 1, border]):
                # the border column is ambiguous at t, so a difference can cross at t + 1
                wit = None
                for t_w in range(t + 1, horizon + 2):
                    wit = _search_witness(rule, cells, t_w, side, witness_budget, seed)
                    if wit is not None:
                        break
                if wit is not None:
                    return WallCertificate(w, horizon, REFUTED, refuted_at=t, witness=wit, abstract_ambiguity_at=t, max_set_size=biggest)
                return WallCertificate(w, t - 1, WALL_UP_TO_HORIZON, abstract_ambiguity_at=t, max_set_size=biggest)
        key = (_frozen(state[LEFT]), _frozen(state[RIGHT]))
        if key in seen:
            return WallCertificate(w, horizon, PROVEN_BY_CYCLE, cycle_at=t, max_set_size=biggest)
        seen[key] = t
    return WallCertificate(w, horizon, WALL_UP_TO_HORIZON, max_set_size=biggest)


# ---------------------------------------------------------------------------
# language of persistent words through a wall


def periodic_orbit_factors(rule: LocalRule, period: np.ndarray, max_word: int, budget: int) -> set[str]:
    """Factors (length <= max_word) of the temporal cycle reached from the
    spatially periodic configuration with the given period."""
    a = rule.alphabet
    period = np.asarray(period, dtype=np.int64)
    # a torus shorter than the neighbourhood is tiled; the configuration is the same
    period = np.tile(period, math.ceil((2 * rule.radius + 1) / len(period)))
    row = Window(period, 0, TORUS)
    seen: dict[bytes, int] = {}
    history: list[np.ndarray] = []
    t = 0
    while True:
        key = row.cells.tobytes()
        if key in seen:
            start = seen[key]
            break
        if t >= budget:
            raise CycleBudgetExceeded(f"no temporal cycle within {budget} steps for period {a.decode(period)!r}")
        seen[key] = t
        history.append(row.cells.copy())
        row = apply_rule(rule, row)
        t += 1
    words: set[str] = set()
    for cells in history[start:]:
        p = len(cells)
        reps = math.ceil((max_word + p) / p) + 1
        ext = np.tile(cells, reps)
        for n in range(1, max_word + 1):
            for s in range(p):
                words.add(a.decode(ext[s : s + n]))
    return words


def persistent_language_via_wall(rule: LocalRule, w: str, max_u: int, max_word: int, cycle_budget: int = 10**6, horizon: int = 64) -> list[str]:
    """Lower approximation of the persistent language using the wall ``w``:
    words occurring in the temporal cycles of periodic configurations of
    period w u for every |u| <= max_u.  Sorted by length, then lexicographically."""
    cert = check_wall(rule, w, horizon)
    if cert.status == REFUTED:
        raise ConfigError(f"{w!r} is not a wall for this rule (refuted at t={cert.refuted_at})")
    a = rule.alphabet
    wc = a.encode(w)
    out: set[str] = set()
    spent = 0
    for n in range(max_u + 1):
        for u in itertools.product(range(a.size), repeat=n):
            period = np.concatenate([wc, np.array(u, dtype=np.int64)])
            out |= periodic_orbit_factors(rule, period, max_word, cycle_budget - spent)
            spent += 1
    return sorted(out, key=lambda s: (len(a.split(s)), s))


# ---------------------------------------------------------------------------
# convergence diagnostics

SIMPLE = "simple-convergence-consistent"
OSCILLATION = "oscillation-detected"
UNDETERMINED = "undetermined"


@dataclass
class WordDiagnosis:
    word: str
    instantaneous_trend: float
    cesaro_trend: float
    oscillation_score: float  # min(rise, fall) over the late window, in sigmas
    late_range: float
    cesaro_late_range: float
    gap_times: tuple[int, int] | None = None
    gap: float = 0.0


@dataclass
class ConvergenceDiagnosis:
    verdict: str
    sigma: float
    threshold_sigmas: float
    words: list[WordDiagnosis] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _running_mean(times: Sequence[int], vals: np.ndarray) -> np.ndarray:
    """Cesàro means from checkpoints, holding each value until the next checkpoint."""
    times = np.asarray(times)
    if np.array_equal(times, np.arange(len(times))):
        return np.cumsum(vals) / np.arange(1, len(vals) + 1)
    widths = np.diff(np.append(times, times[-1] + 1))
    acc = np.cumsum(vals * widths)
    return acc / (times + 1)


def _slope(times, vals) -> float:
    x = np.log1p(np.asarray(times, dtype=float))
    x = x - x.mean()
    d = float((x * x).sum())
    return float((x * (np.asarray(vals) - np.mean(vals))).sum() / d) if d else 0.0


def _rise_fall(vals: np.ndarray) -> tuple[float, int, int, float, int, int]:
    """Largest increase and largest decrease between ordered pairs, with indices."""
    best_rise, rise_ij = 0.0, (0, 0)
    best_fall, fall_ij = 0.0, (0, 0)
    lo_i = hi_i = 0
    for k in range(1, len(vals)):
        if vals[k] - vals[lo_i] > best_rise:
            best_rise, rise_ij = float(vals[k] - vals[lo_i]), (lo_i, k)
        if vals[hi_i] - vals[k] > best_fall:
            best_fall, fall_ij = float(vals[hi_i] - vals[k]), (hi_i, k)
        if vals[k] < vals[lo_i]:
            lo_i = k
        if vals[k] > vals[hi_i]:
            hi_i = k
    return best_rise, *rise_ij, best_fall, *fall_ij


def diagnose_convergence(trace: DensityTrace, sigma: float | None = None, threshold: float = 8.0) -> ConvergenceDiagnosis:
    """Flag words whose late densities swing up and down by more than
    ``threshold`` sigma.  sigma defaults to the worst-case binomial value
    sqrt(1/(4n)) with n the smallest sample count in the late window."""
    times = list(trace.times)
    if len(times) < 16:
        raise ConfigError(f"need at least 16 checkpoints, got {len(times)}")
    late = slice(len(times) // 2, len(times))
    if sigma is None:
        n = min(trace.samples[late]) if trace.samples else 1
        sigma = math.sqrt(0.25 / max(n, 1))
    words = []
    flagged = False
    moving = False
    for j, w in enumerate(trace.words):
        vals = np.asarray(trace.values[:, j], dtype=float)
        ces = vals if trace.mode == CESARO else _running_mean(times, vals)
        lv, lc, lt = vals[late], ces[late], times[late]
        rise, ri, rj, fall, fi, fj = _rise_fall(lv)
        score = min(rise, fall) / sigma if sigma > 0 else math.inf
        d = WordDiagnosis(w, _slope(lt, lv), _slope(lt, lc), score, float(lv.max() - lv.min()), float(lc.max() - lc.min()))
        if score > threshold:
            flagged = True
            i_max, i_min = int(np.argmax(lv)), int(np.argmin(lv))
            d.gap_times = (int(lt[i_max]), int(lt[i_min]))
            d.gap = float(lv[i_max] - lv[i_min])
        else:
            # monotone drift still above noise in the last quarter means the limit is not yet visible
            tail = vals[len(times) - max(2, len(times) // 4) :]
            if tail.max() - tail.min() > threshold * sigma:
                moving = True
        words.append(d)
    verdict = OSCILLATION if flagged else (UNDETERMINED if moving else SIMPLE)
    return ConvergenceDiagnosis(verdict, sigma, threshold, words)


# ---------------------------------------------------------------------------
# nilpotency probe

NILPOTENT = "nilpotent-likely"
NOT_NILPOTENT = "not-nilpotent-likely"


@dataclass
class NilpotencyReport:
    verdict: str
    persistent_symbols: list[str]
    vanishing_symbols: list[str]
    last_values: dict

    def to_json(self) -> dict:
        return asdict(self)


def nilpotency_probe(rule: LocalRule, measure: BernoulliMeasure, horizon: int, width: int | None = None, replicas: int = 2, seed: int = 0) -> NilpotencyReport:
    """Heuristic probe of whether all symbols but one vanish.

    The underlying question is Pi^0_3-complete, and convergence to the
    limit may take longer than any computable horizon, so the answer is a
    finite-horizon statistical guess.
    """
    width = width or 2 * rule.radius * horizon + 20_000
    states = list(measure.alphabet.states)
    verdicts = estimate_persistence(rule, measure, states, horizon, replicas, width, seed)
    pers = [v.word for v in verdicts if v.verdict == PERSISTENT]
    van = [v.word for v in verdicts if v.verdict == VANISHING]
    if len(pers) >= 2:
        verdict = NOT_NILPOTENT
    elif len(pers) == 1 and len(van) == len(states) - 1:
        verdict = NILPOTENT
    else:
        verdict = UNDETERMINED
    return NilpotencyReport(verdict, pers, van, {v.word: v.last_value for v in verdicts})
