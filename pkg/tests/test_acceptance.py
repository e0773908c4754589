"""Acceptance suite: fifteen criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` or directly with
``python tests/test_acceptance.py [numbers...]``.  Each ``criterion_N``
returns ``(ok, detail)``; the tests only assert on ``ok``.
"""

from __future__ import annotations

import functools
import itertools
import math
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from mulimit.analysis import PROVEN_BY_CYCLE, REFUTED, check_wall, persistent_language_via_wall, replay_witness
from mulimit.engine import EXACT, TORUS, Alphabet, Window, apply_rule, binary_alphabet, compose_power, eca_rule, evolve, identity_rule, max_rule, random_table_rule, spreading_rule
from mulimit.measure import BernoulliMeasure, binomial_sigma, brute_force_pushforward, exact_pushforward, sample_window, words_of_length
from mulimit.sequences import (
    ConstantGenerator,
    ExponentialGenerator,
    GrowingSequenceSpec,
    Markers,
    cantor_unpair,
    cof_witness,
    eval_sequence,
    halting_tm,
    is_in_order_stutter,
    looping_tm,
    reschedule,
    slow_convergence_sequence,
)
from mulimit.stats import count_in_row, occurrences
from mulimit.toolbox import (
    AreasConfig,
    ConstructionParams,
    KineticRule,
    SegmentConfig,
    areas_rule,
    build_construction,
    random_neighbourhoods,
    rule_from_params,
    run_areas,
    run_construction,
    seed_image_audit,
    segment_codec,
    segment_report,
    unreliable_probability,
)
from mulimit.toolbox.segments import sample_row
from mulimit.toolbox.colouring import synchronized_mask

B = binary_alphabet()
MU0 = BernoulliMeasure.uniform(B)
P = ConstructionParams()


def _count(row: np.ndarray, alphabet: Alphabet, u: str) -> int:
    return count_in_row(row, np.asarray(alphabet.encode(u)))


def _hits(row: np.ndarray, alphabet: Alphabet, u: str) -> np.ndarray:
    enc = alphabet.encode(u)
    n = len(row) - len(enc) + 1
    hit = np.ones(n, dtype=bool)
    for k, c in enumerate(enc):
        hit &= row[k : k + n] == c
    return hit


# ---------------------------------------------------------------------------
# 1-5: oracle, sampling and the simple automata


def criterion_1():
    t0 = time.perf_counter()
    got = {t: exact_pushforward(max_rule(), MU0, "0", t) for t in range(1, 6)}
    elapsed = time.perf_counter() - t0
    ok = all(v == Fraction(1, 2 ** (2 * t + 1)) for t, v in got.items()) and elapsed < 10
    return ok, f"P(0 at t) = {', '.join(str(got[t]) for t in got)}; {elapsed:.2f}s"


def criterion_2():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    checked = mismatches = 0
    for _ in range(50):
        rule = random_table_rule(B, 1, rng)
        raw = rng.integers(1, 8, 2)
        m = BernoulliMeasure(B, tuple(Fraction(int(x), int(raw.sum())) for x in raw))
        for t in range(1, 4):
            for n in range(1, 4):
                for u in words_of_length(B, n):
                    checked += 1
                    if exact_pushforward(rule, m, u, t) != brute_force_pushforward(rule, m, u, t):
                        mismatches += 1
    elapsed = time.perf_counter() - t0
    return mismatches == 0 and elapsed < 60, f"{checked} (rule, t, word) cases, {mismatches} mismatches; {elapsed:.1f}s"


def criterion_3():
    t0 = time.perf_counter()
    words = [u for n in range(1, 4) for u in words_of_length(B, n)]
    worst, worst_blocks, cases, bad = 0.0, 0.0, 0, []
    for name, rule in (("max", max_rule()), ("eca-184", eca_rule(184))):
        exact = {(t, u): float(exact_pushforward(rule, MU0, u, t)) for t in range(1, 5) for u in words}
        for seed in range(3):
            tr = evolve(rule, sample_window(MU0, 100_000, seed, EXACT), 4, record="all")
            for t in range(1, 5):
                row = tr.rows[t].cells
                for u in words:
                    n = len(row) - len(u) + 1
                    p = exact[(t, u)]
                    z = abs(_count(row, B, u) / n - p) / binomial_sigma(p, n) if 0 < p < 1 else 0.0
                    worst = max(worst, z)
                    # reported only: occurrences cluster, block means see the real spread
                    hits = _hits(row, B, u)
                    se = hits[: len(hits) // 200 * 200].reshape(200, -1).mean(axis=1).std(ddof=1) / math.sqrt(200)
                    if se > 0:
                        worst_blocks = max(worst_blocks, abs(hits.mean() - p) / se)
                    cases += 1
                    if z > 4:
                        bad.append((name, seed, t, u, round(z, 2)))
    elapsed = time.perf_counter() - t0
    return not bad and elapsed < 60, f"{cases} comparisons, max |z| = {worst:.2f} (binomial sigma), outside 4 sigma: {bad[:3]}; max |z| with block-means sigma {worst_blocks:.2f}; {elapsed:.1f}s"


def criterion_4():
    t0 = time.perf_counter()
    W, cps = 10**6, (10, 100, 1000, 5000)
    tr = evolve(eca_rule(184), sample_window(MU0, W, 184, TORUS), 5000, record=set(cps))
    d = {}
    for t, row in zip(tr.times, tr.rows):
        if t in cps:
            d[t] = {u: _count(row.cells, B, u) / W for u in ("00", "01", "10")}
    d00 = [d[t]["00"] for t in cps]
    sig = [binomial_sigma(x, W) for x in d00]
    drops = all(a - b > 4 * math.hypot(sa, sb) for a, b, sa, sb in zip(d00, d00[1:], sig, sig[1:]))
    final = d[5000]
    alt = final["01"] + final["10"]
    elapsed = time.perf_counter() - t0
    ok = final["00"] < 0.02 and alt > 0.95 and drops and elapsed < 600
    trail = ", ".join(f"{x:.4f}" for x in d00)
    return ok, f"density(00) at {cps}: {trail}; 01+10 = {alt:.4f}; decreasing beyond 4 sigma: {drops}; {elapsed:.0f}s"


def criterion_5():
    p = Fraction(1, 10)
    bases = {"identity": identity_rule(B), "max": max_rule(), "eca-184": eca_rule(184)}
    exact_ok = True
    for base in bases.values():
        rule = spreading_rule("s", base)
        a = rule.alphabet
        m = BernoulliMeasure(a, (Fraction(9, 20), Fraction(9, 20), p))
        cond = BernoulliMeasure.uniform(B)  # the base measure conditioned on no spreading state
        for t in range(1, 4):
            for u in ("0", "1", "01", "11"):
                dp = exact_pushforward(rule, m, u, t)
                closed = (1 - p) ** (len(u) + 2 * t) * exact_pushforward(base, cond, u, t)
                brute = brute_force_pushforward(rule, m, u, t)
                exact_ok &= dp == closed == brute
    # empirical: non-spreading cells vanish
    rule = spreading_rule("s", eca_rule(184))
    m = BernoulliMeasure(rule.alphabet, (0.45, 0.45, 0.1))
    tr = evolve(rule, sample_window(m, 100_000, 5, TORUS), 1000, record={1000})
    frac = float(np.mean(tr.rows[-1].cells != 2))
    ok = exact_ok and frac < 0.01
    return ok, f"DP = closed form = brute force for 3 bases, t <= 3: {exact_ok}; non-spreading fraction at t=1000: {frac:.2e}"


# ---------------------------------------------------------------------------
# 6-11: the layered construction

CODEC = segment_codec(P)
CLEAN = KineticRule(CODEC)


def _particles(row: Window):
    out = []
    for k, c in enumerate(row.cells):
        s = CODEC.decode(int(c))
        for kind, d, off, _ in s.particles():
            out.append((kind, d, Fraction(row.origin + k) + Fraction(off).limit_denominator(48)))
        if s.data and s.data[0] == "delim":
            out.append(("D", 0, Fraction(row.origin + k)))
    return out


def _young_old() -> tuple[bool, str]:
    # seed at 120 (young); an old counter's left-moving outer and inner borders to its right
    off = 120
    cells = np.zeros(300, dtype=np.int64)
    cells[off] = CODEC.seed(0)
    v = [0] * 9
    v[1] = 1
    cells[off + 50] = CODEC.with_particles(0, v)
    v = [0] * 9
    v[3] = 1
    cells[off + 52] = CODEC.with_particles(0, v)
    tr = evolve(CLEAN, Window(cells, 0, EXACT), 140, record="all")
    erased_at, crossed = None, False
    for t, row in zip(tr.times, tr.rows):
        ps = _particles(row)
        young_inner = [x for k, d, x in ps if k == "N" and d == 1 and x < off + 40]
        old_outer = [x for k, d, x in ps if k == "O" and d == -1 and x > off]
        if young_inner and old_outer and min(old_outer) <= max(young_inner):
            crossed = True
        if erased_at is None and t > 0 and not old_outer:
            erased_at = t
    last = _particles(tr.rows[-1])
    young_ok = ("N", 1, off + Fraction(140, 5)) in last and ("O", 1, off + Fraction(140, 4)) in last
    return erased_at is not None and not crossed and young_ok, f"old outer erased at t={erased_at}, crossed={crossed}"


def _equal_age(g: int) -> tuple[bool, str]:
    cells = np.zeros(8 * g, dtype=np.int64)
    cells[0] = CODEC.seed(0)
    cells[g] = CODEC.seed(0)
    tr = evolve(CLEAN, Window(cells, 0, TORUS), math.ceil(Fraction(20 * g, 9)) + 2, record="all")
    for t, row in zip(tr.times, tr.rows):
        ds = [x for k, _, x in _particles(row) if k == "D"]
        if ds:
            return ds == [Fraction(g, 2)], f"gap {g}: delimiter at {', '.join(map(str, ds))} at t={t}"
    return False, f"gap {g}: no delimiter"


def criterion_6():
    t0 = time.perf_counter()
    yo, yo_msg = _young_old()
    eq = [_equal_age(g) for g in (6, 12, 30)]
    seeds = seed_image_audit(CLEAN, random_neighbourhoods(CODEC, 100_000, seed=6))
    elapsed = time.perf_counter() - t0
    ok = yo and all(e[0] for e in eq) and seeds == 0 and elapsed < 60
    return ok, f"{yo_msg}; {'; '.join(m for _, m in eq)}; seed images in 1e5 neighbourhoods: {seeds}; {elapsed:.1f}s"


MERGE_SEEDS = range(5)
MERGE_WIDTH = 200_000
EARLY = (5, 10, 20, 40, 80, 160)
STAGE_TIMES = tuple(sorted({P.t(i) for i in range(1, 101)}))


@functools.lru_cache(maxsize=None)
def merge_runs():
    """The five runs through t_100 = 1024, shared by criteria 7 to 9."""
    rule = rule_from_params(P)
    out = []
    for seed in MERGE_SEEDS:
        t0 = time.perf_counter()
        cfg = SegmentConfig(width=MERGE_WIDTH, horizon=P.t(100), p_seed=0.1, seed=seed, checkpoints=tuple(sorted(set(EARLY) | set(STAGE_TIMES))))
        snaps, eng = run_construction(rule, cfg)
        out.append((snaps, eng, time.perf_counter() - t0))
    return out


def criterion_7():
    runs = merge_runs()
    elapsed = sum(r[2] for r in runs)
    violations = sum(1 for _, eng, _ in runs for e in eng.events if e["kind"] == "size_violation")
    many = sum(1 for _, eng, _ in runs for e in eng.events if e["kind"] == "merge" and sum(1 for s in e["sizes"] if s > 0) >= 2)
    # second route: decode the final rows and check them against the stage bound
    decoded = 0
    for _, eng, _ in runs:
        rep = segment_report(Window(eng.materialize(eng.t), 0, TORUS), eng.t, P, CODEC)
        decoded += len(rep.violations)
    last = max((e["t"] for _, eng, _ in runs for e in eng.events if e["kind"] == "size_violation"), default=None)
    ok = violations == 0 and decoded == 0 and many > 0 and elapsed < 1800
    return ok, f"size violations (segment size <= i during [t_i, t_(i+1))): {violations}, latest at t={last}; in decoded rows at t=1024: {decoded}; many-to-one merges: {many}; {elapsed:.0f}s"


def criterion_8():
    snaps = merge_runs()[0][0]
    by_t = {s.t: s.unreliable for s in snaps}
    lines, ok = [], True
    for t in EARLY:
        q = unreliable_probability(t, 0.1, P)
        # misses of neighbouring cells are correlated over one inner cone
        r = 2 * (t // 5) + 1
        sigma = math.sqrt(q * (1 - q) * r / MERGE_WIDTH)
        ok &= by_t[t] <= q + 4 * sigma
        lines.append(f"t={t}: {by_t[t]:.4g} vs {q:.4g}")
    vals = [by_t[t] for t in EARLY]
    decreasing = all(a > b for a, b in zip(vals, vals[1:]))
    return ok and decreasing, "; ".join(lines) + f"; strictly decreasing: {decreasing}"


# pilot: seed 100, width 2e5, fraction of cells in well-sized segments at t_1 and t_100
PILOT_WELL_SIZED = (0.0, 0.994)
WELL_SIZED_GAIN = 0.2


def criterion_9():
    runs = merge_runs()
    f = np.array([[s.well_sized_cells for s in snaps if s.t in STAGE_TIMES] for snaps, _, _ in runs])
    nseg = np.array([[max(len(s.segments), 1) for s in snaps if s.t in STAGE_TIMES] for snaps, _, _ in runs]).mean(axis=0)
    mean = f.mean(axis=0)
    # cells of one segment move together: binomial over segments, or the seed spread if larger
    sig = np.maximum(f.std(axis=0, ddof=1), np.sqrt(mean * (1 - mean) / nseg)) / math.sqrt(len(runs))
    worst = min((mean[k + 1] - mean[k]) / max(math.hypot(sig[k], sig[k + 1]), 1e-12) for k in range(len(mean) - 1))
    monotone = all(mean[k + 1] >= mean[k] - 4 * math.hypot(sig[k], sig[k + 1]) for k in range(len(mean) - 1))
    gain = mean[-1] - mean[0]
    ok = monotone and gain >= WELL_SIZED_GAIN
    return ok, f"well-sized fraction {mean[0]:.3f} at t_1 -> {mean[-1]:.3f} at t_100 (pilot {PILOT_WELL_SIZED[1]}); worst step {worst:.1f} sigma; gain {gain:.3f}"


def _fixed(word: str, name: str) -> GrowingSequenceSpec:
    return GrowingSequenceSpec(ConstantGenerator(word, 0), name=name)


LONG_WIDTH = 200_000
LONG_STAGE = 440  # horizon t_441 - 1 = 2^21 - 1; rescheduled words are empty below i = 410
LONG_GRID = 4096


@functools.lru_cache(maxsize=None)
def long_run():
    """(ab)^i / (cd)^i through t_441 - 1, shared by criteria 10 and 11."""
    rule = build_construction(_fixed("ab", "ab"), _fixed("cd", "cd"), P)
    horizon = P.t(LONG_STAGE + 1) - 1
    ends = tuple(P.t(i + 1) - 1 for i in range(LONG_STAGE - 2, LONG_STAGE + 1))
    grid = tuple(range(0, horizon + 1, LONG_GRID))
    cfg = SegmentConfig(width=LONG_WIDTH, horizon=horizon, p_seed=0.1, seed=11, checkpoints=tuple(sorted(set(ends) | set(grid))))
    ab, cd = np.array([0, 1]), np.array([2, 3])
    series = {}

    t0 = time.perf_counter()
    eng = rule.engine(sample_row(rule.codec, cfg), ("ab", "cd"))

    def record(s):
        if s.t % LONG_GRID == 0:
            cells = eng.materialize(s.t)
            plain = np.where(rule.codec.secondary_index(cells) == 0, cells, -1)
            series[s.t] = (count_in_row(plain, ab) / LONG_WIDTH, count_in_row(plain, cd) / LONG_WIDTH)

    snaps = eng.run(horizon, cfg.checkpoints, on_snapshot=record)
    return rule, snaps, eng, ends, series, time.perf_counter() - t0


def criterion_10():
    _, snaps, eng, ends, _, elapsed = long_run()
    at = {s.t: s for s in snaps}
    dens = [at[t].words["ab"][0] / max(at[t].words["ab"][1], 1) for t in ends]
    internal = [at[t].internal for t in ends]
    ok = min(dens) >= 0.6 and max(internal) < 0.05
    return ok, (
        f"'ab' density in good segments at the last three t_(i+1)-1: {', '.join(f'{x:.3f}' for x in dens)}; "
        f"internal-cell fraction: {', '.join(f'{x:.4f}' for x in internal)}; good cells {at[ends[-1]].good_cells:.3f}; {elapsed:.0f}s"
    )


def criterion_11():
    rule, _, _, _, series, _ = long_run()
    times = sorted(series)
    ab = np.array([series[t][0] for t in times])
    cd = np.array([series[t][1] for t in times])
    # windows [t_{i,1}, t_{i,3}] from the words actually computed in each stage
    outside = []
    for t, x in zip(times, ab):
        if x > 0.3:
            i = P.stage(t)
            w = eval_sequence(rule.seq_w, i)[0]
            wp = eval_sequence(rule.seq_wp, i)[0]
            t1, _, t3 = P.write_times(i, len(w), len(wp))
            if not t1 <= t <= t3:
                outside.append(t)
    # Cesaro averages over a uniform time grid (Riemann sum of the instantaneous densities)
    ces_ab, ces_cd = float(ab.mean()), float(cd.mean())
    ok = not outside and ces_ab < 0.1 and ces_cd > 0.3
    return ok, (
        f"grid points with instantaneous 'ab' > 0.3 outside [t_i1, t_i3]: {len(outside)} of {int((ab > 0.3).sum())} (first t={outside[0] if outside else None}); "
        f"Cesaro 'ab' = {ces_ab:.3f}, 'cd' = {ces_cd:.3f} at t={times[-1]}"
    )


# ---------------------------------------------------------------------------
# 12-15


def criterion_12():
    t0 = time.perf_counter()
    H = 10**4
    cps = tuple(range(H - 4, H + 1))
    rule = areas_rule()
    run = run_areas(AreasConfig(width=10**6, horizon=H, p_seed=0.1, seed=0, checkpoints=cps), rule)
    at = {t: k for k, t in enumerate(run.times)}
    sync = run.synchronized[at[H]]
    # black dominates on one parity, white on the other
    gaps = [run.black[at[t]] - run.white[at[t]] for t in cps]
    parity = all(abs(g) > 0.9 for g in gaps) and all(np.sign(g) == np.sign(gaps[0]) * (-1) ** (t - cps[0]) for g, t in zip(gaps, cps))
    # second route: the squared rule fixes the final row and the mask agrees
    square = compose_power(rule, 2)
    fixed = apply_rule(square, run.final) == run.final
    mask = synchronized_mask(rule.codec, run.final.cells, H).mean()
    elapsed = time.perf_counter() - t0
    ok = sync >= 0.99 and mask >= 0.99 and parity and fixed
    return ok, f"synchronized {sync:.4f} at t={H} (mask {mask:.4f}); black-white gaps {', '.join(f'{g:+.3f}' for g in gaps)}; F^2 fixes final row: {fixed}; quiet from t={run.quiet_from}; {elapsed:.0f}s"


def criterion_13():
    t0 = time.perf_counter()
    one = check_wall(max_rule(), "1", 10)
    zero = check_wall(max_rule(), "0", 10)
    replay = zero.witness is not None and replay_witness(max_rule(), zero.witness)
    lang = persistent_language_via_wall(max_rule(), "1", 3, 3)
    elapsed = time.perf_counter() - t0
    ok = one.status == PROVEN_BY_CYCLE and zero.status == REFUTED and replay and sorted(lang) == ["1", "11", "111"] and elapsed < 60
    return ok, f"'1': {one.status}; '0': {zero.status} at t={zero.refuted_at}, witness replays: {replay}; language {sorted(lang)}; {elapsed:.1f}s"


def criterion_14():
    lines, ok = [], True
    for name, inner in (("fast", _fixed("ab", "fast")), ("exponential", GrowingSequenceSpec(ExponentialGenerator(ConstantGenerator("ab")), name="slow"))):
        spec = reschedule(inner, "i**2", "ceil(i**(2/3))")
        thr = spec.generator.threshold
        T, S = spec.time_bound, spec.space_bound
        reports = [eval_sequence(spec, i)[1] for i in range(1, 1001)]
        over = [r.index for r in reports if r.index >= thr and (r.steps > T(r.index) or r.cells > S(r.index))]
        words_ok = all(r.word == (inner.generator.word(r.source_index) if r.source_index is not None else "") for r in reports)
        stutter = is_in_order_stutter(reports)
        ok &= not over and words_ok and stutter
        lines.append(f"{name}: threshold {thr}, over budget {len(over)}, outputs match inputs {words_ok}, in-order stutter {stutter}")
    return ok, "; ".join(lines)


def criterion_15():
    m = Markers()
    ok_halt, low = True, math.inf
    spec = cof_witness(lambda j: halting_tm(0))
    gen = spec.generator
    seen = set()
    for i in range(60):
        code = cantor_unpair(i)[0]
        success, _ = gen.outcome(i)
        j, k, _ = gen.triple(i)
        w = eval_sequence(spec, i)[0]
        if code not in seen:
            seen.add(code)
            ok_halt &= success and w == (m.d0 + m.w * j + m.d1 + m.w * k + m.d2) * i
            if len(w) > j + 2:
                ratio = occurrences(w, m.d0 + m.w * j + m.d1) / (len(w) - (j + 2)) * (j + k + 2)
                low = min(low, ratio)
                ok_halt &= ratio >= 0.5
    never = cof_witness(lambda j: looping_tm())
    filler = all(set(eval_sequence(never, i)[0]) <= {m.w} for i in range(40))

    delays = {1: 4, 2: 9, 3: None, 4: 0}

    def machine(mm):
        d = delays.get(mm, mm)
        return looping_tm() if d is None else halting_tm(d)

    slow = slow_convergence_sequence(machine)
    sg = slow.generator
    first = {}
    slow_ok = True
    for i in range(300):
        mm = sg.enum(i)
        if sg.successful(i) and mm not in first:
            first[mm] = i
            slow_ok &= eval_sequence(slow, i)[0] == ("1" * (mm - 1) + "0") * i
    for mm, i in first.items():
        d = delays.get(mm, mm)
        slow_ok &= i == min(k for k in range(300) if sg.enum(k) == mm and k >= d)
    slow_ok &= 3 not in first
    ok = ok_halt and filler and slow_ok
    return ok, f"halting: marker density x (j+k+2) >= {low:.3f} (bound 0.5); never halting gives filler only: {filler}; slow convergence first feasible indices {dict(sorted(first.items())[:5])}: {slow_ok}"


# ---------------------------------------------------------------------------

CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 16)}


def verdict_line(n: int) -> tuple[bool, str]:
    try:
        ok, detail = CRITERIA[n]()
    except Exception as e:  # a crash is a failure, reported on the same line
        ok, detail = False, f"raised {type(e).__name__}: {e}"
    return ok, f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}"


@pytest.mark.parametrize("n", range(1, 16))
def test_criterion(n, capsys):
    ok, line = verdict_line(n)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    wanted = [int(a) for a in sys.argv[1:]] or list(CRITERIA)
    results = [verdict_line(n) for n in wanted]
    for _, line in results:
        print(line, flush=True)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
