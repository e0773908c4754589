import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mulimit.engine import EXACT, TORUS, Window, apply_rule, evolve, rule_from_json
from mulimit.errors import ConfigError, MalformedRow
from mulimit.sequences import FunctionGenerator, GrowingSequenceSpec
from mulimit.toolbox import (
    AREAS,
    SEGMENTS,
    AreasConfig,
    ConstructionParams,
    KineticRule,
    LayeredCodec,
    RowKinetics,
    SegmentConfig,
    SegmentEngine,
    areas_codec,
    areas_rule,
    build_construction,
    merge_time,
    random_neighbourhoods,
    reliable_mask,
    rule_from_params,
    run_areas,
    seed_image_audit,
    segment_codec,
    segment_report,
    stage_of,
    unreliable_probability,
    validate_params,
)
from mulimit.toolbox.segments import sample_row
from mulimit.toolbox.states import RADIX
from mulimit.toolbox.colouring import _flip, synchronized_mask

P = ConstructionParams()
CODEC = segment_codec(P)
RULE = KineticRule(CODEC)


def fixed_words(w: str) -> GrowingSequenceSpec:
    return GrowingSequenceSpec(FunctionGenerator(lambda i: (w, 1, 1), name=f"fixed-{w}"), name=w)


def particles_at(row: Window, codec: LayeredCodec):
    """[(kind, direction, absolute position)] of every particle in the row."""
    out = []
    for k, c in enumerate(row.cells):
        st_ = codec.decode(int(c))
        for kind, d, off, attr in st_.particles():
            out.append((kind, d, Fraction(row.origin + k) + Fraction(off).limit_denominator(48)))
        if st_.data and st_.data[0] == "delim":
            out.append(("D", 0, Fraction(row.origin + k)))
    return out


# ---------------------------------------------------------------------------
# parameters


def test_validate_params_examples():
    assert validate_params(P).ok
    assert not validate_params(ConstructionParams(s_i=Fraction(1, 4))).ok
    bad = validate_params(ConstructionParams(s_o=Fraction(1, 5)))
    assert not bad.ok and any("outer" in c.name for c in bad.violations)


def test_merge_schedule_examples():
    assert [merge_time(2, i) for i in (1, 2, 3, 4, 9, 100)] == [2, 3, 4, 4, 8, 1024]
    assert P.write_start(100) == 1024 + (merge_time(2, 101) - 1024) // 2


@given(st.integers(2, 10**6))
def test_stage_brackets_time(t):
    i = stage_of(2, t)
    assert merge_time(2, i) <= t < merge_time(2, i + 1)


def test_rule_only_for_implemented_speeds():
    with pytest.raises(ConfigError):
        rule_from_params({"K": 3})


@given(st.integers(0, CODEC.size - 1))
@settings(max_examples=300)
def test_codec_roundtrip(code):
    assert CODEC.encode(CODEC.decode(code)) == code
    assert CODEC.index(CODEC.name(code)) == code


# ---------------------------------------------------------------------------
# cleaning layer scenarios


def test_single_seed_borders_follow_closed_form():
    W = 400
    cells = np.zeros(W, dtype=np.int64)
    cells[200] = CODEC.seed(0)
    tr = evolve(RULE, Window(cells, 0, TORUS), 120, record="all")
    for t, row in zip(tr.times[1:], tr.rows[1:]):
        ps = particles_at(row, CODEC)
        got = {(k, d): x for k, d, x in ps}
        assert got[("N", 1)] - got[("N", -1)] == 2 * Fraction(t, 5)
        assert got[("O", 1)] == 200 + Fraction(t, 4)
        assert got[("O", -1)] == 200 - Fraction(t, 4)
        # inner distance is 2*floor(t/5) up to the sub-cell phase
        assert abs((got[("N", 1)] - got[("N", -1)]) - 2 * (t // 5)) < 2


def test_young_counter_survives_old_one():
    W, off = 300, 120
    cells = np.zeros(W, dtype=np.int64)
    cells[off] = CODEC.seed(0)
    v = [0] * 9
    v[1] = 1  # a closed outer border moving left
    cells[off + 50] = CODEC.with_particles(0, v)
    v = [0] * 9
    v[3] = 1  # its inner border
    cells[off + 52] = CODEC.with_particles(0, v)
    tr = evolve(RULE, Window(cells, 0, EXACT), 140, record="all")
    old_gone = None
    for t, row in zip(tr.times, tr.rows):
        ps = particles_at(row, CODEC)
        young_inner = [x for k, d, x in ps if k == "N" and d == 1 and x < off + 40]
        old_outer = [x for k, d, x in ps if k == "O" and d == -1 and x > off]
        if young_inner and old_outer:
            # the old outer border never reaches the young inner border
            assert min(old_outer) > max(young_inner)
        if old_gone is None and t > 0 and not old_outer:
            old_gone = t
    assert old_gone is not None
    last = particles_at(tr.rows[-1], CODEC)
    assert ("N", 1, off + Fraction(140, 5)) in last
    assert ("O", 1, off + Fraction(140, 4)) in last
    assert not [p for p in last if p[1] == -1 and p[0] in ("O", "N")]


@pytest.mark.parametrize("g", [5, 6, 7, 12, 13, 30])
def test_equal_age_collision_leaves_midpoint_delimiter(g):
    W = 8 * g
    cells = np.zeros(W, dtype=np.int64)
    cells[0] = CODEC.seed(0)
    cells[g] = CODEC.seed(0)
    horizon = math.ceil(Fraction(20 * g, 9)) + 2
    tr = evolve(RULE, Window(cells, 0, TORUS), horizon, record="all")
    births = []
    for t, row in zip(tr.times, tr.rows):
        ds = [x for k, d, x in particles_at(row, CODEC) if k == "D"]
        if ds and not births:
            births.append((t, ds))
    t_d, ds = births[0]
    # created at 13g/6; an event exactly on a step boundary shows in the next row
    assert t_d == math.floor(Fraction(13 * g, 6)) + 1
    assert ds == [Fraction(g, 2)]
    # both counters facing each other are gone, the outer sides remain
    last = particles_at(tr.rows[-1], CODEC)
    inside = [p for p in last if 0 < p[2] < g and p[0] != "D"]
    assert inside == []


def _random_row(codec, rng, W, p_seed=0.05, p_junk=0.2):
    cells = np.zeros(W, dtype=np.int64)
    parts, seeds = {}, []
    for z in range(W):
        u = rng.random()
        if u < p_seed:
            cells[z] = codec.seed(0)
            seeds.append(z)
        elif u < p_seed + p_junk:
            v = [0] * 9
            for _ in range(rng.integers(1, 3)):
                s = int(rng.integers(0, 9))
                v[s] = int(rng.integers(1, RADIX[s]))
            cells[z] = codec.with_particles(0, v)
            parts[z] = v
    return cells, parts, seeds


@pytest.mark.parametrize("variant", [SEGMENTS, AREAS])
@pytest.mark.parametrize("seed", range(6))
def test_local_rule_matches_global_simulation(variant, seed):
    codec = CODEC if variant == SEGMENTS else areas_codec()
    rule = RULE if variant == SEGMENTS else areas_rule(codec)
    rng = np.random.default_rng(seed)
    cells, parts, seeds = _random_row(codec, rng, 120)
    w = Window(cells, 0, EXACT)
    row = RowKinetics(variant)
    cur = parts
    delim = codec.q2.index("delim") if "delim" in codec.q2 else None
    for t in range(25):
        w = apply_rule(rule, w)
        cur = row.step(cur, tuple(seeds) if t == 0 else ())
        for k, c in enumerate(w.cells):
            z = w.origin + k
            vals = codec.particle_values(int(c))
            data = codec.data_indices(int(c))
            if vals is None:
                vals = [0] * 8 + [17] if data is not None and data[0] == delim else [0] * 9
            assert vals == cur.get(z, [0] * 9), (variant, seed, t, z)


@pytest.mark.parametrize("mix", ["uniform", "sparse"])
def test_no_neighbourhood_creates_a_seed(mix):
    nb = random_neighbourhoods(CODEC, 20_000, seed=3, mix=mix)
    assert seed_image_audit(RULE, nb) == 0


def test_construction_builds_and_serialises():
    rule = rule_from_params({"reschedule": False})
    assert seed_image_audit(rule, random_neighbourhoods(rule.codec, 2000, seed=1, mix="sparse")) == 0
    again = rule_from_json(rule.to_json())
    assert again.params == rule.params
    assert rule_from_json(areas_rule().to_json()).variant == AREAS


def test_no_seed_means_nothing_happens():
    rng = np.random.default_rng(0)
    w = Window(rng.integers(0, CODEC.nq0, 200), 0, EXACT)
    tr = evolve(RULE, w, 40)
    assert np.all(CODEC.secondary_index(tr.rows[-1].cells) == 0)
    assert not reliable_mask(w, 40, P).any()


# ---------------------------------------------------------------------------
# reliability


def test_reliable_mask_cones():
    cells = np.zeros(101, dtype=np.int64)
    cells[50] = CODEC.seed(0)
    w = Window(cells, -50, EXACT)
    m = reliable_mask(w, 23, P)
    assert np.nonzero(m)[0].tolist() == list(range(50 - 4, 50 + 5))
    cells = cells.copy()
    cells[80] = CODEC.seed(0)
    m2 = reliable_mask(Window(cells, -50, EXACT), 23, P)
    assert np.nonzero(m2)[0].tolist() == list(range(46, 55)) + list(range(76, 85))


def test_unreliable_fraction_matches_closed_form():
    cfg = SegmentConfig(width=200_000, p_seed=0.1, seed=4)
    w = sample_row(CODEC, cfg)
    for t in (5, 20, 50):
        q = unreliable_probability(t, 0.1, P)
        emp = 1 - reliable_mask(w, t, P).mean()
        # cone misses of neighbouring cells are correlated; 4 sigma of a
        # binomial on width / (2r + 1) blocks is a safe bound
        r = 2 * (t // 5) + 1
        sigma = math.sqrt(q * (1 - q) * r / cfg.width)
        assert abs(emp - q) <= 4 * sigma + 1e-12


# ---------------------------------------------------------------------------
# the colouring automaton


@given(st.lists(st.sampled_from([0, 1, 2]), min_size=3, max_size=40))
def test_quiet_rows_only_flip(cells):
    codec = areas_codec()
    rule = areas_rule(codec)
    w = Window(np.array(cells, dtype=np.int64), 0, TORUS)
    assert np.array_equal(apply_rule(rule, w).cells, _flip(codec, w.cells))


def test_colouring_synchronizes_small():
    cfg = AreasConfig(width=20_000, horizon=400, p_seed=0.1, seed=2, checkpoints=(398, 399, 400))
    run = run_areas(cfg)
    assert run.quiet_from is not None and run.quiet_from < 350
    assert run.times[0] == 0 and min(run.synchronized[1:]) >= 0.99
    assert abs(run.black[-1] - run.black[-2]) > 0.9
    codec = areas_codec()
    assert synchronized_mask(codec, run.final.cells, 400).mean() >= 0.99


# ---------------------------------------------------------------------------
# segments


def test_segment_report_examples():
    cells = np.zeros(40, dtype=np.int64)
    cells[10] = CODEC.data_code(0, "delim")
    cells[20] = CODEC.data_code(0, "delim")
    rep = segment_report(Window(cells, 0, EXACT), 64, P)
    assert [(s.z1, s.z2, s.size) for s in rep.segments] == [(11, 19, 9)]
    assert rep.delimiters == [10, 20]
    # size 9 at stage 36 (t = 64) is a violation
    assert rep.stage == 36 and rep.violations


def test_segment_report_rejects_stray_head():
    cells = np.zeros(30, dtype=np.int64)
    cells[5] = CODEC.data_code(0, "head")
    with pytest.raises(MalformedRow):
        segment_report(Window(cells, 0, EXACT), 10, P)
    with pytest.raises(MalformedRow):
        segment_report(Window(np.array([CODEC.size]), 0, EXACT), 10, P)


def _engine(delims, W=200, t=0, p=P, w="ab", wp="cd", base=None):
    rule = build_construction(fixed_words(w), fixed_words(wp), ConstructionParams(**{**p.to_json(), "reschedule": False}))
    base = np.zeros(W, dtype=np.int64) if base is None else base
    return SegmentEngine.from_delimiters(rule, rule.params, rule.seq_w, rule.seq_wp, base, delims, t)


def test_three_small_segments_merge_into_one():
    eng = _engine([0, 3, 6, 9, 100])
    eng.merge_round(5, P.t(5))
    merges = [e for e in eng.events if e["kind"] == "merge"]
    assert len(merges) == 1 and merges[0]["members"] == 3 and merges[0]["sizes"] == [2, 2, 2]
    assert eng.delims == [0, 9, 100]


def test_lone_small_segment_merges_left():
    eng = _engine([0, 50, 53, 120])
    eng.merge_round(5, P.t(5))
    assert eng.delims == [0, 53, 120]


def test_large_segments_stay():
    eng = _engine([0, 50, 120])
    eng.merge_round(5, P.t(5))
    assert eng.delims == [0, 50, 120] and not eng.events


def test_writing_round_in_a_wide_window():
    # at stage 400 the window is long enough for the whole protocol
    p = ConstructionParams(wait_policy="measured")
    i, t = 400, P.t(400)
    eng = _engine([0, 600], W=2000, t=t, p=p)
    eng.start_round(i, t)
    assert not [e for e in eng.events if e["kind"] == "deadline_miss"]
    t1, t_next = p.write_start(i), p.t(i + 1)
    seg = next(b for b in eng.segments() if b.left == 0)
    r = seg.round
    assert r["good"] and r["end_d"] < t_next

    mid = r["start_b"] + 2 * 300
    rep = segment_report(Window(eng.materialize(mid), 0, TORUS), mid, p)
    s = next(s for s in rep.segments if s.z1 == 1)
    assert s.v[1] == ("ab#" * 200)[:300] and len(s.v[2]) == 1

    end = t_next - 1
    rep = segment_report(Window(eng.materialize(end), 0, TORUS), end, p)
    s = next(s for s in rep.segments if s.z1 == 1)
    assert s.v2_empty and s.v3_empty
    assert s.v[1] == ("cd#" * 300)[: r["m"]]
    assert len(s.v[0]) <= math.isqrt(i) + p.counter_width(end) and len(s.v[4]) == p.counter_width(end)
    assert s.well_sized and s.admissible


def test_oversized_segment_stops_after_return():
    p = ConstructionParams(cap_exponent=2)
    i, t = 400, P.t(400)
    eng = _engine([0, 170_000], W=200_000, t=t, p=p)
    eng.start_round(i, t)
    big = next(b for b in eng.segments() if b.left == 0)
    assert not big.round["well"] and "start_d" not in big.round
    assert eng._head(big, big.round["back"]) is None


def test_engine_rows_decode_to_engine_segments():
    rule = build_construction(fixed_words("ab"), fixed_words("cd"), ConstructionParams(reschedule=False))
    cfg = SegmentConfig(width=6000, p_seed=0.1, seed=5)
    init = sample_row(rule.codec, cfg)
    eng = rule.engine(init)
    checked = []

    def check(snap):
        cells = eng.materialize(snap.t)
        rel = reliable_mask(init, snap.t, rule.params)
        rep = segment_report(Window(cells, 0, TORUS), snap.t, rule.params, reliable=rel)
        mine = sorted((s["left"] + 1, s["size"]) for s in snap.segments)
        theirs = sorted((s.z1, s.size) for s in rep.segments)
        assert mine == theirs
        checked.append(snap.t)

    eng.run(200, (30, 90, 150, 200), on_snapshot=check)
    assert checked == [30, 90, 150, 200]


def test_delimiters_born_where_closed_form_says():
    rule = build_construction(fixed_words("ab"), fixed_words("ab"), ConstructionParams(reschedule=False))
    cfg = SegmentConfig(width=3000, p_seed=0.05, seed=8)
    init = sample_row(rule.codec, cfg)
    seeds = np.nonzero(rule.codec.secondary_index(init.cells) == 1)[0].tolist()
    expect = set()
    for a, b in zip(seeds, seeds[1:] + [seeds[0] + cfg.width]):
        g = b - a
        expect.add(((a + g // 2) % cfg.width, 13 * g // 6 + 1))
    eng = rule.engine(init)
    eng.run(max(t for _, t in expect) + 1)
    got = {(e["cell"], e["t"]) for e in eng.events if e["kind"] == "delimiter"}
    assert got == expect
    assert not [e for e in eng.events if e["kind"] == "delimiter_lost"]


def test_run_checkpoints_include_start():
    rule = rule_from_params(P)
    cfg = SegmentConfig(width=2000, horizon=30, seed=1, checkpoints=(0, 10, 30))
    seen = []
    snaps = rule.engine(sample_row(rule.codec, cfg)).run(cfg.horizon, cfg.checkpoints, on_snapshot=lambda s: seen.append(s.t))
    assert [s.t for s in snaps] == seen == [0, 10, 30]
