"""Segment-level simulation of the centralization and computation layers.

The cleaning layer runs as the real radius-1 automaton.  Delimiter births
are read off its rows, and everything that happens between delimiters
(age counters, length measurement, merge negotiation, the writing head) is
advanced segment by segment with the timings of the local protocol.  Rows
can be materialised at any time as codes of the construction alphabet.
"""

from __future__ import annotations

import bisect
import heapq
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..engine import EXACT, TORUS, Window, apply_rule
from ..errors import ConfigError, MalformedRow
from ..sequences import GrowingSequenceSpec, eval_sequence
from .kinetics import KineticRule
from .params import ConstructionParams
from .states import RADIX, LayeredCodec

DELIM, ZONE, MEASURE, HEAD = "delim", "zone", "measure", "head"


def segment_codec(p: ConstructionParams) -> LayeredCodec:
    q2 = (DELIM, ZONE, MEASURE, HEAD) + tuple(f"c{k}" for k in range(p.K))
    return LayeredCodec(p.alphabet, q2, ("0",) + tuple(p.alphabet), seed_name=p.seed)


# ---------------------------------------------------------------------------
# reliability


def nearest_seed_distance(seeds: np.ndarray, width: int, torus: bool = True) -> np.ndarray:
    """Distance from every cell 0..width-1 to the closest seed (inf if none)."""
    z = np.arange(width)
    if len(seeds) == 0:
        return np.full(width, np.inf)
    s = np.sort(np.asarray(seeds, dtype=np.int64))
    if torus:
        s = np.concatenate([s - width, s, s + width])
    k = np.searchsorted(s, z)
    right = s[np.minimum(k, len(s) - 1)]
    left = s[np.maximum(k - 1, 0)]
    return np.minimum(np.abs(right - z), np.abs(z - left)).astype(float)


def reach_times(dist: np.ndarray, p: ConstructionParams) -> np.ndarray:
    """First time each cell lies in the inner cone of a seed: s_i * t >= dist."""
    num, den = p.s_i.numerator, p.s_i.denominator
    out = np.full(len(dist), np.iinfo(np.int64).max, dtype=np.int64)
    fin = np.isfinite(dist)
    d = dist[fin].astype(np.int64)
    out[fin] = -((-d * den) // num)
    return out


def seed_cells(codec: LayeredCodec, cells: np.ndarray) -> np.ndarray:
    return np.nonzero(codec.secondary_index(np.asarray(cells)) == 1)[0]


def reliable_mask(initial: Window, t: int, p: ConstructionParams, codec: LayeredCodec | None = None) -> np.ndarray:
    """Cells of ``initial`` inside the inner cone of one of its seeds at time t."""
    codec = codec or segment_codec(p)
    seeds = seed_cells(codec, initial.cells)
    dist = nearest_seed_distance(seeds, len(initial.cells), torus=initial.boundary == TORUS)
    return reach_times(dist, p) <= t


def unreliable_probability(t: int, p_seed: float, p: ConstructionParams) -> float:
    """Chance that no seed lies within the inner-cone radius floor(s_i t)."""
    r = math.floor(p.s_i * t)
    return (1 - p_seed) ** (2 * r + 1)


# ---------------------------------------------------------------------------
# engine


@dataclass(frozen=True)
class SegmentConfig:
    width: int = 200_000
    horizon: int = 1024
    p_seed: float = 0.1
    seed: int = 0
    checkpoints: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 < self.p_seed <= 1:
            raise ConfigError("p_seed must be in (0, 1]")
        if self.width < 3 or self.horizon < 0:
            raise ConfigError("width must be >= 3 and horizon >= 0")


def sample_row(codec: LayeredCodec, cfg: SegmentConfig) -> Window:
    """Seeds with probability p_seed, otherwise a uniform base symbol."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 31]))
    cells = rng.integers(0, codec.nq0, cfg.width).astype(np.int64)
    seeds = rng.random(cfg.width) < cfg.p_seed
    cells[seeds] = codec.seed(0) + cells[seeds]
    return Window(cells, 0, TORUS)


@dataclass
class Block:
    """Cells strictly between delimiters ``left`` and ``right`` (cyclic)."""

    left: int
    right: int
    ready: int  # first time every cell is reliable
    formed: int | None = None  # time it became a segment
    members: tuple[int, ...] = ()  # sizes of the segments merged into it at its birth
    born_merge: bool = False
    round: dict | None = None  # computation schedule of the current stage


@dataclass
class Snapshot:
    t: int
    stage: int
    unreliable: float
    segments: list[dict]
    delimiters: int
    internal: float
    well_sized_cells: float
    good_cells: float
    words: dict[str, tuple[int, int]]  # word -> (occurrences inside good segments, positions)


class SegmentEngine:
    """Runs the construction on a torus row and records snapshots.

    ``events`` collects JSON-ready dicts with at least ``t``, ``cell`` and
    ``kind``.
    """

    def __init__(self, rule: KineticRule, p: ConstructionParams, seq_w: GrowingSequenceSpec, seq_wp: GrowingSequenceSpec, initial: Window, words: tuple[str, ...] = ()):
        if initial.boundary != TORUS:
            raise ConfigError("the segment engine runs on a torus")
        self.rule = rule
        self.codec = rule.codec
        self.p = p
        self.seq = (seq_w, seq_wp)
        self.initial = initial
        self.W = len(initial.cells)
        self.words = words
        self.events: list[dict] = []
        self.q0 = (initial.cells % self.codec.nq0).astype(np.int64)
        seeds = seed_cells(self.codec, initial.cells)
        self.reach = reach_times(nearest_seed_distance(seeds, self.W), p)
        self.delims: list[int] = []  # sorted alive delimiter cells
        self.birth: dict[int, int] = {}
        self.blocks: dict[int, Block] = {}  # keyed by left delimiter
        self._pending: list[tuple[int, int, int]] = []  # (ready, left, right)
        self._words_cache: dict[tuple[int, int], str] = {}
        self.row = initial
        self.quiet = False
        self.t = 0
        self._d_code = self.codec.q2.index(DELIM)
        self._violations: set[tuple[int, int, int]] = set()

    @classmethod
    def from_delimiters(cls, rule: KineticRule, p: ConstructionParams, seq_w, seq_wp, base: np.ndarray, delimiters, t: int = 0, words=()) -> "SegmentEngine":
        """Engine standing at time t on a fully reliable torus with the given
        delimiters already in place (no particles left)."""
        eng = cls(rule, p, seq_w, seq_wp, Window(np.asarray(base, dtype=np.int64) % rule.codec.nq0, 0, TORUS), words)
        eng.reach[:] = 0
        eng.quiet = True
        eng.t = t
        for d in sorted(int(d) % eng.W for d in delimiters):
            eng._add_delimiter(d, t)
        eng.events.clear()
        return eng

    # -- helpers --------------------------------------------------------------

    def size(self, b: Block) -> int:
        return (b.right - b.left - 1) % self.W

    def cells_of(self, b: Block) -> np.ndarray:
        return (b.left + 1 + np.arange(self.size(b))) % self.W

    def _ready_time(self, left: int, right: int) -> int:
        n = (right - left - 1) % self.W
        idx = (left + 1 + np.arange(n)) % self.W
        return int(self.reach[idx].max()) if n else 0

    def _log(self, t: int, cell: int, kind: str, **kw) -> None:
        self.events.append({"t": t, "cell": int(cell), "kind": kind, **kw})

    def _neighbours(self, left: int) -> tuple[int, int]:
        k = bisect.bisect_left(self.delims, left)
        n = len(self.delims)
        return self.delims[(k - 1) % n], self.delims[(k + 1) % n]

    def _new_block(self, left: int, right: int, t: int, **kw) -> Block:
        b = Block(left, right, self._ready_time(left, right), **kw)
        self.blocks[left] = b
        if b.ready <= t and self.birth[left] <= t and self.birth[right] <= t:
            self._form(b, t)
        else:
            heapq.heappush(self._pending, (max(b.ready, t), left, right))
        return b

    def _form(self, b: Block, t: int) -> None:
        b.formed = t
        n = self.size(b)
        self._log(t, b.left, "segment", size=n, right=b.right)
        self._flag_size(b, self.p.stage(t), t)

    def _flag_size(self, b: Block, i: int, t: int) -> None:
        n = self.size(b)
        key = (b.left, b.right, i)
        if 0 < n <= i and key not in self._violations:
            self._violations.add(key)
            self._log(t, b.left, "size_violation", size=n, stage=i)

    def word(self, which: int, i: int) -> tuple[str, int]:
        key = (which, i)
        if key not in self._words_cache:
            w, rep = eval_sequence(self.seq[which], i)
            bad = set(w) - set(self.p.alphabet)
            if bad:
                raise ConfigError(f"sequence word {i} uses symbols outside the base alphabet: {sorted(bad)}")
            self._words_cache[key] = (w, rep.steps)
        return self._words_cache[key]

    # -- cleaning layer --------------------------------------------------------

    def _delimiter_mask(self, cells: np.ndarray) -> np.ndarray:
        codec = self.codec
        sec = codec.secondary_index(cells)
        data = (sec >= codec.q23_base) & ((sec - codec.q23_base) // len(codec.q3) == self._d_code)
        part = (sec >= 2) & (sec < codec.q23_base)
        vd = np.zeros(len(cells), dtype=bool)
        if part.any():
            # last slot holds the V/D marker; D values are >= 17
            stride = 1
            for r in RADIX[:-1]:
                stride *= r
            vd[part] = ((sec[part] - 1) // stride) >= 17
        return data | vd

    def _step_cleaning(self, t: int) -> list[int]:
        prev = self._delimiter_mask(self.row.cells)
        self.row = apply_rule(self.rule, self.row)
        now = self._delimiter_mask(self.row.cells)
        sec = self.codec.secondary_index(self.row.cells)
        moving = (sec >= 2) & (sec < self.codec.q23_base) & ~now
        if not moving.any() and not (sec == 1).any():
            self.quiet = True
        lost = np.nonzero(prev & ~now)[0]
        for z in lost:
            self._log(t, z, "delimiter_lost")
        return [int(z) for z in np.nonzero(now & ~prev)[0]]

    def _add_delimiter(self, d: int, t: int) -> None:
        self.birth[d] = t
        self._log(t, d, "delimiter")
        if not self.delims:
            self.delims.append(d)
            self._new_block(d, d, t)
            return
        left, _ = self._around(d)
        old = self.blocks.pop(left)
        bisect.insort(self.delims, d)
        right = old.right
        self._new_block(left, d, t)
        self._new_block(d, right, t)

    def _around(self, z: int) -> tuple[int, int]:
        """Alive delimiters strictly left and right of a non-delimiter cell."""
        k = bisect.bisect_left(self.delims, z)
        n = len(self.delims)
        return self.delims[(k - 1) % n], self.delims[k % n]

    def _promote(self, t: int) -> None:
        while self._pending and self._pending[0][0] <= t:
            _, left, right = heapq.heappop(self._pending)
            b = self.blocks.get(left)
            if b is None or b.right != right or b.formed is not None:
                continue
            if self.birth[left] > t or self.birth[right] > t:
                heapq.heappush(self._pending, (max(self.birth[left], self.birth[right]), left, right))
                continue
            self._form(b, t)

    # -- centralization layer -------------------------------------------------

    def segments(self) -> list[Block]:
        """Formed blocks, including empty ones (adjacent delimiters), which
        take part in merges like size-0 segments but are never reported."""
        return [self.blocks[d] for d in self.delims if d in self.blocks and self.blocks[d].formed is not None]

    def merge_round(self, j: int, t: int) -> None:
        """Merges decided during stage j-1 and committed at t = t_j."""
        segs = {b.left: b for b in self.segments()}
        if len(self.delims) < 2:
            return
        flagged = {d for d, b in segs.items() if self.size(b) <= j}
        parent = {d: d for d in segs}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for d in flagged:
            lft, rgt = self._neighbours(d)
            lseg, rseg = lft in segs and segs[lft].right == d, rgt in segs
            lf, rf = lseg and lft in flagged, rseg and rgt in flagged
            partners = []
            if lf or rf:
                partners = [x for x, f in ((lft, lf), (rgt, rf)) if f]
            elif lseg:
                partners = [lft]
            elif rseg:
                partners = [rgt]
            for x in partners:
                parent[find(x)] = find(d)
        groups: dict[int, list[int]] = {}
        for d in segs:
            groups.setdefault(find(d), []).append(d)
        for members in groups.values():
            if len(members) < 2:
                continue
            if len(members) == len(self.delims):
                self._log(t, members[0], "merge_skipped", reason="would remove every delimiter")
                continue
            # order the run cyclically: its first block is the one whose left neighbour is outside
            mset = set(members)
            start = next(d for d in members if self._neighbours(d)[0] not in mset or segs[self._neighbours(d)[0]].right != d)
            run = [start]
            while len(run) < len(members):
                nxt = segs[run[-1]].right
                if nxt not in mset:
                    raise RuntimeError("merge group is not contiguous")
                run.append(nxt)
            sizes = tuple(self.size(segs[d]) for d in run)
            right = segs[run[-1]].right
            for d in run:
                del self.blocks[d]
            for d in run[1:]:
                self.delims.remove(d)
                del self.birth[d]
            self._log(t, run[0], "merge", members=len(run), sizes=list(sizes), stage=j - 1)
            nb = self._new_block(run[0], right, t, members=sizes, born_merge=True)
            if nb.formed is None:
                self._log(t, run[0], "merge_unreliable")

    # -- computation layer ----------------------------------------------------

    def start_round(self, i: int, t: int) -> None:
        p = self.p
        t1 = p.write_start(i)
        t_next = p.t(i + 1)
        cw = p.counter_width(t_next - 1)  # room for the counters until the next merge
        zone = max(math.isqrt(i), cw)
        for b in self.segments():
            n = self.size(b)
            well = i < n < p.cap(i)
            # good: well-sized, and every segment merged into it at t_i was below the previous cap
            clean = not b.born_merge or b.formed != t or all(m < p.cap(max(i - 1, 1)) for m in b.members)
            m = n - zone - cw
            if m < 1:
                b.round = {"i": i, "inert": True, "good": False, "well": well}
                self._log(t, b.left, "zone_overflow", size=n, zone=zone, counter=cw)
                continue
            w, steps = self.word(0, i)
            wp, steps_p = self.word(1, i)
            start_b = max(t1, t + steps + steps_p, t + 2 * n)
            if t + 2 * n > t1:
                self._log(t, b.left, "deadline_miss", stage="measure", size=n, due=t1, at=t + 2 * n)
            if t + steps + steps_p > t1:
                self._log(t, b.left, "deadline_miss", stage="compute", due=t1, at=t + steps + steps_p)
            L = max(len(w), 1)
            end_b = start_b + m * L
            back = end_b + m
            r = {"i": i, "inert": False, "well": well, "good": well and clean, "zone": zone, "cw": cw, "m": m, "w": w, "wp": wp, "start_b": start_b, "L": L, "end_b": end_b, "back": back}
            if well:
                wait = (len(w) + 1) * (p.cap(i) if p.wait_policy == "cap" else n)
                start_d = max(t1 + wait, back)
                Lp = max(len(wp), 1)
                r.update(start_d=start_d, Lp=Lp, end_d=start_d + m * Lp)
                if r["good"] and r["end_d"] >= t_next:
                    self._log(t, b.left, "deadline_miss", stage="write", due=t_next, at=r["end_d"])
            b.round = r

    @staticmethod
    def _pattern(w: str, m: int, index: dict[str, int], sep: int) -> np.ndarray:
        period = np.array([index[c] for c in w] + [sep], dtype=np.int64)
        return np.resize(period, m)

    def _written(self, b: Block, t: int) -> list[tuple[int, np.ndarray]]:
        """(count, pattern) writes of the current round done by time t."""
        r = b.round
        if not r or r["inert"]:
            return []
        idx = {s: k for k, s in enumerate(self.p.alphabet)}
        sep = idx[self.p.separator]
        out = []
        kb = min(r["m"], max(0, (t - r["start_b"]) // r["L"]))
        if kb:
            out.append((kb, self._pattern(r["w"], r["m"], idx, sep)))
        if "start_d" in r:
            kd = min(r["m"], max(0, (t - r["start_d"]) // r["Lp"]))
            if kd:
                out.append((kd, self._pattern(r["wp"], r["m"], idx, sep)))
        return out

    def commit_round(self, t: int) -> None:
        """Fix the writes of the stage ending at t into the base row."""
        for b in self.segments():
            base = (b.left + 1 + b.round["zone"]) if b.round and not b.round["inert"] else None
            for k, pat in self._written(b, t - 1):
                idx = (base + np.arange(k)) % self.W
                self.q0[idx] = pat[:k]
            b.round = None

    def _head(self, b: Block, t: int) -> int | None:
        r = b.round
        if not r or r["inert"] or t < r["start_b"]:
            return None
        m = r["m"]
        if t < r["end_b"]:
            k = (t - r["start_b"]) // r["L"]
        elif t < r["back"]:
            k = m - 1 - (t - r["end_b"])
        elif "start_d" not in r:
            return None  # not well-sized: the head stops after returning
        elif t < r["start_d"]:
            k = 0
        elif t < r["end_d"]:
            k = (t - r["start_d"]) // r["Lp"]
        else:
            return None
        return r["zone"] + max(0, min(k, m - 1))

    # -- rows -----------------------------------------------------------------

    def materialize(self, t: int) -> np.ndarray:
        """Codes of the current row (the engine must stand at time t)."""
        codec = self.codec
        q0 = self.q0.copy()
        for b in self.segments():
            if b.round and not b.round["inert"]:
                base = b.left + 1 + b.round["zone"]
                for k, pat in self._written(b, t):
                    q0[(base + np.arange(k)) % self.W] = pat[:k]
        cells = q0.copy()
        q2 = {s: k for k, s in enumerate(codec.q2)}
        q3 = {s: k for k, s in enumerate(codec.q3)}
        cw = self.p.counter_width(t)
        digits = [(t // self.p.K**k) % self.p.K for k in range(cw)]
        for d in self.delims:
            for k in range(cw):
                for z in ((d + 1 + k) % self.W, (d - 1 - k) % self.W):
                    cells[z] = codec.with_data(int(q0[z]), q2[f"c{digits[k]}"], 0)
        for b in self.segments():
            r = b.round
            if not r or r["inert"]:
                continue
            n = self.size(b)
            for k in range(r["cw"], r["zone"]):
                z = (b.left + 1 + k) % self.W
                sym = r["w"][k - r["cw"]] if k - r["cw"] < len(r["w"]) else "0"
                cells[z] = codec.with_data(int(q0[z]), q2[ZONE], q3[sym])
            dt = t - self.p.t(r["i"])
            if 0 <= dt < 2 * n:
                k = dt if dt < n else 2 * n - 1 - dt
                z = (b.left + 1 + k) % self.W
                cells[z] = codec.with_data(int(q0[z]), q2[MEASURE], 0)
            h = self._head(b, t)
            if h is not None:
                z = (b.left + 1 + h) % self.W
                cells[z] = codec.with_data(int(q0[z]), q2[HEAD], 0)
        for d in self.delims:
            cells[d] = codec.with_data(int(q0[d]), q2[DELIM], 0)
        # particles of the cleaning layer still in flight
        sec = codec.secondary_index(self.row.cells)
        part = (sec >= 1) & (sec < codec.q23_base) & ~self._delimiter_mask(self.row.cells)
        cells[part] = self.row.cells[part]
        return cells

    def snapshot(self, t: int) -> Snapshot:
        cells = self.materialize(t)
        codec = self.codec
        plain = codec.secondary_index(cells) == 0
        i = self.p.stage(t)
        segs = []
        well_cells = good_cells = 0
        occ = {u: [0, 0] for u in self.words}
        q0idx = {s: k for k, s in enumerate(self.p.alphabet)}
        pats = {u: np.array([q0idx[c] for c in u]) for u in self.words}
        for b in self.segments():
            n = self.size(b)
            if n == 0:
                continue
            well = i < n < self.p.cap(i)
            good = bool(b.round and b.round.get("good")) and well
            segs.append({"left": b.left, "right": b.right, "size": n, "age": t - b.formed, "well_sized": well, "good": good})
            if well:
                well_cells += n
            if good:
                good_cells += n
                idx = self.cells_of(b)
                seg = np.where(plain[idx], cells[idx], -1)
                for u, pat in pats.items():
                    lu = len(pat)
                    if n < lu:
                        continue
                    hit = np.ones(n - lu + 1, dtype=bool)
                    for k in range(lu):
                        hit &= seg[k : n - lu + 1 + k] == pat[k]
                    occ[u][0] += int(hit.sum())
                    occ[u][1] += n - lu
        return Snapshot(
            t=t,
            stage=i,
            unreliable=float(np.mean(self.reach > t)),
            segments=segs,
            delimiters=len(self.delims),
            internal=float(1 - plain.mean()),
            well_sized_cells=well_cells / self.W,
            good_cells=good_cells / self.W,
            words={u: (a, b) for u, (a, b) in occ.items()},
        )

    # -- main loop ------------------------------------------------------------

    def run(self, horizon: int, checkpoints=(), on_snapshot=None) -> list[Snapshot]:
        p = self.p
        wanted = sorted(t for t in set(checkpoints) if t > self.t)
        out = []
        stage_at = p.stage(self.t)
        if self.t in checkpoints:
            out.append(self.snapshot(self.t))
            if on_snapshot:
                on_snapshot(out[-1])
        for t in range(self.t + 1, horizon + 1):
            self.t = t
            if not self.quiet:
                for d in self._step_cleaning(t):
                    self._add_delimiter(d, t)
            self._promote(t)
            new_stage = p.stage(t)
            for j in range(stage_at + 1, new_stage + 1):
                self.commit_round(t)
                if j >= 2:
                    self.merge_round(j, t)
                self.start_round(j, t)
                self._check_sizes(j, t)
            stage_at = new_stage
            if wanted and t == wanted[0]:
                wanted.pop(0)
                snap = self.snapshot(t)
                out.append(snap)
                if on_snapshot:
                    on_snapshot(snap)
        return out

    def _check_sizes(self, i: int, t: int) -> None:
        for b in self.segments():
            self._flag_size(b, i, t)

    def write_events(self, path) -> None:
        with open(path, "w") as f:
            for e in self.events:
                f.write(json.dumps(e) + "\n")


# ---------------------------------------------------------------------------
# decoding rows


@dataclass
class SegmentInfo:
    z1: int
    z2: int
    size: int
    admissible: bool
    well_sized: bool
    good: bool | None
    v: tuple[str, str, str, str, str]
    age: int | None = None

    @property
    def v2_empty(self) -> bool:
        return self.v[2] == ""

    @property
    def v3_empty(self) -> bool:
        return self.v[3] == ""


@dataclass
class SegmentReport:
    t: int
    stage: int
    delimiters: list[int]
    segments: list[SegmentInfo]
    reliable: np.ndarray | None = field(default=None, repr=False)
    violations: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "stage": self.stage,
            "delimiters": self.delimiters,
            "segments": [asdict(s) | {"v": list(s.v)} for s in self.segments],
            "reliable_fraction": None if self.reliable is None else float(np.mean(self.reliable)),
            "violations": self.violations,
        }


def _kind_of(codec: LayeredCodec, code: int) -> str:
    s = codec.secondary_index(code)
    if s == 0:
        return "plain"
    if s == 1:
        return "seed"
    if s < codec.q23_base:
        vals = codec.particle_values(code)
        if vals[-1] >= 17 and not any(vals[:-1]):
            return DELIM
        return "particles"
    q2, _ = codec.data_indices(code)
    return codec.q2[q2]


def segment_report(row: Window, t: int, p: ConstructionParams, codec: LayeredCodec | None = None, reliable: np.ndarray | None = None) -> SegmentReport:
    """Decode delimiters and segments of a construction row.

    Segments are the runs strictly between consecutive delimiters; with a
    ``reliable`` mask, runs containing an unreliable cell are skipped.
    """
    codec = codec or segment_codec(p)
    cells = np.asarray(row.cells)
    n = len(cells)
    if np.any(cells < 0) or np.any(cells >= codec.size):
        raise MalformedRow("row contains codes outside the construction alphabet")
    kinds = [_kind_of(codec, int(c)) for c in cells]
    delims = [z for z, k in enumerate(kinds) if k == DELIM]
    torus = row.boundary == TORUS
    runs = []
    if torus and delims:
        for a, b in zip(delims, delims[1:] + [delims[0] + n]):
            runs.append((a + 1, b - 1))
    else:
        runs = [(a + 1, b - 1) for a, b in zip(delims, delims[1:])]
    inside = np.zeros(n, dtype=bool)
    for a, b in runs:
        inside[np.arange(a, b + 1) % n] = True
    for z, k in enumerate(kinds):
        if k in (HEAD, MEASURE, ZONE) and not inside[z]:
            raise MalformedRow(f"{k} cell at {z + row.origin} lies outside every segment")
    i = p.stage(t)
    rep = SegmentReport(t, i, [z + row.origin for z in delims], [], reliable)
    counter = {f"c{k}" for k in range(p.K)}
    for a, b in runs:
        idx = np.arange(a, b + 1) % n
        size = len(idx)
        if size == 0:
            continue
        if reliable is not None and not reliable[idx].all():
            continue
        ks = [kinds[z] for z in idx]
        lo = 0
        while lo < size and (ks[lo] in counter or ks[lo] == ZONE):
            lo += 1
        hi = size
        while hi > lo and ks[hi - 1] in counter:
            hi -= 1
        mid = [k != "plain" for k in ks[lo:hi]]
        if any(mid):
            f = mid.index(True)
            g = len(mid) - mid[::-1].index(True)
            cuts = (0, lo, lo + f, lo + g, hi, size)
        else:
            cuts = (0, lo, hi, hi, hi, size)
        text = "".join(codec.q0[int(cells[z]) % codec.nq0] for z in idx)
        v = tuple(text[cuts[k] : cuts[k + 1]] for k in range(5))
        well = i < size < p.cap(i)
        adm = p.admissible(t, size)
        rep.segments.append(SegmentInfo(int(a + row.origin), int(b + row.origin), size, adm, well, None, v))
        if size <= i:
            rep.violations.append(f"segment [{a + row.origin},{b + row.origin}] has size {size} <= {i} at t={t}")
    return rep
