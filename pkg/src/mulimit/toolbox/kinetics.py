"""Signal particles of the cleaning layer and the radius-1 rule built on them.

Each step is simulated exactly: positions are integers in 1/UNIT cell units,
times are integers in 1/STEP step units, and a particle with velocity ``a``
moves ``a`` position units per time unit (speed 1 is ``a = 20``).  All
meeting times are integers because every particle sits on its kind's grid
at integer times and every velocity difference divides 3600.

Two variants share the collision protocol:

``segments``
    equal-age collisions leave a delimiter; the surviving segment data of
    a cell (Q2 x Q3) is kept until a particle passes.
``areas``
    equal-age collisions leave nothing; instead the area swept by the inner
    signals is coloured black/white with the colour flipping every step.
"""

from __future__ import annotations

import heapq
import itertools
from collections import defaultdict

import numpy as np

from ..engine import LocalRule
from .states import (
    K,
    K_TIE,
    K_TIE_N,
    K_TIE_O,
    K_WIN,
    N,
    O,
    S1,
    S2,
    SLOTS,
    SPEED,
    STEP,
    UNIT,
    D,
    LayeredCodec,
    Particle,
    V,
    _from_slot,
    _slot_value,
)

SEGMENTS = "segments"
AREAS = "areas"
COMPARISON = (S1, S2, K)


class KineticError(RuntimeError):
    """A particle left its grid; indicates a bug in the collision rules."""


def seed_particles(x: int, group: int) -> list[Particle]:
    """Closed outer and inner signals leaving a seed at position x."""
    out = []
    for kind in (O, N):
        for sign in (1, -1):
            out.append(Particle(kind, sign * SPEED[kind], x, 0, born=0, group=group))
    return out


def _meet_time(p: Particle, q: Particle) -> int | None:
    da = p.a - q.a
    if da == 0:
        return None
    num = q.x0 - p.x0
    if num % da:
        raise KineticError(f"non-integral meeting time between {p} and {q}")
    return num // da


def _redirect(p: Particle, s: int, where: int, a: int) -> None:
    p.a = a
    p.x0 = where - a * s


class Collider:
    """Resolves collision clusters; ``variant`` picks the tie outcome."""

    def __init__(self, variant: str = SEGMENTS, log=None):
        if variant not in (SEGMENTS, AREAS):
            raise ValueError(variant)
        self.variant = variant
        self.log = log

    def run(self, parts: list[Particle], end: int = STEP, t0: int | None = None) -> list[Particle]:
        """Advance the particles from time 0 to ``end``; events at ``end`` wait."""
        heap: list[tuple[int, int, int, int, int]] = []
        ver = [0] * len(parts)

        def push(i: int, j: int, after: int) -> None:
            p, q = parts[i], parts[j]
            s = _meet_time(p, q)
            if s is None or s <= after or s >= end:
                return
            if p.group >= 0 and p.group == q.group and s == max(p.born, q.born):
                return
            if i > j:
                i, j = j, i
            heapq.heappush(heap, (s, i, j, ver[i], ver[j]))

        # initial pairs, inlined: this loop dominates on dense neighbourhoods
        n = len(parts)
        for i in range(n):
            p = parts[i]
            pa, px, pg, pb = p.a, p.x0, p.group, p.born
            for j in range(i + 1, n):
                q = parts[j]
                da = pa - q.a
                if da == 0:
                    continue
                num = q.x0 - px
                s, rem = divmod(num, da)
                if rem:
                    raise KineticError(f"non-integral meeting time between {p} and {q}")
                if s < 0 or s >= end or (pg >= 0 and pg == q.group and s == max(pb, q.born)):
                    continue
                heap.append((s, i, j, 0, 0))
        heapq.heapify(heap)
        while heap:
            s = heap[0][0]
            pairs = set()
            while heap and heap[0][0] == s:
                _, i, j, vi, vj = heapq.heappop(heap)
                if parts[i].alive and parts[j].alive and ver[i] == vi and ver[j] == vj:
                    pairs.add((i, j))
            if not pairs:
                continue
            clusters: dict[int, set[int]] = defaultdict(set)
            for i, j in pairs:
                clusters[parts[i].pos(s)] |= {i, j}
            touched: list[int] = []
            for where in sorted(clusters):
                idx = sorted(clusters[where], key=lambda k: (parts[k].kind, parts[k].a, parts[k].attr, k))
                before = [(parts[k].a, parts[k].x0) for k in idx]
                new = self.resolve([parts[k] for k in idx], s, where)
                for k, old in zip(idx, before):
                    if parts[k].alive and (parts[k].a, parts[k].x0) != old:
                        ver[k] += 1
                        touched.append(k)
                for p in new:
                    parts.append(p)
                    ver.append(0)
                    touched.append(len(parts) - 1)
                if self.log is not None:
                    self.log.append((t0, s, where, sorted((parts[k].kind, parts[k].a) for k in idx)))
            for i in touched:
                for j in range(len(parts)):
                    if j != i and parts[j].alive:
                        push(i, j, s)
        return parts

    # cluster rules -----------------------------------------------------------

    def resolve(self, group: list[Particle], s: int, where: int) -> list[Particle]:
        spawned: list[Particle] = []
        fresh: set[int] = set()

        def cross(p: Particle, q: Particle) -> bool:
            return p.alive and q.alive and p.a != q.a

        def of(*kinds):
            return [p for p in group if p.alive and p.kind in kinds]

        # 1. the kill signal removes outer borders it overtakes (and, on ties,
        # one inner border); met head-on, a closed outer border stops it (below)
        for k in of(K):
            for target in sorted(of(O, N), key=lambda p: p.kind):
                if not cross(k, target) or (target.kind == O and target.direction != k.direction):
                    continue
                if target.kind == O and k.attr == K_WIN:
                    target.alive = k.alive = False
                elif target.kind == O and k.attr in (K_TIE, K_TIE_N):
                    target.alive = False
                    finished = k.attr == K_TIE_N or self.variant == AREAS
                    k.attr = K_TIE_O
                    k.alive = not finished
                elif target.kind == N and self.variant == SEGMENTS and k.attr in (K_TIE, K_TIE_O):
                    target.alive = False
                    finished = k.attr == K_TIE_O
                    k.attr = K_TIE_N
                    k.alive = not finished
                if not k.alive:
                    break
        # 2. opposite outer borders meet: both open, comparison starts
        plus = [p for p in of(O) if p.a > 0]
        minus = [p for p in of(O) if p.a < 0]
        if plus and minus:
            for p in plus + minus:
                p.attr = 1
            spawned.append(Particle(S1, 20, where - 20 * s, born=s))
            spawned.append(Particle(S1, -20, where + 20 * s, born=s))
            spawned.append(Particle(V, 0, where, 0, born=s))
        # 3-6. outer borders against everything slower or lighter
        for o in of(O):
            for q in group:
                if q is o or not cross(o, q):
                    continue
                if q.kind == N or q.kind == S1:
                    q.alive = False
                elif q.kind == S2:
                    if o.attr:
                        o.attr = 0
                    else:
                        q.alive = False
                elif q.kind == K:
                    q.alive = False
                elif q.kind in (V, D):
                    q.alive = False
        # 7. comparison signal bounces on an inner border
        for s1 in of(S1):
            for n in of(N):
                if cross(s1, n):
                    s1.kind = S2
                    _redirect(s1, s, where, -s1.a)
                    fresh.add(id(s1))
                    break
        # 8. returning comparison signals decide at the collision marker
        for v in of(V):
            arrivals = [q for q in of(S2) if id(q) not in fresh and cross(v, q)]
            if arrivals:
                if v.attr == 0:
                    dirs = {q.direction for q in arrivals}
                    if len(dirs) == 2:
                        for q in arrivals:
                            q.kind, q.attr = K, K_TIE
                            _redirect(q, s, where, -q.a)
                            fresh.add(id(q))
                        if self.variant == SEGMENTS:
                            v.kind, v.attr = D, 0
                        else:
                            v.alive = False
                    else:
                        q = arrivals[0]
                        q.kind, q.attr = K, K_WIN
                        _redirect(q, s, where, -q.a)
                        fresh.add(id(q))
                        v.attr = 1
                else:
                    for q in arrivals:
                        q.alive = False
                    v.alive = False
            if v.alive and v.kind == V and any(cross(v, q) and id(q) not in fresh for q in of(S1, K)):
                v.alive = False
        # 9. stray comparison signals annihilate each other
        comp = [p for p in of(*COMPARISON) if id(p) not in fresh]
        for p, q in itertools.combinations(comp, 2):
            if cross(p, q):
                p.alive = q.alive = False
        # 10. comparison signals erase delimiters they cross
        for d in of(D):
            if any(cross(d, q) and id(q) not in fresh for q in of(*COMPARISON)):
                d.alive = False
        # 11. opposite inner borders annihilate
        ns = of(N)
        if any(p.a > 0 for p in ns) and any(p.a < 0 for p in ns):
            for p in ns:
                p.alive = False
        return spawned


# ---------------------------------------------------------------------------
# neighbourhood decoding


def _cell_particles(codec: LayeredCodec, code: int, cell: int, delimiter_q2: int | None) -> list[Particle]:
    """Particles stored in one cell, placed at relative cell ``cell``."""
    sec = codec.secondary_index(code)
    base = cell * UNIT
    if sec == 0:
        return []
    if sec == 1:
        return seed_particles(base, group=cell)
    vals = codec.particle_values(code)
    if vals is not None:
        return values_to_particles(vals, base)
    if delimiter_q2 is not None and codec.data_indices(code)[0] == delimiter_q2:
        return [Particle(D, 0, base, 0)]
    return []


def values_to_particles(vals: list[int], base: int) -> list[Particle]:
    out = []
    for slot, v in enumerate(vals):
        if v:
            kind, a, off, attr = _from_slot(slot, v)
            out.append(Particle(kind, a, base + off, attr))
    return out


def cells_at_end(parts: list[Particle], flip_n: bool) -> dict[int, list[int]]:
    """Slot values per cell of the surviving particles at the end of the step.

    At most one particle per slot survives; the one furthest right wins
    (ties broken by slot value).  With ``flip_n`` the inner colour bit flips.
    """
    best: dict[tuple[int, int], tuple[int, int]] = {}
    for p in parts:
        if not p.alive:
            continue
        x = p.pos(STEP)
        cell, off = divmod(x, UNIT)
        try:
            v = _slot_value(p, off)
        except ValueError as e:
            raise KineticError(str(e)) from e
        if flip_n and p.kind == N:
            v = v - 1 if (v - 1) % 2 else v + 1
        key = (cell, p.slot())
        if key not in best or best[key] < (x, v):
            best[key] = (x, v)
    out: dict[int, list[int]] = {}
    for (cell, slot), (_, v) in best.items():
        out.setdefault(cell, [0] * len(SLOTS))[slot] = v
    return out


class KineticRule(LocalRule):
    """Radius-1 rule moving the cleaning-layer particles.

    Cells without particles in their neighbourhood are left alone (segments
    variant) or have their colour flipped (areas variant); everything else
    goes through an exact per-neighbourhood simulation, memoised.
    """

    kind = "construction"

    def __init__(self, codec: LayeredCodec, variant: str = SEGMENTS, *, delimiter_q2: str | None = "delim", colours: tuple[str, str, str] = (".", "B", "W"), spec: dict | None = None):
        super().__init__(codec.alphabet, 1)
        self.codec = codec
        self.variant = variant
        self.collider = Collider(variant)
        self.spec = spec
        self._delim = codec.q2.index(delimiter_q2) if variant == SEGMENTS and delimiter_q2 in codec.q2 else None
        if variant == AREAS:
            blank, black, white = colours
            self._blank = codec.q0.index(blank)
            self._black = codec.q0.index(black)
            self._white = codec.q0.index(white)
        self._cache: dict[tuple[int, int, int], int] = {}

    def to_json(self) -> dict:
        if self.spec is None:
            return super().to_json()
        return {"kind": "construction", "construction": self.spec}

    # vectorised entry point ---------------------------------------------------

    def _moving(self, sec: np.ndarray) -> np.ndarray:
        """Cells whose state holds particles or a seed."""
        return (sec >= 1) & (sec < self.codec.q23_base)

    def image(self, stack: np.ndarray) -> np.ndarray:
        stack = np.asarray(stack, dtype=np.int64)
        nq0 = self.codec.nq0
        centre = stack[1]
        out = centre.copy()
        if self.variant == AREAS:
            out = self._flip(out)
        sec = stack // nq0
        moving = self._moving(sec)
        busy = moving[0] | moving[1] | moving[2]
        if not busy.any():
            return out
        idx = np.nonzero(busy)[0]
        sub = stack[:, idx]
        uniq, inv = np.unique(sub, axis=1, return_inverse=True)
        vals = np.empty(uniq.shape[1], dtype=np.int64)
        for j in range(uniq.shape[1]):
            vals[j] = self._local3(int(uniq[0, j]), int(uniq[1, j]), int(uniq[2, j]))
        out[idx] = vals[inv.reshape(-1)]
        return out

    def _flip(self, cells: np.ndarray) -> np.ndarray:
        nq0 = self.codec.nq0
        prim = cells % nq0
        rest = cells - prim
        newp = np.where(prim == self._black, self._white, np.where(prim == self._white, self._black, prim))
        return rest + newp

    def local(self, neighborhood) -> int:
        l, c, r = (int(x) for x in neighborhood)
        return int(self.image(np.array([[l], [c], [r]], dtype=np.int64))[0])

    # one neighbourhood ----------------------------------------------------------

    def simulate(self, l: int, c: int, r: int) -> list[Particle]:
        parts: list[Particle] = []
        for k, code in enumerate((l, c, r)):
            parts.extend(_cell_particles(self.codec, code, k, self._delim))
        return self.collider.run(parts)

    def _local3(self, l: int, c: int, r: int) -> int:
        key = (l, c, r)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        codec = self.codec
        parts = self.simulate(l, c, r)
        vals = cells_at_end(parts, self.variant == AREAS).get(1, [0] * len(SLOTS))
        prim = codec.primary_index(c)
        if self.variant == AREAS:
            prim = self._colour(prim, codec.secondary_index(c) == 1, parts)
        if any(vals):
            only_d = all(v == 0 for v in vals[:-1]) and vals[-1] == 17  # delimiter at offset 0
            if only_d and self._delim is not None:
                res = codec.with_data(prim, self._delim, 0)
            else:
                res = codec.with_particles(prim, vals)
        else:
            # a delimiter in c was turned into a particle above; if it is gone, so is the data
            data = codec.data_indices(c)
            keep = data is not None and data[0] != self._delim
            res = codec.with_data(prim, *data) if keep else prim
        if len(self._cache) < 2_000_000:
            self._cache[key] = res
        return res

    def _colour(self, prim: int, was_seed: bool, parts: list[Particle]) -> int:
        black, white = self._black, self._white
        if prim == black:
            prim = white
        elif prim == white:
            prim = black
        if was_seed:
            return black
        # a cell is inside an area iff its left edge is; borders standing
        # exactly on that edge decide it
        lo = UNIT
        for p in parts:
            if p.alive and p.kind == O and p.pos(STEP) == lo:
                prim = self._blank
        for p in parts:
            if p.alive and p.kind == N and p.pos(STEP) == lo:
                # attr is the inner border's colour at time t
                prim = white if p.attr else black
        return prim


# ---------------------------------------------------------------------------
# whole-row reference simulation


class RowKinetics:
    """Global particle simulation on the whole line.

    This bypasses the per-neighbourhood decoding of :class:`KineticRule` and
    serves as the second route in cross-checks.  State is a dict mapping a
    cell to its nine slot values.
    """

    def __init__(self, variant: str = SEGMENTS, log: list | None = None):
        self.collider = Collider(variant, log)
        self.variant = variant
        self.t = 0

    def step(self, cells: dict[int, list[int]], seeds: tuple[int, ...] = ()) -> dict[int, list[int]]:
        parts: list[Particle] = []
        for z, vals in cells.items():
            parts.extend(values_to_particles(vals, z * UNIT))
        for z in seeds:
            parts.extend(seed_particles(z * UNIT, group=z))
        self.collider.run(parts, t0=self.t)
        self.t += 1
        return cells_at_end(parts, self.variant == AREAS)
