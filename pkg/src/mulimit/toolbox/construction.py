"""Assembling the layered construction from two word sequences."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError
from ..sequences import ConstantGenerator, GrowingSequenceSpec, reschedule, sequence_from_json
from .kinetics import AREAS, SEGMENTS, KineticRule
from .params import ConstructionParams, require_valid
from .segments import SegmentConfig, SegmentEngine, Snapshot, sample_row, segment_codec
from .states import RADIX
from .colouring import areas_rule


def stage_budgets(p: ConstructionParams):
    """Time and space budgets for word i: a quarter of the merge window, sqrt(i) cells."""

    def T(i: int) -> int:
        return max(0, p.window(max(i, 1)) // 4)

    def S(i: int) -> int:
        return math.isqrt(i)

    return T, S


def prepare_sequences(seq_w: GrowingSequenceSpec, seq_wp: GrowingSequenceSpec, p: ConstructionParams) -> tuple[GrowingSequenceSpec, GrowingSequenceSpec]:
    if not p.reschedule:
        return seq_w, seq_wp
    T, S = stage_budgets(p)
    return reschedule(seq_w, T, S), reschedule(seq_wp, T, S)


class ConstructionRule(KineticRule):
    """Radius-1 rule over the construction alphabet.

    Stepping a row applies the cleaning layer exactly; the merge and writing
    layers are advanced by :class:`SegmentEngine`, which this rule carries
    together with the (possibly rescheduled) sequences.
    """

    def __init__(self, p: ConstructionParams, seq_w: GrowingSequenceSpec, seq_wp: GrowingSequenceSpec, spec: dict | None = None):
        super().__init__(segment_codec(p), SEGMENTS, spec=spec)
        self.params = p
        self.seq_w = seq_w
        self.seq_wp = seq_wp

    def engine(self, initial, words: tuple[str, ...] = ()) -> SegmentEngine:
        return SegmentEngine(self, self.params, self.seq_w, self.seq_wp, initial, words)


def build_construction(seq_w: GrowingSequenceSpec, seq_wp: GrowingSequenceSpec, p: ConstructionParams) -> ConstructionRule:
    require_valid(p)
    if p.K != 2 or (p.s_i, p.s_o) != (ConstructionParams.s_i, ConstructionParams.s_o):
        # the signal grids and collision timings are laid out for these values
        raise ConfigError("the local rule is implemented for K=2, s_i=1/5, s_o=1/4 only")
    w, wp = prepare_sequences(seq_w, seq_wp, p)
    return ConstructionRule(p, w, wp, spec=p.to_json())


def default_sequence() -> GrowingSequenceSpec:
    return GrowingSequenceSpec(ConstantGenerator("ab", 0), name="constant-ab")


def rule_from_params(obj: dict) -> KineticRule:
    """Build from the JSON form; missing sequences default to w_i = (ab)^i.

    ``{"variant": "areas"}`` selects the two-colour automaton instead.
    """
    if isinstance(obj, dict) and obj.get("variant") == AREAS:
        return areas_rule()
    p = ConstructionParams.from_json(obj) if isinstance(obj, dict) else obj
    w = sequence_from_json(p.w, p.base_dir) if p.w else default_sequence()
    wp = sequence_from_json(p.w_prime, p.base_dir) if p.w_prime else default_sequence()
    return build_construction(w, wp, p)


def run_construction(rule: ConstructionRule, cfg: SegmentConfig, words: tuple[str, ...] = ()) -> tuple[list[Snapshot], SegmentEngine]:
    eng = rule.engine(sample_row(rule.codec, cfg), words)
    snaps = eng.run(cfg.horizon, cfg.checkpoints)
    return snaps, eng


# ---------------------------------------------------------------------------
# layer entry points


def cleaning_layer(rule: KineticRule, left: int, centre: int, right: int) -> int:
    """Secondary component of the image of one neighbourhood."""
    return rule.codec.secondary_index(rule.local((left, centre, right)))


def centralization_layer(engine: SegmentEngine, j: int, t: int) -> None:
    """Commit the merges decided during stage j-1 (t must be t_j)."""
    engine.merge_round(j, t)


def computation_layer(engine: SegmentEngine, i: int, t: int) -> None:
    """Lay out steps (a) to (e) for every segment present at t_i."""
    engine.start_round(i, t)


# ---------------------------------------------------------------------------
# seed audit


def random_neighbourhoods(codec, n: int, seed: int = 0, mix: str = "uniform") -> np.ndarray:
    """n x 3 codes.  ``uniform`` draws codes uniformly from the alphabet;
    ``sparse`` draws particle sets with few occupied slots, seeds and data."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    if mix == "uniform":
        return rng.integers(0, codec.size, (n, 3))
    out = np.empty((n, 3), dtype=np.int64)
    kinds = rng.integers(0, 4, (n, 3))
    for idx in np.ndindex(n, 3):
        prim = int(rng.integers(0, codec.nq0))
        k = kinds[idx]
        if k == 0:
            out[idx] = prim
        elif k == 1:
            out[idx] = codec.seed(prim)
        elif k == 2:
            vals = [int(rng.integers(0, r)) if rng.random() < 0.25 else 0 for r in RADIX]
            out[idx] = codec.with_particles(prim, vals)
        else:
            out[idx] = codec.with_data(prim, int(rng.integers(0, len(codec.q2))), int(rng.integers(0, len(codec.q3))))
    return out


def seed_image_audit(rule: KineticRule, nbhds: np.ndarray) -> int:
    """Number of neighbourhoods whose image carries the seed."""
    img = rule.image(np.asarray(nbhds).T)
    return int(np.count_nonzero(rule.codec.secondary_index(img) == 1))

