"""Two-phase colouring automaton: persistent set depends on the time parity.

The rule reuses the counter particles of the cleaning layer.  Equal-age
collisions leave no delimiter; instead every cell swept by an inner border
is coloured, black at odd times and white at even times.  From a generic
configuration almost every cell ends up coloured in phase, so black and white
alternate between densities near 0 and near 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..engine import TORUS, Window, apply_rule, compose_power
from ..errors import ConfigError
from ..stats import DensityTrace
from .kinetics import AREAS, KineticRule
from .states import RADIX, LayeredCodec

BLANK, BLACK, WHITE = ".", "B", "W"


def areas_codec() -> LayeredCodec:
    return LayeredCodec((BLANK, BLACK, WHITE))


def areas_rule(codec: LayeredCodec | None = None) -> KineticRule:
    codec = codec or areas_codec()
    return KineticRule(codec, AREAS, spec={"variant": AREAS})


@dataclass(frozen=True)
class AreasConfig:
    """Initial measure: each cell is a seed with probability ``p_seed``,
    a random particle set with probability ``p_junk``, else a uniform base
    colour (blank, black or white)."""

    width: int = 10**6
    horizon: int = 10**4
    p_seed: float = 0.1
    p_junk: float = 0.0
    seed: int = 0
    checkpoints: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not 0 < self.p_seed <= 1 or not 0 <= self.p_junk <= 1 - self.p_seed:
            raise ConfigError("need 0 < p_seed and p_seed + p_junk <= 1")
        if self.width < 3 or self.horizon < 0:
            raise ConfigError("width must be >= 3 and horizon >= 0")


def sample_areas(codec: LayeredCodec, cfg: AreasConfig) -> Window:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 61]))
    n = cfg.width
    u = rng.random(n)
    cells = rng.integers(0, codec.nq0, n).astype(np.int64)
    seeds = u < cfg.p_seed
    cells[seeds] = codec.seed(0) + cells[seeds]
    junk = np.nonzero((u >= cfg.p_seed) & (u < cfg.p_seed + cfg.p_junk))[0]
    for z in junk:
        vals = [0] * len(RADIX)
        while not any(vals):
            vals = [int(rng.integers(0, r)) if rng.random() < 0.3 else 0 for r in RADIX]
        cells[z] = codec.with_particles(int(cells[z]) % codec.nq0, vals)
    return Window(cells, 0, TORUS)


def parity_colour(t: int) -> str:
    return BLACK if t % 2 else WHITE


def synchronized_mask(codec: LayeredCodec, cells: np.ndarray, t: int) -> np.ndarray:
    """Cells coloured with the colour of the current parity."""
    return (cells % codec.nq0) == codec.q0.index(parity_colour(t))


def colour_fractions(codec: LayeredCodec, cells: np.ndarray) -> tuple[float, float]:
    prim = cells % codec.nq0
    n = len(cells)
    return float(np.count_nonzero(prim == codec.q0.index(BLACK))) / n, float(np.count_nonzero(prim == codec.q0.index(WHITE))) / n


def _flip(codec: LayeredCodec, cells: np.ndarray) -> np.ndarray:
    b, w = codec.q0.index(BLACK), codec.q0.index(WHITE)
    prim = cells % codec.nq0
    swapped = np.where(prim == b, w, np.where(prim == w, b, prim))
    return cells - prim + swapped


@dataclass
class AreasRun:
    times: list[int]
    black: list[float]
    white: list[float]
    synchronized: list[float]
    quiet_from: int | None  # first time with no particles left, if reached
    final: Window

    def trace(self, width: int) -> DensityTrace:
        vals = np.array([self.black, self.white]).T
        return DensityTrace(["black", "white"], list(self.times), vals, samples=[width] * len(self.times))


def run_areas(cfg: AreasConfig, rule: KineticRule | None = None, window: Window | None = None) -> AreasRun:
    """Evolve until the horizon, recording colour densities at checkpoints.

    Once no particle is left anywhere the rule only swaps black and white
    (checked by ``test_quiet_rows_only_flip``), so later rows are produced by
    swapping instead of stepping.
    """
    rule = rule or areas_rule()
    codec = rule.codec
    w = window if window is not None else sample_areas(codec, cfg)
    wanted = set(cfg.checkpoints) | {0, cfg.horizon}
    out = AreasRun([], [], [], [], None, w)
    cur = w
    quiet = None
    for t in range(cfg.horizon + 1):
        if t:
            if quiet is None:
                cur = apply_rule(rule, cur)
            else:
                cur = Window(_flip(codec, cur.cells), cur.origin, cur.boundary)
        if quiet is None and t > 0 and not np.any(codec.secondary_index(cur.cells) > 0):
            quiet = t
        if t in wanted:
            b, wh = colour_fractions(codec, cur.cells)
            out.times.append(t)
            out.black.append(b)
            out.white.append(wh)
            out.synchronized.append(float(np.mean(synchronized_mask(codec, cur.cells, t))))
    out.quiet_from = quiet
    out.final = cur
    return out


def square_is_identity(rule: KineticRule, w: Window) -> bool:
    """Does the square of the rule fix this row?"""
    return apply_rule(compose_power(rule, 2), w) == w
