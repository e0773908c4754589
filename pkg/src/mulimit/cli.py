"""Command-line entry point: ``mulimit <command> [options]``.

Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
runtime or budget errors.  Every command writes a ``manifest.json`` into the
output directory recording its parameters, seeds, versions and the SHA-256
of each file it produced.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .engine import EXACT, TORUS, Alphabet, LocalRule, Window, builtin_rule, evolve, rule_from_json
from .errors import ConfigError, MulimitError, WindowTooSmall

# ---------------------------------------------------------------------------
# loading


def _read_json(path: str | Path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e


def load_rule(source: str) -> LocalRule:
    """A JSON file, an inline JSON object, or a builtin name such as ``eca-184``."""
    if source.lstrip().startswith("{"):
        try:
            return rule_from_json(json.loads(source))
        except json.JSONDecodeError as e:
            raise ConfigError(f"inline rule is not valid JSON: {e}") from e
    if source.endswith(".json") or os.sep in source:
        return rule_from_json(_read_json(source))
    return builtin_rule(source)


# larger alphabets cannot carry a tabulated product measure
MAX_TABULATED = 1 << 20


def load_measure(source: str, alphabet: Alphabet):
    from .measure import BernoulliMeasure

    if alphabet.size > MAX_TABULATED:
        raise ConfigError(f"alphabet of size {alphabet.size} is too large for a product measure; use --measure seeds:<p>")
    if source == "uniform":
        return BernoulliMeasure.uniform(alphabet)
    if source.lstrip().startswith("{"):
        obj = json.loads(source)
    else:
        obj = _read_json(source)
    return BernoulliMeasure.from_json(obj, alphabet)


def _csv_list(text: str | None, conv=str) -> list:
    if text is None or text == "":
        return []
    return [conv(x) for x in text.split(",") if x.strip() != ""]


# ---------------------------------------------------------------------------
# outputs


class Outputs:
    """Collects written files for the manifest."""

    def __init__(self, out: Path):
        self.dir = out
        self.files: dict[str, str] = {}
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, data: bytes | str) -> Path:
        if isinstance(data, str):
            data = data.encode()
        path = self.dir / name
        path.write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()
        return path

    def manifest(self, command: str, params: dict, seeds: list[int]) -> Path:
        man = {
            "command": command,
            "params": params,
            "seeds": seeds,
            "versions": {"mulimit": __version__, "numpy": np.__version__, "python": sys.version.split()[0]},
            "outputs": dict(sorted(self.files.items())),
        }
        path = self.dir / "manifest.json"
        path.write_text(json.dumps(man, indent=2, sort_keys=True, default=str) + "\n")
        return path


def gray_levels(rule: LocalRule) -> np.ndarray | None:
    """Gray level per state; None when the alphabet is too large to tabulate."""
    q = rule.alphabet.size
    if q <= 255:
        return np.round(np.arange(q) * 254 / max(q - 1, 1)).astype(np.uint8)
    return None


def _levels_for(rule: LocalRule, cells: np.ndarray) -> np.ndarray:
    lut = gray_levels(rule)
    if lut is not None:
        return lut[cells]
    codec = getattr(rule, "codec", None)
    if codec is None:
        return (cells % 255).astype(np.uint8)
    # layered states: base symbols light, data mid, particles and seeds dark
    sec = codec.secondary_index(cells)
    prim = codec.primary_index(cells)
    plain = 160 + (prim * 90 // max(codec.nq0 - 1, 1))
    out = np.where(sec == 0, plain, np.where(sec >= codec.q23_base, 100, 20))
    return out.astype(np.uint8)


def pgm(rule: LocalRule, rows: list[Window], width: int | None = None) -> bytes:
    """Binary PGM, one row per time step; cells outside a shrinking exact
    window are drawn at level 255."""
    width = width or max(len(r) for r in rows)
    img = np.full((len(rows), width), 255, dtype=np.uint8)
    first = rows[0].origin
    for k, row in enumerate(rows):
        off = row.origin - first
        img[k, off : off + len(row)] = _levels_for(rule, row.cells)
    return f"P5\n{width} {len(rows)}\n255\n".encode() + img.tobytes()


# ---------------------------------------------------------------------------
# simulate


@dataclass
class RunConfig:
    rule: str = "eca-184"
    measure: str = "uniform"
    width: int = 4096
    steps: int = 512
    checkpoints: list[int] = field(default_factory=list)
    words: list[str] = field(default_factory=list)
    seeds: list[int] = field(default_factory=lambda: [0])
    boundary: str = TORUS
    mode: str = "instantaneous"
    render: bool = False
    out: str = "out"

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        extra = set(obj) - set(cls.__dataclass_fields__)
        if extra:
            raise ConfigError(f"unknown run config field(s): {sorted(extra)}")
        return cls(**obj)

    def validate(self, rule: LocalRule) -> None:
        if self.boundary not in (EXACT, TORUS):
            raise ConfigError(f"boundary must be exact or torus, got {self.boundary!r}")
        if self.steps < 0 or self.width < 1:
            raise ConfigError("steps must be >= 0 and width >= 1")
        longest = max((len(rule.alphabet.split(w)) for w in self.words), default=1)
        if self.boundary == EXACT and self.width < 2 * rule.radius * self.steps + longest + 1:
            raise WindowTooSmall(f"exact window of width {self.width} cannot run {self.steps} steps (need {2 * rule.radius * self.steps + longest + 1})")
        if self.boundary == TORUS and self.width < 2 * rule.radius + 1:
            raise ConfigError("torus narrower than one neighbourhood")
        bad = [t for t in self.checkpoints if not 0 <= t <= self.steps]
        if bad:
            raise ConfigError(f"checkpoints outside [0, steps]: {bad}")
        if self.render and self.width * (self.steps + 1) > 64 * 2**20:
            raise ConfigError("render would exceed 64 MiB; lower width or steps")


def _sampler(cfg: RunConfig, rule: LocalRule):
    """seed -> initial window.  ``seeds:<p>`` scatters seeds over uniform base
    symbols, for layered construction rules."""
    from .measure import sample_window

    if cfg.measure.startswith("seeds:"):
        from .toolbox import SegmentConfig, sample_row

        if not hasattr(rule, "engine"):
            raise ConfigError("the seeds:<p> measure needs a construction rule")
        try:
            p_seed = float(cfg.measure.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad seed density in {cfg.measure!r}") from None
        if not 0 <= p_seed <= 1:
            raise ConfigError("seed density must lie in [0, 1]")
        return lambda seed: Window(sample_row(rule.codec, SegmentConfig(width=cfg.width, p_seed=p_seed, seed=seed)).cells, 0, cfg.boundary)
    measure = load_measure(cfg.measure, rule.alphabet)
    return lambda seed: sample_window(measure, cfg.width, seed, cfg.boundary)


def cmd_simulate(cfg: RunConfig, threads: int) -> int:
    from .stats import default_checkpoints, density_trace, write_trace_csv

    rule = load_rule(cfg.rule)
    cfg.validate(rule)
    sampler = _sampler(cfg, rule)
    checkpoints = sorted(set(cfg.checkpoints)) or default_checkpoints(cfg.steps)
    if cfg.mode == "cesaro":
        record = "all"
    else:
        record = "all" if cfg.render else set(checkpoints)
    out = Outputs(Path(cfg.out))

    def one(seed: int):
        w = sampler(seed)
        tr = evolve(rule, w, cfg.steps, record=record)
        dt = density_trace(tr, cfg.words, checkpoints, cfg.mode, rule.alphabet) if cfg.words else None
        img = pgm(rule, tr.rows, cfg.width) if cfg.render else None
        return seed, dt, img

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        results = list(ex.map(one, cfg.seeds))
    traces = []
    for seed, dt, img in results:
        if dt is not None:
            dt.replica = seed
            traces.append(dt)
        if img is not None:
            out.write(f"spacetime-seed{seed}.pgm", img)
    if traces:
        out.write("trace.csv", write_trace_csv(traces))
    out.manifest("simulate", asdict(cfg) | {"checkpoints": checkpoints}, list(cfg.seeds))
    print(f"wrote {len(out.files)} file(s) to {out.dir}")
    return 0


# ---------------------------------------------------------------------------
# other commands


def cmd_persistent(args) -> int:
    from .stats import estimate_persistence, verdicts_to_json

    words = _csv_list(args.words)
    if not words:
        raise ConfigError("give at least one word with --words")
    rule = load_rule(args.rule)
    measure = load_measure(args.measure, rule.alphabet)
    verdicts = estimate_persistence(rule, measure, words, args.horizon, args.replicas, args.width, seed=args.seed)
    text = verdicts_to_json(verdicts)
    out = Outputs(Path(args.out))
    out.write("verdicts.json", text + "\n")
    out.manifest("persistent", _params(args), [args.seed])
    for v in verdicts:
        print(f"{v.word}\t{v.verdict}\tlast={v.last_value:.6g}\teps={v.confidence_radius:.3g}")
    return 0


def cmd_build(args) -> int:
    from .toolbox import ConstructionParams, random_neighbourhoods, rule_from_params, seed_image_audit, validate_params

    p = ConstructionParams.load(args.params)
    diag = validate_params(p)
    print(diag.report())
    if not diag.ok:
        for c in diag.violations:
            print(f"violated: {c.inequality}", file=sys.stderr)
        return 2
    rule = rule_from_params(p)
    nb = random_neighbourhoods(rule.codec, args.audit, seed=args.seed, mix="sparse")
    seeds = seed_image_audit(rule, nb)
    report = {"diagnostics": diag.to_json(), "alphabet_size": rule.codec.size, "audit": {"neighbourhoods": args.audit, "seed_images": seeds}, "rule": rule.to_json()}
    out = Outputs(Path(args.out))
    out.write("build.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    out.manifest("build", _params(args), [args.seed])
    print(f"alphabet size {rule.codec.size}; seed images in {args.audit} neighbourhoods: {seeds}")
    return 0 if seeds == 0 else 3


def cmd_walls(args) -> int:
    import itertools

    from .analysis import check_wall

    rule = load_rule(args.rule)
    names = rule.alphabet.states
    lines = []
    for n in range(1, args.max_len + 1):
        for w in itertools.product(names, repeat=n):
            word = "".join(w) if rule.alphabet.single_char else " ".join(w)
            cert = check_wall(rule, word, args.horizon, seed=args.seed)
            lines.append(json.dumps(cert.to_json(), sort_keys=True))
            extra = f" at t={cert.refuted_at}" if cert.refuted_at is not None else ""
            print(f"{word}\t{cert.status}{extra}")
    out = Outputs(Path(args.out))
    out.write("walls.jsonl", "\n".join(lines) + "\n")
    out.manifest("walls", _params(args), [args.seed])
    return 0


def cmd_oracle(args) -> int:
    from .measure import exact_pushforward

    rule = load_rule(args.rule)
    measure = load_measure(args.measure, rule.alphabet)
    value = exact_pushforward(rule, measure, args.word, args.t, budget=args.budget)
    print(value)
    return 0


def cmd_render(args) -> int:
    cfg = RunConfig(rule=args.rule, measure=args.measure, width=args.width, steps=args.steps, seeds=[args.seed], boundary=args.boundary, render=True, out=args.out)
    return cmd_simulate(cfg, 1)


def cmd_report(args) -> int:
    from .toolbox import ConstructionParams, SegmentConfig, rule_from_params, segment_report
    from .toolbox.segments import sample_row

    p = ConstructionParams.load(args.params) if args.params else ConstructionParams()
    rule = rule_from_params(p)
    checkpoints = tuple(_csv_list(args.checkpoints, int)) or tuple(p.t(i + 1) - 1 for i in range(1, p.stage(args.horizon)))
    cfg = SegmentConfig(width=args.width, horizon=args.horizon, p_seed=args.p_seed, seed=args.seed, checkpoints=checkpoints)
    init = sample_row(rule.codec, cfg)
    eng = rule.engine(init, tuple(_csv_list(args.words)))
    snaps = eng.run(cfg.horizon, cfg.checkpoints)
    out = Outputs(Path(args.out))
    rows = [asdict(s) | {"segments": len(s.segments), "min_size": min((g["size"] for g in s.segments), default=None)} for s in snaps]
    out.write("snapshots.json", json.dumps(rows, indent=1, sort_keys=True) + "\n")
    out.write("events.jsonl", "".join(json.dumps(e, sort_keys=True) + "\n" for e in eng.events))
    final = segment_report(Window(eng.materialize(cfg.horizon), 0, TORUS), cfg.horizon, p, rule.codec)
    out.write("segments.json", json.dumps(final.to_json(), sort_keys=True) + "\n")
    out.manifest("report", _params(args), [args.seed])
    for s in rows:
        print(f"t={s['t']}\tstage={s['stage']}\tsegments={s['segments']}\tmin={s['min_size']}\twell-sized={s['well_sized_cells']:.3f}\tinternal={s['internal']:.3f}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _params(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func",)}


def _threads(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("MULIMIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"MULIMIT_THREADS must be an integer, got {env!r}") from None
    return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mulimit", description="Simulate cellular automata and estimate their limit behaviour.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: $MULIMIT_THREADS or 1)")
    common.add_argument("--out", default="out", help="output directory")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="evolve random configurations and record word densities")
    s.add_argument("--config", help="RunConfig JSON; flags below override it")
    s.add_argument("--rule")
    s.add_argument("--measure")
    s.add_argument("--width", type=int)
    s.add_argument("--steps", type=int)
    s.add_argument("--checkpoints", help="comma separated times")
    s.add_argument("--words", help="comma separated words")
    s.add_argument("--seeds", help="comma separated seeds (default: --seed)")
    s.add_argument("--boundary", choices=[EXACT, TORUS])
    s.add_argument("--mode", choices=["instantaneous", "cesaro"])
    s.add_argument("--render", action="store_true", help="also write a PGM space-time image per seed")

    s = sub.add_parser("persistent", parents=[common], help="heuristic persistence verdicts for words")
    s.add_argument("--rule", required=True)
    s.add_argument("--measure", default="uniform")
    s.add_argument("--words", default="")
    s.add_argument("--horizon", type=int, default=200)
    s.add_argument("--replicas", type=int, default=3)
    s.add_argument("--width", type=int, default=20_000)

    s = sub.add_parser("build", parents=[common], help="validate construction parameters and audit the rule")
    s.add_argument("params", help="construction parameter JSON file")
    s.add_argument("--audit", type=int, default=10_000, help="random neighbourhoods for the seed audit")

    s = sub.add_parser("walls", parents=[common], help="wall certificates for all words up to a length")
    s.add_argument("--rule", required=True)
    s.add_argument("--max-len", type=int, default=1)
    s.add_argument("--horizon", type=int, default=64)

    s = sub.add_parser("oracle", parents=[common], help="exact probability of a word at time t")
    s.add_argument("--rule", required=True)
    s.add_argument("--measure", default="uniform")
    s.add_argument("--word", required=True)
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--budget", type=int, default=10**8)

    s = sub.add_parser("render", parents=[common], help="PGM space-time diagram of one random run")
    s.add_argument("--rule", required=True)
    s.add_argument("--measure", default="uniform")
    s.add_argument("--width", type=int, default=512)
    s.add_argument("--steps", type=int, default=256)
    s.add_argument("--boundary", choices=[EXACT, TORUS], default=TORUS)

    s = sub.add_parser("report", parents=[common], help="run the layered construction and report its segments")
    s.add_argument("--params", help="construction parameter JSON file (default parameters otherwise)")
    s.add_argument("--width", type=int, default=20_000)
    s.add_argument("--horizon", type=int, default=256)
    s.add_argument("--p-seed", type=float, default=0.1)
    s.add_argument("--checkpoints", help="comma separated times (default: every t_(i+1)-1)")
    s.add_argument("--words", default="ab", help="words counted inside good segments")
    return ap


def _run_config(args) -> RunConfig:
    base = RunConfig.from_json(_read_json(args.config)) if args.config else RunConfig(seeds=[args.seed])
    over = {
        "rule": args.rule,
        "measure": args.measure,
        "width": args.width,
        "steps": args.steps,
        "checkpoints": _csv_list(args.checkpoints, int) if args.checkpoints else None,
        "words": _csv_list(args.words) if args.words else None,
        "seeds": _csv_list(args.seeds, int) if args.seeds else None,
        "boundary": args.boundary,
        "mode": args.mode,
        "out": args.out if args.out != "out" or not args.config else None,
    }
    for k, v in over.items():
        if v is not None:
            setattr(base, k, v)
    if args.render:
        base.render = True
    return base


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads = _threads(args.threads)
        if args.command == "simulate":
            return cmd_simulate(_run_config(args), threads)
        handler = {
            "persistent": cmd_persistent,
            "build": cmd_build,
            "walls": cmd_walls,
            "oracle": cmd_oracle,
            "render": cmd_render,
            "report": cmd_report,
        }[args.command]
        return handler(args)
    except MulimitError as e:
        print(f"error [{e.kind}]: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError, KeyError, TypeError) as e:
        print(f"error [runtime]: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
