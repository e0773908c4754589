"""Long construction run with two constant sequences: whole-row densities of
both words on a time grid, their running averages, and per-stage statistics
of good segments at t_(i+1)-1.  Writes CSV files and the event log."""

import argparse
from pathlib import Path

import numpy as np

from mulimit.sequences import ConstantGenerator, GrowingSequenceSpec
from mulimit.stats import count_in_row
from mulimit.toolbox import ConstructionParams, SegmentConfig, build_construction
from mulimit.toolbox.segments import sample_row


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--w", default="ab")
    ap.add_argument("--wp", default="cd")
    ap.add_argument("--stages", type=int, default=440, help="run through t_(stages+1)-1")
    ap.add_argument("--width", type=int, default=200_000)
    ap.add_argument("--grid", type=int, default=4096)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--policy", choices=["cap", "measured"], default="cap")
    ap.add_argument("--no-reschedule", action="store_true")
    ap.add_argument("--out", default="out/writing")
    args = ap.parse_args()

    p = ConstructionParams(wait_policy=args.policy, reschedule=not args.no_reschedule)
    seq = lambda word: GrowingSequenceSpec(ConstantGenerator(word, 0), name=word)
    rule = build_construction(seq(args.w), seq(args.wp), p)
    horizon = p.t(args.stages + 1) - 1
    ends = {p.t(i + 1) - 1 for i in range(1, args.stages + 1)}
    cfg = SegmentConfig(width=args.width, horizon=horizon, seed=args.seed, checkpoints=tuple(sorted(ends | set(range(0, horizon + 1, args.grid)))))
    eng = rule.engine(sample_row(rule.codec, cfg), (args.w, args.wp))
    idx = {s: k for k, s in enumerate(p.alphabet)}
    pats = [np.array([idx[c] for c in u]) for u in (args.w, args.wp)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid_rows, stage_rows = [], []

    def record(s):
        if s.t % args.grid == 0:
            cells = eng.materialize(s.t)
            plain = np.where(rule.codec.secondary_index(cells) == 0, cells, -1)
            grid_rows.append((s.t, *(count_in_row(plain, u) / args.width for u in pats)))
        if s.t in ends:
            occ = [s.words[u][0] / max(s.words[u][1], 1) for u in (args.w, args.wp)]
            stage_rows.append((s.t, s.stage, len(s.segments), s.well_sized_cells, s.good_cells, s.internal, *occ))

    eng.run(horizon, cfg.checkpoints, on_snapshot=record)
    g = np.array(grid_rows)
    ces = np.cumsum(g[:, 1:], axis=0) / np.arange(1, len(g) + 1)[:, None]
    with open(out / "grid.csv", "w") as fh:
        fh.write(f"t,{args.w},{args.wp},cesaro_{args.w},cesaro_{args.wp}\n")
        for row, c in zip(g, ces):
            fh.write(f"{int(row[0])},{row[1]:.5f},{row[2]:.5f},{c[0]:.5f},{c[1]:.5f}\n")
    with open(out / "stages.csv", "w") as fh:
        fh.write(f"t,stage,segments,well_sized,good,internal,{args.w}_in_good,{args.wp}_in_good\n")
        for r in stage_rows:
            fh.write(",".join(str(x) if isinstance(x, int) else f"{x:.5f}" for x in r) + "\n")
    eng.write_events(out / "events.jsonl")
    print(f"final: Cesaro {args.w}={ces[-1, 0]:.4f} {args.wp}={ces[-1, 1]:.4f}; last stage row {stage_rows[-1]}")


if __name__ == "__main__":
    main()
