"""Pilot run for the well-sized fraction: one seed not used by the acceptance
runs, printing the fraction of cells in well-sized segments at every t_i."""

import argparse
import json

from mulimit.toolbox import ConstructionParams, SegmentConfig, rule_from_params, run_construction


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=100)
    ap.add_argument("--width", type=int, default=200_000)
    ap.add_argument("--stages", type=int, default=100)
    ap.add_argument("--json", help="write the series here")
    args = ap.parse_args()
    p = ConstructionParams()
    times = tuple(sorted({p.t(i) for i in range(1, args.stages + 1)}))
    cfg = SegmentConfig(width=args.width, horizon=times[-1], seed=args.seed, checkpoints=times)
    snaps, _ = run_construction(rule_from_params(p), cfg)
    series = [(s.t, s.stage, s.well_sized_cells) for s in snaps]
    for t, i, f in series:
        print(f"t={t}\ti={i}\twell-sized={f:.4f}")
    print(f"gain {series[-1][2] - series[0][2]:.4f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(series, fh)


if __name__ == "__main__":
    main()
