"""Two-colour automaton: synchronized fraction and colour densities near the horizon."""

import argparse

from mulimit.toolbox import AreasConfig, run_areas


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--width", type=int, default=10**6)
    ap.add_argument("--horizon", type=int, default=10**4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--p-junk", type=float, default=0.0)
    args = ap.parse_args()
    h = args.horizon
    cfg = AreasConfig(width=args.width, horizon=h, seed=args.seed, p_junk=args.p_junk, checkpoints=(1, 10, 100, 300, 1000, h - 2, h - 1))
    run = run_areas(cfg)
    print(f"quiet from t={run.quiet_from}")
    print("t,black,white,synchronized")
    for t, b, w, s in zip(run.times, run.black, run.white, run.synchronized):
        print(f"{t},{b:.5f},{w:.5f},{s:.5f}")


if __name__ == "__main__":
    main()
