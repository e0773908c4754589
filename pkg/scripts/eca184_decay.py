"""Density of 00 and of the alternating pair under rule 184 from uniform
random rows, printed as CSV."""

import argparse

import numpy as np

from mulimit.engine import TORUS, binary_alphabet, eca_rule, evolve
from mulimit.measure import BernoulliMeasure, binomial_sigma, sample_window
from mulimit.stats import count_in_row


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--width", type=int, default=10**6)
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=184)
    ap.add_argument("--checkpoints", default="10,100,1000,5000")
    args = ap.parse_args()
    cps = sorted({int(x) for x in args.checkpoints.split(",")})
    a = binary_alphabet()
    tr = evolve(eca_rule(184), sample_window(BernoulliMeasure.uniform(a), args.width, args.seed, TORUS), args.steps, record=set(cps))
    print("t,d00,sigma00,d01+d10")
    for t, row in zip(tr.times, tr.rows):
        if t not in cps:
            continue
        d00 = count_in_row(row.cells, np.array([0, 0])) / args.width
        alt = (count_in_row(row.cells, np.array([0, 1])) + count_in_row(row.cells, np.array([1, 0]))) / args.width
        print(f"{t},{d00:.6f},{binomial_sigma(d00, args.width):.2e},{alt:.6f}")


if __name__ == "__main__":
    main()
