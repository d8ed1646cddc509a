#!/usr/bin/env python3
"""Survey the fold procedure over random free-group automorphisms.

Draws random composites of elementary Nielsen moves, runs the train track
search on each, and tallies the outcomes: expanding train tracks (with their
stretch factors), finite-order certificates, reductions to an invariant
subgraph, and capped non-termination reports.

Example:
    python3 scripts/random_survey.py --rank 3 --samples 200 --seed 7
"""

from __future__ import annotations

import argparse
import random
import statistics
import time
from collections import Counter
from dataclasses import dataclass

from outerspace.marked_metric import random_automorphism
from outerspace.train_track_algo import (
    FiniteOrderCertificate,
    NonTerminationCertificate,
    ReductionCertificate,
    TrainTrackCertificate,
    find_train_track,
)


@dataclass(frozen=True)
class SurveyConfig:
    rank: int = 3
    samples: int = 200
    steps: int = 12
    seed: int = 0


def parse_args(argv=None) -> SurveyConfig:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rank", type=int, default=SurveyConfig.rank)
    parser.add_argument("--samples", type=int, default=SurveyConfig.samples)
    parser.add_argument("--steps", type=int, default=SurveyConfig.steps,
                        help="number of Nielsen moves composed per sample")
    parser.add_argument("--seed", type=int, default=SurveyConfig.seed)
    args = parser.parse_args(argv)
    return SurveyConfig(args.rank, args.samples, args.steps, args.seed)


def main(argv=None) -> int:
    cfg = parse_args(argv)
    rng = random.Random(cfg.seed)
    tally: Counter = Counter()
    lams = []
    orders = Counter()
    worst = (0.0, None)
    start = time.perf_counter()
    for i in range(cfg.samples):
        phi = random_automorphism(cfg.rank, cfg.steps, rng)
        t0 = time.perf_counter()
        cert = find_train_track(phi)
        dt = time.perf_counter() - t0
        if dt > worst[0]:
            worst = (dt, phi)
        tally[type(cert).__name__] += 1
        if isinstance(cert, TrainTrackCertificate):
            lams.append(cert.lam)
        elif isinstance(cert, FiniteOrderCertificate):
            orders[cert.order] += 1
    total = time.perf_counter() - start

    print(
        f"rank {cfg.rank}, {cfg.samples} samples of {cfg.steps} Nielsen moves, "
        f"seed {cfg.seed}  ({total:.2f}s total, worst single run {worst[0]:.2f}s)"
    )
    width = max(len(k) for k in tally) if tally else 0
    for kind in (
        TrainTrackCertificate,
        FiniteOrderCertificate,
        ReductionCertificate,
        NonTerminationCertificate,
    ):
        n = tally.get(kind.__name__, 0)
        print(f"  {kind.__name__:<{width}}  {n:>5}  ({100.0 * n / cfg.samples:5.1f}%)")
    if lams:
        print(
            f"\nexpanding stretch factors: min {min(lams):.6f}  "
            f"median {statistics.median(lams):.6f}  max {max(lams):.6f}"
        )
    if orders:
        per = ", ".join(f"order {k}: {v}" for k, v in sorted(orders.items()))
        print(f"finite orders seen: {per}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
