"""Run the protocol over many seeds and summarize the outcomes behind the acceptance checks.

    python3 scripts/multiseed_study.py --seeds 20 --out study.json
    python3 scripts/multiseed_study.py --generator scripts/configs/weak_interaction.json --seeds 5
"""

import argparse
import json
import statistics
import sys

from softsense.study import PLANTED, run_seed
from softsense.synth import GeneratorConfig


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--first", type=int, default=0)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--generator", help="generator config JSON (seed is overridden per run)")
    ap.add_argument("--out", help="write per-seed outcomes as JSON")
    args = ap.parse_args(argv)

    base = GeneratorConfig.from_json(args.generator).to_dict() if args.generator else None
    outcomes = []
    for seed in range(args.first, args.first + args.seeds):
        gen = None
        if base is not None:
            gen = GeneratorConfig.from_dict({**base, "seed": seed})
        o = run_seed(seed, n_trees=args.trees, generator=gen)
        outcomes.append(o)
        print(f"seed {seed:>3}  rf {''.join(o.rf_ranking)}  filters-last {''.join(o.filter_last.values())}  "
              f"drop {o.drop:.3f}  test forest {o.test_rmse['forest']:.4f} tree {o.test_rmse['tree']:.4f} "
              f"linear {o.test_rmse['linear']:.4f}  gap {o.planted_gap:.3f}  "
              f"tree uses {''.join(o.tree_features)}  {o.seconds:.1f}s", flush=True)

    n = len(outcomes)
    print()
    print(f"forest top-3 = A,B,H       {sum(set(o.rf_ranking[:3]) == set(PLANTED) for o in outcomes)}/{n}")
    print(f"all filters rank C last    {sum(set(o.filter_last.values()) == {'C'} for o in outcomes)}/{n}")
    print(f"linear drop >= 50%         {sum(o.drop >= 0.5 for o in outcomes)}/{n}")
    print(f"forest <= tree             {sum(o.test_rmse['forest'] <= o.test_rmse['tree'] for o in outcomes)}/{n}")
    for fam in ("forest", "linear", "tree"):
        print(f"median test RMSE {fam:<9} {statistics.median(o.test_rmse[fam] for o in outcomes):.4f}")
    print(f"A,B,H forest within 15%    {sum(o.planted_gap <= 0.15 for o in outcomes)}/{n}")
    print(f"tree uses only A,B,H       {sum(set(o.tree_features) <= set(PLANTED) for o in outcomes)}/{n}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump([o.to_dict() for o in outcomes], fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
