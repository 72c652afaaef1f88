"""Run the full pipeline for one seed and print its tables side by side.

    python3 scripts/reproduce_tables.py --seed 0 --out-dir results/seed0
"""

import argparse
import json
import sys
from pathlib import Path

from softsense.pipeline import PipelineConfig, run_pipeline

TABLES = [
    ("forest permutation importance", "importance.csv"),
    ("filter rankings", "filters.csv"),
    ("forward selection, linear regression (validation rows)", "selection_linear.csv"),
    ("forward selection, pruned regression tree (validation rows)", "selection_tree.csv"),
    ("forward selection, random forest (validation rows)", "selection_forest.csv"),
    ("test set, top-k features vs all features", "test_results.csv"),
]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--input", type=Path)
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    args = ap.parse_args(argv)

    result = run_pipeline(PipelineConfig(out_dir=args.out_dir, seed=args.seed, input=args.input,
                                         n_trees=args.trees, bundle_family="forest"))
    manifest = result.manifest
    print(f"data: {json.dumps(manifest.get('data', {}), default=str)}")
    for title, name in TABLES:
        path = args.out_dir / name
        if path.exists():
            print(f"\n== {title} ==")
            print(path.read_text().rstrip())
    if result.status:
        print(f"\nfailed at {manifest['failed_stage']}: {manifest['error']}", file=sys.stderr)
    print(f"\n{manifest['elapsed_seconds']}s, outputs in {args.out_dir}")
    return result.status


if __name__ == "__main__":
    sys.exit(main())
