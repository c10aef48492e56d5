"""
A quick MovieLens-100K run
==========================

Evaluates a handful of measures on one split per ratio and sets the mean
absolute error beside the published benchmark averages.  Point
``SIMCF_DATA_DIR`` at the directory holding ``u.data`` first.  The full
sweep is ``simcf eval --k 20,40,60 --out run/``.
"""

import os
import sys
from pathlib import Path

from simcf import ExperimentConfig, emit_report, load_ratings, run_experiment
from simcf.ratings import MOVIELENS_100K_SHAPE
from simcf.reference import reference_report

root = os.environ.get("SIMCF_DATA_DIR")
if not root or not (Path(root) / "u.data").is_file():
    sys.exit("set SIMCF_DATA_DIR to the directory containing u.data")

data = load_ratings(Path(root) / "u.data", num_users=MOVIELENS_100K_SHAPE[0], num_items=MOVIELENS_100K_SHAPE[1])
print(len(data), "ratings")

# %%
config = ExperimentConfig(ratios=(0.1, 0.5, 0.9), n_folds=1, measures=("Jaccard", "PSS", "TAJ", "CosineJ"))
report = run_experiment(data, config)
print(emit_report(report, "markdown").decode())

# %%
published = reference_report()
for m in report.measures:
    ours, theirs = report.average("mae", m), published.average("mae", m)
    print(f"{m:>8}  MAE {ours:.4f}  published {theirs:.4f}  gap {ours - theirs:+.4f}")
