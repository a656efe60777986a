"""Why look at the other candidates of the same transfer?

A pair scored in isolation cannot know that a sibling scores even higher.
Three ways to use the competition between candidates:

* +post    divide each transfer's scores by their sum,
* cascade  a second model sees the best candidate's score and features,
* chain    accept the best candidate, then re-score the rest knowing it.

This demo cross-validates all of them on a small benchmark (about a
minute).  The acceptance test runs the full-size version.

Run:  python3 demos/03_stacking.py
"""

from remitmatch import evalkit
from remitmatch.boost import HyperParams
from remitmatch.featgen import build_pairs
from remitmatch.synthgen import GenConfig, generate

dataset, _ = generate(GenConfig(n_clubs=5, n_transfers=12000, seed=3))
pairs = build_pairs(dataset)
hp = (HyperParams(n_rounds=50, max_depth=3),)
methods = ["baseline", "baseline+post", "cascade+post", "chain+post"]
report = evalkit.evaluate(methods, pairs=pairs, k=5, seed=0,
                          hyperparams={"baseline": hp, "cascade": hp * 2, "chain": hp * 3})

print(f"{pairs.n_groups} transfers, 5-fold CV, mean recall at the target precision\n")
print(f"{'method':15} {'all@99':>8} {'no-ID@99':>9} {'all@95':>8}")
for m in methods:
    cells = [report.recall(m, "all", 0.99), report.recall(m, "noid", 0.99), report.recall(m, "all", 0.95)]
    print(f"{m:15} " + " ".join(f"{'NA' if v is None else f'{v:.3f}':>8}" for v in cells))
print("\nTransfers without a member code are where the extra context matters most.")
