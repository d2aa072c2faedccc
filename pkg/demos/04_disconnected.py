# %% [markdown]
# Sets need not be connected
#
# Two separated boxes grow about their own centres.  Nesting and volume are
# all the reuse scheme needs, so the cost formula holds unchanged.

# %%
import numpy as np

from samplereuse import Box, BoxUnion, Constant, build_chain, make_stream, radial_ks_test, run
from samplereuse.complexity import trial_statistics

base = BoxUnion((Box([1.0, 0.5], center=[-2.0, 0.0]), Box([0.5, 1.5], center=[3.0, 0.0])))
scales = np.geomspace(0.5, 1.0, 20)
chain = build_chain([base.scaled(s) for s in scales], labels=scales)

res = run(chain, 500, Constant(True), make_stream(seed=4))
pts = res.delivered_points(0)
print("share of smallest-set points in each box:", np.bincount(chain[0].component_of(pts)) / len(pts))
print("radial KS p-value, smallest set:", radial_ks_test(chain[0], pts))

# %%
ledgers = [run(chain, 500, Constant(True), make_stream(4, t)).ledger for t in range(100)]
rep = trial_statistics(ledgers)
print(f"mean {rep.mean_total:.1f} +/- {rep.stderr_total:.1f}, exact {rep.expected_total:.1f}")
