# %% [markdown]
# Skipping a region already known to be safe
#
# If the ball of radius ``r0`` is certified, sampling only the annulus
# ("donut") between ``r0`` and ``r`` and mapping back gives an unbiased
# estimate of P(r) with smaller variance than sampling the whole ball.

# %%
import numpy as np

from samplereuse import Ball, Donut, InnerBall, build_chain, donut_reconstruct, make_stream, naive_run, run
from samplereuse.estimation import variance_ratio

r0, r, rs, N, T = 1.0, 2.0, 1.5, 1000, 300
donut = build_chain([Donut(r0, r, dim=2)], labels=[r])
ball = build_chain([Ball(r, dim=2)], labels=[r])
pred = InnerBall(rs)

via_donut, direct = [], []
for t in range(T):
    wp = run(donut, N, pred, make_stream(5, t)).successes()[0] / N
    via_donut.append(donut_reconstruct(wp, donut[0].volume, Ball(r0, dim=2).volume, ball[0].volume))
    direct.append(naive_run(ball, N, pred, make_stream(5, t, "direct")).successes()[0] / N)

print("truth", (rs / r) ** 2)
print("donut mean", np.mean(via_donut), " direct mean", np.mean(direct))
print("variance ratio", np.var(via_donut, ddof=1) / np.var(direct, ddof=1),
      "predicted", variance_ratio((rs**2 - r0**2) / (r**2 - r0**2), donut[0].fraction))
