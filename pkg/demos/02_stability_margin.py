# %% [markdown]
# Probabilistic stability margin of an uncertain cubic
#
# The characteristic polynomial ``s^3 + a2 s^2 + a1 s + a0`` has nominal
# roots -1, -2, -3.  Each uncertainty ``q`` in a box of half-width ``r``
# shifts the coefficients linearly; we estimate the fraction of the box
# that stays stable and read off the margins.

# %%
import numpy as np

from samplereuse import Box, HurwitzCubic, build_chain, estimate_curve, make_stream, margin, run

nominal = [6.0, 11.0, 6.0]
P = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.5, 0.0, 4.0]])
pred = HurwitzCubic(nominal, P)

scales = np.linspace(0.5, 4.0, 15)
chain = build_chain([Box([1.0, 1.0, 1.0]).scaled(s) for s in scales], labels=scales)

res = run(chain, 4000, pred, make_stream(seed=3))
curve = estimate_curve(res, chain.labels, level=0.99)
lo, hi = curve.ci
for r, p, a, b in zip(curve.labels, curve.estimate, lo, hi):
    print(f"r={r:4.2f}  P={p:.4f}  [{a:.4f}, {b:.4f}]")

# %%
for eps in (0.0, 0.01, 0.05):
    print(f"eps={eps:<5} margin {margin(curve, eps)}  conservative {margin(curve, eps, conservative=True)}")
print("experiments:", res.ledger.total, "instead of", res.ledger.naive_cost)
