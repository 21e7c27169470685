"""Periodic points and their multipliers.

Run with ``python3 demos/01_periodic_points.py``.
"""
# %%
import numpy as np

from transdyn import parse
from transdyn.newton import newton_map
from transdyn.periodic import REPELLING, find_periodic

# %% [markdown]
# The exponential has two fixed points near 0.318 +/- 1.337i, both repelling.

# %%
exp = parse("exp(z)")
for p in find_periodic(exp, 1, (-3, 3, -3, 3), 60):
    print(f"fixed point {p.location:.6f}  |lambda| = {abs(p.multiplier):.4f}  {p.stability}")

# %% [markdown]
# Cycles of period 2 and 3 are plentiful and every one of them repels.

# %%
for n in (2, 3):
    res = find_periodic(exp, n, (-10, 10, -10, 10), 120)
    mods = np.array([abs(p.multiplier) for p in res])
    rep = sum(p.stability.kind == REPELLING for p in res)
    print(f"period {n}: {len(res)} cycles, {rep} repelling, min |lambda| = {mods.min():.3f}")

# %% [markdown]
# e^z + z has no fixed points at all, yet period 2 is populated.

# %%
f = parse("exp(z) + z")
print("period 1:", len(find_periodic(f, 1, (-50, 50, -50, 50), 150)))
print("period 2:", len(find_periodic(f, 2, (-50, 50, -50, 50), 150)))

# %% [markdown]
# Newton's map for z^3 - z + 1/sqrt(2) carries a superattracting 2-cycle {0, 1/sqrt(2)}
# that is not a root of the polynomial.

# %%
N = newton_map(parse("z^3 - z + 0.7071067811865476"))
for p in find_periodic(N, 2, (-2, 2, -2, 2), 100):
    print("cycle", [f"{c:.12f}" for c in p.cycle], p.stability, f"residual {p.residual:.1e}")
