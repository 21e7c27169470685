"""Newton and relaxed Newton: Smale's obstruction, basin measures, and the continuous flow.

Run with ``python3 demos/04_newton_basins.py``.
"""
# %%
from pathlib import Path

from transdyn.julia import save_grid
from transdyn.newton import IntegralTarget, basin_grid, basin_measures, flow_basin, make_relaxed, smale_test

SMALE = "z^3 - z + 0.7071067811865476"

# %% [markdown]
# The free critical point 0 of Newton's map falls into a superattracting 2-cycle,
# so an open set of seeds never reaches a root.

# %%
setup = make_relaxed(SMALE)
rep = smale_test(setup)
print(rep.verdict, [(s.point, s.record.fate.kind, s.record.fate.period) for s in rep.obstructions()])

# %% [markdown]
# Relaxing the step (h < 1) destroys the cycle and the non-convergent area shrinks.

# %%
reps = basin_measures([make_relaxed(SMALE, h) for h in (1.0, 0.5, 0.25)], (-2, 2, -2, 2), 120, 120, flow=False)
for r in reps:
    print(f"h={r.h}: nonconvergent {r.nonconvergent:.4f}  fractions {[round(x, 4) for x in r.fractions]}")

Path("demo_out").mkdir(exist_ok=True)
print(save_grid(basin_grid(setup, (-2, 2, -2, 2), 300, 300), Path("demo_out") / "smale_basins", png=True))

# %% [markdown]
# The limit h -> 0 is the flow dz/dt = -g/g'. For g = z^2 - 1 the imaginary axis
# runs into the critical point 0 in finite time.

# %%
quad = make_relaxed("z^2 - 1")
for z0 in (2.0, 0.3 + 0.8j, 2j):
    print(z0, flow_basin(quad, z0).to_dict())

# %% [markdown]
# Targets given as integrals, g(z) = int_0^z p(t) e^{q(t)} dt + c, work the same way.

# %%
erf_like = IntegralTarget("1", "-z^2", c=-0.5)
print(erf_like.smale_test().verdict)
