"""Julia-set pictures written as PGM (and PNG) with a JSON sidecar.

Run with ``python3 demos/03_julia_rasters.py``; images land in ``demo_out/``.
"""
# %%
from pathlib import Path

from transdyn import parse
from transdyn.julia import boundary_extract, raster_escape, raster_preimage, real_axis_transitions, save_grid

OUT = Path("demo_out")
OUT.mkdir(exist_ok=True)

# %% [markdown]
# Escape-time raster of 0.3 e^z: one attracting basin, with the escaping hairs
# of a Cantor bouquet reaching out to the right. The boundary between the two
# codes approximates the Julia set.

# %%
g = raster_escape(parse("0.3*exp(z)"), (0, 10, -5, 5), 300, 300)
print(g.counts())
print("real-axis transitions:", real_axis_transitions(g)[:4])
print(save_grid(boundary_extract(g), OUT / "exp03", png=True))

# %% [markdown]
# For lambda tan z the Julia set sits on the real line. Backward preimages of
# the poles show it: for lambda = 2 they spread along the axis; for lambda = 0.5
# they form a sparse Cantor-like dust.

# %%
for text, name in (("2*tan(z)", "tan2"), ("0.5*tan(z)", "tan05")):
    r = raster_preimage(parse(text), (-4, 4, -4, 4), 400, 400, 3)
    print(text, r.counts(), save_grid(r, OUT / name, png=True))
