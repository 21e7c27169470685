"""What happens to a seed: attracting basins, Leau petals, Baker domains, wandering domains.

Run with ``python3 demos/02_fatou_fates.py``.
"""
# %%
import numpy as np

from transdyn import iterate, parse
from transdyn.fatou import classify_seed, escape_rate_check, linear_growth_ratio

CASES = [
    ("0.3*exp(z)", 0.0),
    ("exp(z) - 1", -0.5),
    ("z + 1 + exp(-z)", 2.0),
    ("1/z - exp(z)", -10.0),
    ("z - 1 + exp(-z) + 6.283185307179586*i", 0.1),
    ("exp(z)", 1.0),
]

# %%
for text, seed in CASES:
    label = classify_seed(parse(text), seed)
    print(f"{text:42s} from {seed:5}: {label.summary()}")

# %% [markdown]
# In the Baker domain of z + 1 + e^-z orbits creep to the right at unit speed, so
# log|z_n| grows like log n rather than linearly.

# %%
rec = iterate(parse("z + 1 + exp(-z)"), 1.0, 2000, escape_radius=1e3)
print("growth ratio |z_n|/n over 50..500:", round(linear_growth_ratio(rec.points, 50, 500), 4))
print(escape_rate_check(rec, True).to_dict())

# %% [markdown]
# For 1/z - e^z the orbit from -10 alternates between a far-left point and a
# point near 0; the two sub-orbits move slowly, roughly reciprocal to each other.

# %%
rec = iterate(parse("1/z - exp(z)"), -10, 40, escape_radius=1e300)
a = np.abs(rec.points)
print("even |z|:", np.round(a[0::2][:6], 3), "...", round(a[0::2][-1], 3))
print("odd  |z|:", np.round(a[1::2][:6], 4), "...", round(a[1::2][-1], 4))
