"""Symbolic dynamics of lambda e^z for 0 < lambda < 1/e.

Run with ``python3 demos/05_cantor_bouquet.py``.
"""
# %%
import numpy as np

from transdyn.bouquet import (
    configure,
    endpoint_from_itinerary,
    escape_probe,
    itinerary,
    random_itineraries,
    verify_conjugacy,
)

cfg = configure(0.3, 2)
print(cfg.to_dict())

# %% [markdown]
# Each bounded integer sequence names a point whose orbit visits the strips
# in that order. Pulling back through log branches builds it.

# %%
s = (1, -2, 0, 2, -1, 0, 1, 1, 0, -1)
z = endpoint_from_itinerary(cfg, s)
print("endpoint", z, "itinerary", itinerary(cfg, z, len(s)))

# %% [markdown]
# Shifting the sequence matches applying the map.

# %%
its = random_itineraries(cfg, 100, 10)
print("conjugacy holds for", sum(verify_conjugacy(cfg, t, 8) for t in its), "of", len(its))

# %% [markdown]
# Longer prefixes pin the point down; the gap shrinks by roughly the expansion
# factor per symbol.

# %%
t = (1, 0) * 10
pts = [endpoint_from_itinerary(cfg, t[:k]) for k in (4, 8, 12, 16, 20)]
print("gaps between successive depths:", np.abs(np.diff(pts)))

# %% [markdown]
# The constructed points still escape when iterated forward past the prefix.

# %%
print([escape_probe(cfg, t) for t in its[:5]])
