# %% [markdown]
# # Approaching the Markov limit
#
# Spreading the bath over eight modes makes its correlation function dephase
# quickly.  The memory terms of the generalized response then shrink and the
# two predictions move together.

# %%
import numpy as np

from nmqrt.bath import correlation_time
from nmqrt.harness import request
from nmqrt.response import sweep
from nmqrt.scenario import load_fixture

gaps = {}
for key in ("a", "b"):
    sc = load_fixture(key)
    res = sweep(request(sc))
    gaps[key] = np.abs(res.column("chi_total") - res.column("chi_qrt"))
    print(f"{key}: correlation time {correlation_time(sc.spectrum, 2.0):.3f}, "
          f"max |gen - qrt| = {gaps[key].max():.2e}")

# %%
print("ratio a / b at each grid point:")
print(np.round(gaps["a"] / gaps["b"], 1))
