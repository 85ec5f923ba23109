# %% [markdown]
# # Error scaling with the coupling strength
#
# The generalized response is exact through second order in lambda, so its
# error should fall like lambda^3.  The regression theorem with a frozen
# generator misses second-order memory terms and should only reach lambda^2.

# %%
from nmqrt.harness import onepoint_check, sweep_lambda
from nmqrt.scenario import load_fixture

for key in ("a", "c"):
    sc = load_fixture(key)
    rep = sweep_lambda(sc)
    print(f"fixture {key} ({sc.name}) at (t1, t2) = {sc.reference_point}")
    for r in rep["rows"]:
        print(f"  lambda={r['lambda']:<6} generalized {r['err_generalized']:.2e}   qrt {r['err_qrt']:.2e}")
    s = rep["slopes"]
    print(f"  slopes: generalized {s['err_generalized']:.2f}, qrt {s['err_qrt']:.2f}\n")

# %% [markdown]
# The one-time expectation value from the time-local master equation has
# the same cubic error.

# %%
rep = onepoint_check(load_fixture("a"))
print("one-point slope:", round(rep["slope"], 3))
