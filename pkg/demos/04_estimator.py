# %% [markdown]
# # Estimating an evolved anticommutator from noisy traces
#
# The estimator replays the finite-difference protocol with Gaussian noise
# on each of the eight traces.  With delta ~ eps^(1/4) and noise
# eps0 ~ eps^(5/4) the error stays below eps.

# %%
import numpy as np

from nmqrt.estimator import CostModel, cost_total, simulate_estimator
from nmqrt.harness import estimator_inputs
from nmqrt.scenario import load_fixture

O1, O2, rho, L, t = estimator_inputs(load_fixture("a"))
for eps in (1e-1, 1e-2, 1e-3):
    errs = []
    for seed in range(200):
        est, diag = simulate_estimator(O1, O2, rho, L, t, eps, seed)
        errs.append(abs(est - diag["truth"]))
    errs = np.array(errs)
    print(f"eps={eps:g}: within eps {np.mean(errs <= eps):.1%}, worst error / eps {errs.max() / eps:.2f}")

# %% [markdown]
# Total cost grows as eps^-1.25 up to a polylogarithmic factor.

# %%
cm = CostModel(alpha=32.0)
for eps in (1e-2, 1e-3, 1e-4):
    r = cost_total(cm, 1.0, 1.0, eps) / cost_total(cm, 1.0, 1.0, 10 * eps)
    print(f"cost({eps:g}) / cost({10 * eps:g}) = 10^{np.log10(r):.3f}")
