"""
Garrote weights as variable selection
=====================================

In Setting 2 only z1..z5 enter the hazard; z6..z15 are noise. The penalty
lambda2 * sum(delta) shrinks all garrote weights and sets many of them to
exactly zero. Most noise coordinates drop out even at small lambda2, though
the selection is not perfect at n = 100.
"""
# %%
import warnings

import numpy as np

from reggkm import data, fitter, simgen
from reggkm.coxlik import LambdaTriple

ds = data.standardize(simgen.generate(simgen.SettingSpec(setting=2, n=100, seed=3)))

# %%
# Increasing lambda2 prunes more coordinates; a large enough value zeroes all
# of them and the model collapses to a linear Cox model in x.
warnings.simplefilter("ignore")  # a few fits use the whole cycle budget
for lam2 in (0.001, 0.2, 1.0, 10.0):
    m = fitter.fit(ds, LambdaTriple(0.01, lam2, 0.01))
    kept = [n for n, d in zip(ds.z_names, m.delta) if d > 0]
    print(f"lambda2={lam2:<6g} sum(delta)={m.delta.sum():.3f} kept {len(kept):2d}: {' '.join(kept)}")

# %%
# With every delta at zero, K is the all-ones matrix and h is constant, so
# beta equals the plain lasso-Cox fit on x alone.
m = fitter.fit(ds, LambdaTriple(0.01, 10.0, 0.1), fitter.FitConfig(tol=1e-10, max_outer_cycles=300))
b, _ = fitter.fit_linear_cox(ds.x, data.build_risk_index(ds), ds.status, 0.01)
print("max |beta - lasso beta| =", np.abs(m.beta - b).max())
