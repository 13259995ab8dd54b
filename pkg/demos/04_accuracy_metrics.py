"""
Censoring-adjusted C-statistic and time-dependent AUC
=====================================================
"""
# %%
import numpy as np

from reggkm import metrics

rng = np.random.default_rng(0)
n = 300
risk = rng.normal(size=n)
death = rng.exponential(size=n) / np.exp(risk)
cens = rng.exponential(scale=2.0, size=n)
time, status = np.minimum(death, cens), (death <= cens).astype(int)
print(f"censored {1 - status.mean():.0%}")

# %%
# Uno's C weights each usable pair by 1 / G(T_i-)^2, the inverse squared
# probability of remaining uncensored; the horizon defaults to the 70th
# percentile of observed time.
print("C true score :", round(metrics.c_statistic(risk, time, status=status), 4))
print("C noisy score:", round(metrics.c_statistic(risk + rng.normal(size=n), time, status=status), 4))

# %%
# AUC(t) compares the subjects failing at t with those still event-free; the
# summary averages it with weights 2 f(t) S(t).
t, auc, w = metrics.auc_curve(risk, time, status=status)
print("AUC(t) at first five event times:", np.round(auc[:5], 3))
print("integrated AUC:", round(metrics.auc_integrated(risk, time, status=status), 4))

# %%
# Both are rank statistics.
print("unchanged by exp():", metrics.c_statistic(np.exp(risk), time, status=status)
      == metrics.c_statistic(risk, time, status=status))
