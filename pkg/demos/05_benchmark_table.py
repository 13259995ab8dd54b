"""
A small Monte-Carlo comparison with lasso-Cox
=============================================

Each replication simulates a training and an independent test sample, tunes
both methods by CVPL on the training half and scores the test half. The
acceptance suite runs the same harness with 50 replications.
"""
# %%
import sys

from reggkm import simgen

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 4
res = simgen.run_benchmark(settings=[1], reps=reps, censor_rates=(0.0, 0.1), seed=0)
print(res.table())
print(f"{len(res.failures)} failed replications")

# %%
# Per-replication rows and the summary are plain CSV.
res.write_replications("bench_replications.csv")
res.write_summary("bench_summary.csv")
