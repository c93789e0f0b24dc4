"""Diverse subset selection with a log-determinant (DPP) objective.

Items are random feature vectors.  log det of the kernel submatrix rewards
spread-out selections; a per-item shift keeps values non-negative.  Items
also belong to overlapping topic groups with caps, which is a p-system with
p equal to the number of groups an item can sit in.
"""

import numpy as np

from subopt import GroupCapSystem, LogDetObjective, brute_force_opt, estimate_p, preset_p_system, rep_sampling
from subopt.objectives import nonnegative_shift

rng = np.random.default_rng(3)
n, d = 14, 5
F = rng.standard_normal((n, d))
K = F @ F.T / d + 0.05 * np.eye(n)
f = LogDetObjective(K, shift=nonnegative_shift(K))

groups = [list(range(0, 8)), list(range(5, 14)), [0, 3, 6, 9, 12]]
system = GroupCapSystem(n, groups, [3, 3, 2])
print(f"group-cap system, p = {system.p} (estimate from overlaps: {estimate_p(groups, [3, 3, 2])})")

opt = brute_force_opt(f, system)
print(f"optimum {opt.opt_value:.3f} with {sorted(opt.opt_set)}")
for eps in (0.05, 0.2, 0.4):
    vals = [rep_sampling(f, system, preset_p_system(system.p, eps, s)).value for s in range(30)]
    rounds = rep_sampling(f, system, preset_p_system(system.p, eps, 0)).ledger.value_rounds
    print(f"epsilon {eps:4.2f}: mean value {np.mean(vals):.3f} ({np.mean(vals) / opt.opt_value:.0%} of optimum), "
          f"{rounds} rounds")
