"""Pick sensor stations by Gaussian entropy, at most two per region.

The bundled 12-station fixture has three regions of four stations each.  We
maximise the (non-monotone) differential entropy of the selected stations'
readings under a partition matroid and compare the sampling algorithm against
greedy and the exact optimum.
"""

from importlib.resources import files

import numpy as np

from subopt import brute_force_opt, greedy, preset_p_system, rep_sampling
from subopt.bench import InstanceSpec, generate_instance, ingest_stations

csv_path = str(files("subopt") / "data" / "stations12.csv")
cov, regions = ingest_stations(csv_path)
print(f"{cov.shape[0]} stations, regions: {sorted(set(regions))}")

spec = InstanceSpec({"kind": "entropy", "stations_csv": csv_path},
                    {"kind": "partition", "stations_csv": csv_path, "caps": 2}, n=12)
f, system = generate_instance(spec)

opt = brute_force_opt(f, system)
print(f"exact optimum   {opt.opt_value:8.4f}  stations {sorted(opt.opt_set)}")

S = greedy(f, system)
print(f"greedy          {f(S):8.4f}  stations {sorted(S)}")

# the sampler is randomised; look at a handful of seeds
vals = []
for seed in range(20):
    res = rep_sampling(f, system, preset_p_system(system.p, 0.1, seed))
    vals.append(res.value)
best = int(np.argmax(vals))
res = rep_sampling(f, system, preset_p_system(system.p, 0.1, best))
print(f"rep-sampling    {np.mean(vals):8.4f}  mean over 20 seeds, best {max(vals):.4f}")
print(f"  best seed picks {sorted(res.solution)} "
      f"({', '.join(regions[i] for i in sorted(res.solution))})")
print(f"  ledger: {res.ledger.snapshot()}")
