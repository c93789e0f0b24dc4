"""How many adaptive rounds does each algorithm need as n grows?

Greedy adds one element per round, so its round count tracks the solution
size.  The sampling algorithm's rounds grow only polylogarithmically.
Coverage objective with a cardinality cap of n/4.
"""

import time

from subopt.bench import InstanceSpec, generate_instance, run_algorithm

EPS = 0.3
print(f"{'n':>6} {'k':>5} | {'rep rounds':>10} {'rep value':>10} | {'greedy rounds':>13} {'greedy value':>12}")
for n in (128, 512, 2048):
    spec = InstanceSpec({"kind": "coverage"}, {"kind": "uniform", "k": n // 4}, n, seed=1)
    f, system = generate_instance(spec)
    t0 = time.perf_counter()
    _, rv, rl = run_algorithm(f, system, "rep-sampling", {"preset": "p-extendible", "epsilon": EPS}, seed=0)
    _, gv, gl = run_algorithm(f, system, "greedy", {}, seed=0)
    print(f"{n:>6} {n // 4:>5} | {rl.value_rounds:>10} {rv:>10.1f} | {gl.value_rounds:>13} {gv:>12.1f}"
          f"   ({time.perf_counter() - t0:.1f}s)")
