"""
Ablations, quality modes, and the linear-time claim
===================================================

Three quick experiments on synthetics: drop each coarsening stage and
watch t change; swap the average-degree quality for label purity and
watch the coarsening slow down; time the pipeline across graph sizes
and fit the log-log slope.
"""

import time

import numpy as np

from granball import CoarsenConfig, coarsen
from granball._kernels import warmup
from granball.balls import ADAPTIVE_AD, PURITY_THRESHOLD
from granball.synth import er_graph, sbm_graph

warmup()  # compile the jitted kernels before timing anything

rng = np.random.default_rng(3)
g, blocks = sbm_graph([387] * 7, 0.012, 0.0006, rng)
print(f"fixture: {g.num_nodes} nodes, {g.num_edges} edges")

# ablations: -w/o splitting leaves the sqrt(N) partition; -w/o the
# initialization the adaptive rule almost never fires from the root
for name, cfg in [("full", CoarsenConfig(seed=1)),
                  ("wo split", CoarsenConfig(skip_split=True, seed=1)),
                  ("wo init", CoarsenConfig(skip_init=True, seed=1))]:
    res = coarsen(g, cfg)
    print(f"  {name:9s}: t={res.partition.t:4d} in {res.total_ms:6.1f} ms")

# purity-driven splitting recurses until every ball is label-pure,
# which costs far more than the average-degree rule on noisy labels
noisy = blocks.copy()
flip = rng.random(g.num_nodes) < 0.5
noisy[flip] = rng.integers(0, 7, int(flip.sum()))
for mode in (ADAPTIVE_AD, PURITY_THRESHOLD):
    res = coarsen(g, CoarsenConfig(mode=mode, seed=1), labels=noisy)
    print(f"  mode {mode:12s}: t={res.partition.t:4d} in {res.total_ms:6.1f} ms")

# scaling: average degree stays at 8 while N grows
print("scaling on ER graphs (median of 3):")
sizes = [10_000, 30_000, 100_000]
medians = []
for n in sizes:
    ger = er_graph(n, 8.0 / (n - 1), rng)
    times = []
    for _ in range(3):
        t0 = time.perf_counter()
        coarsen(ger, CoarsenConfig(seed=7))
        times.append(time.perf_counter() - t0)
    medians.append(float(np.median(times)))
    print(f"  N={n:7d}: {medians[-1] * 1000:7.1f} ms")
slope = np.polyfit(np.log(sizes), np.log(medians), 1)[0]
print(f"log-log slope {slope:.2f} (1.0 would be exactly linear)")
