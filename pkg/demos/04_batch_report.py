"""Three seeds on the forest and tunnel fixtures, summarised like a latency table.

Writes per-episode artifacts plus batch_summary.csv, coverage_vs_time.csv
and latency.txt under the output directory.
"""

import sys

from topoexplore.harness import EpisodeConfig, run_batch, with_seeds

out = sys.argv[1] if len(sys.argv) > 1 else "demo_batch"
configs = []
for kind in ("tunnel", "forest"):
    configs += with_seeds(EpisodeConfig(map=f"generated:{kind}", snapshot_every=0), [0, 1, 2])

report = run_batch(configs, out)
for e in report.entries:
    s = e.summary
    print(f"{e.config.name:7s} seed {e.config.seed}: {s['iterations']} iterations, coverage {s['coverage']:.4f}, "
          f"peak graph {s['peak_graph_bytes'] / 1e6:.3f} MB")
print()
print(report.latency_table(), end="")
