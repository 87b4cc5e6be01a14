"""
Solver cost against the number of categories
============================================

Sweeps the one-, two- and three-category presets over three seeds and shows
how many excess-demand evaluations each pricing step needs.
"""
import sys

from gridmarket.report import run_sweep

out = sys.argv[1] if len(sys.argv) > 1 else "out/sweep"
rows = run_sweep("1..3", seeds=3, out_dir=out, write_runs=False)

print(f"{'categories':>10} {'queries':>9} {'ms/step':>8} {'residual':>9}")
for r in rows:
    print(f"{r['categories']:>10} {r['mean_queries']:>9.1f} {r['mean_millis']:>8.1f} {r['mean_residual']:>9.1f}")
print("growth 1 -> 2 categories: x%.1f" % (rows[1]["mean_queries"] / rows[0]["mean_queries"]))
