"""
Accuracy against salt & pepper noise
====================================

Run the bundled noise ladder (one 500x400 scene with three circles, noise
from 1% to 10%) with a handful of seeds per level and print the table.
"""

import sys

from lacircle import load_suite, run_benchmark

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 5

name, entries, settings = load_suite("noise_ladder")
report = run_benchmark(entries, trials, base_seed=0, name=name)
print(report.to_table())

# ME should creep up with the noise level, and stay well under the failure line
worst = max(report.rows, key=lambda r: r.me_mean)
print(f"worst level: {worst.name} with ME {worst.me_mean:.3f}")
