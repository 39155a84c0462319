"""
The adaptive loop and its convergence rate
==========================================

Run the solve-estimate-mark-refine loop on the four-force square problem
with a known exact solution, and fit the experimental convergence rates.
Expect slopes near -1 in the number of degrees of freedom, against -0.5
or worse for uniform refinement at this regularity.
"""

import warnings

from stokesdirac.driver import (
    ProblemConfig,
    fit_rate,
    run_adaptive,
    trailing_decade_window,
)

warnings.filterwarnings("ignore", message=".*domain-dependent margin.*")

sources = tuple(((x, y), (1.0, 1.0)) for x in (0.25, 0.75) for y in (0.25, 0.75))
config = ProblemConfig(
    domain="unit_square",
    sources=sources,
    p=1.4,
    scheme="taylor_hood",
    bc_mode="exact_stokeslet",
    refinement="adaptive",
    max_iterations=60,
    max_ndof=20000,
    output_dir="adaptive_run",
)

records = run_adaptive(config)

print(f"{'it':>3} {'ndof':>7} {'estimator':>12} {'error':>12} {'eff':>6}")
for rec in records[:: max(1, len(records) // 12)] + [records[-1]]:
    print(
        f"{rec.iteration:3d} {rec.ndof:7d} {rec.estimator:12.4e} "
        f"{rec.error_total:12.4e} {rec.effectivity:6.2f}"
    )

window = trailing_decade_window(records)
print(f"\nrates over the trailing decade ({window} records):")
print(f"  estimator slope {fit_rate(records, 'estimator', window):+.3f}")
print(f"  error slope     {fit_rate(records, 'error', window):+.3f}")
print("\noutputs (records.csv, indicators, VTK meshes) in ./adaptive_run")
