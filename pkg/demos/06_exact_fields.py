"""
Point-force fields as exact solutions
=====================================

The free-space velocity/pressure pair induced by interior point forces
solves the homogeneous Stokes equations away from the forcing points, so
it serves as the reference solution for convergence studies whenever the
boundary data is taken from it.
"""

import numpy as np

from stokesdirac.exact import (
    StokesletField,
    pressure,
    stokeslet_eval,
    velocity,
    verify_pde,
)

field = StokesletField(
    [((0.25, 0.25), (1.0, 1.0)), ((0.75, 0.75), (-2.0, 0.5))]
)

# closed-form evaluation: velocity, pressure, and velocity gradient
u, pi, grad = stokeslet_eval(field, np.array([0.5, 0.1]))
print("u =", u.round(6), " pi =", round(pi, 6))
print("grad u =\n", grad.round(6))
print("div u =", np.trace(grad))  # incompressible everywhere

# the pair satisfies -lap u + grad pi = 0 away from the forces, checked
# here by differencing the analytic gradient
rng = np.random.default_rng(0)
worst = 0.0
for _ in range(50):
    x = rng.uniform(-0.5, 1.5, size=2)
    if min(np.hypot(*(x - t)) for t, _ in field.sources) < 0.15:
        continue
    momentum, div = verify_pde(field, x)
    worst = max(worst, momentum, div)
print(f"worst PDE residual over random probes: {worst:.2e}")

# the fields are singular at the forcing points: |grad u| ~ 1/r
for r in (1e-1, 1e-2, 1e-3):
    x = np.array([0.25 + r, 0.25])
    g = np.linalg.norm(stokeslet_eval(field, x)[2])
    print(f"|grad u| at distance {r:g}: {g:10.2f}")

# velocities stay finite on the domain boundary since forces are interior
edge = np.column_stack([np.linspace(0, 1, 5), np.zeros(5)])
print("|u| on the bottom edge:", np.linalg.norm(velocity(field, edge), axis=1).round(4))
print("pressure there:", pressure(field, edge).round(4))
