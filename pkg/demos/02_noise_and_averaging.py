"""
Measurement noise and averaging
===============================

With noisy sensors a single snapshot gives a wide estimate. Averaging N
independent snapshots shrinks the mean squared error like 1/N, and the
first-order error formula predicts the spread well enough to build 95%
intervals.
"""

# %%
import math

import numpy as np

from leaktree import BoundaryConditions, LeakSpec, Network, NoiseSpec, PipeGeometry
from leaktree import confidence_interval, mc_experiment, variance_x
from leaktree.uncertainty import single_pipe_readings

main = PipeGeometry(1000.0, 0.3, 1.5e-4)
net = Network(2, [(0, 1, main)])
bc = BoundaryConditions(0, 50.0, {1: -0.05})
leak = LeakSpec(0, 400.0, 1e-3, 0.5)
noise = NoiseSpec.uniform(sigma_head=1e-2, sigma_flow=1e-5)

# %%
readings = single_pipe_readings(net, bc, leak)
sigma = math.sqrt(variance_x(leak.x, readings, main, noise))
print(f"predicted single-snapshot sigma_x: {sigma:.1f} m")
for n in (1, 16, 256):
    ci = confidence_interval(leak.x, sigma, n)
    print(f"  N={n:3d}: 95% interval half-width {ci.half_width:6.2f} m")

# %%
# Monte Carlo: 1000 repetitions per N, fixed seed so the table is reproducible.
rows = mc_experiment(net, bc, leak, noise, [2**k for k in range(9)], trials=1000, seed=1)
print(f"\n{'N':>4} {'MSE':>10} {'predicted':>10} {'coverage':>9}")
for r in rows:
    print(f"{r.n:4d} {r.mse:10.3f} {r.predicted:10.3f} {r.coverage:9.3f}")

slope = np.polyfit(np.log([r.n for r in rows]), np.log([r.mse for r in rows]), 1)[0]
print(f"log-log slope: {slope:.3f} (1/N scaling gives -1)")
