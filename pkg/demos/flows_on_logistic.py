"""Integrate the NAG flow in its two first-order forms on the 1-D logistic.

Both start from X(0) = Q(0) = 10 at rest. Prints the gap between the two
trajectories and the final velocities, and optionally writes telemetry.

    python demos/flows_on_logistic.py [out.csv]
"""
import sys

import numpy as np

from gm2lab import flows, gm2, objectives, runner
from gm2lab.records import records_from_flow

f = objectives.make_logistic_1d(1.0, 0.01)
s = 1.0
P = gm2.preset("NAG", f, s)
x0 = np.array([10.0])
# V(0) chosen so that dX(0) = 0, matching J(0) = 0
v0 = x0 + P.m * f.gradient(x0) / P.n

dt = flows.default_dt(s)
pair = flows.rk4_solve(flows.gm2_field(P, f), flows.FlowState(x0, v0), 200.0, dt, 10)
phase = flows.rk4_solve(flows.phase_field_nag(f, s, f.mu), flows.FlowState(x0, np.zeros(1)), 200.0, dt, 10)

print(f"x* = {f.x_star[0]:.12f}")
print(f"max |X - Q|      = {np.max(np.abs(pair.primary - phase.primary)):.2e}")
print(f"|V(200) - x*|    = {abs(pair.secondary[-1, 0] - f.x_star[0]):.2e}")
print(f"|J(200)|         = {abs(phase.secondary[-1, 0]):.2e}")
for t in (0, 25, 50, 100, 200):
    i = int(np.searchsorted(pair.t, t))
    print(f"t={t:5.0f}  X={pair.primary[i, 0]: .6f}  V={pair.secondary[i, 0]: .6f}  J={phase.secondary[i, 0]: .2e}")

if len(sys.argv) > 1:
    runner.write_csv(sys.argv[1], records_from_flow(pair, f))
    print("wrote", sys.argv[1])
