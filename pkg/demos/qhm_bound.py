"""QHM as a GM2 instance on a seeded 10-dim regularized logistic problem.

Runs QHM with a = 0.25 at two step sizes, checks it matches the mapped GM2
iteration, and compares the f-gap with the certified envelope
C (1 - sqrt(a mu s))^k.
"""
import math

import numpy as np

from gm2lab import classic, gm2, lyapunov, objectives
from gm2lab.runner import gap_bound_report, relative_deviation

f = objectives.random_reg_logistic(1000, 10, 1e-3, seed=0)
a, K = 0.25, 5000
print(f"L = {f.L:.5f}, mu = {f.mu:g}, f* = {f.f_star:.10f}")

for s in (0.1, 4.0 / (3.0 * f.L)):
    P, b = classic.qhm_params_map(a, f, s)
    x0 = np.zeros(f.dim)
    st = classic.qhm_init(x0, classic.qhm_aligned_buffer(f, P, a, b, s, x0))
    qp = classic.QhmParams(a, b, s)
    Xq = [st.current]
    for _ in range(K):
        st = classic.qhm_step(f, qp, st)
        Xq.append(st.current)
    Xq = np.array(Xq)
    X, V = gm2.gm2_trajectory(P, s, f, x0, None, K)
    rep = gap_bound_report(f, P, s, Xq, V, floor=lyapunov.resolution_floor(f, P, s))
    print(f"\ns = {s:.4f}  b = {b:.6f}  rate 1 - sqrt(a mu s) = {1 - math.sqrt(a * f.mu * s):.6f}")
    print(f"  QHM vs GM2 deviation {np.max(relative_deviation(Xq, X)):.1e}")
    print(f"  C = {rep['C']:.4g}, tightest C = {rep['fitted_C']:.4g}, "
          f"violations {rep['violations']}, at rounding floor {rep['floor_hits']}")
    gaps = f.f_gap(Xq)
    for k in (0, 100, 1000, 2000, 5000):
        print(f"  k={k:5d}  gap={gaps[k]:.3e}  bound={rep['C'] * (1 - P.q * math.sqrt(s)) ** k:.3e}")
