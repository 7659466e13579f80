"""Per-step telemetry shared by discrete runs, flows and the CSV writer."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

CSV_HEADER = "k,t,f_gap,grad_norm_sq,lyap,dist_x,dist_v"


@dataclass(frozen=True)
class TrajectoryRecord:
    k: int
    t: float
    f_gap: float
    grad_norm_sq: float
    lyap: Optional[float] = None  # None when no Lyapunov function was requested
    dist_x: float = math.nan
    dist_v: Optional[float] = None  # None when the method has no second sequence

    def csv_row(self) -> str:
        def fmt(v):
            return "" if v is None else "%.17g" % v
        return ",".join((str(self.k), fmt(self.t), fmt(self.f_gap), fmt(self.grad_norm_sq),
                         fmt(self.lyap), fmt(self.dist_x), fmt(self.dist_v)))


def _lyap_scalar(value):
    if value is None:
        return None
    return float(getattr(value, "value", value))


def build_records(ks, ts, X, V, f, lyap_values=None):
    gaps = np.atleast_1d(f.f_gap(X))
    g = f.gradient(X)
    gn = np.sum(g * g, axis=-1)
    dx = f.dist(X)
    dv = None if V is None else f.dist(V)
    out = []
    for i, k in enumerate(ks):
        out.append(TrajectoryRecord(
            k=int(k), t=float(ts[i]), f_gap=float(gaps[i]), grad_norm_sq=float(gn[i]),
            lyap=None if lyap_values is None else _lyap_scalar(lyap_values[i]),
            dist_x=float(dx[i]), dist_v=None if dv is None else float(dv[i])))
    return out


def records_from_flow(traj, f, lyap=None):
    """Records for an unbatched flow trajectory; k counts integrator steps."""
    ks = np.arange(len(traj.t)) * traj.stride
    ks[-1] = int(round((traj.t[-1] - traj.t[0]) / traj.dt))
    lyap_values = None
    if lyap is not None:
        lyap_values = [lyap(traj.state(i)) for i in range(len(traj.t))]
    return build_records(ks, traj.t, traj.primary, traj.secondary, f, lyap_values)
