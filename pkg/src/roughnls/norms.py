"""Mixed space-time Lebesgue/Sobolev norms L^q_t L^r_x with optional derivative weight.

Spatial integrals are Riemann sums on the lattice, the time integral is a
composite trapezoid rule on g(t)^q where g is the spatial norm, and q or r
equal to inf take plain maxima. Snapshots must be dense enough in time that
the trapezoid rule is adequate; halving the snapshot stride should move
reported norms by well under a percent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import SpectralField, fractional_derivative, lp_norm
from .trajectory import Trajectory

__all__ = ["NormSpec", "is_admissible", "spacetime_norm", "snapshot_norms"]


@dataclass(frozen=True)
class NormSpec:
    """Exponents for || D^s . ||_{L^q_t L^r_x}; kind 'none' skips the derivative."""

    q: float
    r: float
    s: float = 0.0
    kind: str = "none"

    def __post_init__(self):
        if self.q < 1 or self.r < 1:
            raise ValueError(f"exponents must be >= 1, got q={self.q}, r={self.r}")
        if self.kind not in ("none", "homogeneous", "inhomogeneous"):
            raise ValueError(f"bad derivative kind {self.kind!r}")

    def label(self) -> str:
        def fmt(e: float) -> str:
            return "inf" if math.isinf(e) else f"{e:g}"

        core = f"L{fmt(self.q)}t_L{fmt(self.r)}x"
        if self.kind == "homogeneous":
            return f"|grad|^{self.s:g}_" + core
        if self.kind == "inhomogeneous":
            return f"<grad>^{self.s:g}_" + core
        return core


def is_admissible(q: float, r: float, d: int) -> bool:
    """Schrodinger admissibility: 2/q + d/r = d/2, q,r >= 2, (q,r,d) != (2,inf,2)."""
    if q < 2 or r < 2:
        return False
    if d == 2 and q == 2 and math.isinf(r):
        return False
    lhs = (0.0 if math.isinf(q) else 2.0 / q) + (0.0 if math.isinf(r) else d / r)
    return abs(lhs - d / 2.0) < 1e-9


def snapshot_norms(traj: Trajectory, spec: NormSpec, channel: str) -> np.ndarray:
    """Spatial norm of D^s(channel) at each snapshot time."""
    stack = traj.channel(channel)
    out = np.empty(traj.n_snapshots)
    for k in range(traj.n_snapshots):
        fld = SpectralField(traj.grid, stack[k], "physical")
        if spec.kind != "none":
            fld = fractional_derivative(fld, spec.s, spec.kind)
        out[k] = lp_norm(fld, spec.r)
    return out


def spacetime_norm(traj: Trajectory, spec: NormSpec, channel: str = "u") -> float:
    """|| D^s channel ||_{L^q_t L^r_x} over the trajectory's time window."""
    g = snapshot_norms(traj, spec, channel)
    if math.isinf(spec.q):
        return float(g.max())
    if traj.n_snapshots < 2:
        raise ValueError("time integration needs at least two snapshots")
    return float(np.trapezoid(g**spec.q, traj.times) ** (1.0 / spec.q))
