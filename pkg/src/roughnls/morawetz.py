"""Interaction Morawetz functionals, inequality audits, and the main-term identity.

Local densities of the remainder field w: mass density m = |w|^2 / 2, momentum
density p = Im(conj(w) grad w) / 2, and the nonlinear defect
e = |u|^p u - |w|^p w. The pairwise functional

    M(t) = sum_{x,y} (x-y)/|x-y| . p(t,x) m(t,y) dx^{2d}

is evaluated as d circular FFT correlations against a kernel tabulated with
minimal-image displacements and K(0) = 0; a direct double sum is kept as a
cross-check. The kernels are not periodic, so the circular sum matches the
whole-space integral only for well-localized densities; every functional value
is paired with a localization ratio (fraction of mass inside the half-box) so
the approximation stays auditable.

The audit measures, per trajectory, the constant C* = LHS / (T1 + T2 + T3) in

    3D:  ||w||_{L4_tx}^4 <= C* ( ||w||_{Linf L2}^2 ||w||_{Linf Hdot(1/2)}^2
           + ||v||_{L2 Linf} (||w||_{L4}^2 + ||v||_{L4}^2)
             (||w||_{Linf L6}^3 + ||v||_{Linf L6}^3) ||w||_{Linf Hdot(1/2)}^2
           + ||grad v||_{L2 Linf} (||w||_{L4}^2 + ||v||_{L4}^2)
             (||w||_{Linf L6}^3 + ||v||_{Linf L6}^3) ||w||_{Linf L2}^2 )

    4D:  || |grad|^{-1/4} w ||_{L4_tx}^4 <= C* ( ||w||_{Linf L2}^2 ||w||_{Linf Hdot(1/2)}^2
           + ||w||_{Linf H(1/2)} || |grad|^{-1/4} w ||_{L4}^2
             ( ||v||_{L2 Linf} ||w||_{Linf Hdot(1/2)}^2
               + ||grad v||_{L2 Linf} ||w||_{Linf L2}^2 )
           + ||v||_{L2 Linf} ||w||_{Linf Hdot(1/2)}^2
             ( ||w||_{Linf L2} ||v||_{L4_tx}^2 + ||v||_{L6_t L3_x}^3 ) )

No implicit constant is ever asserted; C* is measured and its spread across an
ensemble is what gets tested. Homogeneous symbols |xi|^s drop the xi = 0 mode,
also for the negative order -1/4 used by the 4D left-hand side.

The momentum flux balance itself is not checked; that would require the time
derivative of the momentum density, which never enters the reported bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .grids import (
    GridSpec,
    SpectralField,
    fractional_derivative,
    gradient,
    lp_norm,
    sobolev_norm,
)
from .norms import NormSpec, spacetime_norm
from .trajectory import Trajectory

__all__ = [
    "LocalDensities",
    "MorawetzReport",
    "MainTermReport",
    "CStarSpread",
    "SCALING_DEGREES",
    "local_densities",
    "interaction_functional",
    "localization_ratio",
    "morawetz_audit",
    "c_star_spread",
    "identity_mor_mainterm",
    "gn_ratios",
]

# Homogeneity degree of each reported audit value under (w, v) -> (alpha w, alpha v),
# read off from the norm products above.
SCALING_DEGREES = {
    3: {"lhs": 4, "T1": 4, "T2": 8, "T3": 8},
    4: {"lhs": 4, "T1": 4, "T2": 6, "T3": 6},
}


def _default_power(dim: int, power: float | None) -> float:
    if power is not None:
        if power < 0:
            raise ConfigError(f"nonlinearity power must be nonnegative, got {power}")
        return float(power)
    if dim in (3, 4):
        return 4.0 / (dim - 2)
    raise ConfigError(f"no default nonlinearity power in dimension {dim}; pass power explicitly")


@dataclass(frozen=True)
class LocalDensities:
    """Pointwise densities of one snapshot: mass m, momentum p, defect e.

    m has the grid's shape, p stacks the d components along axis 0, and e is
    complex with the grid's shape. m >= 0 and p is real by construction; e
    vanishes wherever u = w.
    """

    grid: GridSpec
    m: np.ndarray
    p: np.ndarray
    e: np.ndarray


def local_densities(w: SpectralField, u: SpectralField, power: float | None = None) -> LocalDensities:
    """Mass/momentum densities of w and the defect |u|^p u - |w|^p w.

    The gradient inside p is spectral (i xi multipliers). power defaults to
    the energy-critical exponent 4/(d-2) in dimensions 3 and 4.
    """
    if w.grid != u.grid:
        raise ConfigError("w and u must live on the same grid")
    g = w.grid
    p = _default_power(g.dim, power)
    wp = w.as_physical().values
    up = u.as_physical().values
    m = 0.5 * np.abs(wp) ** 2
    grads = gradient(w)
    mom = np.stack([0.5 * np.imag(np.conj(wp) * gk.values) for gk in grads])
    defect = np.abs(up) ** p * up - np.abs(wp) ** p * wp
    return LocalDensities(g, m, mom, defect)


@lru_cache(maxsize=16)
def _kernel_tables(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Tabulated kernels on the displacement lattice, minimal image, K(0) = 0.

    Index delta holds the value at displacement r = delta*dx wrapped to
    [-L, L)^d. Returns (vector table (d, *shape) with x_k/|x|, scalar table
    with 1/|x|).
    """
    ax = grid.dx * np.arange(grid.points)
    two_l = 2.0 * grid.half_width
    ax = (ax + grid.half_width) % two_l - grid.half_width
    comps = np.meshgrid(*([ax] * grid.dim), indexing="ij")
    r = np.stack(comps)
    rad = np.sqrt(np.sum(r * r, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        vec = np.where(rad > 0.0, r / rad, 0.0)
        sca = np.where(rad > 0.0, 1.0 / rad, 0.0)
    return vec, sca


@lru_cache(maxsize=16)
def _kernel_tables_hat(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Conjugated DFTs of the kernel tables, precomputed for the correlation path."""
    vec, sca = _kernel_tables(grid)
    axes = tuple(range(1, grid.dim + 1))
    return np.conj(np.fft.fftn(vec, axes=axes)), np.conj(np.fft.fftn(sca))


def _pair_fft(table_hat: np.ndarray, f: np.ndarray, g: np.ndarray, grid: GridSpec) -> float:
    """sum_{x,y} K(x-y) f(x) g(y) dx^{2d} via one circular correlation."""
    corr = np.fft.ifftn(table_hat * np.fft.fftn(f)).real
    return float(np.sum(corr * g) * grid.cell_volume**2)


def _pair_direct(kind: str, f: np.ndarray, g: np.ndarray, grid: GridSpec) -> float:
    """Reference evaluator: explicit double sum over all point pairs.

    f carries the stacked components (d, *shape) for the vector kernel and a
    plain scalar array for the 1/|x-y| kernel. Quadratic in the point count;
    meant for small cross-check grids only.
    """
    d = grid.dim
    ax = grid.x_axis()
    coords = np.meshgrid(*([ax] * d), indexing="ij")
    pts = np.stack([c.ravel() for c in coords], axis=1)
    two_l = 2.0 * grid.half_width
    diff = pts[:, None, :] - pts[None, :, :]
    diff = (diff + grid.half_width) % two_l - grid.half_width
    rad = np.sqrt(np.sum(diff * diff, axis=2))
    ok = rad > 0.0
    gv = g.ravel()
    if kind == "vector":
        fv = f.reshape(d, -1)
        total = 0.0
        for k in range(d):
            with np.errstate(divide="ignore", invalid="ignore"):
                kern = np.where(ok, diff[:, :, k] / rad, 0.0)
            total += float(fv[k] @ kern @ gv)
        return total * grid.cell_volume**2
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = np.where(ok, 1.0 / rad, 0.0)
    return float(f.ravel() @ kern @ gv) * grid.cell_volume**2


def interaction_functional(
    dens: LocalDensities,
    kind: str = "vector",
    scalar_field: np.ndarray | None = None,
    method: str = "fft",
) -> float:
    """Pairwise kernel functional of one snapshot's densities.

    kind 'vector' evaluates sum (x-y)/|x-y| . p(x) m(y) dx^{2d}; kind 'scalar'
    pairs a caller-supplied real field f(x) against m(y) under the weight
    1/|x-y| (used by the remainder terms). method 'direct' switches to the
    double-sum reference path.
    """
    g = dens.grid
    if kind == "vector":
        f: np.ndarray = dens.p
    elif kind == "scalar":
        if scalar_field is None:
            raise ConfigError("scalar kind needs the field to pair against m")
        if scalar_field.shape != g.shape:
            raise ConfigError(
                f"scalar field shape {scalar_field.shape} does not match grid {g.shape}"
            )
        f = scalar_field
    else:
        raise ConfigError(f"kernel kind must be 'vector' or 'scalar', got {kind!r}")

    if method == "direct":
        return _pair_direct(kind, f, dens.m, g)
    if method != "fft":
        raise ConfigError(f"method must be 'fft' or 'direct', got {method!r}")

    vec_hat, sca_hat = _kernel_tables_hat(g)
    if kind == "scalar":
        return _pair_fft(sca_hat, f, dens.m, g)
    return float(sum(_pair_fft(vec_hat[k], dens.p[k], dens.m, g) for k in range(g.dim)))


def localization_ratio(density: np.ndarray, grid: GridSpec) -> float:
    """Fraction of sum |density| carried by the inner half-box (all |x_j| < L/2).

    1.0 for an identically zero density (vacuously localized). Values well
    below 1 mean the circular convolution is a poor stand-in for the
    whole-space pairing.
    """
    half = 0.5 * grid.half_width
    inner = np.abs(grid.x_axis()) < half
    mask = inner
    for _ in range(grid.dim - 1):
        mask = np.multiply.outer(mask, inner)
    mag = np.abs(density)
    total = float(mag.sum())
    if total == 0.0:
        return 1.0
    return float(mag[mask].sum()) / total


def _grad_sup_series(traj: Trajectory, channel: str) -> np.ndarray:
    """max_x |grad f| at each snapshot, gradient magnitude taken euclidean."""
    stack = traj.channel(channel)
    out = np.empty(traj.n_snapshots)
    for k in range(traj.n_snapshots):
        fld = SpectralField(traj.grid, stack[k], "physical")
        comps = gradient(fld)
        mag = np.zeros(traj.grid.shape)
        for c in comps:
            mag += np.abs(c.values) ** 2
        out[k] = math.sqrt(float(mag.max()))
    return out


def _l2_time(series: np.ndarray, times: np.ndarray) -> float:
    return float(math.sqrt(np.trapezoid(series**2, times)))


@dataclass(frozen=True)
class MorawetzReport:
    """Measured sides of the interaction Morawetz inequality for one run.

    lhs is ||w||_{L4_tx}^4 in 3D and || |grad|^{-1/4} w ||_{L4_tx}^4 in 4D;
    terms holds the three right-hand-side products T1, T2, T3; c_star is
    lhs / (T1 + T2 + T3), zero for a zero left-hand side. interaction and
    localization trace M(t) and the half-box mass fraction per snapshot.
    """

    dim: int
    lhs: float
    terms: dict[str, float]
    c_star: float
    times: np.ndarray
    interaction: np.ndarray
    localization: np.ndarray

    CSV_HEADER = ["t", "interaction", "localization"]

    @property
    def rhs(self) -> float:
        return float(sum(self.terms.values()))

    def csv_rows(self) -> list[list[float]]:
        return [
            [float(t), float(m), float(r)]
            for t, m, r in zip(self.times, self.interaction, self.localization)
        ]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "lhs": self.lhs,
            "terms": {k: float(v) for k, v in self.terms.items()},
            "rhs": self.rhs,
            "c_star": self.c_star,
            "min_localization": float(self.localization.min()),
        }


def morawetz_audit(traj: Trajectory, dim: int | None = None, power: float | None = None) -> MorawetzReport:
    """Evaluate both sides of the interaction Morawetz inequality on a trajectory.

    Needs channels v and w (u is derived as v + w). The right-hand side terms
    are, with S = ||w||_{Linf Hdot(1/2)}, m2 = ||w||_{Linf L2}:

    3D, with A4 = ||w||_{L4}^2 + ||v||_{L4}^2 and A6 = ||w||_{Linf L6}^3 + ||v||_{Linf L6}^3:
        T1 = m2^2 S^2
        T2 = ||v||_{L2 Linf} A4 A6 S^2
        T3 = ||grad v||_{L2 Linf} A4 A6 m2^2

    4D, with G = || |grad|^{-1/4} w ||_{L4_tx}:
        T1 = m2^2 S^2
        T2 = ||w||_{Linf H(1/2)} G^2 ( ||v||_{L2 Linf} S^2 + ||grad v||_{L2 Linf} m2^2 )
        T3 = ||v||_{L2 Linf} S^2 ( m2 ||v||_{L4_tx}^2 + ||v||_{L6_t L3_x}^3 )

    C* is measured, never asserted; ensemble stability is judged separately
    by c_star_spread.
    """
    g = traj.grid
    if dim is None:
        dim = g.dim
    if dim != g.dim:
        raise ConfigError(f"audit dimension {dim} does not match the grid dimension {g.dim}")
    if dim not in (3, 4):
        raise ConfigError(f"the inequality audit is defined for dimensions 3 and 4, got {dim}")
    for name in ("v", "w"):
        if name not in traj.channels:
            raise ConfigError(f"audit needs channel {name!r} (have {sorted(traj.channels)})")
    p = _default_power(dim, power)

    inf = math.inf
    w_mass = spacetime_norm(traj, NormSpec(inf, 2), "w")
    w_hhalf = spacetime_norm(traj, NormSpec(inf, 2, 0.5, "homogeneous"), "w")
    v_sup = spacetime_norm(traj, NormSpec(2, inf), "v")
    dv_sup = _l2_time(_grad_sup_series(traj, "v"), traj.times)

    if dim == 3:
        w_l4 = spacetime_norm(traj, NormSpec(4, 4), "w")
        v_l4 = spacetime_norm(traj, NormSpec(4, 4), "v")
        w_l6 = spacetime_norm(traj, NormSpec(inf, 6), "w")
        v_l6 = spacetime_norm(traj, NormSpec(inf, 6), "v")
        mix4 = w_l4**2 + v_l4**2
        mix6 = w_l6**3 + v_l6**3
        lhs = w_l4**4
        terms = {
            "T1": w_mass**2 * w_hhalf**2,
            "T2": v_sup * mix4 * mix6 * w_hhalf**2,
            "T3": dv_sup * mix4 * mix6 * w_mass**2,
        }
    else:
        g_norm = spacetime_norm(traj, NormSpec(4, 4, -0.25, "homogeneous"), "w")
        w_hhalf_inh = spacetime_norm(traj, NormSpec(inf, 2, 0.5, "inhomogeneous"), "w")
        v_l4 = spacetime_norm(traj, NormSpec(4, 4), "v")
        v_l6l3 = spacetime_norm(traj, NormSpec(6, 3), "v")
        lhs = g_norm**4
        terms = {
            "T1": w_mass**2 * w_hhalf**2,
            "T2": w_hhalf_inh * g_norm**2 * (v_sup * w_hhalf**2 + dv_sup * w_mass**2),
            "T3": v_sup * w_hhalf**2 * (w_mass * v_l4**2 + v_l6l3**3),
        }

    rhs = float(sum(terms.values()))
    if lhs == 0.0:
        c_star = 0.0
    elif rhs == 0.0:
        c_star = math.inf
    else:
        c_star = lhs / rhs

    w_stack = traj.channel("w")
    u_stack = traj.channel("u")
    inter = np.empty(traj.n_snapshots)
    loc = np.empty(traj.n_snapshots)
    for k in range(traj.n_snapshots):
        dens = local_densities(
            SpectralField(g, w_stack[k], "physical"),
            SpectralField(g, u_stack[k], "physical"),
            power=p,
        )
        inter[k] = interaction_functional(dens)
        loc[k] = localization_ratio(dens.m, g)

    return MorawetzReport(
        dim=dim,
        lhs=float(lhs),
        terms={k: float(v) for k, v in terms.items()},
        c_star=float(c_star),
        times=traj.times.copy(),
        interaction=inter,
        localization=loc,
    )


@dataclass(frozen=True)
class CStarSpread:
    """Stability summary of measured constants over an ensemble."""

    n: int
    max: float
    median: float
    ratio: float
    stable: bool


def c_star_spread(values, threshold: float = 10.0) -> CStarSpread:
    """max/median spread of C* across runs; stable when the ratio stays below threshold.

    Accepts MorawetzReport instances or bare numbers. Degenerate runs with
    C* = 0 are excluded from the median so an all-linear ensemble does not
    divide by zero.
    """
    vals = np.asarray(
        [v.c_star if isinstance(v, MorawetzReport) else float(v) for v in values], dtype=float
    )
    if vals.size == 0:
        raise ValueError("need at least one run")
    if np.any(~np.isfinite(vals)):
        raise ValueError("ensemble contains a non-finite constant")
    live = vals[vals > 0]
    if live.size == 0:
        return CStarSpread(n=vals.size, max=0.0, median=0.0, ratio=1.0, stable=True)
    mx = float(live.max())
    med = float(np.median(live))
    ratio = mx / med
    return CStarSpread(n=vals.size, max=mx, median=med, ratio=ratio, stable=ratio < threshold)


@dataclass(frozen=True)
class MainTermReport:
    """Both sides of the defect main-term identity at each sampled center y.

    lhs(y) = sum_x (x-y)/|x-y| . Re[(|u|^p u - |w|^p w) grad conj(w)] dx^d and
    rhs(y) = hardy(y) + cross(y) with
    hardy(y) = -(d-1)/(p+2) sum_x (|u|^{p+2} - |w|^{p+2}) / |x-y| dx^d,
    cross(y) = -sum_x (x-y)/|x-y| . Re[|u|^p u grad conj(v)] dx^d.
    max_rel normalizes by the largest constituent integral, so degenerate
    cancellations (w identically zero) still report the small quadrature error
    rather than 100 percent.
    """

    y_indices: tuple[tuple[int, ...], ...]
    lhs: np.ndarray
    hardy: np.ndarray
    cross: np.ndarray
    max_rel: float

    @property
    def rhs(self) -> np.ndarray:
        return self.hardy + self.cross


def _y_lattice_indices(
    grid: GridSpec,
    y_points,
    n_points: int,
    seed: int,
) -> list[tuple[int, ...]]:
    if y_points is None:
        rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0x4D59], dtype=np.uint64)))
        raw = rng.integers(0, grid.points, size=(n_points, grid.dim))
        return [tuple(int(j) for j in row) for row in raw]
    out = []
    for pt in y_points:
        pt = np.atleast_1d(np.asarray(pt, dtype=float))
        if pt.shape != (grid.dim,):
            raise ConfigError(f"sample point {pt} is not a {grid.dim}-vector")
        idx = np.rint((pt + grid.half_width) / grid.dx).astype(int) % grid.points
        out.append(tuple(int(j) for j in idx))
    return out


def identity_mor_mainterm(
    w: SpectralField,
    u: SpectralField,
    v: SpectralField,
    power: float | None = None,
    y_points=None,
    n_points: int = 8,
    seed: int = 0,
) -> MainTermReport:
    """Check the integration-by-parts identity behind the defect main term.

    At each center y both sides are evaluated by lattice quadrature with
    spectral gradients; the identity holds exactly in the continuum, so the
    residual is pure discretization error and must shrink under grid
    refinement. y_points are physical coordinates snapped to the nearest
    lattice point; by default n_points centers are drawn from a seeded
    counter-based generator.
    """
    g = w.grid
    if u.grid != g or v.grid != g:
        raise ConfigError("w, u, v must live on the same grid")
    p = _default_power(g.dim, power)
    coeff = (g.dim - 1) / (p + 2.0)

    wp = w.as_physical().values
    up = u.as_physical().values
    nl_u = np.abs(up) ** p * up
    nl_w = np.abs(wp) ** p * wp
    grad_w = np.stack([c.values for c in gradient(w)])
    grad_v = np.stack([c.values for c in gradient(v)])
    f_main = np.real((nl_u - nl_w)[None] * np.conj(grad_w))
    g_hardy = np.abs(up) ** (p + 2.0) - np.abs(wp) ** (p + 2.0)
    h_cross = np.real(nl_u[None] * np.conj(grad_v))

    vec, sca = _kernel_tables(g)
    centers = _y_lattice_indices(g, y_points, n_points, seed)
    axes = tuple(range(g.dim))
    dvol = g.cell_volume
    lhs = np.empty(len(centers))
    hardy = np.empty(len(centers))
    cross = np.empty(len(centers))
    for i, j in enumerate(centers):
        vec_y = np.roll(vec, shift=j, axis=tuple(a + 1 for a in axes))
        sca_y = np.roll(sca, shift=j, axis=axes)
        lhs[i] = float(np.sum(vec_y * f_main)) * dvol
        hardy[i] = -coeff * float(np.sum(sca_y * g_hardy)) * dvol
        cross[i] = -float(np.sum(vec_y * h_cross)) * dvol

    scale = max(np.abs(lhs).max(), np.abs(hardy).max(), np.abs(cross).max())
    if scale == 0.0:
        max_rel = 0.0
    else:
        max_rel = float(np.abs(lhs - hardy - cross).max() / scale)
    return MainTermReport(
        y_indices=tuple(centers),
        lhs=lhs,
        hardy=hardy,
        cross=cross,
        max_rel=max_rel,
    )


def gn_ratios(traj: Trajectory, channel: str = "w") -> np.ndarray:
    """Per-snapshot ratio ||f||_{L3}^3 / (||f||_{H(1/2)} || |grad|^{-1/4} f ||_{L4}^2).

    The 4D Gagliardo-Nirenberg comparison: a single constant should cover a
    whole ensemble, so the interesting output is the spread of these ratios.
    Snapshots with a vanishing right-hand side report 0 when the left side
    also vanishes.
    """
    g = traj.grid
    if g.dim != 4:
        raise ConfigError(f"the Gagliardo-Nirenberg check is for dimension 4, got {g.dim}")
    stack = traj.channel(channel)
    out = np.empty(traj.n_snapshots)
    for k in range(traj.n_snapshots):
        fld = SpectralField(g, stack[k], "physical")
        num = lp_norm(fld, 3.0) ** 3
        den = sobolev_norm(fld, 0.5, "inhomogeneous") * lp_norm(
            fractional_derivative(fld, -0.25, "homogeneous"), 4.0
        ) ** 2
        if den == 0.0:
            out[k] = 0.0 if num == 0.0 else math.inf
        else:
            out[k] = num / den
    return out
