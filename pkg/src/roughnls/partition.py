"""Frequency-cube partition of unity for narrowed cube randomization.

The frequency lattice is covered by a core cube O_1 = [-1,1]^d, dyadic shells
Q_N = {N < |xi|_inf <= 2N} for N in {1, 2, ..., N_max}, and one residual
region beyond 2*N_max. Shells N >= 2 are tiled exactly by dyadic cubes of
side 2*N^-a, giving (2^d - 1) * N^{d(a+1)} cubes per shell. The N = 1 shell
has sub-cube side 2, which cannot tile an annulus of thickness 1; it is
decomposed instead into the 2^d - 1 product-partition pieces
prod_j K_{delta_j}, delta != 0, with K_0 = [-1,1] and K_1 = {1 <= |t| <= 2},
which realizes the same count.

Each piece carries a tensor-product cutoff: 1 on the piece, a C^2 smoothstep
ramp of width mollify_fraction * side outside it, zero beyond the doubled
piece. Renormalizing by the pointwise sum makes the family an exact partition
of unity at every lattice point; a bookkeeping residual cutoff absorbs the
region beyond coverage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import reduce

import numpy as np

from .errors import ConfigError, ResolutionError, ResourceLimitError
from .grids import GridSpec, SpectralField, smoothstep, to_physical

__all__ = [
    "PartitionConfig",
    "AxisSegment",
    "CubeCutoff",
    "FrequencyPartition",
    "build_partition",
    "project_cube",
    "expected_count",
    "bernstein_exponent",
    "BernsteinFit",
]

CORE_SHELL = 0
RESIDUAL_SHELL = -1


def expected_count(dim: int, a: int, shell: int) -> int:
    """Number of cubes tiling shell N: (2^d - 1) * N^{d(a+1)}."""
    return (2**dim - 1) * shell ** (dim * (a + 1))


@dataclass(frozen=True)
class PartitionConfig:
    """Parameters of the cube family.

    s is recorded for regime bookkeeping only; a is the narrowing exponent
    (integer so cube corners stay dyadic), n_max the largest shell.
    """

    dim: int
    a: int
    n_max: int
    s: float = 0.0
    mollify_fraction: float = 0.25
    allow_subcell: bool = True
    max_cubes: int = 500_000

    def __post_init__(self):
        if self.dim not in (1, 2, 3, 4):
            raise ConfigError(f"dim must be in 1..4, got {self.dim}")
        if not isinstance(self.a, int) or self.a < 1:
            raise ConfigError(f"narrowing exponent a must be a positive integer, got {self.a!r}")
        n = self.n_max
        if n < 1 or (n & (n - 1)) != 0:
            raise ConfigError(f"n_max must be a power of two >= 1, got {n}")
        if not (0 < self.mollify_fraction <= 0.5):
            raise ConfigError(
                f"mollify_fraction must lie in (0, 1/2], got {self.mollify_fraction}"
            )

    @property
    def shells(self) -> tuple[int, ...]:
        return tuple(2**k for k in range(int(math.log2(self.n_max)) + 1))

    @property
    def coverage(self) -> float:
        """Cutoff family covers {|xi|_inf <= coverage}."""
        return 2.0 * self.n_max

    def total_cubes(self) -> int:
        """Core + shell pieces (no residual)."""
        return 1 + sum(expected_count(self.dim, self.a, n) for n in self.shells)

    def in_paper_regime(self, s: float | None = None) -> bool:
        """Whether (s, a) satisfy the narrowing thresholds of the wellposedness theory."""
        s = self.s if s is None else s
        if self.dim == 4:
            return self.a > max(1 - 2 * s, 10)
        return self.a > max(3 - 4 * s, 1 - 2 * s, 10)


@dataclass(frozen=True)
class AxisSegment:
    """One axis factor of a cutoff: an interval [lo, hi] or a symmetric band
    {lo <= |t| <= hi}, with ramp width w on each side."""

    kind: str  # "interval" | "band"
    lo: float
    hi: float
    w: float

    def profile(self, t: np.ndarray) -> np.ndarray:
        x = np.abs(t) if self.kind == "band" else t
        lo, hi, w = self.lo, self.hi, self.w
        up = smoothstep((x - (lo - w)) / w)
        down = smoothstep(((hi + w) - x) / w)
        return np.where(x < lo, up, np.where(x > hi, down, 1.0))

    def support_bounds(self) -> list[tuple[float, float]]:
        lo, hi = self.lo - self.w, self.hi + self.w
        if self.kind == "band":
            return [(-hi, -lo), (lo, hi)]
        return [(lo, hi)]


@dataclass(frozen=True)
class CubeCutoff:
    """One member of the partition: geometry plus sampled lattice values."""

    index: int
    shell: int  # 0 core, -1 residual, else the dyadic shell N
    axes: tuple[AxisSegment, ...]
    support: np.ndarray  # flat indices into the FFT-ordered lattice
    values: np.ndarray  # renormalized psi_j at those points

    @property
    def center(self) -> np.ndarray:
        """Piece center; symmetric band axes report 0."""
        return np.array(
            [0.0 if ax.kind == "band" else 0.5 * (ax.lo + ax.hi) for ax in self.axes]
        )

    @property
    def half_side(self) -> np.ndarray:
        """Per-axis half-extent; band axes report the outer radius."""
        return np.array(
            [ax.hi if ax.kind == "band" else 0.5 * (ax.hi - ax.lo) for ax in self.axes]
        )


@dataclass
class FrequencyPartition:
    config: PartitionConfig
    grid: GridSpec
    cutoffs: list[CubeCutoff]
    shell_members: dict[int, list[int]]  # shell label -> cutoff indices
    kappa: int  # measured max overlap of cutoff supports
    unity_sum: np.ndarray = dc_field(repr=False, default=None)  # sum_j psi_j, flat
    sq_sum: np.ndarray = dc_field(repr=False, default=None)  # sum_j psi_j^2, flat

    @property
    def n_cutoffs(self) -> int:
        return len(self.cutoffs)

    def shell_count(self, shell: int) -> int:
        return len(self.shell_members.get(shell, []))

    def coverage_mask(self) -> np.ndarray:
        """Flat boolean mask of lattice points with |xi|_inf <= 2*N_max."""
        ax = self.grid.xi_axis()
        inside = np.abs(ax) <= self.config.coverage + 1e-12
        m = inside
        for _ in range(self.grid.dim - 1):
            m = np.logical_and.outer(m, inside)
        return m.reshape(-1)

    def unity_deviation(self) -> tuple[float, float]:
        """(max |sum psi - 1| over coverage, over the whole lattice)."""
        dev = np.abs(self.unity_sum - 1.0)
        return float(dev[self.coverage_mask()].max()), float(dev.max())

    def orthogonality_ratio(self, field: SpectralField) -> float:
        """sum_j ||box_j f||_L2^2 / ||f||_L2^2 via the pointwise multiplier identity.

        Identical (by Parseval, summed per mode) to projecting every cube and
        adding the squared norms; the unit tests check that equivalence.
        """
        fhat = field.as_frequency().values.reshape(-1)
        power = np.abs(fhat) ** 2
        total = power.sum()
        if total == 0:
            raise ValueError("orthogonality ratio of the zero field is undefined")
        return float((power * self.sq_sum).sum() / total)

    def project(self, field: SpectralField, j: int) -> SpectralField:
        return project_cube(self, field, j)

    def report(self) -> dict:
        cov_dev, full_dev = self.unity_deviation()
        shells = {}
        for n in self.config.shells:
            shells[str(n)] = {
                "count": self.shell_count(n),
                "expected": expected_count(self.config.dim, self.config.a, n),
                "side": 2.0 * n**-self.config.a,
            }
        return {
            "dim": self.config.dim,
            "a": self.config.a,
            "n_max": self.config.n_max,
            "coverage": self.config.coverage,
            "grid": {
                "points": self.grid.points,
                "half_width": self.grid.half_width,
                "nyquist": self.grid.nyquist,
            },
            "n_cutoffs": self.n_cutoffs,
            "core_count": self.shell_count(CORE_SHELL),
            "shells": shells,
            "kappa": self.kappa,
            "kappa_bound": 4 * 3**self.config.dim,
            "unity_deviation_coverage": cov_dev,
            "unity_deviation_full": full_dev,
            "paper_regime": self.config.in_paper_regime(),
        }


def _axis_slices(xs_sorted: np.ndarray, order: np.ndarray, seg: AxisSegment):
    """Lattice points of one axis inside the segment's support.

    Returns (original indices, profile values); empty arrays if none.
    """
    pos: list[np.ndarray] = []
    for lo, hi in seg.support_bounds():
        i0 = np.searchsorted(xs_sorted, lo, side="left")
        i1 = np.searchsorted(xs_sorted, hi, side="right")
        if i1 > i0:
            pos.append(np.arange(i0, i1))
    if not pos:
        e = np.empty(0, dtype=np.int64)
        return e, np.empty(0)
    p = np.concatenate(pos)
    idx = order[p]
    vals = seg.profile(xs_sorted[p])
    keep = vals > 0
    return idx[keep], vals[keep]


def _sample_cutoff(grid: GridSpec, xs_sorted, order, axes: tuple[AxisSegment, ...]):
    """Tensor-product sampling of a cutoff on the lattice; flat support + values."""
    per_axis = [_axis_slices(xs_sorted, order, seg) for seg in axes]
    if any(ix.size == 0 for ix, _ in per_axis):
        return np.empty(0, dtype=np.int64), np.empty(0)
    idx_arrays = [ix for ix, _ in per_axis]
    val_arrays = [v for _, v in per_axis]
    mesh = np.meshgrid(*idx_arrays, indexing="ij")
    flat = np.ravel_multi_index(tuple(m.reshape(-1) for m in mesh), grid.shape)
    vals = reduce(np.multiply.outer, val_arrays).reshape(-1)
    keep = vals > 0
    return flat[keep], vals[keep]


def _shell_one_axes(dim: int, frac: float) -> list[tuple[AxisSegment, ...]]:
    """Product-partition pieces of {1 < |xi|_inf <= 2}: delta in {0,1}^d \\ {0}."""
    pieces = []
    for bits in range(1, 2**dim):
        segs = []
        for j in range(dim):
            if (bits >> (dim - 1 - j)) & 1:
                segs.append(AxisSegment("band", 1.0, 2.0, frac * 1.0))
            else:
                segs.append(AxisSegment("interval", -1.0, 1.0, frac * 2.0))
        pieces.append(tuple(segs))
    return pieces


def _shell_cells(dim: int, a: int, n: int) -> np.ndarray:
    """Mesh-cell index vectors m for shell N >= 2, lexicographic by center.

    Cells [m*l, (m+1)*l)^d with l = 2*N^-a tile {N < |xi|_inf <= 2N} exactly:
    m ranges over [-2P, 2P-1]^d minus [-P, P-1]^d, P = N^{a+1}/2.
    """
    p = n ** (a + 1) // 2
    rng = np.arange(-2 * p, 2 * p)
    grids = np.meshgrid(*([rng] * dim), indexing="ij")
    m = np.stack([g.reshape(-1) for g in grids], axis=1)
    inner = np.all((m >= -p) & (m <= p - 1), axis=1)
    return m[~inner]


def build_partition(config: PartitionConfig, grid: GridSpec) -> FrequencyPartition:
    """Construct the cutoff family sampled on the grid's frequency lattice."""
    if grid.dim != config.dim:
        raise ConfigError(f"grid dim {grid.dim} != partition dim {config.dim}")
    if grid.nyquist <= config.coverage:
        raise ConfigError(
            f"grid Nyquist {grid.nyquist:g} must strictly exceed the outermost "
            f"shell frequency {config.coverage:g}"
        )
    total = config.total_cubes()
    if total + 1 > config.max_cubes:
        raise ResourceLimitError(
            f"partition would have {total} cubes, above the max_cubes cap "
            f"{config.max_cubes}; lower a or n_max"
        )
    for n in config.shells[1:]:
        if 2.0 * n**-config.a < grid.dxi and not config.allow_subcell:
            raise ResolutionError(
                f"shell {n} cube side {2.0 * n**-config.a:g} is below the lattice "
                f"spacing {grid.dxi:g} and allow_subcell is off"
            )

    xi = grid.xi_axis()
    order = np.argsort(xi, kind="stable")
    xs_sorted = xi[order]
    frac = config.mollify_fraction

    raw: list[tuple[int, tuple[AxisSegment, ...], np.ndarray, np.ndarray]] = []

    core_axes = tuple(AxisSegment("interval", -1.0, 1.0, frac * 2.0) for _ in range(config.dim))
    raw.append((CORE_SHELL, core_axes) + _sample_cutoff(grid, xs_sorted, order, core_axes))

    for axes in _shell_one_axes(config.dim, frac):
        raw.append((1, axes) + _sample_cutoff(grid, xs_sorted, order, axes))

    for n in config.shells[1:]:
        side = 2.0 * n**-config.a
        w = frac * side
        for m in _shell_cells(config.dim, config.a, n):
            axes = tuple(
                AxisSegment("interval", mj * side, (mj + 1) * side, w) for mj in m
            )
            raw.append((n, axes) + _sample_cutoff(grid, xs_sorted, order, axes))

    # Renormalize by the pointwise sum so the family sums to one exactly on the
    # covered lattice; the residual cutoff absorbs everything outside.
    s = np.zeros(grid.n_points)
    for _, _, sup, vals in raw:
        s[sup] += vals  # support indices are unique within one cutoff
    t = np.maximum(s, 1.0)

    cutoffs: list[CubeCutoff] = []
    shell_members: dict[int, list[int]] = {}
    counts = np.zeros(grid.n_points, dtype=np.int64)
    unity = np.zeros(grid.n_points)
    sq = np.zeros(grid.n_points)
    for shell, axes, sup, vals in raw:
        normed = vals / t[sup]
        j = len(cutoffs)
        cutoffs.append(CubeCutoff(j, shell, axes, sup, normed))
        shell_members.setdefault(shell, []).append(j)
        counts[sup] += 1
        unity[sup] += normed
        sq[sup] += normed**2

    res_vals = 1.0 - s / t
    res_sup = np.nonzero(res_vals > 0)[0]
    res_vals = res_vals[res_sup]
    j = len(cutoffs)
    cutoffs.append(CubeCutoff(j, RESIDUAL_SHELL, (), res_sup, res_vals))
    shell_members[RESIDUAL_SHELL] = [j]
    counts[res_sup] += 1
    unity[res_sup] += res_vals
    sq[res_sup] += res_vals**2

    return FrequencyPartition(
        config=config,
        grid=grid,
        cutoffs=cutoffs,
        shell_members=shell_members,
        kappa=int(counts.max()),
        unity_sum=unity,
        sq_sum=sq,
    )


def project_cube(partition: FrequencyPartition, field: SpectralField, j: int) -> SpectralField:
    """box_j f: multiply fhat by the j-th cutoff. Output keeps the input representation."""
    if not 0 <= j < partition.n_cutoffs:
        raise IndexError(f"cube index {j} out of range 0..{partition.n_cutoffs - 1}")
    cut = partition.cutoffs[j]
    fhat = field.as_frequency()
    out = np.zeros_like(fhat.values).reshape(-1)
    out[cut.support] = cut.values * fhat.values.reshape(-1)[cut.support]
    res = SpectralField(field.grid, out.reshape(field.grid.shape), "frequency")
    return to_physical(res) if field.rep == "physical" else res


@dataclass(frozen=True)
class BernsteinFit:
    slope: float
    expected: float
    shells: tuple[int, ...]
    ratios: tuple[float, ...]  # median ||box f||_q / ||box f||_p per shell

    @property
    def error(self) -> float:
        return abs(self.slope - self.expected)


def bernstein_exponent(
    partition: FrequencyPartition,
    p: float = 2.0,
    q: float = math.inf,
    shells: tuple[int, ...] | None = None,
    n_probes: int = 8,
    seed: int = 0,
) -> BernsteinFit:
    """Fit the growth exponent of ||box_j f||_q / ||box_j f||_p across shells.

    Probes single-cube random fields on shells N in {2, 4, ...} and regresses
    log2(median ratio) on log2 N. Probe spectra have random Rayleigh moduli
    with aligned phases (random phases would not saturate the volume factor,
    and the ratio would go flat). The expected slope from the cube side
    2*N^-a is -a*(d/p - d/q).
    """
    from .grids import lp_norm

    cfg = partition.config
    if shells is None:
        shells = tuple(n for n in cfg.shells if n >= 2)
    if len(shells) < 2:
        raise ConfigError("bernstein_exponent needs at least two shells >= 2")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0xB3A7], dtype=np.uint64)))
    medians = []
    for n in shells:
        members = partition.shell_members.get(n, [])
        usable = [j for j in members if partition.cutoffs[j].support.size > 0]
        if not usable:
            raise ResolutionError(f"shell {n} has no lattice-resolvable cubes on this grid")
        take = min(n_probes, len(usable))
        picks = rng.choice(len(usable), size=take, replace=False)
        ratios = []
        for k in picks:
            cut = partition.cutoffs[usable[int(k)]]
            moduli = rng.rayleigh(scale=math.sqrt(0.5), size=cut.support.size)
            fhat = np.zeros(partition.grid.n_points, dtype=np.complex128)
            fhat[cut.support] = cut.values * moduli
            f = to_physical(
                SpectralField(partition.grid, fhat.reshape(partition.grid.shape), "frequency")
            )
            denom = lp_norm(f, p)
            if denom > 0:
                ratios.append(lp_norm(f, q) / denom)
        medians.append(float(np.median(ratios)))
    lg_n = np.log2(np.asarray(shells, dtype=float))
    lg_r = np.log2(np.asarray(medians))
    slope = float(np.polyfit(lg_n, lg_r, 1)[0])
    dp = 0.0 if math.isinf(p) else cfg.dim / p
    dq = 0.0 if math.isinf(q) else cfg.dim / q
    return BernsteinFit(slope, -cfg.a * (dp - dq), tuple(shells), tuple(medians))
