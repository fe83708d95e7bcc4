"""Reifenberg-property profiling and graph extraction for space-time sets.

The half (one-sided) Reifenberg defect of a set S with a plane assignment
{V_y} is, per base point and scale, the worst normalized parabolic distance
of ball points to the base plane.  Small defects plus either a two-sided
closeness hypothesis or an f-regular assignment force the projection to a
base plane to be bi-Lipschitz, which is what the extraction routines check
and certify pair by pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionMismatch, HypothesisNotVerified, \
    InjectivityFailure
from .planes import TimeSlicePlane, hausdorff_distance_cloud_plane, \
    plane_hausdorff_distance
from .spacetime import PointCloud, sampling_floor

# Smallness threshold for the bi-Lipschitz extraction hypotheses; chosen
# safely inside every constraint the extraction relies on (all are < 1/8).
DELTA_BILIPSCHITZ_MAX = 1.0 / 20.0


class PlaneAssignment:
    """A time-slice k-plane based at every point of a cloud."""

    def __init__(self, cloud: PointCloud, planes: list[TimeSlicePlane]):
        if len(planes) != len(cloud):
            raise ValueError("one plane per point required")
        ks = {p.k for p in planes}
        if len(ks) != 1:
            raise ValueError("planes must share a common dimension")
        for i, plane in enumerate(planes):
            if (np.linalg.norm(plane.base.x - cloud.xs[i]) > 1e-9
                    or abs(plane.base.t - cloud.ts[i]) > 1e-12):
                raise ValueError(f"plane {i} is not based at its point")
        self.cloud = cloud
        self.planes = planes
        self.k = ks.pop()

    def __getitem__(self, i: int) -> TimeSlicePlane:
        return self.planes[i]

    def __len__(self):
        return len(self.planes)

    @classmethod
    def constant_directions(cls, cloud: PointCloud,
                            directions) -> "PlaneAssignment":
        """Parallel planes: the same spatial span translated to each point."""
        planes = [TimeSlicePlane.from_spanning(cloud.point(i), directions)
                  for i in range(len(cloud))]
        return cls(cloud, planes)

    @classmethod
    def from_fit(cls, cloud: PointCloud, k: int,
                 scale: float) -> "PlaneAssignment":
        """Per-point weighted least-squares k-planes, time forced to zero.

        Neighbors within parabolic distance ``scale`` enter a weighted
        spatial covariance; its top-k eigenvectors span the plane.  Points
        with no neighbors get an arbitrary axis-aligned frame.
        """
        planes = []
        for i in range(len(cloud)):
            dx = cloud.xs - cloud.xs[i]
            dist = np.maximum(np.linalg.norm(dx, axis=1),
                              np.sqrt(np.abs(cloud.ts - cloud.ts[i])))
            mask = (dist <= scale) & (dist > 0)
            if np.any(mask):
                d = dx[mask]
                w = 1.0 - (dist[mask] / scale) ** 2
                cov = (d * w[:, None]).T @ d
                _, vecs = np.linalg.eigh(cov)
                D = vecs[:, ::-1][:, :k].T
            else:
                D = np.eye(cloud.ambient_dim)[:k]
            planes.append(TimeSlicePlane.from_spanning(cloud.point(i), D))
        return cls(cloud, planes)


@dataclass
class ReifenbergProfile:
    scales: np.ndarray
    deltas: np.ndarray
    r_min: float
    k: int

    @property
    def vanishing(self) -> bool:
        """Whether the fitted defect trend decreases toward zero."""
        if np.max(self.deltas) < 1e-12:
            return True
        s, d = self.scales, np.maximum(self.deltas, 1e-15)
        slope = np.polyfit(np.log(s), np.log(d), 1)[0]
        return bool(slope > 0.1 and d[-1] <= 0.6 * d[0] + 1e-12)

    def max_delta(self) -> float:
        return float(np.max(self.deltas))

    def to_csv(self) -> str:
        lines = ["scale,delta"]
        for s, d in zip(self.scales, self.deltas):
            lines.append(f"{s!r},{d!r}")
        return "\n".join(lines) + "\n"


def plane_defects(cloud: PointCloud, assignment: PlaneAssignment,
                  r: float) -> np.ndarray:
    """Per-base-point half-Reifenberg defect at one scale.

    defect_i = sup over z in PB_r(y_i) ∩ S of dist_P(z, V_i) / r.
    """
    n = len(cloud)
    out = np.zeros(n)
    for i in range(n):
        dx = cloud.xs - cloud.xs[i]
        dsq = np.sqrt(np.abs(cloud.ts - cloud.ts[i]))
        pdist = np.maximum(np.linalg.norm(dx, axis=1), dsq)
        mask = pdist < r
        if not np.any(mask):
            continue
        D = assignment[i].directions
        d = dx[mask]
        if D.shape[0]:
            d = d - (d @ D.T) @ D
        res = np.maximum(np.linalg.norm(d, axis=1), dsq[mask])
        out[i] = float(np.max(res)) / r
    return out


def strong_reifenberg_profile(cloud: PointCloud, assignment: PlaneAssignment,
                              scales, floor: float | None = None
                              ) -> ReifenbergProfile:
    """Half-Reifenberg defect profile: per-scale supremum over base points.

    Scales must stay above the sampling floor (defects below it measure
    sampling, not geometry); pass ``floor=0`` to override.
    """
    scales = np.asarray(sorted(scales, reverse=True), dtype=float)
    if floor is None:
        floor = sampling_floor(cloud)
    if np.any(scales < floor):
        raise ValueError(f"scales below the sampling floor {floor:.3g}")
    deltas = np.array([plane_defects(cloud, assignment, r).max()
                       for r in scales])
    return ReifenbergProfile(scales=scales, deltas=deltas, r_min=floor,
                             k=assignment.k)


def _direction_grid(ambient: int, n: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform unit directions (half sphere; sign is irrelevant)."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, ambient))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d


def best_plane_defect(cloud: PointCloud, index: int, k: int, scales,
                      ngrid: int = 400, seed: int = 0) -> tuple[float,
                                                                np.ndarray]:
    """Best achievable max-over-scales defect at one base point.

    Searches candidate k-plane frames (grid of directions for lines and of
    normals for hyperplanes, random orthonormal frames otherwise) and
    returns the smallest max-over-scales one-sided defect together with the
    winning frame.  Used to certify that NO scale-independent plane choice
    works, which a fixed assignment cannot show.
    """
    scales = np.asarray(sorted(scales, reverse=True), dtype=float)
    ambient = cloud.ambient_dim
    dx = cloud.xs - cloud.xs[index]
    dsq = np.sqrt(np.abs(cloud.ts - cloud.ts[index]))
    pdist = np.maximum(np.linalg.norm(dx, axis=1), dsq)
    if k == 1:
        frames = _direction_grid(ambient, ngrid, seed)[:, None, :]
    elif k == ambient - 1:
        normals = _direction_grid(ambient, ngrid, seed)
        frames = np.empty((ngrid, k, ambient))
        for g, nrm in enumerate(normals):
            basis = np.linalg.svd(np.eye(ambient)
                                  - np.outer(nrm, nrm))[0][:, :k].T
            frames[g] = basis
        frames = np.ascontiguousarray(frames)
    else:
        rng = np.random.default_rng(seed)
        frames = np.empty((ngrid, k, ambient))
        for g in range(ngrid):
            frames[g] = np.linalg.qr(rng.normal(size=(ambient, k)))[0].T
    best = np.inf
    best_frame = frames[0]
    for frame in frames:
        worst = 0.0
        for r in scales:
            mask = pdist < r
            if not np.any(mask):
                continue
            d = dx[mask] - (dx[mask] @ frame.T) @ frame
            res = np.maximum(np.linalg.norm(d, axis=1), dsq[mask])
            worst = max(worst, float(np.max(res)) / r)
            if worst >= best:
                break
        if worst < best:
            best = worst
            best_frame = frame
    return float(best), best_frame


@dataclass
class RegularityFunction:
    scales: np.ndarray      # right bin edges
    f: np.ndarray           # per-bin supremum (-1 for empty bins)
    envelope: np.ndarray    # monotone non-decreasing envelope

    def value_at(self, r: float) -> float:
        i = int(np.searchsorted(self.scales, r, side="left"))
        i = min(i, len(self.scales) - 1)
        return float(self.envelope[i])

    def to_csv(self) -> str:
        lines = ["scale,f,envelope"]
        for s, a, b in zip(self.scales, self.f, self.envelope):
            lines.append(f"{s!r},{a!r},{b!r}")
        return "\n".join(lines) + "\n"


def f_regularity_profile(cloud: PointCloud, assignment: PlaneAssignment,
                         nbins: int = 10) -> RegularityFunction:
    """Pair-binned regularity of the plane distribution.

    For each point pair at parabolic distance r, the plane-plane parabolic
    Hausdorff distance of ball sections at that scale, normalized by r;
    pairs are binned by r and the per-bin supremum is returned with its
    monotone envelope.  Pairs whose ball section of the far plane is empty
    score the maximal normalized value 1.
    """
    n = len(cloud)
    if n < 2:
        raise ValueError("need at least two points")
    dists = []
    vals = []
    for i in range(n - 1):
        for j in range(i + 1, n):
            r = max(np.linalg.norm(cloud.xs[i] - cloud.xs[j]),
                    math.sqrt(abs(cloud.ts[i] - cloud.ts[j])))
            if r == 0.0:
                continue
            try:
                d = plane_hausdorff_distance(assignment[i], assignment[j],
                                             r, center=cloud.point(i))
                vals.append(min(d / r, 1.0))
            except ValueError:
                vals.append(1.0)
            dists.append(r)
    dists = np.asarray(dists)
    vals = np.asarray(vals)
    lo, hi = dists.min(), dists.max()
    if hi <= lo * (1 + 1e-12):
        raise ValueError("all pairs fall in one bin; binning is degenerate")
    edges = np.geomspace(lo, hi, nbins + 1)[1:]
    f = np.full(nbins, -1.0)
    for r, v in zip(dists, vals):
        b = min(int(np.searchsorted(edges, r, side="left")), nbins - 1)
        f[b] = max(f[b], v)
    env = np.maximum.accumulate(np.where(f < 0, 0.0, f))
    return RegularityFunction(scales=edges, f=f, envelope=env)


@dataclass
class GraphExtraction:
    indices: np.ndarray       # cloud indices inside the working half-ball
    tangential: np.ndarray    # projected coordinates on the base plane
    normals: np.ndarray       # spatial components orthogonal to the plane
    dts: np.ndarray           # time offsets
    constant: float           # observed bi-Lipschitz constant of the inverse
    constant_time: float      # |t-s|^(1/2) <= C |pi(y)-pi(z)|
    constant_normal: float    # |y_perp - z_perp| <= C |pi(y)-pi(z)|


def _extract_graph(cloud: PointCloud, base_index: int, V: TimeSlicePlane,
                   radius: float) -> GraphExtraction:
    y0 = cloud.point(base_index)
    dx = cloud.xs - y0.x
    pdist = np.maximum(np.linalg.norm(dx, axis=1),
                       np.sqrt(np.abs(cloud.ts - y0.t)))
    idx = np.flatnonzero(pdist < radius)
    D = V.directions
    tang = dx[idx] @ D.T if V.k else np.zeros((len(idx), 0))
    normals = dx[idx] - tang @ D if V.k else dx[idx]
    dts = cloud.ts[idx] - y0.t
    c_time = c_norm = 0.0
    resolution = 1e-12 * max(radius, 1.0)
    for a in range(len(idx) - 1):
        dpi = np.linalg.norm(tang[a + 1:] - tang[a], axis=1)
        dtt = np.sqrt(np.abs(dts[a + 1:] - dts[a]))
        dnn = np.linalg.norm(normals[a + 1:] - normals[a], axis=1)
        bad = (dpi <= resolution) & ((dtt > resolution) | (dnn > resolution))
        if np.any(bad):
            b = int(np.flatnonzero(bad)[0])
            raise InjectivityFailure(
                "projection collapses two samples",
                witnesses=[(int(idx[a]), int(idx[a + 1 + b]))])
        ok = dpi > resolution
        if np.any(ok):
            c_time = max(c_time, float(np.max(dtt[ok] / dpi[ok])))
            c_norm = max(c_norm, float(np.max(dnn[ok] / dpi[ok])))
    constant = max(1.0, c_time, c_norm)
    return GraphExtraction(indices=idx, tangential=tang, normals=normals,
                           dts=dts, constant=constant, constant_time=c_time,
                           constant_normal=c_norm)


def extract_bilipschitz_graph(cloud: PointCloud, base_index: int,
                              V: TimeSlicePlane, delta: float, r0: float,
                              assignment: PlaneAssignment | None = None,
                              floor: float | None = None) -> GraphExtraction:
    """Bi-Lipschitz graph over a single plane, hypotheses verified first.

    Requires: delta within the smallness threshold; the half-Reifenberg
    defect at level delta on scales up to r0 (with the given assignment, or
    per-point fitted planes); and the two-sided closeness of S and V on the
    r0-ball.  Rejections raise ``HypothesisNotVerified``; an actual failure
    of injectivity on verified input raises ``InjectivityFailure`` with the
    offending pair.
    """
    if delta > DELTA_BILIPSCHITZ_MAX:
        raise HypothesisNotVerified(
            f"delta={delta} above threshold {DELTA_BILIPSCHITZ_MAX}")
    if floor is None:
        floor = sampling_floor(cloud)
    if assignment is None:
        assignment = PlaneAssignment.from_fit(cloud, V.k, r0)
    scales = [r for r in np.geomspace(r0, r0 / 8.0, 4) if r >= floor] or [r0]
    prof = strong_reifenberg_profile(cloud, assignment, scales, floor=0.0)
    if prof.max_delta() > delta:
        raise HypothesisNotVerified(
            f"half-Reifenberg defect {prof.max_delta():.3g} exceeds "
            f"delta={delta}")
    two_sided = hausdorff_distance_cloud_plane(cloud, V, r0,
                                               cloud.point(base_index))
    # a finite sample of a continuous set leaves gaps of the order of the
    # nearest-neighbor spacing; charge that to the discretization, not to
    # the set, and report it
    gap = _max_nn_spacing(cloud)
    if two_sided >= delta * r0 + gap:
        raise HypothesisNotVerified(
            f"two-sided closeness {two_sided:.3g} not below "
            f"delta*r0={delta * r0:.3g} (+ sampling gap {gap:.3g})")
    return _extract_graph(cloud, base_index, V, r0 / 2.0)


def _max_nn_spacing(cloud: PointCloud) -> float:
    if len(cloud) < 2:
        return 0.0
    worst = 0.0
    for i in range(len(cloud)):
        d = np.maximum(np.linalg.norm(cloud.xs - cloud.xs[i], axis=1),
                       np.sqrt(np.abs(cloud.ts - cloud.ts[i])))
        d[i] = np.inf
        worst = max(worst, float(d.min()))
    return worst


def extract_lipschitz_graph_fregular(cloud: PointCloud,
                                     assignment: PlaneAssignment,
                                     base_index: int,
                                     delta: float = DELTA_BILIPSCHITZ_MAX,
                                     r0: float | None = None,
                                     floor: float | None = None
                                     ) -> GraphExtraction:
    """Graph extraction with f-regularity replacing the two-sided check.

    The working radius is the largest scale at which both the half-Reifenberg
    defect and the regularity envelope stay below delta.
    """
    if delta > DELTA_BILIPSCHITZ_MAX:
        raise HypothesisNotVerified(
            f"delta={delta} above threshold {DELTA_BILIPSCHITZ_MAX}")
    if floor is None:
        floor = sampling_floor(cloud)
    reg = f_regularity_profile(cloud, assignment)
    good = reg.scales[reg.envelope <= delta]
    if len(good) == 0:
        raise HypothesisNotVerified(
            "regularity exceeds delta at every scale")
    r_work = float(good.max()) if r0 is None else min(r0, float(good.max()))
    scales = [r for r in np.geomspace(r_work, r_work / 8.0, 4)
              if r >= floor] or [r_work]
    prof = strong_reifenberg_profile(cloud, assignment, scales, floor=0.0)
    if prof.max_delta() > delta:
        raise HypothesisNotVerified(
            f"half-Reifenberg defect {prof.max_delta():.3g} exceeds "
            f"delta={delta}")
    return _extract_graph(cloud, base_index, assignment[base_index],
                          r_work / 2.0)


@dataclass
class TwoHolderFit:
    constant: float                  # sup |dt| / |dx|^2 (inf if unbounded)
    eps: np.ndarray                  # restriction thresholds
    gamma: np.ndarray                # gamma(eps): sup restricted to |dx|<=eps
    vanishing: bool
    multivalued: bool = False
    branches: list = field(default_factory=list)

    @property
    def parabolic_lipschitz(self) -> float:
        """Lipschitz constant of x -> (x, u(x)) into space-time."""
        return max(1.0, math.sqrt(self.constant))


def two_holder_fit(cloud: PointCloud, eps_grid=None) -> TwoHolderFit:
    """Fit of the time coordinate as a 2-Hoelder function of space.

    When the spatial projection is injective, returns the global constant
    C = sup |dt|/|dx|^2 and the restricted profile gamma(eps); an unbounded
    ratio (two events over one spatial point) flagsC as infinite.  When the
    projection is genuinely multi-valued the cloud is partitioned into
    single-valued sheets (greedy, in time order) and each sheet is fitted.
    """
    order = np.lexsort((cloud.ts,))
    seen: dict[bytes, list] = {}
    for i in order:
        seen.setdefault(cloud.xs[i].tobytes(), []).append(int(i))
    dup_groups = [g for g in seen.values()
                  if len({cloud.ts[i] for i in g}) > 1]
    if dup_groups:
        sheet_count = max(len({cloud.ts[i] for i in g}) for g in dup_groups)
        sheets = [[] for _ in range(sheet_count)]
        for g in seen.values():
            tvals = sorted({cloud.ts[i] for i in g})
            for i in g:
                sheets[tvals.index(cloud.ts[i]) % sheet_count].append(i)
        branches = []
        for members in sheets:
            if members:
                sub = PointCloud(cloud.xs[members], cloud.ts[members])
                branches.append((np.asarray(members), two_holder_fit(sub)))
        worst = max(b.constant for _, b in branches)
        return TwoHolderFit(constant=worst, eps=np.zeros(0),
                            gamma=np.zeros(0), vanishing=False,
                            multivalued=True, branches=branches)
    if eps_grid is None:
        dx_max = float(np.linalg.norm(
            cloud.xs.max(axis=0) - cloud.xs.min(axis=0))) or 1.0
        lo = max(_min_spacing(cloud), 1e-9 * dx_max)
        eps_grid = np.geomspace(lo, dx_max, 8)
    eps_grid = np.asarray(sorted(eps_grid), dtype=float)
    edges = np.concatenate([eps_grid, [np.inf]])
    binmax, bininf = kernels.pairwise_bin_max(cloud.xs, cloud.ts, edges,
                                              spatial_key=True)
    cmax = np.maximum.accumulate(binmax)
    cinf = np.maximum.accumulate(bininf.astype(int)) > 0
    constant = float("inf") if cinf[-1] else float(max(cmax[-1], 0.0))
    gamma = np.where(cinf[:-1], np.inf, np.maximum(cmax[:-1], 0.0))
    lead = gamma[gamma >= 0][:max(1, len(gamma) // 3)]
    vanishing = (np.isfinite(constant) and constant > 0
                 and float(np.max(lead)) <= 0.5 * constant) \
        or constant == 0.0
    return TwoHolderFit(constant=constant, eps=eps_grid, gamma=gamma,
                        vanishing=bool(vanishing))


def _min_spacing(cloud: PointCloud) -> float:
    if len(cloud) < 2:
        return 0.0
    best = np.inf
    for i in range(len(cloud)):
        d = np.linalg.norm(cloud.xs - cloud.xs[i], axis=1)
        d[i] = np.inf
        best = min(best, float(d.min()))
    return best if np.isfinite(best) else 0.0


@dataclass
class TimeSliceReport:
    eps: np.ndarray
    h1_bounds: np.ndarray          # covering bound on H_1(t(S)) per eps
    component_spreads: dict
    verdicts: dict                 # component -> bool (time-slice or not)
    spread_tol: float

    @property
    def h1_estimate(self) -> float:
        return float(self.h1_bounds[-1])


def time_slice_test(cloud: PointCloud, labels=None,
                    fit: TwoHolderFit | None = None, eps_grid=None,
                    spread_tol: float = 1e-6) -> TimeSliceReport:
    """Covering estimate of H_1(t(S)) plus per-component time spreads.

    Hypotheses (verified here unless a fit is supplied): the set is a
    single-valued 2-Hoelder graph with vanishing constant.  The H_1 bound
    at each eps is gamma(eps) * (sum of r^2 over a spatial eps-cover), which
    vanishes with eps for finite spatial 2-content; each connected component
    is judged a time-slice when its time spread is below tolerance.
    """
    if fit is None:
        fit = two_holder_fit(cloud, eps_grid)
    if fit.multivalued or not (fit.vanishing or fit.constant == 0.0):
        raise HypothesisNotVerified(
            "cloud is not a vanishing-constant 2-Hoelder graph")
    eps = fit.eps if len(fit.eps) else np.array([1.0])
    gamma = fit.gamma if len(fit.gamma) else np.array([0.0])
    bounds = np.empty(len(eps))
    for i, e in enumerate(eps):
        centers = kernels.greedy_cover(cloud.xs, np.zeros(len(cloud)),
                                       float(e))
        g = gamma[i] if np.isfinite(gamma[i]) else float("inf")
        bounds[i] = g * len(centers) * e * e
    if labels is None:
        labels = cloud.labels
    comps = {0: np.arange(len(cloud))} if labels is None else {
        int(c): np.flatnonzero(labels == c) for c in np.unique(labels)}
    spreads = {c: float(cloud.ts[ix].max() - cloud.ts[ix].min())
               for c, ix in comps.items()}
    verdicts = {c: s <= spread_tol for c, s in spreads.items()}
    return TimeSliceReport(eps=eps, h1_bounds=bounds,
                           component_spreads=spreads, verdicts=verdicts,
                           spread_tol=spread_tol)
