"""Parabolic metric geometry of space-time R^{n+1} x R.

Points carry a spatial position (length units) and a time (length^2 units).
The parabolic distance ``max(|dx|, sqrt(|dt|))`` makes time two-dimensional:
covering counts of a time segment grow like 1/r^2 and space-time itself has
dimension n+3.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionMismatch


@dataclass(frozen=True)
class SpaceTimePoint:
    """An event: spatial position ``x`` plus time ``t``."""

    x: np.ndarray
    t: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if x.ndim != 1:
            raise ValueError("spatial position must be a vector")
        if not (np.all(np.isfinite(x)) and math.isfinite(self.t)):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))

    @property
    def ambient_dim(self) -> int:
        return self.x.shape[0]


class PointCloud:
    """A finite sampled subset of space-time, optionally labeled by component.

    Stored as an ``(N, n+1)`` array of spatial positions plus an ``(N,)``
    array of times.  Component labels, when present, partition the indices.
    """

    def __init__(self, xs, ts, labels=None):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if xs.shape[0] != ts.shape[0]:
            raise ValueError("xs and ts must have matching lengths")
        if xs.shape[0] == 0:
            raise ValueError("point cloud must be nonempty")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ts))):
            raise ValueError("coordinates must be finite")
        self.xs = xs
        self.ts = ts
        if labels is not None:
            labels = np.asarray(labels, dtype=int)
            if labels.shape[0] != xs.shape[0]:
                raise ValueError("labels must match the number of points")
        self.labels = labels

    @classmethod
    def from_points(cls, points, labels=None):
        dims = {p.ambient_dim for p in points}
        if len(dims) > 1:
            raise DimensionMismatch("points have mixed ambient dimensions")
        xs = np.array([p.x for p in points])
        ts = np.array([p.t for p in points])
        return cls(xs, ts, labels)

    def __len__(self):
        return self.xs.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.xs.shape[1]

    def point(self, i: int) -> SpaceTimePoint:
        return SpaceTimePoint(self.xs[i], self.ts[i])

    def distance_p(self, p: SpaceTimePoint) -> float:
        """Parabolic distance from ``p`` to the nearest sample."""
        if p.ambient_dim != self.ambient_dim:
            raise DimensionMismatch("ambient dimensions differ")
        dx = np.linalg.norm(self.xs - p.x, axis=1)
        dt = np.sqrt(np.abs(self.ts - p.t))
        return float(np.min(np.maximum(dx, dt)))

    def components(self):
        """Index sets per component label (one set covering all, if none)."""
        if self.labels is None:
            return {0: np.arange(len(self))}
        return {int(c): np.flatnonzero(self.labels == c)
                for c in np.unique(self.labels)}

    def to_json(self) -> str:
        rows = []
        for i in range(len(self)):
            row = {"x": [float(a) for a in self.xs[i]], "t": float(self.ts[i])}
            if self.labels is not None:
                row["component"] = int(self.labels[i])
            rows.append(row)
        return json.dumps(rows)

    @classmethod
    def from_json(cls, text: str) -> "PointCloud":
        rows = json.loads(text)
        xs = [row["x"] for row in rows]
        ts = [row["t"] for row in rows]
        labels = None
        if rows and "component" in rows[0]:
            labels = [row["component"] for row in rows]
        return cls(xs, ts, labels)


def parabolic_distance(p: SpaceTimePoint, q: SpaceTimePoint) -> float:
    """max(|x_p - x_q|, |t_p - t_q|^(1/2))."""
    if p.ambient_dim != q.ambient_dim:
        raise DimensionMismatch("ambient dimensions differ")
    return float(max(np.linalg.norm(p.x - q.x), math.sqrt(abs(p.t - q.t))))


def in_parabolic_ball(p: SpaceTimePoint, center: SpaceTimePoint,
                      r: float) -> bool:
    """Open parabolic ball: |dx| < r and |dt| < r^2."""
    if r <= 0:
        raise ValueError("radius must be positive")
    if p.ambient_dim != center.ambient_dim:
        raise DimensionMismatch("ambient dimensions differ")
    return bool(np.linalg.norm(p.x - center.x) < r
                and abs(p.t - center.t) < r * r)


def in_parabolic_tube(p: SpaceTimePoint, target, r: float) -> bool:
    """Open parabolic tube of radius ``r`` about a cloud or a plane.

    ``target`` needs a ``distance_p`` method; clouds give the min over
    samples, planes the exact closed form.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    return bool(target.distance_p(p) < r)


def parabolic_ball_volume(r: float, ambient_dim: int) -> float:
    """Lebesgue volume of a parabolic ball: spatial ball times (-r^2, r^2)."""
    n1 = ambient_dim
    unit = math.pi ** (n1 / 2.0) / math.gamma(n1 / 2.0 + 1.0)
    return unit * r ** n1 * 2.0 * r * r


def greedy_parabolic_cover(cloud: PointCloud, r: float) -> np.ndarray:
    """Indices of greedy cover centers at scale ``r`` (closed balls)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    return kernels.greedy_cover(cloud.xs, cloud.ts, float(r))


@dataclass
class CoveringRow:
    scale: float
    count: int
    sum: float


@dataclass
class MeasureEstimate:
    k: int
    rows: list[CoveringRow] = field(default_factory=list)

    def sums(self):
        return np.array([row.sum for row in self.rows])

    def counts(self):
        return np.array([row.count for row in self.rows])

    def scales(self):
        return np.array([row.scale for row in self.rows])

    def to_csv(self) -> str:
        lines = ["scale,count,sum"]
        for row in self.rows:
            lines.append(f"{row.scale!r},{row.count},{row.sum!r}")
        return "\n".join(lines) + "\n"


def ph_measure_estimate(cloud: PointCloud, k: int, scales) -> MeasureEstimate:
    """Greedy covering sums ``count * r^k`` per scale.

    Upper-estimates the k-dimensional parabolic Hausdorff measure at finitely
    many scales; on a set inside a single time-slice this reduces to a
    Euclidean covering, since parabolic distance equals spatial distance at
    equal times.
    """
    scales = [float(s) for s in scales]
    if not scales:
        raise ValueError("need at least one scale")
    if any(s <= 0 for s in scales):
        raise ValueError("scales must be positive")
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly decreasing")
    if k < 0:
        raise ValueError("k must be nonnegative")
    est = MeasureEstimate(k=k)
    for r in scales:
        count = len(greedy_parabolic_cover(cloud, r))
        est.rows.append(CoveringRow(scale=r, count=count, sum=count * r ** k))
    return est


def sampling_floor(cloud: PointCloud, quantile: float = 0.9,
                   factor: float = 3.0) -> float:
    """Scale below which covers measure sampling, not geometry.

    Three times the ``quantile`` nearest-neighbor parabolic spacing.
    """
    n = len(cloud)
    if n < 2:
        return 0.0
    nn = np.empty(n)
    for i in range(n):
        dx = np.linalg.norm(cloud.xs - cloud.xs[i], axis=1)
        dt = np.sqrt(np.abs(cloud.ts - cloud.ts[i]))
        d = np.maximum(dx, dt)
        d[i] = np.inf
        nn[i] = d.min()
    return factor * float(np.quantile(nn, quantile))


@dataclass
class DimensionEstimate:
    value: float
    band: float
    scales: np.ndarray
    counts: np.ndarray


def ph_dimension_estimate(cloud: PointCloud, scales=None,
                          trim: float = 0.1) -> DimensionEstimate:
    """Parabolic box-counting dimension: slope of log N(r) vs log(1/r).

    The largest and smallest ``trim`` fraction of scales are discarded
    before the least-squares fit (boundary and sampling artifacts dominate
    the extremes); the band is two standard errors of the fitted slope.
    """
    if scales is None:
        diam = _parabolic_diameter(cloud)
        floor = max(sampling_floor(cloud), 1e-6 * diam)
        hi, lo = diam / 4.0, max(floor, diam / 256.0)
        if lo >= hi:
            lo = hi / 8.0
        scales = np.geomspace(hi, lo, 12)
    scales = np.asarray(sorted(scales, reverse=True), dtype=float)
    counts = np.array([len(greedy_parabolic_cover(cloud, r))
                       for r in scales])
    ntrim = int(len(scales) * trim)
    keep = slice(ntrim, len(scales) - ntrim if ntrim else None)
    s, c = scales[keep], counts[keep]
    ok = c > 0
    s, c = s[ok], c[ok]
    if len(s) < 3:
        raise ValueError("need at least 3 usable scales for a fit")
    lx = np.log(1.0 / s)
    ly = np.log(c.astype(float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope = float(coef[0])
    fitted = A @ coef
    dof = max(len(lx) - 2, 1)
    sigma2 = float(np.sum((ly - fitted) ** 2)) / dof
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    stderr = math.sqrt(sigma2 / sxx) if sxx > 0 else float("inf")
    return DimensionEstimate(value=slope, band=2.0 * stderr,
                             scales=s, counts=c)


def _parabolic_diameter(cloud: PointCloud) -> float:
    dx = cloud.xs.max(axis=0) - cloud.xs.min(axis=0)
    dt = cloud.ts.max() - cloud.ts.min()
    return float(max(np.linalg.norm(dx), math.sqrt(dt))) or 1.0
