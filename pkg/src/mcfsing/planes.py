"""Affine k-planes inside time-slices and plane-to-plane comparison.

A plane is stored as a base event plus an orthonormal spatial frame; it lies
entirely in the slice {t = base.t}.  Plane angles are computed from the
singular values of the frame Gram matrix (cosines of principal angles), and
the one-sided tube constant of equal-dimensional planes through a common
base is the sine of the largest principal angle, which is symmetric in the
two planes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SymmetryViolation
from .spacetime import SpaceTimePoint

ORTHO_TOL = 1e-10


def orthonormalize(vectors) -> np.ndarray:
    """Modified Gram-Schmidt with one re-orthogonalization pass."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float)).copy()
    out = []
    for v in V:
        for _ in range(2):
            for u in out:
                v = v - np.dot(v, u) * u
        norm = np.linalg.norm(v)
        if norm < 1e-13:
            raise ValueError("spanning vectors are linearly dependent")
        out.append(v / norm)
    return np.array(out)


@dataclass(frozen=True)
class TimeSlicePlane:
    """Affine k-plane through ``base`` spanned by orthonormal ``directions``,
    contained in the time-slice of its base point.  ``k = 0`` is allowed and
    denotes the single point."""

    base: SpaceTimePoint
    directions: np.ndarray

    def __post_init__(self):
        D = np.asarray(self.directions, dtype=float)
        if D.size == 0:
            D = D.reshape(0, self.base.ambient_dim)
        D = np.atleast_2d(D)
        if D.shape[1] != self.base.ambient_dim:
            raise DimensionMismatch("directions do not match ambient dim")
        if D.shape[0] > self.base.ambient_dim:
            raise ValueError("more directions than ambient dimensions")
        if D.shape[0]:
            gram = D @ D.T
            if not np.allclose(gram, np.eye(D.shape[0]), atol=ORTHO_TOL):
                raise ValueError("directions must be orthonormal; "
                                 "use from_spanning")
        object.__setattr__(self, "directions", D)

    @classmethod
    def from_spanning(cls, base: SpaceTimePoint, vectors) -> "TimeSlicePlane":
        return cls(base, orthonormalize(vectors))

    @property
    def k(self) -> int:
        return self.directions.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.base.ambient_dim

    def spatial_distance(self, x) -> float:
        """Euclidean distance from a spatial point to the affine plane."""
        d = np.asarray(x, dtype=float) - self.base.x
        if self.k:
            d = d - self.directions.T @ (self.directions @ d)
        return float(np.linalg.norm(d))

    def distance_p(self, p: SpaceTimePoint) -> float:
        """Parabolic distance from an event to the plane (exact)."""
        if p.ambient_dim != self.ambient_dim:
            raise DimensionMismatch("ambient dimensions differ")
        return max(self.spatial_distance(p.x),
                   math.sqrt(abs(p.t - self.base.t)))

    def sample_section(self, r: float, per_axis: int = 9) -> np.ndarray:
        """Grid of spatial points on the ball section B_r(base) ∩ plane."""
        if self.k == 0:
            return self.base.x[None, :]
        axes = [np.linspace(-r, r, per_axis)] * self.k
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([m.ravel() for m in mesh], axis=1)
        coords = coords[np.linalg.norm(coords, axis=1) <= r]
        return self.base.x + coords @ self.directions

    def to_json(self) -> str:
        return json.dumps({
            "base": {"x": [float(a) for a in self.base.x],
                     "t": float(self.base.t)},
            "directions": [[float(a) for a in row]
                           for row in self.directions],
        })

    @classmethod
    def from_json(cls, text: str) -> "TimeSlicePlane":
        obj = json.loads(text)
        base = SpaceTimePoint(np.array(obj["base"]["x"]), obj["base"]["t"])
        return cls(base, np.array(obj["directions"]).reshape(
            -1, base.ambient_dim))


@dataclass
class Projection:
    tangential: np.ndarray
    normal: np.ndarray
    dt: float


def project(p: SpaceTimePoint, V: TimeSlicePlane) -> Projection:
    """Orthogonal decomposition of ``p`` relative to ``V``.

    ``x_p - x_base`` splits into tangential coordinates (in the plane frame)
    plus a normal spatial component; the time offset rides along unchanged.
    """
    if p.ambient_dim != V.ambient_dim:
        raise DimensionMismatch("ambient dimensions differ")
    d = p.x - V.base.x
    tang = V.directions @ d if V.k else np.zeros(0)
    normal = d - V.directions.T @ tang if V.k else d
    return Projection(tangential=tang, normal=normal, dt=p.t - V.base.t)


def principal_angle_sines(V: TimeSlicePlane, W: TimeSlicePlane) -> np.ndarray:
    """Sines of the principal angles of span(V) relative to span(W).

    Computed as the singular values of the component of V's frame normal to
    W's span, which is accurate for small angles (no 1 - cos^2 cancellation).
    """
    if V.ambient_dim != W.ambient_dim:
        raise DimensionMismatch("ambient dimensions differ")
    if V.k == 0:
        return np.zeros(0)
    A = V.directions
    if W.k:
        A = A - (A @ W.directions.T) @ W.directions
    return np.clip(np.linalg.svd(A, compute_uv=False), 0.0, 1.0)


def one_sided_tube_constant(V: TimeSlicePlane, W: TimeSlicePlane,
                            r: float = 1.0) -> float:
    """Smallest delta with B_r(base_V) ∩ V inside the delta*r tube of W.

    Closed form: the sine of the largest principal angle, plus (for planes
    with offset bases or different slice times) the parabolic base distance
    scaled by r.  The offset term is an additive convention; it vanishes in
    the common-base case, where the value is exact.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    sines = principal_angle_sines(V, W)
    delta = float(sines.max()) if sines.size else 0.0
    off = W.spatial_distance(V.base.x)
    dtp = math.sqrt(abs(V.base.t - W.base.t))
    return delta + max(off, dtp) / r


def plane_symmetry_check(V: TimeSlicePlane, W: TimeSlicePlane, delta: float,
                         tol: float = 1e-9):
    """Verify that one-sided tube containment at level delta is symmetric.

    Requires equal dimensions and a common base (the hypothesis of the
    statement); violations of the hypothesis raise ``DimensionMismatch``,
    while an actual asymmetry raises ``SymmetryViolation``, which falsifies
    a guaranteed fact and must abort a test campaign.
    """
    if V.k != W.k:
        raise DimensionMismatch("planes must have equal dimension")
    if (np.linalg.norm(V.base.x - W.base.x) > tol
            or abs(V.base.t - W.base.t) > tol):
        raise DimensionMismatch("planes must share a base point")
    d_vw = one_sided_tube_constant(V, W)
    d_wv = one_sided_tube_constant(W, V)
    if d_vw <= delta < 1.0 and d_wv > delta + tol:
        raise SymmetryViolation(
            f"containment asymmetric: {d_vw} vs {d_wv} at delta={delta}")
    return d_vw, d_wv


def plane_hausdorff_distance(V: TimeSlicePlane, W: TimeSlicePlane, r: float,
                             center: SpaceTimePoint | None = None) -> float:
    """Symmetric parabolic Hausdorff distance of ball sections of two planes.

    Computed from principal angles plus base offsets (the one-sided terms in
    both orders); the time gap between the slices enters as its square root.
    Raises if either section misses the ball.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if center is None:
        center = V.base
    for plane in (V, W):
        if plane.distance_p(center) >= r:
            raise ValueError("plane section misses the ball")
    sines = principal_angle_sines(V, W)
    ang = float(sines.max()) if sines.size else 0.0
    sines_wv = principal_angle_sines(W, V)
    ang = max(ang, float(sines_wv.max()) if sines_wv.size else 0.0)
    off = max(W.spatial_distance(V.base.x), V.spatial_distance(W.base.x))
    dtp = math.sqrt(abs(V.base.t - W.base.t))
    return max(ang * r + off, dtp)


def hausdorff_distance_cloud_plane(cloud, V: TimeSlicePlane, r: float,
                                   center: SpaceTimePoint,
                                   per_axis: int = 17) -> float:
    """Two-sided parabolic Hausdorff distance between ball sections of a
    cloud and a plane, by sampling both directions.

    This is the full symmetric distance (both containments), in contrast to
    the one-sided tube defect.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    dx = np.linalg.norm(cloud.xs - center.x, axis=1)
    dtt = np.abs(cloud.ts - center.t)
    inball = (dx < r) & (dtt < r * r)
    if not np.any(inball):
        raise ValueError("cloud section misses the ball")
    # cloud -> plane: exact distance per sample
    d1 = 0.0
    for i in np.flatnonzero(inball):
        d1 = max(d1, V.distance_p(cloud.point(i)))
    # plane -> cloud: sampled section of the plane
    sec = _plane_ball_section(V, center, r, per_axis)
    if sec.shape[0] == 0:
        raise ValueError("plane section misses the ball")
    d2 = 0.0
    xs, ts = cloud.xs[inball], cloud.ts[inball]
    dts = np.sqrt(np.abs(ts - V.base.t))
    for q in sec:
        dxs = np.linalg.norm(xs - q, axis=1)
        d2 = max(d2, float(np.min(np.maximum(dxs, dts))))
    return max(d1, d2)


def _plane_ball_section(V: TimeSlicePlane, center: SpaceTimePoint,
                        r: float, per_axis: int) -> np.ndarray:
    """Spatial samples of PB_r(center) ∩ V."""
    if abs(V.base.t - center.t) >= r * r:
        return np.zeros((0, V.ambient_dim))
    if V.k == 0:
        x = V.base.x
        return x[None, :] if np.linalg.norm(x - center.x) < r else \
            np.zeros((0, V.ambient_dim))
    # nearest point of the affine plane to the ball center
    d = center.x - V.base.x
    tang = V.directions @ d
    foot = V.base.x + V.directions.T @ tang
    gap2 = r * r - np.sum((center.x - foot) ** 2)
    if gap2 <= 0:
        return np.zeros((0, V.ambient_dim))
    rho = math.sqrt(gap2)
    axes = [np.linspace(-rho, rho, per_axis)] * V.k
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=1)
    pts = foot + coords @ V.directions
    keep = np.linalg.norm(pts - center.x, axis=1) < r
    return pts[keep]
