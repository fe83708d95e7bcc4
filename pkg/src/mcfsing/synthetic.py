"""Deterministic generators for benchmark point sets with known structure.

Each generator returns a :class:`PointCloud`; ``ground_truth`` returns the
verdicts the analysis modules are expected to reproduce on it.  Spatial-only
sets are embedded in the single time-slice {t = 0}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spacetime import PointCloud

KINDS = ("figure1", "four_points", "three_sequences", "koch", "tilted_line",
         "parabolic_cone_boundary", "slice_disk")


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")


def generate(spec: GeneratorSpec) -> PointCloud:
    p = dict(spec.params)
    if spec.kind == "figure1":
        return _figure1(int(p.get("count", 40)))
    if spec.kind == "four_points":
        return _four_points(float(p.get("eps", 0.1)))
    if spec.kind == "three_sequences":
        return _three_sequences(float(p.get("eps", 0.1)),
                                int(p.get("count", 8)))
    if spec.kind == "koch":
        return _koch(int(p.get("level", 5)))
    if spec.kind == "tilted_line":
        return _tilted_line(float(p.get("slope", 1.0)),
                            int(p.get("count", 200)),
                            float(p.get("extent", 1.0)))
    if spec.kind == "parabolic_cone_boundary":
        return _cone_boundary(int(p.get("count", 100)),
                              float(p.get("extent", 1.0)))
    if spec.kind == "slice_disk":
        return _slice_disk(int(p.get("per_axis", 25)),
                           int(p.get("dim", 2)))
    raise ValueError(spec.kind)


def _figure1(count: int) -> PointCloud:
    """(1/k, 1/k^4) for k = 1..count plus the limit point 0; a 2-Hoelder
    graph of a non-constant time function over a disconnected set."""
    if count < 2:
        raise ValueError("count must be at least 2")
    k = np.arange(1, count + 1, dtype=float)
    xs = np.concatenate([1.0 / k, [0.0]])[:, None]
    ts = np.concatenate([1.0 / k ** 4, [0.0]])
    return PointCloud(xs, ts)


def _four_points(eps: float) -> PointCloud:
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    xs = np.array([[0.0, 0.0, 0.0],
                   [1.0, 0.0, 0.0],
                   [0.0, eps, 0.0],
                   [1.0, 0.0, eps]])
    return PointCloud(xs, np.zeros(4))


def _three_sequences(eps: float, count: int) -> PointCloud:
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    if count < 2:
        raise ValueError("count must be at least 2")
    rows = [[0.0, 0.0, 0.0]]
    for m in range(1, count + 1):
        rows.append([eps ** m, 0.0, 0.0])
        rows.append([eps ** (2 * m), eps ** (2 * m + 1), 0.0])
        rows.append([eps ** (2 * m + 1), 0.0, eps ** (2 * m + 2)])
    xs = np.array(rows)
    return PointCloud(xs, np.zeros(len(rows)))


def _koch(level: int) -> PointCloud:
    """Koch curve over [0, 1] at the given construction level, in a slice."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    pts = [np.array([0.0, 0.0]), np.array([1.0, 0.0])]
    rot = np.array([[0.5, -np.sqrt(3) / 2], [np.sqrt(3) / 2, 0.5]])
    for _ in range(level):
        nxt = []
        for a, b in zip(pts[:-1], pts[1:]):
            d = (b - a) / 3.0
            peak = a + d + rot @ d
            nxt.extend([a, a + d, peak, a + 2 * d])
        nxt.append(pts[-1])
        pts = nxt
    xs = np.array(pts)
    return PointCloud(xs, np.zeros(len(pts)))


def _tilted_line(slope: float, count: int, extent: float) -> PointCloud:
    x = np.linspace(-extent, extent, count)
    return PointCloud(x[:, None], slope * x)


def _cone_boundary(count: int, extent: float) -> PointCloud:
    """Samples of {|x|^2 = |t|}, the boundary of a parabolic double cone."""
    x = np.linspace(-extent, extent, count)
    xs = np.concatenate([x, x])[:, None]
    ts = np.concatenate([x ** 2, -x ** 2])
    return PointCloud(xs, ts)


def _slice_disk(per_axis: int, dim: int) -> PointCloud:
    g = np.linspace(-1.0, 1.0, per_axis)
    mesh = np.meshgrid(*([g] * dim), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    pts = pts[np.linalg.norm(pts, axis=1) <= 1.0]
    return PointCloud(pts, np.zeros(len(pts)))


def ground_truth(spec: GeneratorSpec) -> dict:
    """Expected analysis verdicts for a generated set.

    Keys are consumed by the verification pipeline (and the test suite);
    values are the asserted outcomes, with the data needed to check them.
    """
    p = dict(spec.params)
    if spec.kind == "four_points":
        eps = float(p.get("eps", 0.1))
        return {
            "strong_2_reifenberg": {
                "holds": True, "delta": eps,
                "planes": ["z=0", "z=0", "y=0", "y=0"]},
            "strong_1_reifenberg_scale_2": {"holds": False, "delta": eps},
            "full_2_reifenberg": {"holds": False},
        }
    if spec.kind == "figure1":
        count = int(p.get("count", 40))
        k = np.arange(1, count + 1, dtype=float)
        xs = np.concatenate([1.0 / k, [0.0]])
        ts = np.concatenate([1.0 / k ** 4, [0.0]])
        holder = _pairwise_ratio_max(xs, ts)
        return {
            "two_holder_graph": {"holds": True, "constant": holder,
                                 "vanishing": True},
        }
    if spec.kind == "tilted_line":
        a = float(p.get("slope", 1.0))
        return {
            "slice_1_reifenberg": {"holds": a == 0.0},
        }
    if spec.kind == "three_sequences":
        return {
            "pointwise_strong_reifenberg": {"holds": True},
            "uniform_scale": {"holds": False},
        }
    if spec.kind == "koch":
        return {"dimension": {"value": np.log(4) / np.log(3), "tol": 0.05}}
    if spec.kind == "slice_disk":
        return {"dimension": {"value": float(p.get("dim", 2)), "tol": 0.2}}
    if spec.kind == "parabolic_cone_boundary":
        # dilation-invariant about its vertex, aperture exactly 1 there; the
        # pairwise aperture blows up along each branch (it IS the boundary)
        return {"vertex_aperture": {"value": 1.0},
                "pairwise_cone_finite": {"holds": False}}
    raise ValueError(f"no ground truth for {spec.kind!r}")


def _pairwise_ratio_max(xs, ts) -> float:
    dx = xs[:, None] - xs[None, :]
    dt = np.abs(ts[:, None] - ts[None, :])
    mask = dx != 0
    return float(np.max(dt[mask] / dx[mask] ** 2))
