"""Mean curvature flows: analytic families, rotationally symmetric solvers,
singularity detection, cylindrical structure fitting, and stratification.

Rotationally symmetric solver.  A surface of revolution r = u(x) in R^3
evolves by ``u_t = u_xx / (1 + u_x^2) - nrot / u`` (``nrot = n - 1``).  The
solver works with the squared radius ``v = u^2``, whose equation is regular
where the surface meets the axis, tracks the axis caps sub-grid, detects
interior neck pinches (``min v`` decays linearly, matching the cylinder
radius law), splits the domain at a pinch and continues each piece.
Snapshots are emitted on a schedule that follows the decay of ``v``, so the
backward time ladder into each singularity is geometric, which is what
density extrapolation needs.

Torus solver.  A closed profile curve in the (x, r) half-plane moves by the
mean curvature of the revolved surface: curvature vector of the curve plus
the rotational term, both orientation-free.  A thin torus collapses to a
circle in a single time-slice.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import UnresolvedRun
from .gaussian import (
    CylinderDescriptor,
    PlaneDescriptor,
    RevolutionProfile,
    SphereDescriptor,
    WeightedHypersurface,
    classify_density,
    entropy,
    gaussian_density,
)
from .planes import TimeSlicePlane
from .spacetime import PointCloud, SpaceTimePoint


@dataclass
class FlowSnapshot:
    time: float
    surface: WeightedHypersurface
    spacing: float = 0.0
    dt: float = 0.0


@dataclass
class RawEvent:
    """Solver-level record of a detected singular time."""
    kind: str                    # pinch | extinction | collapse_circle
    x: np.ndarray                # representative spatial location
    t: float
    branch: int = 0
    circle: np.ndarray | None = None   # sampled circle for collapses


class Flow:
    """Time-ordered snapshots plus event records.

    ``generator``, when set, produces exact snapshots at arbitrary times
    (analytic flows); otherwise lookups snap to the stored grid.
    """

    def __init__(self, snapshots, ambient_dim, lambda0=None,
                 symmetry="rotational", events=None, generator=None,
                 meta=None):
        self.snapshots = sorted(snapshots, key=lambda s: s.time)
        self.ambient_dim = ambient_dim
        self.lambda0 = lambda0
        self.symmetry = symmetry
        self.events = events or []
        self.generator = generator
        self.meta = meta or {}
        times = [s.time for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")

    def final_time(self) -> float:
        return self.snapshots[-1].time if self.snapshots else -math.inf

    def time_span(self) -> float:
        if len(self.snapshots) < 2:
            return 0.0
        return self.snapshots[-1].time - self.snapshots[0].time

    def snapshot_at(self, time: float, tol: float | None = None
                    ) -> FlowSnapshot:
        if self.generator is not None:
            return self.generator(time)
        if not self.snapshots:
            raise ValueError("flow has no snapshots")
        times = np.array([s.time for s in self.snapshots])
        i = int(np.argmin(np.abs(times - time)))
        if tol is not None and abs(times[i] - time) > tol:
            raise ValueError(f"no snapshot within {tol} of t={time}")
        return self.snapshots[i]

    def density_tau_grid(self, t: float, count: int = 10,
                         span: float | None = None) -> np.ndarray:
        """Backward scales for density extrapolation, drawn from stored
        snapshot times so each tau hits a snapshot exactly."""
        if self.generator is not None:
            lo = max(1e-9, 1e-6 * max(self.time_span(), 1.0))
            hi = span or max(0.25 * self.time_span(), 4 * lo)
            return np.geomspace(lo, hi, count)
        taus = np.array([t - s.time for s in self.snapshots
                         if s.time < t - 1e-15])
        taus = np.sort(taus)
        if len(taus) == 0:
            raise ValueError("no snapshots before the requested time")
        if span is not None:
            taus = taus[taus <= span] if np.any(taus <= span) else taus[:1]
        if len(taus) <= count:
            return taus
        targets = np.geomspace(taus[0], taus[-1], count)
        picks = sorted({int(np.argmin(np.abs(taus - tg)))
                        for tg in targets})
        return taus[picks]

    def resolution_floor(self, t: float) -> float:
        if self.generator is not None:
            return 1e-9
        taus = [t - s.time for s in self.snapshots if s.time < t - 1e-15]
        return min(taus) if taus else 1e-9

    def to_archive(self, path: str):
        os.makedirs(os.path.join(path, "snapshots"), exist_ok=True)
        manifest = {
            "ambient_dim": self.ambient_dim,
            "lambda0": self.lambda0,
            "symmetry": self.symmetry,
            "meta": self.meta,
            "times": [s.time for s in self.snapshots],
            "version": 1,
        }
        _atomic_json(os.path.join(path, "manifest.json"), manifest)
        events = [{
            "kind": ev.kind, "x": ev.x.tolist(), "t": ev.t,
            "branch": ev.branch,
            "circle": None if ev.circle is None else ev.circle.tolist(),
        } for ev in self.events]
        _atomic_json(os.path.join(path, "events.json"), events)
        for i, snap in enumerate(self.snapshots):
            _atomic_json(os.path.join(path, "snapshots", f"{i:05d}.json"),
                         _snapshot_to_json(snap))

    @classmethod
    def from_archive(cls, path: str) -> "Flow":
        with open(os.path.join(path, "manifest.json")) as fh:
            manifest = json.load(fh)
        with open(os.path.join(path, "events.json")) as fh:
            events_json = json.load(fh)
        events = [RawEvent(kind=e["kind"], x=np.array(e["x"]), t=e["t"],
                           branch=e.get("branch", 0),
                           circle=None if e.get("circle") is None
                           else np.array(e["circle"]))
                  for e in events_json]
        snapdir = os.path.join(path, "snapshots")
        snaps = []
        for name in sorted(os.listdir(snapdir)):
            with open(os.path.join(snapdir, name)) as fh:
                snaps.append(_snapshot_from_json(json.load(fh)))
        return cls(snaps, manifest["ambient_dim"],
                   lambda0=manifest.get("lambda0"),
                   symmetry=manifest.get("symmetry", "rotational"),
                   events=events, meta=manifest.get("meta", {}))


def _atomic_json(path: str, obj):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, sort_keys=True)
    os.replace(tmp, path)


def _snapshot_to_json(snap: FlowSnapshot) -> dict:
    surf = snap.surface
    out = {"time": snap.time, "spacing": snap.spacing, "dt": snap.dt}
    if surf.revolution is not None:
        rev = surf.revolution
        out["kind"] = "revolution"
        out["axis_x"] = rev.axis_x.tolist()
        out["radius"] = rev.radius.tolist()
        out["weight"] = rev.weight.tolist()
    else:
        out["kind"] = "points"
        out["points"] = surf.points.tolist()
        out["weights"] = surf.weights.tolist()
        out["ambient_dim"] = surf.ambient_dim
    return out


def _snapshot_from_json(obj: dict) -> FlowSnapshot:
    if obj["kind"] == "revolution":
        surf = _revolution_surface(np.array(obj["axis_x"]),
                                   np.array(obj["radius"]),
                                   np.array(obj["weight"]))
    else:
        surf = WeightedHypersurface(np.array(obj["points"]),
                                    np.array(obj["weights"]),
                                    obj["ambient_dim"])
    return FlowSnapshot(time=obj["time"], surface=surf,
                        spacing=obj.get("spacing", 0.0),
                        dt=obj.get("dt", 0.0))


def _revolution_surface(axis_x, radius, weight) -> WeightedHypersurface:
    pts = np.stack([axis_x, radius, np.zeros_like(axis_x)], axis=1)
    rev = RevolutionProfile(axis_x=axis_x, radius=radius, weight=weight)
    return WeightedHypersurface(pts, 2 * math.pi * radius * weight, 3,
                                revolution=rev)


# ---------------------------------------------------------------------------
# analytic flows

def analytic_flow(kind: str, ambient_dim: int = 3, r0: float = 2.0,
                  center=None, axis_dims: int = 1, times=None) -> Flow:
    """Exact self-similar flows: shrinking sphere / cylinder, static plane.

    sphere: radius sqrt(r0^2 - 2 n t); cylinder R^j x S^{n-j} with radius
    sqrt(r0^2 - 2 (n-j) t); plane: identical snapshots.
    """
    n = ambient_dim - 1
    center = np.zeros(ambient_dim) if center is None else \
        np.asarray(center, dtype=float)
    if kind == "sphere":
        rate = 2.0 * n
    elif kind == "cylinder":
        if not 1 <= axis_dims <= n - 1:
            raise ValueError("cylinder axis dimension out of range")
        rate = 2.0 * (n - axis_dims)
    elif kind == "plane":
        rate = 0.0
    else:
        raise ValueError(f"unknown analytic flow kind {kind!r}")
    if r0 <= 0:
        raise ValueError("initial radius must be positive")
    extinction = r0 * r0 / rate if rate else math.inf

    def generator(t: float) -> FlowSnapshot:
        if kind == "plane":
            normal = np.zeros(ambient_dim)
            normal[-1] = 1.0
            surf = WeightedHypersurface.plane(center, normal, ambient_dim)
            return FlowSnapshot(time=t, surface=surf)
        if t >= extinction:
            raise ValueError(f"time {t} is past extinction {extinction}")
        radius = math.sqrt(r0 * r0 - rate * t)
        if kind == "sphere":
            surf = WeightedHypersurface.sphere(center, radius, ambient_dim,
                                               per_axis=32)
        elif ambient_dim == 3 and axis_dims == 1:
            surf = WeightedHypersurface.cylinder(center, radius, 3,
                                                 nodes=96, circle_nodes=24)
        else:
            axis = np.eye(ambient_dim)[:axis_dims]
            pts = center[None, :] + radius * np.eye(ambient_dim)[-1:]
            surf = WeightedHypersurface(
                pts, np.array([1.0]), ambient_dim,
                descriptor=CylinderDescriptor(center, axis, radius))
        return FlowSnapshot(time=t, surface=surf)

    if times is None:
        horizon = extinction if math.isfinite(extinction) else 1.0
        times = np.linspace(0.0, horizon, 33)[:-1] if rate else \
            np.linspace(0.0, 1.0, 9)
    snaps = [generator(float(t)) for t in times]
    events = []
    if kind == "sphere":
        events.append(RawEvent(kind="extinction", x=center.copy(),
                               t=extinction))
    elif kind == "cylinder":
        # the singular set is the axis at the extinction time
        span = np.linspace(-1.0, 1.0, 9)
        axis = np.eye(ambient_dim)[0]
        circle = center[None, :] + span[:, None] * axis[None, :]
        events.append(RawEvent(kind="extinction_line", x=center.copy(),
                               t=extinction, circle=circle))
    lam = {"sphere": _sphere_entropy(n), "cylinder": _sphere_entropy(
        n - axis_dims), "plane": 1.0}[kind]
    return Flow(snaps, ambient_dim, lambda0=lam + 1e-9, symmetry="analytic",
                events=events, generator=generator,
                meta={"kind": kind, "r0": r0,
                      "extinction": extinction, "axis_dims": axis_dims})


def _sphere_entropy(m: int) -> float:
    from .gaussian import sphere_density
    return sphere_density(m)


# ---------------------------------------------------------------------------
# rotationally symmetric graph solver

@dataclass
class SolverControls:
    nodes: int = 401
    cfl: float = 0.25
    pinch_rel: float = 1e-3       # pinch when min u < pinch_rel * initial
    out_count: int = 120          # uniform snapshot budget
    emit_decay: float = 0.7       # geometric snapshot ladder factor
    t_max: float | None = None
    max_steps_block: int = 50_000_000


@dataclass(eq=False)
class _Branch:
    v: np.ndarray
    iL: int
    iR: int
    xL: float
    xR: float
    alive: bool = True
    emit_lo: float = 0.0
    emit_hi: float = 0.0
    minv_trail: list = field(default_factory=list)
    maxv_trail: list = field(default_factory=list)


def rotsym_mcf_run(u0, a: float, b: float, bc: str = "caps",
                   controls: SolverControls | None = None,
                   ambient_dim: int = 3) -> Flow:
    """Evolve the revolved graph r = u0(x) on [a, b] through its
    singularities.

    ``bc="caps"`` expects u0 > 0 on the open interval and 0 at the ends
    (a closed surface); ``bc="periodic"`` wraps the domain.  Pinches split
    the domain and both sides continue until extinction.  Returns the flow
    with raw pinch/extinction events attached.
    """
    controls = controls or SolverControls()
    n = ambient_dim - 1
    nrot = float(n - 1)
    M = controls.nodes
    h = (b - a) / (M - 1)
    x = a + h * np.arange(M)
    u = np.asarray([u0(xx) for xx in x], dtype=float) \
        if callable(u0) else np.asarray(u0, dtype=float)
    if u.shape != (M,):
        raise ValueError("initial profile does not match the grid")
    periodic = bc == "periodic"
    if bc not in ("caps", "periodic"):
        raise ValueError("bc must be 'caps' or 'periodic'")
    v = np.maximum(u, 0.0) ** 2
    if periodic:
        if np.any(u <= 0):
            raise ValueError("periodic profiles must be positive")
        iL, iR, xL, xR = 0, M - 1, -math.inf, math.inf
    else:
        inside = v > 0
        if not np.any(inside[1:-1]):
            raise ValueError("initial profile is nowhere positive")
        iL = int(np.argmax(inside))
        iR = M - 1 - int(np.argmax(inside[::-1]))
        if iL == 0 or iR == M - 1:
            raise ValueError("profile must vanish inside the grid "
                             "(caps need margin)")
        xL = x[iL - 1] + h * (0.0 - v[iL - 1]) / (v[iL] - v[iL - 1]) \
            if v[iL] > v[iL - 1] else x[iL] - 0.5 * h
        xR = x[iR] + h * v[iR] / (v[iR] - v[iR + 1]) \
            if v[iR] > v[iR + 1] else x[iR] + 0.5 * h
    u_min0 = float(np.sqrt(v[v > 0].min())) if not periodic else \
        float(np.min(u))
    vmin_stop = (controls.pinch_rel * u_min0) ** 2
    v_max0 = float(np.max(v))
    t_max = controls.t_max if controls.t_max is not None else \
        1.2 * v_max0 / max(2.0 * (n - 1), 2.0) + 0.1
    out_dt = t_max / controls.out_count

    branches = [_Branch(v=v.copy(), iL=iL, iR=iR, xL=xL, xR=xR,
                        emit_lo=controls.emit_decay * float(np.min(
                            v[iL:iR + 1])) if not periodic else
                        controls.emit_decay * float(np.min(v)),
                        emit_hi=0.0)]
    t = 0.0
    events: list[RawEvent] = []
    snaps: list[FlowSnapshot] = []

    def emit(time):
        rev_parts = [_branch_profile(br, x, h) for br in branches
                     if br.alive]
        rev_parts = [p for p in rev_parts if p is not None]
        if not rev_parts:
            return
        ax = np.concatenate([p[0] for p in rev_parts])
        rd = np.concatenate([p[1] for p in rev_parts])
        wt = np.concatenate([p[2] for p in rev_parts])
        snaps.append(FlowSnapshot(time=time,
                                  surface=_revolution_surface(ax, rd, wt),
                                  spacing=h, dt=0.0))

    emit(0.0)
    next_uniform = out_dt
    while any(br.alive for br in branches) and t < t_max:
        alive = [br for br in branches if br.alive]
        driver = min(alive, key=lambda br: _branch_key(br, periodic))
        t_stop = min(next_uniform, t_max)
        res = kernels.rotsym_step_block(
            driver.v, h, a, nrot, t, t_stop, driver.iL, driver.iR,
            driver.xL, driver.xR, periodic, vmin_stop, controls.cfl,
            controls.max_steps_block, driver.emit_lo, driver.emit_hi)
        t_new, driver.iL, driver.iR, driver.xL, driver.xR, status, \
            _steps, pidx = res
        for br in alive:
            if br is driver:
                continue
            r2 = kernels.rotsym_step_block(
                br.v, h, a, nrot, t, t_new, br.iL, br.iR, br.xL, br.xR,
                periodic, vmin_stop, controls.cfl,
                controls.max_steps_block, 0.0, 0.0)
            br_t, br.iL, br.iR, br.xL, br.xR, br_status, _s, _p = r2
            if br_status == kernels.STATUS_PINCH:
                _handle_pinch(br, branches, events, x, h, br_t, _p)
            elif br_status == kernels.STATUS_EXTINCT:
                _handle_extinction(br, events, x, h, br_t)
        t = t_new
        _record_trails(branches, periodic, t)
        if status == kernels.STATUS_PINCH:
            if periodic:
                # uniform collapse of the periodic cylinder: the singular
                # set is the whole axis at one time
                driver.alive = False
                t_star = _extrapolate_root(driver.minv_trail, t)
                span = np.linspace(a, b, 9)
                line = np.stack([span, np.zeros(9), np.zeros(9)], axis=1)
                events.append(RawEvent(kind="extinction_line",
                                       x=np.array([0.5 * (a + b), 0, 0]),
                                       t=t_star, circle=line))
            else:
                _handle_pinch(driver, branches, events, x, h, t, pidx)
                emit(t)
        elif status == kernels.STATUS_EXTINCT:
            _handle_extinction(driver, events, x, h, t)
            if any(br.alive for br in branches):
                emit(t)
        elif status == kernels.STATUS_EMIT:
            emit(t)
            _update_emit_thresholds(driver, periodic, controls.emit_decay,
                                    vmin_stop)
        elif status == kernels.STATUS_TIME:
            emit(t)
            if t >= next_uniform - 1e-15:
                next_uniform = t + out_dt
        else:
            raise UnresolvedRun("step budget exhausted without resolving "
                                "the flow")
    lam = None
    if snaps:
        lam = entropy(snaps[0].surface, n_tau=12, n_starts=2).value + 1e-6
    flow = Flow(_dedupe(snaps), ambient_dim, lambda0=lam, events=events,
                meta={"solver": "rotsym_v", "nodes": M, "h": h,
                      "bc": bc, "a": a, "b": b,
                      "pinch_rel": controls.pinch_rel})
    return flow


def _branch_key(br: _Branch, periodic: bool) -> float:
    if periodic:
        return float(np.min(br.v))
    window = br.v[br.iL:br.iR + 1]
    return float(np.min(window)) if window.size else math.inf


def _branch_profile(br: _Branch, x, h):
    sel = slice(br.iL, br.iR + 1)
    v = br.v[sel]
    if v.size < 2:
        return None
    keep = v > 0
    if not np.any(keep):
        return None
    vx = np.gradient(v, h)
    weight = h * np.sqrt(np.maximum(v + 0.25 * vx * vx, 0.0))
    r = np.sqrt(np.maximum(v, 0.0))
    return x[sel][keep], r[keep], weight[keep]


def _record_trails(branches, periodic, t):
    for br in branches:
        if not br.alive:
            continue
        if periodic:
            br.minv_trail.append((t, float(np.min(br.v))))
            continue
        if br.iR - 2 >= br.iL + 2:
            br.minv_trail.append(
                (t, float(np.min(br.v[br.iL + 2:br.iR - 1]))))
        window = br.v[br.iL:br.iR + 1]
        if window.size:
            br.maxv_trail.append((t, float(np.max(window))))
        for trail in (br.minv_trail, br.maxv_trail):
            if len(trail) > 200:
                del trail[:100]


def _extrapolate_root(trail, fallback_t, rate_floor=1e-12) -> float:
    """Zero-crossing time of a decaying trail, quadratic fit with linear
    fallback; matches the linear decay of the squared radius."""
    pts = trail[-8:]
    if len(pts) < 2:
        return fallback_t
    ts = np.array([p[0] for p in pts])
    vs = np.array([p[1] for p in pts])
    if len(pts) >= 4:
        coef = np.polyfit(ts, vs, 2)
        roots = np.roots(coef)
        real = [float(r.real) for r in roots
                if abs(r.imag) < 1e-10 and r.real >= ts[-1] - 1e-12]
        if real:
            return min(real)
    rate = (vs[-2] - vs[-1]) / max(ts[-1] - ts[-2], rate_floor)
    if rate <= rate_floor:
        return fallback_t
    return float(ts[-1] + vs[-1] / rate)


def _handle_pinch(br: _Branch, branches, events, x, h, t, pidx):
    v = br.v
    # refine the pinch location by the vertex of a parabola through the
    # minimum and its neighbors
    if br.iL < pidx < br.iR:
        va, vb, vc = v[pidx - 1], v[pidx], v[pidx + 1]
        denom = va - 2 * vb + vc
        shift = 0.5 * (va - vc) / denom if abs(denom) > 1e-300 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
    else:
        shift = 0.0
    x_star = x[pidx] + shift * h
    t_star = _extrapolate_root(br.minv_trail, t)
    loc = np.zeros(3)
    loc[0] = x_star
    events.append(RawEvent(kind="pinch", x=loc, t=t_star,
                           branch=branches.index(br)))
    # split: the two sides continue as independent capped branches
    left = _Branch(v=br.v.copy(), iL=br.iL, iR=pidx - 1, xL=br.xL,
                   xR=x_star - 1e-9 * h)
    right = _Branch(v=br.v.copy(), iL=pidx + 1, iR=br.iR,
                    xL=x_star + 1e-9 * h, xR=br.xR)
    br.alive = False
    for piece in (left, right):
        if piece.iR - piece.iL + 1 >= 3:
            window = piece.v[piece.iL:piece.iR + 1]
            piece.emit_hi = 0.7 * float(np.max(window))
            piece.emit_lo = 0.0
            branches.append(piece)
        else:
            events.append(RawEvent(
                kind="extinction",
                x=np.array([x[(piece.iL + piece.iR) // 2], 0.0, 0.0]),
                t=t, branch=len(branches)))


def _handle_extinction(br: _Branch, events, x, h, t):
    br.alive = False
    window = br.v[br.iL:br.iR + 1]
    if window.size and np.any(window > 0):
        w = np.maximum(window, 0.0)
        xbar = float(np.sum(x[br.iL:br.iR + 1] * w) / np.sum(w))
    else:
        xbar = 0.5 * (br.xL + br.xR)
    t_star = _extrapolate_root(br.maxv_trail, t)
    events.append(RawEvent(kind="extinction",
                           x=np.array([xbar, 0.0, 0.0]), t=t_star))


def _update_emit_thresholds(br: _Branch, periodic, decay, vmin_stop):
    if periodic:
        cur = float(np.min(br.v))
        br.emit_lo = max(decay * cur, 1.01 * vmin_stop)
        return
    if br.emit_lo > 0.0 and br.iR - 2 >= br.iL + 2:
        cur = float(np.min(br.v[br.iL + 2:br.iR - 1]))
        br.emit_lo = max(decay * cur, 1.01 * vmin_stop)
    if br.emit_hi > 0.0:
        window = br.v[br.iL:br.iR + 1]
        if window.size:
            br.emit_hi = max(decay * float(np.max(window)),
                             1.01 * vmin_stop)


def _dedupe(snaps):
    out = []
    for s in sorted(snaps, key=lambda s: s.time):
        if not out or s.time > out[-1].time + 1e-15:
            out.append(s)
    return out


# ---------------------------------------------------------------------------
# torus (closed profile curve) solver

@dataclass
class TorusControls:
    nodes: int = 192
    cfl: float = 0.2
    collapse_rel: float = 2e-2    # collapse when diameter < rel * initial
    out_count: int = 80
    emit_decay: float = 0.75
    t_max: float | None = None
    min_r_guard: float = 1e-3     # stop if the curve approaches the axis


def torus_profile(center_r: float = 1.0, tube_r: float = 0.25,
                  nodes: int = 192) -> np.ndarray:
    """Round-tube torus profile: a circle in the (x, r) half-plane."""
    th = np.linspace(0.0, 2 * math.pi, nodes, endpoint=False)
    return np.stack([tube_r * np.cos(th), center_r + tube_r * np.sin(th)],
                    axis=1)


def _curve_velocity(P: np.ndarray) -> np.ndarray:
    """Mean curvature velocity of the revolved closed curve.

    Curvature vector from the circumscribed circle of each node triple,
    plus the rotational principal curvature (0, -1/r) projected on the
    curve normal; both terms are orientation-free.
    """
    A = np.roll(P, 1, axis=0)
    C = np.roll(P, -1, axis=0)
    ab = P - A
    cb = C - P
    ac = C - A
    cross = ab[:, 0] * cb[:, 1] - ab[:, 1] * cb[:, 0]
    la, lb, lc = (np.linalg.norm(ab, axis=1), np.linalg.norm(cb, axis=1),
                  np.linalg.norm(ac, axis=1))
    denom = la * lb * lc
    kappa = 2.0 * cross / np.where(denom > 0, denom, 1.0)
    tang = ac / np.where(lc[:, None] > 0, lc[:, None], 1.0)
    normal = np.stack([-tang[:, 1], tang[:, 0]], axis=1)
    kvec = kappa[:, None] * normal
    rot = np.zeros_like(P)
    rot[:, 1] = -1.0 / P[:, 1]
    rot_n = np.sum(rot * normal, axis=1)[:, None] * normal
    return kvec + rot_n


def _resample_closed(P: np.ndarray, nodes: int) -> np.ndarray:
    seg = np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    targets = np.linspace(0.0, total, nodes, endpoint=False)
    closed = np.vstack([P, P[:1]])
    xs = np.interp(targets, s, closed[:, 0])
    rs = np.interp(targets, s, closed[:, 1])
    return np.stack([xs, rs], axis=1)


def _segments_intersect(P):
    """Coarse self-intersection scan over non-adjacent segments."""
    nodes = len(P)
    Q = np.roll(P, -1, axis=0)
    for i in range(0, nodes, 4):
        d1 = Q[i] - P[i]
        for j in range(i + 2, nodes - (1 if i == 0 else 0), 4):
            d2 = Q[j] - P[j]
            r = P[j] - P[i]
            den = d1[0] * d2[1] - d1[1] * d2[0]
            if abs(den) < 1e-14:
                continue
            s = (r[0] * d2[1] - r[1] * d2[0]) / den
            u = (r[0] * d1[1] - r[1] * d1[0]) / den
            if 0 < s < 1 and 0 < u < 1:
                return True
    return False


def rotsym_torus_run(profile: np.ndarray,
                     controls: TorusControls | None = None) -> Flow:
    """Evolve a closed profile curve (revolved about the x-axis in R^3).

    A thin torus collapses to a circle {r = r*, x = x*} at a single time;
    the collapse is recorded with the sampled singular circle.  Profiles
    that reach the axis or self-intersect stop with ``UnresolvedRun``.
    """
    controls = controls or TorusControls()
    P = _resample_closed(np.asarray(profile, dtype=float), controls.nodes)
    if np.any(P[:, 1] <= 0):
        raise ValueError("profile must stay in the r > 0 half-plane")
    if _segments_intersect(P):
        raise UnresolvedRun("initial profile is self-intersecting")
    centroid = P.mean(axis=0)
    diam0 = float(np.max(np.linalg.norm(P - centroid, axis=1)))
    stop_diam = controls.collapse_rel * diam0
    t = 0.0
    t_max = controls.t_max if controls.t_max is not None else \
        4.0 * diam0 * diam0
    snaps = []
    trail = []
    emit_thresh = 0.8 * diam0
    next_uniform = 0.0
    out_dt = t_max / controls.out_count
    steps = 0
    events = []
    while t < t_max:
        seg = np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1)
        ds = float(np.min(seg))
        dt = controls.cfl * ds * ds
        V = _curve_velocity(P)
        P = P + dt * V
        t += dt
        steps += 1
        if steps % 4 == 0:
            P = _resample_closed(P, controls.nodes)
        if np.any(P[:, 1] <= controls.min_r_guard):
            raise UnresolvedRun(
                "profile reached the axis; not a circle collapse")
        centroid = P.mean(axis=0)
        diam = float(np.max(np.linalg.norm(P - centroid, axis=1)))
        trail.append((t, diam * diam))
        if len(trail) > 400:
            del trail[:200]
        if t >= next_uniform or diam <= emit_thresh:
            snaps.append(FlowSnapshot(time=t, surface=_torus_surface(P),
                                      spacing=ds, dt=dt))
            if t >= next_uniform:
                next_uniform = t + out_dt
            if diam <= emit_thresh:
                emit_thresh = controls.emit_decay * diam
        if steps % 50 == 0 and _segments_intersect(P):
            raise UnresolvedRun("profile self-intersected")
        if diam <= stop_diam:
            t_star = _extrapolate_root(trail, t)
            x_star, r_star = centroid
            th = np.linspace(0, 2 * math.pi, 64, endpoint=False)
            circle = np.stack([np.full(64, x_star), r_star * np.cos(th),
                               r_star * np.sin(th)], axis=1)
            events.append(RawEvent(kind="collapse_circle",
                                   x=np.array([x_star, r_star, 0.0]),
                                   t=t_star, circle=circle))
            break
    else:
        raise UnresolvedRun("torus did not collapse within the horizon")
    lam = entropy(snaps[0].surface, n_tau=10, n_starts=2).value + 1e-6 \
        if snaps else None
    return Flow(_dedupe(snaps), 3, lambda0=lam, events=events,
                meta={"solver": "torus_curve", "nodes": controls.nodes})


def _torus_surface(P: np.ndarray) -> WeightedHypersurface:
    seg_next = np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1)
    seg_prev = np.roll(seg_next, 1)
    w = 0.5 * (seg_next + seg_prev)
    return _revolution_surface(P[:, 0].copy(), P[:, 1].copy(), w)


# ---------------------------------------------------------------------------
# singularity detection, cylindrical fits, stratification

@dataclass
class SingularEvent:
    location: SpaceTimePoint
    density: object = None            # DensityEstimate
    j: int | None = None
    axis: TimeSlicePlane | None = None
    eta_profile: tuple = (np.zeros(0), np.zeros(0))
    kind: str = ""
    classified: bool = False
    density_gap: float = math.inf


def detect_singularities(flow: Flow, residual_tol: float = 0.1,
                         circle_samples: int = 16) -> list[SingularEvent]:
    """Densities and ladder classification for the flow's event records.

    Collapse circles contribute one event per sampled point (axis = circle
    tangent); events whose density residual is too large stay unclassified.
    """
    n = flow.ambient_dim - 1
    out = []
    for rec in flow.events:
        if rec.kind == "collapse_circle" and rec.circle is not None:
            step = max(len(rec.circle) // circle_samples, 1)
            x_c, r_c = rec.x[0], rec.x[1]
            for p in rec.circle[::step]:
                ev = _classify_event(flow, p, rec.t, n, residual_tol,
                                     kind=rec.kind)
                tang = np.array([0.0, -p[2], p[1]])
                tang /= np.linalg.norm(tang)
                ev.axis = TimeSlicePlane.from_spanning(
                    ev.location, tang[None, :])
                if ev.classified and ev.j is None:
                    ev.j = 1
                out.append(ev)
        elif rec.kind == "extinction_line" and rec.circle is not None:
            for p in rec.circle:
                ev = _classify_event(flow, p, rec.t, n, residual_tol,
                                     kind=rec.kind)
                axis = np.zeros((1, flow.ambient_dim))
                axis[0, 0] = 1.0
                ev.axis = TimeSlicePlane(ev.location, axis)
                out.append(ev)
        else:
            ev = _classify_event(flow, rec.x, rec.t, n, residual_tol,
                                 kind=rec.kind)
            if rec.kind == "pinch" and ev.classified:
                axis = np.zeros((1, flow.ambient_dim))
                axis[0, 0] = 1.0
                ev.axis = TimeSlicePlane(ev.location, axis)
            elif rec.kind == "extinction":
                ev.axis = TimeSlicePlane(
                    ev.location, np.zeros((0, flow.ambient_dim)))
            out.append(ev)
    return out


def _classify_event(flow, x, t, n, residual_tol, kind="") -> SingularEvent:
    loc = SpaceTimePoint(np.asarray(x, dtype=float), float(t))
    try:
        taus = flow.density_tau_grid(t)
        dens = gaussian_density(flow, loc.x, t, taus=taus,
                                residual_tol=residual_tol)
    except ValueError:
        return SingularEvent(location=loc, kind=kind, classified=False)
    k, gap = classify_density(dens.value, n)
    ev = SingularEvent(location=loc, density=dens, kind=kind,
                       classified=dens.ok, density_gap=gap)
    if dens.ok:
        ev.j = k
    return ev


@dataclass
class CylindricalFit:
    j: int
    eta: float
    axis_angle: float       # radians between fitted axis and e_x
    window: float           # half-width of the certified fitting window
    model_radius: float


def cylindrical_fit(flow: Flow, event: SingularEvent, s: float,
                    j: int = 1) -> CylindricalFit:
    """Fit the rescaled pre-singularity slice to the model cylinder.

    Rescales the snapshot at t0 - s about the event by 1/sqrt(s) and finds
    the smallest eta whose window |xi| <= 1/eta keeps the radial graph
    offset (relative to the model radius sqrt(2(n-j))) and its slope below
    eta.  The fit is always against the same model family; the fitted axis
    direction (weighted principal axis of the rescaled neck) is reported
    separately as an angle.
    """
    t0 = event.location.t
    snap = flow.snapshot_at(t0 - s)
    if snap.surface.revolution is None:
        raise ValueError("cylindrical fit needs a rotationally symmetric "
                         "snapshot")
    n = flow.ambient_dim - 1
    rho = math.sqrt(2.0 * (n - j))
    rev = snap.surface.revolution
    scale = math.sqrt(t0 - snap.time) if t0 > snap.time else math.sqrt(s)
    xi = (rev.axis_x - event.location.x[0]) / scale
    ut = rev.radius / scale
    order = np.argsort(xi)
    xi, ut = xi[order], ut[order]
    offset = (ut - rho) / rho
    slope = np.gradient(ut, xi) if len(xi) > 2 else np.zeros_like(ut)
    eta = math.inf
    best_w = 0.0
    for w in np.geomspace(max(np.abs(xi).min() + 1e-9, 0.3),
                          max(np.abs(xi).max(), 0.4), 40):
        mask = np.abs(xi) <= w
        if np.count_nonzero(mask) < 3:
            continue
        norm = max(float(np.max(np.abs(offset[mask]))),
                   float(np.max(np.abs(slope[mask]))))
        cand = max(norm, 1.0 / w)
        if cand < eta:
            eta = cand
            best_w = w
    if not math.isfinite(eta) or eta >= 1.0:
        return CylindricalFit(j=j, eta=math.inf, axis_angle=math.nan,
                              window=0.0, model_radius=rho)
    mask = np.abs(xi) <= best_w
    th = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    ring = np.stack([np.cos(th), np.sin(th)], axis=1)
    pts = np.concatenate([
        np.stack([np.repeat(xi[mask], len(th)),
                  (ut[mask][:, None] * ring[None, :, 0]).ravel(),
                  (ut[mask][:, None] * ring[None, :, 1]).ravel()], axis=1)])
    cov = (pts - pts.mean(axis=0)).T @ (pts - pts.mean(axis=0))
    _, vecs = np.linalg.eigh(cov)
    axis = vecs[:, -1]
    angle = math.acos(min(abs(float(axis[0])), 1.0))
    return CylindricalFit(j=j, eta=float(eta), axis_angle=angle,
                          window=float(best_w), model_radius=rho)


def cylindrical_profile(flow: Flow, event: SingularEvent, s_grid,
                        j: int = 1):
    """eta(s) and axis drift across backward scales; also attaches the
    profile to the event."""
    fits = [cylindrical_fit(flow, event, float(s), j=j) for s in s_grid]
    etas = np.array([f.eta for f in fits])
    angles = np.array([f.axis_angle for f in fits])
    event.eta_profile = (np.asarray(s_grid, dtype=float), etas)
    drift = np.abs(np.diff(angles)) if len(angles) > 1 else np.zeros(0)
    return fits, etas, angles, drift


@dataclass
class Stratification:
    strata: dict                  # k -> sorted event indices (nested)
    isolation: dict               # j=0 event index -> free ball radius
    limit_closed: bool
    excluded: list

    def stratum(self, k: int):
        return self.strata.get(k, [])


def stratify(events: list[SingularEvent], n: int) -> Stratification:
    """Nest classified events by cylinder index and verify the finite-sample
    compactness proxies.

    S_0 isolation: every spherical event has a parabolic ball free of other
    events.  Top-stratum closure: events parabolically close to a top-
    stratum event are themselves top-stratum.
    """
    classified = [i for i, e in enumerate(events) if e.classified]
    excluded = [i for i, e in enumerate(events) if not e.classified]
    strata = {k: sorted(i for i in classified if events[i].j <= k)
              for k in range(n)}
    pd = _event_pdist(events)
    isolation = {}
    for i in classified:
        if events[i].j == 0:
            others = [pd[i][l] for l in classified if l != i]
            isolation[i] = min(others) if others else math.inf
    top = [i for i in classified if events[i].j == n - 1]
    limit_closed = True
    if top and len(classified) > 1:
        gaps = sorted(pd[i][l] for i in classified for l in classified
                      if i < l)
        near = gaps[0] * 3.0 if gaps else 0.0
        for i in top:
            for l in classified:
                if l != i and pd[i][l] <= near and events[l].j != n - 1:
                    limit_closed = False
    return Stratification(strata=strata, isolation=isolation,
                          limit_closed=limit_closed, excluded=excluded)


def _event_pdist(events):
    m = len(events)
    pd = np.zeros((m, m))
    for i in range(m):
        for l in range(i + 1, m):
            d = max(np.linalg.norm(events[i].location.x
                                   - events[l].location.x),
                    math.sqrt(abs(events[i].location.t
                                  - events[l].location.t)))
            pd[i, l] = pd[l, i] = d
    return pd


def events_to_cloud(events: list[SingularEvent],
                    labels=None) -> PointCloud:
    xs = np.array([e.location.x for e in events])
    ts = np.array([e.location.t for e in events])
    return PointCloud(xs, ts, labels)


def singular_set_report(flow: Flow, s_grid=None) -> dict:
    """Bundle of structural analyses of the detected singular set.

    Detects and classifies events, exports the event cloud, then runs the
    half-Reifenberg profile with axis planes (per stratum of uniform j),
    the 2-Hoelder fit, the cone profile, and the time-slice tests.
    """
    from . import cone as cone_mod
    from . import reifenberg as reif
    from .spacetime import sampling_floor

    events = detect_singularities(flow)
    classified = [e for e in events if e.classified]
    report = {"n_events": len(events),
              "n_classified": len(classified),
              "strata": {}}
    if not classified:
        report["verdict"] = "no classified singularities"
        return report
    cloud = events_to_cloud(classified)
    labels = _component_labels(cloud)
    report["components"] = int(labels.max()) + 1
    n = flow.ambient_dim - 1
    strat = stratify(classified, n)
    report["isolation"] = {str(k): v for k, v in strat.isolation.items()}
    report["limit_closed"] = strat.limit_closed
    for jv in sorted({e.j for e in classified}):
        members = [e for e in classified if e.j == jv]
        entry = {"count": len(members)}
        if jv >= 1 and len(members) >= 3:
            sub = events_to_cloud(members)
            planes = [e.axis for e in members]
            A = reif.PlaneAssignment(sub, planes)
            floor = sampling_floor(sub)
            diam = max(np.ptp(sub.xs), math.sqrt(np.ptp(sub.ts)), 1e-9)
            hi = max(diam, floor * 4)
            scales = np.geomspace(hi, max(floor, hi / 64), 5)
            prof = reif.strong_reifenberg_profile(sub, A, scales)
            entry["reifenberg"] = {"scales": prof.scales.tolist(),
                                   "deltas": prof.deltas.tolist(),
                                   "vanishing": prof.vanishing}
        report["strata"][str(jv)] = entry
    fit = reif.two_holder_fit(cloud)
    report["two_holder"] = {"constant": fit.constant,
                            "vanishing": fit.vanishing,
                            "multivalued": fit.multivalued}
    try:
        gamma = cone_mod.cone_constant(cloud, max(
            np.ptp(cloud.xs), math.sqrt(max(np.ptp(cloud.ts), 1e-30)),
            1e-9) * 2)
        report["cone_constant"] = gamma
    except ValueError:
        report["cone_constant"] = None
    spread_tol = _time_tolerance(flow)
    if not fit.multivalued and (fit.vanishing or fit.constant == 0.0):
        ts_rep = reif.time_slice_test(cloud, labels=labels, fit=fit,
                                      spread_tol=spread_tol)
        report["time_slice"] = {
            "verdicts": {str(k): bool(v)
                         for k, v in ts_rep.verdicts.items()},
            "spreads": {str(k): v
                        for k, v in ts_rep.component_spreads.items()},
            "h1_estimate": ts_rep.h1_estimate,
        }
    else:
        report["time_slice"] = {
            "verdicts": {
                str(c): bool(np.ptp(cloud.ts[labels == c]) <= spread_tol)
                for c in np.unique(labels)},
            "spreads": {str(c): float(np.ptp(cloud.ts[labels == c]))
                        for c in np.unique(labels)},
            "note": "2-Hoelder hypotheses not verified; raw spreads only",
        }
    return report


def _time_tolerance(flow: Flow) -> float:
    times = [s.time for s in flow.snapshots]
    gaps = [b - a for a, b in zip(times, times[1:])]
    return 4.0 * min(gaps) if gaps else 1e-6


def _component_labels(cloud: PointCloud) -> np.ndarray:
    """Single-linkage clustering at 3x the median nearest-neighbor gap."""
    m = len(cloud)
    if m == 1:
        return np.zeros(1, dtype=int)
    d = np.zeros((m, m))
    for i in range(m):
        dx = np.linalg.norm(cloud.xs - cloud.xs[i], axis=1)
        dt = np.sqrt(np.abs(cloud.ts - cloud.ts[i]))
        d[i] = np.maximum(dx, dt)
    nn = np.array([np.min(np.delete(d[i], i)) for i in range(m)])
    thresh = 3.0 * float(np.median(nn)) + 1e-12
    labels = -np.ones(m, dtype=int)
    comp = 0
    for i in range(m):
        if labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = comp
        while stack:
            a = stack.pop()
            for b in np.flatnonzero((d[a] <= thresh) & (labels < 0)):
                labels[b] = comp
                stack.append(int(b))
        comp += 1
    return labels
