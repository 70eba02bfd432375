"""Caustic sets, ray-tube distances and region labels for probe points."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .problems import ProblemSpec
from .superposition import BeamLattice, build_lattice

REGIONS = ("near_caustic", "away_from_caustic", "outside_support")


def ray_lattice(spec: ProblemSpec, samples_per_axis: int | None = None, records: int = 400,
                h: float | None = None) -> BeamLattice:
    """Epsilon-independent ray lattice over K0 used for all geometric queries.

    Only rays and Jacobians matter here, so the beams are integrated at order 1.
    """
    n = spec.dim
    m = samples_per_axis or (256 if n == 1 else 48)
    spacing = float(np.max(spec.data.k0_hi - spec.data.k0_lo)) / m
    h = h or min(1e-3, spec.T / 1000.0)
    steps = int(math.ceil(spec.T / h))
    stride = max(1, steps // records)
    low = dataclasses.replace(spec, order=1, epsilons=[])
    return build_lattice(low, spacing=spacing, h=h, record_stride=stride, keep_all=True)


@dataclass
class CausticCloud:
    points: np.ndarray  # (N, 1 + n): t, y
    z: np.ndarray  # (N, n) launch points
    tau: float
    dt_record: float
    min_det_per_t: dict = field(default_factory=dict)  # mode -> (times, min |det J|)

    @property
    def empty(self) -> bool:
        return len(self.points) == 0

    def to_json(self) -> dict:
        return {
            "tau": self.tau,
            "dt_record": self.dt_record,
            "points": self.points.tolist(),
            "z": self.z.tolist(),
        }


def _records(traj):
    det = np.linalg.det(traj.ray_J)  # (Nr, B)
    return traj.ray_times, traj.ray_x, det


def caustic_cloud(lattice: BeamLattice, tau: float | None = None) -> CausticCloud:
    """Sampled (t, x(t, z)) with |det J(t, z)| <= tau, union over modes.

    The default threshold 10 * dt * max |d det J / dt| matches the sampling
    resolution of the ray records.
    """
    recs = {kind: _records(tr) for kind, tr in lattice.trajectories.items()}
    dts = [float(np.max(np.diff(t))) for t, _, _ in recs.values()]
    dt = max(dts)
    if tau is None:
        rate = max(float(np.max(np.abs(np.diff(d, axis=0)) / np.diff(t)[:, None])) for t, _, d in recs.values())
        tau = 10.0 * dt * rate
    pts, zs, mins = [], [], {}
    for kind, (t, x, det) in recs.items():
        hit = np.abs(det) <= tau
        ti, bi = np.nonzero(hit)
        pts.append(np.column_stack([t[ti], x[ti, bi]]))
        zs.append(lattice.trajectories[kind].z[bi])
        mins[kind] = (t, np.min(np.abs(det), axis=1))
    n = lattice.dim
    P = np.concatenate(pts) if pts else np.zeros((0, 1 + n))
    Z = np.concatenate(zs) if zs else np.zeros((0, n))
    return CausticCloud(P, Z, float(tau), dt, mins)


def rays_at(lattice: BeamLattice, t: float) -> np.ndarray:
    """Ray positions of every lattice beam and mode at time t (linear in time between records)."""
    out = []
    for tr in lattice.trajectories.values():
        rt = tr.ray_times
        i = int(np.clip(np.searchsorted(rt, t) - 1, 0, len(rt) - 2))
        s = (t - rt[i]) / (rt[i + 1] - rt[i])
        s = min(max(s, 0.0), 1.0)
        out.append((1 - s) * tr.ray_x[i] + s * tr.ray_x[i + 1])
    return np.concatenate(out)


def tube_distance(lattice: BeamLattice, t: float, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1, lattice.dim)
    return cKDTree(rays_at(lattice, t)).query(y)[0]


def caustic_distance(cloud: CausticCloud, t, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1, cloud.points.shape[1] - 1)
    q = np.column_stack([np.broadcast_to(np.asarray(t, float), (len(y),)), y])
    if cloud.empty:
        return np.full(len(y), np.inf)
    return cKDTree(cloud.points).query(q)[0]


def classify(t: float, y, cloud: CausticCloud, lattice: BeamLattice, delta: float) -> np.ndarray:
    """Region label of each point y at time t (array of strings)."""
    y = np.asarray(y, dtype=float).reshape(-1, lattice.dim)
    out = np.full(len(y), "away_from_caustic", dtype=object)
    near = caustic_distance(cloud, t, y) < delta
    out[near] = "near_caustic"
    out[tube_distance(lattice, t, y) > delta] = "outside_support"
    return out


def min_delta(lattice: BeamLattice) -> float:
    """Smallest delta for which labels are meaningful: the largest gap between
    neighbouring rays or record times."""
    gaps = []
    for tr in lattice.trajectories.values():
        gaps.append(float(np.max(np.diff(tr.ray_times))))
        x = tr.ray_x
        if lattice.dim == 1:
            xs = np.sort(x[..., 0], axis=1)
            gaps.append(float(np.max(np.diff(xs, axis=1))))
        else:
            d, _ = cKDTree(x[-1]).query(x[-1], k=2)
            gaps.append(float(np.max(d[:, 1])))
    return max(gaps)


def jacobian_bounds(lattice: BeamLattice) -> dict:
    """R1 = max |J|, R2 = max |D_z J| by lattice differences, and min |det J| per record time."""
    R1, R2, per_t = 0.0, 0.0, {}
    n = lattice.dim
    for kind, tr in lattice.trajectories.items():
        J = tr.ray_J
        R1 = max(R1, float(np.max(np.linalg.norm(J, ord=2, axis=(-2, -1)))))
        z = tr.z
        axes = [np.unique(z[:, i]) for i in range(n)]
        shape = tuple(len(a) for a in axes)
        if int(np.prod(shape)) == len(z):
            Jg = J.reshape(J.shape[0], *shape, n, n)
            for i in range(n):
                if shape[i] > 1:
                    h = axes[i][1] - axes[i][0]
                    dJ = np.diff(Jg, axis=1 + i) / h
                    R2 = max(R2, float(np.max(np.abs(dJ))))
        per_t[kind] = {"t": tr.ray_times.tolist(),
                       "min_abs_det": np.min(np.abs(np.linalg.det(J)), axis=1).tolist()}
    return {"R1": R1, "R2": R2, "min_abs_det": per_t}


# --------------------------------------------------------------------------
# probe clouds
# --------------------------------------------------------------------------
@dataclass
class ProbeSet:
    delta: float
    region: dict  # region -> list of (t, points (m, n))

    def count(self, region: str) -> int:
        return sum(len(p) for _, p in self.region.get(region, []))

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "regions": {
                r: [{"t": t, "points": p.tolist()} for t, p in slices]
                for r, slices in self.region.items()
            },
        }


def probe_points(lattice: BeamLattice, cloud: CausticCloud, times, delta: float, per_region: int = 2048,
                 seed: int = 0, margin: float | None = None, oversample: int = 8) -> ProbeSet:
    """Quasi-random probes around the ray tube at each time slice, sorted into regions.

    Each region keeps at most ``per_region`` points in total, split evenly
    across the slices.  The same seed and lattice give identical probes.
    """
    n = lattice.dim
    times = list(times)
    quota = max(1, per_region // len(times))
    margin = 2 * delta + 0.5 if margin is None else margin
    out = {r: [] for r in REGIONS}
    for i, t in enumerate(times):
        x = rays_at(lattice, float(t))
        lo, hi = x.min(axis=0) - margin, x.max(axis=0) + margin
        sampler = qmc.Halton(d=n, scramble=True, seed=seed + i)
        pts = qmc.scale(sampler.random(oversample * quota * len(REGIONS)), lo, hi)
        labels = classify(float(t), pts, cloud, lattice, delta)
        for r in REGIONS:
            sel = pts[labels == r][:quota]
            if len(sel):
                out[r].append((float(t), sel))
    return ProbeSet(delta, {r: v for r, v in out.items() if v})


def export_json(path, cloud: CausticCloud, probes: ProbeSet | None = None, extra: dict | None = None) -> Path:
    payload = {"caustic_cloud": cloud.to_json()}
    if probes is not None:
        payload["probes"] = probes.to_json()
    if extra:
        payload.update(extra)
    path = Path(path)
    path.write_text(json.dumps(payload))
    return path
