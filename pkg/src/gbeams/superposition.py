"""Beam lattices, cutoffs and superposition sums."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .dynamics import BeamTrajectory, Hamiltonian, initial_states, integrate_beam
from .jets import Jet
from .problems import ProblemSpec

DEFAULT_GAMMA = 4.0
# beams are dropped where their Gaussian envelope bound is below exp(-TAIL)
TAIL = 80.0
# modes whose initial amplitudes are this small relative to the largest are dropped
MODE_FLOOR = 1e-13


class LatticeError(ValueError):
    """The launch lattice is too coarse for the requested epsilon."""


# --------------------------------------------------------------------------
# cutoff
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class CutoffSpec:
    """rho_eta(r): 1 for r <= eta, 0 for r >= 2 eta, smooth in between; eta = inf means rho = 1."""

    eta: float = math.inf

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("cutoff radius must be positive")

    def __call__(self, r):
        return _kernels.cutoff_np(r, self.eta)

    @property
    def support_radius(self) -> float:
        return 2.0 * self.eta


# --------------------------------------------------------------------------
# grids and fields
# --------------------------------------------------------------------------
@dataclass
class UniformGrid:
    """Uniform periodic box: ``shape[i]`` samples from ``origin[i]`` with step ``spacing[i]``."""

    origin: np.ndarray
    spacing: np.ndarray
    shape: tuple

    def __post_init__(self):
        self.origin = np.atleast_1d(np.asarray(self.origin, dtype=float))
        self.spacing = np.atleast_1d(np.asarray(self.spacing, dtype=float))
        self.shape = tuple(int(s) for s in np.atleast_1d(self.shape))

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def extent(self) -> np.ndarray:
        return self.spacing * np.asarray(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list[np.ndarray]:
        return [o + h * np.arange(m) for o, h, m in zip(self.origin, self.spacing, self.shape)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.dim)

    @classmethod
    def covering(cls, lo, hi, samples) -> UniformGrid:
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        samples = np.broadcast_to(np.atleast_1d(samples), lo.shape)
        return cls(lo, (hi - lo) / samples, tuple(samples))


@dataclass
class WaveField:
    """Complex samples of a field on a uniform periodic grid at time t."""

    grid: UniformGrid
    values: np.ndarray
    t: float
    eps: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128).reshape(self.grid.shape)

    def metadata(self) -> dict:
        return {
            "n": self.grid.dim,
            "samples": list(self.grid.shape),
            "origin": self.grid.origin.tolist(),
            "spacing": self.grid.spacing.tolist(),
            "t": self.t,
            "epsilon": self.eps,
            "layout": "row-major complex128 (re, im pairs)",
            **self.meta,
        }

    def save(self, path) -> Path:
        """Write the binary layout and a ``.json`` sidecar next to it.

        Binary: int64 n, int64 samples[n], float64 origin[n], float64 spacing[n],
        float64 t, float64 eps, then the values as row-major complex128.
        """
        path = Path(path)
        n = self.grid.dim
        with open(path, "wb") as fh:
            np.array([n], "<i8").tofile(fh)
            np.asarray(self.grid.shape, "<i8").tofile(fh)
            np.asarray(self.grid.origin, "<f8").tofile(fh)
            np.asarray(self.grid.spacing, "<f8").tofile(fh)
            np.array([self.t, self.eps], "<f8").tofile(fh)
            np.ascontiguousarray(self.values, "<c16").tofile(fh)
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(self.metadata(), indent=2))
        return path

    @classmethod
    def load(cls, path) -> WaveField:
        with open(path, "rb") as fh:
            n = int(np.fromfile(fh, "<i8", 1)[0])
            shape = tuple(int(v) for v in np.fromfile(fh, "<i8", n))
            origin = np.fromfile(fh, "<f8", n)
            spacing = np.fromfile(fh, "<f8", n)
            t, eps = np.fromfile(fh, "<f8", 2)
            values = np.fromfile(fh, "<c16", int(np.prod(shape))).reshape(shape)
        return cls(UniformGrid(origin, spacing, shape), values, float(t), float(eps))


# --------------------------------------------------------------------------
# lattices
# --------------------------------------------------------------------------
def lattice_spacing(eps: float, gamma: float = DEFAULT_GAMMA) -> float:
    return math.sqrt(eps) / gamma


def lattice_points(lo, hi, spacing: float):
    """Uniform lattice covering the box [lo, hi] exactly, with trapezoidal weights.

    Returns (points, weights, actual spacing per axis); the weights include the
    cell volume.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    axes, wts, steps = [], [], []
    for a, b in zip(lo, hi):
        m = max(1, int(math.ceil((b - a) / spacing - 1e-9)))
        ax = np.linspace(a, b, m + 1)
        h = (b - a) / m
        w = np.full(m + 1, h)
        w[0] = w[-1] = 0.5 * h
        axes.append(ax)
        wts.append(w)
        steps.append(h)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
    w = np.ones(())
    for wi in wts:
        w = np.multiply.outer(w, wi)
    return pts, w.reshape(-1), np.asarray(steps)


@dataclass
class BeamLattice:
    """Launch lattice over K0 and the integrated beams of every mode.

    Only launch points with a nonzero initial amplitude are integrated unless
    the lattice was built with ``keep_all``; amplitudes obey a linear
    homogeneous ODE, so the dropped beams are zero for all time.
    """

    spec: ProblemSpec
    points: np.ndarray
    weights: np.ndarray
    spacing: np.ndarray
    gamma: float
    active: np.ndarray
    trajectories: dict

    @property
    def order(self) -> int:
        return self.spec.order

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def modes(self) -> tuple:
        return tuple(self.trajectories)

    @property
    def max_spacing(self) -> float:
        return float(np.max(self.spacing))

    def times(self) -> np.ndarray:
        return next(iter(self.trajectories.values())).times

    def check_resolution(self, eps: float) -> None:
        need = lattice_spacing(eps, self.gamma)
        if self.max_spacing > need * (1 + 1e-9):
            raise LatticeError(
                f"lattice spacing {self.max_spacing:.4g} too coarse for eps={eps:.4g}; need dz <= {need:.4g}"
            )


def default_times(T: float, extra=()) -> np.ndarray:
    return np.unique(np.round(np.concatenate([np.linspace(0.0, T, 65), np.asarray(extra, float)]), 14))


def build_lattice(spec: ProblemSpec, eps: float | None = None, spacing: float | None = None,
                  gamma: float = DEFAULT_GAMMA, times=None, h: float | None = None,
                  record_stride: int = 1, keep_all: bool = False) -> BeamLattice:
    """Launch beams from a lattice over K0 and integrate them to the final time."""
    if spacing is None:
        if eps is None:
            raise ValueError("need eps or spacing")
        spacing = lattice_spacing(eps, gamma)
    data = spec.data
    pts, w, steps = lattice_points(data.k0_lo, data.k0_hi, spacing)
    states = initial_states(pts, spec.order, data, spec.equation, spec.medium)
    if keep_all:
        active = np.arange(len(pts))
    else:
        nz = np.zeros(len(pts), bool)
        for st in states.values():
            for a in st.amps:
                nz |= np.any(a.coeffs != 0, axis=-1)
        active = np.flatnonzero(nz)
        # the amplitude hierarchy is linear and homogeneous: a mode that starts
        # at round-off level (one-way wave data) stays there and is dropped
        scale = {kind: max(float(np.max(np.abs(a.coeffs), initial=0.0)) for a in st.amps)
                 for kind, st in states.items()}
        top = max(scale.values())
        if top > 0:
            states = {kind: st for kind, st in states.items() if scale[kind] > MODE_FLOOR * top}
    times = default_times(spec.T) if times is None else default_times(spec.T, times)
    trajs = {}
    for kind, st in states.items():
        H = Hamiltonian(kind, spec.medium)
        trajs[kind] = integrate_beam(st.take(active), H, spec.T, h=h, t_eval=times,
                                     record_stride=record_stride)
    return BeamLattice(spec, pts, w, steps, gamma, active, trajs)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------
def amplitude_sum(amps, eps: float) -> Jet:
    """A = sum_j eps^j a_j as a single jet of the leading degree."""
    out = amps[0].copy()
    for j, a in enumerate(amps[1:], start=1):
        out = out + (eps**j) * a.with_degree(out.degree)
    return out


def _moving_frame_dt(jet: Jet, djet: Jet, xdot) -> Jet:
    """d/dt of f(t, y - x(t)) expressed as a jet in y - x(t)."""
    if jet.degree == 0:
        return djet
    g = jet.grad(jet.degree)
    return djet - sum(xdot[..., i] * g[i] for i in range(jet.dim))


def beam_coefficients(traj: BeamTrajectory, t: float, eps: float, derivative: bool = False):
    """Ray positions, phase jet and amplitude jet of every beam in ``traj`` at time t.

    With ``derivative=True`` the amplitude jet is replaced by the prefactor of
    d/dt of the beam, d/dt [A e^{i Phi/eps}] = (A_t + i A Phi_t / eps) e^{i Phi/eps},
    with both time derivatives taken in the moving frame.
    """
    st = traj.state(t)
    A = amplitude_sum(st.amps, eps)
    if not derivative:
        return st.x.real, st.phase, A
    ds = traj.derivative(t)
    xdot = ds.x.real
    dA = _moving_frame_dt(A, amplitude_sum(ds.amps, eps), xdot)
    dPhi = _moving_frame_dt(st.phase, ds.phase, xdot)
    deg = A.degree + st.phase.degree
    pref = dA.with_degree(deg) + (1j / eps) * (A.with_degree(deg) * dPhi.with_degree(deg))
    return st.x.real, st.phase, pref


def skip_radius(phase: Jet, eps: float, cutoff: CutoffSpec, tail: float = TAIL) -> np.ndarray:
    """Per-beam radius beyond which contributions are dropped.

    Finite cutoffs give 2 eta exactly.  Without a cutoff the Gaussian bound
    Im Phi >= lambda_min(Im M) |y|^2 / 2 is used; it is exact for quadratic phases.
    """
    B = phase.batch_shape[0]
    if math.isfinite(cutoff.eta):
        return np.full(B, cutoff.support_radius)
    if not math.isfinite(tail):
        return np.full(B, np.inf)
    lam = np.linalg.eigvalsh(phase.hessian0().imag).min(axis=-1)
    with np.errstate(divide="ignore"):
        r = np.sqrt(2.0 * eps * tail / np.maximum(lam, 0.0))
    return np.where(lam > 0, r, np.inf)


def _superpose_beams(x, phase: Jet, amp: Jet, weights, points, eps, cutoff, tail):
    rskip = skip_radius(phase, eps, cutoff, tail)
    return _kernels.superpose(points, x, weights, phase.coeffs, phase.exponents, amp.coeffs,
                              amp.exponents, eps, cutoff.eta, rskip)


def evaluate_beam(traj: BeamTrajectory, t: float, y, eps: float, cutoff: CutoffSpec = CutoffSpec(),
                  index: int = 0) -> np.ndarray:
    """Values A(t, y - x) exp(i Phi(t, y - x) / eps) rho(y - x) of one beam at points y."""
    y = np.asarray(y, dtype=float)
    n = traj.layout.dim
    pts = y.reshape(-1, n)
    x, Phi, A = beam_coefficients(traj, t, eps)
    sel = slice(index, index + 1)
    vals = _superpose_beams(x[sel], Phi.take(sel), A.take(sel), np.ones(1), pts, eps, cutoff,
                            math.inf)
    return vals.reshape(y.shape[:-1]) if y.ndim > 1 else vals


def evaluate_superposition(lattice: BeamLattice, t: float, target, eps: float,
                           cutoff: CutoffSpec = CutoffSpec(), derivative: bool = False,
                           tail: float = TAIL, modes=None):
    """u_k(t, .) = (2 pi eps)^(-n/2) sum_z w_z v(t, ., z), summed over modes.

    ``target`` is a :class:`UniformGrid` (returns a :class:`WaveField`) or an
    array of points of shape (P, n) (returns values).  With ``derivative``
    the time derivative of the superposition is returned instead.
    """
    lattice.check_resolution(eps)
    n = lattice.dim
    if isinstance(target, UniformGrid):
        pts = target.points()
    else:
        pts = np.asarray(target, dtype=float).reshape(-1, n)
    pref = (2 * math.pi * eps) ** (-n / 2)
    w = lattice.weights[lattice.active] * pref
    total = np.zeros(len(pts), np.complex128)
    for kind in (modes or lattice.modes):
        x, Phi, A = beam_coefficients(lattice.trajectories[kind], t, eps, derivative)
        total += _superpose_beams(x, Phi, A, w, pts, eps, cutoff, tail)
    if isinstance(target, UniformGrid):
        return WaveField(target, total.reshape(target.shape), t, eps)
    return total


# --------------------------------------------------------------------------
# admissibility
# --------------------------------------------------------------------------
@dataclass
class Admissibility:
    admissible: bool
    eta: float
    w4: float
    witness: dict | None = None
    samples: dict = field(default_factory=dict)


def _directions(n: int, n_angular: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    th = 2 * np.pi * np.arange(n_angular) / n_angular
    return np.stack([np.cos(th), np.sin(th)], axis=-1)


def check_admissibility(lattice: BeamLattice, cutoff: CutoffSpec, T: float | None = None,
                        n_radial: int = 8, n_angular: int = 16, n_times: int = 64) -> Admissibility:
    """Largest w4 with Im Phi(t, y, z) >= w4 |y|^2 on sampled t, z and |y| <= 2 eta.

    With eta = inf only quadratic imaginary parts can be certified: the check
    reduces to the smallest eigenvalue of Im M, provided every higher-order
    phase coefficient is real on the samples.
    """
    T = lattice.spec.T if T is None else T
    times = np.linspace(0.0, T, n_times)
    n = lattice.dim
    sampling = {"n_radial": n_radial, "n_angular": n_angular if n > 1 else 2, "n_times": n_times}
    w4, witness = math.inf, None
    for kind, traj in lattice.trajectories.items():
        z = traj.z
        for t in times:
            st = traj.state(float(t))
            Phi = st.phase
            if not math.isfinite(cutoff.eta):
                lam = np.linalg.eigvalsh(Phi.hessian0().imag).min(axis=-1) / 2.0
                i = int(np.argmin(lam))
                if lam[i] < w4:
                    w4 = float(lam[i])
                    witness = {"t": float(t), "z": z[i].tolist(), "mode": kind, "y": None}
                high = np.sum(Phi.exponents, axis=1) >= 3
                if np.any(np.abs(Phi.coeffs[:, high].imag) > 1e-12):
                    return Admissibility(False, cutoff.eta, -math.inf,
                                         {"t": float(t), "mode": kind,
                                          "reason": "non-quadratic Im Phi on an unbounded ball"},
                                         sampling)
                continue
            radii = cutoff.support_radius * np.arange(1, n_radial + 1) / n_radial
            ys = (radii[:, None, None] * _directions(n, n_angular)[None]).reshape(-1, n)
            mono = np.prod(ys[:, None, :] ** Phi.exponents[None], axis=2)  # (S, m)
            im = (Phi.coeffs @ mono.T).imag - Phi.coeffs[:, :1].imag  # (B, S)
            ratio = im / np.sum(ys * ys, axis=1)
            b, s = np.unravel_index(np.argmin(ratio), ratio.shape)
            if ratio[b, s] < w4:
                w4 = float(ratio[b, s])
                witness = {"t": float(t), "z": z[b].tolist(), "mode": kind, "y": ys[s].tolist()}
    return Admissibility(w4 > 0, cutoff.eta, w4, None if w4 > 0 else witness, sampling)


def select_eta(lattice: BeamLattice, T: float | None = None, max_halvings: int = 12) -> Admissibility:
    """eta = inf for k = 1; otherwise halve from diam(K0)/2 until admissible."""
    if lattice.order == 1:
        return check_admissibility(lattice, CutoffSpec(math.inf), T)
    eta = lattice.spec.data.diameter / 2.0
    last = None
    for _ in range(max_halvings + 1):
        last = check_admissibility(lattice, CutoffSpec(eta), T)
        if last.admissible:
            return last
        eta /= 2.0
    return last
