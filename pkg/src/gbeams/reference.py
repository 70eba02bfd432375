"""Reference solutions: Fourier propagators, split-step and leapfrog solvers, closed-form beams."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels
from .dynamics import RayState
from .jets import Jet
from .problems import ProblemSpec
from .superposition import UniformGrid, WaveField


class ResolutionError(ValueError):
    """Grid or time step too coarse for the requested epsilon."""


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------
class SpectralGrid(UniformGrid):
    """Periodic grid with power-of-two samples per axis and FFT wavenumbers."""

    def wavenumbers(self) -> list[np.ndarray]:
        return [2 * np.pi * np.fft.fftfreq(m, d=h) for m, h in zip(self.shape, self.spacing)]

    def xi2(self) -> np.ndarray:
        ks = np.meshgrid(*self.wavenumbers(), indexing="ij")
        return sum(k * k for k in ks)

    def refined(self, factor: int = 2) -> SpectralGrid:
        return SpectralGrid(self.origin, self.spacing / factor, tuple(m * factor for m in self.shape))

    def required_samples(self, eps: float, ppw: float = 16.0, pmax: float = 1.0) -> np.ndarray:
        """Samples per axis needed for ``ppw`` points per wavelength 2 pi eps and
        for Nyquist of the largest local wavenumber ``pmax / eps`` with margin."""
        ext = self.extent
        a = ppw * ext / (2 * np.pi * eps)
        b = 1.25 * ext * (pmax + 8 * math.sqrt(eps)) / (np.pi * eps)
        return np.maximum(a, b)

    def check_resolution(self, eps: float, ppw: float = 16.0, pmax: float = 1.0) -> None:
        need = self.required_samples(eps, ppw, pmax)
        if np.any(np.asarray(self.shape) < need - 1e-9):
            req = [int(2 ** math.ceil(math.log2(v))) for v in need]
            raise ResolutionError(f"grid {self.shape} under-resolves eps={eps:.4g}; need {req} samples")


def _pow2(v: float) -> int:
    return int(2 ** max(4, math.ceil(math.log2(max(v, 1.0)))))


def make_grid(lo, hi, eps: float, ppw: float = 16.0, pmax: float = 1.0, pad: float = 0.0) -> SpectralGrid:
    """Smallest power-of-two periodic grid on [lo - pad, hi + pad] meeting the resolution rule."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float)) - pad
    hi = np.atleast_1d(np.asarray(hi, dtype=float)) + pad
    probe = SpectralGrid(lo, (hi - lo), (1,) * lo.size)
    need = probe.required_samples(eps, ppw, pmax)
    shape = tuple(_pow2(v) for v in need)
    return SpectralGrid(lo, (hi - lo) / np.asarray(shape), shape)


# --------------------------------------------------------------------------
# reference solutions
# --------------------------------------------------------------------------
@dataclass
class ReferenceSolution:
    grid: SpectralGrid
    eps: float
    times: np.ndarray
    values: np.ndarray  # (Nt, *shape)
    dt_values: np.ndarray | None = None  # time derivative, wave equation only
    scheme: str = ""
    dt: float = 0.0
    self_error: dict = field(default_factory=dict)

    def _index(self, t: float) -> int:
        hit = np.flatnonzero(np.abs(self.times - t) <= 1e-12 * max(1.0, abs(t)))
        if not hit.size:
            raise KeyError(f"no reference slice at t={t}")
        return int(hit[0])

    def field(self, t: float, derivative: bool = False) -> WaveField:
        i = self._index(t)
        src = self.dt_values if derivative else self.values
        if src is None:
            raise ValueError("time derivative not stored")
        return WaveField(self.grid, src[i], float(self.times[i]), self.eps,
                         {"scheme": self.scheme, "dt": self.dt})

    def interpolate(self, t: float, points, derivative: bool = False) -> np.ndarray:
        """Spectral interpolation of the slice at t to arbitrary points."""
        return spectral_interpolate(self.field(t, derivative), points)

    @property
    def floor(self) -> float:
        return float(self.self_error.get("max", 0.0))


def spectral_interpolate(f: WaveField, points) -> np.ndarray:
    """Trigonometric interpolation in 1D; in 2D a 4x Fourier upsample followed by
    quintic spline interpolation."""
    g = f.grid
    pts = np.asarray(points, dtype=float).reshape(-1, g.dim)
    if g.dim == 1:
        N = g.shape[0]
        coef = np.fft.fft(f.values) / N
        xi = 2 * np.pi * np.fft.fftfreq(N, d=g.spacing[0])
        # use the symmetric Nyquist term so real fields interpolate to real values
        if N % 2 == 0:
            coef = np.concatenate([coef, [0.5 * coef[N // 2]]])
            coef[N // 2] *= 0.5
            xi = np.concatenate([xi, [-xi[N // 2]]])
        y = (pts[:, 0] - g.origin[0]) % (N * g.spacing[0])
        return _kernels.trig_interp(coef, xi, 0.0, y)
    up = 4
    F = np.fft.fftshift(np.fft.fftn(f.values))
    pad = [((up - 1) * m // 2, (up - 1) * m - (up - 1) * m // 2) for m in g.shape]
    Fu = np.fft.ifftshift(np.pad(F, pad))
    fine = np.fft.ifftn(Fu) * up**g.dim
    coords = ((pts - g.origin) / (g.spacing / up)).T
    re = ndimage.map_coordinates(fine.real, coords, order=5, mode="grid-wrap")
    im = ndimage.map_coordinates(fine.imag, coords, order=5, mode="grid-wrap")
    return re + 1j * im


def _initial_fields(spec: ProblemSpec, grid: SpectralGrid, eps: float):
    pts = grid.points()
    u0 = spec.data.u0(pts, eps).reshape(grid.shape)
    u1 = spec.data.ut0(pts, eps).reshape(grid.shape) if spec.equation == "wave" else None
    return u0, u1


def _err(a, b, cell):
    d = np.abs(a - b)
    return {"max": float(d.max()), "l2": float(np.sqrt(np.sum(d**2) * cell))}


def solve_schrodinger(spec: ProblemSpec, grid: SpectralGrid, eps: float, times, dt: float | None = None,
                      estimate_error: bool = True, check: bool = True) -> ReferenceSolution:
    """-i eps u_t - eps^2/2 Lap u + V u = 0 on a periodic grid.

    V = 0 is propagated exactly in Fourier space.  Otherwise Strang splitting
    with half potential steps around a full kinetic step; the default step is
    min(1e-3, eps * dy).
    """
    if spec.equation != "schrodinger":
        raise ValueError("not a Schrödinger problem")
    if check:
        grid.check_resolution(eps)
    times = np.asarray(sorted(set(float(t) for t in times)))
    u0, _ = _initial_fields(spec, grid, eps)
    xi2 = grid.xi2()
    u0h = np.fft.fftn(u0)
    free = spec.medium.name == "free"
    if free:
        vals = np.array([np.fft.ifftn(u0h * np.exp(-0.5j * eps * xi2 * t)) for t in times])
        sol = ReferenceSolution(grid, eps, times, vals, scheme="fourier-exact", dt=0.0)
    else:
        dt = min(1e-3, eps * float(grid.spacing.min())) if dt is None else dt
        vals = _strang(spec, grid, eps, u0, times, dt)
        sol = ReferenceSolution(grid, eps, times, vals, scheme="strang-split-step", dt=dt)
    if estimate_error:
        sol.self_error = _self_error(sol, lambda g, d: solve_schrodinger(
            spec, g, eps, times, d, estimate_error=False, check=False), not free)
    return sol


def _strang(spec, grid, eps, u0, times, dt):
    V = spec.medium.values(grid.points()).reshape(grid.shape)
    xi2 = grid.xi2()
    out, u, t = [], u0.astype(complex), 0.0
    for t_next in times:
        span = t_next - t
        m = int(math.ceil(span / dt - 1e-9)) if span > 0 else 0
        if m:
            h = span / m
            half = np.exp(-0.5j * V * h / eps)
            kin = np.exp(-0.5j * eps * xi2 * h)
            for _ in range(m):
                u = half * np.fft.ifftn(kin * np.fft.fftn(half * u))
        t = t_next
        out.append(u.copy())
    return np.array(out)


def _self_error(sol: ReferenceSolution, rerun, halve_dt: bool) -> dict:
    """Compare against a run on a grid with twice the samples (and half the step)."""
    fine = rerun(sol.grid.refined(2), sol.dt / 2 if halve_dt else sol.dt)
    sl = tuple(slice(None, None, 2) for _ in sol.grid.shape)
    worst = {"max": 0.0, "l2": 0.0}
    for i in range(len(sol.times)):
        e = _err(sol.values[i], fine.values[i][sl], sol.grid.cell_volume)
        worst = {k: max(worst[k], e[k]) for k in worst}
    if halve_dt:
        # Richardson: the coarse-step error is about 4/3 of the difference
        worst = {k: v * 4.0 / 3.0 for k, v in worst.items()}
    return worst


def solve_wave(spec: ProblemSpec, grid: SpectralGrid, eps: float, times, dt: float | None = None,
               estimate_error: bool = True, check: bool = True) -> ReferenceSolution:
    """u_tt - c^2 Lap u = 0, u(0) = B0 e^{i phi0/eps}, u_t(0) = B1 e^{i phi0/eps} / eps.

    Constant speed: exact Fourier propagator (the d'Alembert solution on the
    periodic box).  Variable speed: leapfrog with a pseudo-spectral Laplacian
    and the fourth-order modified-equation correction, started by a Taylor step.
    """
    if spec.equation != "wave":
        raise ValueError("not a wave problem")
    if check:
        grid.check_resolution(eps)
    times = np.asarray(sorted(set(float(t) for t in times)))
    u0, u1 = _initial_fields(spec, grid, eps)
    if spec.medium.is_constant:
        c = float(spec.medium.params["c0"])
        vals, dvals = fourier_wave(grid, u0, u1, c, times)
        sol = ReferenceSolution(grid, eps, times, vals, dvals, scheme="fourier-exact", dt=0.0)
        halve = False
    else:
        c = spec.medium.values(grid.points()).reshape(grid.shape)
        cmax = float(c.max())
        if dt is None:
            dt = min(0.5 * float(grid.spacing.min()), 0.05 * eps) / cmax
        if dt > 0.5 * float(grid.spacing.min()) / cmax:
            raise ResolutionError(f"dt={dt:.3g} violates the CFL bound {0.5 * grid.spacing.min() / cmax:.3g}")
        vals, dvals = _leapfrog(grid, u0, u1, c, times, dt)
        sol = ReferenceSolution(grid, eps, times, vals, dvals, scheme="leapfrog-4", dt=dt)
        halve = True
    if estimate_error:
        sol.self_error = _self_error(sol, lambda g, d: solve_wave(
            spec, g, eps, times, d if d else None, estimate_error=False, check=False), halve)
    return sol


def fourier_wave(grid: SpectralGrid, u0, u1, c: float, times):
    """Exact constant-speed propagation: u^(t) = cos(c|xi|t) u0^ + sin(c|xi|t)/(c|xi|) u1^."""
    k = np.sqrt(grid.xi2()) * c
    a, b = np.fft.fftn(u0), np.fft.fftn(u1)
    vals, dvals = [], []
    for t in times:
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(k > 0, np.sin(k * t) / np.where(k > 0, k, 1.0), t)
        cs = np.cos(k * t)
        vals.append(np.fft.ifftn(cs * a + s * b))
        dvals.append(np.fft.ifftn(-k * np.sin(k * t) * a + cs * b))
    return np.array(vals), np.array(dvals)


def _leapfrog(grid, u0, u1, c, times, dt):
    xi2 = grid.xi2()
    c2 = c * c

    def L(u):
        return c2 * np.fft.ifftn(-xi2 * np.fft.fftn(u))

    out, dout = [], []
    t = 0.0
    prev = None
    u = u0.astype(complex)
    ut = u1.astype(complex)
    for t_next in times:
        span = t_next - t
        m = int(math.ceil(span / dt - 1e-9)) if span > 0 else 0
        if m:
            h = span / m
            # restart each interval from (u, u_t) with a Taylor step
            Lu, Lut = L(u), L(ut)
            prev = u
            u = u + h * ut + 0.5 * h * h * Lu + h**3 / 6 * Lut + h**4 / 24 * L(Lu)
            for _ in range(m - 1):
                Lu = L(u)
                nxt = 2 * u - prev + h * h * Lu + h**4 / 12 * L(Lu)
                prev, u = u, nxt
            # central estimate of u_t at the interval end from one extra step
            Lu = L(u)
            nxt = 2 * u - prev + h * h * Lu + h**4 / 12 * L(Lu)
            ut = (nxt - prev) / (2 * h) - h * h / 6 * L((nxt - prev) / (2 * h))
        t = t_next
        out.append(u.copy())
        dout.append(ut.copy())
    return np.array(out), np.array(dout)


# --------------------------------------------------------------------------
# closed-form beams
# --------------------------------------------------------------------------
def _continued_sqrt(f, t: float, steps: int = 512):
    """sqrt(f(t)) continued along s in [0, t] from the principal root at s = 0."""
    root = cmath.sqrt(f(0.0))
    for s in np.linspace(0.0, t, steps + 1)[1:]:
        r = cmath.sqrt(f(s))
        root = r if abs(r - root) <= abs(r + root) else -r
    return root


def closed_form_beam(problem: str, z, t: float, a: float = 1.0, b0: complex = 1.0, b1: complex = 0.0,
                     sign: int = 1, c: float = 1.0) -> RayState:
    """Analytic first-order beam data in one dimension.

    ``free_schrodinger``: V = 0, phi0 = -a z^2 / 2.  ``harmonic_schrodinger``:
    V = y^2 / 2, phi0 = 0.  ``const_speed_wave_1d``: speed c, phi0 = z, mode
    ``sign``.  Returns a degree-2 phase jet and a degree-0 amplitude.
    """
    z = float(np.ravel(z)[0])
    if problem == "free_schrodinger":
        p = -a * z
        x = z + t * p
        M0 = -a + 1j
        M = M0 / (1 + t * M0)
        phi0 = -a * z * z / 2 + t * p * p / 2
        amp = b0 / _continued_sqrt(lambda s: 1 + s * M0, t)
        J, P = 1 - a * t, -a
    elif problem == "harmonic_schrodinger":
        x, p = z * math.cos(t), -z * math.sin(t)
        M = 1j
        phi0 = -z * z * math.sin(2 * t) / 4
        amp = b0 * cmath.exp(-0.5j * t)
        J, P = math.cos(t), -math.sin(t)
    elif problem == "const_speed_wave_1d":
        x, p = z + sign * c * t, 1.0
        M = 1j
        phi0 = z
        amp = 0.5 * (b0 - sign * b1 / (1j * c))
        J, P = 1.0, 0.0
    else:
        raise ValueError(f"no closed form for {problem!r}")
    phase = Jet(np.array([[phi0, p, M / 2]], complex), 1, 2)
    amps = [Jet(np.array([[amp]], complex), 1, 0)]
    return RayState(t, np.array([[z]]), np.array([[x]], complex), phase, amps,
                    np.array([[[J]]], complex), np.array([[[P]]], complex))
