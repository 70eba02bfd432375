"""Media, initial data and problem presets.

Every smooth function here (potential, speed, phase, amplitudes) is written
once as a function of a coordinate list ``X``.  The entries of ``X`` may be
plain arrays (point evaluation) or :class:`~gbeams.jets.Jet` objects, in which
case the same code produces Taylor jets.  Evaluating a preset on
``X_i = z_i + y_i`` therefore yields its Taylor expansion at ``z``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .jets import Jet, constant_term, jexp, jrecip, jsin, jsqrt


class AssumptionError(ValueError):
    """Input data violates one of the standing smoothness/positivity assumptions."""


def _zero_like(X):
    x0 = X[0]
    return x0 * 0.0


# --------------------------------------------------------------------------
# media
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class Medium:
    """A potential V (Schrödinger) or a wave speed c (wave equation).

    ``func`` maps a coordinate list to values or jets.  ``lower``/``upper``
    bound the function from below/above; for speeds ``lower`` must be positive.
    """

    name: str
    role: str  # "potential" or "speed"
    func: Callable
    lower: float = -np.inf
    upper: float = np.inf
    params: dict = field(default_factory=dict)

    def __call__(self, X):
        return self.func(X)

    def values(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.real(self.func([points[..., i] for i in range(points.shape[-1])]))

    def jet(self, x, degree: int) -> Jet:
        """Taylor jet of the medium at points ``x`` (shape (..., n))."""
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        X = [Jet.variable(i, n, degree, x[..., i]) for i in range(n)]
        out = self.func(X)
        if not isinstance(out, Jet):
            out = Jet.constant(np.broadcast_to(out, x.shape[:-1]), n, degree)
        return out

    @property
    def is_constant(self) -> bool:
        return self.name in ("free", "const_speed")


def free_potential() -> Medium:
    return Medium("free", "potential", _zero_like, 0.0, 0.0)


def harmonic_potential(omega: float = 1.0) -> Medium:
    def V(X):
        return 0.5 * omega**2 * sum(x * x for x in X)

    return Medium("harmonic", "potential", V, 0.0, np.inf, {"omega": omega})


def const_speed(c0: float = 1.0) -> Medium:
    if c0 <= 0:
        raise AssumptionError("wave speed must be positive")

    def c(X):
        return _zero_like(X) + c0

    return Medium("const_speed", "speed", c, c0, c0, {"c0": c0})


def gaussian_bump_speed(c0: float = 1.0, amp: float = 0.3, center: Sequence[float] = (0.0,),
                        width: float = 0.5) -> Medium:
    if c0 <= 0 or amp <= -1.0:
        raise AssumptionError("speed must stay bounded away from zero (need c0 > 0, amp > -1)")
    center = tuple(float(v) for v in center)

    def c(X):
        r2 = sum((x - center[i % len(center)]) ** 2 for i, x in enumerate(X)) * (1.0 / width**2)
        return c0 * (1.0 + amp * jexp(-r2))

    lo, hi = sorted((c0, c0 * (1.0 + amp)))
    return Medium("gaussian_bump_speed", "speed", c, lo, hi,
                  {"c0": c0, "amp": amp, "center": center, "width": width})


def gaussian_bump_potential(amp: float = 0.5, center: Sequence[float] = (0.0,), width: float = 1.0) -> Medium:
    """V = amp exp(-|X - center|^2 / width^2); smooth, bounded and not quadratic."""
    center = tuple(float(v) for v in center)

    def V(X):
        r2 = sum((x - center[i % len(center)]) ** 2 for i, x in enumerate(X)) * (1.0 / width**2)
        return amp * jexp(-r2)

    lo, hi = sorted((0.0, amp))
    return Medium("gaussian_bump_potential", "potential", V, lo, hi, {"amp": amp, "center": center, "width": width})


MEDIA = {
    "free": free_potential,
    "harmonic": harmonic_potential,
    "gaussian_bump_potential": gaussian_bump_potential,
    "const_speed": const_speed,
    "gaussian_bump_speed": gaussian_bump_speed,
}


# --------------------------------------------------------------------------
# initial phase and amplitude presets
# --------------------------------------------------------------------------
def focusing_quadratic(a: float = 1.0, ripple: float = 0.0, wavenumber: float = 2.0):
    """phi0 = -a |X|^2 / 2 + ripple * sum sin(wavenumber x_i) / wavenumber.

    Without ripple all free rays meet at t = 1/a.  The ripple makes the phase
    non-quadratic, so that free beams are no longer exact solutions.
    """

    def phi(X):
        out = -0.5 * a * sum(x * x for x in X)
        if ripple:
            out = out + (ripple / wavenumber) * sum(jsin(wavenumber * x) for x in X)
        return out

    return phi


def linear_phase(direction: Sequence[float] = (1.0,)):
    direction = tuple(float(v) for v in direction)

    def phi(X):
        return sum(direction[i] * x for i, x in enumerate(X))

    return phi


def curved_front(direction: Sequence[float] = (1.0, 0.0), curvature: float = 0.5):
    """phi0 = d.X - curvature |X - (d.X) d|^2 / 2 for a unit direction d.

    A plane front bent in the transverse directions; in two dimensions with
    d = (1, 0) and curvature 1/2 this is x - y^2 / 4.
    """
    d = np.asarray(direction, dtype=float)
    d = tuple(d / np.linalg.norm(d))

    def phi(X):
        along = sum(d[i] * x for i, x in enumerate(X))
        perp = [x - d[i] * along for i, x in enumerate(X)]
        return along - 0.5 * curvature * sum(q * q for q in perp)

    return phi


def figure1_phase():
    """The two-dimensional cusp example phi0(x, y) = -x + y^2 + 0.4 x^2."""

    def phi(X):
        if len(X) != 2:
            raise AssumptionError("figure1 phase is two-dimensional")
        x, y = X
        return -1.0 * x + y * y + 0.4 * x * x

    return phi


PHASES = {
    "focusing_quadratic": focusing_quadratic,
    "linear": linear_phase,
    "curved_front": curved_front,
    "figure1": figure1_phase,
}


def _masked(X, s, inside_tol, f):
    """Evaluate ``f(s)`` where the constant term of ``s`` exceeds ``inside_tol``, else 0."""
    s0 = np.real(constant_term(s))
    inside = s0 > inside_tol
    shift = np.where(inside, 0.0, 1.0 - s0)
    s = s + shift
    return f(s) * inside


def bump_profile(center: Sequence[float], radius: float):
    """C-infinity bump exp(1 - 1/(1 - r^2)), r = |X - center| / radius."""
    center = tuple(float(v) for v in center)

    def b(X):
        r2 = sum((x - center[i]) ** 2 for i, x in enumerate(X)) * (1.0 / radius**2)
        # below 1e-3 the exponential already underflows to exactly zero
        return _masked(X, 1.0 - r2, 1e-3, lambda s: jexp(1.0 - jrecip(s)))

    return b


def gaussian_profile(center: Sequence[float], radius: float, width: float | None = None):
    """Gaussian exp(-r^2 / 2 w^2) cut to the ball of the given radius.

    With the default width (radius / 8.6) the profile is below 1e-16 on the
    cut, so the truncation is invisible in double precision.
    """
    center = tuple(float(v) for v in center)
    w = radius / 8.6 if width is None else width

    def b(X):
        r2 = sum((x - center[i]) ** 2 for i, x in enumerate(X))
        s = 1.0 - r2 * (1.0 / radius**2)
        return _masked(X, s, 0.0, lambda s_: jexp(-r2 * (0.5 / w**2)))

    return b


PROFILES = {"bump": bump_profile, "gaussian": gaussian_profile}


# --------------------------------------------------------------------------
# initial data
# --------------------------------------------------------------------------
@dataclass
class InitialData:
    """Initial phase, amplitudes B0/B1 and the box K0 containing their support."""

    phase: Callable
    b0: Callable
    k0_lo: np.ndarray
    k0_hi: np.ndarray
    b1_kind: str = "zero"  # "zero", "one_way" or "custom"
    b1_func: Callable | None = None
    speed: Medium | None = None  # needed by the one-way preset
    mode_sign: int = 1

    def __post_init__(self):
        self.k0_lo = np.atleast_1d(np.asarray(self.k0_lo, dtype=float))
        self.k0_hi = np.atleast_1d(np.asarray(self.k0_hi, dtype=float))
        if np.any(self.k0_hi <= self.k0_lo):
            raise AssumptionError("K0 box must have positive extent")

    @property
    def dim(self) -> int:
        return self.k0_lo.size

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.k0_hi - self.k0_lo))

    def _coords(self, z, degree):
        z = np.asarray(z, dtype=float)
        return [Jet.variable(i, self.dim, degree, z[..., i]) for i in range(self.dim)]

    def phase_jet(self, z, degree: int) -> Jet:
        out = self.phase(self._coords(z, degree))
        return _as_jet(out, np.asarray(z).shape[:-1], self.dim, degree)

    def b0_jet(self, z, degree: int) -> Jet:
        out = self.b0(self._coords(z, degree))
        return _as_jet(out, np.asarray(z).shape[:-1], self.dim, degree)

    def b1_jet(self, z, degree: int) -> Jet:
        z = np.asarray(z, dtype=float)
        if self.b1_kind == "zero":
            return Jet.zeros(self.dim, degree, z.shape[:-1])
        if self.b1_kind == "custom":
            return _as_jet(self.b1_func(self._coords(z, degree)), z.shape[:-1], self.dim, degree)
        # one-way: B1 = -i c |grad phi0| B0 selects the "+" mode at leading order
        grad = self.phase_jet(z, degree + 1).grad()
        norm = jsqrt(sum(g * g for g in grad))
        c = self.speed.jet(z, degree) if self.speed is not None else 1.0
        return (-1j * self.mode_sign) * (c * norm * self.b0_jet(z, degree))

    # point values -----------------------------------------------------------
    def phase_values(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.real(self.phase([y[..., i] for i in range(self.dim)]) + 0.0 * y[..., 0])

    def phase_gradient(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        flat = y.reshape(-1, self.dim)
        g = self.phase_jet(flat, 1).gradient0().real
        return g.reshape(y.shape)

    def b0_values(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.real(self.b0([y[..., i] for i in range(self.dim)]) + 0.0 * y[..., 0])

    def b1_values(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        flat = y.reshape(-1, self.dim)
        return self.b1_jet(flat, 0).coeffs[..., 0].reshape(y.shape[:-1])

    def u0(self, y, eps: float) -> np.ndarray:
        """u(0, y) = B0 exp(i phi0 / eps)."""
        return self.b0_values(y) * np.exp(1j * self.phase_values(y) / eps)

    def ut0(self, y, eps: float) -> np.ndarray:
        """u_t(0, y) = B1 exp(i phi0 / eps) / eps for the wave equation."""
        return self.b1_values(y) * np.exp(1j * self.phase_values(y) / eps) / eps

    def check_gradient(self, fatten: float | None = None, samples: int = 64, tol: float = 1e-8) -> float:
        """Minimum of |grad phi0| sampled on the fattened box K_d."""
        d = 0.2 * self.diameter if fatten is None else fatten
        axes = [np.linspace(lo - d, hi + d, samples) for lo, hi in zip(self.k0_lo, self.k0_hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        gmin = float(np.min(np.linalg.norm(self.phase_gradient(pts), axis=-1)))
        if gmin <= tol:
            raise AssumptionError(
                f"initial phase gradient vanishes on the fattened box (min |grad phi0| = {gmin:.3g}); "
                "the wave equation needs it bounded away from zero"
            )
        return gmin


def _as_jet(value, batch, dim, degree) -> Jet:
    if isinstance(value, Jet):
        if value.batch_shape != tuple(batch):
            value = Jet(np.broadcast_to(value.coeffs, tuple(batch) + value.coeffs.shape[-1:]).copy(), dim, degree)
        return value
    return Jet.constant(np.broadcast_to(value, batch), dim, degree)


# --------------------------------------------------------------------------
# problem definition
# --------------------------------------------------------------------------
@dataclass
class ProblemSpec:
    equation: str  # "schrodinger" or "wave"
    medium: Medium
    data: InitialData
    T: float
    order: int
    epsilons: list = field(default_factory=list)
    eta: float = np.inf
    caustic_times: tuple = ()

    def __post_init__(self):
        if self.equation not in ("schrodinger", "wave"):
            raise ValueError(f"unknown equation {self.equation!r}")
        if self.order not in (1, 2, 3, 4):
            raise ValueError(f"beam order must be in 1..4, got {self.order}")
        if self.data.dim not in (1, 2):
            raise ValueError("only one and two space dimensions are supported")
        if self.T <= 0:
            raise ValueError("final time must be positive")
        for eps in self.epsilons:
            if not 0 < eps <= 1:
                raise AssumptionError(f"epsilon={eps} outside (0, 1]")
        if self.equation == "wave":
            if self.medium.role != "speed":
                raise ValueError("wave problems need a speed medium")
            if not self.medium.lower > 0:
                raise AssumptionError("wave speed must be bounded below by a positive constant")
        elif self.medium.role != "potential":
            raise ValueError("Schrödinger problems need a potential medium")

    @property
    def dim(self) -> int:
        return self.data.dim

    @property
    def modes(self) -> tuple[str, ...]:
        return ("schrodinger",) if self.equation == "schrodinger" else ("wave_plus", "wave_minus")
