"""Gaussian beam coefficient ODEs.

The phase and amplitude hierarchies are not hand-coded per order.  Instead
the truncated Hamilton-Jacobi and transport residuals are formed with jet
arithmetic and their Taylor coefficients are set to zero, which yields the
coefficient ODEs for any beam order.  The explicit low-order equations
(rays, Riccati equation, leading amplitude) are recovered as special cases
and checked in the test suite.

All functions work on batches: a :class:`RayState` holds the states of many
launch points ``z`` at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .jets import Jet, jsqrt, ncoef
from .problems import AssumptionError, InitialData, Medium


class IntegrationError(RuntimeError):
    """Non-finite values appeared while integrating beam coefficients."""


# --------------------------------------------------------------------------
# Hamiltonians
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class Hamiltonian:
    """H = |p|^2/2 + V(x) (schrodinger) or H = +-c(x)|p| (wave_plus / wave_minus)."""

    kind: str
    medium: Medium

    def __post_init__(self):
        if self.kind not in ("schrodinger", "wave_plus", "wave_minus"):
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}")
        expected = "potential" if self.kind == "schrodinger" else "speed"
        if self.medium.role != expected:
            raise ValueError(f"{self.kind} needs a {expected} medium")

    @property
    def sign(self) -> int:
        return -1 if self.kind == "wave_minus" else 1

    @property
    def is_wave(self) -> bool:
        return self.kind != "schrodinger"

    def __call__(self, X, P):
        """Evaluate H on coordinate and momentum lists (arrays or jets)."""
        p2 = sum(q * q for q in P)
        if not self.is_wave:
            return 0.5 * p2 + self.medium(X)
        if isinstance(p2, Jet):
            if np.any(np.abs(p2.coeffs[..., 0]) < 1e-14):
                raise AssumptionError("|p| vanished; the wave Hamiltonian needs a nonzero phase gradient")
        return self.sign * (self.medium(X) * jsqrt(p2))

    def phase_space_jet(self, x, p, degree: int = 2) -> Jet:
        """Jet of H(x + u, p + v) in the 2n variables (u, v)."""
        x = np.asarray(x)
        p = np.asarray(p)
        n = x.shape[-1]
        X = [Jet.variable(i, 2 * n, degree, x[..., i]) for i in range(n)]
        P = [Jet.variable(n + i, 2 * n, degree, p[..., i]) for i in range(n)]
        return self(X, P)

    def derivatives(self, x, p):
        """Value, gradients and Hessian blocks of H at (x, p)."""
        n = np.shape(x)[-1]
        jet = self.phase_space_jet(x, p, 2)
        g = jet.gradient0()
        hess = jet.hessian0()
        return {
            "H": jet.coeffs[..., 0],
            "H_x": g[..., :n],
            "H_p": g[..., n:],
            "H_xx": hess[..., :n, :n],
            "H_xp": hess[..., :n, n:],
            "H_px": hess[..., n:, :n],
            "H_pp": hess[..., n:, n:],
        }


def hamiltonian_jet(H: Hamiltonian, x, grad_phase: list[Jet]) -> Jet:
    """Jet in y of H(x + y, grad_y Phi(y)), at the degree of ``grad_phase``."""
    g0 = grad_phase[0]
    n, d = g0.dim, g0.degree
    x = np.asarray(x)
    X = [Jet.variable(i, n, d, x[..., i]) for i in range(n)]
    return H(X, grad_phase)


# --------------------------------------------------------------------------
# state layout
# --------------------------------------------------------------------------
def amp_degrees(order: int) -> list[int]:
    """Degrees k - 2j - 1 of the amplitude polynomials, j = 0..ceil(k/2)-1."""
    return [order - 2 * j - 1 for j in range(math.ceil(order / 2))]


@dataclass(frozen=True)
class Layout:
    """Offsets of the packed per-beam state vector.

    Packing order: x (n), J (n*n), P (n*n), phase coefficients, amplitude
    coefficients for j = 0, 1, ...
    """

    dim: int
    order: int

    @property
    def phase_degree(self) -> int:
        return self.order + 1

    @property
    def amp_degrees(self) -> list[int]:
        return amp_degrees(self.order)

    @property
    def slices(self) -> dict:
        n = self.dim
        out, pos = {}, 0
        for name, size in (("x", n), ("J", n * n), ("P", n * n),
                           ("phase", ncoef(n, self.phase_degree))):
            out[name] = slice(pos, pos + size)
            pos += size
        for j, d in enumerate(self.amp_degrees):
            out[f"a{j}"] = slice(pos, pos + ncoef(n, d))
            pos += ncoef(n, d)
        out["size"] = pos
        return out

    @property
    def size(self) -> int:
        return self.slices["size"]


@dataclass
class RayState:
    """Beam coefficients for a batch of launch points at one time."""

    t: float
    z: np.ndarray  # (B, n)
    x: np.ndarray  # (B, n), complex dtype, real-valued
    phase: Jet  # degree k+1: phi0, p, M/2, higher Taylor coefficients
    amps: list  # Jets of degree k-2j-1
    jac_x: np.ndarray  # (B, n, n)
    jac_p: np.ndarray  # (B, n, n)

    @property
    def dim(self) -> int:
        return self.phase.dim

    @property
    def order(self) -> int:
        return self.phase.degree - 1

    @property
    def layout(self) -> Layout:
        return Layout(self.dim, self.order)

    @property
    def p(self) -> np.ndarray:
        return self.phase.gradient0()

    @property
    def phi0(self) -> np.ndarray:
        return self.phase.coeffs[..., 0]

    @property
    def M(self) -> np.ndarray:
        return self.phase.hessian0()

    def pack(self) -> np.ndarray:
        lay = self.layout.slices
        B = self.z.shape[0]
        out = np.zeros((B, lay["size"]), complex)
        n = self.dim
        out[:, lay["x"]] = self.x
        out[:, lay["J"]] = self.jac_x.reshape(B, n * n)
        out[:, lay["P"]] = self.jac_p.reshape(B, n * n)
        out[:, lay["phase"]] = self.phase.coeffs
        for j, a in enumerate(self.amps):
            out[:, lay[f"a{j}"]] = a.coeffs
        return out

    @classmethod
    def unpack(cls, packed: np.ndarray, layout: Layout, t: float, z: np.ndarray) -> RayState:
        lay = layout.slices
        n = layout.dim
        B = packed.shape[0]
        amps = [Jet(packed[:, lay[f"a{j}"]], n, d) for j, d in enumerate(layout.amp_degrees)]
        return cls(
            t=t,
            z=z,
            x=packed[:, lay["x"]],
            phase=Jet(packed[:, lay["phase"]], n, layout.phase_degree),
            amps=amps,
            jac_x=packed[:, lay["J"]].reshape(B, n, n),
            jac_p=packed[:, lay["P"]].reshape(B, n, n),
        )

    def take(self, index) -> RayState:
        return RayState(self.t, self.z[index], self.x[index], self.phase.take(index),
                        [a.take(index) for a in self.amps], self.jac_x[index], self.jac_p[index])


# --------------------------------------------------------------------------
# right-hand sides
# --------------------------------------------------------------------------
def _grad(jet: Jet, degree: int) -> list[Jet]:
    """Gradient padded/truncated to ``degree``; zero for degree-0 input."""
    if jet.degree == 0:
        return [Jet.zeros(jet.dim, degree, jet.batch_shape) for _ in range(jet.dim)]
    return [g.with_degree(degree) for g in jet.grad()]


def _laplacian(jet: Jet, degree: int) -> Jet:
    if jet.degree < 2:
        return Jet.zeros(jet.dim, degree, jet.batch_shape)
    return jet.laplacian().with_degree(degree)


def ray_velocity(state: RayState, H: Hamiltonian):
    """(x_dot, p_dot) = (grad_p H, -grad_x H) at the central ray."""
    d = H.derivatives(state.x.real, state.p)
    return d["H_p"], -d["H_x"]


def phase_rhs(state: RayState, H: Hamiltonian, xdot=None):
    """Time derivatives of the phase jet, the ray position and the momentum.

    Phi_t = xdot . grad_y Phi - H(x + y, grad_y Phi), truncated at degree k+1.
    """
    if xdot is None:
        xdot, _ = ray_velocity(state, H)
    Phi = state.phase
    D = Phi.degree
    grad = _grad(Phi, D)
    Hj = hamiltonian_jet(H, state.x.real, grad)
    dPhi = sum(grad[i] * xdot[..., i] for i in range(Phi.dim)) - Hj
    return dPhi, xdot, dPhi.gradient0()


def _schrodinger_amp_rhs(state: RayState, xdot) -> list[Jet]:
    Phi = state.phase
    out = []
    for j, A in enumerate(state.amps):
        d = A.degree
        gPhi = _grad(Phi, d)
        gA = _grad(A, d)
        rhs = -0.5 * (A * _laplacian(Phi, d))
        for i in range(A.dim):
            rhs = rhs + (xdot[..., i] - gPhi[i]) * gA[i]
        if j > 0:
            rhs = rhs + 0.5j * _laplacian(state.amps[j - 1], d)
        out.append(rhs)
    return out


def eulerian_phase(state: RayState, H: Hamiltonian, degree: int) -> Jet:
    """Space-time jet of psi(t + s, x + y), generated from psi_s = -H(x + y, grad psi).

    The result is a jet in (s, y) (s is variable 0) of total degree ``degree``.
    With the beam phase truncated at degree k+1 the coefficients are exact up
    to total degree k+2.
    """
    Phi = state.phase
    n = Phi.dim
    psi = Phi.with_degree(min(Phi.degree, degree)).with_degree(degree).embed(n + 1, range(1, n + 1))
    X = [Jet.variable(1 + i, n + 1, degree, state.x.real[..., i]) for i in range(n)]
    for m in range(degree):
        P = [psi.diff(1 + i).with_degree(degree) for i in range(n)]
        Hs = H(X, P)
        psi.set_slice(0, m + 1, Hs.slice(0, m) * (-1.0 / (m + 1)))
    return psi


def _wave_amp_rhs(state: RayState, H: Hamiltonian, xdot, with_eulerian: bool = False):
    """Wave transport hierarchy via space-time jets.

    Order eps^(j-1) of the conjugated residual of u_tt - c^2 Lap u gives
      2 psi_t a_t = 2 c^2 grad psi . grad a + (c^2 Lap psi - psi_tt) a + i Box a_{j-1}
    for the Eulerian amplitude a_j.  Its s-Taylor coefficients are generated
    recursively, then converted to the moving frame of the beam.
    """
    n = state.dim
    k = state.order
    psi = eulerian_phase(state, H, k + 2)
    out, dt_eulerian = [], []
    box_prev = None
    for j, A in enumerate(state.amps):
        d = A.degree + 1
        X = [Jet.variable(1 + i, n + 1, d, state.x.real[..., i]) for i in range(n)]
        c2 = H.medium(X)
        c2 = c2 * c2 if isinstance(c2, Jet) else Jet.constant(np.broadcast_to(c2 * c2, A.batch_shape), n + 1, d)
        psi_s = psi.diff(0).with_degree(d)
        psi_ss = psi.diff(0).diff(0).with_degree(d)
        grad_psi = [psi.diff(1 + i).with_degree(d) for i in range(n)]
        lap_psi = sum(psi.diff(1 + i).diff(1 + i).with_degree(d) for i in range(n))
        inv = (2.0 * psi_s).reciprocal()
        coef_a = c2 * lap_psi - psi_ss
        E = A.with_degree(d).embed(n + 1, range(1, n + 1))
        for m in range(d):
            gE = [E.diff(1 + i).with_degree(d) for i in range(n)]
            N = coef_a * E + 2.0 * c2 * sum(g * gE[i] for i, g in enumerate(grad_psi))
            if box_prev is not None:
                N = N + 1j * box_prev.with_degree(d)
            E.set_slice(0, m + 1, (N * inv).slice(0, m) * (1.0 / (m + 1)))
        a_s = E.slice(0, 1).with_degree(A.degree)
        dt_eulerian.append(a_s)
        gA = _grad(A, A.degree)
        rhs = a_s + sum(xdot[..., i] * gA[i] for i in range(n))
        out.append(rhs)
        if d >= 2:
            lap_E = sum(E.diff(1 + i).diff(1 + i) for i in range(n))
            box_prev = E.diff(0).diff(0) - c2.with_degree(d - 2) * lap_E
        else:
            box_prev = None
    if with_eulerian:
        return out, dt_eulerian
    return out


def amplitude_rhs(state: RayState, H: Hamiltonian, xdot=None) -> list[Jet]:
    """Time derivatives of the amplitude jets a_j, j = 0..ceil(k/2)-1."""
    if xdot is None:
        xdot, _ = ray_velocity(state, H)
    if H.is_wave:
        return _wave_amp_rhs(state, H, xdot)
    return _schrodinger_amp_rhs(state, xdot)


def variational_rhs(state: RayState, H: Hamiltonian, derivs=None):
    """d/dt [J; P] = [H_px J + H_pp P; -H_xx J - H_xp P]."""
    if derivs is None:
        derivs = H.derivatives(state.x.real, state.p)
    J, P = state.jac_x, state.jac_p
    dJ = derivs["H_px"] @ J + derivs["H_pp"] @ P
    dP = -(derivs["H_xx"] @ J) - derivs["H_xp"] @ P
    return dJ, dP


def full_rhs(packed: np.ndarray, layout: Layout, H: Hamiltonian, t: float, z) -> np.ndarray:
    state = RayState.unpack(packed, layout, t, z)
    derivs = H.derivatives(state.x.real, state.p)
    xdot = derivs["H_p"]
    dPhi, _, _ = phase_rhs(state, H, xdot)
    dA = amplitude_rhs(state, H, xdot)
    dJ, dP = variational_rhs(state, H, derivs)
    deriv = RayState(t, z, xdot, dPhi, dA, dJ, dP)
    return deriv.pack()


# --------------------------------------------------------------------------
# initial data
# --------------------------------------------------------------------------
def _phase_initial(z, order: int, data: InitialData) -> Jet:
    D = order + 1
    Phi = data.phase_jet(z, D).copy()
    Phi.coeffs = Phi.coeffs.real.astype(complex)
    if D >= 2:
        # M(0) = D^2 phi0 + i Id adds i/2 to every pure square y_i^2
        for i in range(data.dim):
            beta = [0] * data.dim
            beta[i] = 2
            idx = [tuple(b) for b in Phi.exponents.tolist()].index(tuple(beta))
            Phi.coeffs[..., idx] += 0.5j
    return Phi


def schrodinger_initial_state(z, order: int, data: InitialData) -> RayState:
    """Beam data at t = 0: x = z, p = grad phi0, M = D^2 phi0 + i Id, a_0 = Taylor(B0)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    B, n = z.shape
    Phi = _phase_initial(z, order, data)
    degs = amp_degrees(order)
    amps = [data.b0_jet(z, degs[0])]
    amps[0] = Jet(amps[0].coeffs.real.astype(complex), n, degs[0])
    amps += [Jet.zeros(n, d, (B,)) for d in degs[1:]]
    hess = data.phase_jet(z, 2).hessian0().real
    return RayState(0.0, z, z.astype(complex), Phi, amps,
                    np.broadcast_to(np.eye(n), (B, n, n)).astype(complex), hess.astype(complex))


def wave_initial_states(z, order: int, data: InitialData, medium: Medium):
    """Initial states of the (+, -) modes with the amplitude splitting of B0, B1.

    A0 = (B0 + B1 / (i d_t Phi)) / 2 and A_{j+1} = -(d_t a_j^+ + d_t a_j^-) / (2 i d_t Phi),
    where d_t denotes the Eulerian time derivative at t = 0, taken from the ODEs.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    B, n = z.shape
    grad = data.phase_jet(z, 1).gradient0().real
    if np.any(np.linalg.norm(grad, axis=-1) < 1e-10):
        raise AssumptionError("initial phase gradient vanishes at a launch point; "
                              "the wave equation needs it bounded away from zero")
    Phi0 = _phase_initial(z, order, data)
    degs = amp_degrees(order)
    hess = data.phase_jet(z, 2).hessian0().real.astype(complex)
    eye = np.broadcast_to(np.eye(n), (B, n, n)).astype(complex)
    Hs = {s: Hamiltonian(s, medium) for s in ("wave_plus", "wave_minus")}
    states = {
        s: RayState(0.0, z, z.astype(complex), Phi0.copy(),
                    [Jet.zeros(n, d, (B,)) for d in degs], eye.copy(), hess.copy())
        for s in Hs
    }
    # d_t Phi = Phi_t - xdot . grad Phi = -H(x + y, grad Phi)
    dtPhi = {}
    for s, H in Hs.items():
        st = states[s]
        dPhi, xdot, _ = phase_rhs(st, H)
        g = _grad(st.phase, st.phase.degree)
        dtPhi[s] = dPhi - sum(xdot[..., i] * g[i] for i in range(n))
    b0 = data.b0_jet(z, degs[0])
    b1 = data.b1_jet(z, degs[0])
    for s in Hs:
        inv = (1j * dtPhi[s].with_degree(degs[0])).reciprocal()
        states[s].amps[0] = 0.5 * (b0 + b1 * inv)
    for j in range(1, len(degs)):
        dt = {}
        for s, H in Hs.items():
            st = states[s]
            xdot, _ = ray_velocity(st, H)
            _, eul = _wave_amp_rhs(st, H, xdot, with_eulerian=True)
            dt[s] = eul[j - 1]
        total = (dt["wave_plus"] + dt["wave_minus"]).with_degree(degs[j])
        for s in Hs:
            inv = (1j * dtPhi[s].with_degree(degs[j])).reciprocal()
            states[s].amps[j] = -0.5 * (total * inv)
    return states["wave_plus"], states["wave_minus"]


def initial_states(z, order: int, data: InitialData, equation: str, medium: Medium) -> dict:
    """Initial states keyed by Hamiltonian kind."""
    if equation == "schrodinger":
        return {"schrodinger": schrodinger_initial_state(z, order, data)}
    plus, minus = wave_initial_states(z, order, data, medium)
    return {"wave_plus": plus, "wave_minus": minus}


# --------------------------------------------------------------------------
# time integration
# --------------------------------------------------------------------------
@dataclass
class BeamTrajectory:
    """States of a batch of beams at the requested output times.

    ``states`` holds packed states at ``times``; ``ray_times``, ``ray_x`` and
    ``ray_J`` record the central rays and Jacobians on a finer time grid for
    caustic detection.
    """

    hamiltonian: Hamiltonian
    layout: Layout
    z: np.ndarray
    times: np.ndarray
    states: np.ndarray  # (Nt, B, S)
    ray_times: np.ndarray
    ray_x: np.ndarray  # (Nr, B, n)
    ray_J: np.ndarray  # (Nr, B, n, n)
    step: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.hamiltonian.kind

    def _index(self, t: float):
        hit = np.flatnonzero(np.abs(self.times - t) <= 1e-12 * max(1.0, abs(t)))
        return int(hit[0]) if hit.size else None

    def state(self, t: float) -> RayState:
        """State at time t; cubic Hermite interpolation between stored times."""
        i = self._index(t)
        if i is not None:
            return RayState.unpack(self.states[i], self.layout, float(self.times[i]), self.z)
        if not self.times[0] <= t <= self.times[-1]:
            raise ValueError(f"t={t} outside stored range [{self.times[0]}, {self.times[-1]}]")
        i = int(np.searchsorted(self.times, t)) - 1
        t0, t1 = self.times[i], self.times[i + 1]
        y0, y1 = self.states[i], self.states[i + 1]
        f0 = full_rhs(y0, self.layout, self.hamiltonian, t0, self.z)
        f1 = full_rhs(y1, self.layout, self.hamiltonian, t1, self.z)
        h = t1 - t0
        s = (t - t0) / h
        h00, h10 = 2 * s**3 - 3 * s**2 + 1, s**3 - 2 * s**2 + s
        h01, h11 = -2 * s**3 + 3 * s**2, s**3 - s**2
        y = h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
        return RayState.unpack(y, self.layout, float(t), self.z)

    def derivative(self, t: float) -> RayState:
        st = self.state(t)
        d = full_rhs(st.pack(), self.layout, self.hamiltonian, t, self.z)
        return RayState.unpack(d, self.layout, t, self.z)


def default_step(T: float) -> float:
    return min(1e-3, T / 1000.0)


def integrate_beam(state0: RayState, H: Hamiltonian, T: float, h: float | None = None,
                   t_eval=None, record_stride: int = 1) -> BeamTrajectory:
    """Classical RK4 from t=0 to T.

    Output times ``t_eval`` (default: every step) are hit exactly; between
    consecutive output times the interval is split into equal steps no
    longer than ``h``.  Ray positions and Jacobians are recorded every
    ``record_stride`` steps.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    h = default_step(T) if h is None else h
    if h <= 0:
        raise ValueError("step must be positive")
    layout = state0.layout
    z = state0.z
    n = layout.dim
    B = z.shape[0]
    if t_eval is None:
        nsteps = int(math.ceil(T / h - 1e-9))
        t_eval = np.linspace(0.0, T, nsteps + 1)
    t_eval = np.unique(np.concatenate([[0.0], np.asarray(t_eval, dtype=float)]))
    if t_eval[-1] > T + 1e-12 or t_eval[0] < 0:
        raise ValueError("output times must lie in [0, T]")
    lay = layout.slices
    y = state0.pack()
    states = [y.copy()]
    ray_t, ray_x, ray_J = [0.0], [y[:, lay["x"]].real.copy()], [y[:, lay["J"]].real.reshape(B, n, n).copy()]
    count = 0
    t = 0.0

    def f(tt, yy):
        return full_rhs(yy, layout, H, tt, z)

    for t_next in t_eval[1:]:
        span = t_next - t
        m = max(1, int(math.ceil(span / h - 1e-9)))
        dt = span / m
        for i in range(m):
            k1 = f(t, y)
            k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
            k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
            k4 = f(t + dt, y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = t + dt
            count += 1
            if not np.all(np.isfinite(y)):
                bad = np.flatnonzero(~np.all(np.isfinite(y), axis=1))
                raise IntegrationError(
                    f"non-finite beam state at t={t:.6g} for launch points {z[bad[:3]].tolist()}"
                )
            if count % record_stride == 0:
                ray_t.append(t)
                ray_x.append(y[:, lay["x"]].real.copy())
                ray_J.append(y[:, lay["J"]].real.reshape(B, n, n).copy())
        t = float(t_next)
        states.append(y.copy())
    if ray_t[-1] != t:
        ray_t.append(t)
        ray_x.append(y[:, lay["x"]].real.copy())
        ray_J.append(y[:, lay["J"]].real.reshape(B, n, n).copy())
    return BeamTrajectory(H, layout, z, t_eval, np.array(states), np.array(ray_t),
                          np.array(ray_x), np.array(ray_J), step=h)
