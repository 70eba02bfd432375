import math

import numpy as np
import pytest

from gbeams.analysis import spectral_derivative
from gbeams.problems import (InitialData, ProblemSpec, const_speed, gaussian_bump_speed, harmonic_potential,
                             free_potential, linear_phase)
from gbeams.reference import (ResolutionError, SpectralGrid, _leapfrog, closed_form_beam, fourier_wave,
                              make_grid, solve_schrodinger, solve_wave)
from gbeams.superposition import WaveField

SIGMA = 0.5


def gauss(X):
    return np.exp(-X[0] ** 2 / (2 * SIGMA**2))


def packet(equation, medium, k0=1.0, center=0.0):
    b0 = (lambda X: np.exp(-(X[0] - center) ** 2 / (2 * SIGMA**2)))
    data = InitialData(linear_phase((k0,)), b0, [-1], [1], speed=medium if equation == "wave" else None)
    return ProblemSpec(equation, medium, data, 1.0, 1)


def free_packet(t, y, eps, k0=1.0):
    # exact free evolution of exp(-y^2 / 2 s^2 + i k0 y / eps)
    q = 1 + 1j * eps * t / SIGMA**2
    return np.exp(-(y - k0 * t) ** 2 / (2 * SIGMA**2 * q) + 1j * k0 * (y - k0 * t / 2) / eps) / np.sqrt(q)


def test_free_solver_matches_exact_wavepacket():
    eps = 2.0**-5
    spec = packet("schrodinger", free_potential())
    grid = make_grid([-8.0], [8.0], eps)
    times = [0.0, 0.5, 1.0]
    sol = solve_schrodinger(spec, grid, eps, times)
    y = grid.points()[:, 0]
    for i, t in enumerate(times):
        assert np.max(np.abs(sol.values[i] - free_packet(t, y, eps))) <= 1e-10


def test_split_step_is_unitary():
    eps = 2.0**-4
    spec = packet("schrodinger", harmonic_potential(1.0), k0=0.0, center=1.0)
    grid = make_grid([-5.0], [5.0], eps)
    sol = solve_schrodinger(spec, grid, eps, [0.0, 0.7, 1.4], dt=1e-2, estimate_error=False)
    norms = np.sqrt(np.sum(np.abs(sol.values) ** 2, axis=1) * grid.cell_volume)
    assert np.max(np.abs(norms - norms[0])) <= 1e-12 * norms[0]
    assert sol.scheme == "strang-split-step"


def test_harmonic_packet_returns_after_one_period():
    eps = 2.0**-4
    spec = packet("schrodinger", harmonic_potential(1.0), k0=0.0, center=1.0)
    grid = make_grid([-5.0], [5.0], eps)
    sol = solve_schrodinger(spec, grid, eps, [0.0, math.pi, 2 * math.pi], dt=2 * math.pi / 4000,
                            estimate_error=False)
    y = grid.points()[:, 0]
    dens = np.abs(sol.values) ** 2
    centers = dens @ y / dens.sum(axis=1)
    assert abs(centers[0] - 1.0) <= 1e-6
    assert abs(centers[1] + 1.0) <= 1e-3
    assert abs(centers[2] - 1.0) <= 1e-3


def test_split_step_is_second_order():
    eps = 2.0**-4
    spec = packet("schrodinger", harmonic_potential(1.0), k0=0.5, center=0.5)
    grid = make_grid([-5.0], [5.0], eps)
    runs = [solve_schrodinger(spec, grid, eps, [1.0], dt=dt, estimate_error=False).values[-1]
            for dt in (0.02, 0.01, 0.005)]
    ratio = np.max(np.abs(runs[0] - runs[1])) / np.max(np.abs(runs[1] - runs[2]))
    assert 3.5 <= ratio <= 4.5


def test_wave_translation_is_exact():
    # u0 = f, u_t(0) = -f' gives u(t, y) = f(y - t)
    eps = 2.0**-5
    grid = make_grid([-6.0], [6.0], eps)
    y = grid.points()[:, 0]

    def f(s):
        return gauss([s]) * np.exp(1j * s / eps)

    def df(s):
        return (-s / SIGMA**2 + 1j / eps) * f(s)

    times = [0.0, 0.5, 1.5]
    vals, dvals = fourier_wave(grid, f(y), -df(y), 1.0, times)
    for i, t in enumerate(times):
        assert np.max(np.abs(vals[i] - f(y - t))) <= 1e-10
        assert np.max(np.abs(dvals[i] + df(y - t))) <= 1e-10 / eps


def test_one_way_data_is_translated_to_leading_order():
    errs = []
    for eps in (2.0**-5, 2.0**-6):
        c = const_speed(1.0)
        data = InitialData(linear_phase((1.0,)), gauss, [-1], [1], b1_kind="one_way", speed=c)
        spec = ProblemSpec("wave", c, data, 1.0, 1)
        grid = make_grid([-6.0], [6.0], eps)
        sol = solve_wave(spec, grid, eps, [1.0], estimate_error=False)
        y = grid.points()[:, 0]
        shifted = data.u0((y - 1.0)[:, None], eps)
        errs.append(np.max(np.abs(sol.values[0] - shifted)))
    assert errs[0] < 0.05
    assert 1.6 <= errs[0] / errs[1] <= 2.4


def test_zero_data_gives_zero_field():
    for medium in (const_speed(1.0), gaussian_bump_speed(1.0, 0.3, (0.0,), 0.5)):
        data = InitialData(linear_phase((1.0,)), lambda X: 0.0 * X[0], [-1], [1])
        spec = ProblemSpec("wave", medium, data, 0.5, 1)
        eps = 2.0**-4
        sol = solve_wave(spec, make_grid([-3.0], [3.0], eps), eps, [0.0, 0.5], estimate_error=False)
        assert np.all(sol.values == 0) and np.all(sol.dt_values == 0)


def test_leapfrog_energy_is_conserved():
    eps = 2.0**-4
    grid = make_grid([-6.0], [6.0], eps)
    y = grid.points()[:, 0]
    u0 = gauss([y]) * np.exp(1j * y / eps)
    u1 = np.zeros_like(u0)
    times = np.linspace(0.0, 2.0, 5)
    vals, dvals = _leapfrog(grid, u0, u1, np.ones(grid.shape), times, 0.05 * eps)  # the default step

    def energy(u, ut):
        du = spectral_derivative(WaveField(grid, u, 0.0, eps), (1,))
        return np.sum(np.abs(ut) ** 2 + np.abs(du) ** 2) * grid.cell_volume

    E = [energy(u, ut) for u, ut in zip(vals, dvals)]
    assert max(abs(e - E[0]) for e in E) / E[0] < 1e-6


def test_wave_cfl_violation_is_rejected():
    medium = gaussian_bump_speed(1.0, 0.3, (0.0,), 0.5)
    data = InitialData(linear_phase((1.0,)), gauss, [-1], [1])
    spec = ProblemSpec("wave", medium, data, 0.5, 1)
    eps = 2.0**-4
    grid = make_grid([-3.0], [3.0], eps)
    with pytest.raises(ResolutionError, match="CFL"):
        solve_wave(spec, grid, eps, [0.5], dt=grid.spacing[0])


def test_under_resolved_grid_names_required_samples():
    spec = packet("schrodinger", free_potential())
    grid = SpectralGrid([-4.0], [8.0 / 64], (64,))
    with pytest.raises(ResolutionError, match="need"):
        solve_schrodinger(spec, grid, 2.0**-6, [0.0])


def test_self_error_estimate_is_reported():
    eps = 2.0**-4
    spec = packet("schrodinger", harmonic_potential(1.0), k0=0.0, center=1.0)
    sol = solve_schrodinger(spec, make_grid([-5.0], [5.0], eps), eps, [0.0, 0.5], dt=0.01)
    assert 0 < sol.floor < 1e-3
    assert set(sol.self_error) == {"max", "l2"}


def test_closed_form_examples():
    s = closed_form_beam("free_schrodinger", 0.3, 1.0)
    assert abs(s.x[0, 0]) <= 1e-15
    assert abs(s.M[0, 0, 0] - (1 + 1j)) <= 1e-14
    s = closed_form_beam("harmonic_schrodinger", 0.7, math.pi / 2)
    assert abs(s.x[0, 0]) <= 1e-15
    assert s.M[0, 0, 0] == 1j
    for sign in (1, -1):
        s = closed_form_beam("const_speed_wave_1d", 0.0, 0.7, sign=sign)
        assert s.x[0, 0] == sign * 0.7
    with pytest.raises(ValueError):
        closed_form_beam("harmonic_wave", 0.0, 1.0)


def test_closed_form_amplitude_stays_continuous_through_the_focus():
    # (1 + t M0)^(-1/2) follows the continued branch, not the principal one
    ts = np.linspace(0.0, 3.0, 61)
    a = np.array([closed_form_beam("free_schrodinger", 0.0, t).amps[0].coeffs[0, 0] for t in ts])
    assert np.max(np.abs(np.diff(a))) < 0.1
