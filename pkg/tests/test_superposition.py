import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gbeams.analysis import fit_rate
from gbeams.dynamics import Hamiltonian, initial_states, integrate_beam
from gbeams.problems import (InitialData, ProblemSpec, const_speed, focusing_quadratic, free_potential,
                             gaussian_profile, linear_phase)
from gbeams.superposition import (BeamLattice, CutoffSpec, LatticeError, UniformGrid, WaveField,
                                  build_lattice, check_admissibility, evaluate_beam,
                                  evaluate_superposition, lattice_points, select_eta)


def focusing_spec(order=1, T=0.5, lo=-2.0, hi=2.0):
    data = InitialData(focusing_quadratic(), gaussian_profile((0.0,), 2.0, 0.5), [lo], [hi])
    return ProblemSpec("schrodinger", free_potential(), data, T, order)


def single_beam(z=0.3, order=1, T=0.5):
    spec = focusing_spec(order, T)
    st0 = initial_states([[z]], order, spec.data, "schrodinger", spec.medium)["schrodinger"]
    return integrate_beam(st0, Hamiltonian("schrodinger", spec.medium), T, h=1e-3, t_eval=[0.0, 0.25, T])


@given(st.floats(0.01, 10.0), st.floats(0.0, 30.0))
def test_cutoff_plateau_support_and_range(eta, r):
    rho = float(CutoffSpec(eta)(np.array([r]))[0])
    assert 0.0 <= rho <= 1.0
    if r <= eta:
        assert rho == 1.0
    if r >= 2 * eta:
        assert rho == 0.0


def test_infinite_cutoff_is_one():
    assert np.all(CutoffSpec(math.inf)(np.array([0.0, 1.0, 1e6])) == 1.0)
    with pytest.raises(ValueError):
        CutoffSpec(0.0)


def test_cutoff_is_monotone_in_the_transition():
    r = np.linspace(1.0, 2.0, 201)
    assert np.all(np.diff(CutoffSpec(1.0)(r)) <= 0)


def test_beam_on_ray_has_amplitude_modulus():
    tr = single_beam()
    eps = 0.05
    for t in (0.0, 0.25, 0.5):
        s = tr.state(t)
        v = evaluate_beam(tr, t, s.x.real, eps)[0]
        a = s.amps[0].coeffs[0, 0]
        assert abs(v - a * np.exp(1j * s.phi0[0] / eps)) <= 1e-12
        assert abs(abs(v) - abs(a)) <= 1e-12


def test_beam_vanishes_beyond_twice_eta():
    tr = single_beam()
    x = tr.state(0.25).x.real[0, 0]
    y = np.array([[x + 0.2], [x - 0.2001], [x + 5.0]])
    assert np.all(evaluate_beam(tr, 0.25, y, 0.05, CutoffSpec(0.1)) == 0)
    assert evaluate_beam(tr, 0.25, [[x + 0.05]], 0.05, CutoffSpec(0.1))[0] != 0


def test_free_beam_at_time_zero():
    # B0(z) exp(i(phi0(z) + (y-z) p + (y-z)^2 (phi0'' + i) / 2) / eps) with phi0 = -z^2/2
    z, eps = 0.3, 0.05
    tr = single_beam(z)
    y = np.linspace(-0.5, 1.1, 33)[:, None]
    b0 = focusing_spec().data.b0_values(np.array([[z]]))[0]
    d = y[:, 0] - z
    expect = b0 * np.exp(1j * (-z * z / 2 - z * d + d * d * (-1 + 1j) / 2) / eps)
    got = evaluate_beam(tr, 0.0, y, eps)
    assert np.max(np.abs(got - expect)) <= 1e-12
    assert np.all(np.abs(got) <= abs(b0) * np.exp(-d * d / (2 * eps)) * (1 + 1e-12))


def test_single_point_lattice_reduces_to_one_beam():
    spec = focusing_spec()
    tr = single_beam()
    lat = BeamLattice(spec, np.array([[0.3]]), np.array([1.0]), np.array([1e-6]), 4.0, np.array([0]),
                      {"schrodinger": tr})
    eps = 0.05
    y = np.linspace(-1, 1, 17)[:, None]
    u = evaluate_superposition(lat, 0.25, y, eps)
    v = evaluate_beam(tr, 0.25, y, eps)
    assert np.max(np.abs(u - v / math.sqrt(2 * math.pi * eps))) <= 1e-14


def test_superposition_matches_initial_data_to_first_order():
    spec = focusing_spec(T=0.05)
    eps_l = [2.0**-j for j in range(4, 8)]
    errs = []
    y = np.linspace(-1.5, 1.5, 301)[:, None]
    for eps in eps_l:
        lat = build_lattice(spec, eps=eps)
        u = evaluate_superposition(lat, 0.0, y, eps)
        errs.append(np.max(np.abs(u - spec.data.u0(y, eps))))
    assert fit_rate(eps_l, errs).slope >= 0.75


def test_doubling_lattice_density_changes_little():
    spec = focusing_spec(T=0.5)
    eps = 2.0**-6
    y = np.linspace(-1.5, 1.5, 201)[:, None]
    u1 = evaluate_superposition(build_lattice(spec, eps=eps), 0.5, y, eps)
    u2 = evaluate_superposition(build_lattice(spec, eps=eps, gamma=8.0), 0.5, y, eps)
    assert np.max(np.abs(u1 - u2)) / np.max(np.abs(u2)) < 0.01


def test_coarse_lattice_is_rejected_with_required_spacing():
    lat = build_lattice(focusing_spec(T=0.05), spacing=0.2)
    with pytest.raises(LatticeError, match="need dz"):
        evaluate_superposition(lat, 0.0, [[0.0]], 2.0**-6)


def test_lattice_covers_box_with_trapezoid_weights():
    pts, w, h = lattice_points([-1.0, 0.0], [1.0, 0.5], 0.1)
    assert pts[:, 0].min() == -1.0 and pts[:, 0].max() == 1.0
    assert pts[:, 1].min() == 0.0 and pts[:, 1].max() == 0.5
    assert np.all(h <= 0.1 + 1e-15)
    assert abs(w.sum() - 1.0) <= 1e-12


def test_first_order_without_cutoff_is_admissible():
    lat = build_lattice(focusing_spec(T=1.5), spacing=0.1)
    adm = select_eta(lat)
    assert adm.admissible and adm.eta == math.inf and adm.w4 > 0


def test_initial_imaginary_part_is_half_the_square():
    for k in (1, 2, 3):
        lat = build_lattice(focusing_spec(order=k, T=0.05), spacing=0.2)
        eta = math.inf if k == 1 else 0.5
        adm = check_admissibility(lat, CutoffSpec(eta), T=0.0)
        assert adm.admissible
        assert adm.w4 >= 0.5 - 1e-12


def test_third_order_eta_is_halved_until_admissible():
    spec = focusing_spec(order=3, T=2.0, lo=-1.0, hi=1.0)
    lat = build_lattice(spec, spacing=0.1)
    adm = select_eta(lat)
    assert adm.admissible and adm.w4 > 0
    m = math.log2(1.0 / adm.eta)
    assert m == int(m) and m >= 0
    if adm.eta < 1.0:
        assert not check_admissibility(lat, CutoffSpec(2 * adm.eta)).admissible


def test_one_way_data_has_no_minus_mode():
    c = const_speed(1.0)
    data = InitialData(linear_phase((1.0,)), gaussian_profile((0.0,), 2.0, 0.5), [-2], [2], b1_kind="one_way",
                       speed=c)
    states = initial_states(np.linspace(-2, 2, 9)[:, None], 2, data, "wave", c)
    assert np.max(np.abs(states["wave_minus"].amps[0].coeffs[..., 0])) <= 1e-15
    assert np.max(np.abs(states["wave_plus"].amps[0].coeffs[..., 0])) > 0.1
    lat = build_lattice(ProblemSpec("wave", c, data, 0.1, 1), spacing=0.2)
    assert lat.modes == ("wave_plus",)


def test_wavefield_roundtrip(tmp_path):
    grid = UniformGrid([-1.0, 0.0], [0.25, 0.5], (8, 4))
    rng = np.random.default_rng(3)
    f = WaveField(grid, rng.normal(size=(8, 4)) + 1j * rng.normal(size=(8, 4)), 0.7, 2.0**-5)
    path = f.save(tmp_path / "u.bin")
    g = WaveField.load(path)
    assert g.values.tobytes() == f.values.tobytes()
    assert g.t == 0.7 and g.eps == 2.0**-5 and g.grid.shape == (8, 4)
    assert np.array_equal(g.grid.origin, grid.origin) and np.array_equal(g.grid.spacing, grid.spacing)
    meta = json.loads((tmp_path / "u.bin.json").read_text())
    assert meta["samples"] == [8, 4] and meta["epsilon"] == 2.0**-5
    assert path.stat().st_size == 8 * (1 + 2 + 2 + 2 + 2) + 16 * 32


def test_grid_target_returns_wavefield():
    spec = focusing_spec(T=0.05)
    eps = 2.0**-4
    lat = build_lattice(spec, eps=eps)
    grid = UniformGrid.covering([-2.0], [2.0], 64)
    f = evaluate_superposition(lat, 0.0, grid, eps)
    assert isinstance(f, WaveField) and f.values.shape == (64,)
    assert np.array_equal(f.values, evaluate_superposition(lat, 0.0, grid.points(), eps))
