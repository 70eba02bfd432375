import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gbeams.analysis import (MeasurementPlan, RateError, epsilon_sweep, evaluate_targets, fit_rate, fit_semilog,
                             gaussian_moment, grid_norms, oscillatory_integral, spectral_derivative,
                             targets_for)
from gbeams.problems import InitialData, ProblemSpec, focusing_quadratic, free_potential, gaussian_profile
from gbeams.reference import ResolutionError
from gbeams.superposition import UniformGrid, WaveField, build_lattice

EPS_SET = [2.0**-j for j in range(4, 10)]


def field(eps, n=4096, L=10.0, f=None):
    grid = UniformGrid.covering([-L / 2], [L / 2], n)
    y = grid.points()[:, 0]
    vals = np.exp(-y * y) * np.exp(1j * y / eps) if f is None else f(y)
    return WaveField(grid, vals, 0.0, eps)


def test_zeroth_sobolev_norm_is_l2():
    rep = grid_norms(field(0.1), s_max=2)
    assert rep.hs[0] == rep.l2
    l2 = math.sqrt(np.sum(np.abs(field(0.1).values) ** 2) * 10.0 / 4096)
    assert abs(rep.l2 - l2) <= 1e-14 * l2


def test_scaled_norm_of_an_oscillation():
    # |d f| ~ |f| / eps, so H^1_eps ~ 2 |f| / eps
    ratios = []
    for eps in (2.0**-3, 2.0**-5, 2.0**-7):
        rep = grid_norms(field(eps, n=8192))
        ratios.append(rep.hs_eps[1] / (2 * rep.l2 / eps))
    assert abs(ratios[-1] - 1) < 1e-3
    assert abs(ratios[0] - 1) > abs(ratios[1] - 1) > abs(ratios[2] - 1)


@given(st.integers(1, 9))
def test_scaled_norms_dominate_plain_ones(j):
    rep = grid_norms(field(2.0**-j, n=8192), s_max=2)
    for s in (0, 1, 2):
        assert rep.hs_eps[s] >= rep.hs[s] * (1 - 1e-14)


def test_spectral_derivative_matches_finite_differences():
    eps = 0.1
    f = field(eps, n=2048)
    h = f.grid.spacing[0]
    v = f.values
    fd = (-np.roll(v, -2) + 8 * np.roll(v, -1) - 8 * np.roll(v, 1) + np.roll(v, 2)) / (12 * h)
    sp = spectral_derivative(f, (1,))
    assert np.max(np.abs(sp - fd)) / np.max(np.abs(sp)) < 1e-6


def test_unresolved_field_is_rejected():
    rng = np.random.default_rng(0)
    f = field(0.1, n=256, f=lambda y: rng.normal(size=y.shape) + 0j)
    with pytest.raises(ResolutionError):
        grid_norms(f)


def test_fit_recovers_synthetic_rate():
    eps = np.array(EPS_SET)
    fit = fit_rate(eps, 3 * eps**2)
    assert abs(fit.slope - 2.0) <= 1e-12
    assert fit.residual <= 1e-12
    assert abs(fit.intercept - math.log(3)) <= 1e-12


def test_floor_guard_excludes_contaminated_points():
    eps = 2.0 ** -np.arange(4, 22, 2.0)
    err = 3 * eps**2 + 1e-12
    fit = fit_rate(eps, err, floor=1e-12)
    assert abs(fit.slope - 2.0) < 0.01
    assert list(fit.excluded) == [eps[-1]]
    assert abs(fit_rate(eps, err).slope - 2.0) > abs(fit.slope - 2.0)
    assert all("floor" in r for r in fit.excluded.values())
    with pytest.raises(RateError, match="floor guard"):
        fit_rate(eps, err, floor=1e-4)


def test_constant_error_has_zero_slope():
    assert fit_rate(EPS_SET, [0.7] * 6).slope == 0.0


def test_too_few_points():
    with pytest.raises(RateError):
        fit_rate([0.1, 0.05], [1.0, 0.5])
    with pytest.raises(RateError):
        fit_rate([0.1, 0.05, 0.025], [1.0, math.nan, 0.0])


@given(st.lists(st.floats(1e-8, 1e3), min_size=3, max_size=8), st.integers(-40, 40),
       st.floats(1e-6, 1e6))
def test_rescaling_errors_moves_only_the_intercept(errs, m, c):
    eps = EPS_SET[:len(errs)] + [2.0**-j for j in range(10, 10 + len(errs) - len(EPS_SET[:len(errs)]))]
    a = fit_rate(eps, errs)
    b = fit_rate(eps, [2.0**m * e for e in errs])
    assert a.slope == b.slope
    assert abs(b.intercept - a.intercept - m * math.log(2)) <= 1e-9 * max(1.0, abs(a.intercept))
    g = fit_rate(eps, [c * e for e in errs])
    assert abs(g.slope - a.slope) <= 1e-12 * max(1.0, abs(a.slope))


def test_semilog_fit_finds_exponential_decay():
    eps = np.array(EPS_SET)
    fit = fit_semilog(eps, 5 * np.exp(-0.3 / eps))
    assert abs(fit.slope - 0.3) <= 1e-10
    with pytest.raises(RateError):
        fit_semilog([0.1, 0.2], [0.0, 1.0])


def test_targets_have_the_stated_tolerance():
    data = InitialData(focusing_quadratic(), gaussian_profile((0.0,), 1.0, 0.5), [-1], [1])
    t = targets_for(ProblemSpec("schrodinger", free_potential(), data, 1.0, 3))
    assert t["l2"] == 1.25 and t["h1"] == 0.25 and t["max_away_from_caustic"] == 1.75
    assert t["max_near_caustic"] == 0.75 and t["residual_l2"] == 2.25


def focusing_spec(T=0.5, order=1):
    data = InitialData(focusing_quadratic(), gaussian_profile((0.0,), 2.0, 0.5), [-2], [2])
    return ProblemSpec("schrodinger", free_potential(), data, T, order)


_SWEEP = {}


def small_sweep():
    if not _SWEEP:
        plan = MeasurementPlan(slices=(0.0, 0.5), probes_per_region=256)
        _SWEEP["sweep"] = epsilon_sweep(focusing_spec(), EPS_SET, plan)
    return _SWEEP["sweep"]


def test_sweep_away_errors_decrease():
    sw = small_sweep()
    assert not sw.failures
    eps, vals = sw.series("max_away_from_caustic")
    assert eps == sorted(EPS_SET)
    assert all(a < b for a, b in zip(vals, vals[1:]))
    out = evaluate_targets(sw, ["max_away_from_caustic", "l2"])
    assert out["max_away_from_caustic"]["pass"] and out["l2"]["pass"]


def test_sweep_rows_satisfy_norm_identities():
    for rep in small_sweep().reports:
        assert rep.hs[0] == rep.l2
        assert rep.hs_eps[1] >= rep.hs[1]


def test_single_epsilon_gives_one_row_per_slice():
    plan = MeasurementPlan(slices=(0.0, 0.5), probes_per_region=64)
    sw = epsilon_sweep(focusing_spec(), [2.0**-4], plan)
    assert len(sw.rows) == 2 and list(sw.per_eps) == [2.0**-4]


def test_duplicate_epsilons_give_identical_rows():
    plan = MeasurementPlan(slices=(0.0, 0.5), probes_per_region=64)
    sw = epsilon_sweep(focusing_spec(), [2.0**-5, 2.0**-5], plan)
    a, b = sw.rows[:2], sw.rows[2:]
    for ra, rb in zip(a, b):
        assert {k: v for k, v in ra.items() if k != "runtime_sec"} == \
            {k: v for k, v in rb.items() if k != "runtime_sec"}


def test_failed_epsilon_is_recorded_and_sweep_continues(monkeypatch):
    import gbeams.analysis as an

    real = an.solve_schrodinger

    def flaky(spec, grid, eps, *a, **kw):
        if eps == 2.0**-4:
            raise ResolutionError("injected")
        return real(spec, grid, eps, *a, **kw)

    monkeypatch.setattr(an, "solve_schrodinger", flaky)
    plan = MeasurementPlan(slices=(0.0, 0.5), probes_per_region=64)
    sw = epsilon_sweep(focusing_spec(), [2.0**-4, 2.0**-5], plan)
    assert "injected" in sw.failures[2.0**-4]
    assert list(sw.per_eps) == [2.0**-5]


def test_unknown_target_is_rejected():
    with pytest.raises(KeyError):
        evaluate_targets(small_sweep(), ["no_such_target"])


@given(st.floats(-2.0, 2.0), st.floats(0.1, 3.0), st.sampled_from([(1,), (3,), (5,)]))
def test_odd_gaussian_moments_vanish_1d(re, im, alpha):
    val, scale = gaussian_moment([[re + 1j * im]], alpha, 1.0, 0.05)
    assert abs(val) <= 1e-10 * scale


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(0.2, 2.0),
       st.sampled_from([(1, 0), (0, 1), (2, 1), (1, 2), (3, 0)]))
def test_odd_gaussian_moments_vanish_2d(a, b, im, alpha):
    M = np.array([[a, b], [b, -a]]) + 1j * im * np.eye(2)
    val, scale = gaussian_moment(M, alpha, 1.0, 0.05, samples=65)
    assert abs(val) <= 1e-10 * scale


def test_oscillatory_integral_l2_is_epsilon_independent():
    spec = focusing_spec(T=0.5)
    y = np.linspace(-2.5, 2.5, 501)[:, None]
    norms = []
    for eps in EPS_SET[:4]:
        lat = build_lattice(spec, eps=eps)
        vals = oscillatory_integral(lat, lambda z: np.exp(-z[:, 0] ** 2), (0,), 0.5, y, eps)
        norms.append(math.sqrt(np.sum(np.abs(vals) ** 2) * (y[1, 0] - y[0, 0])))
    assert max(norms) < 2 * min(norms)
