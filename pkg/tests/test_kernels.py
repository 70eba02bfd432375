import math
import os
import subprocess
import sys

import numpy as np
import pytest

from gbeams import _kernels
from gbeams.jets import _mul_table, monomials
from gbeams.problems import InitialData, ProblemSpec, focusing_quadratic, free_potential, gaussian_profile
from gbeams.superposition import CutoffSpec, beam_coefficients, build_lattice, skip_radius

pytestmark = pytest.mark.skipif(_kernels.numba is None, reason="numba not installed")


def beams(order=3, eps=2.0**-6):
    data = InitialData(focusing_quadratic(1.0, 0.3), gaussian_profile((0.0,), 2.0, 0.5), [-2], [2])
    lat = build_lattice(ProblemSpec("schrodinger", free_potential(), data, 0.8, order), eps=eps)
    x, Phi, A = beam_coefficients(lat.trajectories["schrodinger"], 0.8, eps)
    return lat, x, Phi, A


@pytest.mark.parametrize("eta", [math.inf, 0.3])
def test_superpose_backends_agree(eta):
    eps = 2.0**-6
    lat, x, Phi, A = beams(eps=eps)
    w = lat.weights[lat.active]
    y = np.linspace(-2.5, 2.5, 400)[:, None]
    rskip = skip_radius(Phi, eps, CutoffSpec(eta))
    args = (y, x, w, Phi.coeffs, Phi.exponents, A.coeffs, A.exponents, eps, eta, rskip)
    a = _kernels.superpose(*args, use_numba=True)
    b = _kernels.superpose(*args, use_numba=False)
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))


def test_superpose_without_beams_is_zero():
    out = _kernels.superpose(np.zeros((3, 1)), np.zeros((0, 1)), np.zeros(0), np.zeros((0, 3)),
                             np.array([[0], [1], [2]]), np.zeros((0, 1)), np.array([[0]]), 0.1, math.inf,
                             np.zeros(0), use_numba=True)
    assert np.array_equal(out, np.zeros(3))


def test_trig_backends_agree():
    rng = np.random.default_rng(5)
    coef = rng.normal(size=64) + 1j * rng.normal(size=64)
    xi = 2 * np.pi * np.fft.fftfreq(64, d=0.1)
    pts = rng.uniform(-1, 5, 300)
    a = _kernels.trig_interp(coef, xi, -1.0, pts, use_numba=True)
    b = _kernels.trig_interp(coef, xi, -1.0, pts, use_numba=False)
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))


@pytest.mark.parametrize("dim,degree", [(1, 4), (2, 3), (2, 5)])
def test_jet_product_backends_agree(dim, degree):
    rng = np.random.default_rng(dim * 10 + degree)
    m = len(monomials(dim, degree))
    a = rng.normal(size=(7, m)) + 1j * rng.normal(size=(7, m))
    b = rng.normal(size=(7, m)) + 1j * rng.normal(size=(7, m))
    tab = _mul_table(dim, degree)
    x = _kernels.jet_product(a, b, *tab, use_numba=True)
    y = _kernels.jet_product(a, b, *tab, use_numba=False)
    assert np.max(np.abs(x - y)) <= 1e-13


def test_environment_switch_selects_numpy():
    env = dict(os.environ, GBEAMS_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from gbeams import _kernels; print(_kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
