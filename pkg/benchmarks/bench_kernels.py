"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import math
import time

import numpy as np

from gbeams import _kernels
from gbeams.jets import _mul_table, monomials
from gbeams.problems import InitialData, ProblemSpec, focusing_quadratic, free_potential, gaussian_profile
from gbeams.superposition import CutoffSpec, beam_coefficients, build_lattice, skip_radius


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def superpose_case(order=3, eps=2.0**-8):
    data = InitialData(focusing_quadratic(1.0), gaussian_profile((0.0,), 4.3, 0.5), [-4.3], [4.3])
    lat = build_lattice(ProblemSpec("schrodinger", free_potential(), data, 0.5, order), eps=eps)
    x, Phi, A = beam_coefficients(lat.trajectories["schrodinger"], 0.5, eps)
    w = lat.weights[lat.active]
    y = np.linspace(-6, 6, 8192)[:, None]
    rskip = skip_radius(Phi, eps, CutoffSpec(math.inf))
    args = (y, x, w, Phi.coeffs, Phi.exponents, A.coeffs, A.exponents, eps, math.inf, rskip)
    return f"superpose ({len(x)} beams x {len(y)} points, k={order})", \
        lambda use: _kernels.superpose(*args, use_numba=use)


def trig_case():
    rng = np.random.default_rng(0)
    coef = rng.normal(size=4096) + 1j * rng.normal(size=4096)
    xi = 2 * np.pi * np.fft.fftfreq(4096, d=0.01)
    pts = rng.uniform(-20, 20, 2048)
    return "trig_interp (4096 modes x 2048 points)", \
        lambda use: _kernels.trig_interp(coef, xi, -20.0, pts, use_numba=use)


def jet_case(dim=2, degree=5, batch=20000):
    rng = np.random.default_rng(1)
    m = len(monomials(dim, degree))
    a = rng.normal(size=(batch, m)) + 1j * rng.normal(size=(batch, m))
    b = rng.normal(size=(batch, m)) + 1j * rng.normal(size=(batch, m))
    tab = _mul_table(dim, degree)
    return f"jet_product (n={dim}, degree {degree}, batch {batch})", \
        lambda use: _kernels.jet_product(a, b, *tab, use_numba=use)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels.numba is None:
        print("numba is not installed; nothing to compare")
        return 1
    print(f"{'kernel':55s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speed-up':>9s}")
    for name, fn in (superpose_case(), trig_case(), jet_case()):
        tn = best_of(lambda: fn(True), args.repeat)
        tp = best_of(lambda: fn(False), args.repeat)
        print(f"{name:55s} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
