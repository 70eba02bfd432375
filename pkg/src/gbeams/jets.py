"""Truncated multivariate Taylor polynomials ("jets").

A :class:`Jet` stores the monomial coefficients ``c_beta`` of a polynomial

    f(y) = sum_{|beta| <= d} c_beta y^beta

in ``dim`` variables, truncated at total degree ``d``.  Coefficients live in
the last axis of a complex array; any leading axes are batch axes, so one
``Jet`` object can hold the jets of many launch points at once and every
operation acts on the whole batch.

Monomials are laid out in graded-lexicographic order: all exponents of
degree 0, then degree 1, and so on; within a degree, lexicographically
descending exponent tuples.
"""
from __future__ import annotations

import functools
import itertools
import math
from typing import Callable, Sequence

import numpy as np

from . import _kernels


class JetError(ValueError):
    """Raised for invalid jet operations (shape mismatch, singular series)."""


@functools.lru_cache(maxsize=None)
def monomials(dim: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """Exponent tuples of all monomials of total degree <= ``degree``."""
    out = []
    for g in range(degree + 1):
        block = [b for b in itertools.product(range(g, -1, -1), repeat=dim) if sum(b) == g]
        out.extend(block)
    return tuple(out)


@functools.lru_cache(maxsize=None)
def _index(dim: int, degree: int) -> dict[tuple[int, ...], int]:
    return {b: i for i, b in enumerate(monomials(dim, degree))}


def ncoef(dim: int, degree: int) -> int:
    return math.comb(dim + degree, dim)


@functools.lru_cache(maxsize=None)
def _exponent_array(dim: int, degree: int) -> np.ndarray:
    return np.array(monomials(dim, degree), dtype=np.int64).reshape(-1, dim)


@functools.lru_cache(maxsize=None)
def _mul_table(dim: int, degree: int):
    """Pairs (i, j) whose product lands on monomial k, grouped by k."""
    mons = monomials(dim, degree)
    index = _index(dim, degree)
    pairs = []
    for i, a in enumerate(mons):
        for j, b in enumerate(mons):
            s = tuple(x + y for x, y in zip(a, b))
            if sum(s) <= degree:
                pairs.append((index[s], i, j))
    pairs.sort()
    arr = np.array(pairs, dtype=np.int64)
    k, left, right = arr[:, 0], arr[:, 1], arr[:, 2]
    starts = np.flatnonzero(np.r_[True, k[1:] != k[:-1]])
    return left, right, starts


@functools.lru_cache(maxsize=None)
def _diff_table(dim: int, degree: int, axis: int):
    lower = monomials(dim, degree - 1)
    index = _index(dim, degree)
    src, fac = [], []
    for b in lower:
        up = list(b)
        up[axis] += 1
        src.append(index[tuple(up)])
        fac.append(up[axis])
    return np.array(src, dtype=np.int64), np.array(fac, dtype=float)


@functools.lru_cache(maxsize=None)
def _resize_table(dim: int, old: int, new: int):
    """Positions of the first min(old, new)-degree block in both layouts."""
    m = ncoef(dim, min(old, new))
    return np.arange(m)


@functools.lru_cache(maxsize=None)
def _embed_table(dim: int, degree: int, new_dim: int, axes: tuple[int, ...]):
    index = _index(new_dim, degree)
    dst = []
    for b in monomials(dim, degree):
        full = [0] * new_dim
        for a, e in zip(axes, b):
            full[a] = e
        dst.append(index[tuple(full)])
    return np.array(dst, dtype=np.int64)


@functools.lru_cache(maxsize=None)
def _slice_table(dim: int, degree: int, axis: int, power: int):
    """Coefficients of ``s^power`` (s = variable ``axis``) as a jet in the rest."""
    rest = dim - 1
    sub = monomials(rest, degree - power)
    index = _index(dim, degree)
    src = []
    for b in sub:
        full = list(b[:axis]) + [power] + list(b[axis:])
        src.append(index[tuple(full)])
    return np.array(src, dtype=np.int64)


class Jet:
    """Batched truncated Taylor polynomial with complex coefficients."""

    __slots__ = ("coeffs", "dim", "degree")
    __array_priority__ = 100  # make ndarray * Jet defer to Jet.__rmul__

    def __init__(self, coeffs, dim: int, degree: int):
        coeffs = np.asarray(coeffs, dtype=complex)
        if degree < 0:
            raise JetError(f"degree must be >= 0, got {degree}")
        if coeffs.shape[-1:] != (ncoef(dim, degree),):
            raise JetError(
                f"expected trailing axis of length {ncoef(dim, degree)} for "
                f"dim={dim}, degree={degree}; got shape {coeffs.shape}"
            )
        self.coeffs = coeffs
        self.dim = dim
        self.degree = degree

    # -- construction ----------------------------------------------------
    @classmethod
    def zeros(cls, dim: int, degree: int, batch: Sequence[int] = ()) -> Jet:
        return cls(np.zeros(tuple(batch) + (ncoef(dim, degree),), complex), dim, degree)

    @classmethod
    def constant(cls, value, dim: int, degree: int) -> Jet:
        value = np.asarray(value, dtype=complex)
        out = cls.zeros(dim, degree, value.shape)
        out.coeffs[..., 0] = value
        return out

    @classmethod
    def variable(cls, axis: int, dim: int, degree: int, center=0.0) -> Jet:
        """The jet of ``center + y_axis``."""
        out = cls.constant(center, dim, degree)
        if degree >= 1:
            out.coeffs[..., 1 + axis] = 1.0
        return out

    @classmethod
    def from_dict(cls, terms: dict, dim: int, degree: int) -> Jet:
        out = cls.zeros(dim, degree)
        index = _index(dim, degree)
        for beta, c in terms.items():
            beta = tuple(beta)
            if sum(beta) <= degree:
                out.coeffs[index[beta]] = c
        return out

    def copy(self) -> Jet:
        return Jet(self.coeffs.copy(), self.dim, self.degree)

    # -- introspection ----------------------------------------------------
    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def exponents(self) -> np.ndarray:
        return _exponent_array(self.dim, self.degree)

    def coeff(self, beta: Sequence[int]):
        """Monomial coefficient of ``y^beta`` (zero if beyond the degree)."""
        beta = tuple(beta)
        if len(beta) != self.dim:
            raise JetError(f"multi-index {beta} has wrong length for dim={self.dim}")
        if sum(beta) > self.degree:
            return np.zeros(self.batch_shape, complex)
        return self.coeffs[..., _index(self.dim, self.degree)[beta]]

    def derivative(self, beta: Sequence[int]):
        """``d^beta f(0) = beta! * c_beta``."""
        return self.coeff(beta) * math.prod(math.factorial(b) for b in beta)

    def block(self, order: int) -> np.ndarray:
        """Coefficients of all monomials with |beta| == order, shape (..., m)."""
        lo = ncoef(self.dim, order - 1) if order > 0 else 0
        return self.coeffs[..., lo:ncoef(self.dim, order)]

    def gradient0(self) -> np.ndarray:
        """Gradient at y=0, shape (..., dim)."""
        return self.block(1) if self.degree >= 1 else np.zeros(self.batch_shape + (self.dim,), complex)

    def hessian0(self) -> np.ndarray:
        """Hessian at y=0, shape (..., dim, dim)."""
        H = np.zeros(self.batch_shape + (self.dim, self.dim), complex)
        if self.degree < 2:
            return H
        for a in range(self.dim):
            for b in range(a, self.dim):
                beta = [0] * self.dim
                beta[a] += 1
                beta[b] += 1
                H[..., a, b] = H[..., b, a] = self.derivative(beta)
        return H

    def __call__(self, y) -> np.ndarray:
        """Evaluate the polynomial at points ``y`` of shape (..., dim)."""
        y = np.asarray(y)
        powers = np.prod(y[..., None, :] ** self.exponents, axis=-1)
        return np.sum(self.coeffs * powers, axis=-1)

    def __repr__(self) -> str:
        return f"Jet(dim={self.dim}, degree={self.degree}, batch={self.batch_shape})"

    # -- shape manipulation -------------------------------------------------
    def with_degree(self, degree: int) -> Jet:
        """Truncate or zero-pad to a new degree."""
        if degree == self.degree:
            return self
        out = Jet.zeros(self.dim, degree, self.batch_shape)
        m = min(ncoef(self.dim, degree), ncoef(self.dim, self.degree))
        out.coeffs[..., :m] = self.coeffs[..., :m]
        return out

    def embed(self, new_dim: int, axes: Sequence[int]) -> Jet:
        """View as a jet in ``new_dim`` variables; variable i becomes ``axes[i]``."""
        dst = _embed_table(self.dim, self.degree, new_dim, tuple(axes))
        out = Jet.zeros(new_dim, self.degree, self.batch_shape)
        out.coeffs[..., dst] = self.coeffs
        return out

    def slice(self, axis: int, power: int) -> Jet:
        """Coefficient of ``y_axis^power`` as a jet in the remaining variables."""
        if self.dim < 2:
            raise JetError("slice needs at least two variables")
        if power > self.degree:
            raise JetError(f"power {power} exceeds degree {self.degree}")
        src = _slice_table(self.dim, self.degree, axis, power)
        return Jet(self.coeffs[..., src], self.dim - 1, self.degree - power)

    def set_slice(self, axis: int, power: int, part: Jet) -> None:
        """In-place inverse of :meth:`slice`; higher-degree parts of ``part`` are dropped."""
        src = _slice_table(self.dim, self.degree, axis, power)
        self.coeffs[..., src] = part.with_degree(self.degree - power).coeffs

    def take(self, index) -> Jet:
        """Select along the batch axes."""
        return Jet(self.coeffs[index], self.dim, self.degree)

    # -- arithmetic --------------------------------------------------------
    def _check(self, other: Jet) -> None:
        if other.dim != self.dim or other.degree != self.degree:
            raise JetError(
                f"jet mismatch: (dim={self.dim}, degree={self.degree}) vs "
                f"(dim={other.dim}, degree={other.degree})"
            )

    def _scalar(self, value):
        # scalar or per-batch array broadcast against the coefficient axis
        value = np.asarray(value)
        return value[..., None] if value.ndim else value

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.coeffs + other.coeffs, self.dim, self.degree)
        out = self.coeffs.copy() if np.ndim(other) == 0 else np.broadcast_to(
            self.coeffs, np.broadcast_shapes(self.coeffs.shape, np.shape(other) + (1,))
        ).copy()
        out[..., 0] += other
        return Jet(out, self.dim, self.degree)

    __radd__ = __add__

    def __neg__(self) -> Jet:
        return Jet(-self.coeffs, self.dim, self.degree)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(_truncated_product(self.coeffs, other.coeffs, self.dim, self.degree),
                       self.dim, self.degree)
        return Jet(self.coeffs * self._scalar(other), self.dim, self.degree)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.coeffs / self._scalar(other), self.dim, self.degree)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, m: int) -> Jet:
        if not isinstance(m, (int, np.integer)) or m < 0:
            raise JetError("only non-negative integer powers are supported")
        out = Jet.constant(np.ones(self.batch_shape), self.dim, self.degree)
        base = self
        while m:
            if m & 1:
                out = out * base
            m >>= 1
            if m:
                base = base * base
        return out

    def scale(self, factor) -> Jet:
        return self * factor

    def diff(self, axis: int) -> Jet:
        """Partial derivative along ``axis``; the result has degree d-1."""
        if not 0 <= axis < self.dim:
            raise JetError(f"axis {axis} out of range for dim={self.dim}")
        if self.degree < 1:
            raise JetError("cannot differentiate a degree-0 jet")
        src, fac = _diff_table(self.dim, self.degree, axis)
        return Jet(self.coeffs[..., src] * fac, self.dim, self.degree - 1)

    def grad(self, degree: int | None = None) -> list[Jet]:
        """Gradient components, padded back to ``degree`` (default: d-1)."""
        g = [self.diff(a) for a in range(self.dim)]
        if degree is not None:
            g = [c.with_degree(degree) for c in g]
        return g

    def laplacian(self, axes: Sequence[int] | None = None) -> Jet:
        axes = range(self.dim) if axes is None else axes
        out = None
        for a in axes:
            term = self.diff(a).diff(a)
            out = term if out is None else out + term
        return out

    # -- analytic functions via Taylor series at the constant term ------------
    def _series(self, derivs: Callable[[np.ndarray, int], list]) -> Jet:
        a0 = self.coeffs[..., 0]
        h = self.copy()
        h.coeffs[..., 0] = 0.0
        c = derivs(a0, self.degree)  # c[m] = f^(m)(a0)/m!
        out = Jet.constant(c[self.degree], self.dim, self.degree)
        for m in range(self.degree - 1, -1, -1):
            out = out * h + c[m]
        return out

    def sqrt(self) -> Jet:
        """Principal square root; requires a constant term off the branch cut."""
        a0 = self.coeffs[..., 0]
        mag = np.abs(a0)
        scale = max(float(np.max(mag, initial=0.0)), 1.0)
        if np.any(mag <= 1e-14 * scale):
            raise JetError("sqrt of a jet with vanishing constant term")
        if np.any((a0.real < 0) & (np.abs(a0.imag) <= 1e-14 * mag)):
            raise JetError("sqrt of a jet whose constant term lies on the branch cut")

        def derivs(a0, d):
            r = np.sqrt(a0)
            out, binom = [], 1.0
            for m in range(d + 1):
                out.append(binom * r / a0**m)
                binom *= (0.5 - m) / (m + 1)
            return out

        return self._series(derivs)

    def reciprocal(self) -> Jet:
        a0 = self.coeffs[..., 0]
        if np.any(a0 == 0):
            raise JetError("reciprocal of a jet with zero constant term")

        def derivs(a0, d):
            inv = 1.0 / a0
            return [(-1) ** m * inv ** (m + 1) for m in range(d + 1)]

        return self._series(derivs)

    def exp(self) -> Jet:
        def derivs(a0, d):
            e = np.exp(a0)
            return [e / math.factorial(m) for m in range(d + 1)]

        return self._series(derivs)

    def compose_shift(self, h) -> Jet:
        """Jet of ``y -> f(h + y)`` where ``f`` is this polynomial."""
        h = np.asarray(h, dtype=float)
        if h.shape[-1:] != (self.dim,):
            raise JetError(f"shift must have trailing length {self.dim}")
        Y = [Jet.variable(a, self.dim, self.degree, h[..., a]) for a in range(self.dim)]
        # powers[a][e] = Y_a^e
        powers = []
        for a in range(self.dim):
            row = [Jet.constant(np.ones(Y[a].batch_shape), self.dim, self.degree)]
            for _ in range(self.degree):
                row.append(row[-1] * Y[a])
            powers.append(row)
        out = Jet.zeros(self.dim, self.degree, np.broadcast_shapes(self.batch_shape, h.shape[:-1]))
        for idx, beta in enumerate(monomials(self.dim, self.degree)):
            term = powers[0][beta[0]]
            for a in range(1, self.dim):
                term = term * powers[a][beta[a]]
            out = out + term * self.coeffs[..., idx]
        return out


def _truncated_product(a: np.ndarray, b: np.ndarray, dim: int, degree: int) -> np.ndarray:
    left, right, starts = _mul_table(dim, degree)
    return _kernels.jet_product(a, b, left, right, starts)


def jet_arith(a: Jet, b, op: str) -> Jet:
    """Functional form of the ring operations: ``add``, ``sub``, ``mul``, ``scale``."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "scale":
        if isinstance(b, Jet):
            raise JetError("scale takes a scalar, not a jet")
        return a * b
    raise JetError(f"unknown jet operation {op!r}")


# Elementwise helpers that accept either plain arrays or jets, so that media and
# initial-data presets can be written once and evaluated both ways.
def jexp(v):
    return v.exp() if isinstance(v, Jet) else np.exp(v)


def jsin(v):
    if isinstance(v, Jet):
        return ((1j * v).exp() - (-1j * v).exp()) * (-0.5j)
    return np.sin(v)


def jcos(v):
    if isinstance(v, Jet):
        return ((1j * v).exp() + (-1j * v).exp()) * 0.5
    return np.cos(v)


def jsqrt(v):
    return v.sqrt() if isinstance(v, Jet) else np.sqrt(v)


def jrecip(v):
    return v.reciprocal() if isinstance(v, Jet) else 1.0 / v


def constant_term(v):
    return v.coeffs[..., 0] if isinstance(v, Jet) else np.asarray(v)
