"""Lattice Fourier transform, momentum projections and continuum-limit diagnostics.

Conventions: F^h phi(xi) = (h/2pi)^{d/2} sum_n exp(i h n.xi) phi(hn) on the
Brillouin zone [-pi/h, pi/h)^d, and F theta(xi) = (2pi)^{-d/2} int exp(i x.xi) theta(x) dx.
With these, h^{d/2} F^h theta^h is a Riemann sum for F theta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .funcalc import DENSE_LIMIT
from .hamiltonian import Hamiltonian
from .lattice import LatticeField, LatticeSpec


@dataclass(frozen=True)
class MomentumGrid:
    """Midpoint grid with ``resolution`` nodes per axis on [-pi/h, pi/h)^d."""

    spec: LatticeSpec
    resolution: int = 64

    @property
    def step(self) -> float:
        return 2.0 * np.pi / (self.spec.h * self.resolution)

    @property
    def nodes(self) -> np.ndarray:
        return -np.pi / self.spec.h + (np.arange(self.resolution) + 0.5) * self.step

    @property
    def weights(self) -> np.ndarray:
        """Tensor quadrature weights, shape (resolution,)*d; they sum to (2pi/h)^d."""
        return np.full((self.resolution,) * self.spec.d, self.step**self.spec.d)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.nodes] * self.spec.d), indexing="ij")
        return np.stack(mesh, axis=-1)


def lattice_fourier(spec: LatticeSpec, field: LatticeField, grid: MomentumGrid) -> np.ndarray:
    """F^h of a block field at every grid node; shape (resolution,)*d."""
    vals = np.asarray(field.values, dtype=complex)
    if vals.ndim != spec.d:
        raise ValueError(f"field has {vals.ndim} axes, lattice has {spec.d}")
    xi = grid.nodes
    out = vals
    # contract the leading site axis each time; momentum axes accumulate at the end
    for ax in range(spec.d):
        n = field.origin[ax] + np.arange(vals.shape[ax])
        E = np.exp(1j * spec.h * np.outer(n, xi))
        out = np.tensordot(out, E, axes=([0], [0]))
    return (spec.h / (2.0 * np.pi)) ** (spec.d / 2.0) * out


class TensorBump:
    """theta(x) = prod_j phi(x_j / radius) with phi(t) = exp(-1/(1 - t^2)) on |t| < 1."""

    def __init__(self, d: int, radius: float = 1.0, center=None):
        self.d = d
        self.radius = float(radius)
        self.center = np.zeros(d) if center is None else np.asarray(center, dtype=float)

    @staticmethod
    def _phi(t):
        t = np.asarray(t, dtype=float)
        inside = np.abs(t) < 1.0
        out = np.zeros(t.shape)
        out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
        return out

    def factor(self, j, x):
        return self._phi((np.asarray(x) - self.center[j]) / self.radius)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.prod([self.factor(j, x[..., j]) for j in range(self.d)], axis=0)

    @property
    def support(self):
        return self.center - self.radius, self.center + self.radius


class ZeroTheta:
    def __init__(self, d: int):
        self.d = d
        self.support = (np.zeros(d), np.zeros(d))

    def __call__(self, x):
        return np.zeros(np.asarray(x).shape[:-1])


def continuum_fourier(theta, xi, tol: float = 1e-10) -> complex:
    """F theta(xi) by adaptive quadrature over the support box."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    lo, hi = (np.asarray(b, dtype=float) for b in theta.support)
    d = len(xi)
    if np.all(hi <= lo):
        return 0j
    opts = dict(epsabs=tol, epsrel=tol, limit=200)
    if hasattr(theta, "factor"):
        val = 1.0 + 0j
        for j in range(d):
            re = integrate.quad(lambda x: float(theta.factor(j, x)) * np.cos(x * xi[j]), lo[j], hi[j], **opts)[0]
            im = integrate.quad(lambda x: float(theta.factor(j, x)) * np.sin(x * xi[j]), lo[j], hi[j], **opts)[0]
            val *= re + 1j * im
        return val / (2.0 * np.pi) ** (d / 2.0)
    ranges = list(zip(lo, hi))
    nq = dict(epsabs=tol, epsrel=tol, limit=100)

    def part(trig):
        return integrate.nquad(lambda *x: float(theta(np.array(x))) * trig(np.dot(x, xi)), ranges, opts=nq)[0]

    return (part(np.cos) + 1j * part(np.sin)) / (2.0 * np.pi) ** (d / 2.0)


def sampled_field(theta, spec: LatticeSpec) -> LatticeField:
    """theta^h(hn) = theta(hn) on the sites whose positions lie in the support box."""
    lo, hi = (np.asarray(b, dtype=float) for b in theta.support)
    h = spec.h
    kmin = np.ceil(lo / h - 1e-9).astype(int)
    kmax = np.floor(hi / h + 1e-9).astype(int)
    axes = [h * np.arange(a, b + 1) for a, b in zip(kmin, kmax)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return LatticeField(theta(pts), tuple(kmin))


def discrete_transform(theta, spec: LatticeSpec, xi) -> complex:
    """h^{d/2} F^h theta^h at a single momentum."""
    fld = sampled_field(theta, spec)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.asarray(fld.values, dtype=complex)
    for ax in range(spec.d):
        n = fld.origin[ax] + np.arange(fld.values.shape[ax])
        out = np.tensordot(out, np.exp(1j * spec.h * n * xi[ax]), axes=([0], [0]))
    return complex((spec.h**2 / (2.0 * np.pi)) ** (spec.d / 2.0) * out)


def riemann_transform_gap(theta, h: float, xi, tol: float = 1e-10) -> float:
    """|h^{d/2} (F^h theta^h)(xi) - (F theta)(xi)|."""
    spec = LatticeSpec(1, theta.d - 1, h)
    return abs(discrete_transform(theta, spec, xi) - continuum_fourier(theta, xi, tol))


def transform_decay_sup(theta, h: float, resolution: int = 64, power: int = 4) -> float:
    """Grid sup of h^{d/2} |xi|^power |F^h theta^h(xi)| over the Brillouin zone."""
    spec = LatticeSpec(1, theta.d - 1, h)
    grid = MomentumGrid(spec, resolution)
    F = lattice_fourier(spec, sampled_field(theta, spec), grid)
    r = np.linalg.norm(grid.points(), axis=-1)
    return float(np.max(h ** (spec.d / 2.0) * r**power * np.abs(F)))


def _momenta(n: int, h: float) -> np.ndarray:
    # fft index m pairs with exp(-2 pi i m k / n) = exp(i h k xi) for xi = -2 pi m / (n h), folded into the zone
    xi = -2.0 * np.pi * np.arange(n) / (n * h)
    width = 2.0 * np.pi / h
    return np.mod(xi + np.pi / h, width) - np.pi / h


def _mask(shape, h, T):
    m = np.ones(shape, dtype=bool)
    for ax, n in enumerate(shape):
        xi = _momenta(n, h)
        keep = (xi >= -T) & (xi < T)
        s = [1] * len(shape)
        s[ax] = n
        m = m & keep.reshape(s)
    return m


def _project_array(vals, h, T, d):
    axes = tuple(range(d))
    c = np.fft.fftn(vals, axes=axes)
    mask = _mask(vals.shape[:d], h, T)
    c = c * mask.reshape(mask.shape + (1,) * (vals.ndim - d))
    return np.fft.ifftn(c, axes=axes)


def project(spec: LatticeSpec, field: LatticeField, T: float) -> LatticeField:
    """P^h_T: keep the momentum components in [-T, T)^d of a field on a periodic box."""
    if not all(field.periodic):
        raise ValueError("projection needs a field on a fully periodic box")
    vals = np.asarray(field.values)
    if vals.ndim != spec.d:
        raise ValueError(f"field has {vals.ndim} axes, lattice has {spec.d}")
    if T >= np.pi / spec.h:
        return LatticeField(vals.copy(), field.origin, field.periodic)
    out = _project_array(vals, spec.h, T, spec.d)
    if np.isrealobj(vals) and np.max(np.abs(out.imag), initial=0.0) <= 1e-12 * max(1.0, np.max(np.abs(out), initial=0.0)):
        out = out.real
    return LatticeField(out, field.origin, field.periodic)


def trace_leakage(ham: Hamiltonian, f, theta, Ts) -> np.ndarray:
    """|tr P_T Theta f(H) Theta - tr Theta f(H) Theta| for each T, on a periodic box (dense)."""
    if not all(ham.periodic):
        raise ValueError("trace leakage needs a fully periodic box")
    if ham.n > DENSE_LIMIT:
        raise ValueError(f"dense path refused: {ham.n} sites exceeds the {DENSE_LIMIT}-site limit")
    w, U = ham.eigh
    th = theta(ham.spec.h * ham.sites.sites.astype(float))
    A = (th[:, None] * U) @ (f(w)[:, None] * (U.T * th[None, :]))
    base = np.trace(A)
    out = []
    for T in Ts:
        if T >= np.pi / ham.spec.h:
            out.append(0.0)
            continue
        PA = _project_array(A.reshape(ham.shape + (ham.n,)), ham.spec.h, T, ham.spec.d).reshape(ham.n, ham.n)
        out.append(abs(np.trace(PA) - base))
    return np.array(out)
