"""Functional calculus f(H^h) on finite boxes.

Two interchangeable paths compute diagonal entries of f(H): a dense
eigendecomposition (the oracle) and a Chebyshev expansion evaluated by the
stencil kernels (the fast path). The free-lattice diagonal of f(-Laplacian^h)
is available exactly through Brillouin-zone quadrature, and f can be
approximated by resolvent polynomials.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from numpy.polynomial import Chebyshev
from numpy.polynomial import chebyshev as C

from . import kernels
from .hamiltonian import Hamiltonian
from .lattice import LatticeSpec
from .potential import smoothstep

TEST_FUNCTION_KINDS = ("plateau-bump", "gaussian-bump", "polynomial-bump")
MAX_DEGREE = 16384
DENSE_LIMIT = 5000
# columns per kernel call; fixed so results never depend on the thread count
CHUNK = 32


@dataclass(frozen=True)
class TestFunction:
    """Smooth f with support [a, b].

    All kinds share the window S((x - a)/taper) S((b - x)/taper) built from the
    C-infinity step S; it equals 1 on [a + taper, b - taper].

    * ``plateau-bump``: the window itself.
    * ``gaussian-bump``: exp(-(x - center)^2 / (2 width^2)) times the window.
    * ``polynomial-bump``: polynomial with ``coeffs`` (increasing powers) times the window.
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    a: float
    b: float
    taper: float = 1.0
    center: float = 0.0
    width: float = 1.0
    coeffs: tuple = ()

    def __post_init__(self):
        if self.kind not in TEST_FUNCTION_KINDS:
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if not self.b > self.a:
            raise ValueError("support must satisfy a < b")
        if self.taper <= 0 or 2 * self.taper > self.b - self.a:
            raise ValueError("taper must be positive and at most half the support length")
        if self.width <= 0:
            raise ValueError("width must be positive")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def support(self) -> tuple:
        return (self.a, self.b)

    @property
    def plateau(self):
        if self.kind != "plateau-bump":
            return None
        return (self.a + self.taper, self.b - self.taper)

    @property
    def scale(self) -> float:
        """Length scale on which f varies; sets the default expansion degree."""
        if self.kind == "gaussian-bump":
            return min(self.width, self.taper)
        return self.taper

    def window(self, x):
        x = np.asarray(x, dtype=float)
        return smoothstep((x - self.a) / self.taper) * smoothstep((self.b - x) / self.taper)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        w = self.window(x)
        if self.kind == "gaussian-bump":
            return np.exp(-((x - self.center) ** 2) / (2.0 * self.width**2)) * w
        if self.kind == "polynomial-bump":
            return np.polynomial.polynomial.polyval(x, self.coeffs) * w if self.coeffs else 0.0 * w
        return w

    def to_record(self) -> dict:
        rec = {"kind": self.kind, "a": self.a, "b": self.b, "taper": self.taper}
        if self.kind == "gaussian-bump":
            rec.update(center=self.center, width=self.width)
        if self.kind == "polynomial-bump":
            rec["coeffs"] = list(self.coeffs)
        return rec


def probe_function() -> TestFunction:
    """Gaussian bump centred at 2 with width 1.5 on [-3, 7]."""
    return TestFunction("gaussian-bump", -3.0, 7.0, taper=2.0, center=2.0, width=1.5)


def broad_function() -> TestFunction:
    """Wide Gaussian bump centred at 3 with width 4 on [-8, 14]."""
    return TestFunction("gaussian-bump", -8.0, 14.0, taper=4.0, center=3.0, width=4.0)


def jackson_kernel(n_coeffs: int) -> np.ndarray:
    """Jackson damping factors g_0..g_{N-1} for N = n_coeffs."""
    N = n_coeffs
    n = np.arange(N)
    q = np.pi / (N + 1)
    return ((N - n + 1) * np.cos(q * n) + np.sin(q * n) / np.tan(q)) / (N + 1)


@dataclass
class ChebExpansion:
    """Chebyshev series of f on [lo, hi], coefficients c_0..c_M (damping applied)."""

    interval: tuple
    coeffs: np.ndarray
    damping: str
    sup_error: float

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        lo, hi = self.interval
        t = (2.0 * np.asarray(x, dtype=float) - (hi + lo)) / (hi - lo)
        return C.chebval(t, self.coeffs)


def cheb_coeffs(f, interval, M: int, damping: str = "none", n_check: int = 1000) -> ChebExpansion:
    """Chebyshev coefficients of f on ``interval`` by quadrature on 2(M+1) Chebyshev-Gauss nodes."""
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        raise ValueError(f"degenerate interval [{lo}, {hi}]")
    if M < 8:
        raise ValueError("expansion degree must be >= 8")
    if damping not in ("none", "jackson"):
        raise ValueError(f"unknown damping {damping!r}")
    K = 2 * (M + 1)
    t = np.cos(np.pi * (np.arange(K) + 0.5) / K)
    vals = np.asarray(f(0.5 * (hi - lo) * t + 0.5 * (hi + lo)), dtype=float) * np.ones(K)
    c = sfft.dct(vals, type=2) / K
    c = c[: M + 1]
    c[0] *= 0.5
    if damping == "jackson":
        c = c * jackson_kernel(M + 1)
    grid = np.linspace(lo, hi, n_check)
    exp = ChebExpansion((lo, hi), c, damping, 0.0)
    exp.sup_error = float(np.max(np.abs(exp(grid) - f(grid))))
    return exp


def default_degree(ham: Hamiltonian, f: TestFunction) -> int:
    lo, hi = ham.spectral_interval
    return int(min(MAX_DEGREE, max(8, math.ceil(40.0 * (hi - lo) / f.scale))))


def ham_expansion(ham: Hamiltonian, f, degree=None, damping="none", tol=1e-4) -> ChebExpansion:
    """Expansion of f on the rescaling interval of ``ham``; refuses if the reconstruction error exceeds ``tol``."""
    M = degree or default_degree(ham, f)
    _, _, a, b = ham.rescaled()
    exp = cheb_coeffs(f, (b - a, b + a), M, damping)
    if exp.sup_error > tol:
        raise ValueError(f"Chebyshev degree {M} too small: reconstruction error {exp.sup_error:.3e} > {tol:.1e}")
    return exp


def _check_dense(ham: Hamiltonian):
    if ham.n > DENSE_LIMIT:
        raise ValueError(f"dense path refused: {ham.n} sites exceeds the {DENSE_LIMIT}-site limit")


def f_of_H_column(ham: Hamiltonian, f, k, method: str = "dense", degree=None, damping="none", tol=1e-4) -> np.ndarray:
    """The column f(H) delta_k as a site-indexed vector."""
    i = ham.site_index(k)
    if method == "dense":
        _check_dense(ham)
        w, U = ham.eigh
        return U @ (f(w) * U[i])
    if method == "kpm":
        exp = ham_expansion(ham, f, degree, damping, tol)
        diag, hop, _, _ = ham.rescaled()
        e = np.zeros(ham.n)
        e[i] = 1.0
        return kernels.cheb_series(ham.nbr, diag, hop, e, exp.coeffs)
    raise ValueError(f"unknown method {method!r}")


def _kpm_diagonal(ham, exp, idx, threads):
    diag, hop, _, _ = ham.rescaled()
    chunks = [idx[s: s + CHUNK] for s in range(0, len(idx), CHUNK)]

    def work(chunk):
        x0 = np.zeros((ham.n, len(chunk)))
        x0[chunk, np.arange(len(chunk))] = 1.0
        mu = kernels.cheb_moments(ham.nbr, diag, hop, x0, len(exp.coeffs))
        return exp.coeffs @ mu

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    return np.concatenate(parts) if parts else np.zeros(0)


def diagonal(ham: Hamiltonian, f, indices=None, method="dense", degree=None, damping="none",
             tol=1e-4, threads=1) -> np.ndarray:
    """Diagonal entries <f(H) delta_i, delta_i> at dense indices (all sites by default)."""
    idx = np.arange(ham.n) if indices is None else np.asarray(indices, dtype=np.int64)
    if method == "dense":
        _check_dense(ham)
        w, U = ham.eigh
        return (U[idx] ** 2) @ f(w)
    if method == "kpm":
        exp = ham_expansion(ham, f, degree, damping, tol)
        return _kpm_diagonal(ham, exp, idx, max(1, int(threads)))
    raise ValueError(f"unknown method {method!r}")


@lru_cache(maxsize=256)
def _free_diag_at(d: int, h: float, f, Q: int) -> float:
    x, w = np.polynomial.legendre.leggauss(Q)
    t = 0.5 * np.pi * (x + 1.0)
    w = 0.5 * np.pi * w
    e = (2.0 - 2.0 * np.cos(t)) / h**2
    E, W = e, w
    for _ in range(d - 1):
        E = np.add.outer(E, e).ravel()
        W = np.multiply.outer(W, w).ravel()
    return float(np.dot(W, f(E)) / np.pi**d)


def free_diagonal(spec: LatticeSpec, f, Q: int = 64, tol: float = 1e-9, max_Q: int = 2048) -> float:
    """<f(-Laplacian^h) delta_hk, delta_hk> on the infinite lattice.

    Computed as (h/2pi)^d times the Brillouin-zone integral of f(theta_h), using
    tensor Gauss-Legendre quadrature (the integrand is even in every axis). Q is
    doubled until successive values differ by less than ``tol``.
    """
    if Q < 16:
        raise ValueError("quadrature order must be >= 16 per axis")
    prev = _free_diag_at(spec.d, spec.h, f, Q)
    while Q < max_Q:
        Q *= 2
        cur = _free_diag_at(spec.d, spec.h, f, Q)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    return prev


@dataclass
class ResolventPolynomial:
    """f_eps(lam) = (lam + lambda0)^{-m0} g((lam + lambda0)^{-1})."""

    g: Chebyshev
    lambda0: float
    m0: int
    error: float
    degree: int

    def __call__(self, lam):
        s = 1.0 / (np.asarray(lam, dtype=float) + self.lambda0)
        return s**self.m0 * self.g(s)


def resolvent_poly_approx(f, lambda0: float, m0: int, eps: float, d: int = None,
                          max_degree: int = 1024, n_check: int = 20001) -> ResolventPolynomial:
    """Polynomial g with sup_{lam >= -lambda0/2} |(lam + lambda0)^m0 f(lam) - g(1/(lam + lambda0))| < eps.

    g interpolates F(s) = s^{-m0} f(1/s - lambda0) at Chebyshev points of
    (0, 2/lambda0]; the degree doubles from 8 until the grid error drops below eps.
    """
    if lambda0 <= 0:
        raise ValueError("lambda0 must be positive")
    if d is not None and m0 < 1 + d / 2:
        raise ValueError(f"m0 = {m0} is below 1 + d/2 = {1 + d / 2}")
    smax = 2.0 / lambda0

    def F(s):
        s = np.asarray(s, dtype=float)
        return s ** (-m0) * f(1.0 / s - lambda0)

    s_check = np.linspace(smax / n_check, smax, n_check)
    F_check = F(s_check)
    deg = 8
    while True:
        g = Chebyshev.interpolate(F, deg, domain=[0.0, smax])
        err = float(np.max(np.abs(F_check - g(s_check))))
        if err < eps:
            return ResolventPolynomial(g, float(lambda0), int(m0), err, deg)
        if deg >= max_degree:
            raise ValueError(f"eps = {eps} unreachable at degree {max_degree} (error {err:.3e})")
        deg *= 2
