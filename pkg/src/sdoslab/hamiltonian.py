"""Finite-box realizations of -Laplacian^h and H^h = -Laplacian^h + V^h.

The operator is stored matrix-free as a neighbour table plus a diagonal, which
is what the stencil kernels consume. Boundary handling per axis is either
Dirichlet truncation (absent neighbours read as zero) or periodic wrap-around.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .lattice import BoxSpec, LatticeField, LatticeSpec, SiteIndex, axis_range
from .potential import APPotential, sample_sites

BOUNDARY_CONDITIONS = ("dirichlet", "periodic-x1", "periodic")


def symbol(spec: LatticeSpec, xi) -> np.ndarray:
    """theta_h(xi) = sum_j (2 - 2 cos(h xi_j)) / h^2 for xi of shape (..., d)."""
    xi = np.asarray(xi, dtype=float)
    h = spec.h
    return np.sum(2.0 - 2.0 * np.cos(h * xi), axis=-1) / h**2


def _axis_eigs(n: int, periodic: bool, h: float) -> np.ndarray:
    # eigenvalues of the 1-d box Laplacian in DST-I (Dirichlet) or FFT (periodic) order
    if periodic:
        j = np.arange(n)
        return (2.0 - 2.0 * np.cos(2.0 * np.pi * j / n)) / h**2
    j = np.arange(1, n + 1)
    return (2.0 - 2.0 * np.cos(np.pi * j / (n + 1))) / h**2


class Hamiltonian:
    """H^h on a rectangular block of sites.

    Parameters
    ----------
    spec : LatticeSpec
    ranges : list of (kmin, kmax)
        Inclusive integer range per axis.
    periodic : tuple of bool
        Wrap-around per axis.
    v : ndarray, optional
        Potential values at the sites in lexicographic order (zero if omitted).
    interval : (float, float), optional
        Spectral enclosure; defaults to [-||v||, 4d/h^2 + ||v||].
    """

    def __init__(self, spec: LatticeSpec, ranges, periodic, v=None, interval=None, box=None, potential=None):
        self.spec = spec
        self.ranges = [tuple(int(a) for a in r) for r in ranges]
        self.periodic = tuple(bool(p) for p in periodic)
        self.box = box
        self.potential = potential
        if len(self.ranges) != spec.d or len(self.periodic) != spec.d:
            raise ValueError("ranges/periodic must have one entry per axis")
        self.shape = tuple(b - a + 1 for a, b in self.ranges)
        if min(self.shape) < 1:
            raise ValueError("box contains no sites")
        self.n = int(np.prod(self.shape))
        self.sites = SiteIndex.from_ranges(self.ranges)
        self.v = np.zeros(self.n) if v is None else np.ascontiguousarray(v, dtype=float)
        if self.v.shape != (self.n,) or not np.all(np.isfinite(self.v)):
            raise ValueError("potential values must be finite, one per site")
        h, d = spec.h, spec.d
        self.hop = -1.0 / h**2
        self.diag = self.v + 2.0 * d / h**2
        self.vnorm = float(np.max(np.abs(self.v))) if self.n else 0.0
        if interval is None:
            interval = (-self.vnorm, 4.0 * d / h**2 + self.vnorm)
        self.spectral_interval = (float(interval[0]), float(interval[1]))
        self.nbr = self._neighbours()
        if all(self.periodic):
            self.bc = "periodic"
        elif not any(self.periodic):
            self.bc = "dirichlet"
        elif all(self.periodic[: spec.d1]) and not any(self.periodic[spec.d1:]):
            self.bc = "periodic-x1"
        else:
            self.bc = "mixed"

    def _neighbours(self) -> np.ndarray:
        idx = np.arange(self.n, dtype=np.int64).reshape(self.shape)
        cols = []
        for ax, per in enumerate(self.periodic):
            for step in (1, -1):
                nb = np.roll(idx, -step, axis=ax)
                if not per:
                    edge = [slice(None)] * len(self.shape)
                    edge[ax] = -1 if step == 1 else 0
                    nb[tuple(edge)] = self.n
                cols.append(nb.ravel())
        return np.ascontiguousarray(np.stack(cols, axis=1), dtype=np.int64)

    def free(self) -> "Hamiltonian":
        """The same box with v = 0 and the same spectral interval."""
        return Hamiltonian(self.spec, self.ranges, self.periodic, None, self.spectral_interval, self.box)

    def matvec(self, x) -> np.ndarray:
        return kernels.matvec(self.nbr, self.diag, self.hop, x)

    def to_sparse(self) -> sp.csr_matrix:
        rows = np.repeat(np.arange(self.n), self.nbr.shape[1])
        cols = self.nbr.ravel()
        keep = cols < self.n
        off = sp.csr_matrix((np.full(keep.sum(), self.hop), (rows[keep], cols[keep])), shape=(self.n, self.n))
        return (off + sp.diags(self.diag)).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    @cached_property
    def eigh(self):
        """Dense eigendecomposition (w, U); limited to 5000 sites."""
        if self.n > 5000:
            raise ValueError(f"dense path refused: {self.n} sites exceeds the 5000-site limit")
        return np.linalg.eigh(self.to_dense())

    def rescaled(self, margin: float = 0.01):
        """Stencil of (H - b)/a mapping the spectral interval into [-1+margin, 1-margin]."""
        lo, hi = self.spectral_interval
        a = (hi - lo) / (2.0 * (1.0 - margin))
        b = 0.5 * (hi + lo)
        return np.ascontiguousarray((self.diag - b) / a), self.hop / a, a, b

    def site_index(self, k) -> int:
        return self.sites.index(k)

    def wall_margin(self, k) -> float:
        """Sites between k and the nearest Dirichlet truncation wall (inf if none)."""
        m = math.inf
        for (a, b), per, kj in zip(self.ranges, self.periodic, k):
            if not per:
                m = min(m, kj - a, b - kj)
        return m


def box_axis_ranges(spec: LatticeSpec, box: BoxSpec, bc: str = "dirichlet"):
    """Per-axis site ranges and periodic flags for a buffered box."""
    if bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown boundary condition {bc!r}; expected one of {BOUNDARY_CONDITIONS}")
    ranges, periodic = [], []
    for ax in range(spec.d):
        half = box.L if ax < spec.d1 else box.Lp
        a, b = axis_range(-half, half, spec.h)
        per = bc == "periodic" or (bc == "periodic-x1" and ax < spec.d1)
        if not per:
            a, b = a - box.buffer, b + box.buffer
        ranges.append((a, b))
        periodic.append(per)
    return ranges, periodic


def _check_commensurate(p: APPotential, spec: LatticeSpec, ranges, periodic):
    for ax in range(spec.d1):
        if not periodic[ax]:
            continue
        period = (ranges[ax][1] - ranges[ax][0] + 1) * spec.h
        for m in p.modes:
            phase = m.gamma[ax] * period / (2 * np.pi)
            if abs(phase - round(phase)) > 1e-9:
                raise ValueError(f"potential frequency {m.gamma[ax]} is not periodic on a box of length {period} "
                                 f"along x1 axis {ax}")


def assemble(spec: LatticeSpec, box: BoxSpec, p: APPotential, bc: str = "dirichlet", interval=None) -> Hamiltonian:
    """H^h on the box [-L, L)^{d1} x [-Lp, Lp)^{d2} enlarged by ``box.buffer`` sites on Dirichlet axes."""
    if (p.d1, p.d2) != (spec.d1, spec.d2):
        raise ValueError("potential and lattice dimensions differ")
    ranges, periodic = box_axis_ranges(spec, box, bc)
    if min(b - a + 1 for a, b in ranges) < 1:
        raise ValueError("box contains no sites")
    _check_commensurate(p, spec, ranges, periodic)
    sites = SiteIndex.from_ranges(ranges).sites
    v = sample_sites(p, spec.h, sites) if p.modes else None
    return Hamiltonian(spec, ranges, periodic, v, interval, box=box, potential=p)


def apply_laplacian(spec: LatticeSpec, field: LatticeField) -> LatticeField:
    """-Laplacian^h of a block field; absent neighbours are zero unless the axis is periodic."""
    u = np.asarray(field.values)
    if u.ndim != spec.d:
        raise ValueError(f"field has {u.ndim} axes, lattice has {spec.d}")
    h = spec.h
    out = 2.0 * spec.d * u
    for ax, per in enumerate(field.periodic):
        if per:
            out = out - np.roll(u, 1, axis=ax) - np.roll(u, -1, axis=ax)
        else:
            pad = [(0, 0)] * u.ndim
            pad[ax] = (1, 1)
            up = np.pad(u, pad)
            n = u.shape[ax]
            out = out - np.take(up, np.arange(0, n), axis=ax) - np.take(up, np.arange(2, n + 2), axis=ax)
    return LatticeField(out / h**2, field.origin, field.periodic)


@dataclass(frozen=True)
class ResolventParams:
    lambda0: float
    method: str = "neumann"
    N: int = 20
    tol: float = 1e-12

    def __post_init__(self):
        if self.method not in ("neumann", "iterative"):
            raise ValueError(f"unknown resolvent method {self.method!r}")
        if self.N < 0:
            raise ValueError("number of Neumann terms must be >= 0")


def default_lambda0(vnorm: float) -> float:
    """1 + 2 ||v||, rounded up to an integer."""
    return float(math.ceil(1.0 + 2.0 * vnorm))


@dataclass
class ResolventResult:
    x: np.ndarray
    residual: float
    iterations: int


def free_resolvent_apply(ham: Hamiltonian, lambda0: float, rhs) -> np.ndarray:
    """(-Laplacian_box + lambda0)^{-1} rhs by exact diagonalization (DST-I / FFT per axis)."""
    rhs = np.asarray(rhs, dtype=float)
    u = rhs.reshape(ham.shape)
    den = np.full(ham.shape, float(lambda0))
    for ax, (n, per) in enumerate(zip(ham.shape, ham.periodic)):
        shp = [1] * len(ham.shape)
        shp[ax] = n
        den = den + _axis_eigs(n, per, ham.spec.h).reshape(shp)
    c = u.astype(complex) if any(ham.periodic) else u
    for ax, per in enumerate(ham.periodic):
        c = sfft.fft(c, axis=ax) if per else sfft.dst(c, type=1, axis=ax, norm="ortho")
    c = c / den
    for ax, per in enumerate(ham.periodic):
        c = sfft.ifft(c, axis=ax) if per else sfft.dst(c, type=1, axis=ax, norm="ortho")
    return np.real(c).reshape(rhs.shape)


def resolvent_apply(ham: Hamiltonian, params: ResolventParams, rhs) -> ResolventResult:
    """Approximate (H + lambda0)^{-1} rhs.

    ``neumann`` sums R0 sum_{k<=N} (-V R0)^k rhs with R0 the exact free
    resolvent; it requires lambda0 >= 1 + 2||v||. ``iterative`` runs conjugate
    gradients to relative tolerance ``tol``.
    """
    rhs = np.asarray(rhs, dtype=float)
    lam = params.lambda0
    if params.method == "neumann":
        if lam < 1.0 + 2.0 * ham.vnorm:
            raise ValueError(f"lambda0 = {lam} is below 1 + 2||v|| = {1.0 + 2.0 * ham.vnorm}; Neumann series refused")
        term = rhs
        acc = rhs.copy()
        for _ in range(params.N):
            term = -ham.v * free_resolvent_apply(ham, lam, term)
            acc = acc + term
        x = free_resolvent_apply(ham, lam, acc)
        its = params.N
    else:
        if lam + ham.spectral_interval[0] <= 0:
            raise ValueError("lambda0 must make H + lambda0 positive definite")
        A = spla.LinearOperator((ham.n, ham.n), matvec=lambda y: ham.matvec(y) + lam * y, dtype=float)
        count = [0]
        x, info = spla.cg(A, rhs, rtol=params.tol, atol=0.0, maxiter=50 * ham.n,
                          callback=lambda _: count.__setitem__(0, count[0] + 1))
        if info != 0:
            raise RuntimeError(f"conjugate gradients did not converge (info={info})")
        its = count[0]
    res = float(np.linalg.norm(ham.matvec(x) + lam * x - rhs))
    return ResolventResult(x, res, its)


@dataclass
class DecayProfile:
    distance: np.ndarray
    magnitude: np.ndarray
    slope: float


def resolvent_decay(ham: Hamiltonian, lambda0: float, m: int, k, r_min: float = 5.0) -> DecayProfile:
    """Off-diagonal magnitudes |<R^m delta_k, delta_k'>| binned by distance h|k - k'|.

    The slope is the log-log fit of the per-bin maxima against 1 + distance
    for distances >= ``r_min``.
    """
    A = (ham.to_sparse() + lambda0 * sp.identity(ham.n)).tocsc()
    lu = spla.splu(A)
    col = np.zeros(ham.n)
    col[ham.site_index(k)] = 1.0
    for _ in range(m):
        col = lu.solve(col)
    dist = ham.spec.h * np.linalg.norm(ham.sites.sites - np.asarray(k), axis=1)
    bins = np.floor(dist + 1e-9).astype(int)
    r = np.unique(bins)
    mag = np.array([np.max(np.abs(col[bins == b])) for b in r])
    sel = (r >= r_min) & (mag > 1e-250)
    slope = float(np.polyfit(np.log1p(r[sel]), np.log(mag[sel]), 1)[0]) if sel.sum() >= 2 else float("nan")
    return DecayProfile(r.astype(float), mag, slope)
