"""Surface-density-of-states functionals and their convergence diagnostics.

N^{Lp}_L(f, H^h) = (2L)^{-d1} sum over box sites hk of
<(f(H^h) - f(-Laplacian^h)) delta_hk, delta_hk>.

By default the free term is evaluated on the same truncated box with the same
method as f(H^h) (``reference="box"``), so truncation and expansion errors of the
two terms cancel; ``reference="brillouin"`` uses the exact infinite-lattice value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .funcalc import default_degree, diagonal, free_diagonal
from .hamiltonian import Hamiltonian, assemble
from .lattice import BoxSpec, cube_of, cube_sites, enumerate_box

RATE_FLOOR = 1e-14


class UnsafeRegionError(ValueError):
    """Requested sites are missing from the box or too close to a truncation wall."""


@dataclass
class SdosResult:
    value: float
    per_cube: dict
    L: float
    Lp: float
    h: float
    method: str
    degree: int | None
    buffer: int
    free_diag: float
    reference: str
    Q: int = 64
    buffer_change: float | None = None


@dataclass
class SiteTraces:
    """Per-site values <(f(H) - f(H_free)) delta_k, delta_k> on a Hamiltonian's sites."""

    ham: Hamiltonian
    values: np.ndarray
    method: str
    degree: int | None
    reference: str
    free_diag: float

    def at(self, sites) -> np.ndarray:
        return self.values[self.ham.sites.indices(sites)]


def _check_safe(ham: Hamiltonian, sites, min_margin: float, what: str):
    if len(sites) == 0:
        return
    for k in sites:
        if k not in ham.sites:
            raise UnsafeRegionError(f"{what}: site {tuple(int(v) for v in k)} lies outside the assembled box")
    margin = min(ham.wall_margin(k) for k in sites)
    if margin < min_margin:
        raise UnsafeRegionError(f"{what}: {margin} sites from the truncation boundary, need >= {min_margin}; "
                                f"increase the buffer")


def _box_buffer(ham: Hamiltonian) -> int:
    return ham.box.buffer if ham.box is not None else 0


def site_traces(ham: Hamiltonian, f, method="dense", degree=None, damping="none", reference="box",
                indices=None, threads=1, tol=1e-4) -> SiteTraces:
    """Diagonal of f(H) - f(H_free) at the given dense indices (all sites by default)."""
    if reference not in ("box", "brillouin"):
        raise ValueError(f"unknown reference {reference!r}")
    kw = dict(method=method, degree=degree, damping=damping, tol=tol, threads=threads)
    dH = diagonal(ham, f, indices, **kw)
    fd = free_diagonal(ham.spec, f)
    if reference == "box":
        dF = diagonal(ham.free(), f, indices, **kw)
    else:
        dF = fd
    vals = dH - dF
    if indices is not None:
        full = np.full(ham.n, np.nan)
        full[np.asarray(indices)] = vals
        vals = full
    used = None
    if method == "kpm":
        used = degree or default_degree(ham, f)
    return SiteTraces(ham, vals, method, used, reference, fd)


def _traces(ham, f, traces, indices, **kw) -> SiteTraces:
    if traces is None:
        return site_traces(ham, f, indices=indices, **kw)
    if np.any(np.isnan(traces.values[indices])):
        raise ValueError("precomputed traces do not cover the requested sites")
    return traces


def cube_trace(ham: Hamiltonian, f, y, method="dense", min_margin=None, traces=None, **kw) -> float:
    """Sum over hk in C(y) of the diagonal of f(H) - f(H_free)."""
    sites = cube_sites(ham.spec, y)
    if min_margin is None:
        min_margin = math.ceil(_box_buffer(ham) / 2)
    _check_safe(ham, sites, min_margin, f"cube {tuple(y)}")
    idx = ham.sites.indices(sites)
    tr = _traces(ham, f, traces, idx, method=method, **kw)
    return float(np.sum(tr.values[idx]))


def surface_dos(ham: Hamiltonian, f, L, Lp, method="dense", min_margin=None, traces=None,
                buffer_check=False, **kw) -> SdosResult:
    """N^{Lp}_L with the per-cube breakdown.

    ``min_margin`` defaults to the box buffer. With ``buffer_check`` the box is
    reassembled at twice the buffer and the change of the value is recorded.
    """
    spec = ham.spec
    sites = enumerate_box(spec, L, Lp)
    if min_margin is None:
        min_margin = _box_buffer(ham)
    _check_safe(ham, sites, min_margin, f"box L={L}, Lp={Lp}")
    idx = ham.sites.indices(sites)
    tr = _traces(ham, f, traces, idx, method=method, **kw)
    vals = tr.values[idx]
    per_cube = {}
    for k, val in zip(sites, vals):
        y = cube_of(spec, k)
        per_cube[y] = per_cube.get(y, 0.0) + float(val)
    value = float(np.sum(vals)) / (2.0 * L) ** spec.d1
    res = SdosResult(value, per_cube, L, Lp, spec.h, tr.method, tr.degree, _box_buffer(ham), tr.free_diag,
                     tr.reference)
    if buffer_check:
        if ham.box is None or ham.potential is None:
            raise ValueError("buffer check needs a Hamiltonian built by assemble()")
        big = BoxSpec(ham.box.L, ham.box.Lp, max(1, 2 * ham.box.buffer))
        ham2 = assemble(spec, big, ham.potential, ham.bc)
        res2 = surface_dos(ham2, f, L, Lp, method=method, min_margin=min_margin, **kw)
        res.buffer_change = abs(res2.value - value)
    return res


def bohr_mean(gamma, L: int) -> complex:
    """(2L)^{-d1} sum over y in {-L, ..., L-1}^{d1} of exp(i y . gamma)."""
    if L < 1 or int(L) != L:
        raise ValueError("L must be a positive integer")
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    y = np.arange(-int(L), int(L), dtype=float)
    out = 1.0 + 0.0j
    n = float(2 * L)
    for g in gamma:
        s = np.sum(np.exp(1j * y * g))
        # divide the parts by the real count; complex division would round 2L/2L below 1
        out *= complex(s.real / n, s.imag / n)
    return complex(out)


def bohr_bound(gamma, L: int) -> float:
    """Prod_j min(1, 2 / (2L |exp(i gamma_j) - 1|)): the geometric-sum bound per axis."""
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    b = 1.0
    for g in gamma:
        den = abs(np.exp(1j * g) - 1.0)
        if den > 0:
            b *= min(1.0, 2.0 / (2 * L * den))
    return b


@dataclass
class ConvergenceReport:
    """Samples of a functional along one parameter with rate and extrapolation.

    ``cauchy_gaps[i]`` is |v_{i+1} - v_i| for samples sorted by parameter.
    ``fitted_rate`` is the log-log slope of the fitted gaps against the parameter
    (against |v - reference| when a reference value is given).
    """

    parameter: str
    samples: list
    cauchy_gaps: list
    fitted_rate: float
    asymptote: float
    reference: float | None = None
    flags: list = field(default_factory=list)

    @property
    def params(self) -> np.ndarray:
        return np.array([p for p, _ in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.samples])


def fit_rate(params, gaps, toward_zero: bool = False) -> float:
    """Least-squares log-log slope over the half of the points nearest the limit (>= 2 points)."""
    p = np.asarray(params, dtype=float)
    g = np.abs(np.asarray(gaps, dtype=float))
    order = np.argsort(p)
    if toward_zero:
        order = order[::-1]
    p, g = p[order], g[order]
    keep = max(2, len(p) - len(p) // 2)
    p, g = p[-keep:], g[-keep:]
    ok = g >= RATE_FLOOR
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(p[ok]), np.log(g[ok]), 1)[0])


def _richardson(pa, va, pb, vb, r):
    if not np.isfinite(r) or r == 0:
        return vb
    wa, wb = pa**r, pb**r
    if wa == wb:
        return vb
    return (vb * wa - va * wb) / (wa - wb)


def sweep(parameter: str, values, evaluate, reference=None) -> ConvergenceReport:
    """Evaluate a functional along ``values`` of one parameter and fit its convergence.

    ``parameter`` 'h' converges toward 0, every other name toward infinity.
    Successive gaps are attached to the less converged parameter of each pair.
    A gap sequence that does not decrease toward the limit is flagged.
    """
    ps = sorted(float(v) for v in values)
    if len(ps) < 3:
        raise ValueError("a sweep needs at least 3 parameter values")
    toward_zero = parameter == "h"
    vals = [float(evaluate(p)) for p in ps]
    gaps = [abs(b - a) for a, b in zip(vals, vals[1:])]
    flags = []
    if reference is None:
        gp = ps[1:] if toward_zero else ps[:-1]
        rate = fit_rate(gp, gaps, toward_zero)
        seq = gaps[::-1] if toward_zero else gaps
    else:
        seq_vals = [abs(v - reference) for v in vals]
        rate = fit_rate(ps, seq_vals, toward_zero)
        seq = seq_vals[::-1] if toward_zero else seq_vals
    if any(b >= a and a >= RATE_FLOOR for a, b in zip(seq, seq[1:])):
        flags.append("non-monotone")
    if not np.isfinite(rate):
        flags.append("rate-undefined")
    # the two most converged samples
    if toward_zero:
        (pa, va), (pb, vb) = (ps[1], vals[1]), (ps[0], vals[0])
    else:
        (pa, va), (pb, vb) = (ps[-2], vals[-2]), (ps[-1], vals[-1])
    asym = _richardson(pa, va, pb, vb, rate)
    return ConvergenceReport(parameter, list(zip(ps, vals)), gaps, rate, float(asym), reference, flags)


@dataclass
class DecayScan:
    y2: np.ndarray
    magnitude: np.ndarray
    exponent: float
    flag: str = ""


def decay_scan(ham: Hamiltonian, f, y1, y2_values, method="dense", traces=None, min_margin=None, **kw) -> DecayScan:
    """|cube_trace| at cubes (y1, y2) with the log-log exponent over the tail half of |y2|.

    The exponent is the slope of log|trace| against log(1 + |y2|).
    """
    y1 = tuple(np.atleast_1d(y1).tolist())
    ys = [tuple(np.atleast_1d(y2).tolist()) for y2 in y2_values]
    if traces is None:
        allsites = np.concatenate([cube_sites(ham.spec, y1 + y) for y in ys])
        for k in allsites:
            if k not in ham.sites:
                raise UnsafeRegionError(f"decay scan: site {tuple(int(v) for v in k)} lies outside the assembled box")
        traces = site_traces(ham, f, method=method, indices=ham.sites.indices(allsites), **kw)
    mags = np.array([abs(cube_trace(ham, f, y1 + y, traces=traces, min_margin=min_margin)) for y in ys])
    r = np.array([np.linalg.norm(y) for y in ys])
    if np.all(mags < RATE_FLOOR):
        return DecayScan(r, mags, float("nan"), "undefined")
    order = np.argsort(r)
    tail = order[len(order) // 2:]
    sel = tail[mags[tail] >= RATE_FLOOR]
    if len(sel) < 2:
        return DecayScan(r, mags, float("nan"), "undefined")
    slope = float(np.polyfit(np.log1p(r[sel]), np.log(mags[sel]), 1)[0])
    return DecayScan(r, mags, slope, "")


def rho_grid(h: float, lo: float = 0.5, hi: float = 1.0) -> np.ndarray:
    """Values rho in h N intersected with [lo, hi]."""
    n0, n1 = math.ceil(lo / h - 1e-9), math.floor(hi / h + 1e-9)
    return h * np.arange(max(n0, 1), n1 + 1)
