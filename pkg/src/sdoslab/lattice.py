"""Geometry of the lattice h Z^d split as Z^{d1} x Z^{d2}.

Boxes are the half-open products [-L, L)^{d1} x [-Lp, Lp)^{d2} anchored at the
origin; unit cubes are C(y) = y + [0, 1)^d. Site sets are returned as integer
arrays of shape ``(n, d)`` in lexicographic order of ``k``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

# relative slack used when snapping L/h to an integer
_SNAP = 1e-9


@dataclass(frozen=True)
class LatticeSpec:
    d1: int
    d2: int
    h: float = 1.0

    def __post_init__(self):
        if int(self.d1) != self.d1 or int(self.d2) != self.d2 or self.d1 < 1 or self.d2 < 1:
            raise ValueError(f"d1 and d2 must be positive integers, got ({self.d1}, {self.d2})")
        if not 0.0 < self.h <= 1.0:
            raise ValueError(f"lattice step must lie in (0, 1], got {self.h}")

    @property
    def d(self) -> int:
        return self.d1 + self.d2


@dataclass(frozen=True)
class BoxSpec:
    """Half-widths of the observation box and the truncation buffer (in sites)."""

    L: float
    Lp: float
    buffer: int = 0

    def __post_init__(self):
        if self.L < 1 or self.Lp < 1:
            raise ValueError(f"box half-widths must be >= 1, got L={self.L}, Lp={self.Lp}")
        if int(self.buffer) != self.buffer or self.buffer < 0:
            raise ValueError(f"buffer must be a nonnegative integer, got {self.buffer}")


def _ceil(x: float) -> int:
    r = round(x)
    if abs(x - r) <= _SNAP * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def axis_range(lo: float, hi: float, h: float) -> tuple[int, int]:
    """Integers k with h*k in [lo, hi), as an inclusive pair (kmin, kmax)."""
    return _ceil(lo / h), _ceil(hi / h) - 1


def box_ranges(spec: LatticeSpec, L: float, Lp: float) -> list[tuple[int, int]]:
    r1 = axis_range(-L, L, spec.h)
    r2 = axis_range(-Lp, Lp, spec.h)
    return [r1] * spec.d1 + [r2] * spec.d2


def _product(ranges) -> np.ndarray:
    axes = [range(a, b + 1) for a, b in ranges]
    d = len(ranges)
    if any(len(ax) == 0 for ax in axes):
        return np.empty((0, d), dtype=np.int64)
    return np.array(list(itertools.product(*axes)), dtype=np.int64).reshape(-1, d)


def enumerate_box(spec: LatticeSpec, L: float, Lp: float) -> np.ndarray:
    """All k with hk in [-L, L)^{d1} x [-Lp, Lp)^{d2}, lexicographically ordered."""
    if L <= 0 or Lp <= 0:
        raise ValueError("box half-widths must be positive")
    return _product(box_ranges(spec, L, Lp))


def cube_sites(spec: LatticeSpec, y) -> np.ndarray:
    """Sites k with hk - y in [0, 1)^d."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (spec.d,):
        raise ValueError(f"cube anchor must have length {spec.d}")
    return _product([axis_range(c, c + 1.0, spec.h) for c in y])


def cube_of(spec: LatticeSpec, k) -> tuple[int, ...]:
    """Integer anchor y of the unit cube containing site hk."""
    return tuple(int(math.floor(ki * spec.h + _SNAP)) for ki in np.asarray(k))


class SiteIndex:
    """Bijection between integer sites and dense indices 0..n-1."""

    def __init__(self, sites):
        sites = np.asarray(sites, dtype=np.int64)
        if sites.ndim != 2:
            raise ValueError("sites must be a 2-d integer array")
        order = np.lexsort(sites.T[::-1])
        self.sites = sites[order]
        self.sites.setflags(write=False)
        self._map = {tuple(s): i for i, s in enumerate(self.sites.tolist())}
        if len(self._map) != len(self.sites):
            raise ValueError("duplicate sites")

    @classmethod
    def from_ranges(cls, ranges) -> "SiteIndex":
        return cls(_product(ranges))

    def __len__(self) -> int:
        return len(self.sites)

    def __contains__(self, k) -> bool:
        return tuple(int(v) for v in k) in self._map

    def __iter__(self):
        return iter(map(tuple, self.sites.tolist()))

    def index(self, k) -> int:
        try:
            return self._map[tuple(int(v) for v in k)]
        except KeyError:
            raise KeyError(f"site {tuple(k)} not in index") from None

    def indices(self, ks) -> np.ndarray:
        return np.array([self.index(k) for k in np.asarray(ks).reshape(-1, self.sites.shape[1])], dtype=np.int64)

    def site(self, i: int) -> tuple[int, ...]:
        return tuple(int(v) for v in self.sites[i])


@dataclass
class LatticeField:
    """Values on a rectangular block of sites.

    ``values[i_1, ..., i_d]`` sits at ``k = origin + (i_1, ..., i_d)``;
    ``periodic[j]`` marks axes that wrap around.
    """

    values: np.ndarray
    origin: tuple = None
    periodic: tuple = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        d = self.values.ndim
        self.origin = tuple(int(v) for v in (self.origin if self.origin is not None else (0,) * d))
        self.periodic = tuple(bool(p) for p in (self.periodic if self.periodic is not None else (False,) * d))
        if len(self.origin) != d or len(self.periodic) != d:
            raise ValueError("origin/periodic must match the field dimension")

    @property
    def d(self) -> int:
        return self.values.ndim

    def sites(self) -> np.ndarray:
        ranges = [(o, o + n - 1) for o, n in zip(self.origin, self.values.shape)]
        return _product(ranges)

    @classmethod
    def delta(cls, shape, origin, k, periodic=None) -> "LatticeField":
        vals = np.zeros(shape)
        vals[tuple(int(a) - int(o) for a, o in zip(k, origin))] = 1.0
        return cls(vals, origin, periodic)
