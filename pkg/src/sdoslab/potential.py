"""Almost-periodic potentials v(x1, x2) = sum_k v_k(x2) exp(i gamma_k . x1).

A potential is a finite list of modes. Realness is enforced structurally: the
mode set must be closed under gamma -> -gamma with conjugate profiles. Three
profile forms are available: compactly supported bumps, polynomials on the
unit box (Bernstein output) and algebraic decay envelopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import comb

def _as_points(x2, d2):
    x2 = np.asarray(x2, dtype=float)
    if d2 == 1 and (x2.ndim == 0 or x2.shape[-1] != 1):
        x2 = x2[..., None]
    if x2.shape[-1] != d2:
        raise ValueError(f"expected points with trailing dimension {d2}, got shape {x2.shape}")
    return x2


def _psi(s):
    return np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)


def smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    a, b = _psi(s), _psi(1.0 - s)
    return a / (a + b)


class Profile:
    """Base class for x2-profiles. Subclasses carry an ``amplitude`` field."""

    d2: int
    amplitude: complex

    def shape(self, x2: np.ndarray) -> np.ndarray:  # real shape factor, amplitude excluded
        raise NotImplementedError

    def __call__(self, x2) -> np.ndarray:
        pts = _as_points(x2, self.d2)
        return self.amplitude * self.shape(pts)

    def scaled(self, c: complex) -> "Profile":
        return replace(self, amplitude=complex(self.amplitude) * c)

    def conj(self) -> "Profile":
        return replace(self, amplitude=complex(self.amplitude).conjugate())

    def sup_norm(self) -> float:
        """Upper bound on sup |profile| (exact for bump and envelope forms)."""
        return abs(self.amplitude)

    def support(self):
        """Bounding box (lo, hi) of the support, or None when unbounded."""
        return None

    def to_record(self) -> dict:
        raise NotImplementedError


def _amp_record(a: complex):
    a = complex(a)
    return a.real if a.imag == 0 else [a.real, a.imag]


@dataclass(frozen=True)
class BumpProfile(Profile):
    """amplitude * exp(1 - 1/(1 - r^2)), r = |x2 - center| / width; peak value 1."""

    center: tuple
    width: float
    amplitude: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.width <= 0:
            raise ValueError("bump width must be positive")

    @property
    def d2(self) -> int:
        return len(self.center)

    def shape(self, x2):
        r2 = np.sum((x2 - np.asarray(self.center)) ** 2, axis=-1) / self.width**2
        inside = r2 < 1.0
        out = np.zeros(r2.shape)
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    def support(self):
        c = np.asarray(self.center)
        return c - self.width, c + self.width

    def to_record(self):
        return {"kind": "bump", "params": {"center": list(self.center), "width": self.width,
                                           "amplitude": _amp_record(self.amplitude)}}


@dataclass(frozen=True)
class PolynomialProfile(Profile):
    """Tensor Bernstein polynomial on [0, 1]^d2 with weights ``weights[k1, ..., kd2]``.

    Outside the unit box the polynomial is multiplied by a smooth window that
    falls from 1 to 0 over ``taper``; with ``taper = 0`` it is cut off sharply.
    """

    weights: np.ndarray
    amplitude: complex = 1.0
    taper: float = 0.0
    sup_error: float = float("nan")

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim < 1 or min(w.shape) < 2:
            raise ValueError("Bernstein weights need degree >= 1 on every axis")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __hash__(self):
        return hash((self.weights.tobytes(), self.amplitude, self.taper))

    def __eq__(self, other):
        return (isinstance(other, PolynomialProfile) and np.array_equal(self.weights, other.weights)
                and self.amplitude == other.amplitude and self.taper == other.taper)

    @property
    def d2(self) -> int:
        return self.weights.ndim

    @property
    def degree(self) -> tuple:
        return tuple(n - 1 for n in self.weights.shape)

    def _basis(self, t, N):
        k = np.arange(N + 1)
        t = t[..., None]
        return comb(N, k) * t**k * (1.0 - t) ** (N - k)

    def shape(self, x2):
        t = np.clip(x2, 0.0, 1.0)
        bases = [self._basis(t[..., j], N) for j, N in enumerate(self.degree)]
        letters = "abcdefgh"[: self.d2]
        spec = ",".join(f"...{c}" for c in letters) + f",{letters}->..."
        out = np.einsum(spec, *bases, self.weights)
        if self.taper > 0:
            dist = np.maximum(np.maximum(-x2, x2 - 1.0), 0.0)
            win = np.prod(smoothstep(1.0 - dist / self.taper), axis=-1)
        else:
            win = np.all((x2 >= 0.0) & (x2 <= 1.0), axis=-1).astype(float)
        return out * win

    def sup_norm(self):
        return abs(self.amplitude) * float(np.max(np.abs(self.weights)))

    def support(self):
        lo = np.full(self.d2, -self.taper)
        return lo, 1.0 - lo

    def to_record(self):
        return {"kind": "polynomial", "params": {"weights": self.weights.tolist(), "taper": self.taper,
                                                 "amplitude": _amp_record(self.amplitude)}}


@dataclass(frozen=True)
class EnvelopeProfile(Profile):
    """amplitude * <x2>^{-power}; ``bracket`` is 'abs' for 1+|x2| or 'japanese' for sqrt(1+|x2|^2)."""

    power: float
    amplitude: complex = 1.0
    bracket: str = "japanese"
    dim: int = 1

    def __post_init__(self):
        if self.bracket not in ("abs", "japanese"):
            raise ValueError(f"unknown bracket {self.bracket!r}")
        if self.power <= 0:
            raise ValueError("envelope power must be positive")

    @property
    def d2(self) -> int:
        return self.dim

    def shape(self, x2):
        r2 = np.sum(x2**2, axis=-1)
        if self.bracket == "abs":
            return (1.0 + np.sqrt(r2)) ** (-self.power)
        return (1.0 + r2) ** (-0.5 * self.power)

    def to_record(self):
        return {"kind": "envelope", "params": {"power": self.power, "bracket": self.bracket,
                                               "amplitude": _amp_record(self.amplitude)}}


def profile_from_record(rec: dict, d2: int) -> Profile:
    kind, params = rec["kind"], dict(rec.get("params", {}))
    if "amplitude" in params:
        a = params["amplitude"]
        params["amplitude"] = complex(*a) if isinstance(a, (list, tuple)) else complex(a)
    if kind == "bump":
        return BumpProfile(**params)
    if kind == "polynomial":
        return PolynomialProfile(**params)
    if kind == "envelope":
        return EnvelopeProfile(dim=d2, **params)
    raise ValueError(f"unknown profile kind {kind!r}")


@dataclass(frozen=True)
class Mode:
    gamma: tuple
    profile: Profile

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(float(g) for g in np.atleast_1d(self.gamma)))


def _gkey(gamma, tol=1e-12):
    return tuple(round(g / tol) * tol if abs(g) > tol else 0.0 for g in gamma)


@dataclass(frozen=True)
class APPotential:
    """Finite-mode almost-periodic potential with (H1)-type decay constants.

    Parameters
    ----------
    modes : tuple of Mode
    d1, d2 : int
        Split dimensions.
    C, delta0 : float
        Declared decay bound ``|v(x)| <= C (1 + |x2|)^{-d2 - delta0}``.
    truncation_bound : float
        Sup-norm error recorded by :func:`trig_approximate` (0 otherwise).
    """

    modes: tuple
    d1: int
    d2: int
    C: float = 1.0
    delta0: float = 1.0
    truncation_bound: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.C <= 0 or self.delta0 <= 0:
            raise ValueError("decay constants C and delta0 must be positive")
        for m in self.modes:
            if len(m.gamma) != self.d1 or m.profile.d2 != self.d2:
                raise ValueError("mode dimensions do not match (d1, d2)")
        _check_realness(self)

    @property
    def d(self) -> int:
        return self.d1 + self.d2

    def sup_bound(self) -> float:
        """Upper bound on ||v||_inf from the profile sup norms."""
        return float(sum(m.profile.sup_norm() for m in self.modes))

    def to_records(self) -> list:
        return [{"gamma": list(m.gamma), "profile": m.profile.to_record()} for m in self.modes]


def _check_realness(p: APPotential):
    if not p.modes:
        return
    rng = np.random.default_rng(12345)
    pts = np.concatenate([np.zeros((1, p.d2)), rng.uniform(-6, 6, size=(64, p.d2))])
    groups = {}
    for m in p.modes:
        key = _gkey(m.gamma)
        groups[key] = groups.get(key, 0) + m.profile(pts)
    for key, vals in groups.items():
        partner = _gkey(tuple(-g for g in key))
        if partner not in groups:
            raise ValueError(f"realness violated: mode gamma={key} has no partner at -gamma")
        scale = max(1.0, float(np.max(np.abs(vals))))
        if np.max(np.abs(vals - np.conj(groups[partner]))) > 1e-10 * scale:
            raise ValueError(f"realness violated: profiles at gamma={key} and -gamma are not conjugate")


def potential_from_records(records, d1, d2, C=1.0, delta0=1.0) -> APPotential:
    modes = [Mode(r["gamma"], profile_from_record(r["profile"], d2)) for r in records]
    return APPotential(tuple(modes), d1, d2, C, delta0)


def eval_complex(p: APPotential, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.d:
        raise ValueError(f"points must have trailing dimension {p.d}")
    x1, x2 = x[..., : p.d1], x[..., p.d1:]
    out = np.zeros(x.shape[:-1], dtype=complex)
    for m in p.modes:
        out = out + m.profile(x2) * np.exp(1j * (x1 @ np.asarray(m.gamma)))
    return out


def eval_potential(p: APPotential, x) -> np.ndarray:
    """Real potential values at points ``x`` of shape (..., d)."""
    return eval_complex(p, x).real


def sample_sites(p: APPotential, h: float, sites) -> np.ndarray:
    """Lattice restriction v(hk) for integer sites of shape (n, d)."""
    return eval_potential(p, h * np.asarray(sites, dtype=float))


def translate(p: APPotential, z) -> APPotential:
    """Potential x -> v(x1 + z, x2), realized by per-mode phases."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (p.d1,):
        raise ValueError(f"shift must have length {p.d1}")
    modes = tuple(Mode(m.gamma, m.profile.scaled(np.exp(1j * float(np.dot(m.gamma, z))))) for m in p.modes)
    return replace(p, modes=modes)


@dataclass(frozen=True)
class PotentialGap:
    delta: float
    value: float


def sample_grid(d1, d2, x1_half=10.0, x2_half=50.0, n=10_000, seed=0) -> np.ndarray:
    """Deterministic sampling points: a uniform random cloud plus the x2-axis."""
    rng = np.random.default_rng(seed)
    cloud = np.concatenate([rng.uniform(-x1_half, x1_half, (n, d1)), rng.uniform(-x2_half, x2_half, (n, d2))], axis=1)
    axis = np.zeros((201, d1 + d2))
    axis[:, d1] = np.linspace(-x2_half, x2_half, 201)
    return np.concatenate([cloud, axis])


def potential_gap(p1: APPotential, p2: APPotential, delta: float, grid) -> PotentialGap:
    """Sampled sup of (1+|x2|)^delta |v1 - v2|; a lower estimate of the true sup."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty sampling grid")
    d1 = p1.d1
    w = (1.0 + np.linalg.norm(grid[:, d1:], axis=1)) ** delta
    diff = np.abs(eval_potential(p1, grid) - eval_potential(p2, grid))
    return PotentialGap(float(delta), float(np.max(w * diff)))


def _real_units(p: APPotential) -> list:
    """Split the modes into minimal sub-lists that each evaluate to a real function.

    A real gamma = 0 mode stands alone; a mode at gamma pairs with a conjugate
    mode at -gamma. Whatever cannot be matched stays together per frequency pair.
    """
    rng = np.random.default_rng(54321)
    pts = rng.uniform(-6, 6, size=(32, p.d2))
    vals = [m.profile(pts) for m in p.modes]
    scale = [max(1.0, float(np.max(np.abs(v)))) for v in vals]
    used = [False] * len(p.modes)
    units, rest = [], {}
    for i, m in enumerate(p.modes):
        if used[i]:
            continue
        key = _gkey(m.gamma)
        neg = _gkey(tuple(-g for g in m.gamma))
        if key == neg and np.max(np.abs(vals[i].imag)) <= 1e-10 * scale[i]:
            units.append([i])
            used[i] = True
            continue
        if key != neg:
            for j in range(len(p.modes)):
                if not used[j] and j != i and _gkey(p.modes[j].gamma) == neg \
                        and np.max(np.abs(vals[j] - np.conj(vals[i]))) <= 1e-10 * scale[i]:
                    units.append([i, j])
                    used[i] = used[j] = True
                    break
        if not used[i]:
            rest.setdefault(min(key, neg), []).append(i)
            used[i] = True
    return units + list(rest.values())


def trig_approximate(p: APPotential, eps: float) -> APPotential:
    """Drop the smallest real mode units while their total sup norm stays <= eps.

    The recorded ``truncation_bound`` is the sum of the dropped profiles' sup
    norms, an upper bound for sup |v - v_eps|.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    units = _real_units(p)
    norm = [sum(p.modes[i].profile.sup_norm() for i in u) for u in units]
    order = sorted(range(len(units)), key=lambda j: (norm[j], min(units[j])))
    dropped, total = set(), 0.0
    for j in order:
        if total + norm[j] > eps:
            break
        total += norm[j]
        dropped.update(units[j])
    kept = tuple(m for i, m in enumerate(p.modes) if i not in dropped)
    return replace(p, modes=kept, truncation_bound=p.truncation_bound + total)


def bernstein_profile(w, N: int, d2: int = 1, amplitude=1.0, taper=0.0, n_check=None) -> PolynomialProfile:
    """Tensor Bernstein polynomial B_N[w] on [0, 1]^d2.

    ``w`` takes d2 coordinate arrays. The sup error against ``w`` is measured on
    a uniform grid (2001 points per axis in 1-d, 201 otherwise).
    """
    if N < 1:
        raise ValueError("Bernstein degree must be >= 1")
    nodes = np.linspace(0.0, 1.0, N + 1)
    mesh = np.meshgrid(*([nodes] * d2), indexing="ij")
    weights = np.broadcast_to(np.asarray(w(*mesh), dtype=float), (N + 1,) * d2)
    prof = PolynomialProfile(np.array(weights), amplitude=amplitude, taper=taper)
    n_check = n_check or (2001 if d2 == 1 else 201)
    t = np.linspace(0.0, 1.0, n_check)
    grid = np.stack(np.meshgrid(*([t] * d2), indexing="ij"), axis=-1).reshape(-1, d2)
    exact = np.asarray(w(*grid.T), dtype=float) * complex(amplitude)
    err = float(np.max(np.abs(prof(grid) - exact)))
    return replace(prof, sup_error=err)


@dataclass(frozen=True)
class DecayCertificate:
    value: float
    C: float

    @property
    def ok(self) -> bool:
        return self.value <= self.C * (1.0 + 1e-12)


def decay_certificate(p: APPotential, x2_half=50.0, n=10_000, seed=0) -> DecayCertificate:
    """Sampled sup of (1+|x2|)^{d2+delta0} |v| over |x2| <= x2_half."""
    grid = sample_grid(p.d1, p.d2, x2_half=x2_half, n=n, seed=seed)
    gap = potential_gap(p, zero_potential(p.d1, p.d2), p.d2 + p.delta0, grid)
    return DecayCertificate(gap.value, p.C)


def zero_potential(d1=1, d2=1) -> APPotential:
    return APPotential((), d1, d2)


def cosine_potential(gamma, a0=1.0, a1=0.5, power=2.0, bracket="japanese", d2=1, C=None, delta0=None) -> APPotential:
    """(a0 + a1 cos(gamma . x1)) <x2>^{-power}.

    The default decay constants are delta0 = power - d2 and the sharp C for
    the chosen bracket.
    """
    gamma = tuple(float(g) for g in np.atleast_1d(gamma))
    d1 = len(gamma)
    env = EnvelopeProfile(power, 1.0, bracket, d2)
    modes = []
    if a0:
        modes.append(Mode((0.0,) * d1, env.scaled(a0)))
    if a1:
        modes.append(Mode(gamma, env.scaled(0.5 * a1)))
        modes.append(Mode(tuple(-g for g in gamma), env.scaled(0.5 * a1)))
    if delta0 is None:
        delta0 = power - d2
    if C is None:
        # sup_r (1+r)^power / <r>^power is 1 for 'abs' and 2^{power/2} at r = 1 for 'japanese'
        C = (abs(a0) + abs(a1)) * (1.0 if bracket == "abs" else 2.0 ** (0.5 * power))
    return APPotential(tuple(modes), d1, d2, C, delta0)


def demo_potential() -> APPotential:
    """v = (1 + cos(pi x1 / 2) / 2) / (1 + x2^2): period 4 in x1, delta0 = 1, d = 2."""
    return cosine_potential(math.pi / 2, 1.0, 0.5, power=2.0)


def periodic_potential(period=1.0, a0=1.0, a1=0.5, power=2.0) -> APPotential:
    """Cosine potential with the given period in x1 (d1 = d2 = 1)."""
    return cosine_potential(2 * math.pi / period, a0, a1, power)


def quasiperiodic_potential(a=0.5, power=2.0) -> APPotential:
    """(1 + a cos(x1) + a cos(sqrt(2) x1)) / (1 + x2^2): incommensurate frequencies."""
    env = EnvelopeProfile(power, 1.0, "japanese", 1)
    modes = [Mode((0.0,), env)]
    for g in (1.0, math.sqrt(2.0)):
        modes += [Mode((g,), env.scaled(0.5 * a)), Mode((-g,), env.scaled(0.5 * a))]
    C = (1.0 + 2 * abs(a)) * 2.0 ** (0.5 * power)
    return APPotential(tuple(modes), 1, 1, C, power - 1)
