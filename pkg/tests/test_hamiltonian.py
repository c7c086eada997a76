import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdoslab.hamiltonian import (Hamiltonian, ResolventParams, apply_laplacian, assemble, default_lambda0,
                                 free_resolvent_apply, resolvent_apply, resolvent_decay, symbol)
from sdoslab.lattice import BoxSpec, LatticeField, LatticeSpec
from sdoslab.potential import demo_potential, periodic_potential, zero_potential

RNG = np.random.default_rng(11)
S1 = LatticeSpec(1, 1, 1.0)


def test_laplacian_of_delta_on_strip():
    # a one-site-wide strip: the x2 neighbours fall outside, leaving the 1-d stencil plus 2/h^2 from x2
    s = LatticeSpec(1, 1, 0.5)
    f = LatticeField.delta((5, 1), (-2, 0), (0, 0))
    out = apply_laplacian(s, f).values[:, 0]
    assert out.tolist() == [0.0, -4.0, 16.0, -4.0, 0.0]
    x1_part = out - np.array([0, 0, 8.0, 0, 0])
    assert x1_part.tolist() == [0.0, -4.0, 8.0, -4.0, 0.0]


def test_laplacian_constant_periodic_is_zero():
    s = LatticeSpec(1, 1, 0.25)
    f = LatticeField(np.full((6, 4), 3.0), (0, 0), (True, True))
    assert np.max(np.abs(apply_laplacian(s, f).values)) == 0.0


def test_laplacian_plane_wave_eigenfunction():
    s = LatticeSpec(1, 1, 0.5)
    n1, n2 = 8, 6
    m = np.array([3, 1])
    xi = 2 * np.pi * m / (np.array([n1, n2]) * s.h)
    k1, k2 = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    wave = np.exp(1j * s.h * (k1 * xi[0] + k2 * xi[1]))
    out = apply_laplacian(s, LatticeField(wave, (0, 0), (True, True))).values
    assert np.allclose(out, symbol(s, xi) * wave, atol=1e-12)


def test_laplacian_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_laplacian(S1, LatticeField(np.zeros(4)))


def test_symbol_examples():
    assert symbol(S1, [0.0, 0.0]) == 0.0
    assert symbol(S1, [np.pi, np.pi]) == pytest.approx(8.0)
    s = LatticeSpec(1, 2, 1.0)
    th = symbol(s, [np.pi / 2, 0, 0])
    assert th == pytest.approx(2.0)
    r2 = (np.pi / 2) ** 2
    assert 0.25 * r2 <= th <= r2


@pytest.mark.parametrize("h", [1.0, 0.5, 0.25])
def test_symbol_sandwich(h):
    s = LatticeSpec(1, 1, h)
    xi = RNG.uniform(-np.pi / h, np.pi / h, (10_000, 2))
    th = symbol(s, xi)
    r2 = np.sum(xi**2, axis=1)
    assert np.sum(th < 0.25 * r2) == 0 and np.sum(th > r2) == 0


def test_single_site_box():
    ham = Hamiltonian(S1, [(0, 0), (0, 0)], (False, False))
    assert ham.to_dense().tolist() == [[4.0]]


def test_periodic_free_spectrum_matches_symbol_grid():
    s = LatticeSpec(1, 1, 0.5)
    ham = assemble(s, BoxSpec(2, 1.5, 0), zero_potential(), "periodic")
    n1, n2 = ham.shape
    m1, m2 = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    xi = np.stack([2 * np.pi * m1 / (n1 * s.h), 2 * np.pi * m2 / (n2 * s.h)], axis=-1)
    expected = np.sort(symbol(s, xi).ravel())
    assert np.allclose(np.linalg.eigvalsh(ham.to_dense()), expected, atol=1e-11)


def test_periodic_x1_free_spectrum():
    ham = assemble(S1, BoxSpec(3, 2, 1), zero_potential(), "periodic-x1")
    n1, n2 = ham.shape
    e1 = 2 - 2 * np.cos(2 * np.pi * np.arange(n1) / n1)
    e2 = 2 - 2 * np.cos(np.pi * np.arange(1, n2 + 1) / (n2 + 1))
    expected = np.sort(np.add.outer(e1, e2).ravel())
    assert np.allclose(np.linalg.eigvalsh(ham.to_dense()), expected, atol=1e-12)


@pytest.mark.parametrize("bc", ["dirichlet", "periodic-x1", "periodic"])
def test_matvec_matches_dense(bc):
    ham = assemble(S1, BoxSpec(3, 3, 0), periodic_potential(6.0), bc)
    assert ham.shape == (6, 6)
    x = RNG.standard_normal(ham.n)
    assert np.max(np.abs(ham.matvec(x) - ham.to_dense() @ x)) <= 1e-14
    X = RNG.standard_normal((ham.n, 3))
    assert np.max(np.abs(ham.matvec(X) - ham.to_dense() @ X)) <= 1e-13


def test_matvec_matches_apply_laplacian():
    s = LatticeSpec(1, 1, 0.5)
    ham = assemble(s, BoxSpec(2, 1.5, 1), zero_potential(), "periodic-x1")
    u = RNG.standard_normal(ham.shape)
    f = LatticeField(u, tuple(a for a, _ in ham.ranges), ham.periodic)
    assert np.allclose(apply_laplacian(s, f).values.ravel(), ham.matvec(u.ravel()), atol=1e-12)


def test_symmetry_and_spectral_enclosure():
    ham = assemble(LatticeSpec(1, 1, 0.5), BoxSpec(3, 3, 2), demo_potential())
    lo, hi = ham.spectral_interval
    assert lo == pytest.approx(-ham.vnorm) and hi == pytest.approx(32 + ham.vnorm)
    for _ in range(50):
        u, w = RNG.standard_normal((2, ham.n))
        assert abs(np.dot(ham.matvec(u), w) - np.dot(u, ham.matvec(w))) <= 1e-13 * np.linalg.norm(u) * np.linalg.norm(w) * 20
        q = np.dot(u, ham.matvec(u)) / np.dot(u, u)
        assert lo <= q <= hi


def test_assemble_errors():
    with pytest.raises(ValueError):
        assemble(S1, BoxSpec(1, 1), demo_potential(), "neumann")
    with pytest.raises(ValueError, match="not periodic"):
        assemble(S1, BoxSpec(1.5, 1), demo_potential(), "periodic-x1")
    with pytest.raises(ValueError):
        Hamiltonian(S1, [(0, -1), (0, 0)], (False, False))


def test_dense_limit():
    ham = Hamiltonian(S1, [(0, 100), (0, 50)], (False, False))
    with pytest.raises(ValueError, match="dense"):
        ham.eigh


def test_free_resolvent_periodic_fourier_division():
    s = LatticeSpec(1, 1, 0.5)
    ham = assemble(s, BoxSpec(2, 2, 0), zero_potential(), "periodic")
    rhs = np.zeros(ham.n)
    rhs[ham.site_index((0, 0))] = 1.0
    lam = 3.0
    x = free_resolvent_apply(ham, lam, rhs).reshape(ham.shape)
    # fourier coefficients of the solution equal those of the delta divided by symbol + lambda0
    n1, n2 = ham.shape
    m1, m2 = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    th = (2 - 2 * np.cos(2 * np.pi * m1 / n1)) / s.h**2 + (2 - 2 * np.cos(2 * np.pi * m2 / n2)) / s.h**2
    d = rhs.reshape(ham.shape)
    assert np.allclose(np.fft.fft2(x), np.fft.fft2(d) / (th + lam), atol=1e-14)


@pytest.mark.parametrize("bc", ["dirichlet", "periodic-x1", "periodic"])
def test_free_resolvent_exact(bc):
    ham = assemble(S1, BoxSpec(4, 4, 2), periodic_potential(4.0) if bc != "dirichlet" else demo_potential(), bc)
    rhs = RNG.standard_normal(ham.n)
    exact = np.linalg.solve(ham.free().to_dense() + 4 * np.eye(ham.n), rhs)
    assert np.max(np.abs(free_resolvent_apply(ham, 4.0, rhs) - exact)) <= 1e-13


@pytest.mark.parametrize("N", [5, 10, 20])
def test_neumann_error_bound(N):
    ham = assemble(S1, BoxSpec(4, 4, 4), demo_potential())
    lam = 1 + 2 * ham.vnorm
    rhs = RNG.standard_normal(ham.n)
    exact = np.linalg.solve(ham.to_dense() + lam * np.eye(ham.n), rhs)
    approx = resolvent_apply(ham, ResolventParams(lam, "neumann", N), rhs).x
    bound = 2.0**-N * np.linalg.norm(free_resolvent_apply(ham, lam, rhs))
    assert np.linalg.norm(approx - exact) <= bound


def test_neumann_vs_iterative():
    ham = assemble(S1, BoxSpec(6, 6, 4), demo_potential())
    lam = default_lambda0(ham.vnorm)
    assert lam == 4.0
    rhs = RNG.standard_normal(ham.n)
    a = resolvent_apply(ham, ResolventParams(lam, "neumann", 40), rhs)
    b = resolvent_apply(ham, ResolventParams(lam, "iterative", tol=1e-12), rhs)
    assert np.max(np.abs(a.x - b.x)) <= 1e-10
    assert a.residual <= 1e-10 and b.residual <= 1e-10 * np.linalg.norm(rhs)


def test_neumann_refuses_small_lambda0():
    ham = assemble(S1, BoxSpec(2, 2, 1), demo_potential())
    with pytest.raises(ValueError, match="lambda0"):
        resolvent_apply(ham, ResolventParams(2.0, "neumann"), np.ones(ham.n))
    with pytest.raises(ValueError):
        ResolventParams(4.0, "gmres")


def test_resolvent_locality():
    ham = assemble(S1, BoxSpec(10, 10, 0), demo_potential())
    prof = resolvent_decay(ham, 4.0, 2, (0, 0))
    assert prof.slope <= -(ham.spec.d + 1)
    # the diagonal entry dominates
    assert prof.magnitude[0] == np.max(prof.magnitude)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.sampled_from(["dirichlet", "periodic-x1", "periodic"]))
def test_operator_symmetric(L, Lp, bc):
    ham = assemble(S1, BoxSpec(L, Lp, 1), periodic_potential(float(2 * L)) if bc != "dirichlet" else demo_potential(), bc)
    A = ham.to_dense()
    assert np.array_equal(A, A.T)
