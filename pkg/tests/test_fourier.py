import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdoslab.fourier import (MomentumGrid, TensorBump, ZeroTheta, continuum_fourier, lattice_fourier, project,
                             riemann_transform_gap, trace_leakage, transform_decay_sup)
from sdoslab.funcalc import probe_function
from sdoslab.hamiltonian import assemble
from sdoslab.lattice import BoxSpec, LatticeField, LatticeSpec
from sdoslab.potential import periodic_potential

RNG = np.random.default_rng(5)
S = LatticeSpec(1, 1, 0.5)


def periodic_field(shape, complex_=False):
    v = RNG.standard_normal(shape)
    if complex_:
        v = v + 1j * RNG.standard_normal(shape)
    return LatticeField(v, (0, 0), (True, True))


def test_grid_weights_and_nodes():
    g = MomentumGrid(S, 16)
    assert g.weights.sum() == pytest.approx((2 * np.pi / S.h) ** 2)
    assert g.nodes.min() > -np.pi / S.h and g.nodes.max() < np.pi / S.h


def test_delta_transform_constant():
    g = MomentumGrid(S, 8)
    F = lattice_fourier(S, LatticeField.delta((3, 3), (-1, -1), (0, 0)), g)
    assert np.allclose(F, (S.h / (2 * np.pi)), atol=1e-15)


def test_shift_phase_law():
    g = MomentumGrid(S, 12)
    a = lattice_fourier(S, LatticeField.delta((1, 1), (0, 0), (0, 0)), g)
    b = lattice_fourier(S, LatticeField.delta((1, 1), (1, 0), (1, 0)), g)
    xi1 = g.points()[..., 0]
    assert np.allclose(b, np.exp(1j * S.h * xi1) * a, atol=1e-15)


def test_parseval_on_grid():
    fld = LatticeField(RNG.standard_normal((5, 7)), (-2, 3))
    g = MomentumGrid(S, 256)
    F = lattice_fourier(S, fld, g)
    assert abs(np.sum(g.weights * np.abs(F) ** 2) - np.sum(fld.values**2)) <= 1e-8


def test_lattice_fourier_dimension_check():
    with pytest.raises(ValueError):
        lattice_fourier(S, LatticeField(np.zeros(3)), MomentumGrid(S, 4))


def test_zero_theta():
    assert riemann_transform_gap(ZeroTheta(2), 0.25, [0.0, 0.0]) == 0.0
    assert continuum_fourier(ZeroTheta(2), [1.0, 2.0]) == 0


def test_continuum_fourier_separable_matches_generic():
    th = TensorBump(2, 1.0)

    class Opaque:
        d, support = 2, th.support

        def __call__(self, x):
            return th(x)

    a = continuum_fourier(th, [0.7, -0.3])
    b = continuum_fourier(Opaque(), [0.7, -0.3], tol=1e-9)
    assert abs(a - b) <= 1e-8


def test_riemann_gap_second_order():
    th = TensorBump(2, 1.0)
    gaps = [riemann_transform_gap(th, h, [0.0, 0.0]) for h in (0.25, 0.125, 0.0625)]
    assert gaps[0] / gaps[1] >= 3.5 and gaps[1] / gaps[2] >= 3.5


def test_decay_sup_uniform_in_h():
    # |xi|^4 |F theta| peaks near |xi| ~ 21 / radius; the zone edge pi/h must lie beyond it at every h
    th = TensorBump(2, 6.0)
    sups = [transform_decay_sup(th, h) for h in (1.0, 0.5, 0.25)]
    assert sups[1] / sups[0] <= 2 and sups[2] / sups[1] <= 2


def test_project_full_zone_identity():
    fld = periodic_field((8, 6))
    out = project(S, fld, np.pi / S.h)
    assert np.max(np.abs(out.values - fld.values)) <= 1e-14


def test_project_plane_waves():
    n = 16
    k1, k2 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    xi_in = 2 * np.pi * 2 / (n * S.h)
    xi_out = 2 * np.pi * 6 / (n * S.h)
    T = 2.0
    assert xi_in < T < xi_out
    win = np.exp(1j * S.h * (k1 * xi_in + k2 * xi_in))
    wout = np.exp(1j * S.h * (k1 * xi_out))
    p_in = project(S, LatticeField(win, (0, 0), (True, True)), T).values
    p_out = project(S, LatticeField(wout, (0, 0), (True, True)), T).values
    assert np.max(np.abs(p_in - win)) <= 1e-12
    assert np.max(np.abs(p_out)) <= 1e-12


def test_project_refuses_nonperiodic():
    with pytest.raises(ValueError, match="periodic"):
        project(S, LatticeField(np.zeros((4, 4))), 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.floats(0.1, 7.0))
def test_projection_idempotent_selfadjoint_contractive(n1, n2, T):
    u, w = periodic_field((n1, n2), True), periodic_field((n1, n2), True)
    pu, pw = project(S, u, T), project(S, w, T)
    assert np.max(np.abs(project(S, pu, T).values - pu.values)) <= 1e-12
    assert abs(np.vdot(pu.values, w.values) - np.vdot(u.values, pw.values)) <= 1e-12 * n1 * n2
    assert np.linalg.norm(pu.values) <= np.linalg.norm(u.values) + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(-5, 5), st.integers(-5, 5))
def test_transform_isometry(n1, n2, o1, o2):
    # the midpoint grid integrates trigonometric polynomials of degree < resolution exactly
    fld = LatticeField(RNG.standard_normal((n1, n2)) + 1j * RNG.standard_normal((n1, n2)), (o1, o2))
    g = MomentumGrid(S, 32)
    F = lattice_fourier(S, fld, g)
    norm2 = np.sum(np.abs(fld.values) ** 2)
    assert abs(np.sum(g.weights * np.abs(F) ** 2) - norm2) <= 1e-12 * norm2


def test_trace_leakage_decreases():
    s = LatticeSpec(1, 1, 0.25)
    ham = assemble(s, BoxSpec(2, 2, 0), periodic_potential(4.0), "periodic")
    leak = trace_leakage(ham, probe_function(), TensorBump(2, 1.5), [2.0, 4.0, 8.0])
    assert leak[0] > leak[1] > leak[2]
    assert trace_leakage(ham, probe_function(), TensorBump(2, 1.5), [np.pi / s.h])[0] == 0.0


def test_trace_leakage_refuses_dirichlet():
    ham = assemble(S, BoxSpec(1, 1, 1), periodic_potential(2.0))
    with pytest.raises(ValueError, match="periodic"):
        trace_leakage(ham, probe_function(), TensorBump(2), [1.0])
