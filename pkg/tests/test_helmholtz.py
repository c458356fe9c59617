import numpy as np
import pytest
from scipy.special import hankel1

from anisotik.errors import ConfigError, SolverError
from anisotik.grid import Grid2D, laplacian
from anisotik.helmholtz import (
    Acquisition,
    Padding,
    Pml,
    Stretch,
    Survey,
    assemble,
    factorize,
    laplacian_matrix,
    ricker_spectrum,
    solve,
    synthesize_data,
)

from oracles import C0, F0, green_error, green_setup, pml_reflection, point_source


def small_system(rng, n=30, pml=Pml(8)):
    g = Grid2D(n, n - 3, 15.0, 12.0)
    m = (1.0 / rng.uniform(1500, 3000, g.shape)) ** 2
    return g, m, assemble(m, 2 * np.pi * 6.0, g, pml)


def test_interior_diagonal():
    g = Grid2D(40, 40, 10.0, 8.0)
    m = np.full(g.shape, 1 / C0**2)
    w = 2 * np.pi * 5
    a = assemble(m, w, g, Pml(8)).matrix
    i = g.index(20, 20)
    assert a[i, i] == pytest.approx(w**2 / C0**2 - 2 / 10.0**2 - 2 / 8.0**2, rel=1e-14)


def test_zero_damping_equals_unstretched(rng):
    g = Grid2D(12, 10, 3.0, 2.0)
    np.testing.assert_array_equal(
        laplacian_matrix(g, Stretch.identity(g)).toarray(), laplacian_matrix(g).toarray()
    )
    m = np.full(g.shape, 1e-7)
    a = assemble(m, 3.0, g, None).matrix
    ref = laplacian_matrix(g) + 9.0 * 1e-7 * np.eye(g.n)
    np.testing.assert_array_equal(a.toarray(), ref.toarray() if hasattr(ref, "toarray") else ref)


def test_matvec_matches_matrix_free(rng):
    g, m, sys = small_system(rng)
    u = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    ref = laplacian(u, g, sys.stretch) + sys.omega**2 * m * u
    got = (sys.matrix @ u.ravel()).reshape(g.shape)
    assert np.linalg.norm(got - ref) <= 1e-13 * np.linalg.norm(ref)


def test_linear_in_model(rng):
    g, m1, s1 = small_system(rng)
    m2 = m1 * rng.uniform(0.5, 1.5, g.shape)
    pml = Pml(8, c_ref=3000.0)
    a1 = assemble(m1, s1.omega, g, pml).matrix
    a2 = assemble(m2, s1.omega, g, pml).matrix
    diff = (a1 - a2).toarray()
    expected = s1.omega**2 * (m1 - m2).ravel()
    off = diff - np.diag(np.diag(diff))
    assert not off.any()
    # diagonal cancellation is exact up to one rounding of the stored entries
    tol = 4 * np.finfo(float).eps * np.abs(a1.diagonal())
    assert np.all(np.abs(np.diag(diff) - expected) <= tol)


def test_symmetric_after_stretch_scaling(rng):
    # the 1/s row scaling makes A non-symmetric inside the PML; diag(sx sz) A is symmetric
    g, m, sys = small_system(rng, n=22)
    a = sys.matrix.toarray()
    s = np.outer(sys.stretch.sz, sys.stretch.sx).ravel()
    sa = s[:, None] * a
    np.testing.assert_allclose(sa, sa.T, rtol=0, atol=1e-14 * np.abs(sa).max())
    # away from the layer the operator itself is symmetric
    k = 8
    inner = np.zeros(g.shape, bool)
    inner[k:-k, k:-k] = True
    idx = np.flatnonzero(inner.ravel())
    block = a[np.ix_(idx, idx)]
    np.testing.assert_array_equal(block, block.T)


def test_pml_geometry_errors():
    with pytest.raises(ConfigError):
        Pml(4)
    with pytest.raises(ConfigError):
        assemble(np.full((15, 15), 1e-7), 1.0, Grid2D(15, 15), Pml(8))
    with pytest.raises(ConfigError):
        assemble(np.full((40, 40), -1.0), 1.0, Grid2D(40, 40), Pml(8))


def test_solve_requires_factorization(rng):
    _, _, sys = small_system(rng)
    with pytest.raises(SolverError):
        solve(sys, np.zeros(sys.grid.shape))


def test_singular_matrix_reported():
    g = Grid2D(4, 4)
    sys = assemble(np.full(g.shape, 1.0), 1.0, g, None)
    sys.matrix = sys.matrix * 0.0
    with pytest.raises(SolverError):
        factorize(sys)


def test_factor_solve_contracts(rng):
    g, m, sys = small_system(rng)
    sys = factorize(sys)
    b1 = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    b2 = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    u1, u2 = solve(sys, b1), solve(sys, b2)
    res = np.linalg.norm(sys.apply(u1) - b1) / np.linalg.norm(b1)
    assert res <= 1e-10
    u12 = solve(sys, b1 + b2)
    assert np.linalg.norm(u12 - u1 - u2) <= 1e-12 * np.linalg.norm(u12)
    v = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    assert np.linalg.norm(solve(sys, sys.apply(v)) - v) <= 1e-10 * np.linalg.norm(v)
    stacked = solve(sys, np.stack([b1, b2]))
    np.testing.assert_allclose(stacked[1], u2, rtol=1e-13, atol=0)


def test_dense_oracle_20x20(rng):
    g = Grid2D(20, 20, 10.0, 10.0)
    m = (1.0 / rng.uniform(1500, 2500, g.shape)) ** 2
    sys = factorize(assemble(m, 2 * np.pi * 8.0, g, Pml(8)))
    b = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    dense = np.linalg.solve(sys.matrix.toarray(), b.ravel()).reshape(g.shape)
    assert np.linalg.norm(solve(sys, b) - dense) <= 1e-10 * np.linalg.norm(dense)


def test_green_function_accuracy():
    assert green_error() <= 0.05


def test_reciprocity():
    g, sys = green_setup(121, 12, 20)
    p, q = (40, 35), (85, 70)
    up = solve(sys, point_source(g, *p))
    uq = solve(sys, point_source(g, *q))
    a, b = up[q[1], q[0]], uq[p[1], p[0]]
    assert abs(a - b) <= 1e-8 * abs(a)


def test_pml_reflection_small():
    assert pml_reflection(121) <= 0.01


def test_ricker():
    assert ricker_spectrum(10.0, 0.0) == 0.0
    f = np.arange(0.0, 60.0, 1e-3)
    w = ricker_spectrum(10.0, f)
    assert f[np.argmax(np.abs(w))] == pytest.approx(10.0, abs=1e-3)
    assert np.all(w[1:] > 0)


def acquisition(grid, amp=1.0):
    src = tuple((x, 20.0, amp) for x in (100.0, 300.0))
    rec = tuple((x, 20.0) for x in np.arange(0.0, (grid.nx - 1) * grid.dx + 1, 40.0))
    return Acquisition(src, rec, (3.0, 5.0))


def test_synthesize_data_linearity():
    g = Grid2D(25, 15, 20.0, 20.0)
    m = np.full(g.shape, 1 / C0**2)
    pml = Pml(10, c_ref=C0)
    d1 = synthesize_data(m, g, acquisition(g, 1.0), pml)
    d2 = synthesize_data(m, g, acquisition(g, 2.0), pml)
    d0 = synthesize_data(m, g, acquisition(g, 0.0), pml)
    assert d1.shape == (2, 2, 13)
    assert not d0.any()
    np.testing.assert_array_equal(d2, 2.0 * d1)
    np.testing.assert_array_equal(synthesize_data(m, g, acquisition(g), pml), d1)


def test_synthesized_traces_match_green_function():
    ppw, f = 30, F0
    h = C0 / f / ppw
    g = Grid2D(161, 161, h, h)
    pml = Pml(20, c_ref=C0)
    sx, sz = 80 * h, 80 * h
    rec = tuple((x * h, 40 * h) for x in range(10, 151, 5))
    acq = Acquisition(((sx, sz, 1.0),), rec, (f,))
    d = synthesize_data(np.full(g.shape, 1 / C0**2), g, acq, pml)[0, 0]
    r = np.array([np.hypot(x - sx, z - sz) for x, z in rec])
    k = 2 * np.pi * f / C0
    ref = -0.25j * hankel1(0, k * r) * ricker_spectrum(10.0, f)
    assert np.linalg.norm(d - ref) / np.linalg.norm(ref) <= 0.05


def test_padding_matrix_and_nodes(rng):
    g = Grid2D(7, 5, 10.0, 10.0)
    pad = Padding(g, 8)
    m = rng.standard_normal(g.shape)
    np.testing.assert_array_equal((pad.matrix() @ m.ravel()).reshape(pad.ext_grid.shape), pad.extend(m))
    np.testing.assert_array_equal(pad.crop(pad.extend(m)), m)
    assert pad.node(20.0, 10.0) == pad.ext_grid.index(10, 9)
    with pytest.raises(ConfigError):
        pad.node(100.0, 0.0)


def test_acquisition_round_trip(tmp_path):
    g = Grid2D(25, 15, 20.0, 20.0)
    acq = acquisition(g, 1.5 - 0.5j)
    acq.save(tmp_path / "acq.json")
    assert Acquisition.load(tmp_path / "acq.json") == acq
    survey = Survey(g, acq, Pml(10))
    b = survey.sources(3.0)
    assert b.shape == (2, survey.ext_grid.n)
    assert np.count_nonzero(b) == 2
