import math

import numpy as np
import pytest

from nonembed import bvp
from nonembed.fields import u_float, u_gradient_xy
from nonembed.trees import Segment


def harmonic_poly(X, Y):
    return X * X - Y * Y


def test_constant_boundary_data_gives_constant_field():
    g = bvp.box_grid((0.0, 0.0), 1.0, 32)
    g.boundary_values = np.where(g.mask == bvp.BOUNDARY, 3.25, 0.0)
    f = bvp.solve_laplace_dirichlet(g)
    assert np.allclose(f.values[g.mask != bvp.EXTERIOR], 3.25, atol=1e-10)


def test_harmonic_polynomial_reproduced():
    errs = []
    for n in (32, 64):
        g = bvp.box_grid((0.0, 0.0), 1.0, n)
        X, Y = g.nodes_xy()
        g.boundary_values = np.where(g.mask == bvp.BOUNDARY, harmonic_poly(X, Y), 0.0)
        f = bvp.solve_laplace_dirichlet(g)
        err = np.max(np.abs((f.values - harmonic_poly(X, Y))[g.mask == bvp.INTERIOR]))
        errs.append(err)
    # x^2 - y^2 is in the kernel of the 5-point stencil: exact to solver tol
    assert errs[1] < 1e-9


def test_max_principle_on_disc_grid():
    g = bvp.disc_grid(1.0, 64)
    X, Y = g.nodes_xy()
    g.boundary_values = np.where(g.mask == bvp.BOUNDARY, np.sin(3 * X) + Y, 0.0)
    f = bvp.solve_laplace_dirichlet(g)
    assert bvp.max_principle_violation(f) <= 1e-10


def test_grid_refinement_second_order():
    # smooth non-polynomial data: observed order >= 1.7
    def data(X, Y):
        return np.exp(X) * np.sin(Y)

    errs = []
    for n in (32, 64):
        g = bvp.box_grid((0.0, 0.0), 1.0, n)
        X, Y = g.nodes_xy()
        g.boundary_values = np.where(g.mask == bvp.BOUNDARY, data(X, Y), 0.0)
        f = bvp.solve_laplace_dirichlet(g)
        errs.append(np.max(np.abs((f.values - data(X, Y))[g.mask == bvp.INTERIOR])))
    order = math.log2(errs[0] / errs[1])
    assert order >= 1.7


def test_poisson_zero_rhs_gives_zero():
    g = bvp.box_grid((0.0, 0.0), 1.0, 32)
    f = bvp.solve_poisson(g, np.zeros(g.shape))
    assert np.max(np.abs(f.values)) == 0.0


def test_poisson_dst_matches_cg_on_masked_variant():
    # same rhs solved via the fast path (full box) and via CG (same box
    # with the mask check routed through the masked-system path)
    n = 48
    g1 = bvp.box_grid((0.0, 0.0), 1.0, n)
    X, Y = g1.nodes_xy()
    rhs = np.exp(-5 * (X**2 + Y**2))
    f1 = bvp.solve_poisson(g1, rhs)
    g2 = bvp.box_grid((0.0, 0.0), 1.0, n)
    g2.boundary_values[0, 0] = 0.0
    A, b, (ii, jj) = bvp._interior_system(g2, rhs)
    import scipy.sparse.linalg as spla
    x, info = spla.cg(A, b, rtol=1e-13, atol=0.0, maxiter=100000)
    assert info == 0
    v2 = np.zeros(g2.shape)
    v2[ii, jj] = x
    assert np.max(np.abs(f1.values - v2)) < 1e-8


def test_poisson_matches_newtonian_potential_oracle():
    """Radial bump source: the solution must match the free-space log
    potential minus its harmonic box correction (series oracle), away
    from the support."""
    from scipy.integrate import quad

    R = 0.2

    def bump_profile(s):
        return math.exp(-1.0 / (1.0 - (s / R) ** 2)) if s < R else 0.0

    n = 128
    g = bvp.box_grid((0.0, 0.0), 1.0, n)
    X, Y = g.nodes_xy()
    Rg = np.hypot(X, Y)
    rhs = np.zeros(g.shape)
    ins = Rg < R
    rhs[ins] = np.exp(-1.0 / (1.0 - (Rg[ins] / R) ** 2))
    f = bvp.solve_poisson(g, rhs)

    # free-space potential of the radial source: Delta u = -rhs
    mass_inside = lambda t: 2 * math.pi * quad(
        lambda s: bump_profile(s) * s, 0.0, min(t, R), epsabs=1e-14)[0]
    M = mass_inside(R)

    def newton(x, y):
        t = math.hypot(x, y)
        if t >= R:
            return -M / (2 * math.pi) * math.log(t)
        inner = mass_inside(t)
        outer = quad(lambda s: bump_profile(s) * math.log(s) * s, t, R,
                     epsabs=1e-14)[0]
        return -(inner * math.log(t) / (2 * math.pi) + outer)

    # harmonic correction with boundary values newton|_edge via separable
    # sine series on the box [-1,1]^2
    nmodes = 40
    L = 2.0

    def edge_coeffs(vals):
        ys = np.linspace(-1.0, 1.0, 401)
        out = []
        for k in range(1, nmodes + 1):
            integrand = vals * np.sin(k * math.pi * (ys + 1.0) / L)
            out.append(2.0 / L * np.trapezoid(integrand, ys))
        return out

    ys = np.linspace(-1.0, 1.0, 401)
    edges = {
        "x+": np.array([newton(1.0, y) for y in ys]),
        "x-": np.array([newton(-1.0, y) for y in ys]),
        "y+": np.array([newton(x, 1.0) for x in ys]),
        "y-": np.array([newton(x, -1.0) for x in ys]),
    }
    coefs = {k: edge_coeffs(v) for k, v in edges.items()}

    def correction(x, y):
        tot = 0.0
        for k in range(1, nmodes + 1):
            lam = k * math.pi / L
            sy = math.sin(lam * (y + 1.0))
            sx = math.sin(lam * (x + 1.0))
            sh = math.sinh(lam * L)
            tot += coefs["x+"][k - 1] * sy * math.sinh(lam * (x + 1.0)) / sh
            tot += coefs["x-"][k - 1] * sy * math.sinh(lam * (1.0 - x)) / sh
            tot += coefs["y+"][k - 1] * sx * math.sinh(lam * (y + 1.0)) / sh
            tot += coefs["y-"][k - 1] * sx * math.sinh(lam * (1.0 - y)) / sh
        return tot

    for (px, py) in ((0.5, 0.0), (0.0, -0.6), (0.45, 0.45), (-0.3, 0.5)):
        oracle = newton(px, py) - correction(px, py)
        got = float(f.interp(px, py))
        assert got == pytest.approx(oracle, rel=1e-3), (px, py)


def test_poisson_pocket_source_sign():
    # negative source bumps force positive Laplacian of the solution
    # (Delta u = -rhs) and hence negative curvature inside the pockets
    from nonembed import assembly
    pm = assembly.build_g1(2, grid_n=512)
    rep = pm.curvature_report()
    assert rep["all_pockets_negative"]
    assert rep["flat_outside"]


# ---------------------------------------------------------------------------
# normal derivatives
# ---------------------------------------------------------------------------

def test_normal_derivative_linear_field():
    a = (2.0, -1.0)
    f = lambda x, y: a[0] * x + a[1] * y
    edge = Segment((0.0, 0.0), (0.0, 1.0))
    nd = bvp.normal_derivative(f, edge, normal=(1.0, 0.0), h=1e-3)
    assert np.allclose(nd["value"], a[0], atol=1e-9)


def test_normal_derivative_quadratic_zero_at_edge():
    f = lambda x, y: x * x
    edge = Segment((0.0, -1.0), (0.0, 1.0))
    nd = bvp.normal_derivative(f, edge, normal=(1.0, 0.0), h=1e-4)
    assert np.allclose(nd["value"], 0.0, atol=1e-7)


# ---------------------------------------------------------------------------
# pentagon pipeline
# ---------------------------------------------------------------------------

def test_pentagon_geometry():
    geom = bvp.pentagon_geometry(4)
    a = math.exp(-8.0)
    assert geom.D == pytest.approx((-a, 0.0))
    assert math.hypot(*geom.D1) == pytest.approx(1.0, abs=1e-14)
    assert geom.D4[0] == 20.0 and geom.D5[0] == 20.0
    assert geom.D4[1] == pytest.approx(-geom.D5[1])
    # vertex data magnitude fits doubles only up to K=12
    with pytest.raises(bvp.SolverError):
        bvp.pentagon_geometry(14)


def test_pentagon_solver_residual_and_superposition(selected4):
    geom = selected4.geom
    prob = selected4.problem
    # residual of the combined solution against the combined data
    data = bvp.pentagon_edge_data(geom, selected4.N)
    res = prob.residual(selected4.w_field(), data)
    assert res < 1e-12
    # superposition: solving at N directly equals w0 + N*w1
    N = 8.0
    direct = prob.solve(bvp.pentagon_edge_data(geom, N))
    combo = selected4.w0.values + N * selected4.w1.values
    inner = selected4.w0.grid.mask == bvp.INTERIOR
    scale = np.max(np.abs(direct.values[inner]))
    assert np.max(np.abs((direct.values - combo)[inner])) < 1e-8 * scale


def test_pentagon_max_principle(selected4):
    # interior values of each basis solution stay within data range
    w1 = selected4.w1
    inner = w1.grid.mask == bvp.INTERIOR
    assert w1.values[inner].min() > 0.0
    assert w1.values[inner].max() < 1.0


def test_selected_margins_positive(selected4):
    for name, m in selected4.margins.items():
        assert np.all(m["margin"] > 0.0), name


def test_select_N_below_threshold_fails():
    # at K=2 the selected N is far above 1; small N must fail margins
    sel = bvp.select_N(2, resolution=96)
    assert sel.N > 1e6
    m = bvp._edge_margins(sel.geom, sel.w0, sel.w1, 1.0,
                          sel.problem.geom["h"], 40)
    bad = min(float(np.min(v["margin"])) for v in m.values())
    assert bad < 0.0


def test_sweep_exhaustion_raises():
    with pytest.raises(bvp.SolverError):
        bvp.select_N(2, resolution=96, schedule=[1.0, 2.0])


def test_glued_field_regions(selected4):
    gf = bvp.GluedField(selected4)
    # moon region value = slit field
    assert gf.value(-0.5, 0.2) == pytest.approx(u_float(-0.5, 0.2), rel=1e-12)
    # far outside: zero
    assert gf.value(-1.5, 0.0) == 0.0
    # inside the sector wedge: pentagon solution, boundary data continuous
    assert gf.region_of(0.9, 0.0) == 2
    # glue continuity across a leg away from the vertex: the moon side
    # approaches the slit-field data pointwise; the pentagon side carries
    # a large inward gradient (the margin mechanism), so the edge value is
    # recovered by extrapolating along the normal at the gradient scale
    geom = selected4.geom
    t = 0.6
    px = geom.D[0] + t * (geom.D1[0] - geom.D[0])
    py = geom.D[1] + t * (geom.D1[1] - geom.D[1])
    nrm = geom.polygon.inward_normal(geom.LEG_UP)
    data = u_float(px, py)
    eps = 5e-4
    outside = gf.value(px - eps * nrm[0], py - eps * nrm[1])
    assert outside == pytest.approx(data, rel=0.05)
    h = selected4.w0.grid.h
    w1h = gf.value(px + h * nrm[0], py + h * nrm[1])
    w2h = gf.value(px + 2 * h * nrm[0], py + 2 * h * nrm[1])
    extrap = 2.0 * w1h - w2h
    assert abs(extrap - data) <= 0.1 * max(abs(w1h), abs(data))
