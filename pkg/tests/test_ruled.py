import math

import numpy as np
import pytest

from nonembed import ruled

TAU = 0.5


@pytest.fixture(scope="module")
def cyl():
    return ruled.cylinder(TAU)


@pytest.fixture(scope="module")
def extended(gen_surface):
    return ruled.extend_ruled(gen_surface.sample(n=257), -1.0, 2.0)


# ---------------------------------------------------------------------------
# chart and recovery
# ---------------------------------------------------------------------------

def test_cylinder_chart_levels_vertical(cyl):
    chart = ruled.legendre_coords(ruled.graph_of(cyl))
    pts = chart["points"]
    # level sets are vertical lines x2 = const = -s/tau
    for i, s in enumerate(chart["levels"]):
        assert np.allclose(pts[i, :, 1], -s / TAU, atol=1e-9)
    assert np.max(chart["straightness"]) < 1e-10


def test_cylinder_round_trip_exact(cyl):
    surf, diag = ruled.extract_rulings(ruled.graph_of(cyl))
    assert np.max(np.abs(surf.d - np.array([1.0, 0.0, 0.0]))) < 1e-10
    s = surf.s
    c_exact = np.stack([np.full_like(s, 2.0), -s / TAU, -s * s / (2 * TAU)],
                       axis=-1)
    assert np.max(np.abs(surf.c - c_exact)) < 1e-10
    assert np.max(diag["df1_spread"]) < 1e-10


def test_generated_round_trip(gen_surface):
    surf, diag = ruled.extract_rulings(ruled.graph_of(gen_surface))
    assert np.max(chartmax := diag["straightness"]) <= 1e-8
    c_err = np.max(np.abs(surf.c - gen_surface.c(surf.s)))
    d_err = np.max(np.abs(surf.d - gen_surface.d(surf.s)))
    assert c_err < 1e-6 and d_err < 1e-6
    assert np.max(diag["df1_spread"]) <= 1e-8


def test_non_flat_graph_rejected():
    f = ruled.FlatGraph(value=lambda x, y: np.asarray(x) * np.asarray(y),
                        tau=1.0, eps=0.0)
    with pytest.raises(ruled.RuledError):
        ruled.legendre_coords(f)


def test_degenerate_chart_rejected():
    # f22 ~ 0: the Legendre chart cannot be built
    f = ruled.FlatGraph(value=lambda x, y: np.asarray(x) * 0.0, tau=0.5,
                        eps=0.0)
    with pytest.raises(ruled.RuledError):
        ruled.legendre_coords(f)


# ---------------------------------------------------------------------------
# curvature form and concavity
# ---------------------------------------------------------------------------

def test_cylinder_curvature_form(cyl):
    samp = cyl.sample(n=257)
    i = 128
    assert ruled.curvature_form(samp, 1.5, i) == pytest.approx(-1.0 / TAU**2,
                                                               rel=1e-9)
    II = ruled.second_fundamental_form(samp, 1.5, i)
    assert II[0, 0] == 0.0 and II[0, 1] == 0.0 and II[1, 0] == 0.0
    assert II[1, 1] < 0.0
    # Gaussian curvature of a ruled graph vanishes: det II = 0
    assert abs(II[0, 0] * II[1, 1] - II[0, 1] ** 2) == 0.0


def test_cylinder_principal_curvature_exact(cyl):
    samp = cyl.sample(n=257)
    for i in (40, 128, 200):
        s = samp.s[i]
        expected = -TAU / (1.0 + s * s) ** 1.5
        for t in (0.0, 1.0, 2.0):
            assert ruled.principal_curvature(samp, t, i) == pytest.approx(
                expected, rel=1e-8)


def test_plane_has_zero_form():
    n = 41
    plane = ruled.RuledSurface(
        s=np.linspace(-1, 1, n),
        c=np.stack([np.full(n, 2.0), np.linspace(-1, 1, n), np.zeros(n)],
                   axis=-1),
        d=np.tile(np.array([1.0, 0.0, 0.0]), (n, 1)))
    II = ruled.second_fundamental_form(plane, 1.0, n // 2)
    assert np.max(np.abs(II)) < 1e-12


def test_cylinder_concavity_coefficients(cyl):
    samp = cyl.sample(n=257)
    cc = ruled.concavity_check(samp)
    assert cc["verdict"]
    assert np.allclose(cc["a0"], -1.0 / TAU**2, rtol=1e-6)
    assert np.max(np.abs(cc["a1"])) < 1e-6
    assert np.max(np.abs(cc["a2"])) < 1e-6


def test_quadratic_fit_exact_on_polynomial_data():
    # build a surface whose curvature form is a known quadratic in t by
    # fitting the fit itself on synthetic values
    samp = ruled.cylinder(TAU).sample(n=257)
    i = 100
    q = [ruled.curvature_form(samp, t, i) for t in (1.0, 1.5, 2.0)]
    # three-point reconstruction reproduces the sampled values exactly
    a2 = (q[0] - 2 * q[1] + q[2]) / (2 * 0.25)
    a1 = (q[2] - q[0]) / 1.0 - a2 * 3.0
    a0 = q[1] - a1 * 1.5 - a2 * 2.25
    for t, qq in zip((1.0, 1.5, 2.0), q):
        assert a0 + a1 * t + a2 * t * t == pytest.approx(qq, abs=1e-12)


def test_concavity_eps_family_trend():
    devs = []
    for eps in (0.1, 0.05, 0.025):
        g = ruled.generate_surface(TAU, eps, seed=42)
        samp = ruled.extend_ruled(g.sample(n=257), -1.0, 2.0)
        cc = ruled.concavity_check(samp)
        assert cc["verdict"], eps
        dev = max(
            float(np.max(np.abs(cc["a0"] + 1.0 / TAU**2))),
            float(np.max(np.abs(cc["a1"]))),
            float(np.max(np.abs(cc["a2"]))),
        )
        devs.append(dev)
    assert devs[0] > devs[1] > devs[2]


def test_convex_case_fails_verdict(cyl):
    samp = cyl.sample(n=257)
    flipped = ruled.RuledSurface(s=samp.s,
                                 c=samp.c * np.array([1.0, 1.0, -1.0]),
                                 d=samp.d * np.array([1.0, 1.0, -1.0]))
    cc = ruled.concavity_check(flipped)
    assert not cc["verdict"]


def test_near_cylinder_kappa_within_20_percent():
    g = ruled.generate_surface(TAU, 0.025, seed=11)
    samp = ruled.extend_ruled(g.sample(n=257), -1.0, 2.0)
    for i in (60, 128, 190):
        s = samp.s[i]
        target = -TAU / (1.0 + s * s) ** 1.5
        for t in (0.0, 1.0, 2.0):
            k = ruled.principal_curvature(samp, t, i)
            assert abs(k - target) <= 0.2 * abs(target)


# ---------------------------------------------------------------------------
# extension
# ---------------------------------------------------------------------------

def test_cylinder_extension_is_same_cylinder(cyl):
    samp = cyl.sample(n=129)
    ext = ruled.extend_ruled(samp, -1.0, 2.0)
    assert ext.t_range == (-1.0, 2.0)
    assert np.array_equal(ext.c, samp.c) and np.array_equal(ext.d, samp.d)


def test_extension_flatness_preserved(extended):
    # det II = 0 identically for a ruled parameterization; check the
    # normalized off-diagonal stays at rounding level over the extension
    for i in (30, 128, 220):
        for t in (-1.0, 0.5, 2.0):
            II = ruled.second_fundamental_form(extended, t, i)
            assert abs(II[0, 0]) <= 1e-8 * (1 + abs(II[1, 1]))
            assert abs(II[0, 1]) <= 1e-8 * (1 + abs(II[1, 1]))


def test_extension_covers_strip_samples(gen_surface, extended):
    # every strip sample point lies on exactly one projected ruling
    xs = np.linspace(0.05, 1.95, 7)
    ys = np.linspace(-1.9, 1.9, 9)
    for x1 in xs:
        x2r = extended.c[:, 1] + (x1 - 2.0) * extended.d[:, 1]
        for x2 in ys:
            assert x2r.min() <= x2 <= x2r.max()


def test_crossing_rulings_rejected():
    n = 21
    s = np.linspace(-1, 1, n)
    c = np.stack([np.full(n, 2.0), s, np.zeros(n)], axis=-1)
    d = np.stack([np.ones(n), s, np.zeros(n)], axis=-1)
    # dx2/ds = 1 + (t-2): flips sign inside [-1, 2]
    bad = ruled.RuledSurface(s=s, c=c, d=d)
    with pytest.raises(ruled.RuledError):
        ruled.extend_ruled(bad, -1.0, 2.0)


def test_normal_stays_near_cylinder_normal():
    g = ruled.generate_surface(TAU, 0.05, seed=3)
    samp = ruled.extend_ruled(g.sample(n=257), -1.0, 2.0)
    cyln = ruled.cylinder(TAU).sample(n=257)
    for i in (64, 128, 192):
        a = ruled.surface_normal(samp, i)
        b = ruled.surface_normal(cyln, i)
        ang = math.degrees(math.acos(max(-1.0, min(1.0, float(a @ b)))))
        assert ang < 10.0


# ---------------------------------------------------------------------------
# comparison principle harness
# ---------------------------------------------------------------------------

def test_comparison_identity_margin_zero(gen_surface):
    rep = ruled.comparison_check(
        gen_surface, lambda X, Y: ruled.extension_value(gen_surface, X, Y))
    assert rep["hypothesis_det"] and rep["hypothesis_boundary"]
    assert rep["margin"] == 0.0


def test_comparison_instances_margins(gen_surface):
    inst = ruled.hypothesis_instances(gen_surface, 20, seed0=100)
    assert len(inst) == 20
    margins = [r["margin"] for (_, _, r) in inst]
    assert min(margins) >= -1e-8


def test_comparison_flags_violations(gen_surface):
    w, _ = ruled.saddle_candidate(gen_surface, 3, amplitude_scale=5000.0)
    rep = ruled.comparison_check(gen_surface, w)
    assert not rep["hypothesis_det"]


def test_comparison_flags_boundary_mismatch(gen_surface):
    w = lambda X, Y: ruled.extension_value(gen_surface, X, Y) + 1e-6
    rep = ruled.comparison_check(gen_surface, w)
    assert not rep["hypothesis_boundary"]


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def test_projection_of_on_surface_curve_preserves_length(extended):
    ts = np.linspace(-0.5, 1.5, 40)
    ss = np.linspace(extended.s[3], extended.s[-4], 40)
    curve = np.array([ruled._surface_point_interp(extended, t, s)
                      for t, s in zip(ts, ss)])
    lc, lp = ruled.project_and_compare(curve, extended)
    assert lc == pytest.approx(lp, abs=1e-10)


def test_projection_plane_lift_preserves_length():
    n = 41
    plane = ruled.RuledSurface(
        s=np.linspace(-1, 1, n),
        c=np.stack([np.full(n, 2.0), np.linspace(-1, 1, n), np.zeros(n)],
                   axis=-1),
        d=np.tile(np.array([1.0, 0.0, 0.0]), (n, 1)), t_range=(-1.0, 2.0))
    ts = np.linspace(-0.5, 1.5, 30)
    curve = np.stack([ts, 0.3 * np.sin(3 * ts), np.full_like(ts, 0.25)],
                     axis=-1)
    lc, lp = ruled.project_and_compare(curve, plane)
    assert lc == pytest.approx(lp, abs=1e-9)


def test_projection_shortens_50_seeded_curves(extended):
    for s in range(50):
        curve = ruled.random_curve_above(extended, seed=1000 + s)
        lc, lp = ruled.project_and_compare(curve, extended)
        assert lc >= lp - 1e-8, s


def test_projection_rejects_points_below(extended):
    i = 128
    base = ruled._surface_point_interp(extended, 1.0, float(extended.s[i]))
    n = ruled.surface_normal(extended, i)
    below = (base - 0.2 * n)[None, :].repeat(3, axis=0)
    below[1] += 0.01
    with pytest.raises(ruled.RuledError):
        ruled.project_and_compare(below, extended)
