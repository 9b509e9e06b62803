"""Three-leg minimal trees and high-dynamic-range line quadrature.

A tree here is three straight legs meeting at a vertex on the negative
x-axis with pairwise 120-degree angles: one leg runs along the axis to
(-1, 0), the other two are extended to the unit circle.  The module
integrates the slit-plane field (and related fields) along legs, arcs and
chords, evaluates the substituted 1D form of the axis-leg integral, and
scans for the smallest vertex exponent K satisfying the sign conditions
of the construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from nonembed.fields import (AnalyticField, FieldDomainError, TWO_PI,
                             eval_angle_field, u_field, u_log_xy)
from nonembed.logscale import LogScaledReal
from nonembed.quadrature import (QuadratureResult, adaptive_log_quadrature)

Point = Tuple[float, float]


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    p: Point
    q: Point

    def __post_init__(self):
        if self.p == self.q:
            raise GeometryError("degenerate segment")

    @property
    def length(self) -> float:
        return math.hypot(self.q[0] - self.p[0], self.q[1] - self.p[1])

    def at(self, t):
        t = np.asarray(t, dtype=float)
        return (self.p[0] + t * (self.q[0] - self.p[0]),
                self.p[1] + t * (self.q[1] - self.p[1]))

    def reversed(self) -> "Segment":
        return Segment(self.q, self.p)


@dataclass(frozen=True)
class SteinerTree:
    """Three legs at exact 120-degree angles, vertex on the x-axis."""

    vertex: Point
    a1: Point
    a2: Point
    a3: Point

    @property
    def legs(self) -> Tuple[Segment, Segment, Segment]:
        return (Segment(self.vertex, self.a1),
                Segment(self.vertex, self.a2),
                Segment(self.vertex, self.a3))

    @property
    def euclidean_length(self) -> float:
        return sum(leg.length for leg in self.legs)

    @property
    def upper_endpoint_angle(self) -> float:
        """Polar angle (about the origin) of the upper circle endpoint."""
        return math.atan2(self.a1[1], self.a1[0]) % TWO_PI


def build_steiner_tree(a: float, x_axis_endpoint: Point = (-1.0, 0.0)) -> SteinerTree:
    """Tree with vertex (-a, 0): axis leg to (-1, 0), slanted legs leaving
    the vertex at standard angles +-pi/3, extended to the unit circle.

    The slanted directions are the axis direction rotated by -+2pi/3, so
    the pairwise angles are 120 degrees by construction.
    """
    if not (0.0 <= a < 1.0):
        raise GeometryError(f"vertex offset must lie in [0, 1), got {a}")
    A = (-a, 0.0)
    # |A + t (cos pi/3, sin pi/3)| = 1  =>  t^2 - a t + a^2 - 1 = 0
    t1 = 0.5 * a + math.sqrt(1.0 - 0.75 * a * a)
    c, s = math.cos(math.pi / 3.0), math.sin(math.pi / 3.0)
    a1 = (A[0] + t1 * c, A[1] + t1 * s)
    a3 = (A[0] + t1 * c, A[1] - t1 * s)
    return SteinerTree(vertex=A, a1=a1, a2=x_axis_endpoint, a3=a3)


def moon_tree(K: int) -> SteinerTree:
    """Tree for vertex offset e^{-K}."""
    return build_steiner_tree(math.exp(-float(K)))


# ---------------------------------------------------------------------------
# quadrature over segments and trees
# ---------------------------------------------------------------------------

def line_integral(f: AnalyticField, seg: Segment, tol: float = 1e-10,
                  initial_panels: int = 64) -> QuadratureResult:
    """Adaptive Gauss-Legendre integral of f along seg, accumulated in
    log scale.  est_error <= tol * |value| on convergence; non-convergence
    raises QuadratureError with diagnostics."""
    L = seg.length
    log_L = math.log(L)

    def f_log(ts):
        xs, ys = seg.at(ts)
        signs, logmags = f.log_value_at(np.asarray(xs), np.asarray(ys))
        return signs, logmags + log_L

    return adaptive_log_quadrature(f_log, 0.0, 1.0, rtol=tol,
                                   initial_panels=initial_panels)


def tree_integral(f: AnalyticField, tree: SteinerTree,
                  tol: float = 1e-10) -> QuadratureResult:
    """Sum of the three leg integrals."""
    total = LogScaledReal.zero()
    err = 0.0
    evals = 0
    for leg in tree.legs:
        r = line_integral(f, leg, tol=tol)
        total = total + r.value
        err += r.est_error
        evals += r.n_evals
    return QuadratureResult(total, err, evals)


def aa2_integral_scaled(K: int, tol: float = 1e-12) -> QuadratureResult:
    """Axis-leg integral of the slit-plane field via the substitution
    t = 2 pi log r:

        (1 / (2 pi e^{pi^2})) * int_{-2 pi K}^{0}
              -e^{(t^2 + 2 pi t) / (4 pi^2)} sin t dt

    evaluated in log scale.  Exactly zero for K=1 (the weight is even about
    t = -pi over one period while sin is odd there)."""
    if K < 1 or K != int(K):
        raise GeometryError(f"K must be a positive integer, got {K}")
    four_pi2 = 4.0 * math.pi**2

    def f_log(ts):
        s = np.sin(ts)
        signs = (-np.sign(s)).astype(int)
        with np.errstate(divide="ignore"):
            logmags = np.where(
                s != 0.0,
                (ts * ts + 2.0 * math.pi * ts) / four_pi2 + np.log(np.abs(s)),
                -np.inf)
        return signs, logmags

    res = adaptive_log_quadrature(f_log, -TWO_PI * K, 0.0, rtol=tol,
                                  initial_panels=8 * K)
    scale = -math.log(TWO_PI) - math.pi**2
    value = LogScaledReal(res.value.sign, res.value.logmag + scale)
    err = res.est_error * math.exp(scale)
    return QuadratureResult(value, err, res.n_evals)


# ---------------------------------------------------------------------------
# boundary-arc integrals and the identity check
# ---------------------------------------------------------------------------

def _arc_integrals(tree: SteinerTree, tol: float) -> Tuple[QuadratureResult,
                                                           QuadratureResult]:
    """The two circle-arc integrals with weights:

        upper arc:  phi(x) * 2 theta e^{-theta^2}
        lower arc:  (4 pi / 3 - phi(x)) * 2 theta e^{-theta^2}

    where phi is the angle at the vertex measured from the upper leg and
    theta the polar angle about the origin; ds = dtheta on the unit circle.
    """
    A, A1 = tree.vertex, tree.a1
    th1 = tree.upper_endpoint_angle

    def make(f_weight):
        def f_log(ths):
            xs, ys = np.cos(ths), np.sin(ths)
            phi = np.array([eval_angle_field(A, A1, (x, y))
                            for x, y in zip(xs, ys)])
            vals = f_weight(phi) * 2.0 * ths * np.exp(-ths * ths)
            signs = np.sign(vals).astype(int)
            with np.errstate(divide="ignore"):
                logmags = np.where(vals != 0.0, np.log(np.abs(vals)), -np.inf)
            return signs, logmags
        return f_log

    up = adaptive_log_quadrature(make(lambda phi: phi), th1, math.pi,
                                 rtol=tol, initial_panels=32)
    lo = adaptive_log_quadrature(make(lambda phi: 4.0 * math.pi / 3.0 - phi),
                                 math.pi, TWO_PI - th1, rtol=tol,
                                 initial_panels=32)
    return up, lo


def identity_right_side(K: int, tol: float = 1e-10) -> LogScaledReal:
    """2 * (axis-leg integral) + both arc integrals."""
    tree = moon_tree(K)
    aa2 = aa2_integral_scaled(K, tol=tol)
    up, lo = _arc_integrals(tree, tol)
    return aa2.value * 2.0 + up.value + lo.value


def green_identity_residual(K: int, tol: float = 1e-10) -> float:
    """Relative discrepancy between the slanted-leg integrals and the
    axis-plus-arcs expression, each side by an independent quadrature:

        left  = integral of u over the two slanted legs
        right = 2 * (axis integral, substituted 1D form) + arc terms

    Returns |left - right| / max(|left|, |right|).
    """
    tree = moon_tree(K)
    u = u_field()
    legs = line_integral(u, tree.legs[0], tol=tol).value + \
        line_integral(u, tree.legs[2], tol=tol).value
    rhs = identity_right_side(K, tol=tol)
    diff = legs - rhs
    if diff.is_zero:
        return 0.0
    scale = max(legs.logmag, rhs.logmag)
    return math.exp(diff.logmag - scale)


def find_min_k(k_max: int, tol: float = 1e-10,
               margin: float = 10.0) -> Optional[int]:
    """Smallest integer K <= k_max with (i) the axis-leg integral strictly
    negative and (ii) the axis-plus-arcs expression strictly negative, both
    beyond ``margin`` times the quadrature error estimate.  None if no K
    qualifies."""
    if k_max < 1:
        raise GeometryError("k_max must be >= 1")
    for K in range(1, k_max + 1):
        aa2 = aa2_integral_scaled(K, tol=tol)
        if not _strictly_negative(aa2.value, aa2.est_error, margin):
            continue
        tree = moon_tree(K)
        up, lo = _arc_integrals(tree, tol)
        rhs = aa2.value * 2.0 + up.value + lo.value
        rhs_err = 2.0 * aa2.est_error + up.est_error + lo.est_error
        if _strictly_negative(rhs, rhs_err, margin):
            return K
    return None


def _strictly_negative(v: LogScaledReal, est_error: float, margin: float) -> bool:
    if v.sign >= 0:
        return False
    if est_error <= 0.0:
        return True
    return v.logmag > math.log(margin * est_error)


# ---------------------------------------------------------------------------
# chord positivity
# ---------------------------------------------------------------------------

def segment_in_sectors(seg: Segment, tree: SteinerTree, n_check: int = 257,
                       pad: float = 1e-9) -> bool:
    """Sampled containment of seg in the union of the two 120-degree
    sectors (vertex angle in [0, 4pi/3]) intersected with the closed disc."""
    ts = np.linspace(0.0, 1.0, n_check)
    xs, ys = seg.at(ts)
    if np.any(xs * xs + ys * ys > (1.0 + pad) ** 2):
        return False
    for x, y in zip(xs, ys):
        if (x, y) == tree.vertex:
            continue
        phi = eval_angle_field(tree.vertex, tree.a1, (x, y))
        if phi > 4.0 * math.pi / 3.0 + pad:
            return False
    return True


def check_segment_positivity(seg: Segment, tree: SteinerTree,
                             tol: float = 1e-9) -> int:
    """Sign of the integral of the slit-plane field along a chord whose
    endpoints lie on the unit circle, the chord staying inside the two
    sectors.  Near-zero integrals (below the quadrature error) report +1
    with near-zero magnitude, matching the vanishing-chord limit."""
    for p in (seg.p, seg.q):
        if abs(math.hypot(*p) - 1.0) > 1e-9:
            raise GeometryError(f"endpoint {p} is not on the unit circle")
    if not segment_in_sectors(seg, tree):
        raise GeometryError("segment exits the sectors")
    res = line_integral(u_field(), seg, tol=tol)
    if res.value.is_zero or res.value.to_float() <= res.est_error:
        if res.value.sign < 0 and abs(res.value.to_float()) > 10 * res.est_error:
            return -1
        return 1
    return int(res.value.sign)


def random_boundary_chords(tree: SteinerTree, count: int, seed: int,
                           min_angle_sep: float = 0.05):
    """Seeded chords of the unit circle with both endpoints on the sector
    arcs, rejected (and redrawn) unless fully contained in the sectors."""
    rng = np.random.default_rng(seed)
    th_lo = tree.upper_endpoint_angle
    th_hi = TWO_PI - th_lo
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 200 * count:
            raise GeometryError("chord rejection rate unexpectedly high")
        ta, tb = rng.uniform(th_lo, th_hi, size=2)
        if abs(ta - tb) < min_angle_sep:
            continue
        seg = Segment((math.cos(ta), math.sin(ta)),
                      (math.cos(tb), math.sin(tb)))
        if segment_in_sectors(seg, tree):
            out.append(seg)
    return out
