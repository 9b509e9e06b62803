"""Composite metric constructions.

Four assemblies build on the tail field and the Poisson machinery:

* a 360-fold rotation sum of the tail field, whose support is 360
  disjoint small discs on the circle of radius 0.36;
* a bump-sequence metric: scaled copies of the rotation sum planted in
  disjoint balls accumulating at the origin, with amplitudes driven to
  zero fast enough for a measured-derivative smoothness proxy;
* the negative-curvature-pockets metric: a Poisson solve against a sum
  of negative bumps on balls B_{4^{-n}}((2^{-n}, 0));
* an annulus stack: radial wall cutoffs e^{-1/(r - 1/n)} with measured
  C^4 weights, plus per-annulus plantings of the bump construction,
  giving a factor that vanishes identically near the origin and has
  strictly negative curvature on every sampled annulus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from nonembed.bvp import (INTERIOR, MaskedGrid, ScalarField, box_grid,
                          laplacian_grid, solve_poisson)
from nonembed.conformal import ConformalMetric, gaussian_curvature
from nonembed.mollify import TailFunction

DEG = math.pi / 180.0


class AssemblyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# rotation sum
# ---------------------------------------------------------------------------

@dataclass
class RotationSum:
    """Sum over i = 1..360 of v(R(i deg)(scale * x) - offset).

    Each summand's support is a radius-0.0011 disc (after the 1/scale
    shrink) centered on the circle of radius |offset|/scale; consecutive
    images are 1 degree apart, so the supports are pairwise disjoint and
    at most one summand is active at any point.
    """

    base: TailFunction
    count: int = 360
    scale: float = 1000.0
    offset: Tuple[float, float] = (360.0, 0.0)

    @property
    def support_ring_radius(self) -> float:
        return math.hypot(*self.offset) / self.scale

    @property
    def summand_radius(self) -> float:
        return 1.1 / self.scale

    def active_indices(self, x: float, y: float):
        """Indices i whose rotated argument can land in the base support."""
        px, py = self.scale * x, self.scale * y
        rho = math.hypot(px, py)
        R = math.hypot(*self.offset)
        if abs(rho - R) > 1.1:
            return []
        # R(i deg) p must have polar angle within asin(1.1/rho) of 0
        ang = math.atan2(py, px)
        half = math.asin(min(1.0, 1.1 / max(rho, 1e-300))) + 2e-3
        base_i = -ang / DEG
        lo = math.floor(base_i - half / DEG)
        hi = math.ceil(base_i + half / DEG)
        return [((i - 1) % self.count) + 1 for i in range(lo, hi + 1)]

    def term(self, x: float, y: float, i: int) -> float:
        a = i * DEG
        c, s = math.cos(a), math.sin(a)
        px, py = self.scale * x, self.scale * y
        qx = c * px - s * py - self.offset[0]
        qy = s * px + c * py - self.offset[1]
        if qx * qx + qy * qy >= 1.1 ** 2:
            return 0.0
        return float(self.base.value(qx, qy))

    def value(self, x: float, y: float) -> float:
        """Pointwise rotation sum."""
        total = 0.0
        for i in sorted(set(self.active_indices(x, y))):
            total += self.term(x, y, i)
        return total

    def value_rotated_argument(self, x: float, y: float,
                               degrees: int) -> float:
        """w evaluated at R(degrees) x via the exact index relabeling
        R(i) R(k) = R(i + k) on the integer-degree lattice: the summand of
        index i at the rotated argument is the summand of index i + k at
        x, so the term multiset is identical and (summed in the canonical
        order) the value agrees bitwise with w(x)."""
        k = degrees % self.count
        active = sorted(set(self.active_indices(x, y)))
        total = 0.0
        for j in active:  # j = i + k are the indices active at x
            total += self.term(x, y, j)
        return total


# ---------------------------------------------------------------------------
# bump schedule and the bump metric factor
# ---------------------------------------------------------------------------

def measured_derivative_maxima(f: ScalarField, max_order: int) -> list:
    """max |mixed partial| of each total order 0..max_order, by repeated
    one-sided differencing of the sampled grid (a proxy norm: the grid is
    the resolution at which the artifact knows the field)."""
    h = f.grid.h
    out = []
    frontier = {(0, 0): f.values}
    out.append(float(np.max(np.abs(f.values))))
    for order in range(1, max_order + 1):
        new = {}
        for (ax, ay), arr in frontier.items():
            dx = np.diff(arr, axis=0) / h
            new[(ax + 1, ay)] = dx
            dy = np.diff(arr, axis=1) / h
            new[(ax, ay + 1)] = dy
        frontier = new
        out.append(max(float(np.max(np.abs(a))) for a in frontier.values()))
    return out


@dataclass
class BumpSchedule:
    centers: list
    radii: list
    amplitudes: list
    derivative_bounds: list  # D_n for the scaled bump at each n

    def __len__(self):
        return len(self.centers)


def build_bump_schedule(n_max: int, w: RotationSum,
                        max_order: Optional[int] = None) -> BumpSchedule:
    """Centers (2^{-n}, 2^{-n-2}), radii 2^{-n-3}, and amplitudes
    delta_n = 2^{-n} / (1 + D_n), where D_n bounds the measured derivative
    maxima of the scaled bump up to order n (forcing the smoothness
    proxy's geometric decay)."""
    if n_max < 1:
        raise AssemblyError("n_max must be >= 1")
    if max_order is None:
        max_order = n_max
    V = measured_derivative_maxima(w.base.field, max_order)
    centers, radii, amps, bounds = [], [], [], []
    for n in range(1, n_max + 1):
        rho = 2.0 ** (-n - 3)
        chain = w.scale / rho  # d/dx of the composed argument
        D = max(chain ** k * V[k] for k in range(0, min(n, max_order) + 1))
        centers.append((2.0 ** (-n), 2.0 ** (-n - 2)))
        radii.append(rho)
        amps.append(2.0 ** (-n) / (1.0 + D))
        bounds.append(D)
    sched = BumpSchedule(centers, radii, amps, bounds)
    _check_disjoint(sched)
    return sched


def _check_disjoint(s: BumpSchedule) -> None:
    for n in range(len(s)):
        for k in range(n + 1, len(s)):
            dist = math.hypot(s.centers[n][0] - s.centers[k][0],
                              s.centers[n][1] - s.centers[k][1])
            if dist <= s.radii[n] + s.radii[k]:
                raise AssemblyError(f"bump balls {n + 1} and {k + 1} intersect")


def eval_gII_factor(schedule: BumpSchedule, w: RotationSum,
                    x: float, y: float) -> float:
    """Conformal factor exponent of the bump metric:
    delta_n * w((x - z_n)/rho_n) inside ball n, zero elsewhere."""
    for (cx, cy), rho, amp in zip(schedule.centers, schedule.radii,
                                  schedule.amplitudes):
        dx, dy = x - cx, y - cy
        if dx * dx + dy * dy < rho * rho:
            return amp * w.value(dx / rho, dy / rho)
    return 0.0


# ---------------------------------------------------------------------------
# negative-curvature pockets (Poisson construction)
# ---------------------------------------------------------------------------

def pocket_centers_radii(n_max: int) -> list:
    return [((2.0 ** (-n), 0.0), 4.0 ** (-n)) for n in range(1, n_max + 1)]


def curvature_pockets_rhs(X: np.ndarray, Y: np.ndarray, n_max: int) -> np.ndarray:
    """The smooth source: -1 * sum of unit bumps on B_{4^{-n}}((2^{-n},0));
    negative inside every pocket, identically zero elsewhere."""
    out = np.zeros(np.shape(X))
    for (cx, cy), r in pocket_centers_radii(n_max):
        d2 = ((X - cx) ** 2 + (Y - cy) ** 2) / (r * r)
        inside = d2 < 1.0
        vals = np.zeros(np.shape(X))
        vals[inside] = np.exp(-1.0 / (1.0 - d2[inside]))
        out -= vals
    return out


@dataclass
class PocketMetric:
    metric: ConformalMetric
    source: np.ndarray
    grid: MaskedGrid
    n_max: int

    def curvature_report(self, tol_factor: float = 1e-8) -> dict:
        """Curvature signs: negative at every sampled pocket node, flat
        (to tolerance) two cells away from every pocket.

        Pocket samples are interior nodes where the source magnitude
        exceeds tol_factor times its maximum: the bump vanishes to all
        orders at the pocket rim, so rim nodes carry sub-roundoff source
        values whose curvature sign is not certifiable in doubles.
        """
        K = gaussian_curvature(self.metric)
        X, Y = self.grid.nodes_xy()
        Xc, Yc = X[1:-1, 1:-1], Y[1:-1, 1:-1]
        inner = self.grid.mask[1:-1, 1:-1] == INTERIOR
        h = self.grid.h
        scale = float(np.max(np.abs(K.values[inner])))
        src = self.source[1:-1, 1:-1]
        floor = tol_factor * float(np.max(np.abs(src)))
        per_pocket = []
        outside = inner.copy()
        for (cx, cy), r in pocket_centers_radii(self.n_max):
            d = np.hypot(Xc - cx, Yc - cy)
            ins = inner & (d < r - 1e-12)
            sampled = ins & (np.abs(src) > floor)
            per_pocket.append(dict(
                n_nodes=int(ins.sum()),
                n_sampled=int(sampled.sum()),
                max_K=float(np.max(K.values[sampled])) if np.any(sampled) else None,
            ))
            outside &= d > r + 2.0 * h
        max_outside = float(np.max(np.abs(K.values[outside])))
        return dict(
            pockets=per_pocket,
            all_pockets_negative=all(p["n_sampled"] > 0 and p["max_K"] < 0.0
                                     for p in per_pocket),
            max_abs_K_outside=max_outside,
            scale=scale,
            flat_outside=max_outside <= tol_factor * scale,
        )


def build_g1(n_max: int = 3, grid_n: int = 1536) -> PocketMetric:
    """Solve (Laplacian) u1 = -source on a zero-Dirichlet box four times
    the source support radius, and wrap e^{2 u1} dx^2.  Inside each pocket
    the curvature is negative, outside it vanishes to solver tolerance."""
    support = max(abs(c[0]) + r for c, r in pocket_centers_radii(n_max))
    half_width = 4.0 * support
    grid = box_grid((0.0, 0.0), half_width, grid_n)
    X, Y = grid.nodes_xy()
    if 4.0 ** (-n_max) < 4.0 * grid.h:
        raise AssemblyError(
            f"grid h={grid.h:.2e} cannot resolve pocket radius {4.0 ** -n_max:.2e}")
    k_src = curvature_pockets_rhs(X, Y, n_max)
    u1 = solve_poisson(grid, k_src)  # Laplacian u1 = -k_src >= 0
    metric = ConformalMetric.from_grid(u1, description="pocket metric factor")
    return PocketMetric(metric=metric, source=k_src, grid=grid, n_max=n_max)


# ---------------------------------------------------------------------------
# annulus stack
# ---------------------------------------------------------------------------

def wall_cutoff(n: int, r):
    """e^{-1/(r - 1/n)} for r > 1/n, zero otherwise."""
    r = np.asarray(r, dtype=float)
    s = r - 1.0 / n
    out = np.zeros(np.shape(r))
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def wall_cutoff_laplacian(n: int, r):
    """Closed-form Laplacian of the radial cutoff:
    e^{-1/s} (1/s^4 - 2/s^3 + 1/(r s^2)), s = r - 1/n; positive for r < 1
    wherever the cutoff is positive (1 - 2s + s^2/r has no real roots in
    s for r < 1)."""
    r = np.asarray(r, dtype=float)
    s = r - 1.0 / n
    out = np.zeros(np.shape(r))
    pos = s > 0
    sp = s[pos]
    out[pos] = np.exp(-1.0 / sp) * (1.0 / sp**4 - 2.0 / sp**3
                                    + 1.0 / (r[pos] * sp**2))
    return out


def measure_mu_schedule(n_max: int, r_max: float = 1.5,
                        h: float = 1e-4, max_order: int = 4) -> list:
    """mu_n = 2^{-n} / (1 + max measured derivative magnitude of the n-th
    wall cutoff up to the given order), measured by repeated differencing
    on a fine radial grid."""
    if n_max < 1:
        raise AssemblyError("n_max must be >= 1")
    mus = []
    for n in range(1, n_max + 1):
        r = np.arange(1.0 / n - 10 * h, r_max, h)
        vals = wall_cutoff(n, r)
        worst = float(np.max(np.abs(vals)))
        arr = vals
        for k in range(1, max_order + 1):
            arr = np.diff(arr) / h
            worst = max(worst, float(np.max(np.abs(arr))))
        mus.append(2.0 ** (-n) / (1.0 + worst))
    return mus


def cutoff_c4_norm(n: int, mu: float, r_max: float = 1.5,
                   h: float = 1e-4, max_order: int = 4) -> float:
    r = np.arange(1.0 / n - 10 * h, r_max, h)
    vals = mu * wall_cutoff(n, r)
    worst = float(np.max(np.abs(vals)))
    arr = vals
    for k in range(1, max_order + 1):
        arr = np.diff(arr) / h
        worst = max(worst, float(np.max(np.abs(arr))))
    return worst


@dataclass
class AnnulusStack:
    """Factor u0 + sum_m eta_m mu_m (wall cutoff m), with u0 per-annulus
    plantings of the bump construction."""

    eta: Sequence[float]
    mu: Sequence[float]
    n_max: int
    plantings: list          # (center, sigma, amplitude) per annulus
    rotation: RotationSum
    copies_per_annulus: int

    def cutoff_sum(self, r):
        out = np.zeros(np.shape(np.asarray(r, dtype=float)))
        for m in range(1, self.n_max + 1):
            out = out + self.eta[m - 1] * self.mu[m - 1] * wall_cutoff(m, r)
        return out

    def cutoff_sum_laplacian(self, r):
        out = np.zeros(np.shape(np.asarray(r, dtype=float)))
        for m in range(1, self.n_max + 1):
            out = out + self.eta[m - 1] * self.mu[m - 1] \
                * wall_cutoff_laplacian(m, r)
        return out

    def planting_value(self, x: float, y: float) -> float:
        sup = self.rotation.support_ring_radius + self.rotation.summand_radius
        for (cx, cy), sigma, amp in self.plantings:
            dx, dy = x - cx, y - cy
            if dx * dx + dy * dy < (sigma * sup) ** 2:
                return amp * self.rotation.value(dx / sigma, dy / sigma)
        return 0.0

    def factor(self, x: float, y: float) -> float:
        r = math.hypot(x, y)
        base = float(self.cutoff_sum(np.array([r]))[0])
        return base + self.planting_value(x, y)

    def planting_clearance(self, x: float, y: float) -> float:
        """Distance from (x, y) to the nearest planting support."""
        sup = self.rotation.support_ring_radius + self.rotation.summand_radius
        best = math.inf
        for (cx, cy), sigma, amp in self.plantings:
            d = math.hypot(x - cx, y - cy) - sigma * sup
            best = min(best, d)
        return best


def annulus_mid_radius(n: int) -> float:
    return 0.5 * (1.0 / n + 1.0 / (n + 1))


def build_annulus_stack(eta: Sequence[float], n_max: int,
                        mu: Optional[Sequence[float]] = None,
                        tail: Optional[TailFunction] = None,
                        copies_per_annulus: int = 2) -> AnnulusStack:
    """Assemble the annulus factor for a given bounded positive weight
    sequence eta, truncated at n_max.

    The measured mu schedule must be supplied (or is computed here); the
    per-annulus plantings are scaled rotation-sum bumps centered on the
    mid circle of each annulus, supports strictly inside the annulus.
    """
    if len(eta) < n_max:
        raise AssemblyError(f"need {n_max} weights, got {len(eta)}")
    if any(e <= 0 for e in eta[:n_max]):
        raise AssemblyError("weights must be positive")
    if mu is None:
        raise AssemblyError("mu schedule not yet computed; call "
                            "measure_mu_schedule first")
    if tail is None:
        raise AssemblyError("annulus plantings need the tail field")
    w = RotationSum(base=tail)
    sup = w.support_ring_radius + w.summand_radius  # 0.3611
    plantings = []
    for n in range(1, n_max + 1):
        r_c = annulus_mid_radius(n)
        width = 1.0 / n - 1.0 / (n + 1)
        sigma = 0.40 * width / sup
        amp = 2.0 ** (-n) * sigma ** 2
        for j in range(copies_per_annulus):
            ang = 2.0 * math.pi * j / copies_per_annulus
            plantings.append(((r_c * math.cos(ang), r_c * math.sin(ang)),
                              sigma, amp))
    return AnnulusStack(eta=list(eta[:n_max]), mu=list(mu[:n_max]),
                        n_max=n_max, plantings=plantings, rotation=w,
                        copies_per_annulus=copies_per_annulus)


def annulus_curvature_samples(stack: AnnulusStack, n: int,
                              n_angles: int = 8) -> list:
    """Discrete curvature of the stack factor at mid-annulus sample
    points chosen between plantings, with a per-sample stencil step small
    enough for the wall cutoffs' scale.

    Returns (point, K, laplacian, analytic laplacian) records; K < 0 there
    comes from the strictly positive Laplacian of every active cutoff.
    """
    r_c = annulus_mid_radius(n)
    s_active = r_c - 1.0 / (n + 1)
    h_fd = 0.02 * s_active ** 2
    out = []
    for j in range(n_angles):
        # between the plantings, which sit at multiples of 2pi/copies
        ang = 2.0 * math.pi * (j + 0.5) / n_angles
        p = (r_c * math.cos(ang), r_c * math.sin(ang))
        if stack.planting_clearance(*p) < 3 * h_fd:
            continue
        f = stack.factor
        c = f(*p)
        lap = (f(p[0] + h_fd, p[1]) + f(p[0] - h_fd, p[1])
               + f(p[0], p[1] + h_fd) + f(p[0], p[1] - h_fd) - 4.0 * c) / h_fd**2
        K = -math.exp(-2.0 * c) * lap
        lap_exact = float(stack.cutoff_sum_laplacian(np.array([math.hypot(*p)]))[0])
        out.append(dict(point=p, K=K, laplacian=lap, laplacian_exact=lap_exact))
    if not out:
        raise AssemblyError(f"no clear sample points found on annulus {n}")
    return out


def origin_flatness(stack: AnnulusStack, max_order: int = 4,
                    step: float = 0.01) -> list:
    """Measured derivative magnitudes of the factor at the origin, by
    nested central differences with the given step (all stencil points
    stay inside the identically-zero core when step*order < 1/(n_max+1))."""
    if step * max_order >= 1.0 / (stack.n_max + 1):
        raise AssemblyError("stencil escapes the flat core")
    n_pts = 2 * max_order + 1
    xs = step * (np.arange(n_pts) - max_order)
    vals = np.array([[stack.factor(a, b) for b in xs] for a in xs])
    out = [float(np.max(np.abs(vals)))]
    frontier = {(0, 0): vals}
    for order in range(1, max_order + 1):
        new = {}
        for (ax, ay), arr in frontier.items():
            if arr.shape[0] > 1:
                new[(ax + 1, ay)] = np.diff(arr, axis=0) / step
            if arr.shape[1] > 1:
                new[(ax, ay + 1)] = np.diff(arr, axis=1) / step
        frontier = new
        out.append(max(float(np.max(np.abs(a))) for a in frontier.values()))
    return out


def cutoff_partial_sum_c4_distance(mu: Sequence[float], n_hi: int, n_lo: int,
                                   eta: Optional[Sequence[float]] = None,
                                   r_max: float = 1.5, h: float = 1e-4,
                                   max_order: int = 4) -> float:
    """C^4-proxy distance between the partial cutoff sums at n_hi and
    n_lo terms (measured on a fine radial grid)."""
    if eta is None:
        eta = [1.0] * n_hi
    r = np.arange(1e-6, r_max, h)
    tail_sum = np.zeros_like(r)
    for m in range(n_lo + 1, n_hi + 1):
        tail_sum = tail_sum + eta[m - 1] * mu[m - 1] * wall_cutoff(m, r)
    worst = float(np.max(np.abs(tail_sum)))
    arr = tail_sum
    for k in range(1, max_order + 1):
        arr = np.diff(arr) / h
        worst = max(worst, float(np.max(np.abs(arr))))
    return worst
