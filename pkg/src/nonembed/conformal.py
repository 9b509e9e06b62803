"""Conformal metrics e^{2 phi} dx^2: curvature, lengths, and the
tail-metric family checks (curvature sign, length change in the bump
amplitude, amplitude threshold scan).

Gaussian curvature of a conformal factor phi is -e^{-2 phi} (Laplacian of
phi); lengths are line integrals of e^{phi}.  Lengths are accumulated in
log scale (the integrand's log is phi itself), so factors far beyond
double range integrate safely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from nonembed.bvp import (EXTERIOR, INTERIOR, MaskedGrid, ScalarField,
                          laplacian_grid)
from nonembed.logscale import LogScaledReal
from nonembed.mollify import TailFunction, tail_subharmonic_report
from nonembed.quadrature import QuadratureResult, adaptive_log_quadrature
from nonembed.trees import Segment, SteinerTree


class ConformalError(ValueError):
    pass


@dataclass
class ConformalMetric:
    """Metric e^{2 phi} dx^2 described by its factor phi.

    factor(x, y) must accept numpy arrays.  A grid representation, when
    present, is what curvature stencils act on.
    """

    factor: Callable
    grid_factor: Optional[ScalarField] = None
    description: str = ""

    @staticmethod
    def flat() -> "ConformalMetric":
        return ConformalMetric(factor=lambda x, y: np.zeros(np.shape(x)),
                               description="flat")

    @staticmethod
    def constant(c: float) -> "ConformalMetric":
        return ConformalMetric(factor=lambda x, y: np.full(np.shape(x), float(c)),
                               description=f"constant factor {c}")

    @staticmethod
    def from_grid(f: ScalarField, description: str = "") -> "ConformalMetric":
        return ConformalMetric(factor=lambda x, y: f.interp(x, y),
                               grid_factor=f, description=description)

    @staticmethod
    def from_callable(fn: Callable, description: str = "") -> "ConformalMetric":
        return ConformalMetric(factor=fn, description=description)

    @staticmethod
    def tail_metric(tail: TailFunction, delta: float) -> "ConformalMetric":
        return ConformalMetric(
            factor=lambda x, y: delta * np.asarray(tail.value(x, y)),
            description=f"tail bump metric, amplitude {delta}")

    def shifted(self, c: float) -> "ConformalMetric":
        base = self.factor
        return ConformalMetric(factor=lambda x, y: base(x, y) + c,
                               grid_factor=None,
                               description=self.description + f" + {c}")


@dataclass
class CurvatureField:
    values: np.ndarray          # on inner nodes of the factor grid
    grid: MaskedGrid
    h: float
    method: str = "five-point factor Laplacian"

    def interior_mask(self) -> np.ndarray:
        m = self.grid.mask
        inner = m[1:-1, 1:-1] == INTERIOR
        if not self.grid.subgrid_boundary:
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                inner &= m[1 + di:m.shape[0] - 1 + di,
                           1 + dj:m.shape[1] - 1 + dj] != EXTERIOR
        else:
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                inner &= m[1 + di:m.shape[0] - 1 + di,
                           1 + dj:m.shape[1] - 1 + dj] == INTERIOR
        return inner


def gaussian_curvature(g: ConformalMetric) -> CurvatureField:
    """K = -e^{-2 phi} * (5-point Laplacian of phi) at interior nodes."""
    if g.grid_factor is None:
        raise ConformalError("curvature needs a grid-resolved factor")
    f = g.grid_factor
    lap = laplacian_grid(f)
    phi_c = f.values[1:-1, 1:-1]
    with np.errstate(over="ignore", under="ignore"):
        K = -np.exp(-2.0 * phi_c) * lap
    return CurvatureField(values=K, grid=f.grid, h=f.grid.h)


# ---------------------------------------------------------------------------
# lengths
# ---------------------------------------------------------------------------

def _segment_length(g: ConformalMetric, seg: Segment, tol: float,
                    initial_panels: int) -> QuadratureResult:
    L = seg.length
    log_L = math.log(L)

    def f_log(ts):
        xs, ys = seg.at(ts)
        phi = np.asarray(g.factor(np.asarray(xs), np.asarray(ys)), dtype=float)
        return np.ones(phi.shape, dtype=int), phi + log_L

    return adaptive_log_quadrature(f_log, 0.0, 1.0, rtol=tol,
                                   initial_panels=initial_panels)


def curve_length(g: ConformalMetric,
                 curve: Union[Segment, SteinerTree, Sequence[Segment]],
                 tol: float = 1e-12, initial_panels: int = 64) -> float:
    """Length of a segment, polyline, or three-leg tree under the metric:
    the integral of e^{phi} along the curve."""
    if isinstance(curve, Segment):
        segs = [curve]
    elif isinstance(curve, SteinerTree):
        segs = list(curve.legs)
    else:
        segs = list(curve)
    total = LogScaledReal.zero()
    for s in segs:
        total = total + _segment_length(g, s, tol, initial_panels).value
    return total.to_float()


# ---------------------------------------------------------------------------
# the tail-metric family
# ---------------------------------------------------------------------------

def length_derivative_check(tail: TailFunction, tree: SteinerTree,
                            step: float = 1e-4,
                            tol: float = 1e-12) -> Tuple[float, float]:
    """Centered finite difference of delta -> L(tree, e^{2 delta v} dx^2)
    at delta = 0 (left), against the tree integral of v (right).

    Both are returned; agreement holds only while step * max|v| stays in
    the linear regime of the exponential, which the caller must judge
    from the recorded values.
    """
    from nonembed.trees import tree_integral
    lp = curve_length(ConformalMetric.tail_metric(tail, +step), tree, tol=tol)
    lm = curve_length(ConformalMetric.tail_metric(tail, -step), tree, tol=tol)
    lhs = (lp - lm) / (2.0 * step)
    rhs = tree_integral(tail.as_analytic_field(), tree, tol=1e-10).float_value
    return lhs, rhs


@dataclass
class Delta0Scan:
    delta0: float
    history: list  # (delta, L_metric, L_flat, shortens)

    @property
    def succeeded(self) -> bool:
        return self.delta0 > 0.0


def find_delta0(tail: TailFunction, tree: SteinerTree,
                delta_max: float = 0.05, n_scan: int = 16,
                tol: float = 1e-12) -> Delta0Scan:
    """Scan delta = delta_max * 2^{-k} upward; the threshold is the
    largest scanned amplitude below the first failure of strict length
    shortening.  If the smallest scanned amplitude already fails, the
    threshold is reported as 0 (failure)."""
    L0 = curve_length(ConformalMetric.flat(), tree, tol=tol)
    history = []
    best = 0.0
    for k in range(n_scan, -1, -1):
        d = delta_max * 2.0 ** (-k)
        Ld = curve_length(ConformalMetric.tail_metric(tail, d), tree, tol=tol)
        shortens = Ld < L0
        history.append((d, Ld, L0, bool(shortens)))
        if shortens:
            best = d
        else:
            break
    return Delta0Scan(delta0=best, history=history)


def tail_curvature_report(tail: TailFunction, delta: float,
                          tol_factor: float = 1e-8) -> dict:
    """Sign verification of K = -e^{-2 delta v} * delta * (Laplacian of v)
    over the unit disc.

    The reweighting e^{-2 delta v} is positive, so K <= 0 is equivalent to
    discrete subharmonicity of v; this reuses that composed certificate
    and additionally reports the largest positive curvature over the
    grid-visible set in log scale, which keeps the reweighting factor out
    of double-overflow territory.
    """
    sub = tail_subharmonic_report(tail, tol_factor=tol_factor)
    f = tail.field
    lap = laplacian_grid(f)
    X, Y = f.grid.nodes_xy()
    in_disc = (X * X + Y * Y) < 1.0
    stencil_ok = np.zeros_like(in_disc)
    stencil_ok[1:-1, 1:-1] = (in_disc[1:-1, 1:-1] & in_disc[2:, 1:-1]
                              & in_disc[:-2, 1:-1] & in_disc[1:-1, 2:]
                              & in_disc[1:-1, :-2])
    YX = 10.0 * (X + 0.8)
    YY = 10.0 * Y
    glue = tail.mollified.glue
    reg = glue.region_of(YX, YY)
    ext = reg == 0
    touches_ext = np.zeros_like(ext)
    touches_ext[1:-1, 1:-1] = (ext[1:-1, 1:-1] | ext[2:, 1:-1] | ext[:-2, 1:-1]
                               | ext[1:-1, 2:] | ext[1:-1, :-2])
    vis = (stencil_ok & touches_ext & ~tail.pentagon_band_excluded
           & ~tail.u_core_excluded)[1:-1, 1:-1]
    phi_c = delta * f.values[1:-1, 1:-1]
    # log |K| = -2 phi + log(delta |lap|); sign(K) = -sign(lap)
    with np.errstate(divide="ignore"):
        logK = -2.0 * phi_c + np.log(np.abs(delta * lap))
    pos = vis & (lap < 0.0)
    max_pos_logK = float(np.max(logK[pos])) if np.any(pos) else -math.inf
    scale_logK = float(np.max(logK[vis & (lap != 0.0)]))
    ok = max_pos_logK <= scale_logK + math.log(tol_factor) \
        if max_pos_logK > -math.inf else True
    return dict(
        subharmonic=sub,
        max_positive_logK=max_pos_logK,
        scale_logK=scale_logK,
        curvature_sign_pass=bool(ok and sub["passes"]),
    )


# ---------------------------------------------------------------------------
# reference factors
# ---------------------------------------------------------------------------

def hyperbolic_disc_factor(h: float = 1.0 / 256, radius: float = 0.95
                           ) -> ConformalMetric:
    """phi = ln(2 / (1 - r^2)) sampled at lattice spacing h on r < radius;
    the curvature of this factor is exactly -1."""
    m = int(math.ceil(radius / h))
    n = 2 * m
    G = MaskedGrid(origin=(-m * h, -m * h), h=h,
                   mask=np.full((n + 1, n + 1), INTERIOR, dtype=np.int8),
                   subgrid_boundary=True)
    X, Y = G.nodes_xy()
    R2 = X * X + Y * Y
    inside = R2 < radius * radius
    G.mask[~inside] = EXTERIOR
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(inside, np.log(2.0 / (1.0 - np.minimum(R2, 1 - 1e-12))), 0.0)
    f = ScalarField(grid=G, values=vals)
    return ConformalMetric.from_grid(f, description="hyperbolic disc factor")


def curvature_error_vs_constant(K: CurvatureField, target: float) -> float:
    """Max |K - target| over interior nodes."""
    inner = K.interior_mask()
    if not np.any(inner):
        raise ConformalError("no interior nodes")
    return float(np.max(np.abs(K.values[inner] - target)))
