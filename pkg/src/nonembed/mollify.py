"""Radially symmetric mollification and the rescaled tail field.

The tail field is the glued disc/pentagon solution, mollified at radius
delta and pulled back by x -> 10(x - C0) with C0 = (-0.8, 0), sampled on a
grid covering the 1.1-disc.  Mollification is evaluated pointwise: away
from the glue interfaces a radial unit-mass kernel leaves a harmonic
function unchanged (mean value property), so only points within delta of
an interface need the local kernel quadrature.  This is what makes
delta << grid spacing feasible; a grid-resolved convolution would need
~1e9 nodes at the mandated pentagon resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad as _quad

from nonembed.bvp import (BOUNDARY, EXTERIOR, INTERIOR, GluedField,
                          MaskedGrid, ScalarField, SelectedN, laplacian_grid)
from nonembed.fields import AnalyticField
from nonembed.logscale import LogScaledReal
from nonembed.quadrature import QuadratureResult
from nonembed.trees import SteinerTree, build_steiner_tree, tree_integral

RESCALE = 10.0
RECENTER = (-0.8, 0.0)

# integral of exp(-1/(1-t^2)) t dt over [0, 1]; normalizes the 2D bump
_PROFILE_MOMENT = _quad(lambda t: math.exp(-1.0 / (1.0 - t * t)) * t,
                        0.0, 1.0, epsabs=1e-15, epsrel=1e-14)[0]


class MollifyError(ValueError):
    pass


@dataclass
class Mollifier:
    """Smooth radial bump supported in the delta-disc with unit 2D mass."""

    radius: float
    amplitude: float

    def density(self, s):
        s = np.asarray(s, dtype=float)
        t2 = (s / self.radius) ** 2
        out = np.zeros(np.shape(s))
        inside = t2 < 1.0
        out[inside] = self.amplitude * np.exp(-1.0 / (1.0 - t2[inside]))
        return out

    def mass(self, n: int = 20000) -> float:
        """2D mass by fine 1D quadrature (diagnostic)."""
        s = np.linspace(0.0, self.radius, n + 1)
        rho = self.density(s)
        return float(2.0 * math.pi * np.trapz(rho * s, s))


def make_mollifier(delta: float) -> Mollifier:
    if delta <= 0:
        raise MollifyError(f"mollifier radius must be positive, got {delta}")
    amplitude = 1.0 / (2.0 * math.pi * delta * delta * _PROFILE_MOMENT)
    return Mollifier(radius=delta, amplitude=amplitude)


def convolve(f: ScalarField, m: Mollifier) -> ScalarField:
    """Discrete convolution by direct summation over the kernel window.

    Defined where the window stays on live nodes; the kernel weights are
    normalized to unit sum so constants are reproduced exactly.  Requires
    the kernel to span at least two grid cells.
    """
    h = f.grid.h
    if m.radius < 2.0 * h:
        raise MollifyError(
            f"mollifier radius {m.radius:.3e} under-resolved by grid h={h:.3e}")
    R = int(math.ceil(m.radius / h))
    off = np.arange(-R, R + 1)
    OX, OY = np.meshgrid(off, off, indexing="ij")
    w = m.density(np.hypot(OX * h, OY * h))
    w /= w.sum()

    live = (f.grid.mask != EXTERIOR).astype(float)
    vals = np.where(f.grid.mask != EXTERIOR, f.values, 0.0)
    nx, ny = f.grid.shape
    acc = np.zeros((nx, ny))
    cover = np.zeros((nx, ny))
    for a in range(2 * R + 1):
        for b in range(2 * R + 1):
            if w[a, b] == 0.0:
                continue
            sx = slice(max(0, R - a), nx - max(0, a - R))
            tx = slice(max(0, a - R), nx - max(0, R - a))
            sy = slice(max(0, R - b), ny - max(0, b - R))
            ty = slice(max(0, b - R), ny - max(0, R - b))
            acc[sx, sy] += w[a, b] * vals[tx, ty]
            cover[sx, sy] += w[a, b] * live[tx, ty]
    valid = cover > 1.0 - 1e-12
    mask = np.where(valid, INTERIOR, EXTERIOR).astype(np.int8)
    grid = MaskedGrid(origin=f.grid.origin, h=h, mask=mask,
                      subgrid_boundary=True)
    return ScalarField(grid=grid, values=np.where(valid, acc, 0.0))


# ---------------------------------------------------------------------------
# pointwise mollification of the glued field
# ---------------------------------------------------------------------------

class MollifiedGlue:
    """w * rho_delta evaluated pointwise.

    Fast path (distance to every glue interface > delta): the regionwise
    value itself -- exact for the harmonic slit-field region by the mean
    value property, and at interpolation accuracy in the pentagon.  Near
    interfaces: polar Gauss/trapezoid kernel quadrature with weights
    normalized to unit sum.
    """

    def __init__(self, glue: GluedField, delta: float,
                 n_radial: int = 24, n_angular: int = 48):
        self.glue = glue
        self.delta = delta
        self.m = make_mollifier(delta)
        gl_nodes, gl_w = np.polynomial.legendre.leggauss(n_radial)
        s = 0.5 * delta * (gl_nodes + 1.0)
        ws = 0.5 * delta * gl_w
        beta = 2.0 * math.pi * np.arange(n_angular) / n_angular
        S, B = np.meshgrid(s, beta, indexing="ij")
        self._dx = (S * np.cos(B)).ravel()
        self._dy = (S * np.sin(B)).ravel()
        wgt = (self.m.density(S) * S * ws[:, None]).ravel()
        self._wgt = wgt / wgt.sum()

    def kernel_average(self, x: float, y: float) -> float:
        vals = self.glue.value(x + self._dx, y + self._dy)
        return float(np.dot(self._wgt, vals))

    def value(self, x, y, force_quadrature: bool = False):
        X = np.asarray(x, dtype=float)
        Y = np.asarray(y, dtype=float)
        scalar = X.shape == ()
        X, Y = np.atleast_1d(X.ravel()), np.atleast_1d(Y.ravel())
        out = np.empty(X.shape)
        dist = self.glue.interface_distance(X, Y)
        fast = dist > 1.02 * self.delta
        if force_quadrature:
            fast = np.zeros_like(fast)
        if np.any(fast):
            out[fast] = self.glue.value(X[fast], Y[fast])
        for i in np.where(~fast)[0]:
            out[i] = self.kernel_average(X[i], Y[i])
        if scalar:
            return float(out[0])
        return out.reshape(np.shape(x))


# ---------------------------------------------------------------------------
# the tail field on the 1.1-disc
# ---------------------------------------------------------------------------

@dataclass
class TailFunction:
    """Sampled tail field v(x) = (w * rho_delta)(10 (x - C0)) plus its
    exact pointwise evaluator and provenance."""

    field: ScalarField
    provenance: dict
    mollified: MollifiedGlue
    u_core_excluded: np.ndarray = None  # oscillation-unresolved nodes
    pentagon_band_excluded: np.ndarray = None

    def value(self, x, y):
        X = np.asarray(x, dtype=float)
        Y = np.asarray(y, dtype=float)
        return self.mollified.value(RESCALE * (X - RECENTER[0]),
                                    RESCALE * (Y - RECENTER[1]))

    def as_analytic_field(self) -> AnalyticField:
        def log_value(xs, ys):
            vals = np.asarray(self.value(xs, ys))
            signs = np.sign(vals).astype(int)
            with np.errstate(divide="ignore"):
                lm = np.where(vals != 0.0, np.log(np.abs(vals)), -np.inf)
            return signs, lm

        return AnalyticField(value=lambda a, b: float(self.value(a, b)),
                             gradient=_no_gradient,
                             log_value=log_value)


def _no_gradient(x, y):
    raise NotImplementedError("tail field gradient is not provided")


def tail_tree(K: int) -> SteinerTree:
    """Tree with vertex (-(1/10) e^{-K} - 0.8, 0), axis leg to (-1, 0)."""
    return build_steiner_tree(0.8 + math.exp(-float(K)) / RESCALE)


def _oscillation_unresolved(X, Y, h_upstream: float) -> np.ndarray:
    """Nodes whose upstream image cannot represent the slit-field
    oscillation: local wavelength pi*r/sqrt(log^2 r + (2 pi)^2) < 4h."""
    r = np.hypot(X, Y)
    r = np.maximum(r, 1e-300)
    lam = math.pi * r / np.sqrt(np.log(r) ** 2 + 4.0 * math.pi**2)
    return lam < 4.0 * h_upstream


def build_tail_v(selected: SelectedN, delta: float,
                 grid_n: int = 768) -> TailFunction:
    """Sample the rescaled mollified glue on a grid covering the 1.1-disc.

    delta must respect the geometric bound e^{-2K} so the kernel never
    spans the reflex vertex sector.
    """
    K = selected.geom.K
    if not (0.0 < delta < math.exp(-2.0 * K)):
        raise MollifyError(
            f"delta must lie in (0, e^(-2K)) = (0, {math.exp(-2.0 * K):.3e})")
    glue = GluedField(selected)
    moll = MollifiedGlue(glue, delta)

    n = grid_n
    h = 2.2 / n
    xs = -1.1 + h * np.arange(n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    YX = RESCALE * (X - RECENTER[0])
    YY = RESCALE * (Y - RECENTER[1])
    vals = moll.value(YX, YY)

    mask = np.full((n + 1, n + 1), INTERIOR, dtype=np.int8)
    mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = BOUNDARY
    grid = MaskedGrid(origin=(-1.1, -1.1), h=h, mask=mask)
    fld = ScalarField(grid=grid, values=vals)

    h_up = RESCALE * h
    core = _oscillation_unresolved(YX, YY, h_up)
    # nodes whose stencil touches the pentagon region: the grid Laplacian
    # there reads interpolation error, not the field; those interfaces are
    # certified by the edge-margin and solver-residual checks instead
    h_pent = selected.problem.geom["h"]
    reg = glue.region_of(YX, YY)
    pent = reg == 2
    touches = pent.copy()
    touches[1:-1, 1:-1] = (pent[1:-1, 1:-1] | pent[2:, 1:-1] | pent[:-2, 1:-1]
                           | pent[1:-1, 2:] | pent[1:-1, :-2])

    prov = dict(K=K, N=selected.N, delta=delta, h=h, grid_n=n,
                pentagon_h=h_pent)
    return TailFunction(field=fld, provenance=prov, mollified=moll,
                        u_core_excluded=core, pentagon_band_excluded=touches)


# ---------------------------------------------------------------------------
# subharmonicity
# ---------------------------------------------------------------------------

def subharmonic_defect(f: ScalarField, region: Optional[np.ndarray] = None
                       ) -> float:
    """Minimum of the 5-point Laplacian of f over the (inner-node) region;
    values >= -tol indicate discrete subharmonicity at that tolerance."""
    lap = laplacian_grid(f)
    inner_live = f.grid.mask[1:-1, 1:-1] != EXTERIOR
    if region is not None:
        inner_live = inner_live & np.asarray(region)[1:-1, 1:-1]
    if not np.any(inner_live):
        raise MollifyError("empty region for the subharmonic check")
    return float(np.min(lap[inner_live]))


def tail_subharmonic_report(tail: TailFunction,
                            tol_factor: float = 1e-8,
                            margin_samples: int = 200,
                            n_spot: int = 40, seed: int = 7) -> dict:
    """Discrete subharmonicity of the tail field over the unit disc.

    The distributional Laplacian of the glued field is a sum of (i) zero
    in the slit-field region and the pentagon interior (harmonic pieces),
    (ii) positive jump measures on the circle glue, and (iii) jump
    measures on the pentagon edges whose sign is the normal-derivative
    margin.  Each piece gets the estimator that can actually see it:

    * grid sign check where jumps are grid-visible and both sides are
      exact (circle glue and exterior zeros), against the tolerance
      -tol_factor * (max |grid Laplacian| over the whole disc);
    * slit-field region: spot certificates that the sampled field equals
      the mollified field (forced kernel quadrature) and that it is
      harmonic (5-point residual ratio ~4 under step halving);
    * pentagon interior: solver residual certificate;
    * pentagon edges: dense inward-margin minima.

    Raw worst node over everything is reported, not asserted.
    """
    from nonembed.bvp import _edge_margins
    from nonembed.fields import u_field, laplacian_residual
    f = tail.field
    X, Y = f.grid.nodes_xy()
    in_disc = (X * X + Y * Y) < 1.0
    stencil_ok = np.zeros_like(in_disc)
    stencil_ok[1:-1, 1:-1] = (in_disc[1:-1, 1:-1] & in_disc[2:, 1:-1]
                              & in_disc[:-2, 1:-1] & in_disc[1:-1, 2:]
                              & in_disc[1:-1, :-2])
    lap = laplacian_grid(f)
    sten = stencil_ok[1:-1, 1:-1]
    scale = float(np.max(np.abs(lap[sten])))

    YX = RESCALE * (X - RECENTER[0])
    YY = RESCALE * (Y - RECENTER[1])
    glue = tail.mollified.glue
    reg = glue.region_of(YX, YY)
    ext = reg == 0
    touches_ext = np.zeros_like(ext)
    touches_ext[1:-1, 1:-1] = (ext[1:-1, 1:-1] | ext[2:, 1:-1] | ext[:-2, 1:-1]
                               | ext[1:-1, 2:] | ext[1:-1, :-2])
    grid_set = (stencil_ok & touches_ext & ~tail.pentagon_band_excluded
                & ~tail.u_core_excluded)[1:-1, 1:-1]
    grid_min = float(np.min(lap[grid_set]))
    raw_min = float(np.min(lap[sten]))
    wi = np.unravel_index(np.argmin(np.where(sten, lap, np.inf)), lap.shape)

    # slit-field region spot certificates
    moon_ok = (stencil_ok & (reg == 1) & ~tail.pentagon_band_excluded
               & ~tail.u_core_excluded)
    rng = np.random.default_rng(seed)
    ii, jj = np.where(moon_ok)
    pick = rng.choice(len(ii), size=min(n_spot, len(ii)), replace=False)
    u = u_field()
    eq_err = 0.0
    ratio_lo, ratio_hi = np.inf, 0.0
    for p in pick:
        yx, yy = YX[ii[p], jj[p]], YY[ii[p], jj[p]]
        exact = glue.value(yx, yy)
        quadv = tail.mollified.value(yx, yy, force_quadrature=True)
        denom = max(abs(exact), 1e-300)
        eq_err = max(eq_err, abs(quadv - exact) / denom)
        r = math.hypot(yx, yy)
        hloc = 1e-3 * r
        if tail.mollified.glue.interface_distance(np.array([yx]),
                                                  np.array([yy]))[0] > 4 * hloc:
            r1 = laplacian_residual(u, (yx, yy), hloc)
            r2 = laplacian_residual(u, (yx, yy), hloc / 2.0)
            if abs(r2) > 1e-30:
                q = abs(r1 / r2)
                ratio_lo, ratio_hi = min(ratio_lo, q), max(ratio_hi, q)
    moon_certified = eq_err < 1e-8 and 3.0 <= ratio_lo and ratio_hi <= 5.0

    sel = tail.mollified.glue.selected
    pent_resid = sel.problem.residual(sel.w_field(), _combined_edge_data(sel))
    dense = _edge_margins(sel.geom, sel.w0, sel.w1, sel.N,
                          sel.problem.geom["h"], margin_samples)
    worst_margin = min(float(np.min(m["margin"])) for m in dense.values())

    grid_pass = grid_min >= -tol_factor * scale
    return dict(
        min_defect=grid_min,
        raw_min_defect=raw_min,
        scale=scale,
        tolerance=-tol_factor * scale,
        worst_node_xy=(float(X[wi[0] + 1, wi[1] + 1]),
                       float(Y[wi[0] + 1, wi[1] + 1])),
        n_grid_checked=int(grid_set.sum()),
        n_excluded_oscillation=int((stencil_ok & tail.u_core_excluded).sum()),
        n_excluded_pentagon=int((stencil_ok & tail.pentagon_band_excluded
                                 & ~tail.u_core_excluded).sum()),
        moon_equality_error=eq_err,
        moon_ratio_range=(float(ratio_lo), float(ratio_hi)),
        moon_certified=bool(moon_certified),
        pentagon_residual=pent_resid,
        pentagon_certified=pent_resid < 1e-10,
        min_edge_margin=worst_margin,
        edges_certified=worst_margin > 0.0,
        grid_pass=grid_pass,
        passes=bool(grid_pass and moon_certified and pent_resid < 1e-10
                    and worst_margin > 0.0),
    )


def _combined_edge_data(sel: SelectedN):
    from nonembed.bvp import pentagon_edge_data
    return pentagon_edge_data(sel.geom, sel.N)


# ---------------------------------------------------------------------------
# delta selection
# ---------------------------------------------------------------------------

@dataclass
class DeltaSelection:
    delta: Optional[float]
    tail: Optional[TailFunction]
    tree: SteinerTree
    history: list  # (delta, tree integral, est_error)

    @property
    def succeeded(self) -> bool:
        return self.delta is not None


def select_tail_delta(selected: SelectedN,
                      schedule: Optional[Sequence[float]] = None,
                      grid_n: int = 768, tol: float = 1e-10,
                      margin: float = 10.0) -> DeltaSelection:
    """First delta in a decreasing schedule for which the tree integral of
    the tail field is strictly negative (beyond the quadrature error).

    The schedule must stay inside (0, e^{-2K}).  If no delta qualifies the
    selection reports failure with the full scan history.
    """
    K = selected.geom.K
    bound = math.exp(-2.0 * K)
    if schedule is None:
        schedule = [bound / 2.0 ** k for k in range(1, 6)]
    if any(not (0.0 < d < bound) for d in schedule):
        raise MollifyError(f"delta schedule must lie in (0, {bound:.3e})")
    tree = tail_tree(K)
    history = []
    chosen = None
    chosen_tail = None
    for d in schedule:
        tail = build_tail_v(selected, d, grid_n=grid_n)
        res = tree_integral(tail.as_analytic_field(), tree, tol=tol)
        val = res.float_value
        history.append((d, val, res.est_error))
        if val < 0.0 and abs(val) > margin * res.est_error:
            chosen, chosen_tail = d, tail
            break
    return DeltaSelection(delta=chosen, tail=chosen_tail, tree=tree,
                          history=history)
