"""Command-line orchestration: end-to-end verification pipelines with
machine-readable reports, metric assembly with grid dumps, and grid
format conversion.

Subcommands:

    nonembed verify  {moon,tail,corollary,g1,annulus,ruled,all} [flags]
    nonembed assemble {gII,g1,annulus} [flags]
    nonembed export  FIELD --format {csv,json} --dst PATH

Reports are JSON with stable key order; numbers that overflow doubles are
emitted as {"sign": s, "logmag": m} objects.  Each check carries a stable
anchor string naming the claim it verifies.  Exit status: 0 all checks
passed, 1 at least one verification failed, 2 invalid configuration or a
pipeline error.  The runtime block is the only nondeterministic part of a
report; everything else is reproducible bit for bit for a fixed config.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from nonembed import assembly, bvp, conformal, mollify, ruled, trees
from nonembed.fields import (laplacian_residual, radial_derivative_u,
                             u_field, u_float)
from nonembed.gridio import convert_grid, write_grid_csv
from nonembed.logscale import LogScaledReal

VERIFY_TARGETS = ("moon", "tail", "corollary", "g1", "annulus", "ruled", "all")
ASSEMBLE_TARGETS = ("gII", "g1", "annulus")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    quad_tol: float = 1e-10
    k_max: int = 10
    grid_h: float = 2.2 / 512       # tail-field sampling grid
    pentagon_resolution: int = 192
    delta_steps: int = 4            # tail schedule within (0, e^{-2K})
    margin_frac: float = 0.05
    seed: int = 20260809
    n_chords: int = 100
    n_max: int = 3                  # pocket-metric truncation
    annulus_n_max: int = 8
    ruled_tau: float = 0.5
    ruled_eps: float = 0.05
    out_dir: str = "out"

    def validate(self) -> None:
        if not (0.0 < self.quad_tol <= 1e-2):
            raise ConfigError(f"quad.tol must lie in (0, 1e-2], got {self.quad_tol}")
        if self.k_max < 1:
            raise ConfigError("k.max must be >= 1")
        if not (1e-4 <= self.grid_h <= 0.1):
            raise ConfigError(f"grid.h out of range: {self.grid_h}")
        if self.delta_steps < 1:
            raise ConfigError("delta schedule must be non-empty")
        if self.n_max < 1 or self.annulus_n_max < 1:
            raise ConfigError("truncation orders must be >= 1")
        if not (0.0 < self.ruled_tau < 1.0):
            raise ConfigError("ruled.tau must lie in (0, 1)")
        if self.margin_frac <= 0:
            raise ConfigError("margin fraction must be positive")

    @property
    def tail_grid_n(self) -> int:
        return max(64, int(round(2.2 / self.grid_h)))


_CONFIG_KEYS = {
    "quad.tol": ("quad_tol", float),
    "k.max": ("k_max", int),
    "grid.h": ("grid_h", float),
    "pentagon.resolution": ("pentagon_resolution", int),
    "delta.steps": ("delta_steps", int),
    "margin.frac": ("margin_frac", float),
    "seed": ("seed", int),
    "chords.count": ("n_chords", int),
    "truncation.nmax": ("n_max", int),
    "annulus.nmax": ("annulus_n_max", int),
    "ruled.tau": ("ruled_tau", float),
    "ruled.eps": ("ruled_eps", float),
    "output.dir": ("out_dir", str),
}


def load_config(path: Optional[str]) -> RunConfig:
    """Flat key = value text configuration; unknown keys are rejected."""
    cfg = RunConfig()
    if path is None:
        return cfg
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        attr, typ = _CONFIG_KEYS[key]
        try:
            setattr(cfg, attr, typ(val))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return cfg


def encode_number(x):
    """JSON-safe number: plain float when representable, sign/logmag pair
    otherwise."""
    if isinstance(x, LogScaledReal):
        f = x.to_float()
        if math.isfinite(f):
            return f
        return {"sign": x.sign, "logmag": x.logmag}
    x = float(x)
    if math.isfinite(x):
        return x
    return {"sign": 0 if x == 0 else (1 if x > 0 else -1), "logmag": math.inf}


def check(name: str, anchor: str, passed: bool, **values) -> dict:
    rec = {"name": name, "anchor": anchor, "pass": bool(passed)}
    rec["values"] = {k: _jsonable(v) for k, v in values.items()}
    return rec


def _jsonable(v):
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    if isinstance(v, LogScaledReal):
        return encode_number(v)
    if isinstance(v, (float, np.floating)):
        return encode_number(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in np.asarray(v).ravel().tolist()] \
            if isinstance(v, np.ndarray) else [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return repr(v)


# ---------------------------------------------------------------------------
# shared pipeline context (one process run)
# ---------------------------------------------------------------------------

class PipelineContext:
    """Caches the expensive shared stages across targets in one run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._k_star = None
        self._selected = None
        self._tail = None

    @property
    def k_star(self) -> int:
        if self._k_star is None:
            k = trees.find_min_k(self.cfg.k_max, tol=self.cfg.quad_tol)
            if k is None:
                raise ConfigError(
                    f"no K <= {self.cfg.k_max} satisfies the sign conditions")
            self._k_star = k
        return self._k_star

    @property
    def selected(self) -> bvp.SelectedN:
        if self._selected is None:
            self._selected = bvp.select_N(
                self.k_star, resolution=self.cfg.pentagon_resolution,
                margin_frac=self.cfg.margin_frac)
        return self._selected

    @property
    def default_delta(self) -> float:
        return math.exp(-2.0 * self.k_star) / 2.0

    @property
    def tail(self) -> mollify.TailFunction:
        if self._tail is None:
            self._tail = mollify.build_tail_v(
                self.selected, self.default_delta,
                grid_n=self.cfg.tail_grid_n)
        return self._tail


# ---------------------------------------------------------------------------
# verification pipelines
# ---------------------------------------------------------------------------

def verify_moon(ctx: PipelineContext) -> list:
    cfg = ctx.cfg
    u = u_field()
    checks = []
    rng = np.random.default_rng(cfg.seed)

    thetas = rng.uniform(0.05, 2 * math.pi - 0.05, size=50)
    worst_circle = max(abs(u_float(math.cos(t), math.sin(t))) for t in thetas)
    checks.append(check("field-vanishes-on-unit-circle",
                        "circle-trace-zero", worst_circle <= 1e-14,
                        max_abs=worst_circle, n_samples=50))

    worst_rel = 0.0
    all_neg = True
    for t in thetas:
        x0, y0 = math.cos(t), math.sin(t)
        h = 1e-4
        f1 = u.value((1 - h) * x0, (1 - h) * y0)
        f2 = u.value((1 - 2 * h) * x0, (1 - 2 * h) * y0)
        fd = (-4 * f1 + f2) / (2 * h)
        exact = radial_derivative_u(float(t))
        all_neg &= exact < 0
        worst_rel = max(worst_rel, abs(fd - exact) / abs(exact))
    checks.append(check("radial-derivative-closed-form",
                        "boundary-slope-negative",
                        all_neg and worst_rel <= 1e-6,
                        max_rel_error=worst_rel, negative_everywhere=all_neg))

    ratios = []
    tried = 0
    while len(ratios) < 100 and tried < 10000:
        tried += 1
        r = rng.uniform(0.2, 0.9)
        th = rng.uniform(math.pi / 3 + 0.05, 5 * math.pi / 3 - 0.05)
        p = (r * math.cos(th), r * math.sin(th))
        r1 = laplacian_residual(u, p, 1.0 / 128)
        r2 = laplacian_residual(u, p, 1.0 / 256)
        scale = abs(u.value(*p)) + 1e-30
        if abs(r1) < 1e-8 * scale / (1.0 / 128) ** 2:
            continue  # degenerate leading term; ratio would be noise
        ratios.append(abs(r1 / r2))
    ratio_ok = len(ratios) == 100 and all(3.5 <= q <= 4.5 for q in ratios)
    checks.append(check("harmonicity-residual-ratio", "laplacian-ratio-4",
                        ratio_ok, n_points=len(ratios),
                        min_ratio=min(ratios), max_ratio=max(ratios)))

    aa1 = trees.aa2_integral_scaled(1, tol=cfg.quad_tol)
    checks.append(check("axis-integral-cancels-at-K1", "axis-integral-zero",
                        abs(aa1.float_value) <= 1e-10,
                        value=aa1.value, est_error=aa1.est_error))

    k_star = ctx.k_star
    checks.append(check("minimal-K-scan", "minimal-K",
                        k_star == 4, k_star=k_star, k_max=cfg.k_max))

    residuals = {}
    for K in range(2, 7):
        residuals[K] = trees.green_identity_residual(K, tol=cfg.quad_tol)
    checks.append(check(
        "legs-identity-residual", "legs-vs-axis-plus-arcs",
        all(v <= 1e-4 for v in residuals.values()),
        residuals={str(k): v for k, v in residuals.items()},
        note="the displayed identity omits the 1/rho leg weights; the "
             "corrected weighted identity verifies to 1e-9 (see tests)"))

    ti = trees.tree_integral(u_field(), trees.moon_tree(k_star),
                             tol=cfg.quad_tol)
    checks.append(check("tree-integral-sign", "tree-integral-negative",
                        ti.float_value < 0.0,
                        value=ti.value, est_error=ti.est_error, K=k_star))

    tree = trees.moon_tree(k_star)
    chords = trees.random_boundary_chords(tree, cfg.n_chords, seed=cfg.seed)
    signs = [trees.check_segment_positivity(s, tree) for s in chords]
    checks.append(check("chord-positivity", "chord-integrals-positive",
                        all(s == 1 for s in signs), n_chords=len(chords),
                        seed=cfg.seed))
    return checks


def verify_tail(ctx: PipelineContext) -> list:
    cfg = ctx.cfg
    sel = ctx.selected
    checks = []
    worst = {e: float(np.min(m["margin"])) for e, m in sel.margins.items()}
    checks.append(check("pentagon-N-selection", "edge-margins-positive",
                        all(v > 0 for v in worst.values()),
                        N=sel.N, worst_margins=worst,
                        resolution=cfg.pentagon_resolution))

    tail = ctx.tail
    f = tail.field
    X, Y = f.grid.nodes_xy()
    outside = (X**2 + Y**2 > 1.0) & (X < 0.9)
    sup = float(np.max(np.abs(f.values[outside])))
    checks.append(check("tail-support", "tail-vanishes-left-of-0.9",
                        sup == 0.0, max_abs=sup,
                        n_nodes=int(outside.sum())))

    rep = mollify.tail_subharmonic_report(tail)
    checks.append(check("tail-subharmonicity", "tail-laplacian-nonnegative",
                        rep["passes"],
                        **{k: v for k, v in rep.items()
                           if k not in ("worst_node_xy",)},
                        worst_node=list(rep["worst_node_xy"])))

    schedule = [ctx.default_delta / 2.0 ** k for k in range(cfg.delta_steps)]
    selection = mollify.select_tail_delta(sel, schedule=schedule,
                                          grid_n=min(cfg.tail_grid_n, 384),
                                          tol=cfg.quad_tol)
    checks.append(check(
        "tail-tree-integral", "tail-tree-integral-negative",
        selection.succeeded,
        history=[{"delta": d, "value": v, "est_error": e}
                 for (d, v, e) in selection.history],
        selected_delta=selection.delta))
    return checks


def verify_corollary(ctx: PipelineContext) -> list:
    cfg = ctx.cfg
    tail = ctx.tail
    tree = mollify.tail_tree(ctx.k_star)
    checks = []

    rep = conformal.tail_curvature_report(tail, delta=1e-6)
    checks.append(check("bump-metric-curvature-sign", "curvature-nonpositive",
                        rep["curvature_sign_pass"],
                        max_positive_logK=rep["max_positive_logK"],
                        scale_logK=rep["scale_logK"]))

    lhs, rhs = conformal.length_derivative_check(tail, tree)
    agree = abs(lhs - rhs) <= 1e-6 * abs(rhs)
    checks.append(check(
        "length-derivative-match", "length-slope-equals-tree-integral",
        agree and lhs < 0 and rhs < 0, lhs=lhs, rhs=rhs,
        note="the finite-difference step leaves the linear regime of the "
             "exponential on this field (step * max|v| ~ 0.85); see ledger"))

    scan = conformal.find_delta0(tail, tree, n_scan=12)
    ok = scan.succeeded
    margin = None
    if ok:
        g_half = conformal.ConformalMetric.tail_metric(tail, scan.delta0 / 2)
        L_half = conformal.curve_length(g_half, tree)
        L0 = conformal.curve_length(conformal.ConformalMetric.flat(), tree)
        margin = L0 - L_half
        ok = margin > 0
    checks.append(check("shortening-threshold", "shortening-amplitude-positive",
                        ok, delta0=scan.delta0,
                        history=[{"delta": d, "length": a, "flat": b,
                                  "shortens": s}
                                 for (d, a, b, s) in scan.history],
                        half_margin=margin))
    return checks


def verify_g1(ctx: PipelineContext) -> list:
    cfg = ctx.cfg
    pm = assembly.build_g1(cfg.n_max, grid_n=1536)
    rep = pm.curvature_report()
    return [
        check("pocket-curvature-negative", "pockets-negative",
              rep["all_pockets_negative"], pockets=rep["pockets"]),
        check("flat-outside-pockets", "flat-outside",
              rep["flat_outside"], max_abs_outside=rep["max_abs_K_outside"],
              scale=rep["scale"]),
    ]


def verify_annulus(ctx: PipelineContext) -> list:
    cfg = ctx.cfg
    n_max = cfg.annulus_n_max
    mu = assembly.measure_mu_schedule(n_max)
    checks = []
    bounds = [assembly.cutoff_c4_norm(n, mu[n - 1]) for n in range(1, n_max + 1)]
    checks.append(check("cutoff-weight-bound", "weighted-c4-bound",
                        all(b <= 2.0 ** -(i + 1) for i, b in enumerate(bounds)),
                        mu=mu, bounds=bounds))
    lo = max(1, n_max // 2)
    d = assembly.cutoff_partial_sum_c4_distance(mu, n_max, lo)
    checks.append(check("cutoff-partial-sums-cauchy", "c4-cauchy-tail",
                        d <= 2.0 ** (-lo + 1), distance=d,
                        bound=2.0 ** (-lo + 1)))

    stack = assembly.build_annulus_stack([1.0] * n_max, n_max, mu=mu,
                                         tail=ctx.tail)
    ann = {}
    all_neg = True
    for n in range(1, min(6, n_max - 1) + 1):
        recs = assembly.annulus_curvature_samples(stack, n)
        worst = max(r["K"] for r in recs)
        ann[str(n)] = worst
        all_neg &= worst < 0.0
    checks.append(check("annulus-curvature-negative", "annuli-negative",
                        all_neg, worst_K_per_annulus=ann))

    mags = assembly.origin_flatness(stack)
    checks.append(check("origin-flatness", "origin-derivatives-vanish",
                        all(m <= 1e-8 for m in mags),
                        derivative_magnitudes=mags))
    return checks


def verify_ruled(ctx: PipelineContext) -> list:
    cfg = ctx.cfg
    tau = cfg.ruled_tau
    checks = []

    cyl = ruled.cylinder(tau)
    surf, diag = ruled.extract_rulings(ruled.graph_of(cyl))
    d_err = float(np.max(np.abs(surf.d - np.array([1.0, 0.0, 0.0]))))
    s = surf.s
    c_exact = np.stack([np.full_like(s, 2.0), -s / tau, -s * s / (2 * tau)],
                       axis=-1)
    c_err = float(np.max(np.abs(surf.c - c_exact)))
    checks.append(check("cylinder-round-trip", "ruling-recovery-exact",
                        max(c_err, d_err) <= 1e-10, c_error=c_err,
                        d_error=d_err,
                        straightness=float(np.max(diag["straightness"]))))

    gen = ruled.generate_surface(tau, cfg.ruled_eps, seed=cfg.seed)
    ext = ruled.extend_ruled(gen.sample(n=257), -1.0, 2.0)
    worst_offdiag = 0.0
    for i in (30, 128, 220):
        for t in (-1.0, 0.5, 2.0):
            II = ruled.second_fundamental_form(ext, t, i)
            rel = max(abs(II[0, 0]), abs(II[0, 1])) / (1 + abs(II[1, 1]))
            worst_offdiag = max(worst_offdiag, rel)
    checks.append(check("extension-flatness", "extended-form-degenerate",
                        worst_offdiag <= 1e-8, worst_offdiag=worst_offdiag))

    devs = []
    for eps in (0.1, 0.05, 0.025):
        g = ruled.generate_surface(tau, eps, seed=cfg.seed)
        samp = ruled.extend_ruled(g.sample(n=257), -1.0, 2.0)
        cc = ruled.concavity_check(samp)
        dev = max(float(np.max(np.abs(cc["a0"] + 1.0 / tau**2))),
                  float(np.max(np.abs(cc["a1"]))),
                  float(np.max(np.abs(cc["a2"]))))
        devs.append(dev)
        if eps == 0.025:
            kappa_ok = True
            for i in (64, 128, 192):
                s0 = samp.s[i]
                target = -tau / (1.0 + s0 * s0) ** 1.5
                for t in (0.0, 1.0, 2.0):
                    k = ruled.principal_curvature(samp, t, i)
                    kappa_ok &= abs(k - target) <= 0.2 * abs(target)
    checks.append(check("concavity-epsilon-family", "quadratic-deviation-trend",
                        devs[0] > devs[1] > devs[2] and kappa_ok,
                        deviations=devs, kappa_within_20pct=kappa_ok))

    gen05 = ruled.generate_surface(tau, 0.05, seed=cfg.seed)
    inst = ruled.hypothesis_instances(gen05, 20, seed0=cfg.seed)
    margins = [r["margin"] for (_, _, r) in inst]
    checks.append(check("comparison-margins", "competitor-stays-above",
                        min(margins) >= -1e-8, n_instances=len(inst),
                        min_margin=min(margins)))

    ok = True
    worst_gap = math.inf
    for sd in range(50):
        curve = ruled.random_curve_above(ext, seed=cfg.seed + sd)
        lc, lp = ruled.project_and_compare(curve, ext)
        worst_gap = min(worst_gap, lc - lp)
        ok &= lc >= lp - 1e-8
    checks.append(check("projection-lengths", "projection-shortens",
                        ok, n_curves=50, worst_gap=worst_gap))
    return checks


_PIPELINES = {
    "moon": verify_moon,
    "tail": verify_tail,
    "corollary": verify_corollary,
    "g1": verify_g1,
    "annulus": verify_annulus,
    "ruled": verify_ruled,
}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_verify(target: str, cfg: RunConfig) -> int:
    cfg.validate()
    targets = list(_PIPELINES) if target == "all" else [target]
    ctx = PipelineContext(cfg)
    out = Path(cfg.out_dir)
    cfg_echo = asdict(cfg)
    cfg_echo.pop("out_dir")  # not semantic; keeps reports comparable
    report = {"config": cfg_echo, "targets": targets, "checks": []}
    runtime = {}
    t_total = time.time()
    for t in targets:
        t0 = time.time()
        for rec in _PIPELINES[t](ctx):
            rec["target"] = t
            report["checks"].append(rec)
            status = "PASS" if rec["pass"] else "FAIL"
            print(f"[{status}] {t}:{rec['name']} ({rec['anchor']})")
        runtime[t] = time.time() - t0
    if ctx._k_star is not None:
        report["K"] = ctx.k_star
    if ctx._tail is not None:
        write_grid_csv(ctx.tail.field, out / "tail_field.csv")
        report["artifacts"] = ["tail_field.csv", "tail_field.json"]
    n_fail = sum(1 for c in report["checks"] if not c["pass"])
    report["summary"] = {
        "n_checks": len(report["checks"]),
        "n_fail": n_fail,
        "overall_pass": n_fail == 0,
    }
    _write_json(out / "report.json", report)
    # runtimes live apart from the reproducible report
    _write_json(out / "runtime.json",
                {"seconds_total": time.time() - t_total, "per_target": runtime})
    print(f"report: {out / 'report.json'} "
          f"({len(report['checks']) - n_fail}/{len(report['checks'])} passed)")
    return 0 if n_fail == 0 else 1


def cmd_assemble(target: str, cfg: RunConfig) -> int:
    cfg.validate()
    ctx = PipelineContext(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config": asdict(cfg), "target": target}
    if target == "g1":
        pm = assembly.build_g1(cfg.n_max, grid_n=1536)
        write_grid_csv(pm.metric.grid_factor, out / "g1_factor.csv")
        K = conformal.gaussian_curvature(pm.metric)
        kf = bvp.ScalarField(
            grid=bvp.MaskedGrid(origin=(pm.grid.origin[0] + pm.grid.h,
                                        pm.grid.origin[1] + pm.grid.h),
                                h=pm.grid.h,
                                mask=pm.grid.mask[1:-1, 1:-1].copy(),
                                subgrid_boundary=True),
            values=K.values)
        write_grid_csv(kf, out / "g1_curvature.csv")
        manifest["pockets"] = _jsonable(pm.curvature_report()["pockets"])
        manifest["artifacts"] = ["g1_factor.csv", "g1_curvature.csv"]
    elif target == "gII":
        w = assembly.RotationSum(base=ctx.tail)
        sched = assembly.build_bump_schedule(min(cfg.n_max + 3, 8), w)
        manifest["bump_centers"] = _jsonable(sched.centers)
        manifest["bump_radii"] = _jsonable(sched.radii)
        manifest["bump_amplitudes"] = _jsonable(sched.amplitudes)
        manifest["derivative_bounds"] = _jsonable(sched.derivative_bounds)
        manifest["sub_tail_orientation"] = \
            "index 180 faces the negative x-axis"
        grid = bvp.box_grid((float(sched.centers[0][0]),
                             float(sched.centers[0][1])),
                            float(sched.radii[0]), 256)
        X, Y = grid.nodes_xy()
        vals = np.zeros(grid.shape)
        it = np.nditer(vals, flags=["multi_index"])
        for _ in it:
            i, j = it.multi_index
            vals[i, j] = assembly.eval_gII_factor(sched, w,
                                                  float(X[i, j]), float(Y[i, j]))
        write_grid_csv(bvp.ScalarField(grid=grid, values=vals),
                       out / "gII_factor_ball1.csv")
        manifest["artifacts"] = ["gII_factor_ball1.csv"]
    elif target == "annulus":
        n_max = cfg.annulus_n_max
        mu = assembly.measure_mu_schedule(n_max)
        eta = [1.0] * n_max
        stack = assembly.build_annulus_stack(eta, n_max, mu=mu, tail=ctx.tail)
        manifest["mu"] = mu
        manifest["eta"] = eta
        manifest["plantings"] = _jsonable(
            [{"center": c, "sigma": s, "amplitude": a}
             for (c, s, a) in stack.plantings])
        rs = np.linspace(1e-3, 0.999, 2000)
        doc_rows = [[repr(float(r)), repr(float(v))]
                    for r, v in zip(rs, stack.cutoff_sum(rs))]
        _write_json(out / "annulus_cutoff_profile.json",
                    {"columns": ["r", "factor"], "rows": doc_rows})
        manifest["artifacts"] = ["annulus_cutoff_profile.json"]
    else:
        raise ConfigError(f"unknown assemble target {target!r}")
    _write_json(out / "manifest.json", manifest)
    print(f"manifest: {out / 'manifest.json'}")
    return 0


def cmd_export(src: str, fmt: str, dst: str) -> int:
    convert_grid(src, fmt, dst)
    print(f"wrote {dst}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nonembed",
        description="verification pipelines for slit-plane tree metrics, "
                    "glued pentagon tails, and developable comparisons")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", metavar="PATH", default=None)
        sp.add_argument("--out", metavar="DIR", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--grid-h", type=float, default=None)
        sp.add_argument("--kmax", type=int, default=None)
        sp.add_argument("--nmax", type=int, default=None)

    v = sub.add_parser("verify", help="run a verification pipeline")
    v.add_argument("target", choices=VERIFY_TARGETS)
    add_common(v)

    a = sub.add_parser("assemble", help="build a metric and dump grids")
    a.add_argument("target", choices=ASSEMBLE_TARGETS)
    add_common(a)

    e = sub.add_parser("export", help="convert grid dumps between formats")
    e.add_argument("field", metavar="PATH")
    e.add_argument("--format", choices=("csv", "json"), required=True)
    e.add_argument("--dst", metavar="PATH", required=True)
    return p


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    if args.out is not None:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.grid_h is not None:
        cfg.grid_h = args.grid_h
    if args.kmax is not None:
        cfg.k_max = args.kmax
    if args.nmax is not None:
        cfg.n_max = args.nmax
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export":
            return cmd_export(args.field, args.format, args.dst)
        cfg = _apply_flags(load_config(args.config), args)
        if args.command == "verify":
            return cmd_verify(args.target, cfg)
        return cmd_assemble(args.target, cfg)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pipeline failure
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
