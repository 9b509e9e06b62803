"""Adaptive Gauss-Legendre quadrature with log-sum-exp accumulation.

Integrands are supplied in vectorized log-scaled form (sign and log
magnitude at each node), so integrals whose integrand spans hundreds of
e-foldings are accumulated without overflow.  Panels are bisected until
the G15 value of a panel agrees with the sum over its halves, with an
absolute floor tied to the running global magnitude so that panels
straddling zero crossings do not trigger runaway refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nonembed.logscale import LogScaledReal, signed_logsumexp

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(15)
_LOG_WEIGHTS = np.log(_WEIGHTS)


class QuadratureError(RuntimeError):
    """Adaptive refinement failed to converge; carries diagnostics."""


@dataclass
class QuadratureResult:
    value: LogScaledReal
    est_error: float
    n_evals: int

    @property
    def float_value(self) -> float:
        return self.value.to_float()

    def rel_error(self) -> float:
        if self.value.is_zero:
            return math.inf if self.est_error > 0 else 0.0
        return self.est_error / abs(self.value.to_float()) \
            if self.value.logmag < 650 else \
            math.exp(math.log(self.est_error) - self.value.logmag) \
            if self.est_error > 0 else 0.0


def _panel_sums(f_log, a: np.ndarray, b: np.ndarray):
    """G15 on each panel [a_i, b_i]: returns (signs, logmags, n_evals)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    ts = mid[:, None] + half[:, None] * _NODES[None, :]
    signs, logmags = f_log(ts.ravel())
    signs = np.asarray(signs).reshape(ts.shape)
    logmags = np.asarray(logmags).reshape(ts.shape)
    with np.errstate(divide="ignore"):
        lw = logmags + _LOG_WEIGHTS[None, :] + np.log(half)[:, None]

    def _masked_lse(mask):
        m = np.where(mask, lw, -np.inf)
        mx = np.max(m, axis=1)
        safe = mx > -np.inf
        out = np.full(len(a), -np.inf)
        if np.any(safe):
            out[safe] = mx[safe] + np.log(
                np.sum(np.exp(m[safe] - mx[safe][:, None]), axis=1))
        return out

    lpos = _masked_lse(signs > 0)
    lneg = _masked_lse(signs < 0)
    # combine the positive and negative partial sums per panel
    out_sign = np.zeros(len(a), dtype=int)
    out_log = np.full(len(a), -np.inf)
    hi = np.maximum(lpos, lneg)
    lo = np.minimum(lpos, lneg)
    both = (lpos > -np.inf) & (lneg > -np.inf)
    with np.errstate(invalid="ignore"):
        d = np.where(both, hi - lo, np.inf)
    cancel = both & (d == 0.0)
    live = (hi > -np.inf) & ~cancel
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.where(both, hi + np.log1p(-np.exp(-d)), hi)
    out_log[live] = mag[live]
    out_sign[live] = np.where(lpos[live] >= lneg[live], 1, -1)
    out_sign[live & (d == np.inf) & (lneg > lpos)] = -1
    return out_sign, out_log, ts.size


def _pair_add(s1, l1, s2, l2):
    """Signed-log addition x1 + x2, vectorized: returns (signs, logmags)."""
    hi = np.maximum(l1, l2)
    lo = np.minimum(l1, l2)
    with np.errstate(invalid="ignore"):
        d = np.where(hi > -np.inf, hi - lo, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        lsum = hi + np.log1p(np.exp(-d))
        ldiff = np.where(d > 0, hi + np.log1p(-np.exp(-d)), -np.inf)
    same = s1 == s2
    out_log = np.where(same, lsum, ldiff)
    out_sign = np.where(l1 >= l2, s1, s2)
    out_sign = np.where(same, s1, out_sign)
    # exact cancellation of opposite signs
    out_sign = np.where(~same & (d == 0), 0, out_sign)
    # zeros pass the other operand through
    out_log = np.where(s1 == 0, l2, out_log)
    out_sign = np.where(s1 == 0, s2, out_sign)
    out_log = np.where(s2 == 0, np.where(s1 == 0, -np.inf, l1), out_log)
    out_sign = np.where(s2 == 0, s1, out_sign)
    out_log = np.where(out_sign == 0, -np.inf, out_log)
    return out_sign.astype(int), out_log


def _pair_diff_logmag(s1, l1, s2, l2):
    """log |x1 - x2| for signed-log pairs, vectorized."""
    same = (s1 == s2) & (s1 != 0)
    hi = np.maximum(l1, l2)
    lo = np.minimum(l1, l2)
    with np.errstate(invalid="ignore"):
        d = np.where(hi > -np.inf, hi - lo, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        ldiff = np.where(d > 0, hi + np.log1p(-np.exp(-d)), -np.inf)
        lsum = hi + np.log1p(np.exp(-d))
    out = np.where(same, ldiff, lsum)
    out = np.where((s1 == 0) & (s2 == 0), -np.inf, out)
    out = np.where((s1 == 0) ^ (s2 == 0), np.maximum(l1, l2), out)
    return out


def adaptive_log_quadrature(f_log, a: float, b: float, rtol: float = 1e-10,
                            initial_panels: int = 16, max_depth: int = 40,
                            max_panels: int = 400_000) -> QuadratureResult:
    """Integrate a vectorized log-scaled integrand over [a, b].

    f_log(ts) must return (signs, logmags) arrays.  Refinement stops when
    each panel's bisection discrepancy is below rtol times the larger of
    the panel magnitude and the width-prorated global magnitude.
    """
    if b == a:
        return QuadratureResult(LogScaledReal.zero(), 0.0, 0)
    edges = np.linspace(a, b, initial_panels + 1)
    pa, pb = edges[:-1].copy(), edges[1:].copy()
    depth = np.zeros(initial_panels, dtype=int)
    prev_err = np.full(initial_panels, np.inf)

    acc_signs: list[np.ndarray] = []
    acc_logs: list[np.ndarray] = []
    acc_err: list[np.ndarray] = []
    n_evals = 0
    global_mag = -math.inf
    log_rtol = math.log(rtol)
    span = abs(b - a)

    while len(pa):
        if len(pa) > max_panels:
            raise QuadratureError(
                f"panel count exploded past {max_panels} "
                f"(depth range {depth.min()}..{depth.max()})")
        mid = 0.5 * (pa + pb)
        s1, l1, ne1 = _panel_sums(f_log, pa, pb)
        sl, ll, ne2 = _panel_sums(f_log, pa, mid)
        sr, lr, ne3 = _panel_sums(f_log, mid, pb)
        n_evals += ne1 + ne2 + ne3
        # refined estimate per panel = left + right
        s2, l2 = _pair_add(sl, ll, sr, lr)
        err_log = _pair_diff_logmag(s1, l1, s2, l2)
        global_mag = max(global_mag, float(np.max(l2, initial=-math.inf)))
        width_share = np.log((pb - pa) / span)
        floor = np.maximum(l2, global_mag + width_share)
        ok = (err_log <= log_rtol + floor) | (err_log == -np.inf)
        # integrand-noise plateau: bisection stopped improving the estimate,
        # accept and carry the remaining discrepancy into est_error
        stalled = (depth >= 6) & (err_log > prev_err - 0.18)
        done = ok | stalled | (depth >= max_depth)
        if np.any(done):
            acc_signs.append(s2[done])
            acc_logs.append(l2[done])
            acc_err.append(err_log[done])
        keep = ~done
        pa = np.concatenate([pa[keep], mid[keep]])
        pb = np.concatenate([mid[keep], pb[keep]])
        depth = np.concatenate([depth[keep] + 1, depth[keep] + 1])
        prev_err = np.concatenate([err_log[keep], err_log[keep]])

    signs = np.concatenate(acc_signs)
    logs = np.concatenate(acc_logs)
    errs = np.concatenate(acc_err)
    value = signed_logsumexp(signs, logs)
    err_total = signed_logsumexp(np.ones_like(signs), errs)
    est_error = err_total.to_float() if not err_total.is_zero else 0.0
    result = QuadratureResult(value, est_error, n_evals)
    # explicit failure if the depth cap left the error above tolerance
    if not value.is_zero and est_error > 0:
        if math.log(est_error) > math.log(rtol * 100) + value.logmag \
                and math.log(est_error) > global_mag + math.log(1e-6):
            raise QuadratureError(
                f"quadrature did not converge: value={value}, "
                f"est_error={est_error}, n_evals={n_evals}")
    return result
