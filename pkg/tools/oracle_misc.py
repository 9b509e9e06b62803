#!/usr/bin/env python3
"""Small one-off oracles: chord positivity, frozen field values, and the
discrete-curvature error level for the hyperbolic-disc factor test."""

import numpy as np
from mpmath import mp, mpf, sin, cos, exp, log, sqrt, atan2, pi, quad

mp.dps = 30


def u_val(r, th):
    return -exp(log(r) ** 2 - th**2) * sin(2 * th * log(r))


def chord_integral(K, th_a, th_b, n=400):
    """Integral of u over the chord between unit-circle points at polar
    angles th_a, th_b."""
    p = (cos(th_a), sin(th_a))
    q = (cos(th_b), sin(th_b))
    L = sqrt((q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2)

    def f(t):
        x = p[0] + t * (q[0] - p[0])
        y = p[1] + t * (q[1] - p[1])
        r = sqrt(x * x + y * y)
        th = atan2(y, x) % (2 * pi)
        return u_val(r, th) * L

    return quad(f, [mpf(j) / n for j in range(n + 1)])


def main():
    K = 4
    # vertical chord x1=-0.5: endpoints at polar angles 2pi/3 and 4pi/3
    print("chord x1=-0.5:", mp.nstr(chord_integral(K, 2 * pi / 3, 4 * pi / 3), 12))
    print("chord (1.2, 2.8):", mp.nstr(chord_integral(K, mpf(12) / 10, mpf(28) / 10), 12))
    print("chord (2.0, 4.4):", mp.nstr(chord_integral(K, mpf(2), mpf(44) / 10), 12))
    print("chord (1.1, 5.2):", mp.nstr(chord_integral(K, mpf(11) / 10, mpf(52) / 10), 12))

    # frozen field value at (r=e^{-1/4}, theta=pi/2)
    v = u_val(exp(-mpf(1) / 4), pi / 2)
    ref = exp(mpf(1) / 16 - pi**2 / 4) / sqrt(2)
    print("u(e^-1/4, pi/2) =", mp.nstr(v, 20), " ref:", mp.nstr(ref, 20))

    # discrete curvature of the hyperbolic factor phi = ln(2/(1-r^2))
    for h in (1.0 / 128, 1.0 / 256, 1.0 / 512):
        n = int(round(2.0 / h))
        xs = -1.0 + h * np.arange(n + 1)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        R2 = X**2 + Y**2
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(R2 < 1.0, np.log(2.0 / (1.0 - R2)), np.nan)
        lap = (phi[2:, 1:-1] + phi[:-2, 1:-1] + phi[1:-1, 2:] + phi[1:-1, :-2]
               - 4.0 * phi[1:-1, 1:-1]) / h**2
        Kc = -np.exp(-2.0 * phi[1:-1, 1:-1]) * lap
        Rc = np.sqrt(R2[1:-1, 1:-1])
        # stencil entirely inside r<0.95
        ok = Rc < 0.95 - 1.02 * h
        err = np.abs(Kc[ok] + 1.0)
        inner = Rc[ok] < 0.90
        print(f"h=1/{int(1 / h)}: max|K+1|={np.nanmax(err):.3e}  "
              f"max(r<0.90)={np.nanmax(err[inner[...]]):.3e}  "
              f"rms={np.sqrt(np.nanmean(err ** 2)):.3e}")


if __name__ == "__main__":
    main()
