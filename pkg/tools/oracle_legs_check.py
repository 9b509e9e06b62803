#!/usr/bin/env python3
"""Careful re-computation of the slanted-leg integrals with fine,
oscillation-aware subdivision, at two precisions, to validate the
tree-integral oracle."""

from mpmath import mp, mpf, sin, cos, exp, log, sqrt, atan2, pi, quad


def leg_integral(K, lower, dps, n_near=160, n_far=400, power=1):
    mp.dps = dps
    a = exp(-K)
    t1 = a / 2 + sqrt(1 - 3 * a**2 / 4)
    A = (-a, mpf(0))
    sgn = -1 if lower else 1
    dx, dy = cos(pi / 3), sgn * sin(pi / 3)

    def f(t):
        x = A[0] + t * dx
        y = A[1] + t * dy
        r = sqrt(x * x + y * y)
        th = atan2(y, x) % (2 * pi)
        return (-exp(log(r) ** 2 - th**2) * sin(2 * th * log(r))) ** power

    # near-vertex zone: tau = t/a up to tau_near, small uniform steps in tau
    tau_near = 30
    pieces = [a * tau_near * mpf(j) / n_near for j in range(n_near + 1)]
    # far zone: geometric in t from a*tau_near to t1
    ratio = (t1 / (a * tau_near)) ** (mpf(1) / n_far)
    t = a * tau_near
    for _ in range(n_far):
        t = t * ratio
        pieces.append(min(t, t1))
    pieces[-1] = t1
    return quad(f, pieces)


def main():
    for K in (1, 2, 3, 4, 5):
        up30 = leg_integral(K, lower=False, dps=30)
        lo30 = leg_integral(K, lower=True, dps=30)
        up40 = leg_integral(K, lower=False, dps=40, n_near=320, n_far=800)
        lo40 = leg_integral(K, lower=True, dps=40, n_near=320, n_far=800)
        mp.dps = 40
        print(f"K={K}")
        print(f"  legs(dps30)      = {mp.nstr(up30 + lo30, 16)}")
        print(f"  legs(dps40,fine) = {mp.nstr(up40 + lo40, 16)}")
        print(f"  |diff|           = {mp.nstr(abs((up30 + lo30) - (up40 + lo40)), 3)}")


if __name__ == "__main__":
    main()
