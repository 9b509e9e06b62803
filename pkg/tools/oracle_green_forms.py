#!/usr/bin/env python3
"""Validate the two candidate Green-identity forms for the slit-plane
field u and the vertex angle phi on the upper sector, and map the tree
integral over fractional K.

Form A (raw second identity, angle multiplier, 1/rho weights on legs):
    -int_{AA1} u/rho ds + int_{AA2} u/rho ds
        = int_arc phi u_r ds + (2pi/3) int_{AA2} (grad u . e_phi) ds
Form B (as used downstream, plain ds on legs):
    int_{AA1 u AA3} u ds = 2 int_{AA2} u ds + arc terms
"""

from mpmath import mp, mpf, sin, cos, exp, log, sqrt, atan2, pi, quad

mp.dps = 30


def u_val(r, th):
    return -exp(log(r) ** 2 - th**2) * sin(2 * th * log(r))


def grad_u(r, th):
    """Cartesian gradient of u via polar partials."""
    g = exp(log(r) ** 2 - th**2)
    ph = 2 * th * log(r)
    u_r = -g * (2 * log(r) * sin(ph) + 2 * th * cos(ph)) / r
    u_t = -g * (-2 * th * sin(ph) + 2 * log(r) * cos(ph))
    ct, st = cos(th), sin(th)
    ux = u_r * ct - u_t * st / r
    uy = u_r * st + u_t * ct / r
    return ux, uy


def geometry(K):
    a = exp(-K)
    t1 = a / 2 + sqrt(1 - 3 * a**2 / 4)
    A = (-a, mpf(0))
    A1 = (A[0] + t1 * cos(pi / 3), A[1] + t1 * sin(pi / 3))
    theta_A1 = atan2(A1[1], A1[0]) % (2 * pi)
    return a, t1, A, theta_A1


def leg_pieces(a, t1, n_near=160, n_far=300):
    pieces = [a * 30 * mpf(j) / n_near for j in range(n_near + 1)]
    ratio = (t1 / (a * 30)) ** (mpf(1) / n_far)
    t = a * 30
    for _ in range(n_far):
        t = t * ratio
        pieces.append(min(t, t1))
    pieces[-1] = t1
    return pieces


def form_A(K):
    a, t1, A, theta_A1 = geometry(K)

    def f_up(t):  # u/rho on the upper slanted leg, rho = t
        x, y = A[0] + t / 2, A[1] + t * sqrt(mpf(3)) / 2
        r = sqrt(x * x + y * y)
        th = atan2(y, x) % (2 * pi)
        return u_val(r, th) / t

    def f_axis(t):  # u/rho on the axis leg, rho = t (distance from A)
        r = a + t
        return u_val(r, pi) / t

    def f_axis_dtheta(t):  # (2pi/3) * grad u . e_phi, e_phi = (0,-1) on axis
        r = a + t
        ux, uy = grad_u(r, pi)
        return (2 * pi / 3) * (-uy)

    def f_arc(th):
        x, y = cos(th), sin(th)
        phi = (atan2(y - A[1], x - A[0]) % (2 * pi)) - pi / 3
        return phi * (-2 * th * exp(-th**2))  # phi * u_r at r=1

    pieces = leg_pieces(a, t1)
    lhs = -quad(f_up, pieces) + quad(f_axis, leg_pieces(a, 1 - a))
    rhs = quad(f_arc, [theta_A1, pi]) + quad(f_axis_dtheta, leg_pieces(a, 1 - a))
    return lhs, rhs


def tree_integral(K):
    a, t1, A, theta_A1 = geometry(K)

    def leg(lower):
        sgn = -1 if lower else 1

        def f(t):
            x, y = A[0] + t / 2, A[1] + sgn * t * sqrt(mpf(3)) / 2
            r = sqrt(x * x + y * y)
            th = atan2(y, x) % (2 * pi)
            return u_val(r, th)

        return quad(f, leg_pieces(a, t1))

    axis = quad(lambda t: u_val(a + t, pi), leg_pieces(a, 1 - a))
    return leg(False) + leg(True) + axis


def main():
    for K in (2, 4):
        lhs, rhs = form_A(K)
        denom = max(abs(lhs), abs(rhs))
        print(f"K={K}: formA lhs={mp.nstr(lhs, 12)} rhs={mp.nstr(rhs, 12)} "
              f"rel_resid={mp.nstr(abs(lhs - rhs) / denom, 3)}")

    print("\ntree integral over fractional K:")
    for Kx in [mpf(k) / 4 for k in range(4, 33)]:
        ti = tree_integral(Kx)
        print(f"  K={mp.nstr(Kx, 4):>6}  tree={mp.nstr(ti, 10)}")


if __name__ == "__main__":
    main()
