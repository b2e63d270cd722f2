"""Independent reference values (mpmath, 30-40 digits) shared by the unit
and acceptance tests."""
import math

import mpmath as mp
import numpy as np

mp.mp.dps = 40


def e1_by_quadrature(x):
    # E1(x) = exp(-x) int_0^inf exp(-s) / (x + s) ds keeps the integrand O(1)
    x = mp.mpf(x)
    return mp.exp(-x) * mp.quad(lambda s: mp.exp(-s) / (x + s), sorted({mp.mpf(0), x, mp.mpf(1), mp.mpf(10), mp.mpf(60)}) + [mp.inf])


def en_by_quadrature(n, x):
    # E_n(x) = int_1^inf exp(-x t) t^-n dt
    x = mp.mpf(x)
    return mp.quad(lambda t: mp.exp(-x * t) / t**n, [1, 1 + 1 / x, 1 + 10 / x, mp.inf])


def radau_by_roots(k):
    # right Radau nodes on [0,1]: roots of d^(k-1)/dx^(k-1) [x^(k-1) (x-1)^k]
    p = [mp.mpf(1)]
    for _ in range(k):
        p = [a - b for a, b in zip(p + [0], [0] + p)]   # times (x - 1)
    p = p + [mp.mpf(0)] * (k - 1)                        # times x^(k-1)
    deg = len(p) - 1
    for _ in range(k - 1):
        p = [c * (deg - i) for i, c in enumerate(p[:-1])]
        deg -= 1
    roots = sorted(mp.polyroots(p, maxsteps=200, extraprec=200), key=lambda z: mp.re(z))
    return np.array([float(mp.re(z)) for z in roots])


CLOSED_RADAU = {
    1: ([1.0], [1.0]),
    2: ([1 / 3, 1.0], [0.75, 0.25]),
    3: ([(4 - math.sqrt(6)) / 10, (4 + math.sqrt(6)) / 10, 1.0],
        [(16 - math.sqrt(6)) / 36, (16 + math.sqrt(6)) / 36, 1 / 9]),
}


def stage_by_quadrature(r, tau_i, dt_sub, j):
    # w = a / sigma = c + x turns the endpoint singularity into an exponential
    # tail; exp(-c) is factored out so the quadrature sees an O(1) integrand
    a = mp.mpf(r) ** 2 / 4
    b = mp.mpf(dt_sub) - mp.mpf(tau_i)
    c = a / mp.mpf(tau_i)
    f = lambda x: (b + a / (c + x)) ** j * mp.exp(-x) / a
    return mp.exp(-c) * mp.quad(f, [0, 1, 10, mp.inf])


def heat_moment_by_quadrature(a, dt, j):
    """int_0^dt exp(-a/s) s^-2 (s/dt)^j ds via w = a/s = c + x, c = a/dt:
    exp(-c) int_0^inf exp(-x) a^(j-1) / (dt^j (c + x)^j) dx."""
    a, dt = mp.mpf(a), mp.mpf(dt)
    c = a / dt
    f = lambda x: mp.exp(-x) * a ** (j - 1) / (dt**j * (c + x) ** j)
    return mp.exp(-c) * mp.quad(f, [0, 1, 10, mp.inf])
